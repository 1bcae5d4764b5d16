// Acceptance runner: one PASS/FAIL line per check.
//   acceptance            run all checks
//   acceptance 3 7        run checks 3 and 7
// Exit status is 0 only if every requested check passed.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "istlab/verify.hpp"

int main(int argc, char** argv) {
  using namespace istlab;
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
  if (ids.empty())
    for (int i = 1; i <= static_cast<int>(verify::checks().size()); ++i) ids.push_back(i);
  verify::Options o;
  if (const char* s = std::getenv("ISTLAB_ACCEPTANCE_SEED")) o.seed = std::strtoull(s, nullptr, 10);
  bool all = true;
  for (int id : ids) {
    try {
      const auto r = verify::run_check(id, o);
      std::cout << verify::line(r) << std::endl;
      all &= r.pass;
    } catch (const Error& e) {
      std::cout << "FAIL c" << id << ": " << e.what() << std::endl;
      all = false;
    }
  }
  return all ? 0 : 1;
}
