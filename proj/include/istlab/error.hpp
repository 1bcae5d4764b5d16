#ifndef ISTLAB_ERROR_HPP
#define ISTLAB_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace istlab {

enum class Errc {
  domain,        // argument outside the operation's domain
  ordering,      // t1 < t0 and similar
  out_of_range,  // query outside the object's extent
  convergence,   // iterative solver did not converge
  regime,        // parameters in the wrong criticality regime
  integration,   // quadrature failed or diverged
  explosion,     // jump/individual guard exceeded
  degenerate,    // division by a vanishing harmonic function or barrier
  consistency,   // internal cross-check failed
  unsupported,   // feature outside the shipped variants
  usage,         // malformed configuration
  io
};

constexpr std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::domain: return "domain";
    case Errc::ordering: return "ordering";
    case Errc::out_of_range: return "out_of_range";
    case Errc::convergence: return "convergence";
    case Errc::regime: return "regime";
    case Errc::integration: return "integration";
    case Errc::explosion: return "explosion";
    case Errc::degenerate: return "degenerate";
    case Errc::consistency: return "consistency";
    case Errc::unsupported: return "unsupported";
    case Errc::usage: return "usage";
    case Errc::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// CLI exit status for an error code: 2 usage, 3 numerical failure, 4 refusal.
constexpr int exit_status(Errc c) {
  switch (c) {
    case Errc::usage: return 2;
    case Errc::convergence:
    case Errc::integration:
    case Errc::explosion:
    case Errc::consistency: return 3;
    case Errc::regime:
    case Errc::domain:
    case Errc::ordering:
    case Errc::out_of_range:
    case Errc::degenerate:
    case Errc::unsupported: return 4;
    case Errc::io: return 1;
  }
  return 1;
}

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

// Literal messages: no allocation unless the check fails.
inline void require(bool cond, Errc code, const char* what) {
  if (!cond) throw Error(code, what);
}

}  // namespace istlab

#endif
