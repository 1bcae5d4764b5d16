#ifndef ISTLAB_TREE_HPP
#define ISTLAB_TREE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "istlab/error.hpp"
#include "istlab/random.hpp"

namespace istlab {

/// Root label in the Ulam-Harris notation.
inline constexpr const char* kRootLabel = "\xE2\x88\x85";  // U+2205

/// One individual: alive on (birth, death]. rank is the last entry of its
/// Ulam-Harris label (1-based, birth order among siblings).
struct TreeNode {
  std::int64_t parent = -1;
  std::uint32_t rank = 0;
  double birth = 0.0;
  double death = 0.0;
};

/// Finished chronological tree truncated at level T. Nodes are stored in
/// lexicographic order of their labels (depth-first, children in birth order),
/// so nodes[0] is the root.
class ChronoTree {
 public:
  ChronoTree() = default;
  ChronoTree(std::vector<TreeNode> nodes, double T, double root_lifetime, std::uint64_t seed)
      : nodes_(std::move(nodes)), T_(T), x0_(root_lifetime), seed_(seed) {}

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  double truncation_level() const { return T_; }
  double root_lifetime() const { return x0_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<std::uint32_t> label(std::size_t i) const {
    std::vector<std::uint32_t> out;
    for (std::int64_t v = static_cast<std::int64_t>(i); nodes_[v].parent >= 0; v = nodes_[v].parent)
      out.push_back(nodes_[v].rank);
    std::reverse(out.begin(), out.end());
    return out;
  }

  std::string label_string(std::size_t i) const {
    const auto l = label(i);
    if (l.empty()) return kRootLabel;
    std::string s;
    for (std::size_t k = 0; k < l.size(); ++k) {
      if (k) s += '.';
      s += std::to_string(l[k]);
    }
    return s;
  }

  /// Children of every node, each list in birth order.
  std::vector<std::vector<std::size_t>> children() const {
    std::vector<std::vector<std::size_t>> ch(nodes_.size());
    for (std::size_t i = 1; i < nodes_.size(); ++i) ch[static_cast<std::size_t>(nodes_[i].parent)].push_back(i);
    for (auto& c : ch) std::sort(c.begin(), c.end(), [&](auto a, auto b) { return nodes_[a].rank < nodes_[b].rank; });
    return ch;
  }

 private:
  std::vector<TreeNode> nodes_;
  double T_ = std::numeric_limits<double>::infinity();
  double x0_ = 0.0;
  std::uint64_t seed_ = 0;
};

struct TreeOptions {
  std::size_t max_nodes = 10'000'000;
};

/// Simulates the truncated tree: root alive on (0, x0 ^ T]; every individual
/// alive on (B, A] gives birth at the points of a Poisson process of
/// intensity b(t) dt on (B, A] (thinning against sup b on that interval);
/// a child born at s lives K(s, .), its death capped at T.
template <class Rate, class Kernel>
ChronoTree simulate_tree(const Rate& b, const Kernel& K, double x0, double T, Rng& rng,
                         std::uint64_t seed = 0, const TreeOptions& opt = {}) {
  require(x0 > 0.0 && std::isfinite(x0), Errc::domain, "simulate_tree needs a finite root lifetime x0 > 0");
  require(std::isfinite(T), Errc::unsupported, "untruncated trees (T = inf) are unsupported");
  require(T > 0.0, Errc::domain, "simulate_tree needs T > 0");

  std::vector<TreeNode> out;
  out.push_back({-1, 0, 0.0, std::min(x0, T)});
  // Depth-first: a node's children are generated when it is emitted and then
  // pushed in reverse so that child 1 is emitted next.
  struct Pending {
    std::int64_t parent;
    std::uint32_t rank;
    double birth;
    double death;
  };
  std::vector<Pending> stack;
  std::vector<double> births;
  std::size_t current = 0;
  for (;;) {
    const TreeNode& v = out[current];
    births.clear();
    const double lo = v.birth, hi = v.death;
    const double bound = b.sup_on(lo, hi);
    if (bound > 0.0) {
      double s = lo;
      for (;;) {
        s += standard_exponential(rng) / bound;
        if (s > hi) break;
        if (uniform_open(rng) * bound <= b(s)) births.push_back(s);
      }
    }
    const std::size_t first = stack.size();
    for (std::size_t i = 0; i < births.size(); ++i) {
      const double s = births[i];
      const double life = K.sample(s, rng);
      stack.push_back({static_cast<std::int64_t>(current), static_cast<std::uint32_t>(i + 1), s, std::min(s + life, T)});
    }
    std::reverse(stack.begin() + static_cast<std::ptrdiff_t>(first), stack.end());
    if (stack.empty()) break;
    const Pending p = stack.back();
    stack.pop_back();
    out.push_back({p.parent, p.rank, p.birth, p.death});
    current = out.size() - 1;
    require(out.size() <= opt.max_nodes, Errc::explosion,
            "tree exceeded " + std::to_string(opt.max_nodes) + " individuals below T");
  }
  return ChronoTree(std::move(out), T, std::min(x0, T), seed);
}

template <class Rate, class Kernel>
ChronoTree simulate_tree(const Rate& b, const Kernel& K, double x0, double T, std::uint64_t seed,
                         const TreeOptions& opt = {}) {
  Rng rng(seed);
  return simulate_tree(b, K, x0, T, rng, seed, opt);
}

/// Number of individuals alive at t: #{B < t <= A}.
inline std::size_t population_at(const ChronoTree& tree, double t) {
  require(t <= tree.truncation_level(), Errc::out_of_range, "population_at: t beyond the truncation level");
  std::size_t n = 0;
  for (const auto& v : tree.nodes()) n += (v.birth < t && t <= v.death);
  return n;
}

inline double tree_length(const ChronoTree& tree) {
  double s = 0.0;
  for (const auto& v : tree.nodes()) s += v.death - v.birth;
  return s;
}

inline double tree_height(const ChronoTree& tree) {
  double h = 0.0;
  for (const auto& v : tree.nodes()) h = std::max(h, v.death);
  return h;
}

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_tree_csv(std::ostream& os, const ChronoTree& tree) {
  os << "label,parent,birth,death\n";
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto& v = tree.nodes()[i];
    os << tree.label_string(i) << ','
       << (v.parent < 0 ? std::string() : tree.label_string(static_cast<std::size_t>(v.parent))) << ','
       << format_double(v.birth) << ',' << format_double(v.death) << '\n';
  }
}

/// Inverse of write_tree_csv. Rows may come in any order; the result is in
/// canonical (lexicographic) order.
inline ChronoTree read_tree_csv(std::istream& is, double T = std::numeric_limits<double>::infinity()) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), Errc::io, "empty tree csv");
  require(line == "label,parent,birth,death", Errc::io, "tree csv header must be label,parent,birth,death");
  struct Row {
    std::vector<std::uint32_t> label;
    double birth, death;
  };
  auto parse_label = [](const std::string& s) {
    std::vector<std::uint32_t> l;
    if (s == kRootLabel) return l;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, '.')) {
      require(!part.empty() && part.find_first_not_of("0123456789") == std::string::npos, Errc::io,
              "bad label '" + s + "'");
      l.push_back(static_cast<std::uint32_t>(std::stoul(part)));
    }
    return l;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    require(f.size() == 4, Errc::io, "tree csv line " + std::to_string(lineno) + ": expected 4 fields");
    auto label = parse_label(f[0]);
    auto parent = f[1].empty() ? std::vector<std::uint32_t>{} : parse_label(f[1]);
    require(label.empty() ? f[1].empty()
                          : std::equal(parent.begin(), parent.end(), label.begin()) && parent.size() + 1 == label.size(),
            Errc::io, "tree csv line " + std::to_string(lineno) + ": parent is not the label prefix");
    rows.push_back({std::move(label), std::stod(f[2]), std::stod(f[3])});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.label < b.label; });
  require(!rows.empty() && rows[0].label.empty(), Errc::io, "tree csv has no root row");
  std::map<std::vector<std::uint32_t>, std::int64_t> index;
  std::vector<TreeNode> nodes;
  for (const auto& r : rows) {
    TreeNode n{-1, 0, r.birth, r.death};
    if (!r.label.empty()) {
      const std::vector<std::uint32_t> parent(r.label.begin(), r.label.end() - 1);
      const auto it = index.find(parent);
      require(it != index.end(), Errc::io, "tree csv: orphan label");
      n.parent = it->second;
      n.rank = r.label.back();
    }
    require(index.emplace(r.label, static_cast<std::int64_t>(nodes.size())).second, Errc::io,
            "tree csv: duplicate label");
    nodes.push_back(n);
  }
  const double x0 = nodes[0].death;
  return ChronoTree(std::move(nodes), T, x0, 0);
}

/// Checks the ChronoTree invariants; returns an empty string when they hold.
inline std::string check_tree_invariants(const ChronoTree& tree) {
  const auto& n = tree.nodes();
  if (n.empty() || n[0].birth != 0.0) return "root must be born at 0";
  const auto ch = tree.children();
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!(n[i].death > n[i].birth)) return "node " + tree.label_string(i) + " has death <= birth";
    if (n[i].death > tree.truncation_level()) return "node " + tree.label_string(i) + " dies after T";
    double prev = n[i].birth;
    for (std::size_t k = 0; k < ch[i].size(); ++k) {
      const auto& c = n[ch[i][k]];
      if (c.rank != k + 1) return "children of " + tree.label_string(i) + " are not ranked 1..n";
      if (!(c.birth > prev) || c.birth > n[i].death)
        return "child " + tree.label_string(ch[i][k]) + " born outside its parent's life or out of order";
      prev = c.birth;
    }
  }
  return {};
}

}  // namespace istlab

#endif
