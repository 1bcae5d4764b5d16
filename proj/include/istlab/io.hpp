#ifndef ISTLAB_IO_HPP
#define ISTLAB_IO_HPP

#include <cstdint>
#include <cstdlib>
#include <limits>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "istlab/error.hpp"
#include "istlab/kernel.hpp"
#include "istlab/rate.hpp"
#include "istlab/tree.hpp"

namespace istlab {

using Json = nlohmann::ordered_json;

/// Typed view of one JSON object. Every read is echoed into `resolved`
/// (defaults included) so a run can be replayed from its manifest; keys that
/// are never read are reported by finish() as schema violations.
class ConfigReader {
 public:
  ConfigReader(const Json& in, std::string path) : in_(&in), path_(std::move(path)) {
    if (!in.is_object()) throw Error(Errc::usage, "config: " + where() + " must be an object");
  }

  const std::string& path() const { return path_; }
  Json& resolved() { return out_; }
  const Json& resolved() const { return out_; }
  bool has(const std::string& key) const { return in_->contains(key); }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const Json* v = fetch(key, fallback.has_value());
    const double x = v ? as_number(*v, key) : *fallback;
    out_[key] = echo(x);
    return x;
  }

  std::size_t count(const std::string& key, std::optional<std::size_t> fallback = std::nullopt) {
    const Json* v = fetch(key, fallback.has_value());
    std::size_t n = 0;
    if (v) {
      if (!v->is_number_integer() && !v->is_number_unsigned())
        throw Error(Errc::usage, "config: " + where(key) + " must be a non-negative integer");
      if (v->is_number_integer() && v->get<std::int64_t>() < 0)
        throw Error(Errc::usage, "config: " + where(key) + " must be a non-negative integer");
      n = v->get<std::size_t>();
    } else {
      n = *fallback;
    }
    out_[key] = n;
    return n;
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    const Json* v = fetch(key, fallback.has_value());
    std::string s;
    if (v) {
      if (!v->is_string()) throw Error(Errc::usage, "config: " + where(key) + " must be a string");
      s = v->get<std::string>();
    } else {
      s = *fallback;
    }
    out_[key] = s;
    return s;
  }

  std::string choice(const std::string& key, const std::vector<std::string>& options,
                     std::optional<std::string> fallback = std::nullopt) {
    const std::string s = text(key, std::move(fallback));
    for (const auto& o : options)
      if (o == s) return s;
    std::string list;
    for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
    throw Error(Errc::usage, "config: " + where(key) + " must be one of {" + list + "}, got '" + s + "'");
  }

  bool flag(const std::string& key, bool fallback) {
    const Json* v = fetch(key, true);
    bool b = fallback;
    if (v) {
      if (!v->is_boolean()) throw Error(Errc::usage, "config: " + where(key) + " must be true or false");
      b = v->get<bool>();
    }
    out_[key] = b;
    return b;
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) {
    const Json* v = fetch(key, fallback.has_value());
    std::vector<double> xs;
    if (v) {
      if (!v->is_array()) throw Error(Errc::usage, "config: " + where(key) + " must be an array of numbers");
      for (std::size_t i = 0; i < v->size(); ++i) xs.push_back(as_number((*v)[i], key + "[" + std::to_string(i) + "]"));
    } else {
      xs = *fallback;
    }
    Json arr = Json::array();
    for (double x : xs) arr.push_back(echo(x));
    out_[key] = std::move(arr);
    return xs;
  }

  /// Nested object; its resolved form is attached under `key`.
  template <class Fn>
  auto object(const std::string& key, Fn&& fn) {
    const Json* v = fetch(key, false);
    ConfigReader sub(*v, path_ + "." + key);
    if constexpr (std::is_void_v<decltype(fn(sub))>) {
      fn(sub);
      sub.finish();
      out_[key] = sub.out_;
    } else {
      auto r = fn(sub);
      sub.finish();
      out_[key] = sub.out_;
      return r;
    }
  }

  /// Rejects keys that were present but never read.
  void finish() const {
    for (auto it = in_->begin(); it != in_->end(); ++it)
      if (!used_.count(it.key())) throw Error(Errc::usage, "config: unknown field " + where(it.key()));
  }

  /// Marks a key as consumed without echoing it.
  void skip(const std::string& key) { used_.insert(key); }

 private:
  std::string where(const std::string& key = "") const { return key.empty() ? path_ : path_ + "." + key; }

  static Json echo(double x) { return x == std::numeric_limits<double>::infinity() ? Json("inf") : Json(x); }

  const Json* fetch(const std::string& key, bool optional) {
    used_.insert(key);
    if (!in_->contains(key)) {
      if (optional) return nullptr;
      throw Error(Errc::usage, "config: missing field " + where(key));
    }
    return &(*in_)[key];
  }

  double as_number(const Json& v, const std::string& key) const {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "inf") return std::numeric_limits<double>::infinity();
    }
    throw Error(Errc::usage, "config: " + where(key) + " must be a number");
  }

  const Json* in_;
  std::string path_;
  Json out_ = Json::object();
  std::set<std::string> used_;
};

/// {"type": "constant", "beta": 1}
/// {"type": "asymptotically_critical", "c": 1}
/// {"type": "periodic", "beta": 1, "offset": 0}
/// {"type": "sinusoidal", "base": 1, "amplitude": 0.5, "omega": 1, "phase": 0}
/// {"type": "piecewise_constant", "breakpoints": [...], "values": [...]}
/// {"type": "tabulated", "grid": [...], "values": [...]}
inline RateFunction parse_rate(ConfigReader& r) {
  const std::string type = r.choice(
      "type", {"constant", "asymptotically_critical", "periodic", "sinusoidal", "piecewise_constant", "tabulated"});
  try {
    if (type == "constant") return RateFunction::constant(r.number("beta"));
    if (type == "asymptotically_critical") return RateFunction::asymptotically_critical(r.number("c"));
    if (type == "periodic") return RateFunction::periodic(r.number("beta"), r.number("offset", 0.0));
    if (type == "sinusoidal")
      return RateFunction::sinusoidal(r.number("base"), r.number("amplitude"), r.number("omega", 1.0),
                                      r.number("phase", 0.0));
    if (type == "piecewise_constant")
      return RateFunction::piecewise_constant(r.numbers("breakpoints"), r.numbers("values"));
    return RateFunction::tabulated(r.numbers("grid"), r.numbers("values"));
  } catch (const Error& e) {
    if (e.code() == Errc::usage) throw;
    throw Error(Errc::usage, "config: " + r.path() + ": " + e.what());
  }
}

/// {"type": "dirac", "a": 1}
/// {"type": "exponential", "d": 2} or {"type": "exponential", "death": <rate>}
/// {"type": "pareto", "k": 3}
/// {"type": "two_point_death"}
/// {"type": "tabulated", "grid": [...], "cdf": [...]}
inline LifetimeKernel parse_kernel(ConfigReader& r) {
  const std::string type = r.choice("type", {"dirac", "exponential", "pareto", "two_point_death", "tabulated"});
  try {
    if (type == "dirac") return LifetimeKernel::dirac(r.number("a"));
    if (type == "exponential") {
      if (r.has("death")) return LifetimeKernel::exponential(r.object("death", parse_rate));
      return LifetimeKernel::exponential(r.number("d"));
    }
    if (type == "pareto") return LifetimeKernel::pareto(r.number("k"));
    if (type == "two_point_death") return LifetimeKernel::two_point_death();
    return LifetimeKernel::tabulated(r.numbers("grid"), r.numbers("cdf"));
  } catch (const Error& e) {
    if (e.code() == Errc::usage) throw;
    throw Error(Errc::usage, "config: " + r.path() + ": " + e.what());
  }
}

inline Json read_json_file(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), Errc::io, "cannot open " + path);
  try {
    return Json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::usage, "config: " + path + " is not valid JSON: " + e.what());
  }
}

/// Rows of pre-formatted cells. CSV is the default rendering; JSON renders an
/// array of objects with numeric cells kept numeric.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::set<std::string> text_columns;  // never converted to numbers in JSON

  void add(std::vector<std::string> row) {
    require(row.size() == columns.size(), Errc::domain, "table row width does not match the header");
    rows.push_back(std::move(row));
  }

  void write_csv(std::ostream& os) const {
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
      os << '\n';
    }
  }

  Json to_json() const {
    Json arr = Json::array();
    for (const auto& r : rows) {
      Json o = Json::object();
      for (std::size_t i = 0; i < r.size(); ++i) {
        char* end = nullptr;
        const double v = std::strtod(r[i].c_str(), &end);
        if (!text_columns.count(columns[i]) && !r[i].empty() && end && *end == '\0')
          o[columns[i]] = v;
        else
          o[columns[i]] = r[i];
      }
      arr.push_back(std::move(o));
    }
    return arr;
  }
};

inline std::string cell(double x) { return format_double(x); }
inline std::string cell(std::size_t x) { return std::to_string(x); }
inline std::string cell(bool x) { return x ? "true" : "false"; }

/// Table from CSV text written by one of the write_*_csv functions.
inline Table table_from_csv(const std::string& text) {
  Table t;
  std::istringstream is(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  if (std::getline(is, line)) t.columns = split(line);
  while (std::getline(is, line))
    if (!line.empty()) t.rows.push_back(split(line));
  return t;
}

/// JSON with a fixed layout: two-space indent, LF, trailing newline.
inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace istlab

#endif
