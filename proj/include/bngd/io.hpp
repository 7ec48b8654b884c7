#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bngd/analysis.hpp"
#include "bngd/dynamics.hpp"
#include "bngd/model.hpp"

namespace bngd {

using json = nlohmann::json;

// 17 significant digits: round-trip exact for 64-bit floats
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string trajectory_csv(const Trajectory& t) {
  std::ostringstream out;
  out << "k,a,w_norm_sq,sigma,y,eps_hat,e_h_norm,q,beta,delta,loss\n";
  for (const auto& s : t.steps) {
    out << s.k << ',' << fmt17(s.a) << ',' << fmt17(s.w_norm_sq) << ',' << fmt17(s.sigma)
        << ',' << fmt17(s.y) << ',' << fmt17(s.eps_hat) << ',' << fmt17(s.e_h_norm) << ','
        << fmt17(s.q) << ',' << fmt17(s.beta) << ',' << fmt17(s.delta) << ','
        << fmt17(s.loss) << '\n';
  }
  return out.str();
}

inline std::string sweep_csv(const SweepGrid& g) {
  std::ostringstream out;
  out << "eps_a,eps,final_loss,eps_hat,color,outcome,error\n";
  for (const auto& row : g.cells)
    for (const auto& cell : row) {
      out << fmt17(cell.eps_a) << ',' << fmt17(cell.eps) << ','
          << fmt17(cell.final_loss_bngd) << ',' << fmt17(cell.eps_hat_final) << ','
          << to_string(cell.color) << ',' << to_string(cell.outcome) << ',' << cell.error
          << '\n';
    }
  return out.str();
}

inline std::string dim_scan_csv(const std::vector<DimScanPoint>& points) {
  std::ostringstream out;
  out << "d,eps,eps_hat_gmean,omega_measured_band,omega_measured_tail,omega_predicted,"
         "omega_bound_generic,omega_bound_arithmetic\n";
  for (const auto& p : points) {
    const std::string arith =
        p.predicted.lower_bound_arithmetic ? fmt17(*p.predicted.lower_bound_arithmetic) : "";
    for (std::size_t i = 0; i < p.eps_grid.size(); ++i) {
      out << p.d << ',' << fmt17(p.eps_grid[i]) << ',' << fmt17(p.eps_hat_gmean[i]) << ','
          << fmt17(p.measured.width) << ',' << fmt17(p.measured_tail) << ','
          << fmt17(p.predicted.omega) << ','
          << fmt17(p.predicted.lower_bound_generic) << ',' << arith << '\n';
    }
  }
  return out.str();
}

inline json trajectory_summary_json(const Trajectory& t) {
  json j;
  j["outcome"] = to_string(t.outcome);
  j["iterations"] = t.iterations;
  j["final_a"] = t.final_a;
  j["eps_hat_limit"] = t.eps_hat_limit;
  j["eps_a_outside_proven_regime"] = t.eps_a_outside_proven_regime;
  if (!t.steps.empty()) {
    const auto& last = t.steps.back();
    j["final"] = {{"k", last.k},        {"loss", last.loss},
                  {"q", last.q},        {"w_norm_sq", last.w_norm_sq},
                  {"eps_hat", last.eps_hat}};
  }
  if (t.invariants) {
    auto dump = [](const InvariantCheck& c) {
      return json{{"evaluations", c.evaluations},
                  {"violations", c.violations},
                  {"worst_residual", c.worst_residual}};
    };
    const auto& inv = *t.invariants;
    j["invariants"] = {{"eq11_identity", dump(inv.eq11_identity)},
                       {"eq12_bound", dump(inv.eq12_bound)},
                       {"thm33_bound", dump(inv.thm33_bound)},
                       {"norm_growth", dump(inv.norm_growth)},
                       {"norm_monotone", dump(inv.norm_monotone)},
                       {"loss_identity", dump(inv.loss_identity)},
                       {"a_bounded", dump(inv.a_bounded)},
                       {"gd_contraction", dump(inv.gd_contraction)},
                       {"theorem_violation_divergence", inv.theorem_violation_divergence},
                       {"all_pass", inv.all_pass()}};
  }
  return j;
}

// FNV-1a over the artifact bytes; enough to detect any content drift
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Collects artifacts, then writes them plus a manifest with checksums, the
// fully resolved config, and the wall time.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    start_ = std::chrono::steady_clock::now();
  }

  void add(const std::string& name, const std::string& content) {
    write_file(dir_ / name, content);
    char hex[20];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a(content)));
    checksums_[name] = hex;
  }

  void add_json(const std::string& name, const json& j) { add(name, j.dump(2) + "\n"); }

  void finish(const json& resolved_config) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json manifest;
    manifest["schema_version"] = 1;
    manifest["config"] = resolved_config;
    manifest["wall_time_seconds"] = wall;
    manifest["checksums"] = checksums_;
    write_file(dir_ / "manifest.json", manifest.dump(2) + "\n");
  }

  const std::filesystem::path& path() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::chrono::steady_clock::time_point start_;
  json checksums_ = json::object();
};

// ---------------------------------------------------------------------------
// Config schema. A grid is either an explicit value list or a logspace recipe
// {"kind":"logspace","lo":<exp>,"hi":<exp>,"count":n,"scale":s} giving
// s * 10^linspace(lo,hi,n).
// ---------------------------------------------------------------------------

inline Vec parse_grid(const json& j) {
  if (j.is_array()) {
    Vec v = j.get<Vec>();
    if (v.empty()) throw std::domain_error("config: empty grid");
    return v;
  }
  const std::string kind = j.value("kind", "logspace");
  const std::size_t n = j.at("count").get<std::size_t>();
  if (n == 0) throw std::domain_error("config: grid count must be >= 1");
  const double lo = j.at("lo").get<double>();
  const double hi = j.at("hi").get<double>();
  const double scale = j.value("scale", 1.0);
  Vec v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (n == 1) ? lo : lo + (hi - lo) * double(i) / double(n - 1);
    v[i] = (kind == "linspace") ? scale * t : scale * std::pow(10.0, t);
  }
  return v;
}

inline SpectrumSpec parse_spectrum(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "logspace")
    return SpectrumSpec::logspace(j.at("lo").get<double>(), j.at("hi").get<double>(),
                                  j.at("count").get<std::size_t>());
  if (kind == "linspace")
    return SpectrumSpec::linspace(j.at("lo").get<double>(), j.at("hi").get<double>(),
                                  j.at("count").get<std::size_t>());
  if (kind == "spiked")
    return SpectrumSpec::spiked(j.at("count").get<std::size_t>(), j.at("spike").get<double>());
  if (kind == "explicit") return SpectrumSpec::explicit_values(j.at("values").get<Vec>());
  throw std::domain_error("config: unknown spectrum kind '" + kind + "'");
}

inline json spectrum_to_json(const SpectrumSpec& s) {
  switch (s.kind) {
    case SpectrumSpec::Kind::logspace:
      return {{"kind", "logspace"}, {"lo", s.lo}, {"hi", s.hi}, {"count", s.count}};
    case SpectrumSpec::Kind::linspace:
      return {{"kind", "linspace"}, {"lo", s.lo}, {"hi", s.hi}, {"count", s.count}};
    case SpectrumSpec::Kind::spiked:
      return {{"kind", "spiked"}, {"count", s.count}, {"spike", s.spike}};
    case SpectrumSpec::Kind::explicit_list:
      return {{"kind", "explicit"}, {"values", s.values}};
  }
  return {};
}

}  // namespace bngd
