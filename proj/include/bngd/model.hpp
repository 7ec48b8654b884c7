#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "bngd/matrix.hpp"
#include "bngd/rng.hpp"
#include "bngd/spectral.hpp"

namespace bngd {

// Spectrum recipes for diagonal moment matrices: logspace(a,b,n) follows the
// base-10 exponent convention with inclusive endpoints, linspace is inclusive
// arithmetic, spiked is (1,...,1,big).
struct SpectrumSpec {
  enum class Kind { logspace, linspace, spiked, explicit_list };

  Kind kind = Kind::explicit_list;
  double lo = 0.0;       // logspace: lo exponent; linspace: lo eigenvalue
  double hi = 0.0;       // logspace: hi exponent; linspace: hi eigenvalue
  std::size_t count = 0; // dimension for logspace/linspace/spiked
  double spike = 0.0;    // spiked: the single large eigenvalue
  Vec values;            // explicit_list

  static SpectrumSpec logspace(double lo_exp, double hi_exp, std::size_t n) {
    SpectrumSpec s;
    s.kind = Kind::logspace;
    s.lo = lo_exp;
    s.hi = hi_exp;
    s.count = n;
    return s;
  }
  static SpectrumSpec linspace(double lo, double hi, std::size_t n) {
    SpectrumSpec s;
    s.kind = Kind::linspace;
    s.lo = lo;
    s.hi = hi;
    s.count = n;
    return s;
  }
  static SpectrumSpec spiked(std::size_t d, double big) {
    SpectrumSpec s;
    s.kind = Kind::spiked;
    s.count = d;
    s.spike = big;
    return s;
  }
  static SpectrumSpec explicit_values(Vec v) {
    SpectrumSpec s;
    s.kind = Kind::explicit_list;
    s.values = std::move(v);
    return s;
  }

  Vec build() const {
    Vec e;
    switch (kind) {
      case Kind::logspace: {
        if (count == 0) throw std::domain_error("SpectrumSpec: count must be >= 1");
        e.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
          const double t = (count == 1) ? lo : lo + (hi - lo) * double(i) / double(count - 1);
          e[i] = std::pow(10.0, t);
        }
        break;
      }
      case Kind::linspace: {
        if (count == 0) throw std::domain_error("SpectrumSpec: count must be >= 1");
        e.resize(count);
        for (std::size_t i = 0; i < count; ++i)
          e[i] = (count == 1) ? lo : lo + (hi - lo) * double(i) / double(count - 1);
        break;
      }
      case Kind::spiked: {
        if (count == 0) throw std::domain_error("SpectrumSpec: count must be >= 1");
        e.assign(count, 1.0);
        e.back() = spike;
        break;
      }
      case Kind::explicit_list:
        e = values;
        break;
    }
    if (e.empty()) throw std::domain_error("SpectrumSpec: empty spectrum");
    for (double v : e)
      if (!(v > 0.0)) throw std::domain_error("SpectrumSpec: eigenvalues must be positive");
    return e;
  }
};

enum class UMode { random_sphere, given, hu_normalized };

// The OLS triple (H, u, g = H u, c) with cached spectral summaries; the single
// source of truth for one experiment.
struct ProblemInstance {
  SymMatrix h;
  Vec u;
  Vec g;          // = H u
  double c = 0.0; // defaults to u^T H u (noise-free labels)
  SpectralSummary spectrum;
  std::optional<ReducedSpectrum> reduced;  // absent only for d = 1
  std::optional<Vec> w0_hint;              // H u / ||H u|| when u_mode is hu_normalized

  std::size_t dim() const { return h.dim(); }
  double uhu() const { return dot(u, g); }
};

struct InstanceOptions {
  std::optional<double> c_override;   // must be >= u^T H u
  bool conjugate_random_q = false;    // rotate the diagonal H by a random Q
  bool build_reduced = true;          // skip for bulk runs that never read it
  Vec given_u;                        // for UMode::given
};

inline ProblemInstance make_instance(const SpectrumSpec& spec, UMode u_mode,
                                     std::uint64_t seed,
                                     const InstanceOptions& opt = {}) {
  const Vec eigs = spec.build();
  const std::size_t d = eigs.size();
  CounterRng rng(seed, 0x1157a9ce);

  SymMatrix h = SymMatrix::diagonal(eigs, true);
  if (opt.conjugate_random_q) {
    OrthoMatrix q = OrthoMatrix::random(d, rng);
    h = conjugate(h, q);
  }

  ProblemInstance p;
  p.h = std::move(h);

  switch (u_mode) {
    case UMode::given:
      if (opt.given_u.size() != d)
        throw std::domain_error("make_instance: given u has wrong dimension");
      if (norm2(opt.given_u) == 0.0)
        throw std::domain_error("make_instance: given u is zero");
      p.u = opt.given_u;
      break;
    case UMode::random_sphere:
    case UMode::hu_normalized:
      p.u = rng.unit_sphere(d);
      break;
  }

  p.g = p.h.matvec(p.u);
  const double uhu = dot(p.u, p.g);
  p.c = opt.c_override.value_or(uhu);
  if (p.c < uhu - 1e-12 * std::abs(uhu))
    throw std::domain_error("make_instance: c must be >= u^T H u");

  p.spectrum = SpectralSummary::from_eigenvalues(eigs);
  if (d >= 2 && opt.build_reduced) p.reduced = build_h_star(p.h, p.u);
  if (u_mode == UMode::hu_normalized) p.w0_hint = normalized(p.g);
  return p;
}

// J0(w) = c/2 - w^T g + w^T H w / 2, evaluated as
// (1/2)||u - w||_H^2 + (c - u^T H u)/2 so the value stays nonnegative (and
// accurate) near the minimum instead of cancelling to roundoff noise.
inline double loss_gd(const ProblemInstance& p, const Vec& w) {
  Vec r = p.u;
  axpy(-1.0, w, r);
  return 0.5 * p.h.quad(r) + 0.5 * (p.c - p.uhu());
}

inline double sigma_of(const ProblemInstance& p, const Vec& w) {
  const double s2 = p.h.quad(w);
  if (!(s2 > 0.0)) throw std::domain_error("sigma undefined: w = 0");
  return std::sqrt(s2);
}

// J(a, w) = c/2 - (w^T g / sigma) a + a^2 / 2, evaluated through the residual
// form (1/2)||u - (a/sigma) w||_H^2 + (c - u^T H u)/2, which stays accurate
// near the minimum where the direct form cancels catastrophically.
inline double loss_bn(const ProblemInstance& p, double a, const Vec& w) {
  const double sigma = sigma_of(p, w);
  Vec r = p.u;
  axpy(-a / sigma, w, r);
  return 0.5 * p.h.quad(r) + 0.5 * (p.c - p.uhu());
}

inline double loss_bn_direct(const ProblemInstance& p, double a, const Vec& w) {
  const double sigma = sigma_of(p, w);
  return 0.5 * p.c - (dot(w, p.g) / sigma) * a + 0.5 * a * a;
}

// dJ/da = a - w^T g / sigma; dJ/dw = -(a/sigma) g + (a/sigma^3)(w^T g) H w.
// w^T dw = 0 in exact arithmetic (scale invariance).
inline std::pair<double, Vec> grad_bn(const ProblemInstance& p, double a, const Vec& w) {
  const double sigma = sigma_of(p, w);
  const double y = dot(w, p.g);
  const double da = a - y / sigma;
  Vec dw = (-a / sigma) * p.g;
  axpy(a * y / (sigma * sigma * sigma), p.h.matvec(w), dw);
  return {da, std::move(dw)};
}

// Closed-form spectrum of the (d+1)x(d+1) Hessian at a saddle:
// {(1 +- sqrt(1 + 4||g||^2/(w^T H w)))/2} plus d-1 zeros; exactly one entry is
// negative (strict saddle).
inline Vec saddle_hessian_eigs(const ProblemInstance& p, const Vec& w_saddle) {
  const double wn = norm2(w_saddle);
  if (wn == 0.0) throw std::domain_error("saddle_hessian_eigs: w = 0");
  const double y = dot(w_saddle, p.g);
  if (std::abs(y) > 1e-10 * norm2(p.g) * wn)
    throw std::domain_error("saddle_hessian_eigs: w^T g != 0, not a saddle direction");
  const double s2 = p.h.quad(w_saddle);
  const double disc = std::sqrt(1.0 + 4.0 * dot(p.g, p.g) / s2);
  Vec eigs;
  eigs.push_back(0.5 * (1.0 - disc));
  for (std::size_t i = 0; i + 1 < p.dim(); ++i) eigs.push_back(0.0);
  eigs.push_back(0.5 * (1.0 + disc));
  return eigs;
}

// Full (d+1)x(d+1) Hessian of J at (a, w), assembled from the analytic blocks.
inline SymMatrix assemble_bn_hessian(const ProblemInstance& p, double a, const Vec& w) {
  const std::size_t d = p.dim();
  const double sigma = sigma_of(p, w);
  const double y = dot(w, p.g);
  const Vec hw = p.h.matvec(w);

  // A21 = -(1/sigma) (g - (y/sigma^2) H w)
  Vec a21 = (-1.0 / sigma) * p.g;
  axpy(y / (sigma * sigma * sigma), hw, a21);

  // A22 = (a y / sigma^3) [ H + ((Hw) g^T + g (Hw)^T)/y - (3/sigma^2)(Hw)(Hw)^T ]
  Vec e((d + 1) * (d + 1), 0.0);
  e[0] = 1.0;
  for (std::size_t i = 0; i < d; ++i) {
    e[(i + 1)] = a21[i];
    e[(i + 1) * (d + 1)] = a21[i];
  }
  const double lead = a / (sigma * sigma * sigma);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double a22 = lead * (y * p.h(i, j) + hw[i] * p.g[j] + p.g[i] * hw[j] -
                                 (3.0 * y / (sigma * sigma)) * hw[i] * hw[j]);
      e[(i + 1) * (d + 1) + (j + 1)] = a22;
    }
  return SymMatrix(d + 1, std::move(e));
}

struct CriticalPointReport {
  enum class Kind { saddle, global_minimizer };
  Kind kind = Kind::saddle;
  double a = 0.0;
  Vec w;
  Vec hessian_eigenvalues;
  std::optional<double> minimizer_scale;  // w* = s u, a* = sign(s) sqrt(u^T H u)
};

// Classifies an exact critical point of J. Saddles: a = 0, w^T g = 0.
// Minimizers: w parallel to u with the matching a*.
inline CriticalPointReport classify_critical_point(const ProblemInstance& p, double a,
                                                   const Vec& w) {
  CriticalPointReport rep;
  rep.a = a;
  rep.w = w;
  const double y = dot(w, p.g);
  const double wn = norm2(w);
  if (wn == 0.0) throw std::domain_error("classify_critical_point: w = 0");
  if (a == 0.0 && std::abs(y) <= 1e-10 * norm2(p.g) * wn) {
    rep.kind = CriticalPointReport::Kind::saddle;
    rep.hessian_eigenvalues = saddle_hessian_eigs(p, w);
    return rep;
  }
  // minimizer branch: w = s u
  const double s = dot(w, p.u) / dot(p.u, p.u);
  rep.kind = CriticalPointReport::Kind::global_minimizer;
  rep.minimizer_scale = s;
  const double scale = dot(p.u, p.u) / dot(w, w);  // ||u||^2 / ||w*||^2
  rep.hessian_eigenvalues.push_back(1.0);
  if (p.reduced) {
    for (std::size_t i = 0; i < p.reduced->eigenvalues.size(); ++i)
      rep.hessian_eigenvalues.push_back(scale * p.reduced->eigenvalues[i]);
  }
  std::sort(rep.hessian_eigenvalues.begin(), rep.hessian_eigenvalues.end());
  return rep;
}

}  // namespace bngd
