#pragma once

#include <cmath>
#include <stdexcept>

#include "bngd/matrix.hpp"

namespace bngd {

// Spectral facts about an SPD matrix that the step-size theory keeps reusing.
struct SpectralSummary {
  Vec eigenvalues;     // ascending
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double kappa = 1.0;      // lambda_max / lambda_min
  double eps_max = 0.0;    // 2 / lambda_max
  double eps_opt = 0.0;    // 2 / (lambda_max + lambda_min)
  double rho_opt = 0.0;    // (kappa - 1) / (kappa + 1)

  static SpectralSummary from_eigenvalues(Vec eigs_ascending) {
    SpectralSummary s;
    s.eigenvalues = std::move(eigs_ascending);
    if (s.eigenvalues.empty()) throw std::domain_error("SpectralSummary: empty spectrum");
    s.lambda_min = s.eigenvalues.front();
    s.lambda_max = s.eigenvalues.back();
    if (s.lambda_min <= 0.0)
      throw std::domain_error("SpectralSummary: spectrum must be positive");
    s.kappa = s.lambda_max / s.lambda_min;
    s.eps_max = 2.0 / s.lambda_max;
    s.eps_opt = 2.0 / (s.lambda_max + s.lambda_min);
    s.rho_opt = (s.kappa - 1.0) / (s.kappa + 1.0);
    return s;
  }

  static SpectralSummary from_matrix(const SymMatrix& m) {
    return from_eigenvalues(eigen_sym(m).values);
  }
};

// rho(I - eps H) = max_i |1 - eps lambda_i|
inline double spectral_radius_shift(const SpectralSummary& s, double eps) {
  double r = 0.0;
  for (double lam : s.eigenvalues) r = std::max(r, std::abs(1.0 - eps * lam));
  return r;
}

// H* = H - H u u^T H / (u^T H u); PSD with null direction u. The nonzero part
// of its spectrum interlaces the spectrum of H.
struct ReducedSpectrum {
  SymMatrix h_star;
  Vec eigenvalues;            // ascending, eigenvalues[0] is the null eigenvalue
  double lambda_star_min = 0.0;  // smallest nonzero eigenvalue
  double lambda_star_max = 0.0;
  double kappa_star = 1.0;
  double eps_star_max = 0.0;  // 2 / lambda_star_max
  Vec null_direction;         // unit vector along u
};

inline ReducedSpectrum build_h_star(const SymMatrix& h, const Vec& u) {
  if (!h.is_spd()) throw std::domain_error("build_h_star: H must be SPD");
  if (norm2(u) == 0.0) throw std::domain_error("build_h_star: u must be nonzero");
  const std::size_t d = h.dim();
  if (d < 2)
    throw std::domain_error("build_h_star: H* has no nonzero eigenvalues for d < 2");

  const Vec hu = h.matvec(u);
  const double uhu = dot(u, hu);
  Vec e(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      e[i * d + j] = h(i, j) - hu[i] * hu[j] / uhu;

  ReducedSpectrum r;
  r.h_star = SymMatrix(d, std::move(e));
  EigenSystem es = r.h_star.eigen();

  // rank decision: eigenvalues under 1e-9 * lambda_max(H) are the null
  // direction; exactly one may fall below the cutoff
  const double lam_max_h = SpectralSummary::from_matrix(h).lambda_max;
  const double cutoff = 1e-9 * lam_max_h;
  std::size_t below = 0;
  for (double lam : es.values)
    if (lam < cutoff) ++below;
  if (below != 1)
    throw std::runtime_error("build_h_star: expected exactly one null eigenvalue below cutoff, got " +
                             std::to_string(below));

  r.eigenvalues = es.values;
  r.eigenvalues[0] = 0.0;  // the null eigenvalue is exact in the model
  r.lambda_star_min = r.eigenvalues[1];
  r.lambda_star_max = r.eigenvalues.back();
  r.kappa_star = r.lambda_star_max / r.lambda_star_min;
  r.eps_star_max = 2.0 / r.lambda_star_max;
  r.null_direction = normalized(u);
  return r;
}

// rho*(I - eps H*) = max over nonzero-eigenvalue indices of |1 - eps lambda_i|
inline double pseudo_spectral_radius(const ReducedSpectrum& r, double eps) {
  if (r.eigenvalues.size() < 2)
    throw std::domain_error("pseudo_spectral_radius: needs dim >= 2");
  double m = 0.0;
  for (std::size_t i = 1; i < r.eigenvalues.size(); ++i)
    m = std::max(m, std::abs(1.0 - eps * r.eigenvalues[i]));
  return m;
}

}  // namespace bngd
