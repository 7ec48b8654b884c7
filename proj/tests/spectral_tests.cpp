#include <doctest.h>

#include <cmath>

#include "bngd/rng.hpp"
#include "bngd/spectral.hpp"

using namespace bngd;

namespace {

SymMatrix random_spd(CounterRng& rng, std::size_t d, double spread = 100.0) {
  Vec eigs(d);
  for (auto& v : eigs) v = 1.0 + (spread - 1.0) * rng.uniform();
  OrthoMatrix q = OrthoMatrix::random(d, rng);
  return conjugate(SymMatrix::diagonal(eigs, true), q);
}

}  // namespace

TEST_CASE("spectral summary derived quantities") {
  SpectralSummary s = SpectralSummary::from_eigenvalues({1.0, 3.0});
  CHECK(s.kappa == 3.0);
  CHECK(s.eps_max == doctest::Approx(2.0 / 3.0));
  CHECK(s.eps_opt == 0.5);
  CHECK(s.rho_opt == 0.5);
  CHECK(s.eps_opt < s.eps_max);
  CHECK_THROWS_AS(SpectralSummary::from_eigenvalues({-1.0, 2.0}), std::domain_error);
}

TEST_CASE("spectral radius of the shift matrix") {
  SpectralSummary s = SpectralSummary::from_eigenvalues({1.0, 3.0});
  CHECK(spectral_radius_shift(s, 0.5) == doctest::Approx(0.5));   // the optimal step
  CHECK(spectral_radius_shift(s, 0.0) == 1.0);                    // zero step
  CHECK(spectral_radius_shift(s, 1.0) == doctest::Approx(2.0));   // beyond stability
  CHECK(spectral_radius_shift(s, -0.1) > 1.0);
}

TEST_CASE("reduced matrix: identity case gives I - u u^T") {
  CounterRng rng(3, 0);
  Vec u = rng.unit_sphere(5);
  ReducedSpectrum r = build_h_star(SymMatrix::identity(5), u);
  CHECK(r.eigenvalues[0] == 0.0);
  for (std::size_t i = 1; i < 5; ++i) CHECK(r.eigenvalues[i] == doctest::Approx(1.0));
  CHECK(r.kappa_star == doctest::Approx(1.0));
}

TEST_CASE("reduced matrix: diag(1,2) with u = e1") {
  SymMatrix h = SymMatrix::diagonal({1.0, 2.0}, true);
  ReducedSpectrum r = build_h_star(h, {1.0, 0.0});
  CHECK(r.h_star(0, 0) == doctest::Approx(0.0));
  CHECK(r.h_star(1, 1) == doctest::Approx(2.0));
  CHECK(r.eigenvalues[0] == 0.0);
  CHECK(r.eigenvalues[1] == doctest::Approx(2.0));
  // interlacing 0 < 1 <= 2 <= 2
  CHECK(r.eigenvalues[1] >= 1.0);
  CHECK(r.eigenvalues[1] <= 2.0);
}

TEST_CASE("reduced matrix: null direction and preconditions") {
  CounterRng rng(5, 0);
  SymMatrix h = random_spd(rng, 10);
  Vec u = rng.unit_sphere(10);
  ReducedSpectrum r = build_h_star(h, u);
  Vec hsu = r.h_star.matvec(u);
  const double lam_max = SpectralSummary::from_matrix(h).lambda_max;
  CHECK(norm2(hsu) <= 1e-10 * lam_max * norm2(u));

  CHECK_THROWS_AS(build_h_star(h, Vec(10, 0.0)), std::domain_error);
  CHECK_THROWS_AS(build_h_star(SymMatrix::diagonal({2.0}, true), Vec{1.0}), std::domain_error);
  SymMatrix not_spd(2, {1.0, 0.0, 0.0, -1.0});
  CHECK_THROWS_AS(build_h_star(not_spd, Vec{1.0, 0.0}), std::domain_error);
}

TEST_CASE("interlacing holds on random pairs with an independent eigensolve") {
  CounterRng rng(7, 0);
  for (int t = 0; t < 25; ++t) {
    const std::size_t d = 2 + rng.next_u64() % 11;
    SymMatrix h = random_spd(rng, d);
    Vec u = rng.unit_sphere(d);
    ReducedSpectrum r = build_h_star(h, u);
    EigenSystem hs = h.eigen();
    const double tol = 1e-9 * hs.values.back();
    for (std::size_t i = 0; i < d; ++i) CHECK(r.eigenvalues[i] <= hs.values[i] + tol);
    for (std::size_t i = 0; i + 1 < d; ++i) CHECK(hs.values[i] <= r.eigenvalues[i + 1] + tol);
    CHECK(r.kappa_star <= SpectralSummary::from_eigenvalues(hs.values).kappa * (1.0 + 1e-9));
  }
}

TEST_CASE("pseudo spectral radius") {
  SymMatrix h = SymMatrix::diagonal({1.0, 2.0}, true);
  ReducedSpectrum r = build_h_star(h, {1.0, 0.0});
  CHECK(pseudo_spectral_radius(r, 0.5) == doctest::Approx(0.0));
  CHECK(pseudo_spectral_radius(r, 0.0) == 1.0);

  CounterRng rng(9, 0);
  SymMatrix h2 = random_spd(rng, 8);
  Vec u = rng.unit_sphere(8);
  ReducedSpectrum r2 = build_h_star(h2, u);
  SpectralSummary s2 = SpectralSummary::from_matrix(h2);
  const double eps = 1.0 / s2.lambda_max;
  CHECK(pseudo_spectral_radius(r2, eps) <= spectral_radius_shift(s2, eps) + 1e-12);
}
