#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bngd/model.hpp"

using namespace bngd;

namespace {

ProblemInstance tiny_diag12() {
  // H = diag(1,2), u = (1,0), c = u^T H u = 1
  InstanceOptions opt;
  opt.given_u = {1.0, 0.0};
  return make_instance(SpectrumSpec::explicit_values({1.0, 2.0}), UMode::given, 1, opt);
}

}  // namespace

TEST_CASE("spectrum recipes") {
  ProblemInstance lin = make_instance(SpectrumSpec::linspace(1.0, 10000.0, 100),
                                      UMode::random_sphere, 2);
  CHECK(lin.spectrum.kappa == doctest::Approx(10000.0));
  CHECK(lin.spectrum.lambda_min == doctest::Approx(1.0));

  ProblemInstance spike = make_instance(SpectrumSpec::spiked(4, 10000.0), UMode::random_sphere, 3);
  CHECK(spike.spectrum.eigenvalues == Vec{1.0, 1.0, 1.0, 10000.0});

  ProblemInstance one = make_instance(SpectrumSpec::explicit_values({1.0}), UMode::random_sphere, 4);
  CHECK(one.spectrum.kappa == 1.0);
  CHECK(one.spectrum.eps_opt == 1.0);
  CHECK_FALSE(one.reduced.has_value());

  CHECK_THROWS_AS(make_instance(SpectrumSpec::explicit_values({0.0, 1.0}), UMode::random_sphere, 5),
                  std::domain_error);
}

TEST_CASE("instance internal consistency") {
  ProblemInstance p = make_instance(SpectrumSpec::logspace(0.0, 2.0, 10), UMode::hu_normalized, 6);
  Vec hu = p.h.matvec(p.u);
  for (std::size_t i = 0; i < 10; ++i)
    CHECK(p.g[i] == doctest::Approx(hu[i]).epsilon(1e-12));
  CHECK(p.c == doctest::Approx(p.uhu()));
  REQUIRE(p.w0_hint.has_value());
  CHECK(norm2(*p.w0_hint) == doctest::Approx(1.0));
}

TEST_CASE("plain least-squares loss") {
  ProblemInstance p = tiny_diag12();
  CHECK(loss_gd(p, p.u) == doctest::Approx(0.0));
  CHECK(loss_gd(p, {0.0, 0.0}) == doctest::Approx(0.5 * p.c));
  CHECK(loss_gd(p, {0.0, 1.0}) == doctest::Approx(1.5));
}

TEST_CASE("normalized loss: two forms and special points") {
  ProblemInstance p = tiny_diag12();
  const double astar = std::sqrt(p.uhu());
  CHECK(loss_bn(p, astar, p.u) == doctest::Approx(0.0));
  CHECK(loss_bn(p, 0.0, Vec{0.3, -0.7}) == doctest::Approx(0.5 * p.c));
  CHECK(loss_bn(p, 1.0, Vec{0.0, 1.0}) == doctest::Approx(1.0));  // sigma = sqrt(2), w^T g = 0
  CHECK(loss_bn_direct(p, 1.0, Vec{0.0, 1.0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(loss_bn(p, 1.0, Vec{0.0, 0.0}), std::domain_error);
}

TEST_CASE("gradient: closed form versus finite differences") {
  ProblemInstance p = make_instance(SpectrumSpec::linspace(1.0, 5.0, 5), UMode::random_sphere, 7);
  CounterRng rng(8, 0);
  const double a = 0.7;
  Vec w = rng.unit_sphere(5);
  auto [da, dw] = grad_bn(p, a, w);
  const double h = 1e-6;
  CHECK(std::abs((loss_bn(p, a + h, w) - loss_bn(p, a - h, w)) / (2 * h) - da) <= 1e-6);
  for (std::size_t i = 0; i < 5; ++i) {
    Vec wp = w, wm = w;
    wp[i] += h;
    wm[i] -= h;
    CHECK(std::abs((loss_bn(p, a, wp) - loss_bn(p, a, wm)) / (2 * h) - dw[i]) <= 1e-6);
  }
  CHECK(std::abs(dot(w, dw)) <= 1e-12 * norm2(w) * std::max(1.0, norm2(dw)));
}

TEST_CASE("gradient vanishes at minimizers and saddles") {
  ProblemInstance p = tiny_diag12();
  auto [da1, dw1] = grad_bn(p, std::sqrt(p.uhu()), p.u);
  CHECK(std::hypot(da1, norm2(dw1)) <= 1e-12);
  auto [da2, dw2] = grad_bn(p, 0.0, Vec{0.0, 1.0});  // a = 0, w^T g = 0
  CHECK(std::hypot(da2, norm2(dw2)) <= 1e-12);
}

TEST_CASE("minimizer family is stationary for every scale") {
  ProblemInstance p = make_instance(SpectrumSpec::logspace(0.0, 1.5, 6), UMode::random_sphere, 9);
  const double astar = std::sqrt(p.uhu());
  for (double s : {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0}) {
    auto [da, dw] = grad_bn(p, (s > 0 ? astar : -astar), s * p.u);
    CHECK(std::hypot(da, norm2(dw)) <= 1e-10);
  }
}

TEST_CASE("saddle eigenvalues: closed form") {
  // H = I2, u = g = e1, w = e2: the 3x3 Hessian has eigenvalues (1 +- sqrt(5))/2
  // and one zero
  InstanceOptions opt;
  opt.given_u = {1.0, 0.0};
  ProblemInstance p2 = make_instance(SpectrumSpec::explicit_values({1.0, 1.0}), UMode::given, 1, opt);
  Vec eigs = saddle_hessian_eigs(p2, {0.0, 1.0});
  std::sort(eigs.begin(), eigs.end());
  CHECK(eigs.size() == 3);
  CHECK(eigs[0] == doctest::Approx(0.5 * (1.0 - std::sqrt(5.0))));
  CHECK(eigs[1] == 0.0);
  CHECK(eigs[2] == doctest::Approx(0.5 * (1.0 + std::sqrt(5.0))));

  // d = 3 padding adds one zero
  InstanceOptions opt3;
  opt3.given_u = {1.0, 0.0, 0.0};
  ProblemInstance p3 =
      make_instance(SpectrumSpec::explicit_values({1.0, 1.0, 1.0}), UMode::given, 1, opt3);
  Vec eigs3 = saddle_hessian_eigs(p3, {0.0, 1.0, 0.0});
  std::sort(eigs3.begin(), eigs3.end());
  CHECK(eigs3.size() == 4);
  CHECK(eigs3[1] == 0.0);
  CHECK(eigs3[2] == 0.0);

  CHECK_THROWS_AS(saddle_hessian_eigs(p2, Vec{1.0, 0.0}), std::domain_error);  // w^T g != 0
}

TEST_CASE("saddle eigenvalues match the assembled Hessian") {
  CounterRng rng(10, 0);
  for (int t = 0; t < 10; ++t) {
    const std::size_t d = 2 + rng.next_u64() % 6;
    ProblemInstance p = make_instance(SpectrumSpec::linspace(1.0, 4.0, d), UMode::random_sphere,
                                      100 + t);
    Vec w = rng.gaussian_vector(d);
    axpy(-dot(w, p.g) / dot(p.g, p.g), p.g, w);
    if (norm2(w) < 1e-8) continue;
    Vec closed = saddle_hessian_eigs(p, w);
    std::sort(closed.begin(), closed.end());
    EigenSystem es = assemble_bn_hessian(p, 0.0, w).eigen();
    long neg = 0;
    for (std::size_t i = 0; i < closed.size(); ++i) {
      CHECK(std::abs(es.values[i] - closed[i]) <= 1e-8 * std::max(1.0, std::abs(closed[i])));
      if (closed[i] < 0.0) ++neg;
    }
    CHECK(neg == 1);
  }
}

TEST_CASE("Hessian at the minimizer has the reduced-spectrum block structure") {
  ProblemInstance p = make_instance(SpectrumSpec::linspace(1.0, 3.0, 4), UMode::random_sphere, 11);
  const double s = 1.7;
  Vec w = s * p.u;
  SymMatrix hess = assemble_bn_hessian(p, std::sqrt(p.uhu()), w);
  EigenSystem es = hess.eigen();
  Vec expected = {1.0};
  const double scale = dot(p.u, p.u) / dot(w, w);
  for (double lam : p.reduced->eigenvalues) expected.push_back(scale * lam);
  std::sort(expected.begin(), expected.end());
  for (std::size_t i = 0; i < expected.size(); ++i)
    CHECK(std::abs(es.values[i] - expected[i]) <= 1e-8 * std::max(1.0, expected[i]));
}

TEST_CASE("critical point taxonomy") {
  ProblemInstance p = tiny_diag12();
  CriticalPointReport saddle = classify_critical_point(p, 0.0, {0.0, 1.0});
  CHECK(saddle.kind == CriticalPointReport::Kind::saddle);
  long neg = 0;
  for (double v : saddle.hessian_eigenvalues)
    if (v < 0.0) ++neg;
  CHECK(neg == 1);

  CriticalPointReport min = classify_critical_point(p, std::sqrt(p.uhu()), p.u);
  CHECK(min.kind == CriticalPointReport::Kind::global_minimizer);
  CHECK(min.minimizer_scale.value() == doctest::Approx(1.0));
  for (double v : min.hessian_eigenvalues) CHECK(v >= 0.0);
}

TEST_CASE("c override must cover the noise-free floor") {
  InstanceOptions opt;
  opt.c_override = 5.0;
  ProblemInstance p = make_instance(SpectrumSpec::explicit_values({1.0, 2.0}),
                                    UMode::random_sphere, 12, opt);
  CHECK(p.c == 5.0);
  CHECK(loss_gd(p, p.u) == doctest::Approx(0.5 * (5.0 - p.uhu())));

  InstanceOptions bad;
  bad.c_override = 0.0;
  CHECK_THROWS_AS(
      make_instance(SpectrumSpec::explicit_values({1.0, 2.0}), UMode::random_sphere, 12, bad),
      std::domain_error);
}
