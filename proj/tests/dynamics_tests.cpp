#include <doctest.h>

#include <cmath>

#include "bngd/dynamics.hpp"

using namespace bngd;

namespace {

ProblemInstance diag12_e1() {
  InstanceOptions opt;
  opt.given_u = {1.0, 0.0};
  return make_instance(SpectrumSpec::explicit_values({1.0, 2.0}), UMode::given, 1, opt);
}

}  // namespace

TEST_CASE("plain gradient step") {
  // isotropic H: eps = 1/lambda reaches the minimizer in one step
  InstanceOptions opt;
  opt.given_u = {0.3, -0.4, 0.5};
  ProblemInstance iso =
      make_instance(SpectrumSpec::explicit_values({2.0, 2.0, 2.0}), UMode::given, 1, opt);
  Vec w1 = gd_step(iso, {5.0, 5.0, 5.0}, 0.5);
  for (std::size_t i = 0; i < 3; ++i) CHECK(w1[i] == doctest::Approx(iso.u[i]));

  // the minimizer is a fixed point
  Vec wfix = gd_step(iso, iso.u, 0.1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(wfix[i] == doctest::Approx(iso.u[i]));

  // H = diag(1,3), u = 0, w = (1,1), eps = 0.5 -> (0.5, -0.5)
  InstanceOptions opt2;
  opt2.given_u = {1e-150, 0.0};  // effectively u = 0 while staying nonzero
  ProblemInstance p2 =
      make_instance(SpectrumSpec::explicit_values({1.0, 3.0}), UMode::given, 1, opt2);
  Vec w2 = gd_step(p2, {1.0, 1.0}, 0.5);
  CHECK(w2[0] == doctest::Approx(0.5));
  CHECK(w2[1] == doctest::Approx(-0.5));
}

TEST_CASE("normalized step: hand-evaluated case") {
  ProblemInstance p = diag12_e1();
  RunConfig cfg;
  cfg.eps = 1.0;
  cfg.eps_a = 1.0;
  cfg.w0 = {0.0, 1.0};
  auto [a1, w1, diag] = bngd_step(p, 1.0, {0.0, 1.0}, cfg);
  // w^T g = 0, sigma = sqrt(2): a' = 0, w' = w + (1/sqrt 2) g = (1/sqrt 2, 1)
  CHECK(a1 == doctest::Approx(0.0));
  CHECK(w1[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(w1[1] == doctest::Approx(1.0));
  CHECK(diag.sigma == doctest::Approx(std::sqrt(2.0)));
  CHECK(diag.eps_hat == doctest::Approx(0.0));
}

TEST_CASE("normalized step: fixed points and the a = 0 branch") {
  ProblemInstance p = diag12_e1();
  RunConfig cfg;
  cfg.eps = 0.3;
  cfg.eps_a = 0.7;
  cfg.w0 = p.u;

  const double astar = std::sqrt(p.uhu());
  auto [a1, w1, d1] = bngd_step(p, astar, p.u, cfg);
  CHECK(a1 == doctest::Approx(astar));
  for (std::size_t i = 0; i < 2; ++i) CHECK(w1[i] == doctest::Approx(p.u[i]));

  Vec w = {0.6, 0.8};  // w^T g != 0
  auto [a2, w2, d2] = bngd_step(p, 0.0, w, cfg);
  for (std::size_t i = 0; i < 2; ++i) CHECK(w2[i] == w[i]);  // w-update vanishes at a = 0
  CHECK(a2 == doctest::Approx(0.7 * dot(w, p.g) / d2.sigma));
}

TEST_CASE("effective learning rate") {
  ProblemInstance p = diag12_e1();
  CHECK(effective_lr(p, 1.0, {0.0, 1.0}, 0.5) == 0.0);  // w^T g = 0
  // w = u with ||u|| = 1: eps_hat = eps
  CHECK(effective_lr(p, std::sqrt(p.uhu()), p.u, 0.25) == doctest::Approx(0.25));
  // scale invariance (a, r w, r^2 eps) = (a, w, eps)
  const double base = effective_lr(p, 0.8, {0.3, 0.9}, 0.1);
  CHECK(effective_lr(p, 0.8, 3.0 * Vec{0.3, 0.9}, 9.0 * 0.1) == doctest::Approx(base));
  CHECK_THROWS_AS(effective_lr(p, 1.0, {0.0, 0.0}, 0.1), std::domain_error);
}

TEST_CASE("projection residual") {
  ProblemInstance p = diag12_e1();
  auto [e_par, q_par] = residual_e(p, 2.0 * p.u);
  CHECK(norm2(e_par) <= 1e-14);
  CHECK(q_par <= 1e-14);

  auto [e_perp, q_perp] = residual_e(p, Vec{0.0, 1.0});
  CHECK(e_perp[0] == doctest::Approx(1.0));
  CHECK(e_perp[1] == doctest::Approx(0.0));
  CHECK(q_perp == doctest::Approx(1.0));

  // projection optimality: q <= ||u - t w||_H^2 for every scalar t
  CounterRng rng(21, 0);
  ProblemInstance p5 = make_instance(SpectrumSpec::linspace(1.0, 9.0, 5), UMode::random_sphere, 2);
  Vec w = rng.unit_sphere(5);
  auto [e, q] = residual_e(p5, w);
  for (double t = -3.0; t <= 3.0; t += 0.1) {
    Vec r = p5.u;
    axpy(-t, w, r);
    CHECK(q <= p5.h.quad(r) + 1e-12);
  }
}

TEST_CASE("driver: plain gradient descent diverges past the stability edge") {
  ProblemInstance p = make_instance(SpectrumSpec::logspace(0.0, 3.0, 20), UMode::hu_normalized, 31);
  RunConfig cfg;
  cfg.eps = 1.5 * p.spectrum.eps_max;
  cfg.w0 = *p.w0_hint;
  cfg.max_iters = 5000;
  Trajectory t = run(p, cfg, Mode::gd);
  CHECK(t.outcome == Outcome::diverged);
}

TEST_CASE("driver: normalized descent converges far beyond the plain stability edge") {
  // eps = 500x the 2/lambda_max edge that kills plain gradient descent
  ProblemInstance p = make_instance(SpectrumSpec::logspace(0.0, 1.0, 10), UMode::hu_normalized, 32);
  RunConfig cfg;
  cfg.eps = 100.0;
  cfg.eps_a = 1.0;
  cfg.a0 = 0.0;
  cfg.w0 = *p.w0_hint;
  cfg.max_iters = 200000;
  REQUIRE(cfg.eps >= 500.0 * p.spectrum.eps_max);
  Trajectory t = run(p, cfg, Mode::bngd);
  CHECK(t.outcome == Outcome::converged_minimizer);
}

TEST_CASE("driver: no divergence at an enormous learning rate") {
  // at eps = 1e6 the first effective step overshoots so hard that the iterate
  // lands next to the a = 0, w^T g = 0 manifold and freezes there; the run must
  // stay finite and never diverge
  ProblemInstance p = make_instance(SpectrumSpec::logspace(0.0, 5.0, 100), UMode::hu_normalized, 32);
  RunConfig cfg;
  cfg.eps = 1e6;
  cfg.eps_a = 1.0;
  cfg.a0 = 0.0;
  cfg.w0 = *p.w0_hint;
  cfg.max_iters = 20000;
  Trajectory t = run(p, cfg, Mode::bngd);
  CHECK(t.outcome != Outcome::diverged);
  CHECK(std::isfinite(t.final_a));
  CHECK(std::isfinite(dot(t.final_w, t.final_w)));
}

TEST_CASE("driver: exact minimizer start converges at step 0") {
  ProblemInstance p = diag12_e1();
  RunConfig cfg;
  cfg.eps = 0.1;
  cfg.w0 = p.u;
  cfg.a0 = std::sqrt(p.uhu());
  Trajectory t = run(p, cfg, Mode::bngd);
  CHECK(t.outcome == Outcome::converged_minimizer);
  CHECK(t.iterations == 0);
}

TEST_CASE("driver: invariant suite passes along verified trajectories") {
  for (int t = 0; t < 5; ++t) {
    ProblemInstance p = make_instance(SpectrumSpec::logspace(0.0, 2.0, 15), UMode::random_sphere,
                                      40 + t);
    CounterRng rng(50 + t, 0);
    RunConfig cfg;
    cfg.eps = std::pow(10.0, -2.0 + 2.0 * t);
    cfg.eps_a = 1.0;
    cfg.a0 = 0.0;
    cfg.w0 = rng.unit_sphere(15);
    cfg.max_iters = 300;
    cfg.verify = true;
    Trajectory traj = run(p, cfg, Mode::bngd);
    REQUIRE(traj.invariants.has_value());
    INFO("eps = ", cfg.eps);
    CHECK(traj.invariants->all_pass());
    CHECK(traj.invariants->eq11_identity.evaluations > 0);
    CHECK(traj.invariants->norm_growth.evaluations > 0);
  }
}

TEST_CASE("driver: flipped a-update breaks the contraction bound") {
  ProblemInstance p = make_instance(SpectrumSpec::logspace(0.0, 2.0, 10), UMode::random_sphere, 60);
  CounterRng rng(61, 0);
  RunConfig cfg;
  cfg.eps = 0.1;
  cfg.eps_a = 1.0;
  cfg.a0 = 1.0;
  cfg.w0 = rng.unit_sphere(10);
  cfg.max_iters = 300;
  cfg.verify = true;
  cfg.fault_flip_a_update = true;
  Trajectory traj = run(p, cfg, Mode::bngd);
  CHECK_FALSE(traj.invariants->all_pass());
}

TEST_CASE("driver: trajectory thinning keeps the final step") {
  ProblemInstance p = diag12_e1();
  CounterRng rng(62, 0);
  RunConfig cfg;
  cfg.eps = 0.01;
  cfg.w0 = rng.unit_sphere(2);
  cfg.max_iters = 100;
  cfg.thin = 30;
  Trajectory t = run(p, cfg, Mode::bngd);
  CHECK(t.steps.front().k == 0);
  CHECK(t.steps.back().k == t.iterations);
  for (std::size_t i = 0; i + 1 < t.steps.size(); ++i)
    CHECK(t.steps[i + 1].k > t.steps[i].k);
}

TEST_CASE("driver: config validation") {
  ProblemInstance p = diag12_e1();
  RunConfig cfg;
  cfg.eps = 0.1;
  cfg.w0 = {};
  CHECK_THROWS_AS(run(p, cfg, Mode::bngd), std::domain_error);
  cfg.w0 = {1.0, 0.0};
  cfg.eps = -1.0;
  CHECK_THROWS_AS(run(p, cfg, Mode::bngd), std::domain_error);
  cfg.eps = 0.1;
  cfg.eps_a = 2.5;
  CHECK_THROWS_AS(run(p, cfg, Mode::bngd), std::domain_error);
  cfg.eps_a = 1.5;  // permitted, flagged as outside the proven regime
  Trajectory t = run(p, cfg, Mode::bngd);
  CHECK(t.eps_a_outside_proven_regime);
}

TEST_CASE("norm of w never decreases along normalized descent") {
  for (int t = 0; t < 3; ++t) {
    ProblemInstance p = make_instance(SpectrumSpec::linspace(1.0, 50.0, 12), UMode::random_sphere,
                                      70 + t);
    CounterRng rng(80 + t, 0);
    RunConfig cfg;
    cfg.eps = std::pow(10.0, t - 1);
    cfg.eps_a = 0.9;
    cfg.a0 = 0.5;
    cfg.w0 = rng.unit_sphere(12);
    cfg.max_iters = 500;
    Trajectory traj = run(p, cfg, Mode::bngd);
    double prev = 0.0;
    for (const auto& s : traj.steps) {
      CHECK(s.w_norm_sq >= prev * (1.0 - 1e-12));
      prev = s.w_norm_sq;
    }
  }
}
