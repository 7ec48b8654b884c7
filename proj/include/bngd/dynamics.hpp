#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bngd/model.hpp"

namespace bngd {

enum class Mode { gd, bngd };

enum class Outcome { converged_minimizer, converged_saddle, max_iters_reached, diverged };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::converged_minimizer: return "converged_minimizer";
    case Outcome::converged_saddle: return "converged_saddle";
    case Outcome::max_iters_reached: return "max_iters_reached";
    case Outcome::diverged: return "diverged";
  }
  return "?";
}

struct RunConfig {
  double eps = 0.0;
  double eps_a = 1.0;
  double a0 = 0.0;
  Vec w0;
  long max_iters = 1000;
  double grad_tol = 0.0;    // 0 -> default 1e-10 * (1 + ||g||)
  double div_tol = 1e300;   // divergence when ||w||^2 exceeds this
  bool verify = false;      // evaluate per-step identities and bounds
  long thin = 0;            // 0 -> every step for k <= 1000, every 10th after
  bool fault_flip_a_update = false;  // test hook: negate the a-update direction

  void validate(Mode mode) const {
    if (w0.empty() || norm2(w0) == 0.0)
      throw std::domain_error("RunConfig: w0 must be nonzero");
    if (max_iters < 1) throw std::domain_error("RunConfig: max_iters must be >= 1");
    if (!(eps > 0.0)) throw std::domain_error("RunConfig: eps must be positive");
    if (mode == Mode::bngd && !(eps_a > 0.0 && eps_a < 2.0))
      throw std::domain_error("RunConfig: eps_a must lie in (0, 2)");
  }
};

struct StepDiagnostics {
  long k = 0;
  double a = 0.0;
  double w_norm_sq = 0.0;
  double sigma = 0.0;
  double y = 0.0;        // w^T g
  double eps_hat = 0.0;
  double e_h_norm = 0.0;
  double q = 0.0;        // ||e||_H^2
  double beta = 0.0;
  double delta = 0.0;
  double loss = 0.0;
  double grad_a_norm = 0.0;
  double grad_w_norm = 0.0;
};

struct InvariantCheck {
  long evaluations = 0;
  long violations = 0;
  double worst_residual = 0.0;  // largest violation margin (<= 0 when all pass)

  void record(double margin) {
    ++evaluations;
    if (margin > 0.0) ++violations;
    worst_residual = std::max(worst_residual, margin);
  }
};

struct InvariantReport {
  InvariantCheck eq11_identity;     // residual recurrence, both sides computed
  InvariantCheck eq12_bound;        // contraction by rho(I - eps_hat H)
  InvariantCheck thm33_bound;       // sharpened H* bound when delta < 1
  InvariantCheck norm_growth;       // exact ||w||^2 growth identity
  InvariantCheck norm_monotone;
  InvariantCheck loss_identity;
  InvariantCheck a_bounded;
  InvariantCheck gd_contraction;
  bool theorem_violation_divergence = false;  // BNGD diverged with eps_a in (0,1]

  bool all_pass() const {
    return eq11_identity.violations == 0 && eq12_bound.violations == 0 &&
           thm33_bound.violations == 0 && norm_growth.violations == 0 &&
           norm_monotone.violations == 0 && loss_identity.violations == 0 &&
           a_bounded.violations == 0 && gd_contraction.violations == 0 &&
           !theorem_violation_divergence;
  }
};

struct Trajectory {
  RunConfig config;
  Mode mode = Mode::bngd;
  std::vector<StepDiagnostics> steps;  // thinned; always includes the final step
  Outcome outcome = Outcome::max_iters_reached;
  double final_a = 0.0;
  Vec final_w;
  long iterations = 0;
  double eps_hat_limit = 0.0;  // last recorded eps_hat; estimates eps / ||w*||^2
  std::optional<InvariantReport> invariants;
  bool eps_a_outside_proven_regime = false;  // eps_a > 1: empirical-only territory
};

// w' = (I - eps H) w + eps g
inline Vec gd_step(const ProblemInstance& p, const Vec& w, double eps) {
  Vec w1 = w;
  axpy(eps, p.g, w1);
  axpy(-eps, p.h.matvec(w), w1);
  return w1;
}

// eps_hat = eps (a/sigma) (w^T g / sigma^2)
inline double effective_lr(const ProblemInstance& p, double a, const Vec& w, double eps) {
  const double sigma = sigma_of(p, w);
  return eps * (a / sigma) * (dot(w, p.g) / (sigma * sigma));
}

// e = u - (w^T g / sigma^2) w: the H-orthogonal projection residual of u onto
// span{w}. Returns (e, q = ||e||_H^2).
inline std::pair<Vec, double> residual_e(const ProblemInstance& p, const Vec& w) {
  const double sigma2 = p.h.quad(w);
  if (!(sigma2 > 0.0)) throw std::domain_error("residual_e: w = 0");
  Vec e = p.u;
  axpy(-dot(w, p.g) / sigma2, w, e);
  return {std::move(e), p.h.quad(e)};
}

namespace detail {

// Everything a BNGD step needs from the pre-step state; shared between the
// stepper and the diagnostics so both see identical floating-point values.
struct BnStepWork {
  double sigma2 = 0.0, sigma = 0.0, y = 0.0, w_norm_sq = 0.0;
  Vec hw;
  Vec descent;  // g - (y/sigma^2) H w  (= H e in exact arithmetic)
  Vec e;
  double q = 0.0, e_h = 0.0, eps_hat = 0.0;

  static BnStepWork compute(const ProblemInstance& p, double a, const Vec& w, double eps) {
    BnStepWork s;
    s.hw = p.h.matvec(w);
    s.sigma2 = dot(w, s.hw);
    if (!(s.sigma2 > 0.0) || !std::isfinite(s.sigma2))
      throw std::domain_error("bngd_step: sigma undefined (w = 0 or non-finite)");
    s.sigma = std::sqrt(s.sigma2);
    s.y = dot(w, p.g);
    s.w_norm_sq = dot(w, w);
    s.descent = p.g;
    axpy(-s.y / s.sigma2, s.hw, s.descent);
    s.e = p.u;
    axpy(-s.y / s.sigma2, w, s.e);
    s.q = p.h.quad(s.e);
    s.e_h = std::sqrt(std::max(0.0, s.q));
    s.eps_hat = eps * (a / s.sigma) * (s.y / s.sigma2);
    return s;
  }
};

inline StepDiagnostics make_diag(const ProblemInstance& p, double a, const Vec& w,
                                 const BnStepWork& s, double eps, long k) {
  StepDiagnostics d;
  d.k = k;
  d.a = a;
  d.w_norm_sq = s.w_norm_sq;
  d.sigma = s.sigma;
  d.y = s.y;
  d.eps_hat = s.eps_hat;
  d.e_h_norm = s.e_h;
  d.q = s.q;
  const double dn2 = dot(s.descent, s.descent);
  d.beta = (a * a * s.w_norm_sq / s.sigma2) * dn2;  // ||e||_{H^2}^2 = ||H e||^2
  d.delta = p.spectrum.lambda_max * eps * std::abs(a) * s.e_h / s.sigma2;
  // loss through the residual form; exact-arithmetic equal to Eq.-6 value
  Vec r = p.u;
  axpy(-a / s.sigma, w, r);
  d.loss = 0.5 * p.h.quad(r) + 0.5 * (p.c - p.uhu());
  d.grad_a_norm = std::abs(a - s.y / s.sigma);
  d.grad_w_norm = (std::abs(a) / s.sigma) * std::sqrt(dn2);
  return d;
}

}  // namespace detail

// One BNGD step (simultaneous update: both right-hand sides read the step-k
// state). Diagnostics describe the pre-step state.
inline std::tuple<double, Vec, StepDiagnostics> bngd_step(const ProblemInstance& p, double a,
                                                          const Vec& w, const RunConfig& cfg) {
  const auto s = detail::BnStepWork::compute(p, a, w, cfg.eps);
  const double dir = cfg.fault_flip_a_update ? -1.0 : 1.0;
  const double a1 = a + dir * cfg.eps_a * (s.y / s.sigma - a);
  Vec w1 = w;
  axpy(cfg.eps * a / s.sigma, s.descent, w1);
  return {a1, std::move(w1), detail::make_diag(p, a, w, s, cfg.eps, 0)};
}

namespace detail {

inline bool record_step(long k, long thin, long max_iters) {
  if (thin > 0) return k % thin == 0 || k == max_iters;
  if (k <= 1000) return true;
  return k % 10 == 0;
}

inline double rel_residual(double lhs, double rhs) {
  const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
  return std::abs(lhs - rhs) / scale;
}

}  // namespace detail

// Iterates GD or BNGD from cfg until convergence, divergence, or max_iters.
// Convergence: gradient norm <= grad_tol and the loss stalled (change below
// 1e-16 relative over 10 steps); minimizer vs saddle decided by
// q <= 1e-8 * u^T H u. Because the w-gradient scales like 1/||w||, a tiny
// Euclidean gradient alone does not certify a critical point; a stalled state
// that is neither minimizer-like nor saddle-like (|a| and y/sigma both near 0,
// measured against sqrt(u^T H u)) keeps iterating and ends as
// max_iters_reached. With cfg.verify, the per-step identities and bounds are
// evaluated along the trajectory and attached as pass/fail counts.
inline Trajectory run(const ProblemInstance& p, const RunConfig& cfg, Mode mode) {
  cfg.validate(mode);

  Trajectory traj;
  traj.config = cfg;
  traj.mode = mode;
  if (mode == Mode::bngd && cfg.eps_a > 1.0) traj.eps_a_outside_proven_regime = true;
  if (cfg.verify) traj.invariants = InvariantReport();

  const double grad_tol = cfg.grad_tol > 0.0 ? cfg.grad_tol : 1e-10 * (1.0 + norm2(p.g));
  const double q_tol = 1e-8 * p.uhu();
  const double a_bound = std::abs(cfg.a0) +
                         2.0 * std::sqrt(p.uhu()) / (1.0 - std::abs(1.0 - cfg.eps_a));
  const double rho_gd = spectral_radius_shift(p.spectrum, cfg.eps);

  double a = cfg.a0;
  Vec w = cfg.w0;
  std::deque<double> loss_window;
  std::optional<StepDiagnostics> prev_diag;  // for the k -> k+1 bound checks

  auto push_step = [&](const StepDiagnostics& d, bool force) {
    if (force || detail::record_step(d.k, cfg.thin, cfg.max_iters)) {
      if (!traj.steps.empty() && traj.steps.back().k == d.k) return;
      traj.steps.push_back(d);
    }
  };

  for (long k = 0; k <= cfg.max_iters; ++k) {
    // ---- evaluate the current state ----
    StepDiagnostics diag;
    bool finite = std::isfinite(a);
    for (double x : w) finite = finite && std::isfinite(x);
    double w_norm_sq = finite ? dot(w, w) : std::numeric_limits<double>::infinity();
    if (!finite || w_norm_sq > cfg.div_tol) {
      traj.outcome = Outcome::diverged;
      traj.iterations = k;
      if (traj.invariants && mode == Mode::bngd && cfg.eps_a <= 1.0)
        traj.invariants->theorem_violation_divergence = true;
      break;
    }

    std::optional<detail::BnStepWork> work;
    if (mode == Mode::bngd) {
      work = detail::BnStepWork::compute(p, a, w, cfg.eps);
      diag = detail::make_diag(p, a, w, *work, cfg.eps, k);
    } else {
      diag.k = k;
      diag.a = 0.0;
      diag.w_norm_sq = w_norm_sq;
      diag.sigma = std::sqrt(std::max(0.0, p.h.quad(w)));
      diag.y = dot(w, p.g);
      diag.eps_hat = cfg.eps;
      Vec r = p.u - w;
      diag.q = p.h.quad(r);
      diag.e_h_norm = std::sqrt(std::max(0.0, diag.q));
      diag.loss = loss_gd(p, w);
      Vec grad = p.h.matvec(w) - p.g;
      diag.grad_w_norm = norm2(grad);
    }

    // ---- invariants that connect step k-1 to step k ----
    if (traj.invariants && prev_diag) {
      auto& inv = *traj.invariants;
      if (mode == Mode::bngd) {
        const double rho_prev = spectral_radius_shift(p.spectrum, prev_diag->eps_hat);
        inv.eq12_bound.record(diag.e_h_norm - (rho_prev * prev_diag->e_h_norm + 1e-12));
        if (p.reduced && prev_diag->delta < 1.0) {
          const double rho_star = pseudo_spectral_radius(*p.reduced, prev_diag->eps_hat);
          inv.thm33_bound.record((1.0 - prev_diag->delta) * diag.e_h_norm -
                                 ((rho_star + prev_diag->delta) * prev_diag->e_h_norm + 1e-12));
        }
        inv.norm_monotone.record(prev_diag->w_norm_sq * (1.0 - 1e-12) - diag.w_norm_sq);
      }
    }

    if (traj.invariants && mode == Mode::bngd) {
      auto& inv = *traj.invariants;
      // loss identity: ||u - (a/sigma) w||_H^2 == q + (a - y/sigma)^2
      Vec tilde = p.u;
      axpy(-a / diag.sigma, w, tilde);
      const double lhs = p.h.quad(tilde);
      const double ayd = a - diag.y / diag.sigma;
      const double rhs = diag.q + ayd * ayd;
      // near the minimum both sides underflow the 1e-10 relative resolution of
      // doubles (tilde is a difference of nearly equal vectors), so the
      // tolerance carries a roundoff floor proportional to the cancellation
      // magnitude sqrt(s * u^T H u)
      const double s_scale = std::max(std::abs(lhs), std::abs(rhs));
      const double tol = 1e-10 * s_scale +
                         1e-12 * double(p.dim()) * std::sqrt(s_scale * p.uhu());
      inv.loss_identity.record(std::abs(lhs - rhs) - tol);
      inv.a_bounded.record(std::abs(a) - (a_bound + 1e-9 * (1.0 + a_bound)));
    }

    loss_window.push_back(diag.loss);
    if (loss_window.size() > 11) loss_window.pop_front();

    // ---- stopping rules ----
    const double grad_norm = std::hypot(diag.grad_a_norm, diag.grad_w_norm);
    bool stalled = false;
    if (k == 0) {
      stalled = true;  // an exact fixed point converges immediately
    } else if (loss_window.size() == 11) {
      const double change = std::abs(loss_window.back() - loss_window.front());
      stalled = change <= 1e-16 * (1.0 + std::abs(diag.loss));
    }
    if (grad_norm <= grad_tol && stalled) {
      const double crit_scale = 1e-6 * std::sqrt(p.uhu());
      const bool minimizer_like = mode == Mode::gd || diag.q <= q_tol;
      const bool saddle_like = mode == Mode::bngd && std::abs(diag.a) <= crit_scale &&
                               std::abs(diag.y) / diag.sigma <= crit_scale;
      if (minimizer_like || saddle_like) {
        traj.outcome = minimizer_like ? Outcome::converged_minimizer : Outcome::converged_saddle;
        traj.iterations = k;
        push_step(diag, true);
        break;
      }
    }
    if (k == cfg.max_iters) {
      traj.outcome = Outcome::max_iters_reached;
      traj.iterations = k;
      push_step(diag, true);
      break;
    }

    push_step(diag, false);

    // ---- advance ----
    if (mode == Mode::bngd) {
      const auto& s = *work;
      const double dir = cfg.fault_flip_a_update ? -1.0 : 1.0;
      const double a1 = a + dir * cfg.eps_a * (s.y / s.sigma - a);
      Vec w1 = w;
      axpy(cfg.eps * a / s.sigma, s.descent, w1);

      if (traj.invariants) {
        auto& inv = *traj.invariants;
        // norm growth: ||w_{k+1}||^2 == ||w_k||^2 + eps^2 (a^2/sigma^2) ||H e||^2
        const double rhs = s.w_norm_sq +
                           cfg.eps * cfg.eps * (a * a / s.sigma2) * dot(s.descent, s.descent);
        const double lhs = dot(w1, w1);
        if (std::isfinite(lhs) && std::isfinite(rhs))
          inv.norm_growth.record(detail::rel_residual(lhs, rhs) - 1e-10);
        // Eq.-11 identity: u - (y_k/sigma_k^2) w_{k+1} == (I - eps_hat_k H) e_k,
        // both sides computed independently
        Vec lhs_v = p.u;
        axpy(-s.y / s.sigma2, w1, lhs_v);
        Vec rhs_v = s.e;
        axpy(-s.eps_hat, p.h.matvec(s.e), rhs_v);
        inv.eq11_identity.record(h_norm(p.h, lhs_v - rhs_v) -
                                 1e-10 * std::sqrt(std::max(0.0, p.uhu())));
      }

      a = a1;
      w = std::move(w1);
    } else {
      Vec w1 = gd_step(p, w, cfg.eps);
      if (traj.invariants) {
        Vec r0 = p.u - w;
        Vec r1 = p.u - w1;
        const double n0 = norm2(r0), n1 = norm2(r1);
        if (std::isfinite(n0) && std::isfinite(n1))
          traj.invariants->gd_contraction.record(n1 - (rho_gd * n0 + 1e-12 * (1.0 + n0)));
      }
      w = std::move(w1);
    }
    prev_diag = diag;
  }

  if (!traj.steps.empty()) {
    traj.eps_hat_limit = traj.steps.back().eps_hat;
  }
  traj.final_a = a;
  traj.final_w = std::move(w);
  return traj;
}

}  // namespace bngd
