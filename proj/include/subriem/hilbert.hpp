#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "subriem/flow.hpp"
#include "subriem/structure.hpp"
#include "subriem/types.hpp"

namespace subriem {

enum class CurveKind { Star, Base };

/// s -> (t(s), x(s)) with x a covector at p (Star) or a point of the chart (Base).
struct AugmentedCurve {
  CurveKind kind = CurveKind::Star;
  double a = 0.0;
  double b = 1.0;
  std::function<double(double)> t;
  std::function<double(double)> dt;
  std::function<Vec(double)> x;
  std::function<Vec(double)> dx;
  bool closed = false;
  /// Set when x(s) is constant, letting quadrature reuse one variational integration.
  std::optional<Vec> fixed_covector;
};

/// (t, lam0) for t in [t0, t1].
AugmentedCurve star_ray(const Vec& lam0, double t0, double t1);
/// (t, exp_p(t lam0)) for t in [t0, t1], from the dense output of the trajectory.
AugmentedCurve graph_curve(const ExtremalTrajectory& traj, double t0, double t1);
/// Piecewise cubic Hermite interpolant through samples; derivatives are estimated by
/// central differences when not supplied.
AugmentedCurve hermite_curve(CurveKind kind, const std::vector<double>& s, const std::vector<double>& t,
                             const std::vector<Vec>& x, bool closed = false);

/// Max deviation between the curve derivative and central differences of its value at n sample points.
double curve_derivative_mismatch(const AugmentedCurve& c, int n = 32, double h = 1e-5);

/// <lam(t), d_{lam0}(q(t; .))[w]> + sdot (<lam(t), qdot(t)> - H).
double eval_eta_star(const Structure& s, const Vec& p, double t, const Vec& lam0, const Vec& w, double sdot,
                     double tol = 1e-12);

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int nodes = 0;
  int excluded_windows = 0;
};

/// Composite 7-point Gauss–Legendre over n_quad panels, compared with 2 n_quad panels.
QuadratureResult hilbert_star(const Structure& s, const Vec& p, const AugmentedCurve& curve, int n_quad = 8,
                              double tol = 1e-12);

struct FieldInverse {
  Vec p;
  double t0 = 1.0;
  Vec lam_anchor;
  int max_iter = 50;
  double damping = 1.0;  // initial Newton step fraction
  double tol = 1e-12;    // residual |q(t; lam0) - q|
  double singular_threshold = 1e-8;  // on sigma_min / sigma_max of dq/dlam0
  double trust_factor = 0.1;         // consecutive solutions within trust_factor |lam|
  double flow_tol = 1e-13;
  int max_halvings = 30;  // line-search step halvings per Newton iteration
};

struct Inversion {
  Vec lam0;
  Vec lam_t;  // covector at the endpoint
  double residual = 0.0;
  int iterations = 0;
};

Inversion invert_field_detail(const Structure& s, const FieldInverse& fi, double t, const Vec& q,
                              const Vec& lam_guess);
/// lam0 with q(t; lam0) = q by damped Newton. Throws SINGULAR_JACOBIAN or NO_CONVERGENCE.
Vec invert_field(const Structure& s, const FieldInverse& fi, double t, const Vec& q, const Vec& lam_guess);

/// Integral of <lam_t(s), q'(s)> - H t'(s) along a Base curve with branch tracking.
QuadratureResult hilbert_base(const Structure& s, const Vec& p, const AugmentedCurve& curve, const FieldInverse& fi,
                              int n_quad = 8);

struct GaussDefect {
  double max_defect = 0.0;
  std::vector<double> s;
  std::vector<double> defect;
};

/// max over samples of |<lam(t,s), d_s gamma(t,s)> - t d_s H| with central differences of step h.
GaussDefect gauss_defect(const Structure& s, const Vec& p, const std::function<Vec(double)>& family, double t,
                         double s_begin, double s_end, int n_samples, double h = 1e-3, double tol = 1e-12);

/// Horizontal curve q' = Σ u_k(t) X_k(q) from p on [0, T] with action ½ ∫ |u|².
struct HorizontalCurve {
  Vec endpoint;
  double action = 0.0;
};
HorizontalCurve integrate_control(const Structure& s, const Vec& p, const std::function<Vec(double)>& u, double T,
                                  double tol = 1e-12);

/// Admissible competitor with the same endpoints as the extremal of lam0 on [0, T]: the
/// extremal control plus a random smooth perturbation of the given amplitude, corrected by
/// Gauss–Newton so that the endpoint matches.
struct Competitor {
  double action = 0.0;
  double endpoint_error = 0.0;
  double geodesic_action = 0.0;
};
Competitor perturbed_competitor(const Structure& s, const Vec& p, const Vec& lam0, double T, double amplitude,
                                std::uint64_t seed, double tol = 1e-12);

}  // namespace subriem
