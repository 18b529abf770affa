#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "subriem/dopri5.hpp"
#include "subriem/structure.hpp"
#include "subriem/types.hpp"

namespace subriem {

struct TrajectorySample {
  double t;
  Vec q;
  Vec lam;
};

/// Normal extremal t -> (q(t), lam(t)) on [0, T], sampled at the accepted integrator steps.
struct ExtremalTrajectory {
  Structure structure;
  Vec p;
  Vec lam0;
  double T = 0.0;
  double tol = 0.0;
  double energy = 0.0;
  double max_energy_drift = 0.0;
  std::vector<TrajectorySample> samples;
  /// State [q, lam] (followed by the variational block for tracks).
  std::shared_ptr<const DenseOutput> dense;

  PhasePoint at(double t) const;
  /// dq/dt at time t.
  Vec velocity(double t) const;
};

/// Fundamental matrix of the linearized flow along an extremal.
struct JacobianTrack {
  ExtremalTrajectory trajectory;
  std::vector<double> t;
  std::vector<Mat> Phi;  // 2n x 2n, Phi(0) = I
  std::vector<Mat> M;    // dq(t)/dlam0, the (q, lam) block of Phi
  std::vector<double> D;

  int dim() const { return static_cast<int>(trajectory.p.size()); }
  double T() const { return trajectory.T; }
  Mat Phi_at(double t) const;
  Mat M_at(double t) const;
  double D_at(double t) const;
};

/// Tolerance range accepted by the integration front ends.
constexpr double kMinTol = 1e-13;
constexpr double kMaxTol = 1e-3;

/// Bound on |H(t) - H(0)| enforced on every trajectory.
double energy_drift_bound(double tol, double energy);

ExtremalTrajectory integrate_extremal(const Structure& s, const Vec& p, const Vec& lam0, double T,
                                      double tol = 1e-10);

JacobianTrack integrate_variational(const Structure& s, const Vec& p, const Vec& lam0, double T,
                                    double tol = 1e-10);

struct ExpResult {
  std::optional<Vec> q;  // empty when the flow does not reach t = 1
  double failure_time = 0.0;
  std::string message;
};

/// Projection of the time-1 flow from (p, lam0).
ExpResult exp_map(const Structure& s, const Vec& p, const Vec& lam0, double tol = 1e-12);

/// Flow state at time t without dense output.
PhasePoint flow_state(const Structure& s, const Vec& p, const Vec& lam0, double t, double tol = 1e-12);

/// Endpoint of the flow plus the derivatives of (q(t), lam(t)) with respect to lam0.
struct FlowJacobian {
  Vec q;
  Vec lam;
  Mat M;    // dq(t)/dlam0
  Mat Lam;  // dlam(t)/dlam0
};
FlowJacobian flow_with_jacobian(const Structure& s, const Vec& p, const Vec& lam0, double t, double tol = 1e-12);

/// det(d_{t lam0} exp_p) = t^{-n} D(t).
double det_exp_along_ray(const JacobianTrack& track, double t);

/// D(t) on a uniform grid of at least per_unit points per unit time over (0, T].
struct DeterminantSamples {
  std::vector<double> t;
  std::vector<double> D;
};
DeterminantSamples sample_determinant(const JacobianTrack& track, int per_unit = 512);

/// CSV with header t,q1..qn,lam1..lamn[,D]; one row per sample.
void write_trajectory_csv(std::ostream& out, const ExtremalTrajectory& traj, const JacobianTrack* track = nullptr);

}  // namespace subriem
