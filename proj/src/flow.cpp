#include "subriem/flow.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "subriem/errors.hpp"
#include "subriem/hamiltonian.hpp"
#include "subriem/report.hpp"

namespace subriem {

namespace {

// Phase state z = [q, lam] followed by `cols` columns of the linearized flow (2n rows each).
class CombinedSystem {
 public:
  CombinedSystem(const Structure& s, int cols) : kernel_(s), n_(s.dim()), cols_(cols) {
    jac_.resize(static_cast<std::size_t>(4 * n_ * n_));
  }

  std::size_t size() const { return static_cast<std::size_t>(2 * n_ + 2 * n_ * cols_); }

  void operator()(const double* y, double* dy) {
    if (cols_ == 0) {
      kernel_.evaluate(y, dy, nullptr);
      return;
    }
    kernel_.evaluate(y, dy, jac_.data());
    const int r = 2 * n_;
    Eigen::Map<const Mat> A(jac_.data(), r, r);
    Eigen::Map<const Mat> Psi(y + r, r, cols_);
    Eigen::Map<Mat> dPsi(dy + r, r, cols_);
    dPsi.noalias() = A * Psi;
  }

  // [p, lam0, Psi0] with Psi0 = I (cols = 2n) or the vertical columns [0; I] (cols = n).
  std::vector<double> initial_state(const Vec& p, const Vec& lam0) const {
    std::vector<double> y(size(), 0.0);
    for (int i = 0; i < n_; ++i) {
      y[i] = p[i];
      y[n_ + i] = lam0[i];
    }
    const int r = 2 * n_;
    const int row_offset = cols_ == 2 * n_ ? 0 : n_;
    for (int c = 0; c < cols_; ++c) y[r + c * r + row_offset + c] = 1.0;
    return y;
  }

 private:
  HamiltonianKernel kernel_;
  int n_;
  int cols_;
  std::vector<double> jac_;
};

void check_inputs(const Structure& s, const Vec& p, const Vec& lam0, double T, double tol) {
  validate(s, PhasePoint{p, lam0});
  require(T > 0 && std::isfinite(T), ErrorKind::Domain, "final time must be positive");
  require(tol >= kMinTol && tol <= kMaxTol, ErrorKind::Input, "tolerance must lie in [1e-13, 1e-3]");
}

Dopri5Options options_for(double tol) {
  Dopri5Options o;
  o.rtol = tol;
  o.atol = tol * 0.01;
  return o;
}

std::vector<double> run(const Structure& s, const Vec& p, const Vec& lam0, double T, double tol, int cols,
                        DenseOutput* dense) {
  CombinedSystem sys(s, cols);
  const auto y0 = sys.initial_state(p, lam0);
  auto rhs = [&sys](double, const double* y, double* dy) { sys(y, dy); };
  return integrate_dopri5(rhs, 0.0, y0, T, options_for(tol), dense).y_end;
}

ExtremalTrajectory build_trajectory(const Structure& s, const Vec& p, const Vec& lam0, double T, double tol,
                                    std::shared_ptr<DenseOutput> dense) {
  const int n = s.dim();
  ExtremalTrajectory traj{s, p, lam0, T, tol, hamiltonian_energy(s, p, lam0), 0.0, {}, dense};
  const auto times = dense->step_times();
  traj.samples.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto y = dense->node_state(i);
    Vec q = Eigen::Map<const Vec>(y.data(), n);
    Vec lam = Eigen::Map<const Vec>(y.data() + n, n);
    const double drift = std::abs(hamiltonian_energy(s, q, lam) - traj.energy);
    traj.max_energy_drift = std::max(traj.max_energy_drift, drift);
    traj.samples.push_back({times[i], std::move(q), std::move(lam)});
  }
  if (traj.max_energy_drift > energy_drift_bound(tol, traj.energy)) {
    std::ostringstream msg;
    msg << "energy drift " << traj.max_energy_drift << " exceeds the conservation bound";
    throw IntegrationFailure(msg.str(), T);
  }
  return traj;
}

}  // namespace

double energy_drift_bound(double tol, double energy) { return std::max(1e-9, 100.0 * tol) * (1.0 + energy); }

PhasePoint ExtremalTrajectory::at(double t) const {
  const Eigen::Index n = p.size();
  Vec z(2 * n);
  dense->evaluate(t, 0, static_cast<std::size_t>(2 * n), z.data());
  return {z.head(n), z.tail(n)};
}

Vec ExtremalTrajectory::velocity(double t) const { return hamiltonian_rhs(structure, at(t)).qdot; }

Mat JacobianTrack::Phi_at(double t) const {
  const int n = dim();
  Mat Phi(2 * n, 2 * n);
  trajectory.dense->evaluate(t, static_cast<std::size_t>(2 * n), static_cast<std::size_t>(4 * n * n), Phi.data());
  return Phi;
}

Mat JacobianTrack::M_at(double t) const {
  const int n = dim();
  const int r = 2 * n;
  Mat M(n, n);
  // Column c of M is rows 0..n-1 of Phi column n + c.
  for (int c = 0; c < n; ++c) {
    trajectory.dense->evaluate(t, static_cast<std::size_t>(r + (n + c) * r), static_cast<std::size_t>(n),
                               M.col(c).data());
  }
  return M;
}

double JacobianTrack::D_at(double t) const { return M_at(t).determinant(); }

ExtremalTrajectory integrate_extremal(const Structure& s, const Vec& p, const Vec& lam0, double T, double tol) {
  check_inputs(s, p, lam0, T, tol);
  auto dense = std::make_shared<DenseOutput>();
  run(s, p, lam0, T, tol, 0, dense.get());
  return build_trajectory(s, p, lam0, T, tol, dense);
}

JacobianTrack integrate_variational(const Structure& s, const Vec& p, const Vec& lam0, double T, double tol) {
  check_inputs(s, p, lam0, T, tol);
  const int n = s.dim();
  auto dense = std::make_shared<DenseOutput>();
  run(s, p, lam0, T, tol, 2 * n, dense.get());
  JacobianTrack track{build_trajectory(s, p, lam0, T, tol, dense), {}, {}, {}, {}};
  const auto times = dense->step_times();
  const int r = 2 * n;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto y = dense->node_state(i);
    Mat Phi = Eigen::Map<const Mat>(y.data() + r, r, r);
    Mat M = Phi.block(0, n, n, n);
    track.t.push_back(times[i]);
    track.D.push_back(M.determinant());
    track.M.push_back(std::move(M));
    track.Phi.push_back(std::move(Phi));
  }
  return track;
}

ExpResult exp_map(const Structure& s, const Vec& p, const Vec& lam0, double tol) {
  check_inputs(s, p, lam0, 1.0, tol);
  ExpResult result;
  try {
    const auto y = run(s, p, lam0, 1.0, tol, 0, nullptr);
    result.q = Eigen::Map<const Vec>(y.data(), s.dim());
  } catch (const IntegrationFailure& e) {
    result.failure_time = e.last_valid_time();
    result.message = e.what();
  }
  return result;
}

PhasePoint flow_state(const Structure& s, const Vec& p, const Vec& lam0, double t, double tol) {
  check_inputs(s, p, lam0, t, tol);
  const int n = s.dim();
  const auto y = run(s, p, lam0, t, tol, 0, nullptr);
  return {Eigen::Map<const Vec>(y.data(), n), Eigen::Map<const Vec>(y.data() + n, n)};
}

FlowJacobian flow_with_jacobian(const Structure& s, const Vec& p, const Vec& lam0, double t, double tol) {
  check_inputs(s, p, lam0, t, tol);
  const int n = s.dim();
  const auto y = run(s, p, lam0, t, tol, n, nullptr);
  const int r = 2 * n;
  Eigen::Map<const Mat> Psi(y.data() + r, r, n);
  return {Eigen::Map<const Vec>(y.data(), n), Eigen::Map<const Vec>(y.data() + n, n), Psi.topRows(n),
          Psi.bottomRows(n)};
}

double det_exp_along_ray(const JacobianTrack& track, double t) {
  require(t > 0, ErrorKind::Domain, "det_exp_along_ray needs t > 0");
  require(t <= track.T() * (1 + 1e-12), ErrorKind::Domain, "det_exp_along_ray queried beyond the track");
  return track.D_at(std::min(t, track.T())) / std::pow(t, track.dim());
}

DeterminantSamples sample_determinant(const JacobianTrack& track, int per_unit) {
  const double T = track.T();
  const int count = std::max(2, static_cast<int>(std::ceil(per_unit * T)));
  DeterminantSamples out;
  out.t.reserve(count);
  out.D.reserve(count);
  for (int i = 1; i <= count; ++i) {
    const double t = T * i / count;
    out.t.push_back(t);
    out.D.push_back(track.D_at(t));
  }
  return out;
}

void write_trajectory_csv(std::ostream& out, const ExtremalTrajectory& traj, const JacobianTrack* track) {
  const int n = static_cast<int>(traj.p.size());
  out << 't';
  for (int i = 1; i <= n; ++i) out << ",q" << i;
  for (int i = 1; i <= n; ++i) out << ",lam" << i;
  if (track) out << ",D";
  out << '\n';
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const auto& smp = traj.samples[k];
    out << format_number(smp.t);
    for (int i = 0; i < n; ++i) out << ',' << format_number(smp.q[i]);
    for (int i = 0; i < n; ++i) out << ',' << format_number(smp.lam[i]);
    if (track) out << ',' << format_number(track->D[k]);
    out << '\n';
  }
}

}  // namespace subriem
