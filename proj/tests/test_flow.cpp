#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles/heisenberg_closed_form.hpp"
#include "subriem/dopri5.hpp"
#include "subriem/errors.hpp"
#include "subriem/flow.hpp"
#include "subriem/hamiltonian.hpp"
#include "subriem/random.hpp"

using namespace subriem;
using std::numbers::pi;

namespace {

Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

Vec closed_q(const Vec& lam, double t) {
  const auto q = oracle::heisenberg_q(lam[0], lam[1], lam[2], t);
  return v({q[0], q[1], q[2]});
}

}  // namespace

TEST_CASE("dopri5: exponential growth and dense output") {
  auto f = [](double, const double* y, double* dy) { dy[0] = y[0]; dy[1] = -2 * y[1]; };
  std::vector<double> y0{1.0, 1.0};
  Dopri5Options o;
  o.rtol = o.atol = 1e-12;
  DenseOutput dense;
  const auto r = integrate_dopri5(f, 0.0, y0, 2.0, o, &dense);
  CHECK(std::abs(r.y_end[0] - std::exp(2.0)) < 1e-10 * std::exp(2.0));
  CHECK(std::abs(r.y_end[1] - std::exp(-4.0)) < 1e-11);
  CHECK(dense.t_end() == 2.0);
  for (double t : {0.0, 0.123, 0.77, 1.5, 2.0}) {
    const auto y = dense(t);
    CHECK(std::abs(y[0] - std::exp(t)) < 1e-9 * std::exp(t));
  }
  CHECK_THROWS_AS(dense(2.5), Error);
}

TEST_CASE("dopri5: blow-up reports the last valid time") {
  auto f = [](double, const double* y, double* dy) { dy[0] = y[0] * y[0]; };
  std::vector<double> y0{1.0};
  try {
    integrate_dopri5(f, 0.0, y0, 2.0, Dopri5Options{});
    FAIL("expected an integration failure");
  } catch (const IntegrationFailure& e) {
    CHECK(e.last_valid_time() > 0.9);
    CHECK(e.last_valid_time() < 1.0);
  }
}

TEST_CASE("closed-form Heisenberg extremal satisfies the Hamiltonian equations") {
  Rng rng(1);
  const Structure h = heisenberg();
  for (int trial = 0; trial < 10; ++trial) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1), w = rng.uniform(-8, 8);
    for (double t : {0.1, 0.5, 0.9}) {
      const double eps = 1e-5;
      const auto qp = oracle::heisenberg_q(a, b, w, t + eps), qm = oracle::heisenberg_q(a, b, w, t - eps);
      const auto lp = oracle::heisenberg_lam(a, b, w, t + eps), lm = oracle::heisenberg_lam(a, b, w, t - eps);
      const auto q = oracle::heisenberg_q(a, b, w, t);
      const auto l = oracle::heisenberg_lam(a, b, w, t);
      const auto rhs = hamiltonian_rhs(h, {v({q[0], q[1], q[2]}), v({l[0], l[1], l[2]})});
      for (int i = 0; i < 3; ++i) {
        CHECK(std::abs((qp[i] - qm[i]) / (2 * eps) - rhs.qdot[i]) < 1e-7 * (1 + std::abs(w)));
        CHECK(std::abs((lp[i] - lm[i]) / (2 * eps) - rhs.lamdot[i]) < 1e-6 * (1 + w * w));
      }
    }
  }
}

TEST_CASE("integrate_extremal examples") {
  const auto e = integrate_extremal(euclidean(2), v({0, 0}), v({1, 2}), 1.0, 1e-10);
  CHECK((e.samples.back().q - v({1, 2})).norm() < 1e-12);
  CHECK((e.samples.back().lam - v({1, 2})).norm() == 0.0);
  CHECK(e.samples.front().t == 0.0);
  CHECK(e.samples.back().t == 1.0);

  const auto h = integrate_extremal(heisenberg(), v({0, 0, 0}), v({1, 0, 2 * pi}), 1.0, 1e-10);
  CHECK((h.samples.back().q - v({0, 0, 1 / (4 * pi)})).norm() < 1e-8);
  CHECK(h.max_energy_drift <= 1e-9 * (1 + h.energy));
  for (double t : {0.2, 0.45, 0.8}) CHECK((h.at(t).q - closed_q(v({1, 0, 2 * pi}), t)).norm() < 1e-8);

  const auto line = integrate_extremal(heisenberg(), v({0, 0, 0}), v({1, 0, 0}), 1.0, 1e-10);
  CHECK((line.samples.back().q - v({1, 0, 0})).norm() < 1e-12);

  CHECK_THROWS_AS(integrate_extremal(heisenberg(), v({0, 0, 0}), v({1, 0, 0}), 0.0), Error);
  CHECK_THROWS_AS(integrate_extremal(heisenberg(), v({0, 0, 0}), v({1, 0, 0}), 1.0, 1e-2), Error);
  CHECK_THROWS_AS(integrate_extremal(heisenberg(), v({0, 0}), v({1, 0}), 1.0), Error);
}

TEST_CASE("exp_map examples") {
  CHECK((*exp_map(euclidean(3), v({1, 2, 3}), v({-1, 0.5, 2})).q - v({0, 2.5, 5})).norm() < 1e-12);
  CHECK((*exp_map(heisenberg(), v({0, 0, 0}), v({0, 1, 2 * pi})).q - v({0, 0, 1 / (4 * pi)})).norm() < 1e-9);
  CHECK((*exp_map(heisenberg(), v({0, 0, 0}), v({2, 0, 4 * pi})).q - v({0, 0, 1 / (2 * pi)})).norm() < 1e-9);
}

TEST_CASE("exp_map reports blow-up instead of throwing") {
  // X = (x^2) drives x' = lam x^2 ... with H = ½ (lam x²)², a finite-time blow-up.
  Polynomial x2(1);
  x2.add_term(1.0, {2});
  const Structure s("blowup", 1, {PolyField{x2}});
  const auto r = exp_map(s, v({1.0}), v({5.0}));
  CHECK_FALSE(r.q.has_value());
  CHECK(r.failure_time < 1.0);
  CHECK_FALSE(r.message.empty());
}

TEST_CASE("integrate_variational examples") {
  const auto e = integrate_variational(euclidean(3), v({0, 0, 0}), v({1, -1, 2}), 2.0, 1e-10);
  for (double t : {0.5, 1.0, 2.0}) {
    CHECK((e.M_at(t) - t * Mat::Identity(3, 3)).norm() < 1e-12);
    CHECK(std::abs(e.D_at(t) - t * t * t) < 1e-11);
  }
  CHECK((e.Phi.front() - Mat::Identity(6, 6)).norm() == 0.0);
  CHECK(e.D.front() == 0.0);

  const Vec lam = v({1, 0, 2 * pi});
  const auto h = integrate_variational(heisenberg(), v({0, 0, 0}), lam, 1.0, 1e-11);
  for (double t : {0.25, 0.5, 1.0}) {
    Mat fd(3, 3);
    const double eps = 1e-6;
    for (int c = 0; c < 3; ++c) {
      Vec lp = lam, lm = lam;
      lp[c] += eps;
      lm[c] -= eps;
      fd.col(c) = (flow_state(heisenberg(), v({0, 0, 0}), lp, t).q - flow_state(heisenberg(), v({0, 0, 0}), lm, t).q) /
                  (2 * eps);
    }
    const Mat M = h.M_at(t);
    CHECK((M - fd).norm() <= 1e-5 * (1 + M.norm()));
    const auto J = oracle::heisenberg_jacobian_fd(1, 0, 2 * pi, t);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) CHECK(std::abs(M(r, c) - J[r][c]) < 1e-6);
    CHECK(std::abs(h.D_at(t) - oracle::heisenberg_det(1, 0, 2 * pi, t)) < 1e-9);
  }

  const auto m = integrate_variational(martinet(), v({0, 0, 0}), v({0, 1, 0}), 2.0, 1e-10);
  for (double d : m.D) CHECK(std::abs(d) <= 1e-10);
  for (double t = 0.01; t <= 2.0; t += 0.01) CHECK(std::abs(m.D_at(t)) <= 1e-10);
}

TEST_CASE("det_exp_along_ray") {
  const auto e = integrate_variational(euclidean(2), v({0, 0}), v({0.3, 0.4}), 3.0, 1e-10);
  for (double t : {0.1, 1.0, 2.5}) CHECK(std::abs(det_exp_along_ray(e, t) - 1.0) < 1e-12);
  CHECK_THROWS_AS(det_exp_along_ray(e, 0.0), Error);

  const Vec lam = v({1, 0, 2 * pi});
  const auto h = integrate_variational(heisenberg(), v({0, 0, 0}), lam, 1.2, 1e-11);
  CHECK(std::abs(det_exp_along_ray(h, 1.0)) < 1e-8);
  // Direct Jacobian of exp at the rescaled covector t lam.
  for (double t : {0.3, 0.7, 1.1}) {
    const Mat direct = flow_with_jacobian(heisenberg(), v({0, 0, 0}), t * lam, 1.0).M;
    const double ref = direct.determinant();
    CHECK(std::abs(det_exp_along_ray(h, t) - ref) <= 1e-6 * std::max(1e-3, std::abs(ref)));
  }
}

TEST_CASE("property: energy conservation and homogeneity on random covectors") {
  Rng rng(9);
  for (const auto& s : {heisenberg(), martinet()}) {
    for (int trial = 0; trial < 8; ++trial) {
      const Vec lam = rng.unit_vector(3) * rng.uniform(0.5, 3);
      const Vec p = rng.unit_vector(3) * rng.uniform(0, 0.5);
      const auto traj = integrate_extremal(s, p, lam, 1.5, 1e-10);
      CHECK(traj.max_energy_drift <= 1e-9 * (1 + traj.energy));
      const double c = rng.uniform(0.3, 1.5);
      const Vec a = flow_state(s, p, c * lam, 1.0).q;
      const Vec b = flow_state(s, p, lam, c).q;
      CHECK((a - b).norm() <= 1e-8);
    }
  }
}

TEST_CASE("property: Jacobian consistency on Martinet") {
  Rng rng(17);
  const Structure s = martinet();
  for (int trial = 0; trial < 4; ++trial) {
    const Vec lam = rng.unit_vector(3) * 2;
    const Vec p = rng.unit_vector(3) * 0.5;
    const auto track = integrate_variational(s, p, lam, 1.0, 1e-11);
    for (double t : {0.25, 0.5, 1.0}) {
      Mat fd(3, 3);
      const double eps = 1e-6;
      for (int c = 0; c < 3; ++c) {
        Vec lp = lam, lm = lam;
        lp[c] += eps;
        lm[c] -= eps;
        fd.col(c) = (flow_state(s, p, lp, t).q - flow_state(s, p, lm, t).q) / (2 * eps);
      }
      CHECK((track.M_at(t) - fd).norm() <= 1e-5 * (1 + fd.norm()));
    }
  }
}

TEST_CASE("property: small-time regularity and radial non-degeneracy") {
  Rng rng(23);
  for (int trial = 0; trial < 6; ++trial) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1), w = rng.uniform(2, 10);
    const Vec lam = v({a, b, w});
    const double t_first = 2 * pi / w;
    const auto track = integrate_variational(heisenberg(), v({0, 0, 0}), lam, 0.95 * t_first, 1e-10);
    for (int i = 1; i <= 50; ++i) {
      const double t = 0.95 * t_first * i / 50;
      CHECK(det_exp_along_ray(track, t) > 0);
      CHECK(track.trajectory.velocity(t).norm() > 0.1 * std::hypot(a, b));
    }
  }
}

TEST_CASE("trajectory CSV") {
  const auto track = integrate_variational(euclidean(2), v({0, 0}), v({1, 2}), 1.0, 1e-10);
  std::ostringstream os;
  write_trajectory_csv(os, track.trajectory, &track);
  std::istringstream is(os.str());
  std::string header, first;
  std::getline(is, header);
  std::getline(is, first);
  CHECK(header == "t,q1,q2,lam1,lam2,D");
  CHECK(first == "0,0,0,1,2,0");
  std::ostringstream os2;
  write_trajectory_csv(os2, track.trajectory, &track);
  CHECK(os.str() == os2.str());
}
