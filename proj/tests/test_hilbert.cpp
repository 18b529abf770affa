#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles/heisenberg_closed_form.hpp"
#include "subriem/errors.hpp"
#include "subriem/hamiltonian.hpp"
#include "subriem/hilbert.hpp"
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

const Vec origin3 = Vec::Zero(3);

AugmentedCurve star_loop(const Vec& center, double t_center, double rt, const Vec& d1, const Vec& d2) {
  AugmentedCurve c;
  c.kind = CurveKind::Star;
  c.a = 0;
  c.b = 2 * pi;
  c.closed = true;
  c.t = [=](double s) { return t_center + rt * std::cos(s); };
  c.dt = [=](double s) { return -rt * std::sin(s); };
  c.x = [=](double s) { return Vec(center + std::sin(s) * d1 + (1 - std::cos(s)) * d2); };
  c.dx = [=](double s) { return Vec(std::cos(s) * d1 + std::sin(s) * d2); };
  return c;
}

FieldInverse make_fi(const Vec& p, double t0, const Vec& anchor) {
  FieldInverse fi;
  fi.p = p;
  fi.t0 = t0;
  fi.lam_anchor = anchor;
  return fi;
}

}  // namespace

TEST_CASE("eval_eta_star examples") {
  CHECK(eval_eta_star(euclidean(2), Vec::Zero(2), 1.0, v({3, 4}), Vec::Zero(2), 1.0) == doctest::Approx(12.5));
  CHECK(std::abs(eval_eta_star(euclidean(2), Vec::Zero(2), 1.0, v({1, 0}), v({0, 1}), 0.0)) < 1e-14);

  // Directional derivative oracle: the pairing <lam(t), dq/dlam0 w> equals
  // d/de <lam(t; lam0), q(t; lam0 + e w)> at e = 0.
  const Vec lam0 = v({1, 0, 2 * pi});
  const Vec w = v({0, 0, 1});
  const double t = 0.5;
  const auto l = oracle::heisenberg_lam(1, 0, 2 * pi, t);
  const Vec lam_t = v({l[0], l[1], l[2]});
  const double e = 1e-6;
  const auto qp = oracle::heisenberg_q(1, 0, 2 * pi + e, t), qm = oracle::heisenberg_q(1, 0, 2 * pi - e, t);
  const double fd = lam_t.dot(v({qp[0] - qm[0], qp[1] - qm[1], qp[2] - qm[2]})) / (2 * e);
  CHECK(std::abs(eval_eta_star(heisenberg(), origin3, t, lam0, w, 0.0) - fd) < 1e-5);
}

TEST_CASE("hilbert_star on rays equals H times the time span") {
  const auto e = hilbert_star(euclidean(2), Vec::Zero(2), star_ray(v({3, 4}), 0, 1));
  CHECK(std::abs(e.value - 12.5) < 1e-8);
  const auto h = hilbert_star(heisenberg(), origin3, star_ray(v({1, 0, 2 * pi}), 0, 1));
  CHECK(std::abs(h.value - 0.5) < 1e-8);
  Rng rng(4);
  for (const auto& s : {heisenberg(), martinet(), grushin()}) {
    const int n = s.dim();
    const Vec p = rng.unit_vector(n) * 0.3;
    const Vec lam = rng.unit_vector(n) * 2;
    const double t0 = rng.uniform(0, 0.5), t1 = t0 + rng.uniform(0.2, 1.0);
    const auto r = hilbert_star(s, p, star_ray(lam, t0, t1));
    CHECK(std::abs(r.value - hamiltonian_energy(s, p, lam) * (t1 - t0)) < 1e-8);
  }
}

TEST_CASE("hilbert_star on a closed loop vanishes") {
  const auto r = hilbert_star(heisenberg(), origin3,
                              star_loop(v({1, 0, 2 * pi}), 1.0, 0.1, v({0.1, 0, 0}), Vec::Zero(3)), 8);
  CHECK(std::abs(r.value) <= std::max(r.error_estimate, 1e-12));
  // The same rule on an open arc is nonzero.
  auto arc = star_loop(v({1, 0, 2 * pi}), 1.0, 0.1, v({0.1, 0, 0}), Vec::Zero(3));
  arc.b = pi;
  CHECK(std::abs(hilbert_star(heisenberg(), origin3, arc, 8).value) > 1e-4);
}

TEST_CASE("invert_field examples") {
  FieldInverse fe = make_fi(Vec::Zero(2), 1.0, v({0.9, 1.9}));
  CHECK((invert_field(euclidean(2), fe, 1.0, v({1, 2}), v({0.9, 1.9})) - v({1, 2})).norm() < 1e-12);

  const Vec lam0 = v({0.5, 0, pi});
  const Vec q = *exp_map(heisenberg(), origin3, lam0).q;
  FieldInverse fh = make_fi(origin3, 1.0, lam0);
  CHECK((invert_field(heisenberg(), fh, 1.0, q, lam0 + 0.01 * v({1, 0, 0})) - lam0).norm() < 1e-9);

  try {
    invert_field(heisenberg(), make_fi(origin3, 1.0, v({1, 0, 2 * pi})), 1.0, v({0, 0, 1 / (4 * pi)}),
                 v({1, 0, 2 * pi}));
    FAIL("expected SINGULAR_JACOBIAN");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularJacobian);
  }
}

TEST_CASE("property: invert_field round trip") {
  Rng rng(12);
  int tested = 0;
  while (tested < 10) {
    const Vec lam0 = v({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-4, 4)});
    const auto fj = flow_with_jacobian(heisenberg(), origin3, lam0, 1.0);
    if (std::abs(fj.M.determinant()) < 0.1) continue;
    ++tested;
    FieldInverse fi = make_fi(origin3, 1.0, lam0);
    const Vec guess = lam0 + 0.01 * rng.unit_vector(3);
    CHECK((invert_field(heisenberg(), fi, 1.0, fj.q, guess) - lam0).norm() < 1e-9);
  }
}

TEST_CASE("hilbert_base examples") {
  const auto et = integrate_extremal(euclidean(2), Vec::Zero(2), v({3, 4}), 1.0);
  const auto e = hilbert_base(euclidean(2), Vec::Zero(2), graph_curve(et, 0, 1), make_fi(Vec::Zero(2), 0, v({3, 4})));
  CHECK(std::abs(e.value - 12.5) < 1e-8);

  const Vec lam0 = v({0.5, 0, pi});
  const auto traj = integrate_extremal(heisenberg(), origin3, lam0, 1.0, 1e-12);
  const auto base = hilbert_base(heisenberg(), origin3, graph_curve(traj, 0, 1), make_fi(origin3, 0, lam0));
  const auto star = hilbert_star(heisenberg(), origin3, star_ray(lam0, 0, 1));
  CHECK(std::abs(base.value - star.value) <= 1e-6);
  CHECK(base.excluded_windows == 0);
}

TEST_CASE("hilbert_base on a small closed loop away from the conjugate locus") {
  const Vec lam0 = v({0.5, 0, pi});
  const Vec qc = flow_state(heisenberg(), origin3, lam0, 0.6).q;
  AugmentedCurve c;
  c.kind = CurveKind::Base;
  c.a = 0;
  c.b = 2 * pi;
  c.closed = true;
  c.t = [](double s) { return 0.6 + 0.01 * std::sin(s); };
  c.dt = [](double s) { return 0.01 * std::cos(s); };
  c.x = [qc](double s) { return Vec(qc + 0.004 * v({std::cos(s) - 1, std::sin(s), 0.5 * std::sin(s)})); };
  c.dx = [](double s) { return Vec(0.004 * v({-std::sin(s), std::cos(s), 0.5 * std::cos(s)})); };
  CHECK(curve_derivative_mismatch(c) < 1e-6);
  const auto r = hilbert_base(heisenberg(), origin3, c, make_fi(origin3, 0.6, lam0), 8);
  CHECK(std::abs(r.value) <= std::max(10 * r.error_estimate, 1e-10));
}

TEST_CASE("hilbert_base excludes a node sitting on the conjugate locus") {
  // 5 panels on [0, 2] put the midpoint node of the middle panel at t = 1, where
  // (1, 0, 2 pi) is conjugate.
  const Vec lam0 = v({1, 0, 2 * pi});
  const auto traj = integrate_extremal(heisenberg(), origin3, lam0, 2.0, 1e-12);
  const auto r = hilbert_base(heisenberg(), origin3, graph_curve(traj, 0, 2), make_fi(origin3, 0, lam0), 5);
  CHECK(r.excluded_windows == 1);
  CHECK(std::abs(r.value - 0.5 * 2.0) < 1e-6);
}

TEST_CASE("hilbert_base reports a lost branch") {
  const Vec lam0 = v({0.5, 0, pi});
  const auto traj = integrate_extremal(heisenberg(), origin3, lam0, 1.0, 1e-12);
  FieldInverse fi = make_fi(origin3, 0, v({0.5, 0, -pi}));
  try {
    hilbert_base(heisenberg(), origin3, graph_curve(traj, 0.5, 1), fi);
    FAIL("expected BRANCH_LOST");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BranchLost);
  }
}

TEST_CASE("hermite curves interpolate and differentiate consistently") {
  std::vector<double> s, t;
  std::vector<Vec> x;
  for (int i = 0; i <= 64; ++i) {
    const double u = 2 * pi * i / 64;
    s.push_back(u);
    t.push_back(1 + 0.1 * std::cos(u));
    x.push_back(v({1 + 0.1 * std::sin(u), 0, 2 * pi}));
  }
  const auto c = hermite_curve(CurveKind::Star, s, t, x, true);
  CHECK(std::abs(c.t(0.3) - (1 + 0.1 * std::cos(0.3))) < 1e-5);
  CHECK(curve_derivative_mismatch(c) < 1e-6);
  const auto r = hilbert_star(heisenberg(), origin3, c, 8);
  CHECK(std::abs(r.value) <= std::max(10 * r.error_estimate, 1e-10));
}

TEST_CASE("gauss defect examples") {
  const auto e = gauss_defect(euclidean(2), Vec::Zero(2), [](double s) { return v({std::cos(s), std::sin(s)}); }, 1.0,
                              0, 2 * pi, 16);
  CHECK(e.max_defect <= 1e-9);
  const auto rot = gauss_defect(heisenberg(), origin3,
                                [](double s) { return v({std::cos(s), std::sin(s), 2 * pi}); }, 0.7, 0, 2 * pi, 16);
  CHECK(rot.max_defect <= 1e-6);
  const auto lin = gauss_defect(heisenberg(), origin3, [](double s) { return v({1 + s, 0, 2 * pi}); }, 0.3, -0.5,
                                0.5, 16);
  CHECK(lin.max_defect <= 1e-6);
}

TEST_CASE("gauss defect scales as the square of the step when truncation dominates") {
  auto fam = [](double s) { return v({std::cos(s), std::sin(s), 2 * pi * (1 + s)}); };
  const double d1 = gauss_defect(heisenberg(), origin3, fam, 0.7, 0, 0.5, 8, 2e-2).max_defect;
  const double d2 = gauss_defect(heisenberg(), origin3, fam, 0.7, 0, 0.5, 8, 1e-2).max_defect;
  const double d3 = gauss_defect(heisenberg(), origin3, fam, 0.7, 0, 0.5, 8, 5e-3).max_defect;
  CHECK(d1 / d2 == doctest::Approx(4.0).epsilon(0.05));
  CHECK(d2 / d3 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("competitors with the same endpoints cost more action") {
  const Vec lam0 = v({0.5, 0, pi});
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto c = perturbed_competitor(heisenberg(), origin3, lam0, 1.0, 0.05, seed);
    CHECK(c.endpoint_error < 1e-10);
    CHECK(c.geodesic_action == doctest::Approx(0.125).epsilon(1e-10));
    CHECK(c.action > c.geodesic_action);
  }
}
