#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/heisenberg_closed_form.hpp"
#include "subriem/conjugate.hpp"
#include "subriem/errors.hpp"
#include "subriem/flow.hpp"
#include "subriem/hamiltonian.hpp"
#include "subriem/hilbert.hpp"
#include "subriem/random.hpp"
#include "subriem/witness.hpp"

using namespace subriem;
using std::numbers::pi;

namespace {

// Pinned tolerances.
constexpr double kEnergyDrift = 1e-9;
constexpr double kOracleSup = 1e-8;
constexpr double kOracleResidual = 1e-6;
constexpr double kJacobianRel = 1e-5;
constexpr double kHomogeneityRel = 1e-6;
constexpr double kConjugateTime = 1e-6;
constexpr double kLocusPlane = 1e-6;
constexpr double kLocusDelta = 1e-6;
constexpr double kGaussDefect = 1e-6;
constexpr double kGaussHalving = 3.0;
constexpr double kRayValue = 1e-8;
constexpr double kLoopFactor = 10.0;
constexpr double kStarBase = 1e-6;
constexpr double kWitnessGap = 1e-8;
constexpr double kWitnessSeparation = 1e-6;
constexpr int kWitnessBudget = 10000;
constexpr double kAbnormalDet = 1e-10;
constexpr double kCutTime = 1e-3;
constexpr double kActionSlack = 1e-8;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

Vec oracle_q(const Vec& lam, double t) {
  const auto q = oracle::heisenberg_q(lam[0], lam[1], lam[2], t);
  return v({q[0], q[1], q[2]});
}

Vec oracle_lam(const Vec& lam, double t) {
  const auto l = oracle::heisenberg_lam(lam[0], lam[1], lam[2], t);
  return v({l[0], l[1], l[2]});
}

const Vec origin3 = Vec::Zero(3);

void c1(Verdict& r) {
  const auto traj = integrate_extremal(heisenberg(), origin3, v({1, 0, 2 * pi}), 1.0, 1e-10);
  const double rel = traj.max_energy_drift / traj.energy;
  r.detail << "relative drift " << rel;
  r.check(rel <= kEnergyDrift, "drift");
}

void c2(Verdict& r) {
  const Structure H = heisenberg();
  Rng rng(2024);
  double worst_residual = 0.0, worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Vec lam = v({rng.normal(), rng.normal(), rng.uniform(-10, 10)});
    // The oracle must satisfy the Hamiltonian equations before it is trusted.
    for (double t : {0.1, 0.5, 0.9}) {
      const double e = 1e-5;
      const Vec dq = (oracle_q(lam, t + e) - oracle_q(lam, t - e)) / (2 * e);
      const Vec dl = (oracle_lam(lam, t + e) - oracle_lam(lam, t - e)) / (2 * e);
      const PhaseVelocity pv = hamiltonian_rhs(H, PhasePoint{oracle_q(lam, t), oracle_lam(lam, t)});
      worst_residual = std::max({worst_residual, (dq - pv.qdot).norm(), (dl - pv.lamdot).norm()});
    }
    const auto traj = integrate_extremal(H, origin3, lam, 1.0, 1e-12);
    for (int i = 0; i <= 200; ++i) {
      const double t = i / 200.0;
      worst = std::max(worst, (traj.at(t).q - oracle_q(lam, t)).norm());
    }
  }
  r.detail << "oracle residual " << worst_residual << ", sup error " << worst;
  r.check(worst_residual <= kOracleResidual, "oracle residual");
  r.check(worst <= kOracleSup, "sup error");
}

void c3(Verdict& r) {
  Rng rng(33);
  double worst = 0.0;
  for (const Structure& s : {heisenberg(), martinet()}) {
    for (int k = 0; k < 5; ++k) {
      const Vec lam = rng.unit_vector(3) * rng.uniform(0.5, 4);
      const Vec p = rng.in_ball(3, 0.5);
      const auto track = integrate_variational(s, p, lam, 1.0, 1e-12);
      for (double t : {0.25, 0.5, 1.0}) {
        Mat fd(3, 3);
        const double e = 1e-6;
        for (int c = 0; c < 3; ++c) {
          Vec lp = lam, lm = lam;
          lp[c] += e;
          lm[c] -= e;
          fd.col(c) = (flow_state(s, p, lp, t, 1e-13).q - flow_state(s, p, lm, t, 1e-13).q) / (2 * e);
        }
        worst = std::max(worst, (track.M_at(t) - fd).norm() / fd.norm());
      }
    }
  }
  r.detail << "max relative deviation " << worst;
  r.check(worst <= kJacobianRel, "Jacobian");
}

void c4(Verdict& r) {
  Rng rng(44);
  const std::vector<Structure> structures = {heisenberg(), martinet(), grushin()};
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const Structure& s = structures[k % 3];
    const int n = s.dim();
    const Vec lam = rng.unit_vector(n) * rng.uniform(0.5, 3);
    const Vec p = rng.in_ball(n, 0.3);
    const double t = rng.uniform(0.2, 1.5);
    const auto track = integrate_variational(s, p, lam, t, 1e-12);
    const double via_ray = det_exp_along_ray(track, t);
    const double direct = flow_with_jacobian(s, p, Vec(t * lam), 1.0, 1e-13).M.determinant();
    worst = std::max(worst, std::abs(via_ray - direct) / std::max(std::abs(direct), std::abs(via_ray)));
  }
  r.detail << "max relative deviation " << worst;
  r.check(worst <= kHomogeneityRel, "homogeneity");
}

// First sign change of the closed-form determinant on (0.01, t_hi], refined by bisection.
double oracle_first_zero(double w, double t_hi) {
  auto f = [w](double t) { return oracle::heisenberg_det(1, 0, w, t); };
  const int N = 20000;
  double a = 0.01, fa = f(a);
  for (int i = 1; i <= N; ++i) {
    double b = 0.01 + (t_hi - 0.01) * i / N;
    const double fb = f(b);
    if (fa * fb < 0 || fb == 0) {
      for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        (f(a) * f(m) <= 0 ? b : a) = m;
      }
      return 0.5 * (a + b);
    }
    a = b;
    fa = fb;
  }
  return NAN;
}

void c5(Verdict& r) {
  for (double w : {pi, 2 * pi, 4 * pi}) {
    const auto fc = first_conjugate(heisenberg(), origin3, v({1, 0, w}), 3.0);
    const double oracle = oracle_first_zero(w, 3.0);
    const double expected = 2 * pi / w;
    const double t = fc.record ? fc.record->t_star : NAN;
    r.detail << "w=" << w / pi << "pi: t*=" << t << " (oracle " << oracle << ") ";
    r.check(std::abs(oracle - expected) <= kConjugateTime, "oracle zero");
    r.check(fc.record && std::abs(t - expected) <= kConjugateTime, "conjugate time");
  }
}

void c6(Verdict& r) {
  for (int m : {1, 2, 3}) {
    const auto curve = synthetic_determinant([m](double t) { return std::pow(t - 1, m) * (1 + t / 2); }, 0.4, 1.6);
    const auto search = find_conjugate_times(curve, 0.5);
    const bool ok = search.records.size() == 1 && search.records[0].order == m &&
                    std::abs(search.records[0].t_star - 1) <= 1e-6;
    r.detail << "m=" << m << (ok ? " ok " : " wrong ");
    r.check(ok, "synthetic m=" + std::to_string(m));
  }
  const int m_oracle = oracle::heisenberg_order_fd(1, 0, 2 * pi, 1.0);
  const auto track = integrate_variational(heisenberg(), origin3, v({1, 0, 2 * pi}), 1.2, 1e-10);
  const auto est = estimate_order(track, 1.0, 0.05);
  r.detail << "Heisenberg: slope " << est.slope << ", derivative test " << est.derivative_order << ", oracle "
           << m_oracle;
  r.check(est.order == m_oracle && est.derivative_order == m_oracle && std::lround(est.slope) == m_oracle,
          "Heisenberg order");
}

void c7(Verdict& r) {
  const auto slice = locus_slice(heisenberg(), origin3, 0.5, 16, 16, 4.0);
  int points = 0, sign_changes = 0, minima = 0;
  double worst_plane = 0.0;
  bool delta_ok = true;
  for (const auto& e : slice.entries) {
    if (!e.locus_point) continue;
    ++points;
    worst_plane = std::max(worst_plane, std::abs(std::abs((*e.locus_point)[2]) - 2 * pi));
    const bool change = e.delta_signs[0] != 0 && e.delta_signs[0] == -e.delta_signs[1];
    const bool minimum = std::abs(e.delta_at_locus) <= kLocusDelta &&
                         std::abs(e.delta_values[0]) > std::abs(e.delta_at_locus) &&
                         std::abs(e.delta_values[1]) > std::abs(e.delta_at_locus);
    if (change) ++sign_changes;
    else if (minimum) ++minima;
    delta_ok = delta_ok && std::abs(e.delta_at_locus) <= kLocusDelta && (change || minimum);
  }
  r.detail << points << " locus points, max ||w| - 2pi| " << worst_plane << ", sign changes " << sign_changes
           << ", strict minima " << minima;
  r.check(points > 0, "empty slice");
  r.check(worst_plane <= kLocusPlane, "plane");
  r.check(delta_ok, "radial criterion");
}

void c8(Verdict& r) {
  struct Family {
    const char* name;
    std::function<Vec(double)> delta;
    double t, s0, s1;
  };
  const std::vector<Family> families = {
      {"rotation", [](double s) { return v({std::cos(s), std::sin(s), 2 * pi}); }, 0.7, 0, 2 * pi},
      {"linear", [](double s) { return v({1 + s, 0, 2 * pi}); }, 0.3, -0.5, 0.5},
  };
  for (const auto& f : families) {
    const double h = 1e-3;
    const double d1 = gauss_defect(heisenberg(), origin3, f.delta, f.t, f.s0, f.s1, 16, h).max_defect;
    const double d2 = gauss_defect(heisenberg(), origin3, f.delta, f.t, f.s0, f.s1, 16, h / 2).max_defect;
    r.detail << f.name << ": defect " << d1 << ", ratio under halving " << d1 / d2 << "; ";
    r.check(d1 <= kGaussDefect, std::string(f.name) + " defect");
    r.check(d1 / d2 >= kGaussHalving, std::string(f.name) + " halving");
  }
}

AugmentedCurve random_star_loop(Rng& rng) {
  const Vec c = v({rng.normal(), rng.normal(), rng.uniform(-2 * pi, 2 * pi)});
  const double tc = rng.uniform(0.3, 1.2);
  const double rt = rng.uniform(0.0, 0.1);
  const Vec d1 = rng.unit_vector(3) * rng.uniform(0.02, 0.2);
  const Vec d2 = rng.unit_vector(3) * rng.uniform(0.02, 0.2);
  const double phase = rng.uniform(0, 2 * pi);
  AugmentedCurve a;
  a.kind = CurveKind::Star;
  a.a = 0;
  a.b = 2 * pi;
  a.closed = true;
  a.t = [=](double s) { return tc + rt * std::sin(s + phase); };
  a.dt = [=](double s) { return rt * std::cos(s + phase); };
  a.x = [=](double s) { return Vec(c + std::cos(s) * d1 + std::sin(2 * s) * d2); };
  a.dx = [=](double s) { return Vec(-std::sin(s) * d1 + 2 * std::cos(2 * s) * d2); };
  return a;
}

void c9(Verdict& r) {
  const Structure H = heisenberg();
  Rng rng(99);
  double worst_ray = 0.0;
  for (int k = 0; k < 5; ++k) {
    const Vec lam = v({rng.normal(), rng.normal(), rng.uniform(-8, 8)});
    const double t0 = rng.uniform(0, 0.5), t1 = t0 + rng.uniform(0.2, 1.0);
    const auto q = hilbert_star(H, origin3, star_ray(lam, t0, t1));
    worst_ray = std::max(worst_ray, std::abs(q.value - hamiltonian_energy(H, origin3, lam) * (t1 - t0)));
  }
  int loops_ok = 0;
  double worst_ratio = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto q = hilbert_star(H, origin3, random_star_loop(rng));
    const double ratio = std::abs(q.value) / q.error_estimate;
    worst_ratio = std::max(worst_ratio, ratio);
    if (ratio <= kLoopFactor) ++loops_ok;
  }
  // Star curves and their images under the flow, away from the conjugate locus.
  double worst_coincidence = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double a0 = rng.uniform(0, 2 * pi), w0 = rng.uniform(1.0, 3.0);
    auto lam = [=](double s) { return v({0.5 * std::cos(a0 + 0.3 * s), 0.5 * std::sin(a0 + 0.3 * s), w0 + 0.2 * s}); };
    auto dlam = [=](double s) {
      return v({-0.15 * std::sin(a0 + 0.3 * s), 0.15 * std::cos(a0 + 0.3 * s), 0.2});
    };
    auto tt = [](double s) { return 0.5 + 0.2 * s; };
    AugmentedCurve star;
    star.kind = CurveKind::Star;
    star.a = 0;
    star.b = 1;
    star.t = tt;
    star.dt = [](double) { return 0.2; };
    star.x = lam;
    star.dx = dlam;
    AugmentedCurve base = star;
    base.kind = CurveKind::Base;
    base.x = [=](double s) { return flow_state(H, origin3, lam(s), tt(s), 1e-13).q; };
    base.dx = [=](double s) {
      const FlowJacobian fj = flow_with_jacobian(H, origin3, lam(s), tt(s), 1e-13);
      const Vec qdot = hamiltonian_rhs(H, PhasePoint{fj.q, fj.lam}).qdot;
      return Vec(fj.M * dlam(s) + 0.2 * qdot);
    };
    FieldInverse fi;
    fi.p = origin3;
    fi.t0 = tt(0);
    fi.lam_anchor = lam(0);
    const double Is = hilbert_star(H, origin3, star).value;
    const double Ib = hilbert_base(H, origin3, base, fi).value;
    worst_coincidence = std::max(worst_coincidence, std::abs(Is - Ib));
  }
  r.detail << "ray error " << worst_ray << ", loops within " << kLoopFactor << "x estimate " << loops_ok
           << "/100 (worst ratio " << worst_ratio << "), star/base gap " << worst_coincidence;
  r.check(worst_ray <= kRayValue, "ray");
  r.check(loops_ok == 100, "loops");
  r.check(worst_coincidence <= kStarBase, "star/base");
}

void c10(Verdict& r) {
  for (double radius : {0.1, 0.01}) {
    for (std::uint64_t seed : {7, 11}) {
      const auto w = injectivity_witness(heisenberg(), origin3, v({1, 0, 2 * pi}), radius, kWitnessBudget, seed);
      r.detail << "r=" << radius << ",seed=" << seed << ": gap " << w.pair.image_gap << " sep " << w.pair.separation
               << " after " << w.samples << " samples; ";
      r.check(w.found && w.pair.image_gap <= kWitnessGap && w.pair.separation >= kWitnessSeparation &&
                  w.samples <= kWitnessBudget,
              "witness");
    }
  }
}

void c11(Verdict& r) {
  const Structure M = martinet();
  const Vec lam = v({0, 1, 0});
  const auto track = integrate_variational(M, origin3, lam, 1.0, 1e-10);
  double max_d = 0.0;
  for (double d : track.D) max_d = std::max(max_d, std::abs(d));
  const auto segs = abnormal_segments(track);
  const auto reg = check_regular(M, origin3, lam, 0.05, 8, 1);
  bool witness_gated = false;
  try {
    injectivity_witness(M, origin3, lam, 0.05, 100, 1);
  } catch (const Error& e) {
    witness_gated = e.kind() == ErrorKind::Precondition;
  }
  r.detail << "max |D| " << max_d << ", abnormal segments " << segs.size() << ", regularity "
           << to_string(reg.regular) << ", witness " << (witness_gated ? "excluded" : "not excluded");
  r.check(max_d <= kAbnormalDet, "D");
  r.check(!segs.empty(), "flag");
  r.check(reg.regular == Regularity::Unknown, "regularity gating");
  r.check(witness_gated, "witness gating");
}

void c12(Verdict& r) {
  const Vec lam = v({1, 0, 2 * pi});
  const auto rec = cut_time(heisenberg(), origin3, lam, 2.0);
  r.detail << "t_cut " << rec.t_cut << "; ";
  r.check(std::abs(rec.t_cut - 1) <= kCutTime, "t_cut");
  for (double radius : {1e-1, 1e-2, 1e-3}) {
    const auto pairs = cut1_pairs(heisenberg(), origin3, lam, radius, 200, 7);
    r.detail << "Cut1 r=" << radius << ": " << pairs.pairs.size() << " pairs; ";
    r.check(pairs.found, "Cut1 pairs");
  }
  const auto flat = cut_time(euclidean(2), Vec::Zero(2), v({1, 0}), 10.0);
  r.detail << "Euclidean t_cut " << flat.t_cut;
  r.check(std::isinf(flat.t_cut), "Euclidean");
}

void c13(Verdict& r) {
  const Vec lam = v({0.5, 0, pi});
  double worst = -1e300, geodesic = 0.0, endpoint = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto c = perturbed_competitor(heisenberg(), origin3, lam, 1.0, 0.05, seed);
    geodesic = c.geodesic_action;
    worst = std::max(worst, c.geodesic_action - c.action);
    endpoint = std::max(endpoint, c.endpoint_error);
  }
  r.detail << "geodesic action " << geodesic << ", max(geodesic - competitor) " << worst << ", endpoint error "
           << endpoint;
  r.check(worst <= kActionSlack, "action");
  r.check(endpoint <= 1e-10, "endpoints");
}

void c14(Verdict& r) {
  for (auto kind : {SyntheticKind::OneSided, SyntheticKind::Symmetric}) {
    const auto res = synthetic_witness(heisenberg(), origin3, v({1, 0, 2 * pi}), kind, 3, 7);
    r.detail << (kind == SyntheticKind::OneSided ? "one-sided" : "symmetric") << " d_Geo:";
    bool decreasing = res.levels.size() == 3;
    for (std::size_t i = 0; i < res.levels.size(); ++i) {
      const auto& L = res.levels[i];
      r.detail << " (" << L.d_geo_1 << ", " << L.d_geo_2 << ")";
      if (i > 0)
        decreasing = decreasing && L.d_geo_1 < res.levels[i - 1].d_geo_1 && L.d_geo_2 < res.levels[i - 1].d_geo_2;
      decreasing = decreasing && L.pair.image_gap <= kWitnessGap && L.d_geo_pair >= 1e-6;
    }
    r.detail << "; ";
    r.check(res.complete && decreasing, res.note.empty() ? "sequence" : res.note);
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, void (*)(Verdict&)>> criteria = {
      {"energy conservation", c1},
      {"closed-form oracle agreement", c2},
      {"variational consistency", c3},
      {"homogeneity identity", c4},
      {"conjugate times", c5},
      {"order pipeline", c6},
      {"locus structure", c7},
      {"Gauss lemma", c8},
      {"Hilbert exactness", c9},
      {"non-injectivity", c10},
      {"abnormal exclusion", c11},
      {"cut machinery", c12},
      {"minimality before conjugacy", c13},
      {"synthetic conjugacy", c14},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict r;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(r);
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!r.pass) ++failed;
    std::printf("%s %2zu %s: %s (%.1fs)\n", r.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, r.detail.str().c_str(),
                secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
