#include "subriem/hilbert.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>
#include <boost/math/quadrature/gauss.hpp>

#include "subriem/errors.hpp"
#include "subriem/hamiltonian.hpp"
#include "subriem/parallel.hpp"
#include "subriem/random.hpp"

namespace subriem {

namespace {

struct Node {
  double s;
  double w_coarse;
  double w_fine;
};

using Rule = boost::math::quadrature::gauss<double, 7>;

void append_panel_nodes(double a, double b, int panels, bool coarse, std::vector<Node>& out) {
  const auto& x = Rule::abscissa();
  const auto& w = Rule::weights();
  const double width = (b - a) / panels;
  for (int k = 0; k < panels; ++k) {
    const double mid = a + (k + 0.5) * width, half = 0.5 * width;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double weight = w[i] * half;
      auto push = [&](double s) { out.push_back({s, coarse ? weight : 0.0, coarse ? 0.0 : weight}); };
      push(mid + half * x[i]);
      if (x[i] != 0.0) push(mid - half * x[i]);
    }
  }
}

/// Nodes of the n- and 2n-panel rules on [a, b], sorted by s (shared nodes merged).
std::vector<Node> two_level_nodes(double a, double b, int panels) {
  std::vector<Node> nodes;
  append_panel_nodes(a, b, panels, true, nodes);
  append_panel_nodes(a, b, 2 * panels, false, nodes);
  std::sort(nodes.begin(), nodes.end(), [](const Node& x, const Node& y) { return x.s < y.s; });
  std::vector<Node> merged;
  for (const auto& n : nodes) {
    if (!merged.empty() && std::abs(merged.back().s - n.s) <= 1e-15 * std::max(1.0, std::abs(n.s))) {
      merged.back().w_coarse += n.w_coarse;
      merged.back().w_fine += n.w_fine;
    } else {
      merged.push_back(n);
    }
  }
  return merged;
}

QuadratureResult combine(const std::vector<Node>& nodes, const std::vector<double>& f, double tol) {
  double coarse = 0, fine = 0, mass = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    coarse += nodes[i].w_coarse * f[i];
    fine += nodes[i].w_fine * f[i];
    mass += nodes[i].w_fine * std::abs(f[i]);
  }
  QuadratureResult r;
  r.value = fine;
  r.error_estimate = std::abs(fine - coarse) + 100 * tol * mass;
  r.nodes = static_cast<int>(nodes.size());
  return r;
}

double eta_from_flow(const Structure& s, const Vec& q, const Vec& lam, const Mat& M, const Vec& w, double sdot) {
  const auto rhs = hamiltonian_rhs(s, {q, lam});
  const double H = hamiltonian_energy(s, q, lam);
  return lam.dot(M * w) + sdot * (lam.dot(rhs.qdot) - H);
}

}  // namespace

AugmentedCurve star_ray(const Vec& lam0, double t0, double t1) {
  AugmentedCurve c;
  c.kind = CurveKind::Star;
  c.a = t0;
  c.b = t1;
  c.t = [](double s) { return s; };
  c.dt = [](double) { return 1.0; };
  c.x = [lam0](double) { return lam0; };
  c.dx = [n = lam0.size()](double) { return Vec(Vec::Zero(n)); };
  c.fixed_covector = lam0;
  return c;
}

AugmentedCurve graph_curve(const ExtremalTrajectory& traj, double t0, double t1) {
  require(t0 >= 0 && t1 <= traj.T && t1 > t0, ErrorKind::Domain, "graph curve outside the trajectory");
  AugmentedCurve c;
  c.kind = CurveKind::Base;
  c.a = t0;
  c.b = t1;
  c.t = [](double s) { return s; };
  c.dt = [](double) { return 1.0; };
  c.x = [traj](double s) { return traj.at(s).q; };
  c.dx = [traj](double s) { return traj.velocity(s); };
  return c;
}

AugmentedCurve hermite_curve(CurveKind kind, const std::vector<double>& s, const std::vector<double>& t,
                             const std::vector<Vec>& x, bool closed) {
  const std::size_t N = s.size();
  require(N >= 2 && t.size() == N && x.size() == N, ErrorKind::Input, "hermite curve needs matching samples");
  for (std::size_t i = 1; i < N; ++i) require(s[i] > s[i - 1], ErrorKind::Input, "samples must increase in s");
  const Eigen::Index n = x[0].size();
  // Each knot carries (t, x) stacked into one vector, with slopes from neighbouring chords.
  std::vector<Vec> y(N), m(N);
  for (std::size_t i = 0; i < N; ++i) {
    y[i] = Vec(n + 1);
    y[i] << t[i], x[i];
  }
  for (std::size_t i = 0; i < N; ++i) {
    if (closed && (i == 0 || i == N - 1)) {
      const double h0 = s[1] - s[0], h1 = s[N - 1] - s[N - 2];
      m[i] = (y[1] - y[N - 2]) / (h0 + h1);
    } else if (i == 0) {
      m[i] = (y[1] - y[0]) / (s[1] - s[0]);
    } else if (i == N - 1) {
      m[i] = (y[N - 1] - y[N - 2]) / (s[N - 1] - s[N - 2]);
    } else {
      m[i] = (y[i + 1] - y[i - 1]) / (s[i + 1] - s[i - 1]);
    }
  }
  struct Data {
    std::vector<double> s;
    std::vector<Vec> y, m;
  };
  auto data = std::make_shared<Data>(Data{s, y, m});
  auto eval = [data](double u, bool deriv) {
    const auto& S = data->s;
    std::size_t k = std::upper_bound(S.begin(), S.end(), u) - S.begin();
    k = std::clamp<std::size_t>(k, 1, S.size() - 1) - 1;
    const double h = S[k + 1] - S[k], r = (u - S[k]) / h;
    const Vec &y0 = data->y[k], &y1 = data->y[k + 1], &m0 = data->m[k], &m1 = data->m[k + 1];
    if (!deriv) {
      const double h00 = 2 * r * r * r - 3 * r * r + 1, h10 = r * r * r - 2 * r * r + r;
      const double h01 = -2 * r * r * r + 3 * r * r, h11 = r * r * r - r * r;
      return Vec(h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1);
    }
    const double d00 = (6 * r * r - 6 * r) / h, d10 = 3 * r * r - 4 * r + 1;
    const double d01 = (-6 * r * r + 6 * r) / h, d11 = 3 * r * r - 2 * r;
    return Vec(d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1);
  };
  AugmentedCurve c;
  c.kind = kind;
  c.a = s.front();
  c.b = s.back();
  c.closed = closed;
  c.t = [eval](double u) { return eval(u, false)[0]; };
  c.dt = [eval](double u) { return eval(u, true)[0]; };
  c.x = [eval, n](double u) { return Vec(eval(u, false).tail(n)); };
  c.dx = [eval, n](double u) { return Vec(eval(u, true).tail(n)); };
  return c;
}

double curve_derivative_mismatch(const AugmentedCurve& c, int n, double h) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = c.a + (c.b - c.a) * (i + 0.5) / n;
    const double fd_t = (c.t(s + h) - c.t(s - h)) / (2 * h);
    const Vec fd_x = (c.x(s + h) - c.x(s - h)) / (2 * h);
    worst = std::max(worst, std::abs(fd_t - c.dt(s)));
    worst = std::max(worst, (fd_x - c.dx(s)).lpNorm<Eigen::Infinity>());
  }
  return worst;
}

double eval_eta_star(const Structure& s, const Vec& p, double t, const Vec& lam0, const Vec& w, double sdot,
                     double tol) {
  validate(s, PhasePoint{p, lam0});
  require(w.size() == lam0.size(), ErrorKind::Input, "tangent covector has the wrong dimension");
  require(t >= 0, ErrorKind::Domain, "eta_star is defined for t >= 0");
  if (t == 0.0) return eta_from_flow(s, p, lam0, Mat::Zero(p.size(), p.size()), w, sdot);
  const FlowJacobian fj = flow_with_jacobian(s, p, lam0, t, tol);
  return eta_from_flow(s, fj.q, fj.lam, fj.M, w, sdot);
}

QuadratureResult hilbert_star(const Structure& s, const Vec& p, const AugmentedCurve& curve, int n_quad,
                              double tol) {
  require(curve.kind == CurveKind::Star, ErrorKind::Input, "hilbert_star needs a Star curve");
  require(n_quad >= 1 && curve.b > curve.a, ErrorKind::Input, "invalid quadrature setup");
  const auto nodes = two_level_nodes(curve.a, curve.b, n_quad);
  std::vector<double> f(nodes.size());
  if (curve.fixed_covector) {
    double t_hi = 0.0;
    for (const auto& nd : nodes) t_hi = std::max(t_hi, curve.t(nd.s));
    const Vec& lam0 = *curve.fixed_covector;
    if (t_hi <= 0.0) {
      for (std::size_t i = 0; i < nodes.size(); ++i)
        f[i] = eval_eta_star(s, p, 0.0, lam0, curve.dx(nodes[i].s), curve.dt(nodes[i].s), tol);
    } else {
      const JacobianTrack track = integrate_variational(s, p, lam0, t_hi, tol);
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double t = curve.t(nodes[i].s);
        require(t >= 0, ErrorKind::Domain, "eta_star is defined for t >= 0");
        const PhasePoint z = track.trajectory.at(t);
        f[i] = eta_from_flow(s, z.q, z.lam, track.M_at(t), curve.dx(nodes[i].s), curve.dt(nodes[i].s));
      }
    }
  } else {
    parallel_for(nodes.size(), [&](std::size_t i) {
      const double u = nodes[i].s;
      f[i] = eval_eta_star(s, p, curve.t(u), curve.x(u), curve.dx(u), curve.dt(u), tol);
    });
  }
  return combine(nodes, f, tol);
}

Inversion invert_field_detail(const Structure& s, const FieldInverse& fi, double t, const Vec& q,
                              const Vec& lam_guess) {
  validate(s, PhasePoint{q, lam_guess});
  require(fi.p.size() == q.size(), ErrorKind::Input, "field base point has the wrong dimension");
  require(t > 0, ErrorKind::Domain, "field inversion needs t > 0");
  Vec lam = lam_guess;
  const double target = fi.tol * std::max(1.0, q.norm());
  for (int it = 0; it <= fi.max_iter; ++it) {
    FlowJacobian fj = flow_with_jacobian(s, fi.p, lam, t, fi.flow_tol);
    const Vec F = fj.q - q;
    const double res = F.norm();
    Eigen::JacobiSVD<Mat> svd(fj.M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv[sv.size() - 1] < fi.singular_threshold * sv[0] || sv[0] == 0.0) {
      throw Error(ErrorKind::SingularJacobian, "differential of the field is singular (conjugate locus nearby)");
    }
    if (res <= target) return {lam, fj.lam, res, it};
    const Vec step = -svd.solve(F);
    double alpha = fi.damping;
    bool accepted = false;
    for (int ls = 0; ls < fi.max_halvings; ++ls, alpha *= 0.5) {
      const Vec trial = lam + alpha * step;
      PhasePoint z;
      try {
        z = flow_state(s, fi.p, trial, t, fi.flow_tol);
      } catch (const IntegrationFailure&) {
        continue;
      }
      if ((z.q - q).norm() < (1 - 1e-4 * alpha) * res) {
        lam = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (res <= 100 * target) return {lam, fj.lam, res, it};
      throw Error(ErrorKind::NoConvergence, "field inversion: line search failed");
    }
  }
  throw Error(ErrorKind::NoConvergence, "field inversion: iteration budget exhausted");
}

Vec invert_field(const Structure& s, const FieldInverse& fi, double t, const Vec& q, const Vec& lam_guess) {
  return invert_field_detail(s, fi, t, q, lam_guess).lam0;
}

namespace {

struct Piece {
  double a, b;
};

// Tracked pass over the nodes of each piece; returns per-node integrand values and marks
// nodes whose inversion is singular.
struct TrackedPass {
  std::vector<Node> nodes;
  std::vector<double> f;
  std::vector<char> singular;
};

TrackedPass tracked_pass(const Structure& s, const AugmentedCurve& curve, const FieldInverse& fi,
                         const std::vector<Piece>& pieces, int n_quad) {
  TrackedPass pass;
  Vec prev = fi.lam_anchor;
  const double total = curve.b - curve.a;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const int panels = std::max(1, static_cast<int>(std::lround(n_quad * (pieces[k].b - pieces[k].a) / total)));
    const auto nodes = two_level_nodes(pieces[k].a, pieces[k].b, panels);
    bool enforce_trust = k == 0;
    for (const auto& nd : nodes) {
      const double t = curve.t(nd.s);
      const Vec q = curve.x(nd.s);
      double value = 0.0;
      char sing = 0;
      try {
        const Inversion inv = invert_field_detail(s, fi, t, q, prev);
        if (enforce_trust && (inv.lam0 - prev).norm() > fi.trust_factor * std::max(prev.norm(), 1e-300)) {
          throw Error(ErrorKind::BranchLost, "consecutive field inversions left the trust region");
        }
        enforce_trust = true;
        prev = inv.lam0;
        value = inv.lam_t.dot(curve.dx(nd.s)) - hamiltonian_energy(s, q, inv.lam_t) * curve.dt(nd.s);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::SingularJacobian) throw;
        sing = 1;
      }
      pass.nodes.push_back(nd);
      pass.f.push_back(value);
      pass.singular.push_back(sing);
    }
  }
  return pass;
}

QuadratureResult combine_pass(const TrackedPass& pass, double tol) { return combine(pass.nodes, pass.f, tol); }

}  // namespace

QuadratureResult hilbert_base(const Structure& s, const Vec& p, const AugmentedCurve& curve, const FieldInverse& fi,
                              int n_quad) {
  require(curve.kind == CurveKind::Base, ErrorKind::Input, "hilbert_base needs a Base curve");
  require(n_quad >= 1 && curve.b > curve.a, ErrorKind::Input, "invalid quadrature setup");
  require(fi.p.size() == p.size() && (fi.p - p).norm() == 0.0, ErrorKind::Input,
          "field inverse is based at a different point");
  const TrackedPass full = tracked_pass(s, curve, fi, {{curve.a, curve.b}}, n_quad);
  std::vector<double> bad;
  for (std::size_t i = 0; i < full.nodes.size(); ++i)
    if (full.singular[i]) bad.push_back(full.nodes[i].s);
  if (bad.empty()) return combine_pass(full, fi.flow_tol);

  // Exclude symmetric windows around singular nodes at two widths and extrapolate to zero width.
  auto excluded = [&](double delta) {
    std::vector<Piece> pieces;
    double lo = curve.a;
    for (double c : bad) {
      if (c - delta > lo) pieces.push_back({lo, c - delta});
      lo = std::max(lo, c + delta);
    }
    if (curve.b > lo) pieces.push_back({lo, curve.b});
    const TrackedPass pass = tracked_pass(s, curve, fi, pieces, n_quad);
    for (char sg : pass.singular) {
      if (sg) throw Error(ErrorKind::SingularJacobian, "singular inversion outside the excluded windows");
    }
    return combine_pass(pass, fi.flow_tol);
  };
  const double delta = 1e-3 * (curve.b - curve.a);
  const QuadratureResult r1 = excluded(delta);
  const QuadratureResult r2 = excluded(0.5 * delta);
  QuadratureResult out;
  out.value = 2 * r2.value - r1.value;
  out.error_estimate = std::abs(r2.value - r1.value) + r1.error_estimate + r2.error_estimate;
  out.nodes = r1.nodes + r2.nodes + full.nodes.size();
  out.excluded_windows = static_cast<int>(bad.size());
  return out;
}

GaussDefect gauss_defect(const Structure& s, const Vec& p, const std::function<Vec(double)>& family, double t,
                         double s_begin, double s_end, int n_samples, double h, double tol) {
  require(n_samples >= 1 && s_end > s_begin, ErrorKind::Input, "invalid sampling range");
  require(t > 0 && h > 0, ErrorKind::Domain, "time and step must be positive");
  GaussDefect out;
  out.s.resize(n_samples);
  out.defect.resize(n_samples);
  parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t i) {
    const double u = s_begin + (s_end - s_begin) * (i + 0.5) / n_samples;
    const PhasePoint z0 = flow_state(s, p, family(u), t, tol);
    const PhasePoint zp = flow_state(s, p, family(u + h), t, tol);
    const PhasePoint zm = flow_state(s, p, family(u - h), t, tol);
    const Vec dgamma = (zp.q - zm.q) / (2 * h);
    const double dH = (hamiltonian_energy(s, zp.q, zp.lam) - hamiltonian_energy(s, zm.q, zm.lam)) / (2 * h);
    out.s[i] = u;
    out.defect[i] = std::abs(z0.lam.dot(dgamma) - t * dH);
  });
  for (double d : out.defect) out.max_defect = std::max(out.max_defect, d);
  return out;
}

HorizontalCurve integrate_control(const Structure& s, const Vec& p, const std::function<Vec(double)>& u, double T,
                                  double tol) {
  require(T > 0, ErrorKind::Domain, "horizon must be positive");
  const int n = s.dim(), m = s.n_fields();
  FieldJet jet;
  auto rhs = [&](double t, const double* y, double* dy) {
    s.evaluate_jet(y, 0, jet);
    const Vec uk = u(t);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = 0; k < m; ++k) acc += uk[k] * jet.value(k, i);
      dy[i] = acc;
    }
    dy[n] = 0.5 * uk.squaredNorm();
  };
  std::vector<double> y0(n + 1, 0.0);
  for (int i = 0; i < n; ++i) y0[i] = p[i];
  Dopri5Options o;
  o.rtol = o.atol = tol;
  const auto r = integrate_dopri5(rhs, 0.0, y0, T, o);
  return {Eigen::Map<const Vec>(r.y_end.data(), n), r.y_end[n]};
}

Competitor perturbed_competitor(const Structure& s, const Vec& p, const Vec& lam0, double T, double amplitude,
                                std::uint64_t seed, double tol) {
  const int m = s.n_fields();
  const auto traj = integrate_extremal(s, p, lam0, T, std::max(tol, kMinTol));
  const Vec target = traj.samples.back().q;
  auto base = [&](double t) { return hamiltonian(s, traj.at(t)).h; };

  Rng rng(seed);
  constexpr int kModes = 3;
  Mat pert(m, kModes);
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < kModes; ++j) pert(k, j) = amplitude * rng.normal() / (j + 1);
  // Correction modes sin(pi t / T), sin(2 pi t / T) on every control.
  const int n_corr = 2 * m;
  auto control = [&](const Vec& beta) {
    return [&, beta](double t) {
      Vec u = base(t);
      const double x = std::numbers::pi * t / T;
      for (int k = 0; k < m; ++k) {
        for (int j = 0; j < kModes; ++j) u[k] += pert(k, j) * std::sin((j + 1) * x);
        u[k] += beta[2 * k] * std::sin(x) + beta[2 * k + 1] * std::sin(2 * x);
      }
      return u;
    };
  };

  Vec beta = Vec::Zero(n_corr);
  HorizontalCurve cur = integrate_control(s, p, control(beta), T, tol);
  for (int it = 0; it < 30 && (cur.endpoint - target).norm() > 1e-11; ++it) {
    Mat J(target.size(), n_corr);
    const double eps = 1e-6;
    for (int c = 0; c < n_corr; ++c) {
      Vec bp = beta, bm = beta;
      bp[c] += eps;
      bm[c] -= eps;
      J.col(c) = (integrate_control(s, p, control(bp), T, tol).endpoint -
                  integrate_control(s, p, control(bm), T, tol).endpoint) /
                 (2 * eps);
    }
    beta -= J.completeOrthogonalDecomposition().solve(cur.endpoint - target);
    cur = integrate_control(s, p, control(beta), T, tol);
  }
  Competitor c;
  c.action = cur.action;
  c.endpoint_error = (cur.endpoint - target).norm();
  c.geodesic_action = integrate_control(s, p, base, T, tol).action;
  return c;
}

}  // namespace subriem
