#include "subriem/conjugate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/SVD>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "subriem/errors.hpp"
#include "subriem/finite_difference.hpp"
#include "subriem/hamiltonian.hpp"
#include "subriem/parallel.hpp"
#include "subriem/random.hpp"

namespace subriem {

namespace {

// Dense-output values of t^{-n} D(t) are trusted to this multiple of the integration tolerance.
constexpr double kNoiseFactor = 100.0;

double refine_root(const std::function<double(double)>& f, double a, double b, double fa, double fb) {
  std::uintmax_t iters = 200;
  auto tol = [](double lo, double hi) { return std::abs(hi - lo) <= 1e-10; };
  const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
  return 0.5 * (r.first + r.second);
}

std::pair<double, double> refine_minimum(const std::function<double(double)>& f, double a, double b) {
  std::uintmax_t iters = 200;
  return boost::math::tools::brent_find_minima([&](double t) { return std::abs(f(t)); }, a, b, 40, iters);
}

int kernel_dimension(const DeterminantCurve& curve, double t, double tol_det) {
  if (!curve.matrix) return 1;
  const Mat M = curve.matrix(t);
  Eigen::JacobiSVD<Mat> svd(M);
  const auto& sv = svd.singularValues();
  const double thr = tol_det * std::max(sv[0], 1e-300);
  int count = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) count += sv[i] <= thr ? 1 : 0;
  return count;
}

struct Grid {
  std::vector<double> t;
  std::vector<double> f;
  double scale = 1.0;
};

Grid sample(const DeterminantCurve& curve, double t_lo, double t_hi, int per_unit, bool include_lo) {
  const int N = std::max(16, static_cast<int>(std::ceil(per_unit * (t_hi - t_lo))));
  Grid g;
  for (int i = include_lo ? 0 : 1; i <= N; ++i) {
    const double t = i == N ? t_hi : t_lo + (t_hi - t_lo) * i / N;
    g.t.push_back(t);
    g.f.push_back(curve.value(t));
  }
  for (double v : g.f) g.scale = std::max(g.scale, std::abs(v));
  return g;
}

std::vector<std::pair<int, int>> flat_runs(const Grid& g, double thr, int min_run) {
  std::vector<std::pair<int, int>> runs;
  const int N = static_cast<int>(g.f.size());
  int i = 0;
  while (i < N) {
    if (std::abs(g.f[i]) > thr) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 < N && std::abs(g.f[j + 1]) <= thr) ++j;
    if (j - i + 1 >= min_run) runs.emplace_back(i, j);
    i = j + 1;
  }
  return runs;
}

int sign_of(double x) { return (x > 0) - (x < 0); }

}  // namespace

const char* to_string(Regularity r) noexcept {
  switch (r) {
    case Regularity::Regular: return "REGULAR";
    case Regularity::Singular: return "SINGULAR";
    case Regularity::Unknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

DeterminantCurve ray_determinant(const JacobianTrack& track) {
  auto dense = track.trajectory.dense;
  const int n = track.dim();
  const int r = 2 * n;
  auto matrix = [dense, n, r](double t) {
    Mat M(n, n);
    for (int c = 0; c < n; ++c) {
      dense->evaluate(t, static_cast<std::size_t>(r + (n + c) * r), static_cast<std::size_t>(n), M.col(c).data());
    }
    return M;
  };
  DeterminantCurve curve;
  curve.matrix = matrix;
  curve.value = [matrix, n](double t) { return matrix(t).determinant() / std::pow(t, n); };
  curve.t_begin = 0.0;
  curve.t_end = track.T();
  double sup = 1.0;
  for (std::size_t i = 0; i < track.t.size(); ++i) {
    if (track.t[i] > 0) sup = std::max(sup, std::abs(track.D[i]) / std::pow(track.t[i], n));
  }
  curve.noise = std::max(1e-13, kNoiseFactor * track.trajectory.tol) * sup;
  return curve;
}

DeterminantCurve synthetic_determinant(std::function<double(double)> f, double t_begin, double t_end, double noise) {
  require(t_end > t_begin, ErrorKind::Input, "empty synthetic domain");
  DeterminantCurve curve;
  curve.value = std::move(f);
  curve.t_begin = t_begin;
  curve.t_end = t_end;
  curve.noise = noise;
  return curve;
}

ConjugateSearch find_conjugate_times(const DeterminantCurve& curve, double t_min, const ConjugateOptions& opts) {
  require(t_min > curve.t_begin && t_min < curve.t_end, ErrorKind::Domain,
          "t_min must lie strictly inside the curve domain");
  require(opts.tol_det > 0, ErrorKind::Input, "tol_det must be positive");
  const Grid g = sample(curve, t_min, curve.t_end, opts.per_unit, true);
  const int N = static_cast<int>(g.t.size());
  ConjugateSearch out;

  std::vector<char> flat(N, 0);
  for (auto [a, b] : flat_runs(g, opts.tol_det * g.scale, 3)) {
    for (int k = a; k <= b; ++k) flat[k] = 1;
    out.abnormal.push_back({a == 0 ? curve.t_begin : g.t[a - 1], g.t[b]});
  }

  std::vector<ConjugateRecord> found;
  for (int i = 0; i + 1 < N; ++i) {
    if (flat[i] || flat[i + 1]) continue;
    const double fa = g.f[i], fb = g.f[i + 1];
    if (fa == 0.0) {
      found.push_back({g.t[i], std::nullopt, 0, Regularity::Unknown, 0.0, false});
    } else if (fa * fb < 0) {
      const double t = refine_root(curve.value, g.t[i], g.t[i + 1], fa, fb);
      found.push_back({t, std::nullopt, 0, Regularity::Unknown, std::abs(curve.value(t)), true});
    }
  }
  for (int i = 1; i + 1 < N; ++i) {
    if (flat[i - 1] || flat[i] || flat[i + 1]) continue;
    const double a = std::abs(g.f[i - 1]), b = std::abs(g.f[i]), c = std::abs(g.f[i + 1]);
    if (!(b <= a && b < c)) continue;
    if (sign_of(g.f[i - 1]) != sign_of(g.f[i]) || sign_of(g.f[i]) != sign_of(g.f[i + 1])) continue;
    const auto [t, v] = refine_minimum(curve.value, g.t[i - 1], g.t[i + 1]);
    if (v <= opts.tol_det) found.push_back({t, std::nullopt, 0, Regularity::Unknown, v, false});
  }
  if (N >= 2 && !flat[N - 1] && std::abs(g.f[N - 1]) <= opts.tol_det &&
      std::abs(g.f[N - 1]) < std::abs(g.f[N - 2])) {
    const auto [t, v] = refine_minimum(curve.value, g.t[N - 2], g.t[N - 1]);
    if (v <= opts.tol_det) found.push_back({t, std::nullopt, 0, Regularity::Unknown, v, false});
  }

  std::sort(found.begin(), found.end(), [](const auto& x, const auto& y) { return x.t_star < y.t_star; });
  for (const auto& rec : found) {
    if (!out.records.empty() && rec.t_star - out.records.back().t_star < 1e-6) continue;
    out.records.push_back(rec);
  }

  for (std::size_t k = 0; k < out.records.size(); ++k) {
    auto& rec = out.records[k];
    rec.kernel_dim = kernel_dimension(curve, rec.t_star, opts.tol_det);
    if (!opts.estimate_orders) continue;
    double window = 0.05 * rec.t_star;
    window = std::min(window, 0.999 * (rec.t_star - curve.t_begin));
    window = std::min(window, curve.t_end - rec.t_star);
    if (k > 0) window = std::min(window, 0.4 * (rec.t_star - out.records[k - 1].t_star));
    if (k + 1 < out.records.size()) window = std::min(window, 0.4 * (out.records[k + 1].t_star - rec.t_star));
    if (window < 1e-4 * std::max(1.0, rec.t_star)) continue;
    try {
      rec.order = estimate_order(curve, rec.t_star, window, opts.max_order).order;
    } catch (const Error&) {
      rec.order.reset();
    }
  }
  return out;
}

ConjugateSearch find_conjugate_times(const JacobianTrack& track, double t_min, double tol_det) {
  ConjugateOptions opts;
  opts.tol_det = tol_det;
  return find_conjugate_times(ray_determinant(track), t_min, opts);
}

OrderEstimate estimate_order(const DeterminantCurve& curve, double t_star, double window, int max_order) {
  require(window > 0, ErrorKind::Domain, "order window must be positive");
  require(max_order >= 1, ErrorKind::Input, "max_order must be at least 1");
  require(t_star - window > curve.t_begin && t_star + window <= curve.t_end * (1 + 1e-14), ErrorKind::Domain,
          "order window leaves the curve domain");
  const auto& f = curve.value;
  const double nu = std::max(curve.noise, 1e-300);
  OrderEstimate est;

  // (a) log-log slope of the symmetric mean of log|f(t* ± δ)|.
  std::vector<double> xs, ys;
  for (double delta = window; delta >= 1e-9 * std::max(1.0, std::abs(t_star)); delta *= 0.5) {
    const double fp = std::abs(f(t_star + delta)), fm = std::abs(f(t_star - delta));
    if (std::min(fp, fm) <= 100 * nu) break;
    xs.push_back(std::log(delta));
    ys.push_back(0.5 * (std::log(fp) + std::log(fm)));
  }
  int slope_order = kInfiniteOrder;
  if (xs.size() >= 3) {
    const std::size_t keep = std::min<std::size_t>(6, xs.size());
    const std::size_t first = xs.size() - keep;
    double mx = 0, my = 0;
    for (std::size_t i = first; i < xs.size(); ++i) mx += xs[i], my += ys[i];
    mx /= keep;
    my /= keep;
    double sxy = 0, sxx = 0;
    for (std::size_t i = first; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    est.slope = sxy / sxx;
    const double rounded = std::round(est.slope);
    if (rounded > max_order) {
      slope_order = kInfiniteOrder;
    } else if (std::abs(est.slope - rounded) <= 0.3 && rounded >= 0) {
      slope_order = static_cast<int>(rounded);
    } else {
      slope_order = -1;
    }
  } else {
    est.slope = std::numeric_limits<double>::quiet_NaN();
  }

  // (b) first derivative at t* that is resolved above the noise floor.
  int fd_order = kInfiniteOrder;
  double fd_value = 0.0;
  for (int k = 0; k <= max_order; ++k) {
    const int half = k / 2 + 2;
    const double h = std::min(window / half, std::pow(nu, 1.0 / (k + 2)));
    const Stencil s1 = central_stencil(t_star, h, k, half);
    const Stencil s2 = central_stencil(t_star, 0.5 * h, k, half);
    double d1 = 0, d2 = 0, w1 = 0, w2 = 0;
    for (std::size_t j = 0; j < s1.points.size(); ++j) {
      d1 += s1.weights[j] * f(s1.points[j]);
      d2 += s2.weights[j] * f(s2.points[j]);
      w1 += std::abs(s1.weights[j]);
      w2 += std::abs(s2.weights[j]);
    }
    const double e = (4 * d2 - d1) / 3;
    const double amp = nu * (w1 + 4 * w2) / 3;
    if (std::abs(e) > 10 * amp && std::abs(e) > 3 * std::abs(d1 - d2)) {
      fd_order = k;
      fd_value = e;
      break;
    }
  }
  est.derivative_order = fd_order;

  if (slope_order != fd_order) throw InconclusiveOrder(slope_order, fd_order);
  if (fd_order == 0) throw Error(ErrorKind::Precondition, "t_star is not a zero of the determinant curve");
  est.order = fd_order;
  if (fd_order != kInfiniteOrder) est.leading_coeff = fd_value / std::tgamma(fd_order + 1.0);
  return est;
}

OrderEstimate estimate_order(const JacobianTrack& track, double t_star, double window, int max_order) {
  return estimate_order(ray_determinant(track), t_star, window, max_order);
}

std::vector<Interval> abnormal_segments(const DeterminantCurve& curve, double tol, int per_unit, int min_run) {
  const Grid g = sample(curve, curve.t_begin, curve.t_end, per_unit, false);
  std::vector<Interval> out;
  for (auto [a, b] : flat_runs(g, tol * g.scale, min_run)) {
    out.push_back({a == 0 ? curve.t_begin : g.t[a - 1], g.t[b]});
  }
  return out;
}

std::vector<Interval> abnormal_segments(const JacobianTrack& track, double tol) {
  return abnormal_segments(ray_determinant(track), tol);
}

namespace {

struct RayCount {
  bool abnormal = false;
  int count = 0;
};

RayCount count_on_segment(const Structure& s, const Vec& p, const Vec& mu, double t_a, double t_b,
                          const RegularityOptions& opts) {
  RayCount rc;
  const JacobianTrack track = integrate_variational(s, p, mu, t_b, opts.tol);
  ConjugateOptions co;
  co.tol_det = opts.tol_det;
  co.estimate_orders = false;
  const auto search = find_conjugate_times(ray_determinant(track), t_a, co);
  for (const auto& iv : search.abnormal) {
    if (iv.b > t_a) rc.abnormal = true;
  }
  rc.count = static_cast<int>(search.records.size());
  return rc;
}

}  // namespace

RegularityReport check_regular(const Structure& s, const Vec& p, const Vec& lam0_conj, double radius, int n_rays,
                               std::uint64_t seed, const RegularityOptions& opts) {
  validate(s, PhasePoint{p, lam0_conj});
  require(radius > 0, ErrorKind::Input, "radius must be positive");
  require(n_rays >= 1, ErrorKind::Input, "n_rays must be positive");
  const double norm = lam0_conj.norm();
  require(norm > radius, ErrorKind::Input, "the ball around the covector must not contain the origin");
  const int n = s.dim();
  RegularityReport report;

  // Central ray first: it carries lam0_conj at t = 1.
  const double rel = radius / norm;
  {
    const double t_a = 1 - rel, t_b = 1 + rel;
    const JacobianTrack track = integrate_variational(s, p, lam0_conj, t_b, opts.tol);
    const DeterminantCurve curve = ray_determinant(track);
    ConjugateOptions co;
    co.tol_det = opts.tol_det;
    co.estimate_orders = false;
    const auto search = find_conjugate_times(curve, t_a, co);
    for (const auto& iv : search.abnormal) {
      if (iv.b > t_a) {
        report.regular = Regularity::Unknown;
        report.excluded_rays.push_back(lam0_conj);
        report.note = "central ray carries an abnormal segment inside the ball";
        return report;
      }
    }
    bool conjugate = std::abs(curve.value(1.0)) <= opts.tol_det;
    for (const auto& rec : search.records) conjugate = conjugate || std::abs(rec.t_star - 1.0) <= 1e-6;
    require(conjugate, ErrorKind::Precondition, "covector is not conjugate");
  }

  Rng rng(seed);
  std::vector<Vec> mus;
  for (int i = 0; i < n_rays; ++i) mus.push_back(lam0_conj + rng.in_ball(n, radius));

  std::vector<RayCount> counts(mus.size());
  std::vector<std::pair<double, double>> spans(mus.size());
  parallel_for(mus.size(), [&](std::size_t i) {
    const Vec& mu = mus[i];
    // tau with |tau mu - lam0_conj| <= radius.
    const double a = mu.squaredNorm(), b = -2 * mu.dot(lam0_conj), c = lam0_conj.squaredNorm() - radius * radius;
    const double disc = std::sqrt(std::max(0.0, b * b - 4 * a * c));
    const double t_a = (-b - disc) / (2 * a), t_b = (-b + disc) / (2 * a);
    spans[i] = {t_a, t_b};
    counts[i] = count_on_segment(s, p, mu, t_a, t_b, opts);
  });

  for (std::size_t i = 0; i < mus.size(); ++i) {
    if (counts[i].abnormal) {
      report.excluded_rays.push_back(mus[i]);
      continue;
    }
    ++report.rays_used;
    report.counts.push_back(counts[i].count);
    if (counts[i].count > 1) {
      ++report.counterexample_count;
      if (!report.counterexample) report.counterexample = mus[i];
    }
  }
  if (report.rays_used == 0) {
    report.regular = Regularity::Unknown;
    report.note = "every sampled ray carries an abnormal segment";
  } else {
    report.regular = report.counterexample ? Regularity::Singular : Regularity::Regular;
  }
  return report;
}

double delta_on_track(const JacobianTrack& track, double scale, int m, double h) {
  require(m >= 1, ErrorKind::Input, "m must be at least 1");
  require(h > 0 && scale > 0, ErrorKind::Domain, "step and scale must be positive");
  const double lo = (1 - m * h) * scale, hi = (1 + m * h) * scale;
  require(lo > 0 && hi <= track.T() * (1 + 1e-12), ErrorKind::Domain, "stencil leaves the integration domain");
  const DeterminantCurve curve = ray_determinant(track);
  const Stencil st = central_stencil(1.0, h, m - 1, m);
  double acc = 0.0;
  for (std::size_t j = 0; j < st.points.size(); ++j) {
    if (st.weights[j] == 0.0) continue;
    acc += st.weights[j] * curve.value(std::min(st.points[j] * scale, track.T()));
  }
  return acc;
}

double delta_map(const Structure& s, const Vec& p, const Vec& lam, int m, double h, double tol) {
  require(m >= 1, ErrorKind::Input, "m must be at least 1");
  require(h > 0, ErrorKind::Domain, "finite-difference step must be positive");
  require(1 - m * h > 0, ErrorKind::Domain, "stencil leaves the integration domain");
  const JacobianTrack track = [&] {
    try {
      return integrate_variational(s, p, lam, 1 + m * h, tol);
    } catch (const IntegrationFailure& e) {
      throw Error(ErrorKind::Domain, std::string("stencil leaves the integration domain: ") + e.what());
    }
  }();
  return delta_on_track(track, 1.0, m, h);
}

std::vector<Vec> sphere_grid(int n, int n1, int n2) {
  require(n >= 1 && n1 >= 1 && n2 >= 1, ErrorKind::Input, "grid dimensions must be positive");
  constexpr double pi = std::numbers::pi;
  std::vector<Vec> out;
  if (n == 1) {
    out.push_back(Vec::Constant(1, 1.0));
    out.push_back(Vec::Constant(1, -1.0));
    return out;
  }
  if (n == 2) {
    for (int i = 0; i < n1; ++i) {
      const double phi = 2 * pi * (i + 0.5) / n1;
      Vec v(2);
      v << std::cos(phi), std::sin(phi);
      out.push_back(v);
    }
    return out;
  }
  // Hyperspherical coordinates: n-2 polar angles on n1 midpoints, one azimuth on n2 midpoints.
  const int polar = n - 2;
  std::vector<int> idx(polar, 0);
  for (;;) {
    for (int j = 0; j < n2; ++j) {
      const double phi = 2 * pi * (j + 0.5) / n2;
      Vec v(n);
      double prod = 1.0;
      for (int k = 0; k < polar; ++k) {
        const double theta = pi * (idx[k] + 0.5) / n1;
        v[n - 1 - k] = prod * std::cos(theta);
        prod *= std::sin(theta);
      }
      v[0] = prod * std::cos(phi);
      v[1] = prod * std::sin(phi);
      out.push_back(v);
    }
    int k = polar - 1;
    while (k >= 0 && ++idx[k] == n1) idx[k--] = 0;
    if (k < 0) break;
  }
  return out;
}

std::optional<Vec> normalize_energy(const Structure& s, const Vec& p, const Vec& lam, double energy) {
  require(energy > 0, ErrorKind::Input, "target energy must be positive");
  const double H = hamiltonian_energy(s, p, lam);
  if (!(H > 1e-14 * std::max(1.0, lam.squaredNorm()))) return std::nullopt;
  return Vec(lam * std::sqrt(energy / H));
}

FirstConjugate first_conjugate(const Structure& s, const Vec& p, const Vec& lam0, double t_max, double tol,
                               double tol_det) {
  require(t_max > 0, ErrorKind::Domain, "t_max must be positive");
  FirstConjugate out;
  double T = std::min(t_max, 1.0);
  for (;;) {
    JacobianTrack track = integrate_variational(s, p, lam0, T, tol);
    ConjugateOptions co;
    co.tol_det = tol_det;
    const double t_min = 0.01 * std::min(1.0, T);
    auto search = find_conjugate_times(ray_determinant(track), t_min, co);
    if (!search.abnormal.empty()) {
      out.abnormal = search.abnormal;
      out.track = std::move(track);
      return out;
    }
    if (!search.records.empty()) {
      const ConjugateRecord& rec = search.records.front();
      // Leave room to the right of t* for order estimation.
      if (T < t_max && rec.t_star > T / 1.1) {
        T = std::min(t_max, 1.2 * rec.t_star);
        continue;
      }
      out.record = rec;
      out.track = std::move(track);
      return out;
    }
    if (T >= t_max) {
      out.track = std::move(track);
      return out;
    }
    T = std::min(2 * T, t_max);
  }
}

LocusSlice locus_slice(const Structure& s, const Vec& p, double energy, int n1, int n2, double t_max,
                       const LocusOptions& opts) {
  require(t_max > 0, ErrorKind::Domain, "t_max must be positive");
  const int n = s.dim();
  LocusSlice slice;
  slice.p = p;
  slice.energy = energy;
  slice.grid_shape[0] = n1;
  slice.grid_shape[1] = n == 2 ? 1 : n2;
  slice.t_max = t_max;
  const auto dirs = sphere_grid(n, n1, n2);
  slice.entries.resize(dirs.size());

  parallel_for(dirs.size(), [&](std::size_t i) {
    LocusEntry& e = slice.entries[i];
    const auto lam0 = normalize_energy(s, p, dirs[i], energy);
    if (!lam0) {
      e.lam0 = dirs[i];
      e.note = "direction has zero energy";
      return;
    }
    e.lam0 = *lam0;
    FirstConjugate fc;
    try {
      fc = first_conjugate(s, p, e.lam0, t_max, opts.tol, opts.tol_det);
    } catch (const IntegrationFailure& err) {
      e.note = err.what();
      return;
    }
    if (!fc.abnormal.empty()) {
      e.abnormal = true;
      e.note = "ray excluded: abnormal segment";
      return;
    }
    if (!fc.record) return;
    const double tc = fc.record->t_star;
    e.t_conj = tc;
    e.order = fc.record->order;
    e.locus_point = Vec(tc * e.lam0);
    int m = 1;
    if (e.order && *e.order != kInfiniteOrder) {
      m = *e.order;
    } else {
      e.note = "order unresolved; transversality evaluated with m = 1";
    }
    const double reach = (1 + opts.epsilon) * (1 + m * opts.fd_step) * tc;
    JacobianTrack track = std::move(*fc.track);
    if (track.T() < reach) track = integrate_variational(s, p, e.lam0, reach * (1 + 1e-9), opts.tol);
    e.delta_values[0] = delta_on_track(track, (1 - opts.epsilon) * tc, m, opts.fd_step);
    e.delta_values[1] = delta_on_track(track, (1 + opts.epsilon) * tc, m, opts.fd_step);
    e.delta_at_locus = delta_on_track(track, tc, m, opts.fd_step);
    e.delta_signs[0] = sign_of(e.delta_values[0]);
    e.delta_signs[1] = sign_of(e.delta_values[1]);
    if (opts.regularity_rays > 0) {
      const auto rep = check_regular(s, p, *e.locus_point, 0.05 * e.locus_point->norm(), opts.regularity_rays,
                                     opts.seed + i, RegularityOptions{opts.tol, opts.tol_det});
      e.regular = rep.regular;
    }
  });
  return slice;
}

}  // namespace subriem
