#include "subriem/witness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/SVD>

#include "subriem/conjugate.hpp"
#include "subriem/errors.hpp"
#include "subriem/flow.hpp"
#include "subriem/hamiltonian.hpp"
#include "subriem/hilbert.hpp"
#include "subriem/parallel.hpp"
#include "subriem/random.hpp"

namespace subriem {

namespace {

std::optional<Vec> try_exp(const Structure& s, const Vec& p, const Vec& lam, double tol) {
  try {
    return exp_map(s, p, lam, tol).q;
  } catch (const Error&) {
    return std::nullopt;
  }
}

// Stratified sampler of a ball: cells of a k^n lattice over the bounding cube are visited in
// a seeded random order, one uniform point per cell, points outside the ball rejected.
class BallSampler {
 public:
  BallSampler(const Vec& center, double radius, int budget, std::uint64_t seed)
      : center_(center), radius_(radius), rng_(seed) {
    const int n = static_cast<int>(center.size());
    k_ = std::max(1, static_cast<int>(std::ceil(std::pow(static_cast<double>(budget), 1.0 / n))));
    long cells = 1;
    for (int i = 0; i < n; ++i) cells *= k_;
    order_.resize(static_cast<std::size_t>(cells));
    std::iota(order_.begin(), order_.end(), 0L);
    shuffle();
  }

  Vec next() {
    const int n = static_cast<int>(center_.size());
    for (;;) {
      if (pos_ == order_.size()) {
        shuffle();
        pos_ = 0;
      }
      long cell = order_[pos_++];
      Vec x(n);
      for (int i = 0; i < n; ++i) {
        const int c = static_cast<int>(cell % k_);
        cell /= k_;
        x[i] = -1.0 + 2.0 * (c + rng_.uniform()) / k_;
      }
      if (x.squaredNorm() <= 1.0) return center_ + radius_ * x;
    }
  }

 private:
  void shuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng_.next() % i);
      std::swap(order_[i - 1], order_[j]);
    }
  }

  Vec center_;
  double radius_;
  Rng rng_;
  int k_ = 1;
  std::vector<long> order_;
  std::size_t pos_ = 0;
};

struct Candidate {
  std::size_t i, j;
  double gap, sep;
  double score() const { return gap / sep; }
};

// Pairs (i, j) with j in [from, n) and i < j, separation at least min_sep, lowest gap/sep first.
std::vector<Candidate> rank_collisions(const std::vector<Vec>& lam, const std::vector<std::optional<Vec>>& img,
                                       std::size_t from, double min_sep, std::size_t keep) {
  std::vector<Candidate> best;
  auto worse = [](const Candidate& a, const Candidate& b) { return a.score() < b.score(); };
  for (std::size_t j = from; j < lam.size(); ++j) {
    if (!img[j]) continue;
    for (std::size_t i = 0; i < j; ++i) {
      if (!img[i]) continue;
      const double sep = (lam[i] - lam[j]).norm();
      if (sep < min_sep) continue;
      const Candidate c{i, j, (*img[i] - *img[j]).norm(), sep};
      if (best.size() < keep) {
        best.push_back(c);
        std::push_heap(best.begin(), best.end(), worse);
      } else if (c.score() < best.front().score()) {
        std::pop_heap(best.begin(), best.end(), worse);
        best.back() = c;
        std::push_heap(best.begin(), best.end(), worse);
      }
    }
  }
  std::sort_heap(best.begin(), best.end(), worse);
  return best;
}

// Minimum-norm Newton on (l1, l2) -> exp(l1) - exp(l2) using the variational Jacobian.
std::optional<std::pair<Vec, Vec>> polish_pair(const Structure& s, const Vec& p, Vec l1, Vec l2, double min_sep) {
  const int n = static_cast<int>(p.size());
  for (int it = 0; it < 40; ++it) {
    const FlowJacobian f1 = flow_with_jacobian(s, p, l1, 1.0, 1e-13);
    const FlowJacobian f2 = flow_with_jacobian(s, p, l2, 1.0, 1e-13);
    const Vec F = f1.q - f2.q;
    const double res = F.norm();
    if (res <= 1e-13 * std::max(1.0, f1.q.norm())) return std::pair{l1, l2};
    Mat J(n, 2 * n);
    J << f1.M, -f2.M;
    const Vec step = -J.completeOrthogonalDecomposition().solve(F);
    bool accepted = false;
    for (double a = 1.0; a > 1e-6; a *= 0.5) {
      const Vec t1 = l1 + a * step.head(n);
      const Vec t2 = l2 + a * step.tail(n);
      if ((t1 - t2).norm() < min_sep) continue;
      const auto q1 = try_exp(s, p, t1, 1e-13);
      const auto q2 = try_exp(s, p, t2, 1e-13);
      if (q1 && q2 && (*q1 - *q2).norm() < res) {
        l1 = t1;
        l2 = t2;
        accepted = true;
        break;
      }
    }
    if (!accepted) return res <= 1e-10 ? std::optional{std::pair{l1, l2}} : std::nullopt;
  }
  return std::nullopt;
}

// First conjugate time of the ray through lam inside [t_lo, t_hi], sign changes only.
std::optional<double> conjugate_time_near(const Structure& s, const Vec& p, const Vec& lam, double t_lo, double t_hi) {
  JacobianTrack track = integrate_variational(s, p, lam, t_hi, 1e-11);
  ConjugateOptions co;
  co.estimate_orders = false;
  const auto search = find_conjugate_times(ray_determinant(track), t_lo, co);
  for (const auto& r : search.records)
    if (r.sign_change && r.t_star >= t_lo && r.t_star <= t_hi) return r.t_star;
  return std::nullopt;
}

}  // namespace

bool is_conjugate(const Structure& s, const Vec& p, const Vec& lam0, double rel_tol) {
  const FlowJacobian fj = flow_with_jacobian(s, p, lam0, 1.0, 1e-12);
  Eigen::JacobiSVD<Mat> svd(fj.M);
  const auto& sv = svd.singularValues();
  return sv[0] == 0.0 || sv[sv.size() - 1] <= rel_tol * sv[0];
}

bool ray_is_abnormal(const Structure& s, const Vec& p, const Vec& lam0, double t_end) {
  const JacobianTrack track = integrate_variational(s, p, lam0, t_end, 1e-11);
  return !abnormal_segments(track).empty();
}

WitnessResult injectivity_witness(const Structure& s, const Vec& p, const Vec& lam0_conj, double radius, int budget,
                                  std::uint64_t seed, const WitnessOptions& opts) {
  validate(s, PhasePoint{p, lam0_conj});
  require(radius > 0, ErrorKind::Input, "radius must be positive");
  require(budget >= 2, ErrorKind::Input, "budget must be at least 2");
  require(is_conjugate(s, p, lam0_conj), ErrorKind::Precondition, "covector is not conjugate at t = 1");
  require(!ray_is_abnormal(s, p, lam0_conj), ErrorKind::Precondition,
          "ray carries an abnormal segment; excluded from witness search");

  WitnessResult out;
  out.seed = seed;
  BallSampler sampler(lam0_conj, radius, budget, seed);
  std::vector<Vec> lam;
  std::vector<std::optional<Vec>> img;
  const double min_sep = std::max(opts.min_separation, 0.02 * radius);
  double best_score = std::numeric_limits<double>::infinity();

  while (static_cast<int>(lam.size()) < budget) {
    const std::size_t from = lam.size();
    const std::size_t count = std::min<std::size_t>(opts.batch, budget - from);
    for (std::size_t k = 0; k < count; ++k) lam.push_back(sampler.next());
    img.resize(lam.size());
    parallel_for(count, [&](std::size_t k) { img[from + k] = try_exp(s, p, lam[from + k], opts.tol); });

    const auto ranked = rank_collisions(lam, img, from, min_sep, opts.candidates_per_batch);
    std::vector<std::optional<WitnessPair>> polished(ranked.size());
    parallel_for(ranked.size(), [&](std::size_t c) {
      try {
        const auto pr = polish_pair(s, p, lam[ranked[c].i], lam[ranked[c].j], opts.min_separation);
        if (!pr) return;
        const auto& [l1, l2] = *pr;
        if ((l1 - lam0_conj).norm() > radius || (l2 - lam0_conj).norm() > radius) return;
        const auto q1 = exp_map(s, p, l1, opts.verify_tol).q;
        const auto q2 = exp_map(s, p, l2, opts.verify_tol).q;
        if (!q1 || !q2) return;
        polished[c] = WitnessPair{l1, l2, *q1, (*q1 - *q2).norm(), (l1 - l2).norm(), radius};
      } catch (const Error&) {
      }
    });
    for (std::size_t c = 0; c < ranked.size(); ++c) {
      if (ranked[c].score() < best_score) {
        best_score = ranked[c].score();
        const Vec& l1 = lam[ranked[c].i];
        const Vec& l2 = lam[ranked[c].j];
        out.pair = WitnessPair{l1, l2, *img[ranked[c].i], ranked[c].gap, ranked[c].sep, radius};
      }
      const auto& w = polished[c];
      if (w && w->image_gap <= opts.max_gap && w->separation >= opts.min_separation) {
        out.found = true;
        out.pair = *w;
        out.samples = static_cast<int>(lam.size());
        return out;
      }
    }
  }
  out.samples = static_cast<int>(lam.size());
  out.note = "budget exhausted; reporting the best near-collision";
  return out;
}

std::vector<Vec> shooting_grid(const Structure& s, const Vec& p, const Vec& lam0, int n1, int n2) {
  const double energy = hamiltonian_energy(s, p, lam0);
  std::vector<Vec> out;
  const auto dirs = sphere_grid(s.dim(), n1, n2);
  for (const auto& d : dirs)
    if (auto v = normalize_energy(s, p, d, energy)) out.push_back(*v);
  for (double c : {0.25, 0.5, 1.0, 2.0})
    for (const auto& d : dirs)
      if (auto v = normalize_energy(s, p, lam0 + c * lam0.norm() * d, energy)) out.push_back(*v);
  // Coordinate reflections of lam0 and a small cloud around each.
  const int n = s.dim();
  const auto cloud = sphere_grid(n, 4, 6);
  for (int mask = 1; mask < (1 << n); ++mask) {
    Vec r = lam0;
    for (int k = 0; k < n; ++k)
      if (mask & (1 << k)) r[k] = -r[k];
    if ((r - lam0).norm() == 0.0) continue;
    if (auto v = normalize_energy(s, p, r, energy)) out.push_back(*v);
    for (double c : {0.1, 0.25})
      for (const auto& d : cloud)
        if (auto v = normalize_energy(s, p, r + c * lam0.norm() * d, energy)) out.push_back(*v);
  }
  return out;
}

std::optional<Shot> best_competitor(const Structure& s, const Vec& p, const Vec& lam0, double t,
                                    const std::vector<Vec>& continuation, const std::vector<Vec>& pool, int* shots,
                                    int n_starts) {
  const Vec target = flow_state(s, p, lam0, t, 1e-12).q;
  const double H0 = hamiltonian_energy(s, p, lam0);
  const double scale = lam0.norm();

  // Screen the pool by endpoint distance, then keep mutually separated starts.
  std::vector<double> dist(pool.size(), std::numeric_limits<double>::infinity());
  parallel_for(pool.size(), [&](std::size_t i) {
    try {
      dist[i] = (flow_state(s, p, pool[i], t, 1e-8).q - target).norm();
    } catch (const Error&) {
    }
  });
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  std::vector<Vec> starts = continuation;
  const std::size_t limit = continuation.size() + static_cast<std::size_t>(n_starts);
  for (std::size_t i : order) {
    if (starts.size() >= limit || !std::isfinite(dist[i])) break;
    if ((pool[i] - lam0).norm() < 1e-3 * scale) continue;
    bool separated = true;
    for (const auto& v : starts) separated = separated && (pool[i] - v).norm() >= 0.1 * scale;
    if (separated) starts.push_back(pool[i]);
  }

  // Coarse Newton from every start, then full accuracy for the most promising distinct results.
  auto solve = [&](const Vec& guess, double tol, double flow_tol, int max_iter) -> std::optional<Shot> {
    FieldInverse fi;
    fi.p = p;
    fi.t0 = t;
    fi.lam_anchor = guess;
    fi.max_iter = max_iter;
    fi.max_halvings = 10;
    fi.tol = tol;
    fi.singular_threshold = 1e-10;
    fi.flow_tol = flow_tol;
    try {
      const Vec mu = invert_field(s, fi, t, target, guess);
      if ((mu - lam0).norm() <= 1e-6 * std::max(1.0, scale)) return std::nullopt;
      return Shot{mu, (H0 - hamiltonian_energy(s, p, mu)) * t};
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  std::vector<std::optional<Shot>> coarse(starts.size());
  parallel_for(starts.size(), [&](std::size_t i) { coarse[i] = solve(starts[i], 1e-8, 1e-9, 15); });
  if (shots) *shots += static_cast<int>(starts.size());
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < coarse.size(); ++i)
    if (coarse[i]) ok.push_back(i);
  std::stable_sort(ok.begin(), ok.end(),
                   [&](std::size_t a, std::size_t b) { return coarse[a]->advantage > coarse[b]->advantage; });
  std::vector<Vec> refine;
  for (std::size_t i : ok) {
    if (refine.size() >= 3) break;
    bool fresh = true;
    for (const auto& r : refine) fresh = fresh && (coarse[i]->mu - r).norm() > 1e-6 * std::max(1.0, scale);
    if (fresh) refine.push_back(coarse[i]->mu);
  }
  std::vector<std::optional<Shot>> fine(refine.size());
  parallel_for(refine.size(), [&](std::size_t i) { fine[i] = solve(refine[i], 1e-11, 1e-12, 25); });
  std::optional<Shot> best;
  for (const auto& f : fine)
    if (f && (!best || f->advantage > best->advantage)) best = f;
  return best;
}

CutRecord cut_time(const Structure& s, const Vec& p, const Vec& lam0, double t_max, const CutOptions& opts) {
  validate(s, PhasePoint{p, lam0});
  require(t_max > 0, ErrorKind::Domain, "t_max must be positive");
  require(opts.ladder >= 1 && opts.time_tol > 0, ErrorKind::Input, "invalid ladder settings");
  require(hamiltonian_energy(s, p, lam0) > 0, ErrorKind::Precondition, "cut time needs H(p, lam0) > 0");

  CutRecord rec;
  const FirstConjugate fc = first_conjugate(s, p, lam0, t_max);
  if (fc.record) rec.t_first_conjugate = fc.record->t_star;
  const double t_hi = rec.t_first_conjugate ? std::min(t_max, *rec.t_first_conjugate + opts.conj_margin) : t_max;
  const auto grid = shooting_grid(s, p, lam0, opts.grid_n1, opts.grid_n2);

  double lo = 0.0;
  std::optional<Shot> hit;
  double hi = 0.0;
  std::optional<Vec> carry;
  for (int k = 1; k <= opts.ladder; ++k) {
    const double t = t_hi * k / opts.ladder;
    rec.ladder.push_back(t);
    std::vector<Vec> cont;
    if (carry) cont.push_back(*carry);
    const auto shot = best_competitor(s, p, lam0, t, cont, grid, &rec.shots, opts.n_starts);
    if (shot && shot->advantage > opts.tol) {
      hit = shot;
      hi = t;
      break;
    }
    if (shot) carry = shot->mu;
    lo = t;
  }

  if (!hit) {
    if (rec.t_first_conjugate && *rec.t_first_conjugate + opts.conj_margin <= t_max) {
      std::ostringstream msg;
      msg << "no competitor found up to t = " << t_hi << " although the first conjugate time is "
          << *rec.t_first_conjugate << " (" << rec.shots << " shots); refine the shooting grid";
      throw Error(ErrorKind::Unresolved, msg.str());
    }
    rec.t_cut = kSentinelInf;
    return rec;
  }

  while (hi - lo > opts.time_tol) {
    const double mid = 0.5 * (lo + hi);
    std::vector<Vec> guesses{hit->mu};
    if (carry) guesses.push_back(*carry);
    const auto shot = best_competitor(s, p, lam0, mid, guesses, {}, &rec.shots, 0);
    if (shot && shot->advantage > opts.tol) {
      hit = shot;
      hi = mid;
    } else {
      if (shot) carry = shot->mu;
      lo = mid;
    }
  }
  rec.t_cut = 0.5 * (lo + hi);
  rec.competitor = hit->mu;
  rec.competitor_advantage = hit->advantage;
  // A competitor that stays away from lam0 as t decreases to t_cut is a second minimizer.
  if (std::abs(rec.t_cut - 1.0) <= 1e-3 && (hit->mu - lam0).norm() > 0.01 * lam0.norm()) {
    rec.in_cut1 = true;
    rec.partner = hit->mu;
  }
  return rec;
}

bool verify_cut_time(const Structure& s, const Vec& p, const Vec& lam0, double t, double margin,
                     const CutOptions& opts) {
  require(t - margin > 0, ErrorKind::Domain, "verification window must stay in t > 0");
  const auto grid = shooting_grid(s, p, lam0, opts.grid_n1, opts.grid_n2);
  const auto above = best_competitor(s, p, lam0, t + margin, {}, grid, nullptr, opts.n_starts);
  if (!above || above->advantage <= opts.tol) return false;
  const auto below = best_competitor(s, p, lam0, t - margin, {above->mu}, grid, nullptr, opts.n_starts);
  return !below || below->advantage <= opts.tol;
}

Cut1Result cut1_pairs(const Structure& s, const Vec& p, const Vec& lam0_cut, double radius, int budget,
                      std::uint64_t seed, const Cut1Options& opts) {
  validate(s, PhasePoint{p, lam0_cut});
  require(radius > 0 && budget >= 2, ErrorKind::Input, "radius and budget must be positive");
  require(!ray_is_abnormal(s, p, lam0_cut, 1.0), ErrorKind::Precondition, "ray carries an abnormal segment");
  require(verify_cut_time(s, p, lam0_cut, 1.0, opts.verify_margin, opts.cut), ErrorKind::Precondition,
          "covector is not a cut covector (t_cut != 1 within tolerance)");

  const int n = s.dim();
  // Rays through the ball are cut at their first conjugate time; project samples there.
  auto project = [&](const Vec& lam) -> std::optional<Vec> {
    try {
      const auto tc = conjugate_time_near(s, p, lam, 0.5, 1.5);
      if (!tc) return std::nullopt;
      return Vec(*tc * lam);
    } catch (const Error&) {
      return std::nullopt;
    }
  };

  Cut1Result out;
  BallSampler sampler(lam0_cut, radius, budget, seed);
  std::vector<Vec> raw(budget);
  for (auto& v : raw) v = sampler.next();
  std::vector<std::optional<Vec>> proj(raw.size());
  parallel_for(raw.size(), [&](std::size_t i) { proj[i] = project(raw[i]); });
  std::vector<Vec> lam;
  for (auto& v : proj)
    if (v && (*v - lam0_cut).norm() <= radius) lam.push_back(*v);
  out.samples = static_cast<int>(lam.size());
  std::vector<std::optional<Vec>> img(lam.size());
  parallel_for(lam.size(), [&](std::size_t i) { img[i] = try_exp(s, p, lam[i], 1e-12); });

  const auto ranked = rank_collisions(lam, img, 0, std::max(opts.min_separation, 0.05 * radius), 4 * opts.max_pairs);

  // Gauss-Newton for lam2 on the projected locus: moves orthogonal to the ray, then reprojects.
  auto polish = [&](const Vec& l1, const Vec& l2) -> std::optional<Cut1Pair> {
    const auto target = exp_map(s, p, l1, 1e-12).q;
    if (!target) return std::nullopt;
    Eigen::JacobiSVD<Mat> basis(Mat(l2.transpose()), Eigen::ComputeFullV);
    const Mat V = basis.matrixV().rightCols(n - 1);
    Vec y = Vec::Zero(n - 1);
    auto residual = [&](const Vec& yy) -> std::optional<Vec> {
      const auto pr = project(l2 + V * yy);
      if (!pr) return std::nullopt;
      const auto q = exp_map(s, p, *pr, 1e-12).q;
      if (!q) return std::nullopt;
      return Vec(*q - *target);
    };
    auto r = residual(y);
    if (!r) return std::nullopt;
    const double h = 1e-6 * std::max(1.0, l2.norm());
    for (int it = 0; it < 20 && r->norm() > 0.1 * opts.max_gap; ++it) {
      Mat J(n, n - 1);
      for (int k = 0; k < n - 1; ++k) {
        Vec e = Vec::Zero(n - 1);
        e[k] = h;
        const auto rp = residual(y + e);
        const auto rm = residual(y - e);
        if (!rp || !rm) return std::nullopt;
        J.col(k) = (*rp - *rm) / (2 * h);
      }
      const Vec step = -J.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(*r);
      bool accepted = false;
      for (double a = 1.0; a > 1e-4; a *= 0.5) {
        const auto rt = residual(y + a * step);
        if (rt && rt->norm() < r->norm()) {
          y += a * step;
          r = rt;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    const auto l2p = project(l2 + V * y);
    if (!l2p) return std::nullopt;
    Cut1Pair pair{l1, *l2p, r->norm(), (l1 - *l2p).norm(), false};
    return pair;
  };

  std::vector<std::optional<Cut1Pair>> polished(ranked.size());
  parallel_for(ranked.size(), [&](std::size_t c) {
    try {
      polished[c] = polish(lam[ranked[c].i], lam[ranked[c].j]);
    } catch (const Error&) {
    }
  });
  for (auto& c : polished) {
    if (!c) continue;
    if (!out.best || c->image_gap < out.best->image_gap) out.best = *c;
    if (static_cast<int>(out.pairs.size()) >= opts.max_pairs) continue;
    if (c->image_gap > opts.max_gap || c->separation < opts.min_separation) continue;
    if ((c->lam2 - lam0_cut).norm() > radius) continue;
    c->verified = verify_cut_time(s, p, c->lam1, 1.0, opts.verify_margin, opts.cut) &&
                  verify_cut_time(s, p, c->lam2, 1.0, opts.verify_margin, opts.cut);
    if (c->verified) out.pairs.push_back(*c);
  }
  out.found = !out.pairs.empty();
  if (!out.found) out.note = "no verified pair; reporting the best candidate";
  return out;
}

SampledGeodesic sample_geodesic(const Structure& s, const Vec& p, const Vec& lam0, int n_samples) {
  require(n_samples >= 2, ErrorKind::Input, "need at least two samples");
  const ExtremalTrajectory traj = integrate_extremal(s, p, lam0, 1.0, 1e-12);
  SampledGeodesic g;
  for (int i = 0; i < n_samples; ++i) {
    const double t = static_cast<double>(i) / (n_samples - 1);
    g.t.push_back(t);
    g.q.push_back(traj.at(t).q);
  }
  g.length = std::sqrt(2 * traj.energy);
  return g;
}

namespace {

Vec interpolate(const SampledGeodesic& g, double t) {
  if (t <= g.t.front()) return g.q.front();
  if (t >= g.t.back()) return g.q.back();
  const auto it = std::upper_bound(g.t.begin(), g.t.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - g.t.begin());
  const double w = (t - g.t[j - 1]) / (g.t[j] - g.t[j - 1]);
  return (1 - w) * g.q[j - 1] + w * g.q[j];
}

double sup_distance(const SampledGeodesic& a, const SampledGeodesic& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.t.size(); ++i) d = std::max(d, (a.q[i] - interpolate(b, a.t[i])).norm());
  return d;
}

}  // namespace

double geo_distance(const SampledGeodesic& g1, const SampledGeodesic& g2) {
  require(!g1.t.empty() && !g2.t.empty(), ErrorKind::Input, "empty geodesic sample");
  require(g1.q.front().size() == g2.q.front().size(), ErrorKind::Input, "geodesics live in different dimensions");
  const double sup = g1.t == g2.t ? sup_distance(g1, g2) : std::max(sup_distance(g1, g2), sup_distance(g2, g1));
  return sup + std::abs(g1.length - g2.length);
}

SyntheticResult synthetic_witness(const Structure& s, const Vec& p, const Vec& lam0_conj, SyntheticKind kind,
                                  int n_levels, std::uint64_t seed, double r0, int budget) {
  validate(s, PhasePoint{p, lam0_conj});
  require(n_levels >= 1 && r0 > 0, ErrorKind::Input, "need n_levels >= 1 and r0 > 0");
  require(is_conjugate(s, p, lam0_conj), ErrorKind::Precondition, "covector is not conjugate at t = 1");
  require(!ray_is_abnormal(s, p, lam0_conj), ErrorKind::Precondition,
          "ray carries an abnormal segment; the structure is not certified ideal along it");

  SyntheticResult out;
  const SampledGeodesic central = sample_geodesic(s, p, lam0_conj);
  Rng rng(seed);
  double prev1 = std::numeric_limits<double>::infinity();
  double prev2 = prev1;
  for (int lvl = 0; lvl < n_levels; ++lvl) {
    const double r = r0 * std::ldexp(1.0, -lvl);
    SyntheticLevel L;
    L.radius = r;
    L.base = p;
    L.lam_center = lam0_conj;
    if (kind == SyntheticKind::Symmetric) {
      L.base = p + 0.5 * r * rng.unit_vector(s.dim());
      std::optional<double> tc;
      try {
        tc = conjugate_time_near(s, L.base, lam0_conj, 0.5, 1.5);
      } catch (const Error&) {
      }
      if (!tc) {
        out.note = "level " + std::to_string(lvl) + ": conjugate covector not recovered at the perturbed base";
        return out;
      }
      L.lam_center = *tc * lam0_conj;
    }
    WitnessResult w;
    try {
      w = injectivity_witness(s, L.base, L.lam_center, r, budget, seed + lvl);
    } catch (const Error& e) {
      out.note = "level " + std::to_string(lvl) + ": " + e.what();
      return out;
    }
    if (!w.found) {
      out.note = "level " + std::to_string(lvl) + ": no witness within budget";
      return out;
    }
    L.pair = w.pair;
    L.endpoint = w.pair.image;
    const SampledGeodesic g1 = sample_geodesic(s, L.base, w.pair.lam1);
    const SampledGeodesic g2 = sample_geodesic(s, L.base, w.pair.lam2);
    L.d_geo_1 = geo_distance(g1, central);
    L.d_geo_2 = geo_distance(g2, central);
    L.d_geo_pair = geo_distance(g1, g2);
    if (L.d_geo_pair < 1e-6) {
      out.note = "level " + std::to_string(lvl) + ": pair members are not distinct geodesics";
      return out;
    }
    if (!(L.d_geo_1 < prev1 && L.d_geo_2 < prev2)) {
      out.levels.push_back(L);
      out.note = "level " + std::to_string(lvl) + ": distance to the central geodesic did not decrease";
      return out;
    }
    prev1 = L.d_geo_1;
    prev2 = L.d_geo_2;
    out.levels.push_back(L);
  }
  out.complete = true;
  return out;
}

}  // namespace subriem
