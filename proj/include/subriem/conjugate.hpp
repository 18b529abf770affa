#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "subriem/flow.hpp"
#include "subriem/structure.hpp"
#include "subriem/types.hpp"

namespace subriem {

/// Order value meaning "no finite order resolved up to max_order".
constexpr int kInfiniteOrder = std::numeric_limits<int>::max();

/// Scalar curve t -> det(d_{t lam0} exp_p), or a synthetic stand-in.
struct DeterminantCurve {
  std::function<double(double)> value;
  double t_begin = 0.0;  // exclusive
  double t_end = 0.0;
  double noise = 0.0;    // absolute noise floor of value
  /// Matrix whose singular values give the kernel dimension (empty for synthetic curves).
  std::function<Mat(double)> matrix;
};

/// t^{-n} D(t) along the ray of a track. The noise floor is derived from the integration tolerance.
DeterminantCurve ray_determinant(const JacobianTrack& track);
DeterminantCurve synthetic_determinant(std::function<double(double)> f, double t_begin, double t_end,
                                       double noise = 1e-14);

enum class Regularity { Regular, Singular, Unknown };
const char* to_string(Regularity r) noexcept;

struct OrderEstimate {
  int order = 0;  // kInfiniteOrder when unresolved
  double leading_coeff = 0.0;
  double slope = 0.0;  // raw log-log slope
  int derivative_order = 0;
};

struct ConjugateRecord {
  double t_star = 0.0;
  std::optional<int> order;  // empty when the two order estimators disagree
  int kernel_dim = 0;
  Regularity regular = Regularity::Unknown;
  double residual = 0.0;
  bool sign_change = false;
};

struct Interval {
  double a;  // exclusive
  double b;
};

struct ConjugateSearch {
  std::vector<ConjugateRecord> records;
  std::vector<Interval> abnormal;
};

struct ConjugateOptions {
  double tol_det = 1e-8;
  int per_unit = 512;
  bool estimate_orders = true;
  int max_order = 8;
};

ConjugateSearch find_conjugate_times(const DeterminantCurve& curve, double t_min, const ConjugateOptions& opts = {});
ConjugateSearch find_conjugate_times(const JacobianTrack& track, double t_min, double tol_det = 1e-8);

/// Fits det ≈ c (t - t*)^m near t* with a log-log slope estimator and a finite-difference
/// estimator; throws InconclusiveOrder if they disagree.
OrderEstimate estimate_order(const DeterminantCurve& curve, double t_star, double window, int max_order = 8);
OrderEstimate estimate_order(const JacobianTrack& track, double t_star, double window, int max_order = 8);

/// Maximal sub-intervals (a, b] of the curve domain on which |value| <= tol * max(1, sup|value|).
/// Runs shorter than min_run samples are ignored; a run touching the start extends to t_begin.
std::vector<Interval> abnormal_segments(const DeterminantCurve& curve, double tol = 1e-10, int per_unit = 512,
                                        int min_run = 3);
std::vector<Interval> abnormal_segments(const JacobianTrack& track, double tol = 1e-10);

struct RegularityReport {
  Regularity regular = Regularity::Unknown;
  std::optional<Vec> counterexample;
  int counterexample_count = 0;
  int rays_used = 0;
  std::vector<Vec> excluded_rays;
  std::vector<int> counts;  // conjugate covectors per used ray
  std::string note;
};

struct RegularityOptions {
  double tol = 1e-10;
  double tol_det = 1e-8;
};

RegularityReport check_regular(const Structure& s, const Vec& p, const Vec& lam0_conj, double radius, int n_rays,
                               std::uint64_t seed, const RegularityOptions& opts = {});

/// (m-1)-th derivative at tau = 1 of tau -> det(d_{tau scale lam0} exp_p), from the track of lam0.
double delta_on_track(const JacobianTrack& track, double scale, int m, double h);

/// (m-1)-th derivative at t = 1 of t -> det(d_{t lam} exp_p) by a central stencil of half-width m.
double delta_map(const Structure& s, const Vec& p, const Vec& lam, int m, double h, double tol = 1e-11);

/// Direction grid on the unit sphere of R^n; n = 2 uses n1 angles, n = 3 uses n1 x n2 (polar x azimuth).
std::vector<Vec> sphere_grid(int n, int n1, int n2);

/// Rescales lam to H(p, lam) = energy; nullopt when H(p, lam) vanishes.
std::optional<Vec> normalize_energy(const Structure& s, const Vec& p, const Vec& lam, double energy);

struct LocusEntry {
  Vec lam0;
  std::optional<double> t_conj;
  std::optional<int> order;
  std::optional<Vec> locus_point;
  Regularity regular = Regularity::Unknown;
  int delta_signs[2] = {0, 0};  // sign of Δ^{m-1} at (1-ε) and (1+ε) times the locus point
  double delta_values[2] = {0.0, 0.0};
  double delta_at_locus = 0.0;
  bool abnormal = false;
  std::string note;
};

struct LocusSlice {
  Vec p;
  double energy = 0.0;
  int grid_shape[2] = {0, 0};
  double t_max = 0.0;
  std::vector<LocusEntry> entries;
};

struct LocusOptions {
  double tol = 1e-10;
  double tol_det = 1e-8;
  double epsilon = 0.05;  // radial offset for the transversality signs
  double fd_step = 1e-3;
  int regularity_rays = 0;
  std::uint64_t seed = 0;
};

LocusSlice locus_slice(const Structure& s, const Vec& p, double energy, int n1, int n2, double t_max,
                       const LocusOptions& opts = {});

/// First conjugate time along the ray of lam0 by integrating over doubling horizons up to t_max.
struct FirstConjugate {
  std::optional<ConjugateRecord> record;
  std::vector<Interval> abnormal;
  std::optional<JacobianTrack> track;
};
FirstConjugate first_conjugate(const Structure& s, const Vec& p, const Vec& lam0, double t_max, double tol = 1e-10,
                               double tol_det = 1e-8);

}  // namespace subriem
