#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "subriem/structure.hpp"
#include "subriem/types.hpp"

namespace subriem {

struct WitnessPair {
  Vec lam1;
  Vec lam2;
  Vec image;  // exp_p(lam1)
  double image_gap = 0.0;
  double separation = 0.0;
  double radius = 0.0;
};

struct WitnessOptions {
  int batch = 1000;
  int candidates_per_batch = 24;
  double tol = 1e-10;         // integration tolerance while sampling
  double verify_tol = 1e-12;  // integration tolerance for the reported gap
  double max_gap = 1e-8;
  double min_separation = 1e-6;
};

struct WitnessResult {
  bool found = false;
  WitnessPair pair;  // the certificate, or the best near-collision when not found
  int samples = 0;
  std::uint64_t seed = 0;
  std::string note;
};

/// Searches B(lam0_conj, radius) for lam1 != lam2 with exp_p(lam1) = exp_p(lam2).
/// Throws PRECONDITION_FAILED when lam0_conj is not conjugate or its ray is abnormal.
WitnessResult injectivity_witness(const Structure& s, const Vec& p, const Vec& lam0_conj, double radius, int budget,
                                  std::uint64_t seed, const WitnessOptions& opts = {});

/// True when the ray of lam0 is conjugate at t = 1 (sigma_min / sigma_max of dq/dlam0 below rel_tol).
bool is_conjugate(const Structure& s, const Vec& p, const Vec& lam0, double rel_tol = 1e-6);
/// True when t -> det d_{t lam0} exp_p vanishes identically on a subinterval of (0, t_end].
bool ray_is_abnormal(const Structure& s, const Vec& p, const Vec& lam0, double t_end = 1.0);

constexpr double kSentinelInf = std::numeric_limits<double>::infinity();

struct CutOptions {
  int grid_n1 = 10;
  int grid_n2 = 12;
  int ladder = 8;
  int n_starts = 16;  // Newton starts taken from the screened grid
  double tol = 1e-8;  // action advantage required of a competitor
  double time_tol = 1e-4;
  double conj_margin = 0.05;
};

struct CutRecord {
  double t_cut = kSentinelInf;
  std::optional<Vec> competitor;  // covector beating lam0 just above t_cut
  double competitor_advantage = 0.0;
  std::optional<double> t_first_conjugate;
  bool in_cut1 = false;
  std::optional<Vec> partner;
  std::vector<double> ladder;
  int shots = 0;
};

/// Cut time of the extremal of lam0 by action comparison against multi-start shooting.
/// Throws UNRESOLVED when no competitor is found although one must exist past the first
/// conjugate time.
CutRecord cut_time(const Structure& s, const Vec& p, const Vec& lam0, double t_max, const CutOptions& opts = {});

/// Best competitor at time t: covector mu != lam0 with q(t; mu) = q(t; lam0), and its action
/// advantage (H(lam0) - H(mu)) t. Newton starts are the continuation guesses plus the n_starts
/// pool members whose endpoints land closest to q(t; lam0). Empty when shooting finds none.
struct Shot {
  Vec mu;
  double advantage;
};
std::optional<Shot> best_competitor(const Structure& s, const Vec& p, const Vec& lam0, double t,
                                    const std::vector<Vec>& continuation, const std::vector<Vec>& pool,
                                    int* shots = nullptr, int n_starts = 16);
std::vector<Vec> shooting_grid(const Structure& s, const Vec& p, const Vec& lam0, int n1, int n2);

/// Checks t_cut in [t - margin, t + margin]: no competitor at t - margin, one at t + margin.
bool verify_cut_time(const Structure& s, const Vec& p, const Vec& lam0, double t, double margin,
                     const CutOptions& opts = {});

struct Cut1Options {
  double verify_margin = 1e-3;
  double max_gap = 1e-8;
  double min_separation = 1e-6;
  int max_pairs = 2;
  CutOptions cut;
};

struct Cut1Pair {
  Vec lam1;
  Vec lam2;
  double image_gap = 0.0;
  double separation = 0.0;
  bool verified = false;
};

struct Cut1Result {
  bool found = false;
  std::vector<Cut1Pair> pairs;
  std::optional<Cut1Pair> best;
  int samples = 0;
  std::string note;
};

Cut1Result cut1_pairs(const Structure& s, const Vec& p, const Vec& lam0_cut, double radius, int budget,
                      std::uint64_t seed, const Cut1Options& opts = {});

struct SampledGeodesic {
  std::vector<double> t;
  std::vector<Vec> q;
  double length = 0.0;
};

/// q(t; lam0) on a uniform grid of [0, 1]; length sqrt(2 H).
SampledGeodesic sample_geodesic(const Structure& s, const Vec& p, const Vec& lam0, int n_samples = 201);

/// sup_t |g1(t) - g2(t)| + |L1 - L2|; g2 is linearly resampled when the grids differ.
double geo_distance(const SampledGeodesic& g1, const SampledGeodesic& g2);

enum class SyntheticKind { OneSided, Symmetric };

struct SyntheticLevel {
  double radius = 0.0;
  Vec base;  // p or p_n
  Vec lam_center;
  WitnessPair pair;
  Vec endpoint;
  double d_geo_1 = 0.0;  // to the central geodesic
  double d_geo_2 = 0.0;
  double d_geo_pair = 0.0;
};

struct SyntheticResult {
  std::vector<SyntheticLevel> levels;
  bool complete = false;
  std::string note;
};

SyntheticResult synthetic_witness(const Structure& s, const Vec& p, const Vec& lam0_conj, SyntheticKind kind,
                                  int n_levels, std::uint64_t seed, double r0 = 0.1, int budget = 10000);

}  // namespace subriem
