#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace subriem {

/// y' = f(t, y); writes f into dy. Both buffers have the system dimension.
using OdeRhs = std::function<void(double t, const double* y, double* dy)>;

struct Dopri5Options {
  double rtol = 1e-10;
  double atol = 1e-10;
  double initial_step = 0.0;  // 0 selects a starting step automatically
  std::size_t max_steps = 500000;
};

/// Continuous extension of an accepted Dormand–Prince 5(4) solution (4th-order interpolant).
class DenseOutput {
 public:
  DenseOutput() = default;
  DenseOutput(std::size_t dim, double t0, std::span<const double> y0);

  std::size_t dim() const noexcept { return dim_; }
  double t_begin() const noexcept { return t0_; }
  double t_end() const noexcept { return segments_.empty() ? t0_ : segments_.back().t0 + segments_.back().h; }
  std::size_t n_steps() const noexcept { return segments_.size(); }

  /// Step boundaries t_0 < t_1 < ... < t_N.
  std::vector<double> step_times() const;
  /// State at the i-th step boundary.
  std::vector<double> node_state(std::size_t i) const;

  /// Evaluates the first n_components entries of y(t) into out; t in [t_begin, t_end].
  void evaluate(double t, double* out, std::size_t n_components) const { evaluate(t, 0, n_components, out); }
  /// Evaluates components [first, first + count) of y(t) into out.
  void evaluate(double t, std::size_t first, std::size_t count, double* out) const;
  std::vector<double> operator()(double t) const;

  void append_step(double t0, double h, const double* coefficients);

 private:
  struct Segment {
    double t0;
    double h;
  };
  std::size_t dim_ = 0;
  double t0_ = 0.0;
  std::vector<double> y0_;
  std::vector<Segment> segments_;
  std::vector<double> coeffs_;  // 5 * dim per segment
};

struct Dopri5Result {
  std::vector<double> y_end;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
};

/// Integrates from t0 to t1 > t0. When dense is non-null the accepted steps are recorded.
/// Throws IntegrationFailure on step-size underflow, step budget exhaustion or non-finite states.
Dopri5Result integrate_dopri5(const OdeRhs& f, double t0, std::span<const double> y0, double t1,
                              const Dopri5Options& options, DenseOutput* dense = nullptr);

}  // namespace subriem
