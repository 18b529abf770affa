#include "subriem/dopri5.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "subriem/errors.hpp"

namespace subriem {

namespace {

// Dormand–Prince 5(4) tableau with the Hairer continuous extension.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

double error_norm(const std::vector<double>& err, const std::vector<double>& y0, const std::vector<double>& y1,
                  const Dopri5Options& o) {
  double sum = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double sc = o.atol + o.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / sc;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(err.size()));
}

// Hairer & Wanner's starting-step heuristic.
double initial_step(const OdeRhs& f, double t0, const std::vector<double>& y0, const std::vector<double>& f0,
                    double span, const Dopri5Options& o) {
  const std::size_t n = y0.size();
  double dnf = 0.0, dny = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sk = o.atol + o.rtol * std::abs(y0[i]);
    dnf += (f0[i] / sk) * (f0[i] / sk);
    dny += (y0[i] / sk) * (y0[i] / sk);
  }
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
  h = std::min(h, span);
  std::vector<double> y1(n), f1(n);
  for (std::size_t i = 0; i < n; ++i) y1[i] = y0[i] + h * f0[i];
  f(t0 + h, y1.data(), f1.data());
  double der2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sk = o.atol + o.rtol * std::abs(y0[i]);
    der2 += ((f1[i] - f0[i]) / sk) * ((f1[i] - f0[i]) / sk);
  }
  der2 = std::sqrt(der2) / h;
  const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, std::abs(h) * 1e-3) : std::pow(0.01 / der12, 0.2);
  return std::min({100 * h, h1, span});
}

}  // namespace

DenseOutput::DenseOutput(std::size_t dim, double t0, std::span<const double> y0)
    : dim_(dim), t0_(t0), y0_(y0.begin(), y0.end()) {}

void DenseOutput::append_step(double t0, double h, const double* coefficients) {
  segments_.push_back({t0, h});
  coeffs_.insert(coeffs_.end(), coefficients, coefficients + 5 * dim_);
}

std::vector<double> DenseOutput::step_times() const {
  std::vector<double> out;
  out.reserve(segments_.size() + 1);
  out.push_back(t0_);
  for (const auto& s : segments_) out.push_back(s.t0 + s.h);
  if (!segments_.empty()) out.back() = t_end();
  return out;
}

std::vector<double> DenseOutput::node_state(std::size_t i) const {
  if (i == 0) return y0_;
  std::vector<double> out(dim_);
  // rcont1 + rcont2 is the state at the end of the segment.
  const double* c = coeffs_.data() + (i - 1) * 5 * dim_;
  for (std::size_t k = 0; k < dim_; ++k) out[k] = c[k] + c[dim_ + k];
  return out;
}

void DenseOutput::evaluate(double t, std::size_t first, std::size_t count, double* out) const {
  const double lo = t0_;
  const double hi = t_end();
  const double slack = 1e-12 * std::max(1.0, std::abs(hi));
  if (t < lo - slack || t > hi + slack) {
    std::ostringstream msg;
    msg << "dense output queried at t=" << t << " outside [" << lo << ", " << hi << "]";
    throw Error(ErrorKind::Domain, msg.str());
  }
  if (segments_.empty()) {
    std::copy_n(y0_.begin() + first, count, out);
    return;
  }
  auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                             [](double value, const Segment& s) { return value < s.t0; });
  const std::size_t idx = it == segments_.begin() ? 0 : static_cast<std::size_t>(it - segments_.begin()) - 1;
  const Segment& s = segments_[idx];
  const double theta = (t - s.t0) / s.h;
  const double theta1 = 1.0 - theta;
  const double* c = coeffs_.data() + idx * 5 * dim_;
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t k = first + j;
    out[j] = c[k] + theta * (c[dim_ + k] +
                             theta1 * (c[2 * dim_ + k] + theta * (c[3 * dim_ + k] + theta1 * c[4 * dim_ + k])));
  }
}

std::vector<double> DenseOutput::operator()(double t) const {
  std::vector<double> out(dim_);
  evaluate(t, out.data(), dim_);
  return out;
}

Dopri5Result integrate_dopri5(const OdeRhs& f, double t0, std::span<const double> y0_in, double t1,
                              const Dopri5Options& o, DenseOutput* dense) {
  require(t1 > t0, ErrorKind::Domain, "integration interval must have positive length");
  require(o.rtol > 0 && o.atol > 0, ErrorKind::Input, "integration tolerances must be positive");
  const std::size_t n = y0_in.size();
  std::vector<double> y(y0_in.begin(), y0_in.end()), y1(n), ytmp(n), err(n);
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), cont(5 * n);
  if (dense) *dense = DenseOutput(n, t0, y0_in);

  f(t0, y.data(), k1.data());
  const double span = t1 - t0;
  double h = o.initial_step > 0 ? std::min(o.initial_step, span) : initial_step(f, t0, y, k1, span, o);
  double t = t0;
  double err_old = 1e-4;
  bool last_rejected = false;
  Dopri5Result result;

  while (t < t1) {
    if (result.accepted_steps + result.rejected_steps >= o.max_steps) {
      throw IntegrationFailure("integration step budget exhausted", t);
    }
    const double h_min = 16 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h < h_min) throw IntegrationFailure("step-size underflow", t);
    bool final_step = false;
    if (t + h >= t1 || t + 1.01 * h >= t1) {
      h = t1 - t;
      final_step = true;
    }

    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
    f(t + c2 * h, ytmp.data(), k2.data());
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    f(t + c3 * h, ytmp.data(), k3.data());
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    f(t + c4 * h, ytmp.data(), k4.data());
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    f(t + c5 * h, ytmp.data(), k5.data());
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    f(t + h, ytmp.data(), k6.data());
    for (std::size_t i = 0; i < n; ++i)
      y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    f(t + h, y1.data(), k7.data());
    for (std::size_t i = 0; i < n; ++i)
      err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);

    const double e = error_norm(err, y, y1, o);
    if (!std::isfinite(e)) throw IntegrationFailure("non-finite state during integration", t);

    if (e <= 1.0) {
      if (dense) {
        for (std::size_t i = 0; i < n; ++i) {
          const double dy = y1[i] - y[i];
          const double bspl = h * k1[i] - dy;
          cont[i] = y[i];
          cont[n + i] = dy;
          cont[2 * n + i] = bspl;
          cont[3 * n + i] = dy - h * k7[i] - bspl;
          cont[4 * n + i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
        }
        dense->append_step(t, h, cont.data());
      }
      t = final_step ? t1 : t + h;
      y.swap(y1);
      k1.swap(k7);  // FSAL
      ++result.accepted_steps;
      // PI step-size control.
      double fac = 0.9 * std::pow(std::max(e, 1e-10), -0.17) * std::pow(err_old, 0.04);
      fac = std::clamp(fac, 0.2, 10.0);
      if (last_rejected) fac = std::min(fac, 1.0);
      h *= fac;
      err_old = std::max(e, 1e-4);
      last_rejected = false;
    } else {
      ++result.rejected_steps;
      h *= std::max(0.2, 0.9 * std::pow(e, -0.2));
      last_rejected = true;
    }
  }
  result.y_end = std::move(y);
  return result;
}

}  // namespace subriem
