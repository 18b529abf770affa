#include "subriem/finite_difference.hpp"

#include "subriem/errors.hpp"

namespace subriem {

std::vector<double> fornberg_weights(double x0, const std::vector<double>& x, int order) {
  const int n = static_cast<int>(x.size());
  require(order >= 0 && n > order, ErrorKind::Input, "stencil too small for the derivative order");
  // c[i][k]: weight of x_i for the k-th derivative.
  std::vector<std::vector<double>> c(n, std::vector<double>(order + 1, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = c[i][order];
  return w;
}

Stencil central_stencil(double x0, double h, int order, int half) {
  require(h > 0, ErrorKind::Domain, "finite-difference step must be positive");
  Stencil s;
  for (int j = -half; j <= half; ++j) s.points.push_back(x0 + j * h);
  s.weights = fornberg_weights(x0, s.points, order);
  return s;
}

}  // namespace subriem
