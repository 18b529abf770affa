#pragma once

#include <vector>

namespace subriem {

/// Fornberg weights w_j such that f^{(order)}(x0) ≈ Σ w_j f(x_j).
std::vector<double> fornberg_weights(double x0, const std::vector<double>& x, int order);

/// Symmetric stencil x0 + j h, j = -half..half, with weights for the given derivative order.
struct Stencil {
  std::vector<double> points;
  std::vector<double> weights;
};
Stencil central_stencil(double x0, double h, int order, int half);

}  // namespace subriem
