#pragma once

#include <map>
#include <span>
#include <vector>

namespace subriem {

/// Multivariate polynomial in a fixed number of variables with double coefficients.
/// Stored in canonical form: exponent vectors are unique and no coefficient is zero.
class Polynomial {
 public:
  using Exponents = std::vector<int>;

  explicit Polynomial(int n_vars = 0);

  static Polynomial constant(int n_vars, double value);
  /// The coordinate function x_index.
  static Polynomial variable(int n_vars, int index);

  Polynomial& add_term(double coeff, Exponents exponents);

  int n_vars() const noexcept { return n_vars_; }
  int degree() const noexcept;
  bool is_zero() const noexcept { return terms_.empty(); }
  const std::map<Exponents, double>& terms() const noexcept { return terms_; }

  double evaluate(std::span<const double> x) const;
  Polynomial derivative(int var) const;

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double scale);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend bool operator==(const Polynomial& a, const Polynomial& b) = default;

 private:
  int n_vars_;
  std::map<Exponents, double> terms_;
};

/// A polynomial vector field on R^n: one polynomial per chart component.
using PolyField = std::vector<Polynomial>;

/// Lie bracket [X, Y] = DY·X − DX·Y, computed symbolically.
PolyField lie_bracket(const PolyField& x, const PolyField& y);

bool is_zero(const PolyField& field) noexcept;

}  // namespace subriem
