#include "subriem/polynomial.hpp"

#include <algorithm>
#include <cmath>

#include "subriem/errors.hpp"

namespace subriem {

Polynomial::Polynomial(int n_vars) : n_vars_(n_vars) {
  require(n_vars >= 0, ErrorKind::Input, "polynomial needs a non-negative variable count");
}

Polynomial Polynomial::constant(int n_vars, double value) {
  Polynomial p(n_vars);
  p.add_term(value, Exponents(n_vars, 0));
  return p;
}

Polynomial Polynomial::variable(int n_vars, int index) {
  require(index >= 0 && index < n_vars, ErrorKind::Input, "variable index out of range");
  Exponents e(n_vars, 0);
  e[index] = 1;
  Polynomial p(n_vars);
  p.add_term(1.0, std::move(e));
  return p;
}

Polynomial& Polynomial::add_term(double coeff, Exponents exponents) {
  require(static_cast<int>(exponents.size()) == n_vars_, ErrorKind::Input,
          "monomial exponent count does not match the polynomial's variable count");
  require(std::isfinite(coeff), ErrorKind::Input, "monomial coefficient must be finite");
  for (int e : exponents) require(e >= 0, ErrorKind::Input, "monomial exponents must be non-negative");
  if (coeff == 0.0) return *this;
  auto [it, inserted] = terms_.try_emplace(std::move(exponents), coeff);
  if (!inserted) {
    it->second += coeff;
    if (it->second == 0.0) terms_.erase(it);
  }
  return *this;
}

int Polynomial::degree() const noexcept {
  int deg = 0;
  for (const auto& [e, c] : terms_) {
    int d = 0;
    for (int k : e) d += k;
    deg = std::max(deg, d);
  }
  return deg;
}

double Polynomial::evaluate(std::span<const double> x) const {
  require(static_cast<int>(x.size()) == n_vars_, ErrorKind::Input, "evaluation point has wrong dimension");
  double sum = 0.0;
  for (const auto& [e, c] : terms_) {
    double term = c;
    for (int i = 0; i < n_vars_; ++i) {
      for (int k = 0; k < e[i]; ++k) term *= x[i];
    }
    sum += term;
  }
  return sum;
}

Polynomial Polynomial::derivative(int var) const {
  require(var >= 0 && var < n_vars_, ErrorKind::Input, "derivative variable out of range");
  Polynomial d(n_vars_);
  for (const auto& [e, c] : terms_) {
    if (e[var] == 0) continue;
    Exponents lowered = e;
    lowered[var] -= 1;
    d.add_term(c * e[var], std::move(lowered));
  }
  return d;
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  require(other.n_vars_ == n_vars_, ErrorKind::Input, "polynomial variable counts differ");
  for (const auto& [e, c] : other.terms_) add_term(c, e);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  require(other.n_vars_ == n_vars_, ErrorKind::Input, "polynomial variable counts differ");
  for (const auto& [e, c] : other.terms_) add_term(-c, e);
  return *this;
}

Polynomial& Polynomial::operator*=(double scale) {
  if (scale == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [e, c] : terms_) c *= scale;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  require(a.n_vars_ == b.n_vars_, ErrorKind::Input, "polynomial variable counts differ");
  Polynomial out(a.n_vars_);
  for (const auto& [ea, ca] : a.terms_) {
    for (const auto& [eb, cb] : b.terms_) {
      Polynomial::Exponents e(ea.size());
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
      out.add_term(ca * cb, std::move(e));
    }
  }
  return out;
}

PolyField lie_bracket(const PolyField& x, const PolyField& y) {
  require(x.size() == y.size() && !x.empty(), ErrorKind::Input, "bracket of fields with different dimensions");
  const int n = static_cast<int>(x.size());
  PolyField out(n, Polynomial(n));
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l < n; ++l) {
      out[i] += y[i].derivative(l) * x[l];
      out[i] -= x[i].derivative(l) * y[l];
    }
  }
  return out;
}

bool is_zero(const PolyField& field) noexcept {
  return std::all_of(field.begin(), field.end(), [](const Polynomial& p) { return p.is_zero(); });
}

}  // namespace subriem
