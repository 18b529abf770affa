#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subriem/polynomial.hpp"
#include "subriem/types.hpp"

namespace subriem {

/// Values and exact partial derivatives of all generating fields at one point.
/// Flat storage: field k, component i, derivative directions l, j.
struct FieldJet {
  int n = 0;
  int m = 0;
  std::vector<double> values;  // [k*n + i]
  std::vector<double> first;   // [(k*n + i)*n + l]       = d X_k^i / d q_l
  std::vector<double> second;  // [((k*n + i)*n + l)*n + j] = d² X_k^i / d q_l d q_j

  double value(int k, int i) const { return values[k * n + i]; }
  double d1(int k, int i, int l) const { return first[(k * n + i) * n + l]; }
  double d2(int k, int i, int l, int j) const { return second[((k * n + i) * n + l) * n + j]; }
};

/// A sub-Riemannian structure on a single global chart R^n, given by m polynomial
/// generating fields. Immutable; copies share the compiled representation.
class Structure {
 public:
  Structure(std::string name, int n, std::vector<PolyField> fields);

  const std::string& name() const noexcept;
  int dim() const noexcept;
  int n_fields() const noexcept;
  const std::vector<PolyField>& fields() const noexcept;

  /// Evaluates the fields and, for derivative_order >= 1 / 2, their exact first / second
  /// partials at q (length dim()). The jet buffers are resized as needed.
  void evaluate_jet(const double* q, int derivative_order, FieldJet& jet) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

/// X_1(q), ..., X_m(q).
std::vector<Vec> eval_fields(const Structure& s, const Vec& q);

Structure euclidean(int n);
/// X1 = (1, 0, -y/2), X2 = (0, 1, x/2).
Structure heisenberg();
/// X1 = (1, 0, 0), X2 = (0, 1, x²/2).
Structure martinet();
/// X1 = (1, 0), X2 = (0, x).
Structure grushin();

/// "euclidean2", "euclidean3", "heisenberg", "martinet", "grushin".
Structure builtin_structure(const std::string& name);
std::vector<std::string> builtin_structure_names();

/// { "name", "n", "m", "fields": [[poly, ...n], ...m] } with poly = [[coeff, [e_1..e_n]], ...].
Structure structure_from_json(const nlohmann::json& doc);
nlohmann::json structure_to_json(const Structure& s);
/// Builtin name, otherwise a path to a structure file.
Structure resolve_structure(const std::string& source);

}  // namespace subriem
