#pragma once

#include <vector>

#include "subriem/structure.hpp"
#include "subriem/types.hpp"

namespace subriem {

struct HamiltonianValue {
  Vec h;     // h_k = <lam, X_k(q)>
  double H;  // ½ Σ h_k²
  Vec u;     // minimal control of the normal extremal, equal to h
};

struct PhaseVelocity {
  Vec qdot;    // dH/dlam
  Vec lamdot;  // -dH/dq
};

void validate(const Structure& s, const PhasePoint& z);

HamiltonianValue hamiltonian(const Structure& s, const PhasePoint& z);
double hamiltonian_energy(const Structure& s, const Vec& q, const Vec& lam);
PhaseVelocity hamiltonian_rhs(const Structure& s, const PhasePoint& z);

/// Jacobian of (q, lam) -> (qdot, lamdot), a 2n x 2n matrix in (q, lam) blocks.
Mat hamiltonian_hessian(const Structure& s, const PhasePoint& z);

struct BracketCheck {
  bool ok;
  int achieved_rank;
};

/// Spans the iterated brackets of the generating fields up to `depth` at q.
/// Diagnostic only; depth 1 means the fields themselves.
BracketCheck check_bracket_generating(const Structure& s, const Vec& q, int depth);

/// Allocation-free evaluator used inside the integrators. The phase state is z = [q, lam].
class HamiltonianKernel {
 public:
  explicit HamiltonianKernel(Structure s);

  int dim() const noexcept { return n_; }

  /// Writes dz = (qdot, lamdot). When jac is non-null also writes the column-major
  /// 2n x 2n Jacobian of the vector field. Returns H(z).
  double evaluate(const double* z, double* dz, double* jac);

 private:
  Structure s_;
  int n_;
  int m_;
  FieldJet jet_;
  std::vector<double> h_;
  std::vector<double> g_;  // g[k*n + l] = d h_k / d q_l
};

}  // namespace subriem
