#include "subriem/hamiltonian.hpp"

#include <algorithm>

#include "subriem/errors.hpp"

namespace subriem {

void validate(const Structure& s, const PhasePoint& z) {
  require(z.q.size() == s.dim() && z.lam.size() == s.dim(), ErrorKind::Input,
          "phase point dimension does not match the structure");
}

HamiltonianKernel::HamiltonianKernel(Structure s)
    : s_(std::move(s)), n_(s_.dim()), m_(s_.n_fields()), h_(m_), g_(static_cast<std::size_t>(m_) * n_) {}

double HamiltonianKernel::evaluate(const double* z, double* dz, double* jac) {
  const int n = n_;
  const int m = m_;
  const double* q = z;
  const double* lam = z + n;
  s_.evaluate_jet(q, jac ? 2 : 1, jet_);

  double energy = 0.0;
  for (int k = 0; k < m; ++k) {
    double hk = 0.0;
    for (int i = 0; i < n; ++i) hk += lam[i] * jet_.value(k, i);
    h_[k] = hk;
    energy += 0.5 * hk * hk;
    for (int l = 0; l < n; ++l) {
      double g = 0.0;
      for (int i = 0; i < n; ++i) g += lam[i] * jet_.d1(k, i, l);
      g_[k * n + l] = g;
    }
  }
  for (int i = 0; i < n; ++i) {
    double qd = 0.0;
    for (int k = 0; k < m; ++k) qd += h_[k] * jet_.value(k, i);
    dz[i] = qd;
  }
  for (int l = 0; l < n; ++l) {
    double ld = 0.0;
    for (int k = 0; k < m; ++k) ld -= h_[k] * g_[k * n + l];
    dz[n + l] = ld;
  }
  if (!jac) return energy;

  const int N = 2 * n;
  auto A = [&](int row, int col) -> double& { return jac[col * N + row]; };
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      double qq = 0.0, ql = 0.0, lq = 0.0, ll = 0.0;
      for (int k = 0; k < m; ++k) {
        const double hk = h_[k];
        // d qdot_r / d q_c
        qq += g_[k * n + c] * jet_.value(k, r) + hk * jet_.d1(k, r, c);
        // d qdot_r / d lam_c
        ql += jet_.value(k, c) * jet_.value(k, r);
        // d lamdot_r / d q_c
        double curv = 0.0;
        for (int i = 0; i < n; ++i) curv += lam[i] * jet_.d2(k, i, r, c);
        lq -= g_[k * n + c] * g_[k * n + r] + hk * curv;
        // d lamdot_r / d lam_c
        ll -= jet_.value(k, c) * g_[k * n + r] + hk * jet_.d1(k, c, r);
      }
      A(r, c) = qq;
      A(r, n + c) = ql;
      A(n + r, c) = lq;
      A(n + r, n + c) = ll;
    }
  }
  return energy;
}

HamiltonianValue hamiltonian(const Structure& s, const PhasePoint& z) {
  validate(s, z);
  const auto fields = eval_fields(s, z.q);
  HamiltonianValue out{Vec(s.n_fields()), 0.0, Vec()};
  for (int k = 0; k < s.n_fields(); ++k) out.h(k) = z.lam.dot(fields[k]);
  out.H = 0.5 * out.h.squaredNorm();
  out.u = out.h;
  return out;
}

double hamiltonian_energy(const Structure& s, const Vec& q, const Vec& lam) {
  return hamiltonian(s, PhasePoint{q, lam}).H;
}

PhaseVelocity hamiltonian_rhs(const Structure& s, const PhasePoint& z) {
  validate(s, z);
  const int n = s.dim();
  Vec state(2 * n);
  state << z.q, z.lam;
  Vec d(2 * n);
  HamiltonianKernel kernel(s);
  kernel.evaluate(state.data(), d.data(), nullptr);
  return {d.head(n), d.tail(n)};
}

Mat hamiltonian_hessian(const Structure& s, const PhasePoint& z) {
  validate(s, z);
  const int n = s.dim();
  Vec state(2 * n);
  state << z.q, z.lam;
  Vec d(2 * n);
  Mat jac(2 * n, 2 * n);
  HamiltonianKernel kernel(s);
  kernel.evaluate(state.data(), d.data(), jac.data());
  return jac;
}

BracketCheck check_bracket_generating(const Structure& s, const Vec& q, int depth) {
  require(depth >= 1, ErrorKind::Input, "bracket depth must be at least 1");
  require(q.size() == s.dim(), ErrorKind::Input, "point dimension does not match the structure");
  const int n = s.dim();
  std::vector<PolyField> all;
  std::vector<PolyField> level;
  for (const auto& f : s.fields()) {
    if (!is_zero(f)) level.push_back(f);
  }
  all = level;
  for (int d = 2; d <= depth; ++d) {
    // Right-normed brackets [X_i, Z] with Z of length d-1 span the length-d brackets.
    std::vector<PolyField> next;
    for (const auto& x : s.fields()) {
      for (const auto& z : level) {
        PolyField b = lie_bracket(x, z);
        if (!is_zero(b)) next.push_back(std::move(b));
      }
    }
    all.insert(all.end(), next.begin(), next.end());
    level = std::move(next);
  }
  if (all.empty()) return {false, 0};
  Mat span(n, static_cast<Eigen::Index>(all.size()));
  std::vector<double> point(q.data(), q.data() + n);
  for (std::size_t c = 0; c < all.size(); ++c) {
    for (int i = 0; i < n; ++i) span(i, static_cast<Eigen::Index>(c)) = all[c][i].evaluate(point);
  }
  Eigen::JacobiSVD<Mat> svd(span);
  const auto& sv = svd.singularValues();
  const double scale = std::max(1.0, sv.size() ? sv(0) : 0.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > 1e-10 * scale) ++rank;
  }
  return {rank == n, rank};
}

}  // namespace subriem
