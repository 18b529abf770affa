#include "subriem/structure.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "subriem/errors.hpp"

namespace subriem {

namespace {

struct Factor {
  int var;
  int exponent;
};

struct CompiledTerm {
  double coeff;
  int factor_begin;
  int factor_end;
};

// One nonzero polynomial bound to an output slot of the jet.
struct CompiledPoly {
  int slot;
  int term_begin;
  int term_end;
};

struct CompiledSet {
  std::vector<CompiledPoly> polys;
  std::vector<CompiledTerm> terms;
  std::vector<Factor> factors;

  void add(int slot, const Polynomial& p) {
    if (p.is_zero()) return;
    CompiledPoly cp{slot, static_cast<int>(terms.size()), 0};
    for (const auto& [e, c] : p.terms()) {
      CompiledTerm t{c, static_cast<int>(factors.size()), 0};
      for (int v = 0; v < static_cast<int>(e.size()); ++v) {
        if (e[v] != 0) factors.push_back({v, e[v]});
      }
      t.factor_end = static_cast<int>(factors.size());
      terms.push_back(t);
    }
    cp.term_end = static_cast<int>(terms.size());
    polys.push_back(cp);
  }

  void evaluate(const std::vector<double>& powers, int stride, std::vector<double>& out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (const auto& cp : polys) {
      double sum = 0.0;
      for (int t = cp.term_begin; t < cp.term_end; ++t) {
        double v = terms[t].coeff;
        for (int f = terms[t].factor_begin; f < terms[t].factor_end; ++f) {
          v *= powers[factors[f].var * stride + factors[f].exponent];
        }
        sum += v;
      }
      out[cp.slot] = sum;
    }
  }
};

}  // namespace

struct Structure::Impl {
  std::string name;
  int n = 0;
  int m = 0;
  int max_degree = 0;
  std::vector<PolyField> fields;
  CompiledSet values;
  CompiledSet first;
  CompiledSet second;
};

Structure::Structure(std::string name, int n, std::vector<PolyField> fields) {
  require(n >= 1, ErrorKind::Input, "structure dimension must be positive");
  require(!fields.empty(), ErrorKind::Input, "structure needs at least one generating field");
  auto impl = std::make_shared<Impl>();
  impl->name = std::move(name);
  impl->n = n;
  impl->m = static_cast<int>(fields.size());
  for (const auto& f : fields) {
    require(static_cast<int>(f.size()) == n, ErrorKind::Input, "generating field has wrong component count");
    for (const auto& p : f) {
      require(p.n_vars() == n, ErrorKind::Input, "field component has wrong variable count");
      impl->max_degree = std::max(impl->max_degree, p.degree());
    }
  }
  for (int k = 0; k < impl->m; ++k) {
    for (int i = 0; i < n; ++i) {
      const Polynomial& p = fields[k][i];
      impl->values.add(k * n + i, p);
      for (int l = 0; l < n; ++l) {
        Polynomial dp = p.derivative(l);
        impl->first.add((k * n + i) * n + l, dp);
        for (int j = 0; j < n; ++j) impl->second.add(((k * n + i) * n + l) * n + j, dp.derivative(j));
      }
    }
  }
  impl->fields = std::move(fields);
  impl_ = std::move(impl);
}

const std::string& Structure::name() const noexcept { return impl_->name; }
int Structure::dim() const noexcept { return impl_->n; }
int Structure::n_fields() const noexcept { return impl_->m; }
const std::vector<PolyField>& Structure::fields() const noexcept { return impl_->fields; }

void Structure::evaluate_jet(const double* q, int derivative_order, FieldJet& jet) const {
  const Impl& s = *impl_;
  const int n = s.n;
  const int m = s.m;
  const int stride = s.max_degree + 1;
  thread_local std::vector<double> powers;
  powers.resize(static_cast<std::size_t>(n) * stride);
  for (int v = 0; v < n; ++v) {
    double p = 1.0;
    for (int e = 0; e < stride; ++e) {
      powers[v * stride + e] = p;
      p *= q[v];
    }
  }
  jet.n = n;
  jet.m = m;
  jet.values.resize(static_cast<std::size_t>(m) * n);
  s.values.evaluate(powers, stride, jet.values);
  if (derivative_order >= 1) {
    jet.first.resize(static_cast<std::size_t>(m) * n * n);
    s.first.evaluate(powers, stride, jet.first);
  }
  if (derivative_order >= 2) {
    jet.second.resize(static_cast<std::size_t>(m) * n * n * n);
    s.second.evaluate(powers, stride, jet.second);
  }
}

std::vector<Vec> eval_fields(const Structure& s, const Vec& q) {
  require(q.size() == s.dim(), ErrorKind::Input, "point dimension does not match the structure");
  FieldJet jet;
  s.evaluate_jet(q.data(), 0, jet);
  std::vector<Vec> out(s.n_fields(), Vec(s.dim()));
  for (int k = 0; k < s.n_fields(); ++k) {
    for (int i = 0; i < s.dim(); ++i) out[k](i) = jet.value(k, i);
  }
  return out;
}

Structure euclidean(int n) {
  require(n >= 1, ErrorKind::Input, "euclidean dimension must be positive");
  std::vector<PolyField> fields;
  for (int k = 0; k < n; ++k) {
    PolyField f(n, Polynomial(n));
    f[k] = Polynomial::constant(n, 1.0);
    fields.push_back(std::move(f));
  }
  return Structure("euclidean" + std::to_string(n), n, std::move(fields));
}

Structure heisenberg() {
  const int n = 3;
  PolyField x1{Polynomial::constant(n, 1.0), Polynomial(n), -0.5 * Polynomial::variable(n, 1)};
  PolyField x2{Polynomial(n), Polynomial::constant(n, 1.0), 0.5 * Polynomial::variable(n, 0)};
  return Structure("heisenberg", n, {x1, x2});
}

Structure martinet() {
  const int n = 3;
  Polynomial half_x2(n);
  half_x2.add_term(0.5, {2, 0, 0});
  PolyField x1{Polynomial::constant(n, 1.0), Polynomial(n), Polynomial(n)};
  PolyField x2{Polynomial(n), Polynomial::constant(n, 1.0), half_x2};
  return Structure("martinet", n, {x1, x2});
}

Structure grushin() {
  const int n = 2;
  PolyField x1{Polynomial::constant(n, 1.0), Polynomial(n)};
  PolyField x2{Polynomial(n), Polynomial::variable(n, 0)};
  return Structure("grushin", n, {x1, x2});
}

std::vector<std::string> builtin_structure_names() {
  return {"euclidean2", "euclidean3", "heisenberg", "martinet", "grushin"};
}

Structure builtin_structure(const std::string& name) {
  if (name == "euclidean2") return euclidean(2);
  if (name == "euclidean3") return euclidean(3);
  if (name == "heisenberg") return heisenberg();
  if (name == "martinet") return martinet();
  if (name == "grushin") return grushin();
  throw Error(ErrorKind::Input, "unknown builtin structure '" + name + "'");
}

Structure structure_from_json(const nlohmann::json& doc) {
  try {
    require(doc.is_object(), ErrorKind::Input, "structure document must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
      require(key == "name" || key == "n" || key == "m" || key == "fields", ErrorKind::Input,
              "unknown key '" + key + "' in structure document");
    }
    const std::string name = doc.value("name", std::string("custom"));
    const int n = doc.at("n").get<int>();
    const int m = doc.at("m").get<int>();
    require(n >= 1 && m >= 1, ErrorKind::Input, "structure n and m must be positive");
    const auto& fields_json = doc.at("fields");
    require(fields_json.is_array() && static_cast<int>(fields_json.size()) == m, ErrorKind::Input,
            "'fields' must list exactly m vector fields");
    std::vector<PolyField> fields;
    for (const auto& fj : fields_json) {
      require(fj.is_array() && static_cast<int>(fj.size()) == n, ErrorKind::Input,
              "each field must list exactly n polynomials");
      PolyField field;
      for (const auto& pj : fj) {
        require(pj.is_array(), ErrorKind::Input, "polynomial must be a list of monomials");
        Polynomial p(n);
        for (const auto& mono : pj) {
          require(mono.is_array() && mono.size() == 2 && mono[0].is_number() && mono[1].is_array(),
                  ErrorKind::Input, "monomial must be [coefficient, [exponents]]");
          p.add_term(mono[0].get<double>(), mono[1].get<std::vector<int>>());
        }
        field.push_back(std::move(p));
      }
      fields.push_back(std::move(field));
    }
    return Structure(name, n, std::move(fields));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Input, std::string("malformed structure document: ") + e.what());
  }
}

nlohmann::json structure_to_json(const Structure& s) {
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : s.fields()) {
    nlohmann::json fj = nlohmann::json::array();
    for (const auto& p : f) {
      nlohmann::json pj = nlohmann::json::array();
      for (const auto& [e, c] : p.terms()) pj.push_back({c, e});
      fj.push_back(std::move(pj));
    }
    fields.push_back(std::move(fj));
  }
  return {{"name", s.name()}, {"n", s.dim()}, {"m", s.n_fields()}, {"fields", std::move(fields)}};
}

Structure resolve_structure(const std::string& source) {
  const auto names = builtin_structure_names();
  if (std::find(names.begin(), names.end(), source) != names.end()) return builtin_structure(source);
  std::ifstream in(source);
  require(in.good(), ErrorKind::Input, "'" + source + "' is neither a builtin structure nor a readable file");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Input, "cannot parse structure file '" + source + "': " + e.what());
  }
  return structure_from_json(doc);
}

}  // namespace subriem
