#include "subriem/cli.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "subriem/conjugate.hpp"
#include "subriem/errors.hpp"
#include "subriem/flow.hpp"
#include "subriem/hamiltonian.hpp"
#include "subriem/hilbert.hpp"
#include "subriem/report.hpp"
#include "subriem/structure.hpp"
#include "subriem/witness.hpp"

namespace subriem {

namespace {

using json = nlohmann::ordered_json;

struct Args {
  std::string structure;
  std::string p, lam0, q, guess;
  std::optional<double> tol;
  double tol_det = 1e-8;
  bool energy_normalize = false;
  std::string csv;

  double T = 1.0;
  double t = 1.0;
  double t_min = 0.01;
  std::optional<double> t_max;
  std::optional<double> t_star;
  double window = 0.05;
  int max_order = 8;

  double energy = 0.5;
  int n1 = 8, n2 = 8;
  int regularity_rays = 0;
  double regularity_radius = 0.05;
  std::uint64_t seed = 0;

  std::string ray, graph, curve;
  double t0 = 1.0;
  int n_quad = 8;

  std::string s_range = "0,6.283185307179586";
  int samples = 33;
  double h = 1e-3;

  std::optional<double> radius;
  std::optional<int> budget;
  std::string grid = "10,12";
  std::string kind = "one-sided";
  int levels = 3;
  double r0 = 0.1;
  int depth = 3;
};

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    require(used == item.size() && !item.empty() && std::isfinite(x), ErrorKind::Input,
            "--" + what + ": '" + item + "' is not a finite number");
    out.push_back(x);
  }
  require(!out.empty(), ErrorKind::Input, "--" + what + " is empty");
  return out;
}

Vec parse_vec(const std::string& text, const std::string& what, int n) {
  const auto xs = parse_list(text, what);
  require(static_cast<int>(xs.size()) == n, ErrorKind::Input,
          "--" + what + " needs " + std::to_string(n) + " components, got " + std::to_string(xs.size()));
  return Eigen::Map<const Vec>(xs.data(), n);
}

std::pair<double, double> parse_pair(const std::string& text, const std::string& what) {
  const auto xs = parse_list(text, what);
  require(xs.size() == 2, ErrorKind::Input, "--" + what + " needs two values");
  return {xs[0], xs[1]};
}

double tolerance(const Args& a, double fallback) {
  const double tol = a.tol.value_or(fallback);
  require(tol >= kMinTol && tol <= kMaxTol, ErrorKind::Input, "--tol outside [1e-13, 1e-3]");
  return tol;
}

json order_json(const std::optional<int>& order) {
  if (!order) return nullptr;
  if (*order == kInfiniteOrder) return "INFINITE";
  return *order;
}

json record_json(const ConjugateRecord& r) {
  json j;
  j["t_star"] = r.t_star;
  j["order"] = order_json(r.order);
  j["kernel_dim"] = r.kernel_dim;
  j["regular"] = to_string(r.regular);
  j["residual"] = r.residual;
  j["sign_change"] = r.sign_change;
  return j;
}

json intervals_json(const std::vector<Interval>& v) {
  json out = json::array();
  for (const auto& i : v) out.push_back(json::array({i.a, i.b}));
  return out;
}

json quadrature_json(const QuadratureResult& q) {
  json j;
  j["value"] = q.value;
  j["error_estimate"] = q.error_estimate;
  j["nodes"] = q.nodes;
  j["excluded_windows"] = q.excluded_windows;
  return j;
}

json regularity_json(const RegularityReport& r) {
  json j;
  j["regular"] = to_string(r.regular);
  j["counterexample"] = r.counterexample ? to_json(*r.counterexample) : json(nullptr);
  j["counterexample_count"] = r.counterexample_count;
  j["rays_used"] = r.rays_used;
  j["excluded_rays"] = json::array();
  for (const auto& v : r.excluded_rays) j["excluded_rays"].push_back(to_json(v));
  j["counts"] = r.counts;
  j["note"] = r.note;
  return j;
}

json witness_pair_json(const WitnessPair& w) {
  json j;
  j["lam1"] = to_json(w.lam1);
  j["lam2"] = to_json(w.lam2);
  j["image"] = to_json(w.image);
  j["image_gap"] = w.image_gap;
  j["separation"] = w.separation;
  j["radius"] = w.radius;
  return j;
}

json number_or_inf(double x) { return std::isfinite(x) ? json(x) : json("SENTINEL_INF"); }

std::ofstream open_csv(const std::string& path) {
  std::ofstream f(path);
  require(f.good(), ErrorKind::Input, "cannot open '" + path + "' for writing");
  return f;
}

// Loads the curve file {"kind", "s", "t", "x", "closed"} into a Hermite curve.
AugmentedCurve load_curve(const std::string& path, int n) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Input, "cannot read curve file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Input, std::string("cannot parse curve file: ") + e.what());
  }
  require(doc.is_object(), ErrorKind::Input, "curve file must hold an object");
  for (const auto& [key, _] : doc.items())
    require(key == "kind" || key == "s" || key == "t" || key == "x" || key == "closed", ErrorKind::Input,
            "unknown key '" + key + "' in curve file");
  try {
    const std::string kind = doc.at("kind").get<std::string>();
    require(kind == "star" || kind == "base", ErrorKind::Input, "curve kind must be 'star' or 'base'");
    const auto s = doc.at("s").get<std::vector<double>>();
    const auto t = doc.at("t").get<std::vector<double>>();
    std::vector<Vec> x;
    for (const auto& row : doc.at("x")) {
      const auto v = row.get<std::vector<double>>();
      require(static_cast<int>(v.size()) == n, ErrorKind::Input, "curve sample has the wrong dimension");
      x.push_back(Eigen::Map<const Vec>(v.data(), n));
    }
    return hermite_curve(kind == "star" ? CurveKind::Star : CurveKind::Base, s, t, x, doc.value("closed", false));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Input, std::string("malformed curve file: ") + e.what());
  }
}

class Runner {
 public:
  Runner(const Args& a, const std::string& command) : a_(a), command_(command) {}

  json execute() {
    const Structure s = resolve_structure(a_.structure);
    const int n = s.dim();
    const Vec p = a_.p.empty() ? Vec(Vec::Zero(n)) : parse_vec(a_.p, "p", n);
    json doc;
    doc["command"] = command_;
    doc["structure"] = s.name();
    doc["p"] = to_json(p);

    if (command_ == "check-structure") {
      const Vec q = a_.q.empty() ? p : parse_vec(a_.q, "q", n);
      const BracketCheck bc = check_bracket_generating(s, q, a_.depth);
      json r;
      r["n"] = n;
      r["m"] = s.n_fields();
      r["q"] = to_json(q);
      r["depth"] = a_.depth;
      r["bracket_generating"] = bc.ok;
      r["achieved_rank"] = bc.achieved_rank;
      r["definition"] = json::parse(structure_to_json(s).dump());
      doc["result"] = r;
      return doc;
    }

    Vec lam0;
    if (command_ != "locus") {
      lam0 = parse_vec(a_.lam0, "lam0", n);
      if (a_.energy_normalize) {
        const auto v = normalize_energy(s, p, lam0, 0.5);
        require(v.has_value(), ErrorKind::Input, "--energy-normalize: H(p, lam0) vanishes");
        lam0 = *v;
      }
      doc["lam0"] = to_json(lam0);
    }
    json r;

    if (command_ == "geodesic") {
      const double tol = tolerance(a_, 1e-10);
      const auto traj = integrate_extremal(s, p, lam0, a_.T, tol);
      const PhasePoint end = traj.at(a_.T);
      doc["T"] = a_.T;
      doc["tol"] = tol;
      r["q"] = to_json(end.q);
      r["lam"] = to_json(end.lam);
      r["energy"] = traj.energy;
      r["max_energy_drift"] = traj.max_energy_drift;
      r["steps"] = traj.samples.size();
      if (!a_.csv.empty()) {
        auto f = open_csv(a_.csv);
        write_trajectory_csv(f, traj);
        r["csv"] = a_.csv;
      }
    } else if (command_ == "jacobian") {
      const double tol = tolerance(a_, 1e-12);
      require(a_.t > 0, ErrorKind::Domain, "--t must be positive");
      const FlowJacobian fj = flow_with_jacobian(s, p, lam0, a_.t, tol);
      doc["t"] = a_.t;
      doc["tol"] = tol;
      r["q"] = to_json(fj.q);
      r["lam"] = to_json(fj.lam);
      r["M"] = to_json(fj.M);
      r["D"] = fj.M.determinant();
      r["det_exp"] = fj.M.determinant() / std::pow(a_.t, n);
      if (!a_.csv.empty()) {
        const auto track = integrate_variational(s, p, lam0, a_.t, tol);
        auto f = open_csv(a_.csv);
        write_trajectory_csv(f, track.trajectory, &track);
        r["csv"] = a_.csv;
      }
    } else if (command_ == "conjugate") {
      const double tol = tolerance(a_, 1e-10);
      const double t_max = a_.t_max.value_or(10.0);
      require(t_max > a_.t_min && a_.t_min > 0, ErrorKind::Domain, "need 0 < t-min < t-max");
      const auto track = integrate_variational(s, p, lam0, t_max, tol);
      const auto search = find_conjugate_times(track, a_.t_min, a_.tol_det);
      doc["t_min"] = a_.t_min;
      doc["t_max"] = t_max;
      doc["tol"] = tol;
      doc["tol_det"] = a_.tol_det;
      r["conjugate"] = json::array();
      for (const auto& rec : search.records) {
        json j = record_json(rec);
        if (a_.regularity_rays > 0 && search.abnormal.empty()) {
          const Vec conj = rec.t_star * lam0;
          j["regularity"] = regularity_json(
              check_regular(s, p, conj, a_.regularity_radius * conj.norm(), a_.regularity_rays, a_.seed,
                            RegularityOptions{tol, a_.tol_det}));
        }
        r["conjugate"].push_back(j);
      }
      r["abnormal"] = intervals_json(search.abnormal);
      if (!a_.csv.empty()) {
        auto f = open_csv(a_.csv);
        write_trajectory_csv(f, track.trajectory, &track);
        r["csv"] = a_.csv;
      }
    } else if (command_ == "order") {
      const double tol = tolerance(a_, 1e-11);
      double t_star = 0.0;
      if (a_.t_star) {
        t_star = *a_.t_star;
      } else {
        const auto fc = first_conjugate(s, p, lam0, a_.t_max.value_or(10.0), tol, a_.tol_det);
        require(fc.record.has_value(), ErrorKind::Precondition, "no conjugate time along the ray");
        t_star = fc.record->t_star;
      }
      require(t_star > 0, ErrorKind::Domain, "--t-star must be positive");
      const auto track = integrate_variational(s, p, lam0, t_star * (1.0 + 2 * a_.window), tol);
      const auto est = estimate_order(track, t_star, a_.window * t_star, a_.max_order);
      doc["tol"] = tol;
      doc["window"] = a_.window;
      r["t_star"] = t_star;
      r["order"] = order_json(est.order);
      r["leading_coeff"] = est.leading_coeff;
      r["slope"] = est.slope;
      r["derivative_order"] = order_json(est.derivative_order);
    } else if (command_ == "invert") {
      FieldInverse fi;
      fi.p = p;
      fi.t0 = a_.t;
      fi.lam_anchor = lam0;
      fi.flow_tol = tolerance(a_, 1e-13);
      const Vec q = parse_vec(a_.q, "q", n);
      const Vec guess = a_.guess.empty() ? lam0 : parse_vec(a_.guess, "guess", n);
      const Inversion inv = invert_field_detail(s, fi, a_.t, q, guess);
      doc["t"] = a_.t;
      doc["q"] = to_json(q);
      doc["guess"] = to_json(guess);
      r["lam0"] = to_json(inv.lam0);
      r["lam_t"] = to_json(inv.lam_t);
      r["residual"] = inv.residual;
      r["iterations"] = inv.iterations;
    } else if (command_ == "hilbert-star") {
      const double tol = tolerance(a_, 1e-12);
      AugmentedCurve c;
      if (!a_.curve.empty()) {
        c = load_curve(a_.curve, n);
        doc["curve"] = a_.curve;
      } else {
        const auto [t0, t1] = parse_pair(a_.ray.empty() ? "0,1" : a_.ray, "ray");
        c = star_ray(lam0, t0, t1);
        doc["ray"] = json::array({t0, t1});
      }
      doc["n_quad"] = a_.n_quad;
      r = quadrature_json(hilbert_star(s, p, c, a_.n_quad, tol));
    } else if (command_ == "hilbert-base") {
      FieldInverse fi;
      fi.p = p;
      fi.t0 = a_.t0;
      fi.lam_anchor = lam0;
      fi.flow_tol = tolerance(a_, 1e-13);
      AugmentedCurve c;
      std::optional<ExtremalTrajectory> traj;
      if (!a_.curve.empty()) {
        c = load_curve(a_.curve, n);
        doc["curve"] = a_.curve;
      } else {
        const auto [t0, t1] = parse_pair(a_.graph.empty() ? "0.5,1" : a_.graph, "graph");
        require(t0 > 0, ErrorKind::Domain, "graph curves start at t > 0");
        traj = integrate_extremal(s, p, lam0, t1, 1e-12);
        c = graph_curve(*traj, t0, t1);
        fi.lam_anchor = lam0;
        doc["graph"] = json::array({t0, t1});
      }
      doc["t0"] = a_.t0;
      doc["n_quad"] = a_.n_quad;
      r = quadrature_json(hilbert_base(s, p, c, fi, a_.n_quad));
    } else if (command_ == "gauss") {
      require(n >= 2, ErrorKind::Input, "gauss needs n >= 2");
      const auto [s0, s1] = parse_pair(a_.s_range, "s-range");
      // Family rotating the first two covector components of lam0.
      auto family = [lam0](double sv) {
        Vec v = lam0;
        v[0] = std::cos(sv) * lam0[0] - std::sin(sv) * lam0[1];
        v[1] = std::sin(sv) * lam0[0] + std::cos(sv) * lam0[1];
        return v;
      };
      const auto g = gauss_defect(s, p, family, a_.t, s0, s1, a_.samples, a_.h, tolerance(a_, 1e-12));
      doc["t"] = a_.t;
      doc["s_range"] = json::array({s0, s1});
      doc["fd_step"] = a_.h;
      r["max_defect"] = g.max_defect;
      r["s"] = g.s;
      r["defect"] = g.defect;
    } else if (command_ == "locus") {
      const double t_max = a_.t_max.value_or(4.0);
      LocusOptions lo;
      lo.tol = tolerance(a_, 1e-10);
      lo.tol_det = a_.tol_det;
      lo.regularity_rays = a_.regularity_rays;
      lo.seed = a_.seed;
      const LocusSlice slice = locus_slice(s, p, a_.energy, a_.n1, a_.n2, t_max, lo);
      doc["energy"] = a_.energy;
      doc["grid"] = json::array({slice.grid_shape[0], slice.grid_shape[1]});
      doc["t_max"] = t_max;
      doc["seed"] = a_.seed;
      r["entries"] = json::array();
      for (const auto& e : slice.entries) {
        json j;
        j["lam0"] = to_json(e.lam0);
        j["t_conj"] = e.t_conj ? json(*e.t_conj) : json(nullptr);
        j["order"] = order_json(e.order);
        j["locus_point"] = e.locus_point ? to_json(*e.locus_point) : json(nullptr);
        j["regular"] = to_string(e.regular);
        j["delta_signs"] = json::array({e.delta_signs[0], e.delta_signs[1]});
        j["delta_values"] = json::array({e.delta_values[0], e.delta_values[1]});
        j["delta_at_locus"] = e.delta_at_locus;
        j["abnormal"] = e.abnormal;
        j["note"] = e.note;
        r["entries"].push_back(j);
      }
      if (!a_.csv.empty()) {
        auto f = open_csv(a_.csv);
        f << "index,t_conj,order";
        for (int k = 0; k < n; ++k) f << ",lam" << k + 1;
        for (int k = 0; k < n; ++k) f << ",x" << k + 1;
        f << ",abnormal\n";
        for (std::size_t i = 0; i < slice.entries.size(); ++i) {
          const auto& e = slice.entries[i];
          f << i << ',' << (e.t_conj ? format_number(*e.t_conj) : "") << ','
            << (e.order ? std::to_string(*e.order) : "");
          for (int k = 0; k < n; ++k) f << ',' << format_number(e.lam0[k]);
          for (int k = 0; k < n; ++k) f << ',' << (e.locus_point ? format_number((*e.locus_point)[k]) : "");
          f << ',' << (e.abnormal ? 1 : 0) << '\n';
        }
        r["csv"] = a_.csv;
      }
    } else if (command_ == "witness") {
      const double radius = a_.radius.value_or(0.1);
      const int budget = a_.budget.value_or(10000);
      const WitnessResult w = injectivity_witness(s, p, lam0, radius, budget, a_.seed);
      doc["radius"] = radius;
      doc["budget"] = budget;
      doc["seed"] = a_.seed;
      r["found"] = w.found;
      r["pair"] = witness_pair_json(w.pair);
      r["samples"] = w.samples;
      r["max_gap"] = 1e-8;
      r["min_separation"] = 1e-6;
      if (!w.found) {
        r["note"] = w.note;
        doc["result"] = r;
        not_found_ = "no injectivity witness within budget";
        return doc;
      }
    } else if (command_ == "cut") {
      const double t_max = a_.t_max.value_or(4.0);
      const auto [g1, g2] = parse_pair(a_.grid, "grid");
      CutOptions co;
      co.grid_n1 = static_cast<int>(g1);
      co.grid_n2 = static_cast<int>(g2);
      if (a_.tol) co.tol = *a_.tol;
      const CutRecord rec = cut_time(s, p, lam0, t_max, co);
      doc["t_max"] = t_max;
      doc["grid"] = json::array({co.grid_n1, co.grid_n2});
      doc["action_tol"] = co.tol;
      doc["time_tol"] = co.time_tol;
      r["t_cut"] = number_or_inf(rec.t_cut);
      r["competitor"] = rec.competitor ? to_json(*rec.competitor) : json(nullptr);
      r["competitor_advantage"] = rec.competitor_advantage;
      r["t_first_conjugate"] = rec.t_first_conjugate ? json(*rec.t_first_conjugate) : json(nullptr);
      r["in_cut1"] = rec.in_cut1;
      r["partner"] = rec.partner ? to_json(*rec.partner) : json(nullptr);
      r["ladder"] = rec.ladder;
      r["shots"] = rec.shots;
    } else if (command_ == "cut1") {
      const double radius = a_.radius.value_or(0.1);
      const int budget = a_.budget.value_or(200);
      const Cut1Result res = cut1_pairs(s, p, lam0, radius, budget, a_.seed);
      doc["radius"] = radius;
      doc["budget"] = budget;
      doc["seed"] = a_.seed;
      auto pair_json = [](const Cut1Pair& c) {
        json j;
        j["lam1"] = to_json(c.lam1);
        j["lam2"] = to_json(c.lam2);
        j["image_gap"] = c.image_gap;
        j["separation"] = c.separation;
        j["verified"] = c.verified;
        return j;
      };
      r["found"] = res.found;
      r["pairs"] = json::array();
      for (const auto& c : res.pairs) r["pairs"].push_back(pair_json(c));
      r["samples"] = res.samples;
      if (!res.found) {
        r["best"] = res.best ? pair_json(*res.best) : json(nullptr);
        r["note"] = res.note;
        doc["result"] = r;
        not_found_ = "no verified Cut1 pair";
        return doc;
      }
    } else if (command_ == "synthetic") {
      require(a_.kind == "one-sided" || a_.kind == "symmetric", ErrorKind::Input,
              "--kind must be 'one-sided' or 'symmetric'");
      const int budget = a_.budget.value_or(10000);
      const auto kind = a_.kind == "one-sided" ? SyntheticKind::OneSided : SyntheticKind::Symmetric;
      const SyntheticResult res = synthetic_witness(s, p, lam0, kind, a_.levels, a_.seed, a_.r0, budget);
      doc["kind"] = a_.kind;
      doc["levels"] = a_.levels;
      doc["r0"] = a_.r0;
      doc["budget"] = budget;
      doc["seed"] = a_.seed;
      r["complete"] = res.complete;
      r["levels"] = json::array();
      for (const auto& L : res.levels) {
        json j;
        j["radius"] = L.radius;
        j["base"] = to_json(L.base);
        j["lam_center"] = to_json(L.lam_center);
        j["endpoint"] = to_json(L.endpoint);
        j["pair"] = witness_pair_json(L.pair);
        j["d_geo_1"] = L.d_geo_1;
        j["d_geo_2"] = L.d_geo_2;
        j["d_geo_pair"] = L.d_geo_pair;
        r["levels"].push_back(j);
      }
      r["note"] = res.note;
    }
    doc["result"] = r;
    return doc;
  }

  const std::string& not_found() const { return not_found_; }

 private:
  const Args& a_;
  std::string command_;
  std::string not_found_;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Input:
    case ErrorKind::Domain:
    case ErrorKind::Precondition: return kExitInput;
    case ErrorKind::NotFound: return kExitNotFound;
    default: return kExitNumeric;
  }
}

void emit_error(std::ostream& err, const std::string& kind, const std::string& message,
                std::optional<double> last_valid_time = std::nullopt) {
  json e;
  e["kind"] = kind;
  e["message"] = message;
  if (last_valid_time) e["last_valid_time"] = *last_valid_time;
  json doc;
  doc["error"] = e;
  err << dump_json(doc) << '\n';
}

// Expands "--config file.json" into "--key value" arguments for the selected subcommand.
std::vector<std::string> expand_config(const std::vector<std::string>& argv) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (argv[i] != "--config") {
      out.push_back(argv[i]);
      continue;
    }
    require(i + 1 < argv.size(), ErrorKind::Input, "--config needs a file");
    std::ifstream in(argv[++i]);
    require(in.good(), ErrorKind::Input, "cannot read config '" + argv[i] + "'");
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Input, std::string("cannot parse config: ") + e.what());
    }
    require(doc.is_object(), ErrorKind::Input, "config must hold a JSON object");
    for (const auto& [key, value] : doc.items()) {
      if (value.is_boolean()) {
        if (value.get<bool>()) out.push_back("--" + key);
        continue;
      }
      std::string text;
      if (value.is_array()) {
        for (const auto& x : value) {
          if (!text.empty()) text += ',';
          text += x.is_string() ? x.get<std::string>() : format_number(x.get<double>());
        }
      } else if (value.is_string()) {
        text = value.get<std::string>();
      } else if (value.is_number_integer()) {
        text = std::to_string(value.get<long long>());
      } else if (value.is_number()) {
        text = format_number(value.get<double>());
      } else {
        throw Error(ErrorKind::Input, "config key '" + key + "' has an unsupported value");
      }
      out.push_back("--" + key + "=" + text);
    }
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& argv_in, std::ostream& out, std::ostream& err) {
  Args a;
  std::string config_path;
  CLI::App app{"Sub-Riemannian numerical laboratory"};
  app.name("subriem");
  app.require_subcommand(1);

  const std::vector<std::string> names = {"geodesic", "jacobian",  "conjugate", "order",     "locus",
                                          "hilbert-star", "hilbert-base", "gauss", "invert", "witness",
                                          "cut",      "cut1",      "synthetic", "check-structure"};
  const std::vector<std::string> help = {
      "Integrate a normal extremal on [0, T]",
      "Endpoint and dq/dlam0 at time t",
      "Conjugate times along a ray",
      "Order of a conjugate time",
      "Conjugate locus over a grid of unit-energy covectors",
      "Hilbert integral along a covector curve",
      "Hilbert integral along a base curve via field inversion",
      "Gauss-lemma defect along a rotation family",
      "Invert the field of extremals at (t, q)",
      "Non-injectivity witness near a conjugate covector",
      "Cut time by shooting",
      "Cut1 pairs near a cut covector",
      "Synthetic conjugacy sequence",
      "Bracket-generating check of a structure"};

  for (std::size_t k = 0; k < names.size(); ++k) {
    const std::string& name = names[k];
    CLI::App* sub = app.add_subcommand(name, help[k]);
    sub->add_option("--structure", a.structure, "Builtin name or structure file")->required();
    sub->add_option("--p", a.p, "Base point, comma separated (default origin)");
    sub->add_option("--config", config_path, "JSON file of option values");
    if (name == "check-structure") {
      sub->add_option("--q", a.q, "Evaluation point (default p)");
      sub->add_option("--depth", a.depth, "Bracket depth")->check(CLI::Range(1, 8));
      continue;
    }
    sub->add_option("--tol", a.tol, "Tolerance");
    if (name != "locus") {
      sub->add_option("--lam0", a.lam0, "Covector, comma separated")->required();
      sub->add_flag("--energy-normalize", a.energy_normalize, "Rescale lam0 to H = 1/2");
    }
    if (name == "geodesic") {
      sub->add_option("--T", a.T, "Final time")->check(CLI::PositiveNumber);
      sub->add_option("--csv", a.csv, "Write the trajectory as CSV");
    } else if (name == "jacobian") {
      sub->add_option("--t", a.t, "Time");
      sub->add_option("--csv", a.csv, "Write q, lam and D along [0, t] as CSV");
    } else if (name == "conjugate") {
      sub->add_option("--t-min", a.t_min, "Lower end of the search interval");
      sub->add_option("--t-max", a.t_max, "Upper end of the search interval (default 10)");
      sub->add_option("--tol-det", a.tol_det, "Determinant threshold");
      sub->add_option("--regularity-rays", a.regularity_rays, "Rays for the regularity check (0 skips)");
      sub->add_option("--regularity-radius", a.regularity_radius, "Relative ball radius for the regularity check");
      sub->add_option("--seed", a.seed, "Seed");
      sub->add_option("--csv", a.csv, "Write q, lam and D along the ray as CSV");
    } else if (name == "order") {
      sub->add_option("--t-star", a.t_star, "Conjugate time (default: first along the ray)");
      sub->add_option("--t-max", a.t_max, "Search horizon when --t-star is absent (default 10)");
      sub->add_option("--window", a.window, "Relative window around t*")->check(CLI::PositiveNumber);
      sub->add_option("--max-order", a.max_order, "Largest order tested")->check(CLI::Range(1, 12));
      sub->add_option("--tol-det", a.tol_det, "Determinant threshold");
    } else if (name == "locus") {
      sub->add_option("--energy", a.energy, "Energy level")->check(CLI::PositiveNumber);
      sub->add_option("--n1", a.n1, "Polar grid size")->check(CLI::Range(1, 4096));
      sub->add_option("--n2", a.n2, "Azimuthal grid size")->check(CLI::Range(1, 4096));
      sub->add_option("--t-max", a.t_max, "Horizon (default 4)");
      sub->add_option("--tol-det", a.tol_det, "Determinant threshold");
      sub->add_option("--regularity-rays", a.regularity_rays, "Rays for regularity checks (0 skips)");
      sub->add_option("--seed", a.seed, "Seed");
      sub->add_option("--csv", a.csv, "Write locus points as CSV");
    } else if (name == "hilbert-star") {
      sub->add_option("--ray", a.ray, "t0,t1 for the ray curve (default 0,1)");
      sub->add_option("--curve", a.curve, "Curve file");
      sub->add_option("--n-quad", a.n_quad, "Quadrature panels")->check(CLI::Range(1, 4096));
    } else if (name == "hilbert-base") {
      sub->add_option("--graph", a.graph, "t0,t1 for the graph of the extremal of lam0 (default 0.5,1)");
      sub->add_option("--curve", a.curve, "Curve file");
      sub->add_option("--t0", a.t0, "Time of the field anchor lam0");
      sub->add_option("--n-quad", a.n_quad, "Quadrature panels")->check(CLI::Range(1, 4096));
    } else if (name == "gauss") {
      sub->add_option("--t", a.t, "Time");
      sub->add_option("--s-range", a.s_range, "s0,s1 of the rotation angle");
      sub->add_option("--samples", a.samples, "Sample count")->check(CLI::Range(2, 100000));
      sub->add_option("--fd-step", a.h, "Finite-difference step")->check(CLI::PositiveNumber);
    } else if (name == "invert") {
      sub->add_option("--t", a.t, "Time");
      sub->add_option("--q", a.q, "Target point")->required();
      sub->add_option("--guess", a.guess, "Initial covector (default lam0)");
    } else if (name == "witness" || name == "cut1") {
      sub->add_option("--radius", a.radius, "Ball radius")->check(CLI::PositiveNumber);
      sub->add_option("--budget", a.budget, "Sample budget")->check(CLI::Range(2, 1000000));
      sub->add_option("--seed", a.seed, "Seed");
    } else if (name == "cut") {
      sub->add_option("--t-max", a.t_max, "Horizon (default 4)");
      sub->add_option("--grid", a.grid, "Shooting grid n1,n2");
    } else if (name == "synthetic") {
      sub->add_option("--kind", a.kind, "one-sided or symmetric");
      sub->add_option("--levels", a.levels, "Number of radii")->check(CLI::Range(1, 20));
      sub->add_option("--r0", a.r0, "Initial radius")->check(CLI::PositiveNumber);
      sub->add_option("--budget", a.budget, "Sample budget per level")->check(CLI::Range(2, 1000000));
      sub->add_option("--seed", a.seed, "Seed");
    }
  }

  try {
    std::vector<std::string> args = expand_config(argv_in);
    if (!args.empty()) args.erase(args.begin());
    std::reverse(args.begin(), args.end());
    try {
      app.parse(args);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      emit_error(err, "INPUT_ERROR", e.what());
      return kExitInput;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    Runner runner(a, command);
    const json doc = runner.execute();
    out << dump_json(doc) << '\n';
    if (!runner.not_found().empty()) {
      emit_error(err, "NOT_FOUND", runner.not_found());
      return kExitNotFound;
    }
    return kExitOk;
  } catch (const IntegrationFailure& e) {
    emit_error(err, to_string(e.kind()), e.what(), e.last_valid_time());
    return kExitNumeric;
  } catch (const Error& e) {
    emit_error(err, to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    emit_error(err, "INPUT_ERROR", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    emit_error(err, "INTERNAL_ERROR", e.what());
    return kExitNumeric;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace subriem
