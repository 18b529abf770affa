#include "subriem/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "subriem/errors.hpp"

namespace subriem {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

void write_string(std::ostringstream& os, const std::string& s) {
  // nlohmann's own escaping for strings.
  os << nlohmann::json(s).dump();
}

void write(std::ostringstream& os, const nlohmann::ordered_json& j, int indent, int level) {
  const auto newline = [&](int lvl) {
    if (indent < 0) return;
    os << '\n' << std::string(static_cast<std::size_t>(indent * lvl), ' ');
  };
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',';
        first = false;
        newline(level + 1);
        write_string(os, it.key());
        os << (indent < 0 ? ":" : ": ");
        write(os, it.value(), indent, level + 1);
      }
      newline(level);
      os << '}';
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& e : j) flat = flat && !e.is_structured();
      os << '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) os << (flat && indent >= 0 ? ", " : ",");
        first = false;
        if (!flat) newline(level + 1);
        write(os, e, indent, level + 1);
      }
      if (!flat) newline(level);
      os << ']';
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double x = j.get<double>();
      if (std::isfinite(x)) {
        os << format_number(x);
      } else {
        os << '"' << format_number(x) << '"';
      }
      return;
    }
    default:
      os << j.dump();
  }
}

}  // namespace

std::string dump_json(const nlohmann::ordered_json& doc, int indent) {
  std::ostringstream os;
  write(os, doc, indent, 0);
  return os.str();
}

nlohmann::ordered_json to_json(const Vec& v) {
  auto arr = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

nlohmann::ordered_json to_json(const Mat& m) {
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Vec vec_from_json(const nlohmann::ordered_json& j) {
  require(j.is_array(), ErrorKind::Input, "expected a numeric array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), ErrorKind::Input, "expected a numeric array");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

}  // namespace subriem
