#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subriem/types.hpp"

namespace subriem {

/// Shortest "%.17g" rendering; non-finite values become "nan", "inf", "-inf".
std::string format_number(double x);

/// Serializes a JSON document with every floating-point number at 17 significant digits.
/// Object keys keep their insertion order as stored by nlohmann::ordered_json.
std::string dump_json(const nlohmann::ordered_json& doc, int indent = 2);

nlohmann::ordered_json to_json(const Vec& v);
nlohmann::ordered_json to_json(const Mat& m);
Vec vec_from_json(const nlohmann::ordered_json& j);

}  // namespace subriem
