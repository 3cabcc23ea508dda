#include "detectrack/weights_io.hpp"

#include "detectrack/kitti_io.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace detectrack {

std::string weights_to_json(const ParamList& params, int indent) {
  nlohmann::ordered_json root = nlohmann::ordered_json::object();
  for (const auto& b : params) {
    if (root.contains(b.name)) throw std::invalid_argument("weights: duplicate block " + b.name);
    nlohmann::ordered_json values = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < b.size; ++i) values.push_back(b.data[i]);
    root[b.name] = {{"shape", b.shape}, {"values", std::move(values)}};
  }
  return root.dump(indent);
}

void weights_from_json(const std::string& text, const ParamList& params,
                       const std::string& source) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(source + ": " + e.what());
  }
  if (!root.is_object()) throw ParseError(source + ": expected a JSON object");
  std::set<std::string> expected;
  for (const auto& b : params) {
    expected.insert(b.name);
    if (!root.contains(b.name)) {
      throw std::invalid_argument(source + ": missing parameter block " + b.name);
    }
    const auto& entry = root.at(b.name);
    std::vector<Eigen::Index> shape;
    std::vector<double> values;
    try {
      shape = entry.at("shape").get<std::vector<Eigen::Index>>();
      values = entry.at("values").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source + ": " + b.name + ": " + e.what());
    }
    if (shape != b.shape || static_cast<Eigen::Index>(values.size()) != b.size) {
      throw std::invalid_argument(source + ": shape mismatch for " + b.name);
    }
    std::copy(values.begin(), values.end(), b.data);
  }
  for (const auto& [key, _] : root.items()) {
    if (!expected.count(key)) throw std::invalid_argument(source + ": unknown parameter block " + key);
  }
}

void save_weights(const std::string& path, const ParamList& params) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << weights_to_json(params) << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

void load_weights(const std::string& path, const ParamList& params) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  weights_from_json(ss.str(), params, path);
}

}  // namespace detectrack
