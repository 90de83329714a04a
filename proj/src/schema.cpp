#include "recfair/schema.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace recfair {

void FeatureSchema::validate() const {
  if (label.empty()) throw std::invalid_argument("schema: label column name is empty");
  std::set<std::string> seen;
  for (const auto& f : features) {
    if (f.name.empty()) throw std::invalid_argument("schema: empty feature name");
    if (!seen.insert(f.name).second)
      throw std::invalid_argument("schema: duplicate feature '" + f.name + "'");
    if (f.name == label)
      throw std::invalid_argument("schema: feature '" + f.name + "' collides with label");
    if (f.kind == FeatureKind::Categorical) {
      if (f.categories.empty())
        throw std::invalid_argument("schema: feature '" + f.name + "' has no categories");
      std::set<std::string> cats(f.categories.begin(), f.categories.end());
      if (cats.size() != f.categories.size())
        throw std::invalid_argument("schema: duplicate category in '" + f.name + "'");
    } else if (!f.sensitive && !(f.min < f.max)) {
      throw std::invalid_argument("schema: numeric feature '" + f.name +
                                  "' needs min < max (constant columns are rejected)");
    }
  }
}

int FeatureSchema::encoded_width() const {
  int w = 0;
  for (const auto& f : features) {
    if (f.sensitive) continue;
    w += f.kind == FeatureKind::Numeric ? 1 : static_cast<int>(f.categories.size());
  }
  return w;
}

std::vector<std::string> FeatureSchema::encoded_names() const {
  std::vector<std::string> names;
  for (const auto& f : features) {
    if (f.sensitive) continue;
    if (f.kind == FeatureKind::Numeric) {
      names.push_back(f.name);
    } else {
      for (const auto& c : f.categories) names.push_back(f.name + "=" + c);
    }
  }
  return names;
}

std::vector<bool> FeatureSchema::mutability_mask() const {
  std::vector<bool> mask;
  for (const auto& f : features) {
    if (f.sensitive) continue;
    const int cols = f.kind == FeatureKind::Numeric ? 1 : static_cast<int>(f.categories.size());
    for (int i = 0; i < cols; ++i) mask.push_back(f.is_mutable);
  }
  return mask;
}

std::vector<std::string> FeatureSchema::sensitive_names() const {
  std::vector<std::string> names;
  for (const auto& f : features) {
    if (f.sensitive) names.push_back(f.name);
  }
  return names;
}

const FeatureSpec* FeatureSchema::find(const std::string& name) const {
  for (const auto& f : features) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::string schema_to_json(const FeatureSchema& schema) {
  nlohmann::ordered_json j;
  j["label"] = schema.label;
  j["features"] = nlohmann::ordered_json::array();
  for (const auto& f : schema.features) {
    nlohmann::ordered_json jf;
    jf["name"] = f.name;
    jf["kind"] = f.kind == FeatureKind::Numeric ? "numeric" : "categorical";
    jf["mutable"] = f.is_mutable;
    jf["sensitive"] = f.sensitive;
    if (f.kind == FeatureKind::Numeric) {
      jf["min"] = f.min;
      jf["max"] = f.max;
      if (f.sensitive) jf["bin_threshold"] = f.bin_threshold;
    } else {
      jf["categories"] = f.categories;
    }
    j["features"].push_back(jf);
  }
  return j.dump(2);
}

FeatureSchema schema_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("schema: invalid JSON: ") + e.what());
  }
  FeatureSchema schema;
  schema.label = j.at("label").get<std::string>();
  for (const auto& jf : j.at("features")) {
    FeatureSpec f;
    f.name = jf.at("name").get<std::string>();
    const auto kind = jf.at("kind").get<std::string>();
    if (kind == "numeric") f.kind = FeatureKind::Numeric;
    else if (kind == "categorical") f.kind = FeatureKind::Categorical;
    else throw std::invalid_argument("schema: unknown kind '" + kind + "'");
    f.is_mutable = jf.value("mutable", true);
    f.sensitive = jf.value("sensitive", false);
    if (f.kind == FeatureKind::Numeric) {
      f.min = jf.value("min", 0.0);
      f.max = jf.value("max", 0.0);
      f.bin_threshold = jf.value("bin_threshold", 30.0);
    } else {
      f.categories = jf.at("categories").get<std::vector<std::string>>();
    }
    schema.features.push_back(std::move(f));
  }
  schema.validate();
  return schema;
}

FeatureSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schema file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return schema_from_json(ss.str());
}

void save_schema(const FeatureSchema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write schema file: " + path);
  out << schema_to_json(schema) << '\n';
}

std::string GroupKey::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) s += "&";
    s += parts[i].first + "=" + parts[i].second;
  }
  return s;
}

}  // namespace recfair
