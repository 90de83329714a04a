#pragma once

#include <map>
#include <string>
#include <vector>

namespace recfair {

enum class FeatureKind { Numeric, Categorical };

// One raw column of a tabular dataset. Numeric features carry the (min, max)
// used for min-max scaling; categorical features carry the ordered category
// list used for one-hot encoding. Sensitive features are routed to the
// sensitive table and never enter the encoded model-input matrix; sensitive
// numerics are binned at `bin_threshold` ("<=t" / ">t") before routing.
struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  bool is_mutable = true;
  bool sensitive = false;
  double min = 0.0;
  double max = 0.0;
  std::vector<std::string> categories;
  double bin_threshold = 30.0;
};

struct FeatureSchema {
  std::string label;
  std::vector<FeatureSpec> features;

  // Throws std::invalid_argument on a malformed schema: duplicate names,
  // empty or duplicated category lists, or min >= max on a non-sensitive
  // numeric feature (constant columns are rejected).
  void validate() const;

  // Width of the encoded model-input vector (non-sensitive features only;
  // one column per numeric, one per category for categoricals).
  int encoded_width() const;

  // Column names of the encoded matrix, e.g. "age", "workclass=Private".
  std::vector<std::string> encoded_names() const;

  // Per encoded column: may a recourse method change it.
  std::vector<bool> mutability_mask() const;

  std::vector<std::string> sensitive_names() const;

  const FeatureSpec* find(const std::string& name) const;
};

std::string schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const std::string& text);
FeatureSchema load_schema(const std::string& path);
void save_schema(const FeatureSchema& schema, const std::string& path);

// An (attribute, value) list identifying a sensitive group; intersections
// are lists of length > 1. Ordered and comparable so group enumerations are
// deterministic.
struct GroupKey {
  std::vector<std::pair<std::string, std::string>> parts;

  std::string to_string() const;  // "race=White&gender=Male"
  bool operator==(const GroupKey&) const = default;
  bool operator<(const GroupKey& other) const { return parts < other.parts; }
};

}  // namespace recfair
