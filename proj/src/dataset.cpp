#include "recfair/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "recfair/csv.hpp"
#include "recfair/rng.hpp"

namespace recfair {

namespace {

const std::set<std::string> kMissingTokens = {"", "?", "NA"};

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Dataset::Dataset(Matrix X, Vector y, std::vector<std::vector<std::string>> sensitive_columns,
                 FeatureSchema schema, std::string name)
    : X_(std::move(X)),
      y_(std::move(y)),
      sensitive_values_(std::move(sensitive_columns)),
      schema_(std::move(schema)),
      name_(std::move(name)) {
  sensitive_names_ = schema_.sensitive_names();
  if (sensitive_names_.size() != sensitive_values_.size())
    throw std::invalid_argument("dataset: sensitive table width does not match schema");
  if (X_.rows() != y_.size())
    throw std::invalid_argument("dataset: X and y row counts disagree");
  for (const auto& col : sensitive_values_) {
    if (static_cast<Index>(col.size()) != X_.rows())
      throw std::invalid_argument("dataset: sensitive table row count disagrees with X");
  }
  for (Index i = 0; i < y_.size(); ++i) {
    if (y_[i] != 0.0 && y_[i] != 1.0)
      throw std::invalid_argument("dataset: labels must be 0 or 1");
  }
  if (X_.size() > 0 && (X_.minCoeff() < 0.0 || X_.maxCoeff() > 1.0))
    throw std::invalid_argument("dataset: encoded features must lie in [0,1]");
}

Dataset::Dataset(const Dataset& other)
    : X_(other.X_),
      y_(other.y_),
      sensitive_names_(other.sensitive_names_),
      sensitive_values_(other.sensitive_values_),
      schema_(other.schema_),
      name_(other.name_),
      sensitive_reads_(other.sensitive_reads_.load()) {}

Dataset& Dataset::operator=(const Dataset& other) {
  if (this != &other) {
    X_ = other.X_;
    y_ = other.y_;
    sensitive_names_ = other.sensitive_names_;
    sensitive_values_ = other.sensitive_values_;
    schema_ = other.schema_;
    name_ = other.name_;
    sensitive_reads_.store(other.sensitive_reads_.load());
  }
  return *this;
}

Dataset::Dataset(Dataset&& other) noexcept
    : X_(std::move(other.X_)),
      y_(std::move(other.y_)),
      sensitive_names_(std::move(other.sensitive_names_)),
      sensitive_values_(std::move(other.sensitive_values_)),
      schema_(std::move(other.schema_)),
      name_(std::move(other.name_)),
      sensitive_reads_(other.sensitive_reads_.load()) {}

Dataset& Dataset::operator=(Dataset&& other) noexcept {
  if (this != &other) {
    X_ = std::move(other.X_);
    y_ = std::move(other.y_);
    sensitive_names_ = std::move(other.sensitive_names_);
    sensitive_values_ = std::move(other.sensitive_values_);
    schema_ = std::move(other.schema_);
    name_ = std::move(other.name_);
    sensitive_reads_.store(other.sensitive_reads_.load());
  }
  return *this;
}

const std::vector<std::string>& Dataset::sensitive_column(const std::string& attr) const {
  for (std::size_t i = 0; i < sensitive_names_.size(); ++i) {
    if (sensitive_names_[i] == attr) {
      sensitive_reads_.fetch_add(1, std::memory_order_relaxed);
      return sensitive_values_[i];
    }
  }
  throw std::invalid_argument("dataset: unknown sensitive attribute '" + attr + "'");
}

Dataset Dataset::subset(const std::vector<Index>& idx) const {
  Matrix X(static_cast<Index>(idx.size()), X_.cols());
  Vector y(static_cast<Index>(idx.size()));
  std::vector<std::vector<std::string>> s(sensitive_values_.size());
  for (auto& col : s) col.reserve(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Index i = idx[k];
    if (i < 0 || i >= rows()) throw std::out_of_range("dataset: subset index out of range");
    X.row(static_cast<Index>(k)) = X_.row(i);
    y[static_cast<Index>(k)] = y_[i];
    for (std::size_t c = 0; c < sensitive_values_.size(); ++c)
      s[c].push_back(sensitive_values_[c][static_cast<std::size_t>(i)]);
  }
  return Dataset(std::move(X), std::move(y), std::move(s), schema_, name_);
}

Dataset Dataset::with_labels(Vector y) const {
  return Dataset(X_, std::move(y), sensitive_values_, schema_, name_);
}

Dataset Dataset::with_features(Matrix X, FeatureSchema schema) const {
  return Dataset(std::move(X), y_, sensitive_values_, std::move(schema), name_);
}

std::string Dataset::fingerprint() const {
  std::uint64_t hx = 0xcbf29ce484222325ULL;
  for (Index j = 0; j < X_.cols(); ++j) {
    for (Index i = 0; i < X_.rows(); ++i) {
      const double v = X_(i, j);
      hx = fnv1a(&v, sizeof(v), hx);
    }
  }
  std::uint64_t hy = 0xcbf29ce484222325ULL;
  for (Index i = 0; i < y_.size(); ++i) {
    const double v = y_[i];
    hy = fnv1a(&v, sizeof(v), hy);
  }
  std::ostringstream os;
  os << "n=" << rows() << ",d=" << dim() << ",xhash=" << std::hex << hx << ",yhash=" << hy;
  return os.str();
}

Dataset load_csv(const std::string& path, const FeatureSchema& schema, LoadStats* stats) {
  schema.validate();
  const CsvTable table = read_csv(path);

  const int label_col = table.column(schema.label);
  if (label_col < 0)
    throw std::invalid_argument("load_csv: label column '" + schema.label + "' missing");
  std::vector<int> feat_col(schema.features.size());
  for (std::size_t f = 0; f < schema.features.size(); ++f) {
    feat_col[f] = table.column(schema.features[f].name);
    if (feat_col[f] < 0)
      throw std::invalid_argument("load_csv: column '" + schema.features[f].name + "' missing");
  }

  const int width = schema.encoded_width();
  const auto sens_names = schema.sensitive_names();
  std::vector<Eigen::RowVectorXd> xrows;
  std::vector<double> labels;
  std::vector<std::vector<std::string>> sens(sens_names.size());
  Index dropped = 0;

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    bool missing = false;
    for (std::size_t f = 0; f < schema.features.size() && !missing; ++f)
      missing = kMissingTokens.count(row.at(feat_col[f])) > 0;
    missing = missing || kMissingTokens.count(row.at(label_col)) > 0;
    if (missing) {
      ++dropped;
      continue;
    }

    const std::string& label_cell = row.at(label_col);
    if (label_cell != "0" && label_cell != "1") {
      double lv = 0.0;
      if (!parse_double(label_cell, lv) || (lv != 0.0 && lv != 1.0))
        throw std::runtime_error("load_csv: row " + std::to_string(r) +
                                 ": label '" + label_cell + "' is not binary");
    }
    double label_value = 0.0;
    parse_double(label_cell, label_value);

    Eigen::RowVectorXd x(width);
    int col = 0;
    std::vector<std::string> srow(sens_names.size());
    std::size_t si = 0;
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const FeatureSpec& spec = schema.features[f];
      const std::string& cell = row.at(feat_col[f]);
      if (spec.sensitive) {
        if (spec.kind == FeatureKind::Numeric) {
          double v = 0.0;
          if (!parse_double(cell, v))
            throw std::runtime_error("load_csv: row " + std::to_string(r) + ": cell '" +
                                     cell + "' in '" + spec.name + "' is not numeric");
          srow[si++] = v <= spec.bin_threshold ? "<=" + std::to_string(static_cast<long long>(spec.bin_threshold))
                                               : ">" + std::to_string(static_cast<long long>(spec.bin_threshold));
        } else {
          srow[si++] = cell;
        }
        continue;
      }
      if (spec.kind == FeatureKind::Numeric) {
        double v = 0.0;
        if (!parse_double(cell, v))
          throw std::runtime_error("load_csv: row " + std::to_string(r) + ": cell '" + cell +
                                   "' in '" + spec.name + "' is not numeric");
        const double scaled = (v - spec.min) / (spec.max - spec.min);
        x[col++] = std::clamp(scaled, 0.0, 1.0);
      } else {
        auto it = std::find(spec.categories.begin(), spec.categories.end(), cell);
        if (it == spec.categories.end())
          throw std::runtime_error("load_csv: row " + std::to_string(r) + ": unknown category '" +
                                   cell + "' for feature '" + spec.name + "'");
        for (std::size_t c = 0; c < spec.categories.size(); ++c)
          x[col++] = (static_cast<std::size_t>(it - spec.categories.begin()) == c) ? 1.0 : 0.0;
      }
    }
    xrows.push_back(std::move(x));
    labels.push_back(label_value);
    for (std::size_t c = 0; c < sens_names.size(); ++c) sens[c].push_back(srow[c]);
  }

  Matrix X(static_cast<Index>(xrows.size()), width);
  Vector y(static_cast<Index>(labels.size()));
  for (std::size_t i = 0; i < xrows.size(); ++i) {
    X.row(static_cast<Index>(i)) = xrows[i];
    y[static_cast<Index>(i)] = labels[i];
  }
  if (stats) {
    stats->rows_loaded = X.rows();
    stats->rows_dropped_missing = dropped;
  }

  std::string name = path;
  const auto slash = name.find_last_of('/');
  if (slash != std::string::npos) name = name.substr(slash + 1);
  return Dataset(std::move(X), std::move(y), std::move(sens), schema, name);
}

FeatureSchema infer_schema(const std::string& path,
                           const std::map<std::string, ColumnRole>& roles,
                           const std::map<std::string, bool>& mutability) {
  const CsvTable table = read_csv(path);
  if (table.rows.empty()) throw std::runtime_error("infer_schema: no data rows in " + path);

  for (const auto& col : table.header) {
    if (!roles.count(col))
      throw std::invalid_argument("infer_schema: no role given for column '" + col + "'");
  }

  FeatureSchema schema;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const std::string& name = table.header[c];
    const ColumnRole role = roles.at(name);
    if (role == ColumnRole::Ignore) continue;

    if (role == ColumnRole::Label) {
      if (!schema.label.empty())
        throw std::invalid_argument("infer_schema: two label columns");
      schema.label = name;
      std::set<std::string> values;
      for (const auto& row : table.rows) {
        if (kMissingTokens.count(row.at(c))) continue;
        values.insert(row.at(c));
      }
      for (const auto& v : values) {
        double lv = 0.0;
        if (!parse_double(v, lv) || (lv != 0.0 && lv != 1.0))
          throw std::invalid_argument("infer_schema: label column '" + name +
                                      "' has non-binary value '" + v + "'");
      }
      continue;
    }

    FeatureSpec spec;
    spec.name = name;
    spec.sensitive = role == ColumnRole::Sensitive;
    auto mut = mutability.find(name);
    if (mut != mutability.end()) spec.is_mutable = mut->second;
    if (spec.sensitive) spec.is_mutable = false;

    // A sensitive column is numeric if every non-missing cell parses; it then
    // gets binned rather than scaled.
    bool numeric = role == ColumnRole::Numeric;
    if (role == ColumnRole::Sensitive) {
      numeric = true;
      for (const auto& row : table.rows) {
        double v = 0.0;
        if (kMissingTokens.count(row.at(c))) continue;
        if (!parse_double(row.at(c), v)) {
          numeric = false;
          break;
        }
      }
    }

    if (numeric) {
      spec.kind = FeatureKind::Numeric;
      bool any = false;
      double lo = 0.0, hi = 0.0;
      for (const auto& row : table.rows) {
        if (kMissingTokens.count(row.at(c))) continue;
        double v = 0.0;
        if (!parse_double(row.at(c), v))
          throw std::runtime_error("infer_schema: non-numeric cell '" + row.at(c) +
                                   "' in numeric column '" + name + "'");
        if (!any) {
          lo = hi = v;
          any = true;
        } else {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      if (!any) throw std::runtime_error("infer_schema: column '" + name + "' has no values");
      if (!spec.sensitive && lo == hi)
        throw std::runtime_error("infer_schema: numeric column '" + name + "' is constant");
      spec.min = lo;
      spec.max = hi;
    } else {
      spec.kind = FeatureKind::Categorical;
      std::set<std::string> values;
      for (const auto& row : table.rows) {
        if (kMissingTokens.count(row.at(c))) continue;
        values.insert(row.at(c));
      }
      spec.categories.assign(values.begin(), values.end());
    }
    schema.features.push_back(std::move(spec));
  }

  if (schema.label.empty()) throw std::invalid_argument("infer_schema: no label column");
  schema.validate();
  return schema;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double test_fraction,
                                             seed_t seed) {
  if (ds.rows() < 2) throw std::invalid_argument("train_test_split: need at least 2 rows");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("train_test_split: fraction must be in (0,1)");

  std::vector<Index> idx(static_cast<std::size_t>(ds.rows()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Index>(i);
  Rng rng(seed);
  shuffle(idx, rng);

  const auto n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(ds.rows()) * test_fraction));
  std::vector<Index> test_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<Index> train_idx(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  return {ds.subset(train_idx), ds.subset(test_idx)};
}

std::vector<std::pair<GroupKey, std::vector<Index>>> enumerate_groups(
    const Dataset& ds, const std::vector<std::string>& attrs) {
  if (attrs.empty()) throw std::invalid_argument("enumerate_groups: no attributes given");
  std::set<std::string> seen;
  for (const auto& a : attrs) {
    if (!seen.insert(a).second)
      throw std::invalid_argument("enumerate_groups: attribute '" + a + "' repeats");
  }

  std::vector<const std::vector<std::string>*> cols;
  for (const auto& a : attrs) cols.push_back(&ds.sensitive_column(a));

  std::map<GroupKey, std::vector<Index>> groups;
  for (Index i = 0; i < ds.rows(); ++i) {
    GroupKey key;
    for (std::size_t a = 0; a < attrs.size(); ++a)
      key.parts.emplace_back(attrs[a], (*cols[a])[static_cast<std::size_t>(i)]);
    groups[key].push_back(i);
  }
  return {groups.begin(), groups.end()};
}

Dataset balance_downsample(const Dataset& ds, seed_t seed) {
  std::vector<Index> pos, neg;
  for (Index i = 0; i < ds.rows(); ++i) (ds.labels()[i] == 1.0 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty())
    throw std::invalid_argument("balance_downsample: both classes must be present");

  auto& minority = pos.size() <= neg.size() ? pos : neg;
  auto& majority = pos.size() <= neg.size() ? neg : pos;

  Rng rng(seed);
  shuffle(majority, rng);
  majority.resize(minority.size());

  std::vector<Index> keep = minority;
  keep.insert(keep.end(), majority.begin(), majority.end());
  std::sort(keep.begin(), keep.end());
  return ds.subset(keep);
}

Dataset flip_labels(const Dataset& ds) {
  return ds.with_labels(Vector::Ones(ds.rows()) - ds.labels());
}

std::pair<Dataset, Dataset> rescale_to_train_stats(const Dataset& train, const Dataset& test) {
  const FeatureSchema& schema = train.schema();
  Matrix Xtr = train.features();
  Matrix Xte = test.features();
  FeatureSchema updated = schema;

  int col = 0;
  std::size_t fidx = 0;
  for (const auto& f : schema.features) {
    if (f.sensitive) {
      ++fidx;
      continue;
    }
    if (f.kind == FeatureKind::Categorical) {
      col += static_cast<int>(f.categories.size());
      ++fidx;
      continue;
    }
    const double span = f.max - f.min;
    // Decode back to raw values, re-fit (min, max) on train, re-encode both.
    Array raw_tr = f.min + Xtr.col(col).array() * span;
    Array raw_te = f.min + Xte.col(col).array() * span;
    const double lo = raw_tr.minCoeff();
    const double hi = raw_tr.maxCoeff();
    if (lo < hi) {
      Xtr.col(col) = ((raw_tr - lo) / (hi - lo)).cwiseMin(1.0).cwiseMax(0.0);
      Xte.col(col) = ((raw_te - lo) / (hi - lo)).cwiseMin(1.0).cwiseMax(0.0);
      updated.features[fidx].min = lo;
      updated.features[fidx].max = hi;
    }
    ++col;
    ++fidx;
  }

  return {train.with_features(std::move(Xtr), updated),
          test.with_features(std::move(Xte), updated)};
}

}  // namespace recfair
