#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "recfair/schema.hpp"
#include "recfair/types.hpp"

namespace recfair {

// Encoded tabular dataset. X holds the non-sensitive features scaled into
// [0,1]; y holds binary labels; the sensitive table S holds raw attribute
// values per row and is kept out of the model-input path entirely. Reads of
// S through the public accessors are counted so integration tests can assert
// that training never touches sensitive data.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Matrix X, Vector y, std::vector<std::vector<std::string>> sensitive_columns,
          FeatureSchema schema, std::string name);

  // Copies and moves carry the read counter's current value (the atomic
  // itself is not copyable).
  Dataset(const Dataset& other);
  Dataset& operator=(const Dataset& other);
  Dataset(Dataset&& other) noexcept;
  Dataset& operator=(Dataset&& other) noexcept;

  Index rows() const { return X_.rows(); }
  Index dim() const { return X_.cols(); }

  const Matrix& features() const { return X_; }
  const Vector& labels() const { return y_; }
  const FeatureSchema& schema() const { return schema_; }
  const std::string& name() const { return name_; }

  // Instrumented accessors for the sensitive table.
  const std::vector<std::string>& sensitive_column(const std::string& attr) const;
  std::uint64_t sensitive_read_count() const { return sensitive_reads_.load(); }

  Dataset subset(const std::vector<Index>& idx) const;

  // Structural copies with one field replaced; storage management, so they
  // do not count as sensitive reads.
  Dataset with_labels(Vector y) const;
  Dataset with_features(Matrix X, FeatureSchema schema) const;

  // "n=..,d=..,xhash=..,yhash=.." for reproducibility logs.
  std::string fingerprint() const;

 private:
  Matrix X_;
  Vector y_;
  std::vector<std::string> sensitive_names_;
  std::vector<std::vector<std::string>> sensitive_values_;  // one vector per attribute
  FeatureSchema schema_;
  std::string name_;
  mutable std::atomic<std::uint64_t> sensitive_reads_{0};
};

struct LoadStats {
  Index rows_loaded = 0;
  Index rows_dropped_missing = 0;  // rows with missing cells are skipped
};

// Loads and encodes a CSV against a schema. Numerics are min-max scaled with
// the schema's (min, max) and clamped into [0,1]; categoricals one-hot in
// category order; sensitive columns are routed to the sensitive table.
Dataset load_csv(const std::string& path, const FeatureSchema& schema,
                 LoadStats* stats = nullptr);

enum class ColumnRole { Label, Sensitive, Numeric, Categorical, Ignore };

// Single pass over the file: records numeric (min, max) and sorted category
// lists. Roles must cover every column; the label column must be binary.
FeatureSchema infer_schema(const std::string& path,
                           const std::map<std::string, ColumnRole>& roles,
                           const std::map<std::string, bool>& mutability = {});

// Deterministic disjoint partition; test size = round(n * test_fraction).
std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double test_fraction,
                                             seed_t seed);

// One entry per observed value combination of `attrs`; index lists partition
// the rows. Output ordered by group key.
std::vector<std::pair<GroupKey, std::vector<Index>>> enumerate_groups(
    const Dataset& ds, const std::vector<std::string>& attrs);

// Downsamples the majority class to the minority count; minority rows are
// all retained and original row order is preserved.
Dataset balance_downsample(const Dataset& ds, seed_t seed);

// y' = 1 - y elementwise.
Dataset flip_labels(const Dataset& ds);

// Re-fits numeric scaling statistics on the train split and re-encodes both
// splits with them (test values outside the train range are clamped). A
// train column that comes out constant keeps its previous scaling.
std::pair<Dataset, Dataset> rescale_to_train_stats(const Dataset& train, const Dataset& test);

}  // namespace recfair
