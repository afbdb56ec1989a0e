#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "faircert/common.hpp"

namespace faircert {

enum class FeatureKind { Categorical, Integer, Real };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::Real;
  std::vector<std::string> categories;  // categorical only
  double lo = 0.0;                      // integer/real only
  double hi = 0.0;
  bool sensitive = false;

  int encoded_width() const {
    return kind == FeatureKind::Categorical ? static_cast<int>(categories.size()) : 1;
  }
};

// Tabular feature space with a fixed encoded layout: every nonsensitive
// feature's columns come first (declaration order), then the sensitive
// columns. Numeric columns are min-max scaled to [0,1]; categoricals are
// one-hot. All encoded columns therefore live in [0,1].
class FeatureSchema {
public:
  static FeatureSchema create(std::vector<FeatureSpec> features, std::string label);

  int input_dim() const { return input_dim_; }          // d
  int nonsensitive_dim() const { return nonsensitive_dim_; }  // k
  const std::string& label_column() const { return label_; }
  const std::vector<FeatureSpec>& features() const { return features_; }

  struct ColumnRange {
    int offset = 0;
    int width = 0;
  };
  // Encoded columns of features()[i].
  ColumnRange columns_of(int feature_index) const { return ranges_[feature_index]; }
  // Feature indices in encoded-column order (nonsensitive first).
  const std::vector<int>& encoded_order() const { return order_; }
  std::vector<int> sensitive_features() const;
  // Encoded column indices of all sensitive features, ascending.
  std::vector<int> sensitive_columns() const;

  Vec lower() const { return Vec::Zero(input_dim_); }
  Vec upper() const { return Vec::Ones(input_dim_); }

  // Raw values in features() order, one string per feature.
  EncodedPoint encode_row(const std::vector<std::string>& raw) const;
  std::vector<std::string> decode_point(const EncodedPoint& p) const;

private:
  std::vector<FeatureSpec> features_;
  std::string label_;
  std::vector<ColumnRange> ranges_;
  std::vector<int> order_;
  int input_dim_ = 0;
  int nonsensitive_dim_ = 0;
};

FeatureSchema load_schema(const std::string& path);
FeatureSchema parse_schema(const std::string& json_text);

struct Dataset {
  std::vector<EncodedPoint> points;
  std::vector<int> labels;  // values in {0,1}

  std::size_t size() const { return points.size(); }
};

// CSV must contain every schema feature column plus the label column
// (values 0/1). Extra columns are ignored; empty fields are an error.
Dataset load_dataset(const FeatureSchema& schema, const std::string& csv_path);
Dataset parse_dataset(const FeatureSchema& schema, const std::string& csv_text);

enum class SpaceMode { Training, Prediction };

// One sensitive feature's contribution to A(x).
struct SensitiveAxis {
  int feature = 0;  // index into schema.features()
  int offset = 0;   // first encoded column
  int width = 1;
  bool discrete = true;          // false: continuous box (training mode numerics)
  std::vector<double> grid;      // width==1: scaled value per choice
  int choices = 0;               // grid.size() or category count
};

// The set of points sharing x's nonsensitive columns while sensitive
// features range over their domains. In prediction mode every axis is a
// finite grid (numerics step 1 in raw units); in training mode numeric
// axes are continuous boxes and the space has no finite size.
class AssignmentSpace {
public:
  static AssignmentSpace create(const FeatureSchema& schema, SpaceMode mode);

  SpaceMode mode() const { return mode_; }
  const std::vector<SensitiveAxis>& axes() const { return axes_; }
  bool finite() const;
  std::uint64_t size() const;  // |A(x)|; error if not finite

  // Returns x with its sensitive columns replaced by assignment #index
  // (mixed-radix over axes). Nonsensitive columns are copied untouched.
  EncodedPoint assign(const EncodedPoint& x, std::uint64_t index) const;

private:
  SpaceMode mode_ = SpaceMode::Prediction;
  std::vector<SensitiveAxis> axes_;
};

}  // namespace faircert
