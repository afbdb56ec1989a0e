#include "faircert/schema.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "faircert/csv.hpp"
#include "json.hpp"

namespace faircert {

namespace {

double parse_number(const std::string& s, const std::string& context) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw Error("schema: cannot parse '" + s + "' as a number for " + context);
  }
  return value;
}

std::string format_number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void validate_spec(const FeatureSpec& f) {
  if (f.name.empty()) throw Error("schema: feature with empty name");
  if (f.kind == FeatureKind::Categorical) {
    if (f.categories.empty()) {
      throw Error("schema: categorical feature '" + f.name + "' has no categories");
    }
    std::set<std::string> seen;
    for (const auto& c : f.categories) {
      if (!seen.insert(c).second) {
        throw Error("schema: duplicate category '" + c + "' in feature '" + f.name + "'");
      }
    }
  } else {
    if (!(f.lo <= f.hi)) {
      throw Error("schema: feature '" + f.name + "' has lo > hi");
    }
    if (!std::isfinite(f.lo) || !std::isfinite(f.hi)) {
      throw Error("schema: feature '" + f.name + "' has non-finite bounds");
    }
    if (f.kind == FeatureKind::Integer &&
        (f.lo != std::floor(f.lo) || f.hi != std::floor(f.hi))) {
      throw Error("schema: integer feature '" + f.name + "' has non-integral bounds");
    }
  }
}

double scale(const FeatureSpec& f, double raw) {
  if (f.hi == f.lo) return 0.0;
  return (raw - f.lo) / (f.hi - f.lo);
}

double unscale(const FeatureSpec& f, double v) { return f.lo + v * (f.hi - f.lo); }

}  // namespace

FeatureSchema FeatureSchema::create(std::vector<FeatureSpec> features, std::string label) {
  if (features.empty()) throw Error("schema: no features");
  if (label.empty()) throw Error("schema: no label column");
  std::set<std::string> names;
  bool any_sensitive = false;
  for (const auto& f : features) {
    validate_spec(f);
    if (!names.insert(f.name).second) {
      throw Error("schema: duplicate feature name '" + f.name + "'");
    }
    any_sensitive = any_sensitive || f.sensitive;
  }
  if (!any_sensitive) throw Error("schema: no sensitive features");
  if (names.count(label)) {
    throw Error("schema: label column '" + label + "' collides with a feature name");
  }

  FeatureSchema s;
  s.features_ = std::move(features);
  s.label_ = std::move(label);
  s.ranges_.resize(s.features_.size());
  for (int pass = 0; pass < 2; ++pass) {
    const bool sensitive_pass = pass == 1;
    for (int i = 0; i < static_cast<int>(s.features_.size()); ++i) {
      if (s.features_[i].sensitive != sensitive_pass) continue;
      const int width = s.features_[i].encoded_width();
      s.ranges_[i] = {s.input_dim_, width};
      s.order_.push_back(i);
      s.input_dim_ += width;
      if (!sensitive_pass) s.nonsensitive_dim_ += width;
    }
  }
  return s;
}

std::vector<int> FeatureSchema::sensitive_features() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(features_.size()); ++i) {
    if (features_[i].sensitive) out.push_back(i);
  }
  return out;
}

std::vector<int> FeatureSchema::sensitive_columns() const {
  std::vector<int> out;
  for (int i : sensitive_features()) {
    for (int c = 0; c < ranges_[i].width; ++c) out.push_back(ranges_[i].offset + c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

EncodedPoint FeatureSchema::encode_row(const std::vector<std::string>& raw) const {
  if (raw.size() != features_.size()) {
    throw Error("schema: expected " + std::to_string(features_.size()) +
                " raw values, got " + std::to_string(raw.size()));
  }
  EncodedPoint p = Vec::Zero(input_dim_);
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const FeatureSpec& f = features_[i];
    const ColumnRange r = ranges_[i];
    if (f.kind == FeatureKind::Categorical) {
      auto it = std::find(f.categories.begin(), f.categories.end(), raw[i]);
      if (it == f.categories.end()) {
        throw Error("schema: unknown category '" + raw[i] + "' for feature '" + f.name + "'");
      }
      p(r.offset + static_cast<int>(it - f.categories.begin())) = 1.0;
    } else {
      const double v = parse_number(raw[i], "feature '" + f.name + "'");
      if (v < f.lo || v > f.hi) {
        throw Error("schema: value " + raw[i] + " outside [" + format_number(f.lo) +
                    ", " + format_number(f.hi) + "] for feature '" + f.name + "'");
      }
      if (f.kind == FeatureKind::Integer && v != std::floor(v)) {
        throw Error("schema: non-integral value " + raw[i] + " for integer feature '" +
                    f.name + "'");
      }
      p(r.offset) = scale(f, v);
    }
  }
  return p;
}

std::vector<std::string> FeatureSchema::decode_point(const EncodedPoint& p) const {
  if (p.size() != input_dim_) throw Error("schema: decode dimension mismatch");
  std::vector<std::string> out(features_.size());
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const FeatureSpec& f = features_[i];
    const ColumnRange r = ranges_[i];
    if (f.kind == FeatureKind::Categorical) {
      int best = -1;
      double best_v = -1.0;
      for (int c = 0; c < r.width; ++c) {
        if (p(r.offset + c) > best_v) {
          best_v = p(r.offset + c);
          best = c;
        }
      }
      if (best_v < 0.5) {
        throw Error("schema: malformed one-hot for feature '" + f.name + "'");
      }
      out[i] = f.categories[best];
    } else {
      const double raw = unscale(f, p(r.offset));
      if (f.kind == FeatureKind::Integer) {
        out[i] = std::to_string(static_cast<long long>(std::llround(raw)));
      } else {
        out[i] = format_number(raw);
      }
    }
  }
  return out;
}

FeatureSchema parse_schema(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("schema: JSON parse error: ") + e.what());
  }
  if (!j.is_object() || !j.contains("features") || !j["features"].is_array()) {
    throw Error("schema: missing 'features' array");
  }
  if (!j.contains("label") || !j["label"].is_string()) {
    throw Error("schema: missing 'label' string");
  }
  std::vector<FeatureSpec> specs;
  for (const auto& jf : j["features"]) {
    FeatureSpec f;
    if (!jf.contains("name") || !jf["name"].is_string()) {
      throw Error("schema: feature missing 'name'");
    }
    f.name = jf["name"].get<std::string>();
    const std::string kind = jf.value("kind", std::string());
    if (kind == "categorical") {
      f.kind = FeatureKind::Categorical;
      if (!jf.contains("categories") || !jf["categories"].is_array()) {
        throw Error("schema: categorical feature '" + f.name + "' missing 'categories'");
      }
      for (const auto& c : jf["categories"]) f.categories.push_back(c.get<std::string>());
    } else if (kind == "int" || kind == "real") {
      f.kind = kind == "int" ? FeatureKind::Integer : FeatureKind::Real;
      if (!jf.contains("lo") || !jf.contains("hi")) {
        throw Error("schema: numeric feature '" + f.name + "' missing 'lo'/'hi'");
      }
      f.lo = jf["lo"].get<double>();
      f.hi = jf["hi"].get<double>();
    } else {
      throw Error("schema: feature '" + f.name + "' has unknown kind '" + kind + "'");
    }
    f.sensitive = jf.value("sensitive", false);
    specs.push_back(std::move(f));
  }
  return FeatureSchema::create(std::move(specs), j["label"].get<std::string>());
}

FeatureSchema load_schema(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("schema: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_schema(buf.str());
}

Dataset parse_dataset(const FeatureSchema& schema, const std::string& csv_text) {
  const csv::Table t = csv::parse(csv_text);
  std::vector<int> cols(schema.features().size());
  for (std::size_t i = 0; i < schema.features().size(); ++i) {
    cols[i] = t.column(schema.features()[i].name);
    if (cols[i] < 0) {
      throw Error("dataset: missing column '" + schema.features()[i].name + "'");
    }
  }
  const int label_col = t.column(schema.label_column());
  if (label_col < 0) {
    throw Error("dataset: missing label column '" + schema.label_column() + "'");
  }

  Dataset d;
  d.points.reserve(t.rows.size());
  d.labels.reserve(t.rows.size());
  std::vector<std::string> raw(schema.features().size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      raw[i] = t.rows[r][cols[i]];
      if (raw[i].empty()) {
        throw Error("dataset: missing value in row " + std::to_string(r + 2) +
                    ", column '" + schema.features()[i].name + "'");
      }
    }
    const std::string& label = t.rows[r][label_col];
    if (label != "0" && label != "1") {
      throw Error("dataset: label must be 0 or 1, got '" + label + "' in row " +
                  std::to_string(r + 2));
    }
    d.points.push_back(schema.encode_row(raw));
    d.labels.push_back(label == "1" ? 1 : 0);
  }
  return d;
}

Dataset load_dataset(const FeatureSchema& schema, const std::string& csv_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw Error("dataset: cannot open " + csv_path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(schema, buf.str());
}

AssignmentSpace AssignmentSpace::create(const FeatureSchema& schema, SpaceMode mode) {
  AssignmentSpace space;
  space.mode_ = mode;
  for (int i : schema.sensitive_features()) {
    const FeatureSpec& f = schema.features()[i];
    const FeatureSchema::ColumnRange r = schema.columns_of(i);
    SensitiveAxis axis;
    axis.feature = i;
    axis.offset = r.offset;
    axis.width = r.width;
    if (f.kind == FeatureKind::Categorical) {
      axis.discrete = true;
      axis.choices = static_cast<int>(f.categories.size());
    } else if (mode == SpaceMode::Training) {
      axis.discrete = false;
      axis.choices = 0;
    } else {
      const double glo = std::ceil(f.lo);
      const double ghi = std::floor(f.hi);
      if (glo > ghi) {
        throw Error("assignment space: feature '" + f.name +
                    "' has no integer grid points in [" + format_number(f.lo) + ", " +
                    format_number(f.hi) + "]");
      }
      axis.discrete = true;
      axis.choices = static_cast<int>(ghi - glo + 1);
      axis.grid.reserve(axis.choices);
      for (int c = 0; c < axis.choices; ++c) axis.grid.push_back(scale(f, glo + c));
    }
    space.axes_.push_back(std::move(axis));
  }
  if (space.axes_.empty()) throw Error("assignment space: no sensitive features");
  return space;
}

bool AssignmentSpace::finite() const {
  return std::all_of(axes_.begin(), axes_.end(),
                     [](const SensitiveAxis& a) { return a.discrete; });
}

std::uint64_t AssignmentSpace::size() const {
  if (!finite()) {
    throw Error("assignment space: size undefined for continuous training-mode axes");
  }
  constexpr std::uint64_t cap = std::uint64_t{1} << 63;
  std::uint64_t n = 1;
  for (const auto& a : axes_) {
    const std::uint64_t c = static_cast<std::uint64_t>(a.choices);
    if (n > cap / c) throw Error("assignment space: |A(x)| exceeds 2^63");
    n *= c;
  }
  return n;
}

EncodedPoint AssignmentSpace::assign(const EncodedPoint& x, std::uint64_t index) const {
  if (!finite()) {
    throw Error("assignment space: cannot enumerate continuous training-mode axes");
  }
  EncodedPoint p = x;
  std::uint64_t rest = index;
  for (const auto& a : axes_) {
    const std::uint64_t c = static_cast<std::uint64_t>(a.choices);
    const int choice = static_cast<int>(rest % c);
    rest /= c;
    if (a.grid.empty()) {
      for (int j = 0; j < a.width; ++j) p(a.offset + j) = j == choice ? 1.0 : 0.0;
    } else {
      p(a.offset) = a.grid[choice];
    }
  }
  if (rest != 0) throw Error("assignment space: index out of range");
  return p;
}

}  // namespace faircert
