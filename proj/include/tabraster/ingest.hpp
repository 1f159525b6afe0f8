#pragma once

// Tabular ingestion: delimited text parsing, schema-driven feature expansion
// (one-hot categoricals, rank-coded ordinals, 0/1 booleans) and per-feature
// min-max normalization.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "tabraster/error.hpp"
#include "tabraster/matrix.hpp"

namespace tabraster {

inline constexpr int kSchemaVersion = 1;

enum class FeatureKind { numeric, ordinal, categorical, boolean };

inline std::string_view to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::numeric: return "numeric";
    case FeatureKind::ordinal: return "ordinal";
    case FeatureKind::categorical: return "categorical";
    case FeatureKind::boolean: return "boolean";
  }
  return "?";
}

struct ColumnSpec {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  // ordinal: categories from lowest to highest rank.
  std::vector<std::string> order;
  // categorical: known categories; left empty to infer the sorted distinct
  // values from the data (see resolve_categories).
  std::vector<std::string> categories;

  bool operator==(const ColumnSpec&) const = default;
};

struct FeatureSchema {
  std::vector<ColumnSpec> columns;
  std::string label;
  char delimiter = ',';

  // Number of expanded features. Categorical columns must be resolved.
  std::size_t expanded_width() const {
    std::size_t m = 0;
    for (const auto& c : columns) {
      if (c.kind == FeatureKind::categorical) {
        if (c.categories.empty())
          throw SchemaError("column '" + c.name + "': categories not resolved");
        m += c.categories.size();
      } else {
        ++m;
      }
    }
    return m;
  }

  void validate() const {
    if (label.empty()) throw SchemaError("schema has no label column");
    if (columns.empty()) throw SchemaError("schema has no feature columns");
    std::set<std::string> names;
    for (const auto& c : columns) {
      if (c.name.empty()) throw SchemaError("column with empty name");
      if (c.name == label)
        throw SchemaError("label column '" + label + "' is also listed as a feature");
      if (!names.insert(c.name).second) throw SchemaError("duplicate column '" + c.name + "'");
      const auto check_unique = [&](const std::vector<std::string>& v, const char* what) {
        std::set<std::string> seen;
        for (const auto& s : v)
          if (!seen.insert(s).second)
            throw SchemaError("column '" + c.name + "': duplicate " + what + " '" + s + "'");
      };
      if (c.kind == FeatureKind::ordinal) {
        if (c.order.empty()) throw SchemaError("ordinal column '" + c.name + "' has no order");
        check_unique(c.order, "order label");
      }
      if (c.kind == FeatureKind::categorical) check_unique(c.categories, "category");
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : columns) {
      nlohmann::json j{{"name", c.name}, {"kind", to_string(c.kind)}};
      if (c.kind == FeatureKind::ordinal) j["order"] = c.order;
      if (c.kind == FeatureKind::categorical && !c.categories.empty()) j["categories"] = c.categories;
      cols.push_back(std::move(j));
    }
    return {{"schema_version", kSchemaVersion},
            {"label", label},
            {"delimiter", std::string(1, delimiter)},
            {"columns", std::move(cols)}};
  }
};

inline FeatureKind parse_feature_kind(const std::string& s) {
  if (s == "numeric") return FeatureKind::numeric;
  if (s == "ordinal") return FeatureKind::ordinal;
  if (s == "categorical") return FeatureKind::categorical;
  if (s == "boolean") return FeatureKind::boolean;
  throw SchemaError("unknown column kind '" + s + "'");
}

inline FeatureSchema parse_schema(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("schema is not valid JSON: ") + e.what());
  }
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kSchemaVersion)
      throw SchemaError("unsupported schema_version " + std::to_string(version));
    FeatureSchema schema;
    schema.label = j.at("label").get<std::string>();
    if (j.contains("delimiter")) {
      const auto d = j["delimiter"].get<std::string>();
      if (d.size() != 1) throw SchemaError("delimiter must be a single character");
      schema.delimiter = d[0];
    }
    for (const auto& c : j.at("columns")) {
      ColumnSpec col;
      col.name = c.at("name").get<std::string>();
      col.kind = parse_feature_kind(c.at("kind").get<std::string>());
      if (c.contains("order")) {
        if (col.kind != FeatureKind::ordinal)
          throw SchemaError("column '" + col.name + "': 'order' is only valid for ordinal columns");
        col.order = c["order"].get<std::vector<std::string>>();
      }
      if (c.contains("categories")) {
        if (col.kind != FeatureKind::categorical)
          throw SchemaError("column '" + col.name +
                            "': 'categories' is only valid for categorical columns");
        col.categories = c["categories"].get<std::vector<std::string>>();
      }
      schema.columns.push_back(std::move(col));
    }
    schema.validate();
    return schema;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("schema: ") + e.what());
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline FeatureSchema load_schema(const std::string& path) { return parse_schema(read_text_file(path)); }

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t n() const { return rows.size(); }

  std::size_t column_index(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("column '" + name + "' not found in input header");
    return static_cast<std::size_t>(it - header.begin());
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Splits one record. Double-quoted fields may contain the delimiter; a doubled
// quote inside quotes is a literal quote.
inline std::vector<std::string> split_record(std::string_view line, char delimiter) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"' && trim(cur).empty()) {
      quoted = true;
      was_quoted = true;
      cur.clear();
    } else if (ch == delimiter) {
      cells.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else if (!was_quoted || !std::isspace(static_cast<unsigned char>(ch))) {
      cur.push_back(ch);
    }
  }
  cells.push_back(was_quoted ? cur : trim(cur));
  return cells;
}

}  // namespace detail

// Reads delimiter-separated text with a header line. Blank lines are skipped;
// line numbers in errors count physical lines starting at 1 for the header.
inline RawTable parse_table(std::istream& in, char delimiter = ',') {
  RawTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_record(line, delimiter);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      throw ParseError("row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw ParseError("empty input");
  if (t.rows.empty()) throw ParseError("input has a header but no data rows");
  return t;
}

inline RawTable parse_table(std::string_view text, char delimiter = ',') {
  std::istringstream in{std::string(text)};
  return parse_table(in, delimiter);
}

inline RawTable load_table(const std::string& path, char delimiter = ',') {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_table(in, delimiter);
}

// Fills in categories of categorical columns that the schema left open, using
// the sorted distinct values found in the data.
inline FeatureSchema resolve_categories(FeatureSchema schema, const RawTable& raw) {
  for (auto& c : schema.columns) {
    if (c.kind != FeatureKind::categorical || !c.categories.empty()) continue;
    const std::size_t col = raw.column_index(c.name);
    std::set<std::string> distinct;
    for (const auto& row : raw.rows)
      if (!row[col].empty()) distinct.insert(row[col]);
    c.categories.assign(distinct.begin(), distinct.end());
    if (c.categories.empty()) throw SchemaError("categorical column '" + c.name + "' has no values");
  }
  return schema;
}

// Expanded features (not yet normalized) with labels mapped to 1..C.
struct ExpandedTable {
  Matrix values;
  std::vector<int> labels;
  int classes = 0;
  std::vector<std::string> feature_names;
  // class_names[c - 1] is the original label text of class c.
  std::vector<std::string> class_names;

  std::size_t n() const { return values.rows(); }
  std::size_t m() const { return values.cols(); }
};

namespace detail {

inline bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (*b == '+') ++b;
  const auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e && std::isfinite(out);
}

inline bool parse_bool(std::string s, double& out) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "1" || s == "true" || s == "t" || s == "yes" || s == "y") {
    out = 1.0;
    return true;
  }
  if (s == "0" || s == "false" || s == "f" || s == "no" || s == "n") {
    out = 0.0;
    return true;
  }
  return false;
}

}  // namespace detail

inline ExpandedTable expand_features(const RawTable& raw, const FeatureSchema& unresolved) {
  unresolved.validate();
  const FeatureSchema schema = resolve_categories(unresolved, raw);
  const std::size_t n = raw.n();
  const std::size_t m = schema.expanded_width();
  if (m < 1) throw SchemaError("schema expands to zero features");

  ExpandedTable out;
  out.values = Matrix(n, m);

  const auto cell_error = [&](const ColumnSpec& c, std::size_t i, const std::string& v,
                              const std::string& what) {
    // Data row i sits on line i + 2 when there are no blank lines.
    return SchemaError("column '" + c.name + "', data row " + std::to_string(i + 1) + ": " + what +
                       " '" + v + "'");
  };

  std::size_t j0 = 0;
  for (const auto& c : schema.columns) {
    const std::size_t col = raw.column_index(c.name);
    switch (c.kind) {
      case FeatureKind::numeric:
      case FeatureKind::boolean: {
        out.feature_names.push_back(c.name);
        for (std::size_t i = 0; i < n; ++i) {
          const auto& v = raw.rows[i][col];
          if (v.empty()) throw cell_error(c, i, v, "missing value");
          double x = 0.0;
          const bool ok = c.kind == FeatureKind::numeric ? detail::parse_real(v, x)
                                                         : detail::parse_bool(v, x);
          if (!ok)
            throw cell_error(c, i, v, c.kind == FeatureKind::numeric ? "unparseable number"
                                                                     : "unparseable boolean");
          out.values(i, j0) = x;
        }
        j0 += 1;
        break;
      }
      case FeatureKind::ordinal: {
        out.feature_names.push_back(c.name);
        std::map<std::string, int> rank;
        for (std::size_t r = 0; r < c.order.size(); ++r) rank[c.order[r]] = static_cast<int>(r);
        for (std::size_t i = 0; i < n; ++i) {
          const auto& v = raw.rows[i][col];
          if (v.empty()) throw cell_error(c, i, v, "missing value");
          const auto it = rank.find(v);
          if (it == rank.end()) throw cell_error(c, i, v, "unknown ordinal level");
          out.values(i, j0) = it->second;
        }
        j0 += 1;
        break;
      }
      case FeatureKind::categorical: {
        std::map<std::string, std::size_t> index;
        for (std::size_t k = 0; k < c.categories.size(); ++k) {
          index[c.categories[k]] = k;
          out.feature_names.push_back(c.name + "=" + c.categories[k]);
        }
        for (std::size_t i = 0; i < n; ++i) {
          const auto& v = raw.rows[i][col];
          if (v.empty()) throw cell_error(c, i, v, "missing value");
          const auto it = index.find(v);
          if (it == index.end()) throw cell_error(c, i, v, "unknown category");
          out.values(i, j0 + it->second) = 1.0;
        }
        j0 += c.categories.size();
        break;
      }
    }
  }

  const std::size_t label_col = raw.column_index(schema.label);
  std::set<std::string> distinct;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = raw.rows[i][label_col];
    if (v.empty()) throw SchemaError("label column '" + schema.label + "', data row " +
                                     std::to_string(i + 1) + ": missing value");
    distinct.insert(v);
  }
  out.class_names.assign(distinct.begin(), distinct.end());
  out.classes = static_cast<int>(out.class_names.size());
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::lower_bound(out.class_names.begin(), out.class_names.end(),
                                     raw.rows[i][label_col]);
    out.labels[i] = static_cast<int>(it - out.class_names.begin()) + 1;
  }
  return out;
}

enum class FitScope { train_only, whole_dataset };

inline std::string_view to_string(FitScope s) {
  return s == FitScope::train_only ? "train_only" : "whole_dataset";
}

struct NormalizationStats {
  std::vector<double> min;
  std::vector<double> max;
  FitScope scope = FitScope::train_only;

  bool operator==(const NormalizationStats&) const = default;
};

// With whole_dataset scope fit_rows is ignored and every row contributes.
inline NormalizationStats fit_normalization(const Matrix& values, std::span<const std::size_t> fit_rows,
                                            FitScope scope) {
  NormalizationStats s;
  s.scope = scope;
  if (values.rows() == 0) throw ConfigError("normalization needs at least one row");
  const std::size_t m = values.cols();
  s.min.assign(m, HUGE_VAL);
  s.max.assign(m, -HUGE_VAL);
  const auto take = [&](std::size_t i) {
    for (std::size_t j = 0; j < m; ++j) {
      s.min[j] = std::min(s.min[j], values(i, j));
      s.max[j] = std::max(s.max[j], values(i, j));
    }
  };
  if (scope == FitScope::whole_dataset) {
    for (std::size_t i = 0; i < values.rows(); ++i) take(i);
  } else {
    if (fit_rows.empty()) throw ConfigError("normalization needs at least one fit row");
    for (std::size_t i : fit_rows) {
      if (i >= values.rows()) throw ConfigError("fit row index out of range");
      take(i);
    }
  }
  return s;
}

inline NormalizationStats fit_normalization(const Matrix& values) {
  return fit_normalization(values, {}, FitScope::whole_dataset);
}

inline double normalize_value(double x, double lo, double hi) {
  if (!(hi > lo)) return 0.5;
  const double v = (x - lo) / (hi - lo);
  if (!(v > 0.0)) return 0.0;  // also maps NaN to 0
  return v < 1.0 ? v : 1.0;
}

inline Matrix apply_normalization(const Matrix& values, const NormalizationStats& stats) {
  if (stats.min.size() != values.cols() || stats.max.size() != values.cols())
    throw ConfigError("normalization stats do not match feature count");
  Matrix out(values.rows(), values.cols());
  for (std::size_t i = 0; i < values.rows(); ++i)
    for (std::size_t j = 0; j < values.cols(); ++j)
      out(i, j) = normalize_value(values(i, j), stats.min[j], stats.max[j]);
  return out;
}

struct NormalizedTable {
  Matrix values;  // every entry in [0, 1]
  std::vector<int> labels;
  int classes = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;

  std::size_t n() const { return values.rows(); }
  std::size_t m() const { return values.cols(); }
};

inline NormalizedTable normalize(const ExpandedTable& t, const NormalizationStats& stats) {
  return {apply_normalization(t.values, stats), t.labels, t.classes, t.feature_names, t.class_names};
}

// Whole-table convenience used by single-shot tools (no split involved).
inline NormalizedTable normalize(const ExpandedTable& t) { return normalize(t, fit_normalization(t.values)); }

inline ExpandedTable load_expanded(const std::string& input_path, const FeatureSchema& schema) {
  return expand_features(load_table(input_path, schema.delimiter), schema);
}

}  // namespace tabraster
