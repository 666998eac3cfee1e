#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "agreelearn/error.hpp"

namespace agreelearn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MissingMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SurvivalRecord {
  double months = 0.0;  // since the operation
  bool event = false;   // true: death observed; false: censored
};

/// Samples x attributes table. Plain value type; every transform below
/// returns a new Dataset and leaves its input untouched.
struct Dataset {
  std::vector<std::string> attributes;
  Matrix values;
  MissingMask missing;
  std::optional<std::vector<int>> labels;
  std::optional<std::vector<SurvivalRecord>> survival;
  std::optional<std::vector<int>> tnm_stage;

  std::size_t n_samples() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t n_attributes() const { return attributes.size(); }
  bool has_labels() const { return labels.has_value(); }

  const std::vector<int>& label_vector() const {
    if (!labels) throw PreconditionError("dataset has no labels");
    return *labels;
  }

  std::optional<std::size_t> find_attribute(std::string_view name) const {
    auto it = std::find(attributes.begin(), attributes.end(), name);
    if (it == attributes.end()) return std::nullopt;
    return static_cast<std::size_t>(it - attributes.begin());
  }

  std::size_t attribute_index(std::string_view name) const {
    if (auto idx = find_attribute(name)) return *idx;
    throw SchemaError("unknown attribute '" + std::string(name) + "'");
  }

  bool has_missing() const { return missing.size() > 0 && missing.any(); }

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * n_attributes(), n_attributes()};
  }

  /// Throws SchemaError / PreconditionError when an invariant is broken.
  void validate() const {
    const auto n = static_cast<Eigen::Index>(values.rows());
    if (values.cols() != static_cast<Eigen::Index>(attributes.size()))
      throw SchemaError("value matrix has " + std::to_string(values.cols()) + " columns but " +
                        std::to_string(attributes.size()) + " attribute names");
    if (missing.rows() != n || missing.cols() != values.cols())
      throw SchemaError("missing mask shape does not match value matrix");
    std::set<std::string_view> seen;
    for (const auto& a : attributes)
      if (!seen.insert(a).second) throw SchemaError("duplicate attribute name '" + a + "'");
    auto check_rows = [&](std::size_t rows, const char* what) {
      if (rows != static_cast<std::size_t>(n))
        throw SchemaError(std::string(what) + " has " + std::to_string(rows) + " rows, expected " +
                          std::to_string(n));
    };
    if (labels) {
      check_rows(labels->size(), "labels");
      for (int l : *labels)
        if (l != 0 && l != 1) throw PreconditionError("labels must be 0 or 1");
    }
    if (survival) {
      check_rows(survival->size(), "survival");
      for (const auto& s : *survival)
        if (!(s.months >= 0.0) || !std::isfinite(s.months))
          throw PreconditionError("survival months must be finite and non-negative");
    }
    if (tnm_stage) {
      check_rows(tnm_stage->size(), "tnm_stage");
      for (int s : *tnm_stage)
        if (s < 1 || s > 4) throw PreconditionError("tnm stage must be in 1..4");
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < values.cols(); ++j)
        if (!missing(i, j) && !std::isfinite(values(i, j)))
          throw PreconditionError("non-finite value at row " + std::to_string(i) + ", attribute " +
                                  attributes[static_cast<std::size_t>(j)]);
  }

  Dataset subset_rows(std::span<const std::size_t> rows) const {
    Dataset out;
    out.attributes = attributes;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
    out.missing.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.values.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(rows[r]));
      out.missing.row(static_cast<Eigen::Index>(r)) = missing.row(static_cast<Eigen::Index>(rows[r]));
    }
    auto pick = [&](const auto& src, auto& dst) {
      if (!src) return;
      dst.emplace();
      dst->reserve(rows.size());
      for (auto r : rows) dst->push_back((*src)[r]);
    };
    pick(labels, out.labels);
    pick(survival, out.survival);
    pick(tnm_stage, out.tnm_stage);
    return out;
  }

  Dataset select_attributes(std::span<const std::size_t> cols) const {
    Dataset out;
    out.values.resize(values.rows(), static_cast<Eigen::Index>(cols.size()));
    out.missing.resize(values.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out.attributes.push_back(attributes.at(cols[c]));
      out.values.col(static_cast<Eigen::Index>(c)) = values.col(static_cast<Eigen::Index>(cols[c]));
      out.missing.col(static_cast<Eigen::Index>(c)) = missing.col(static_cast<Eigen::Index>(cols[c]));
    }
    out.labels = labels;
    out.survival = survival;
    out.tnm_stage = tnm_stage;
    return out;
  }
};

/// Builds a fully observed dataset and validates it.
inline Dataset make_dataset(std::vector<std::string> attributes, Matrix values,
                            std::optional<std::vector<int>> labels = std::nullopt) {
  Dataset d;
  d.attributes = std::move(attributes);
  d.values = std::move(values);
  d.missing = MissingMask::Constant(d.values.rows(), d.values.cols(), false);
  d.labels = std::move(labels);
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// CSV

struct CsvColumns {
  std::optional<std::string> label = "label";
  std::optional<std::pair<std::string, std::string>> survival;  // (months, event)
  std::optional<std::string> tnm;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool is_missing_token(std::string_view s) { return s.empty() || s == "?"; }

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Reads a header-first CSV. Empty fields and "?" mark missing values in
/// attribute columns; label, survival and stage columns must be complete.
inline Dataset load_csv(std::istream& in, const CsvColumns& cols = {}) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty CSV input: missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = detail::split_csv_line(line);
  for (auto& h : header) h = std::string(detail::trim(h));

  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (!where.emplace(header[i], i).second)
      throw SchemaError("duplicate column name '" + header[i] + "'");

  auto locate = [&](const std::string& name) {
    auto it = where.find(name);
    if (it == where.end()) throw SchemaError("column '" + name + "' not found in header");
    return it->second;
  };
  std::optional<std::size_t> label_col, months_col, event_col, tnm_col;
  if (cols.label) label_col = locate(*cols.label);
  if (cols.survival) {
    months_col = locate(cols.survival->first);
    event_col = locate(cols.survival->second);
  }
  if (cols.tnm) tnm_col = locate(*cols.tnm);

  std::vector<std::size_t> attr_cols;
  Dataset d;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i == label_col || i == months_col || i == event_col || i == tnm_col) continue;
    attr_cols.push_back(i);
    d.attributes.push_back(header[i]);
  }

  std::vector<double> vals;
  std::vector<bool> miss;
  std::vector<int> labels, stages;
  std::vector<SurvivalRecord> surv;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw ParseError(row, "*", "expected " + std::to_string(header.size()) + " fields, found " +
                                     std::to_string(fields.size()));
    auto number = [&](std::size_t c) {
      auto t = detail::trim(fields[c]);
      if (detail::is_missing_token(t)) throw ParseError(row, header[c], "value is required");
      auto v = detail::parse_double(t);
      if (!v) throw ParseError(row, header[c], "'" + std::string(t) + "' is not a number");
      return *v;
    };
    for (auto c : attr_cols) {
      auto t = detail::trim(fields[c]);
      if (detail::is_missing_token(t)) {
        vals.push_back(0.0);
        miss.push_back(true);
        continue;
      }
      auto v = detail::parse_double(t);
      if (!v) throw ParseError(row, header[c], "'" + std::string(t) + "' is not a number");
      vals.push_back(*v);
      miss.push_back(false);
    }
    if (label_col) {
      double v = number(*label_col);
      if (v != 0.0 && v != 1.0) throw ParseError(row, header[*label_col], "label must be 0 or 1");
      labels.push_back(static_cast<int>(v));
    }
    if (months_col) {
      double m = number(*months_col);
      if (m < 0.0) throw ParseError(row, header[*months_col], "months must be non-negative");
      auto et = detail::trim(fields[*event_col]);
      bool event;
      if (et == "1" || et == "true") event = true;
      else if (et == "0" || et == "false") event = false;
      else throw ParseError(row, header[*event_col], "event flag must be 0/1 or true/false");
      surv.push_back({m, event});
    }
    if (tnm_col) {
      double s = number(*tnm_col);
      if (s != std::floor(s) || s < 1 || s > 4)
        throw ParseError(row, header[*tnm_col], "tnm stage must be an integer in 1..4");
      stages.push_back(static_cast<int>(s));
    }
  }

  const auto n = static_cast<Eigen::Index>(row);
  const auto p = static_cast<Eigen::Index>(attr_cols.size());
  d.values.resize(n, p);
  d.missing.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) {
      auto k = static_cast<std::size_t>(i * p + j);
      d.values(i, j) = vals[k];
      d.missing(i, j) = miss[k];
    }
  if (label_col) d.labels = std::move(labels);
  if (months_col) d.survival = std::move(surv);
  if (tnm_col) d.tnm_stage = std::move(stages);
  d.validate();
  return d;
}

/// Writes the same layout load_csv reads: attributes first, then label,
/// survival and stage columns under the names in `cols` when present.
inline void write_csv(std::ostream& out, const Dataset& d, const CsvColumns& cols = {}) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  std::vector<std::string> header;
  for (const auto& a : d.attributes) header.push_back(quote(a));
  if (d.labels) header.push_back(quote(cols.label.value_or("label")));
  if (d.survival) {
    auto names = cols.survival.value_or(std::pair<std::string, std::string>{"months", "event"});
    header.push_back(quote(names.first));
    header.push_back(quote(names.second));
  }
  if (d.tnm_stage) header.push_back(quote(cols.tnm.value_or("tnm_stage")));
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (std::size_t i = 0; i < d.n_samples(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < d.n_attributes(); ++j) {
      if (j) out << ',';
      const auto c = static_cast<Eigen::Index>(j);
      if (!d.missing(r, c)) out << format_double(d.values(r, c));
    }
    bool first = d.n_attributes() == 0;
    auto field = [&](const auto& v) {
      if (!first) out << ',';
      first = false;
      out << v;
    };
    if (d.labels) field((*d.labels)[i]);
    if (d.survival) {
      field(format_double((*d.survival)[i].months));
      field((*d.survival)[i].event ? 1 : 0);
    }
    if (d.tnm_stage) field((*d.tnm_stage)[i]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Preprocessing

inline Dataset impute_mean(const Dataset& d) {
  Dataset out = d;
  for (std::size_t j = 0; j < d.n_attributes(); ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    double sum = 0.0;
    std::size_t count = 0;
    for (Eigen::Index i = 0; i < d.values.rows(); ++i)
      if (!d.missing(i, c)) {
        sum += d.values(i, c);
        ++count;
      }
    if (count == 0 && d.n_samples() > 0)
      throw PreconditionError("attribute '" + d.attributes[j] + "' has no observed values");
    const double mean = count ? sum / static_cast<double>(count) : 0.0;
    for (Eigen::Index i = 0; i < d.values.rows(); ++i)
      if (d.missing(i, c)) out.values(i, c) = mean;
  }
  out.missing.setConstant(false);
  return out;
}

/// Population (divisor n) z-scores; zero-variance columns become zeros.
inline Dataset normalize_zscore(const Dataset& d) {
  if (d.has_missing()) throw PreconditionError("normalize_zscore requires no missing values");
  Dataset out = d;
  const double n = static_cast<double>(d.n_samples());
  if (d.n_samples() == 0) return out;
  for (Eigen::Index j = 0; j < d.values.cols(); ++j) {
    const double mean = d.values.col(j).sum() / n;
    const double var = (d.values.col(j).array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    if (sd == 0.0 || !std::isfinite(sd)) {
      out.values.col(j).setZero();
    } else {
      out.values.col(j) = (d.values.col(j).array() - mean) / sd;
    }
  }
  return out;
}

enum class Transform { identity, reciprocal, log };

inline Dataset linearize(const Dataset& d, const std::map<std::string, Transform>& transforms) {
  Dataset out = d;
  for (const auto& [name, t] : transforms) {
    const auto c = static_cast<Eigen::Index>(d.attribute_index(name));
    for (Eigen::Index i = 0; i < d.values.rows(); ++i) {
      if (d.missing(i, c)) continue;
      const double v = d.values(i, c);
      switch (t) {
        case Transform::identity:
          break;
        case Transform::reciprocal:
          if (v == 0.0)
            throw PreconditionError("reciprocal of zero in attribute '" + name + "' at row " +
                                    std::to_string(i));
          out.values(i, c) = 1.0 / v;
          break;
        case Transform::log:
          if (!(v > 0.0))
            throw PreconditionError("log of non-positive value in attribute '" + name + "' at row " +
                                    std::to_string(i));
          out.values(i, c) = std::log(v);
          break;
      }
    }
  }
  return out;
}

/// label 1 = survived to the threshold; rows censored before it are dropped.
inline Dataset binarize_survival(const Dataset& d, double threshold_months = 60.0) {
  if (!d.survival) throw PreconditionError("binarize_survival requires survival records");
  std::vector<std::size_t> keep;
  std::vector<int> labels;
  for (std::size_t i = 0; i < d.n_samples(); ++i) {
    const auto& s = (*d.survival)[i];
    if (s.months >= threshold_months) {
      keep.push_back(i);
      labels.push_back(1);
    } else if (s.event) {
      keep.push_back(i);
      labels.push_back(0);
    }
  }
  Dataset out = d.subset_rows(keep);
  out.labels = std::move(labels);
  return out;
}

}  // namespace agreelearn
