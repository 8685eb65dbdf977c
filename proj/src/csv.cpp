#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wproj/error.hpp"
#include "wproj/io.hpp"
#include "wproj/log.hpp"

namespace wproj {

namespace {

/// Splits one record; handles quoted fields with doubled quotes inside.
/// A quoted field may not span lines.
std::vector<std::string> split_record(std::string_view line, long line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          field.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"' && field.empty() && !was_quoted) {
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else {
      field.push_back(ch);
    }
  }
  if (quoted) throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(std::move(field));
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool is_missing(std::string_view s) {
  return s.empty() || s == "NA" || s == "na" || s == "N/A" || s == "NaN" || s == "nan" || s == "NAN" ||
         s == "null" || s == "NULL" || s == ".";
}

double parse_number(std::string_view s, long line_no, const std::string& column) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ", column '" + column +
                                           "': cannot parse '" + std::string(s) + "' as a finite number");
  }
  return value;
}

}  // namespace

CsvTable read_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  if (!schema.transforms.empty() && schema.transforms.size() != schema.columns.size()) {
    throw Error(ErrorCode::Config, "transforms must list one entry per column");
  }

  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "'" + path + "' has no header row");
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = split_record(line, line_no);
  for (auto& h : header) h = std::string(trim(h));

  auto find_column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::MissingColumn, "'" + path + "' has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };

  CsvTable table;
  std::vector<Transform> transforms = schema.transforms;
  if (schema.columns.empty()) {
    for (const auto& h : header) {
      if (!schema.weight_column || h != *schema.weight_column) table.columns.push_back(h);
    }
  } else {
    table.columns = schema.columns;
  }
  if (transforms.empty()) transforms.assign(table.columns.size(), Transform::Identity);
  std::vector<std::size_t> index;
  for (const auto& c : table.columns) index.push_back(find_column(c));
  const std::optional<std::size_t> weight_index =
      schema.weight_column ? std::optional(find_column(*schema.weight_column)) : std::nullopt;

  const auto d = static_cast<Index>(index.size());
  std::vector<double> values;
  std::vector<double> weights;
  std::vector<double> row(index.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++table.rows_read;
    const auto fields = split_record(line, line_no);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(header.size()) + " fields, found " +
                                             std::to_string(fields.size()));
    }
    bool missing = false;
    bool nonpositive = false;
    for (std::size_t k = 0; k < index.size(); ++k) {
      const std::string_view s = trim(fields[index[k]]);
      if (is_missing(s)) {
        missing = true;
        continue;
      }
      double v = parse_number(s, line_no, table.columns[k]);
      if (transforms[k] == Transform::Log) {
        if (v <= 0.0) {
          nonpositive = true;
          continue;
        }
        v = std::log(v);
      }
      row[k] = v;
    }
    double w = 1.0;
    if (weight_index) {
      const std::string_view s = trim(fields[*weight_index]);
      if (is_missing(s)) {
        missing = true;
      } else {
        w = parse_number(s, line_no, *schema.weight_column);
        if (w < 0.0) {
          throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": negative weight");
        }
      }
    }
    if (missing) {
      ++table.dropped_missing;
      continue;
    }
    if (nonpositive) {
      ++table.dropped_nonpositive;
      continue;
    }
    values.insert(values.end(), row.begin(), row.end());
    weights.push_back(w);
  }

  const auto n = static_cast<Index>(weights.size());
  if (n == 0) {
    throw Error(ErrorCode::AllRowsDropped, "'" + path + "': all " + std::to_string(table.rows_read) +
                                               " rows were dropped");
  }
  table.samples = Eigen::Map<const Matrix>(values.data(), n, d);
  if (weight_index) table.weights = Eigen::Map<const Vector>(weights.data(), n);
  if (table.dropped_missing > 0 || table.dropped_nonpositive > 0) {
    log_warning("'" + path + "': dropped " + std::to_string(table.dropped_missing) + " rows with missing values and " +
                std::to_string(table.dropped_nonpositive) + " rows with nonpositive values in log columns");
  }
  return table;
}

DiscreteMeasure table_to_measure(const CsvTable& table) {
  if (table.weights) return from_weighted_samples(table.samples, *table.weights);
  return from_samples(table.samples);
}

DiscreteMeasure load_csv(const std::string& path, const CsvSchema& schema) {
  return table_to_measure(read_csv(path, schema));
}

void write_measure_csv(const std::string& path, const DiscreteMeasure& m, const std::vector<std::string>& names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  for (Index k = 0; k < m.dim(); ++k) {
    out << (static_cast<std::size_t>(k) < names.size() ? names[k] : "x" + std::to_string(k)) << ',';
  }
  out << "weight\n";
  out << std::setprecision(17);
  for (Index i = 0; i < m.size(); ++i) {
    for (Index k = 0; k < m.dim(); ++k) out << m.support()(i, k) << ',';
    out << m.weights()[i] << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

}  // namespace wproj
