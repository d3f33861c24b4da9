#pragma once

#include <cstdlib>
#include <string>
#include <vector>

#include "gensql/error.hpp"
#include "gensql/value.hpp"

namespace gensql {

// RFC 4180 cells: quoted fields may contain commas, newlines and doubled
// quotes. Accepts LF and CRLF line ends.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool in_quotes = false;
  bool cell_started = false;
  std::size_t i = 0, n = text.size();
  auto end_cell = [&]() {
    row.push_back(cell);
    cell.clear();
    cell_started = false;
  };
  auto end_row = [&]() {
    end_cell();
    rows.push_back(row);
    row.clear();
  };
  while (i < n) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          cell += '"';
          i += 2;
          continue;
        }
        in_quotes = false;
        ++i;
        continue;
      }
      cell += c;
      ++i;
      continue;
    }
    if (c == '"' && !cell_started) {
      in_quotes = true;
      cell_started = true;
      ++i;
      continue;
    }
    if (c == ',') {
      end_cell();
      ++i;
      continue;
    }
    if (c == '\r' && i + 1 < n && text[i + 1] == '\n') {
      end_row();
      i += 2;
      continue;
    }
    if (c == '\n') {
      end_row();
      ++i;
      continue;
    }
    cell += c;
    cell_started = true;
    ++i;
  }
  if (in_quotes) throw IoError("unterminated quoted CSV field");
  if (!cell.empty() || !row.empty()) end_row();
  return rows;
}

inline Value parse_cell(const std::string& text, const Column& col, std::size_t line) {
  if (text.empty() || text == "NULL") return Value::null();
  auto fail = [&](const std::string& extra) -> Value {
    throw IoError("row " + std::to_string(line) + ", column '" + col.name + "': cannot parse '" +
                  text + "'" + extra);
  };
  switch (col.type.kind) {
    case TypeKind::Real:
    case TypeKind::PosReal:
    case TypeKind::Ranged: {
      char* end = nullptr;
      double d = std::strtod(text.c_str(), &end);
      if (end != text.c_str() + text.size()) return fail(" as a real number");
      Value v = Value::real(d);
      if (!v.well_typed(col.type)) return fail(" (outside " + col.type.to_string() + ")");
      return v;
    }
    case TypeKind::Int:
    case TypeKind::Nat: {
      char* end = nullptr;
      long long i = std::strtoll(text.c_str(), &end, 10);
      if (end != text.c_str() + text.size()) return fail(" as an integer");
      Value v = Value::integer(i);
      if (!v.well_typed(col.type)) return fail(" (outside " + col.type.to_string() + ")");
      return v;
    }
    case TypeKind::Bool: {
      if (text == "true" || text == "TRUE" || text == "True") return Value::boolean(true);
      if (text == "false" || text == "FALSE" || text == "False") return Value::boolean(false);
      return fail(" as a boolean");
    }
    case TypeKind::Str:
      return Value::text(text);
    case TypeKind::Categorical: {
      Value v = Value::text(text);
      if (!v.well_typed(col.type)) {
        std::string labels;
        for (const std::string& l : col.type.labels) labels += (labels.empty() ? "" : ", ") + l;
        return fail("; expected one of {" + labels + "}");
      }
      return v;
    }
  }
  return fail("");
}

// Header row must match the schema's column names in order.
inline Table load_table_csv(const std::string& text, const Schema& schema) {
  std::vector<std::vector<std::string>> raw = parse_csv(text);
  if (raw.empty()) throw IoError("CSV input has no header row");
  const std::vector<std::string>& header = raw[0];
  if (header.size() != schema.columns.size())
    throw IoError("CSV header has " + std::to_string(header.size()) + " columns, schema has " +
                  std::to_string(schema.columns.size()));
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] != schema.columns[i].name)
      throw IoError("CSV header column " + std::to_string(i + 1) + " is '" + header[i] +
                    "', schema expects '" + schema.columns[i].name + "'");
  Table t;
  t.schema = schema;
  for (std::size_t r = 1; r < raw.size(); ++r) {
    if (raw[r].size() == 1 && raw[r][0].empty()) continue;  // blank trailing line
    if (raw[r].size() != schema.columns.size())
      throw IoError("row " + std::to_string(r) + " has " + std::to_string(raw[r].size()) +
                    " cells, expected " + std::to_string(schema.columns.size()));
    Row row;
    for (std::size_t c = 0; c < raw[r].size(); ++c)
      row.push_back(parse_cell(raw[r][c], schema.columns[c], r));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::string csv_quote(const std::string& s) {
  bool needs = s.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string cell_text(const Value& v) { return v.is_null() ? "" : v.to_string(); }

inline std::string write_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.schema.columns.size(); ++i) {
    if (i) out += ',';
    out += csv_quote(t.schema.columns[i].name);
  }
  out += '\n';
  for (const Row& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ',';
      out += csv_quote(cell_text(r[i]));
    }
    out += '\n';
  }
  return out;
}

}  // namespace gensql
