#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "gensql/csv.hpp"
#include "gensql/desugar.hpp"
#include "gensql/evaluate.hpp"
#include "gensql/lowering.hpp"
#include "gensql/model_loader.hpp"
#include "gensql/normalize.hpp"
#include "gensql/parser.hpp"
#include "gensql/safety.hpp"
#include "gensql/typecheck.hpp"

namespace gensql {

// A loaded workspace: schemas in the global context, data and model handles
// for the evaluator, plus the evaluation options the CLI flags map onto.
class Session {
 public:
  GlobalEnv env;
  EvalEnv eval;
  Diagnostics diags;
  bool strict_safety = false;
  bool dump_lowered = false;

  void declare_table(const std::string& name, Schema schema, Table data) {
    data.schema.identifier = name;
    data.validate();
    env.declare_table(name, std::move(schema));
    eval.tables[name] = std::move(data);
  }

  void declare_model(const std::string& name, ModelHandle model) {
    env.declare_model(name, model->schema());
    eval.models[name] = std::move(model);
  }

  void load_table_files(const std::string& name, const std::string& csv_path,
                        const std::string& schema_path) {
    Schema schema = load_schema_file(schema_path);
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open CSV file '" + csv_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    Table t = load_table_csv(buf.str(), schema);
    declare_table(name, std::move(schema), std::move(t));
  }

  void load_model_file_as(const std::string& name, const std::string& path) {
    declare_model(name, load_model_file(path, eval.options.particles));
  }

  struct RunResult {
    Table table;  // scalar results render as a one-cell table
    bool was_scalar = false;
    bool safe = true;
    std::string lowered_text;  // filled when dump_lowered is set
    EvalStats stats;
    NormalizeResult normalized;
  };

  // parse -> desugar -> typecheck -> normalize -> re-typecheck -> safety ->
  // lower -> lowered typecheck -> evaluate -> render
  RunResult run(const std::string& text) {
    Query parsed = parse(text);
    Query sugar_free = desugar(parsed, env, &diags);
    typecheck(sugar_free, env, Strictness::Permissive, &diags);

    NormalizeResult normalized = normalize(sugar_free, &diags);
    CheckedQuery checked = typecheck(normalized.query, env, Strictness::Formal, &diags);

    SafetyReport safety = analyze_safety(checked.query, checked.info);
    if (!safety.query_safe && uses_approximate_model(checked.query)) {
      if (strict_safety)
        throw Error(Stage::Safety, "unsafe-query",
                    "query is not safe under an approximate model backend "
                    "(results carry no convergence guarantee)",
                    safety.unsafe_spans.empty() ? Span{} : safety.unsafe_spans.front());
      warn(diags,
           "query is not safe under an approximate model backend; results carry no "
           "convergence guarantee",
           safety.unsafe_spans.empty() ? Span{} : safety.unsafe_spans.front());
    }

    LoweredProgram lowered = lower(checked.query, env);
    lowered_typecheck(lowered, env);

    RunResult out;
    out.normalized = normalized;
    out.safe = safety.query_safe;
    if (dump_lowered) out.lowered_text = to_text(lowered);

    EvalResult result = evaluate(lowered, eval, &diags, &out.stats);
    if (std::holds_alternative<Value>(result)) {
      out.was_scalar = true;
      out.table.schema.columns = {{"value", scalar_result_type(checked)}};
      out.table.rows.push_back({std::get<Value>(result)});
    } else {
      out.was_scalar = false;
      out.table.schema = result_schema(checked);
      out.table.rows = std::move(std::get<Bag>(result).rows);
    }

    apply_result_directives(out.table, checked.query);
    return out;
  }

 private:
  static BaseType scalar_result_type(const CheckedQuery& checked) {
    const QueryType* t = checked.info.find(checked.query.scalar());
    if (t)
      if (auto* st = std::get_if<ScalarType>(t)) return st->type;
    return BaseType::real();
  }

  static Schema result_schema(const CheckedQuery& checked) {
    Schema s;
    const QueryType* t = checked.info.find(checked.query.table());
    if (t)
      if (auto* tt = std::get_if<TableType>(t)) s.columns = tt->cols;
    return s;
  }

  bool uses_approximate_model(const Query& q) const {
    for (const auto& [name, handle] : eval.models)
      if (!handle_exact(handle) && mentions_model(q, name)) return true;
    return false;
  }

  // model_loader.hpp pulls in every backend, so the concrete types are known
  static bool handle_exact(const ModelHandle& h) {
    return dynamic_cast<const SpeModel*>(h.get()) != nullptr ||
           dynamic_cast<const NullRowModel*>(h.get()) != nullptr;
  }

  static bool mentions_model(const Query& q, const std::string& name) {
    std::string text = q.is_scalar() ? to_text(q.scalar()) : to_text(q.table());
    // identifiers are word-delimited in the printed form
    std::size_t pos = 0;
    while ((pos = text.find(name, pos)) != std::string::npos) {
      bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(text[pos - 1]));
      std::size_t end = pos + name.size();
      bool right_ok = end >= text.size() ||
                      (!std::isalnum(static_cast<unsigned char>(text[end])) && text[end] != '_');
      if (left_ok && right_ok) return true;
      pos = end;
    }
    return false;
  }

  // ORDER BY / LIMIT result directives, with the canonical row sort (cell
  // text, lexicographic) applied first so output is reproducible.
  static void apply_result_directives(Table& t, const Query& q) {
    std::stable_sort(t.rows.begin(), t.rows.end(), [](const Row& a, const Row& b) {
      for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
        std::string x = cell_text(a[i]), y = cell_text(b[i]);
        if (x != y) return x < y;
      }
      return a.size() < b.size();
    });
    if (q.order_by) {
      int col = t.schema.index_of(q.order_by->column);
      if (col < 0)
        throw EvalError("order-by",
                        "ORDER BY names unknown result column '" + q.order_by->column + "'");
      bool asc = q.order_by->ascending;
      std::stable_sort(t.rows.begin(), t.rows.end(), [col, asc](const Row& a, const Row& b) {
        const Value& x = a[col];
        const Value& y = b[col];
        bool less;
        if (x.is_number() && y.is_number())
          less = x.as_number() < y.as_number();
        else
          less = x < y;
        if (x == y) return false;
        return asc ? less : !less;
      });
    }
    if (q.limit && t.rows.size() > *q.limit) t.rows.resize(*q.limit);
  }
};

// Aligned-text rendering for the CLI's --output table mode.
inline std::string render_aligned(const Table& t) {
  std::vector<std::size_t> width(t.schema.columns.size());
  for (std::size_t i = 0; i < t.schema.columns.size(); ++i)
    width[i] = t.schema.columns[i].name.size();
  std::vector<std::vector<std::string>> cells;
  for (const Row& r : t.rows) {
    std::vector<std::string> row;
    for (std::size_t i = 0; i < r.size(); ++i) {
      row.push_back(cell_text(r[i]));
      width[i] = std::max(width[i], row.back().size());
    }
    cells.push_back(std::move(row));
  }
  std::string out;
  auto pad = [&](const std::string& s, std::size_t w) {
    out += s;
    out.append(w - s.size() + 2, ' ');
  };
  for (std::size_t i = 0; i < t.schema.columns.size(); ++i)
    pad(t.schema.columns[i].name, width[i]);
  out += '\n';
  for (std::size_t i = 0; i < t.schema.columns.size(); ++i) {
    out.append(width[i], '-');
    out += "  ";
  }
  out += '\n';
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) pad(row[i], width[i]);
    out += '\n';
  }
  return out;
}

}  // namespace gensql
