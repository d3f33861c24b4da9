#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "gensql/ami.hpp"
#include "gensql/bayesnet.hpp"
#include "gensql/spe.hpp"
#include "gensql/tmvg.hpp"
#include "json.hpp"

namespace gensql {

using nlohmann::json;

namespace loader_detail {

[[noreturn]] inline void bad(const std::string& path, const std::string& msg) {
  throw Error(Stage::Io, "model-spec", path + ": " + msg);
}

inline const json& field(const json& j, const char* name, const std::string& path) {
  if (!j.is_object() || !j.contains(name)) bad(path, std::string("missing field '") + name + "'");
  return j.at(name);
}

inline double num(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  return j.get<double>();
}

inline std::string str(const json& j, const std::string& path) {
  if (!j.is_string()) bad(path, "expected a string");
  return j.get<std::string>();
}

inline Value label_value(const json& j, const BaseType& t, const std::string& path) {
  if (t.kind == TypeKind::Bool) {
    if (j.is_boolean()) return Value::boolean(j.get<bool>());
    if (j.is_string()) {
      std::string s = j.get<std::string>();
      if (s == "true") return Value::boolean(true);
      if (s == "false") return Value::boolean(false);
    }
    bad(path, "expected a boolean");
  }
  if (j.is_string()) return Value::text(j.get<std::string>());
  bad(path, "expected a label string");
}

}  // namespace loader_detail

// ---------------------------------------------------------------------------
// Schemas
// ---------------------------------------------------------------------------

inline BaseType parse_base_type(const json& j, const std::string& path) {
  using namespace loader_detail;
  std::string kind;
  if (j.is_string())
    kind = j.get<std::string>();
  else if (j.is_object())
    kind = str(field(j, "type", path), path + ".type");
  else
    bad(path, "expected a type name or object");

  if (kind == "real") return BaseType::real();
  if (kind == "posreal") return BaseType::posreal();
  if (kind == "int") return BaseType::integer();
  if (kind == "nat") return BaseType::natural();
  if (kind == "bool") return BaseType::boolean();
  if (kind == "str") return BaseType::str();
  if (kind == "ranged") {
    if (!j.is_object()) bad(path, "ranged type needs lo and hi");
    return BaseType::ranged(num(field(j, "lo", path), path + ".lo"),
                            num(field(j, "hi", path), path + ".hi"));
  }
  if (kind == "categorical") {
    if (!j.is_object()) bad(path, "categorical type needs labels");
    const json& ls = field(j, "labels", path);
    if (!ls.is_array() || ls.empty()) bad(path + ".labels", "expected a non-empty array");
    std::vector<std::string> labels;
    for (const json& l : ls) labels.push_back(str(l, path + ".labels[]"));
    return BaseType::categorical(std::move(labels));
  }
  bad(path, "unknown type '" + kind + "'");
}

inline Schema parse_schema(const json& j, const std::string& path = "schema") {
  using namespace loader_detail;
  Schema s;
  const json& cols = field(j, "columns", path);
  if (!cols.is_array() || cols.empty()) bad(path + ".columns", "expected a non-empty array");
  for (std::size_t i = 0; i < cols.size(); ++i) {
    std::string cpath = path + ".columns[" + std::to_string(i) + "]";
    const json& c = cols[i];
    std::string name = str(field(c, "name", cpath), cpath + ".name");
    // "type" may be a nested object, or a string with lo/hi/labels alongside
    const json& tj = c.contains("type") && c.at("type").is_object() ? c.at("type") : c;
    BaseType type = parse_base_type(tj, cpath);
    s.columns.push_back({std::move(name), std::move(type)});
  }
  s.validate();
  return s;
}

inline Schema load_schema_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open schema file '" + file + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("schema file '" + file + "': " + e.what());
  }
  return parse_schema(j);
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

namespace loader_detail {

inline LeafDist parse_leaf_dist(const json& j, const Column& col, const std::string& path) {
  std::string type = str(field(j, "type", path), path + ".type");
  if (type == "categorical") {
    if (!col.type.is_label_kind()) bad(path, "categorical distribution on a numeric column");
    const json& probs = field(j, "probs", path);
    if (!probs.is_object()) bad(path + ".probs", "expected an object of label: probability");
    std::vector<Value> universe = label_universe(col.type);
    if (universe.empty()) bad(path, "column type has no finite label set");
    std::vector<double> p(universe.size(), 0.0);
    for (auto it = probs.begin(); it != probs.end(); ++it) {
      Value v = col.type.kind == TypeKind::Bool
                    ? (it.key() == "true" ? Value::boolean(true) : Value::boolean(false))
                    : Value::text(it.key());
      bool found = false;
      for (std::size_t i = 0; i < universe.size(); ++i)
        if (universe[i] == v) {
          p[i] = num(it.value(), path + ".probs." + it.key());
          found = true;
        }
      if (!found) bad(path + ".probs", "'" + it.key() + "' is not a label of this column");
    }
    return LeafDist::categorical(std::move(universe), std::move(p));
  }
  if (type == "gaussian") {
    if (col.type.kind != TypeKind::Real)
      bad(path, "gaussian distribution requires a real column");
    double mean = num(field(j, "mean", path), path + ".mean");
    double sd = num(field(j, "stddev", path), path + ".stddev");
    if (!(sd > 0)) bad(path + ".stddev", "must be positive");
    return LeafDist::gaussian(mean, sd);
  }
  if (type == "uniform") {
    if (!col.type.is_continuous()) bad(path, "uniform distribution requires a continuous column");
    double lo = num(field(j, "lo", path), path + ".lo");
    double hi = num(field(j, "hi", path), path + ".hi");
    if (!(lo < hi)) bad(path, "uniform requires lo < hi");
    if (col.type.kind == TypeKind::PosReal && lo < 0) bad(path, "uniform below a posreal column");
    if (col.type.kind == TypeKind::Ranged && (lo < col.type.lo || hi > col.type.hi))
      bad(path, "uniform outside the column's range");
    return LeafDist::uniform(lo, hi);
  }
  bad(path + ".type", "unknown distribution '" + type + "'");
}

inline SpePtr parse_spe_node(const json& j, const Schema& schema, const std::string& path) {
  std::string node = str(field(j, "node", path), path + ".node");
  if (node == "leaf") {
    std::string colname = str(field(j, "column", path), path + ".column");
    int col = schema.index_of(colname);
    if (col < 0) bad(path + ".column", "no column named '" + colname + "'");
    return spe_leaf(col, parse_leaf_dist(field(j, "distribution", path),
                                         schema.columns[col], path + ".distribution"));
  }
  if (node == "product") {
    const json& ch = field(j, "children", path);
    if (!ch.is_array() || ch.empty()) bad(path + ".children", "expected a non-empty array");
    std::vector<SpePtr> children;
    for (std::size_t i = 0; i < ch.size(); ++i)
      children.push_back(
          parse_spe_node(ch[i], schema, path + ".children[" + std::to_string(i) + "]"));
    return spe_product(std::move(children));
  }
  if (node == "sum") {
    const json& ws = field(j, "weights", path);
    const json& ch = field(j, "children", path);
    if (!ws.is_array() || !ch.is_array() || ws.size() != ch.size() || ch.empty())
      bad(path, "sum needs matching non-empty weights and children arrays");
    std::vector<double> weights;
    for (std::size_t i = 0; i < ws.size(); ++i)
      weights.push_back(num(ws[i], path + ".weights[" + std::to_string(i) + "]"));
    std::vector<SpePtr> children;
    for (std::size_t i = 0; i < ch.size(); ++i)
      children.push_back(
          parse_spe_node(ch[i], schema, path + ".children[" + std::to_string(i) + "]"));
    return spe_sum(std::move(weights), std::move(children));
  }
  bad(path + ".node", "unknown node kind '" + node + "'");
}

inline Matrix parse_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) bad(path, "expected a non-empty array of rows");
  std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) bad(path, "expected rows of numbers");
  Matrix m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      bad(path + "[" + std::to_string(r) + "]", "ragged matrix row");
    for (std::size_t c = 0; c < cols; ++c)
      m.at(r, c) = num(j[r][c], path + "[" + std::to_string(r) + "]");
  }
  return m;
}

inline std::vector<double> parse_vector(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    if (e.is_string()) {  // "inf" / "-inf" for unbounded constraints
      std::string s = e.get<std::string>();
      if (s == "inf")
        out.push_back(kInf);
      else if (s == "-inf")
        out.push_back(kNegInf);
      else
        bad(path + "[" + std::to_string(i) + "]", "expected a number or \"inf\"/\"-inf\"");
    } else {
      out.push_back(num(e, path + "[" + std::to_string(i) + "]"));
    }
  }
  return out;
}

inline BnCpdRow parse_cpd_row(const json& j, const BnNode& node, const Schema& schema,
                              bool tabular, const std::vector<Value>& support,
                              const std::string& path) {
  BnCpdRow row;
  const json& given = field(j, "given", path);
  if (!given.is_object()) bad(path + ".given", "expected an object of parent: value");
  for (int pi : node.discrete_parents) {
    const Column& pc = schema.columns[node.parents[pi]];
    if (!given.contains(pc.name)) bad(path + ".given", "missing parent '" + pc.name + "'");
    row.given.push_back(label_value(given.at(pc.name), pc.type, path + ".given." + pc.name));
  }
  if (tabular) {
    const json& probs = field(j, "probs", path);
    if (!probs.is_object()) bad(path + ".probs", "expected an object of value: probability");
    const Column& child = schema.columns[node.col];
    row.probs.assign(support.size(), 0.0);
    for (auto it = probs.begin(); it != probs.end(); ++it) {
      Value v = child.type.kind == TypeKind::Bool
                    ? (it.key() == "true" ? Value::boolean(true) : Value::boolean(false))
                    : Value::text(it.key());
      bool found = false;
      for (std::size_t i = 0; i < support.size(); ++i)
        if (support[i] == v) {
          row.probs[i] = num(it.value(), path + ".probs." + it.key());
          found = true;
        }
      if (!found) bad(path + ".probs", "'" + it.key() + "' is not a value of this column");
    }
  } else {
    row.intercept = num(field(j, "intercept", path), path + ".intercept");
    row.stddev = num(field(j, "stddev", path), path + ".stddev");
    if (j.contains("coeffs")) {
      const json& cs = j.at("coeffs");
      if (!cs.is_object()) bad(path + ".coeffs", "expected an object of parent: coefficient");
      for (int pi : node.continuous_parents) {
        const Column& pc = schema.columns[node.parents[pi]];
        if (!cs.contains(pc.name)) bad(path + ".coeffs", "missing parent '" + pc.name + "'");
        row.coeffs.push_back(num(cs.at(pc.name), path + ".coeffs." + pc.name));
      }
    }
  }
  return row;
}

}  // namespace loader_detail

inline ModelHandle parse_model(const json& j, int particles, const std::string& path = "model") {
  using namespace loader_detail;
  std::string kind = str(field(j, "kind", path), path + ".kind");
  Schema schema = parse_schema(j, path);

  if (kind == "spe") {
    SpePtr root = parse_spe_node(field(j, "root", path), schema, path + ".root");
    spe_validate(root, path + ".root");
    std::set<int> covered = spe_columns(root);
    for (int c = 0; c < static_cast<int>(schema.columns.size()); ++c)
      if (!covered.count(c))
        bad(path + ".root", "column '" + schema.columns[c].name + "' is not covered");
    return std::make_shared<SpeModel>(std::move(schema), std::move(root));
  }

  if (kind == "tmvg") {
    for (const Column& c : schema.columns)
      if (c.type.kind != TypeKind::Real)
        bad(path + ".columns", "gaussian models require real columns ('" + c.name + "')");
    TmvgState state;
    state.mean = parse_vector(field(j, "mean", path), path + ".mean");
    state.cov = parse_matrix(field(j, "cov", path), path + ".cov");
    if (state.mean.size() != schema.columns.size())
      bad(path + ".mean", "length does not match the column count");
    if (j.contains("constraints")) {
      const json& c = j.at("constraints");
      state.a = parse_matrix(field(c, "a", path + ".constraints"), path + ".constraints.a");
      state.lower =
          parse_vector(field(c, "lower", path + ".constraints"), path + ".constraints.lower");
      state.upper =
          parse_vector(field(c, "upper", path + ".constraints"), path + ".constraints.upper");
    } else {
      state.a = Matrix(0, schema.columns.size());
    }
    try {
      tmvg_validate(state);
    } catch (const Error& e) {
      bad(path, e.what());
    }
    return std::make_shared<TmvgModel>(std::move(schema), std::move(state), particles);
  }

  if (kind == "bn") {
    BnSpec spec;
    spec.schema = schema;
    const json& nodes = field(j, "nodes", path);
    if (!nodes.is_array() || nodes.empty()) bad(path + ".nodes", "expected a non-empty array");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      std::string npath = path + ".nodes[" + std::to_string(i) + "]";
      const json& nj = nodes[i];
      BnNode node;
      std::string colname = str(field(nj, "column", npath), npath + ".column");
      node.col = schema.index_of(colname);
      if (node.col < 0) bad(npath + ".column", "no column named '" + colname + "'");
      if (nj.contains("parents")) {
        for (const json& p : nj.at("parents")) {
          int pc = schema.index_of(str(p, npath + ".parents[]"));
          if (pc < 0) bad(npath + ".parents", "unknown parent column");
          node.parents.push_back(pc);
        }
      }
      // classify parents before reading rows so given/coeffs line up
      for (std::size_t pi = 0; pi < node.parents.size(); ++pi) {
        if (schema.columns[node.parents[pi]].type.is_discrete())
          node.discrete_parents.push_back(static_cast<int>(pi));
        else
          node.continuous_parents.push_back(static_cast<int>(pi));
      }
      const json& cpd = field(nj, "cpd", npath);
      std::string type = str(field(cpd, "type", npath + ".cpd"), npath + ".cpd.type");
      node.tabular = type == "tabular";
      if (!node.tabular && type != "linear_gaussian")
        bad(npath + ".cpd.type", "unknown cpd type '" + type + "'");
      node.support = label_universe(schema.columns[node.col].type);
      const json& rows = field(cpd, "rows", npath + ".cpd");
      if (!rows.is_array() || rows.empty())
        bad(npath + ".cpd.rows", "expected a non-empty array");
      for (std::size_t r = 0; r < rows.size(); ++r)
        node.rows.push_back(parse_cpd_row(rows[r], node, schema, node.tabular, node.support,
                                          npath + ".cpd.rows[" + std::to_string(r) + "]"));
      spec.nodes.push_back(std::move(node));
    }
    try {
      bn_validate(spec);
    } catch (const Error& e) {
      bad(path, e.what());
    }
    return std::make_shared<BnModel>(std::make_shared<const BnSpec>(std::move(spec)), particles);
  }

  bad(path + ".kind", "unknown model kind '" + kind + "' (expected spe, tmvg or bn)");
}

inline ModelHandle load_model_file(const std::string& file, int particles) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open model file '" + file + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("model file '" + file + "': " + e.what());
  }
  return parse_model(j, particles);
}

}  // namespace gensql
