#pragma once

#include <map>
#include <string>

#include "gensql/error.hpp"
#include "gensql/value.hpp"

namespace gensql {

// The global context: declared tables and models, keyed by identifier.
// Identifiers are shared between the two sorts and must be distinct.
class GlobalEnv {
 public:
  void declare_table(const std::string& id, Schema schema) {
    check_fresh(id);
    schema.identifier = id;
    schema.validate();
    tables_[id] = std::move(schema);
  }

  void declare_model(const std::string& id, Schema schema) {
    check_fresh(id);
    schema.identifier = id;
    schema.validate();
    models_[id] = std::move(schema);
  }

  bool has(const std::string& id) const {
    return tables_.count(id) > 0 || models_.count(id) > 0;
  }
  bool is_table(const std::string& id) const { return tables_.count(id) > 0; }
  bool is_model(const std::string& id) const { return models_.count(id) > 0; }

  const Schema& table_schema(const std::string& id) const {
    auto it = tables_.find(id);
    if (it == tables_.end())
      throw TypeError("unknown-identifier", "no table named '" + id + "'", {});
    return it->second;
  }

  const Schema& model_schema(const std::string& id) const {
    auto it = models_.find(id);
    if (it == models_.end())
      throw TypeError("unknown-identifier", "no model named '" + id + "'", {});
    return it->second;
  }

  const std::map<std::string, Schema>& tables() const { return tables_; }
  const std::map<std::string, Schema>& models() const { return models_; }

 private:
  void check_fresh(const std::string& id) const {
    if (has(id))
      throw Error(Stage::Io, "duplicate-identifier",
                  "identifier '" + id + "' is already declared");
  }

  std::map<std::string, Schema> tables_;
  std::map<std::string, Schema> models_;
};

}  // namespace gensql
