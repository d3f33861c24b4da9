#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gensql/session.hpp"

using namespace gensql;

namespace {

int exit_code_for(const Error& e) {
  switch (e.stage()) {
    case Stage::Parse: return 2;
    case Stage::Type: return 3;
    case Stage::Normalize:
    case Stage::Safety:
    case Stage::Lower:
    case Stage::Eval: return 4;
    case Stage::Io: return 5;
  }
  return 1;
}

void drain_diagnostics(Session& session) {
  for (const Diagnostic& d : session.diags) {
    std::cerr << (d.severity == Diagnostic::Severity::Warning ? "warning: " : "note: ")
              << d.message << "\n";
  }
  session.diags.clear();
}

void print_result(const Session::RunResult& result, const std::string& format) {
  if (!result.lowered_text.empty()) std::cerr << result.lowered_text;
  if (format == "table")
    std::cout << render_aligned(result.table);
  else
    std::cout << write_csv(result.table);
}

int run_query(Session& session, const std::string& text, const std::string& format) {
  try {
    Session::RunResult result = session.run(text);
    drain_diagnostics(session);
    print_result(result, format);
    return 0;
  } catch (const Error& e) {
    drain_diagnostics(session);
    std::cerr << e.render(text) << "\n";
    return exit_code_for(e);
  }
}

std::pair<std::string, std::string> split_binding(const std::string& arg, const char* what) {
  std::size_t eq = arg.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= arg.size())
    throw IoError(std::string(what) + " expects name=path, got '" + arg + "'");
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

void print_schema(const std::string& sort, const std::string& name, const Schema& schema) {
  std::cout << sort << " " << name << "(";
  for (std::size_t i = 0; i < schema.columns.size(); ++i)
    std::cout << (i ? ", " : "") << schema.columns[i].name << ": "
              << schema.columns[i].type.to_string();
  std::cout << ")\n";
}

void repl(Session& session, const std::string& format) {
  std::string line;
  std::cout << "gensql> " << std::flush;
  while (std::getline(std::cin, line)) {
    if (!line.empty() && line[0] == '.') {
      std::istringstream words(line);
      std::string cmd;
      words >> cmd;
      try {
        if (cmd == ".quit" || cmd == ".exit") break;
        if (cmd == ".seed") {
          std::uint64_t s;
          if (words >> s)
            session.eval.options.seed = s;
          else
            std::cerr << "usage: .seed <integer>\n";
        } else if (cmd == ".schema") {
          for (const auto& [name, schema] : session.env.tables())
            print_schema("table", name, schema);
          for (const auto& [name, schema] : session.env.models())
            print_schema("model", name, schema);
        } else if (cmd == ".load") {
          std::string kind, name;
          words >> kind >> name;
          if (kind == "table") {
            std::string csv, schema;
            words >> csv >> schema;
            if (name.empty() || csv.empty() || schema.empty()) {
              std::cerr << "usage: .load table <name> <csv-path> <schema-path>\n";
            } else {
              session.load_table_files(name, csv, schema);
              std::cout << "loaded table " << name << "\n";
            }
          } else if (kind == "model") {
            std::string path;
            words >> path;
            if (name.empty() || path.empty()) {
              std::cerr << "usage: .load model <name> <path>\n";
            } else {
              session.load_model_file_as(name, path);
              std::cout << "loaded model " << name << "\n";
            }
          } else {
            std::cerr << "usage: .load table|model ...\n";
          }
        } else {
          std::cerr << "unknown command " << cmd << " (try .load .schema .seed .quit)\n";
        }
      } catch (const Error& e) {
        std::cerr << e.render("") << "\n";
      }
      std::cout << "gensql> " << std::flush;
      continue;
    }
    if (!line.empty()) run_query(session, line, format);
    std::cout << "gensql> " << std::flush;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"query engine for generative models of database tables"};

  std::vector<std::string> table_args, schema_args, model_args;
  std::string query;
  bool use_repl = false;
  std::string format = "csv";
  EvalOptions options;
  bool no_cache = false, no_indep = false, strict_safety = false, dump_lowered = false;

  if (const char* env_seed = std::getenv("GENSQL_SEED"))
    options.seed = std::strtoull(env_seed, nullptr, 10);

  app.add_option("--table", table_args, "load a data table: name=csv-path")
      ->type_name("NAME=PATH");
  app.add_option("--table-schema", schema_args, "schema for a loaded table: name=schema-path")
      ->type_name("NAME=PATH");
  app.add_option("--model", model_args, "load a model spec: name=path")->type_name("NAME=PATH");
  app.add_option("--query", query, "query text to run");
  app.add_flag("--repl", use_repl, "interactive shell");
  app.add_option("--seed", options.seed, "random seed (default 0, or GENSQL_SEED)");
  app.add_option("--particles", options.particles, "compute budget for approximate backends")
      ->check(CLI::PositiveNumber);
  app.add_option("--mi-samples", options.mi_samples, "MUTUAL INFO sample count")
      ->check(CLI::PositiveNumber);
  app.add_flag("--no-cache", no_cache, "disable conditioned-model and result caching");
  app.add_flag("--no-indep-opt", no_indep, "disable the independence simplification");
  app.add_flag("--strict-safety", strict_safety, "treat unsafe queries as errors");
  app.add_flag("--dump-lowered", dump_lowered, "print the lowered plan to stderr");
  app.add_option("--output", format, "output format")->check(CLI::IsMember({"csv", "table"}));

  CLI11_PARSE(app, argc, argv);

  options.cache_enabled = !no_cache;
  options.indep_opt_enabled = !no_indep;

  Session session;
  session.eval.options = options;
  session.strict_safety = strict_safety;
  session.dump_lowered = dump_lowered;

  try {
    std::map<std::string, std::string> schemas;
    for (const std::string& arg : schema_args) {
      auto [name, path] = split_binding(arg, "--table-schema");
      schemas[name] = path;
    }
    for (const std::string& arg : table_args) {
      auto [name, path] = split_binding(arg, "--table");
      auto it = schemas.find(name);
      if (it == schemas.end())
        throw IoError("table '" + name + "' has no --table-schema entry");
      session.load_table_files(name, path, it->second);
    }
    for (const std::string& arg : model_args) {
      auto [name, path] = split_binding(arg, "--model");
      session.load_model_file_as(name, path);
    }
  } catch (const Error& e) {
    std::cerr << e.render("") << "\n";
    return exit_code_for(e);
  }
  drain_diagnostics(session);

  if (use_repl) {
    repl(session, format);
    return 0;
  }
  if (query.empty()) {
    std::cerr << "nothing to do: pass --query or --repl\n";
    return 1;
  }
  return run_query(session, query, format);
}
