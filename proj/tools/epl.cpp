#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "epl/cli_runner.hpp"

namespace fs = std::filesystem;
using epl::json;
using namespace epl::cli;

namespace {

struct Output {
  std::string format = "text";
  std::string out_dir;
  bool timings = false;
  int workers = 1;
  std::optional<std::uint64_t> seed;
};

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw epl::InputError("cannot open " + p.string() + " for writing");
  f << body;
  if (!f) throw epl::InputError("write failed: " + p.string());
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw epl::InputError("cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

int print_schema_errors(const ScenarioError& e) {
  std::cerr << "scenario rejected (" << e.errors().size() << " errors)\n";
  for (const auto& line : e.errors().list()) std::cerr << "  " << line << '\n';
  return 3;
}

int execute(json doc, const Output& out) {
  if (out.seed) doc["seed"] = *out.seed;
  ScenarioSpec spec = parse_scenario(doc);
  RunReport rep = run_scenario(spec, out.workers);
  std::string text = rep.text(out.timings);
  std::string js = rep.to_json(out.timings).dump(2) + "\n";
  if (!out.out_dir.empty()) {
    fs::path dir(out.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw epl::InputError("cannot create " + dir.string() + ": " + ec.message());
    write_file(dir / (rep.name + "_report.json"), js);
    write_file(dir / (rep.name + "_report.txt"), text);
    for (const auto& [file, body] : rep.csv_bundle()) write_file(dir / file, body);
  }
  if (out.format == "json") {
    std::cout << js;
  } else if (out.format == "csv") {
    if (out.out_dir.empty()) std::cout << rep.csv_bundle().at(rep.name + "_summary.csv");
    else
      for (const auto& [file, body] : rep.csv_bundle()) std::cout << (fs::path(out.out_dir) / file).string() << '\n';
  } else {
    std::cout << text;
  }
  return rep.exit_code();
}

void add_output_options(CLI::App* app, Output& out) {
  app->add_option("--seed", out.seed, "Override the scenario seed");
  app->add_option("--workers", out.workers, "Worker threads")->check(CLI::Range(1, 256));
  app->add_option("--out", out.out_dir, "Directory for report and CSV files");
  app->add_option("--format", out.format, "text | json | csv")->check(CLI::IsMember({"text", "json", "csv"}));
  app->add_flag("--timings", out.timings, "Include per-check timings");
}

struct SingleCheck {
  std::string builtin;
  std::string scenario;
  std::string params = "{}";
  std::vector<std::string> param;
};

/// Scenario context from a builtin or a file, with one check built from flags.
json single_check_document(const std::string& op, const SingleCheck& sc) {
  json doc;
  if (!sc.scenario.empty()) doc = json::parse(read_file(sc.scenario));
  else if (!sc.builtin.empty()) {
    const Builtin* b = find_builtin(sc.builtin);
    if (!b) throw epl::InputError("unknown builtin '" + sc.builtin + "'");
    doc = b->document;
  } else {
    throw epl::InputError("give --builtin or --scenario");
  }
  json check = json::parse(sc.params);
  if (!check.is_object()) throw epl::InputError("--params must be a JSON object");
  for (const auto& kv : sc.param) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw epl::InputError("--param expects key=json, got '" + kv + "'");
    std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    json v = json::parse(value, nullptr, false);
    check[key] = v.is_discarded() ? json(value) : v;
  }
  check["op"] = op;
  if (!check.contains("id")) check["id"] = op;
  doc.erase("builtin");
  doc["checks"] = json::array({check});
  doc["name"] = doc.value("name", std::string("scenario")) + "_" + op;
  return doc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"epl: extremal principle toolkit"};
  app.require_subcommand(1);
  Output out;

  auto* run = app.add_subcommand("run", "Run a scenario file");
  std::string scenario_path;
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  add_output_options(run, out);

  auto* list = app.add_subcommand("builtins", "List builtin scenarios");
  auto* show = app.add_subcommand("show", "Print a builtin scenario document");
  std::string show_name;
  show->add_option("name", show_name)->required();

  const std::vector<std::string> ops{"project", "normal", "extremal", "principle", "rnormal", "fuzzy", "aqc", "sip"};
  std::map<std::string, SingleCheck> single;
  std::map<std::string, CLI::App*> single_apps;
  for (const auto& op : ops) {
    auto* sub = app.add_subcommand(op, "Single " + op + " check on a builtin or scenario context");
    auto& sc = single[op];
    sub->add_option("--builtin", sc.builtin, "Builtin scenario providing sets, family and xbar");
    sub->add_option("--scenario", sc.scenario, "Scenario file providing sets, family and xbar");
    sub->add_option("--params", sc.params, "Check parameters as a JSON object");
    sub->add_option("--param", sc.param, "One check parameter as key=json");
    add_output_options(sub, out);
    single_apps[op] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 3;
  }

  try {
    if (*list) {
      for (const auto& b : builtins()) std::cout << b.name << "  " << b.description << '\n';
      return 0;
    }
    if (*show) {
      const Builtin* b = find_builtin(show_name);
      if (!b) throw epl::InputError("unknown builtin '" + show_name + "'");
      std::cout << b->document.dump(2) << '\n';
      return 0;
    }
    if (*run) {
      json doc;
      try {
        doc = json::parse(read_file(scenario_path));
      } catch (const json::exception& e) {
        std::cerr << scenario_path << ": invalid JSON: " << e.what() << '\n';
        return 3;
      }
      return execute(doc, out);
    }
    for (const auto& [op, sub] : single_apps)
      if (*sub) return execute(single_check_document(op, single[op]), out);
  } catch (const ScenarioError& e) {
    return print_schema_errors(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 3;
}
