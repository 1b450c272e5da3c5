// hpf: command-line driver for the regional house-price factor pipeline.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "hpf/pipeline.hpp"

namespace {

namespace pl = hpf::pipeline;

std::string footer(const pl::CommandInfo& info) {
  std::map<std::string, std::string> docs;
  for (const auto& d : pl::key_docs()) docs[d.key] = d.description;
  std::string s;
  if (!info.keys.empty()) {
    s += "Config keys:\n";
    for (const auto& k : info.keys) s += "  " + k + "  " + docs[k] + "\n";
  }
  if (!info.inputs.empty()) {
    s += "Reads:\n";
    for (const auto& f : info.inputs) s += "  out/<run-id>/" + f + "\n";
  }
  if (!info.outputs.empty()) {
    s += "Writes:\n";
    for (const auto& f : info.outputs) s += "  out/<run-id>/" + f + "\n";
  }
  return s;
}

int exit_code(const std::string& code) {
  if (code == "validation" || code == "config_mismatch") return 2;
  if (code == "missing_artifact" || code == "missing_file") return 3;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regional house-price three-factor pipeline"};
  app.set_version_flag("--version", HPF_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  int threads = 1;
  std::string run_id = "default";
  std::string output_dir = "out";
  app.add_option("--config", config_path, "JSON config file (unknown keys are rejected)");
  app.add_option("--set", sets, "override one config key, e.g. --set horizon=60 (repeatable)");
  app.add_option("--threads", threads, "worker threads for per-region and per-window tasks")->check(CLI::PositiveNumber);
  app.add_option("--run-id", run_id, "artifacts go to <output-dir>/<run-id>/");
  app.add_option("--output-dir", output_dir, "root directory for runs");

  bool list_keys = false;
  auto* keys_cmd = app.add_subcommand("config", "print the effective configuration as JSON");
  keys_cmd->add_flag("--keys", list_keys, "list every key with its description instead");

  std::string chosen;
  for (const auto& info : pl::commands()) {
    auto* sub = app.add_subcommand(info.name, info.description);
    std::string foot = footer(info);
    if (info.name == "all") foot = "Runs each pipeline command in order; see their --help for the keys consumed.\n";
    sub->footer(foot);
    sub->callback([&chosen, name = info.name] { chosen = name; });
  }

  CLI11_PARSE(app, argc, argv);

  const std::string cmd_name = keys_cmd->parsed() ? "config" : chosen;
  pl::Config cfg;
  try {
    if (!config_path.empty()) cfg.merge_file(config_path);
    for (const auto& s : sets) cfg.set(s);
    cfg.threads = threads;
    cfg.run_id = run_id;
    cfg.output_dir = output_dir;

    if (keys_cmd->parsed()) {
      if (list_keys) {
        for (const auto& d : pl::key_docs()) std::cout << d.key << "\t" << d.description << "\n";
      } else {
        std::cout << cfg.json().dump(2) << "\n";
      }
      return 0;
    }
    pl::run(chosen, cfg, std::cerr);
    std::cout << "{\"status\": \"ok\", \"command\": \"" << chosen << "\", \"run_dir\": \""
              << cfg.run_dir().generic_string() << "\", \"config_hash\": \"" << cfg.hash() << "\"}\n";
    return 0;
  } catch (const hpf::Error& e) {
    const std::string j = pl::error_json(cmd_name, e.code(), e.what());
    std::cerr << j << "\n";
    std::error_code ec;
    std::filesystem::create_directories(cfg.run_dir(), ec);
    std::ofstream(cfg.run_dir() / "error.json") << j << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    const std::string j = pl::error_json(cmd_name, "internal", e.what());
    std::cerr << j << "\n";
    std::error_code ec;
    std::filesystem::create_directories(cfg.run_dir(), ec);
    std::ofstream(cfg.run_dir() / "error.json") << j << "\n";
    return 1;
  }
}
