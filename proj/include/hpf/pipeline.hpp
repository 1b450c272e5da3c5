#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "hpf/arima.hpp"
#include "hpf/factors.hpp"
#include "hpf/synth.hpp"

namespace hpf::pipeline {

using Json = nlohmann::ordered_json;

struct KeyDoc {
  std::string key;  // dotted path
  std::string description;
};

/// Every configuration key with its default and meaning.
const std::vector<KeyDoc>& key_docs();
Json default_config();

class Config {
 public:
  Config();

  /// Deep-merges a JSON object; unknown keys are rejected.
  void merge(const Json& overrides);
  void merge_file(const std::filesystem::path& path);
  /// `key=value` with a dotted key; the value is parsed as JSON when possible.
  void set(const std::string& assignment);

  const Json& json() const { return j_; }
  const Json& at(const std::string& dotted) const;
  double number(const std::string& k) const { return at(k).get<double>(); }
  int integer(const std::string& k) const { return at(k).get<int>(); }
  std::string text(const std::string& k) const { return at(k).get<std::string>(); }
  bool flag(const std::string& k) const { return at(k).get<bool>(); }

  /// Hash of everything that can change artifact contents (excludes run_id,
  /// threads and output_dir).
  std::string hash() const;

  std::string run_id = "default";
  int threads = 1;
  std::filesystem::path output_dir = "out";
  std::filesystem::path run_dir() const { return output_dir / run_id; }

 private:
  Json j_;
};

struct CommandInfo {
  std::string name;
  std::string description;
  std::vector<std::string> keys;     // config keys consumed
  std::vector<std::string> inputs;   // upstream artifacts (relative to the run dir)
  std::vector<std::string> outputs;
};

const std::vector<CommandInfo>& commands();
const CommandInfo& command(const std::string& name);

/// Runs one command (or `all`), writing artifacts under cfg.run_dir().
/// Progress and warnings go to `log`.
void run(const std::string& name, const Config& cfg, std::ostream& log);

/// Writes an error JSON file for a failed command; returns the JSON text.
std::string error_json(const std::string& command, const std::string& code, const std::string& message);

// Helpers shared with the Python bindings and tests.
synth::WorldConfig world_config(const Config& cfg);
factors::FactorSet read_factors(const std::filesystem::path& path, const std::string& expect_hash = {});

}  // namespace hpf::pipeline
