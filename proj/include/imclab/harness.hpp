#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

// Experiment orchestration: configuration tree, CSV emission, a deterministic
// worker pool, and the CLI subcommand entry points.

namespace imclab::harness {

using Json = nlohmann::json;

// Configuration: defaults overlaid with a JSON file and CLI overrides.
struct Config {
  Json tree;

  static Config defaults();
  static Config from_file(const std::string& path);
  void merge(const Json& overrides);
  // "a.b.c=value" with the value parsed as JSON when possible
  void set_path(const std::string& assignment);

  const Json& at(const std::string& dotted_path) const;
  double num(const std::string& dotted_path) const;
  std::int64_t integer(const std::string& dotted_path) const;
  std::string str(const std::string& dotted_path) const;
  std::vector<double> num_list(const std::string& dotted_path) const;
};

std::uint64_t config_hash(const Json& tree);

std::string format_double(double v);

// CSV with a metadata comment line (config hash + seed) and a header row.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns,
            std::uint64_t cfg_hash, std::uint64_t seed);
  void row(const std::vector<std::string>& cells);
  void close();

 private:
  std::string path_;
  std::string buffer_;
  std::size_t n_columns_;
  bool closed_ = false;
};

// Runs fn(0..n-1) on `threads` workers. Work items only write into their own
// result slots, so assembly order is independent of the schedule.
void run_cells(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

int cmd_train(const Config& cfg);
int cmd_attack(const Config& cfg);
int cmd_sweep_tradeoff(const Config& cfg);
int cmd_sweep_surface(const Config& cfg);
int cmd_detect(const Config& cfg);
int cmd_analyze(const Config& cfg);
int cmd_retrain(const Config& cfg);

}  // namespace imclab::harness
