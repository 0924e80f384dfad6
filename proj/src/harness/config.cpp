#include "imclab/harness.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace imclab::harness {

Config Config::defaults() {
  Config cfg;
  cfg.tree = Json::parse(R"({
    "seed": 1,
    "out_dir": "out",
    "threads": 1,
    "model_path": "",
    "dataset": {
      "kind": "patches",
      "side": 8,
      "classes": 4,
      "n": 4000,
      "noise": 0.1,
      "outer_radius": 1.3,
      "dim": 10,
      "fractions": [0.5, 0.25, 0.25]
    },
    "model": {
      "hidden": 24,
      "activation": "relu",
      "optimizer": "sgd",
      "lr": 0.05,
      "epochs": 30,
      "batch": 32
    },
    "attack": {
      "kind": "imc",
      "eps": 0.03137254901960784,
      "alpha": 0.00392156862745098,
      "n_iter": 10,
      "lambda": 0.0,
      "nu": 1.0,
      "kappa": 0.75,
      "max_outer": 20,
      "mix_copies": -1,
      "retrain_subset": 512,
      "model_lr": 0.02,
      "targets": 20,
      "save_models": false
    },
    "trojan": {
      "top": 0, "left": 0, "size": 0.4,
      "transparency": 0.3,
      "mode": "shared",
      "optimize_trigger": true,
      "lambda_mask": 1.0,
      "nu_spec": 0.5,
      "strip_entropy_nu": 0.0,
      "outer_iters": 15,
      "trigger_steps": 40,
      "trigger_lr": 0.05,
      "kappa": 0.75,
      "target": 0,
      "model_lr": 0.01
    },
    "sweep": {
      "lambdas": [0.5, 2.0, 8.0],
      "nus": [0.25, 1.0, 4.0],
      "eps": 0.5,
      "alpha": 0.01,
      "n_iter": 10,
      "kappa": 0.75,
      "max_outer": 20,
      "targets": 100,
      "seeds": 1,
      "baseline_alpha": 0.002
    },
    "surface": {
      "fidelity_caps": [0.0, 0.01, 0.02, 0.05],
      "specificity_caps": [0.0, 0.005, 0.01, 0.02],
      "nu": 1.0,
      "kappa": 0.75,
      "max_outer": 20,
      "targets": 50
    },
    "detect": {
      "mode": "imc_sweep",
      "eps_grid": [0.005, 0.01, 0.02, 0.05, 0.1],
      "targets": 20,
      "seeds": 10,
      "nu": 1.0,
      "kappa": 0.75,
      "smooth_sigma": 0.1,
      "smooth_samples": 100,
      "smooth_threshold": 0.9,
      "curvature_delta": 0.001,
      "strip_threshold": 0.05,
      "strip_n_test": 8,
      "nc_samples": 256,
      "nc_epochs": 10
    },
    "analyze": {
      "dims": [2, 10, 50],
      "h_over_r": [0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0],
      "z_start": 0.05,
      "z_step": 0.05,
      "z_count": 19
    },
    "retrain": {
      "epochs": 10,
      "eps": 0.1,
      "alpha": 0.02,
      "hop_steps": 4,
      "lr": 0.01,
      "eval_pairs": 100,
      "eval_eps": 0.1,
      "eval_alpha": 0.01,
      "eval_n_iter": 40,
      "imc_eps": 0.001
    }
  })");
  return cfg;
}

Config Config::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  Json overrides = Json::parse(is);
  Config cfg = defaults();
  cfg.merge(overrides);
  return cfg;
}

void Config::merge(const Json& overrides) { tree.merge_patch(overrides); }

void Config::set_path(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::runtime_error("override must look like key.path=value: " + assignment);
  }
  std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::parse_error&) {
    value = raw;  // plain string
  }
  std::string pointer = "/";
  for (char c : key) pointer += (c == '.') ? '/' : c;
  tree[Json::json_pointer(pointer)] = value;
}

const Json& Config::at(const std::string& dotted_path) const {
  std::string pointer = "/";
  for (char c : dotted_path) pointer += (c == '.') ? '/' : c;
  try {
    return tree.at(Json::json_pointer(pointer));
  } catch (const Json::exception&) {
    throw std::runtime_error("missing config key: " + dotted_path);
  }
}

double Config::num(const std::string& p) const { return at(p).get<double>(); }
std::int64_t Config::integer(const std::string& p) const { return at(p).get<std::int64_t>(); }
std::string Config::str(const std::string& p) const { return at(p).get<std::string>(); }

std::vector<double> Config::num_list(const std::string& p) const {
  return at(p).get<std::vector<double>>();
}

std::uint64_t config_hash(const Json& tree) {
  // FNV-1a over the canonical dump (object keys are sorted by construction).
  // out_dir and threads are environmental: they must not change results, so
  // they are excluded and equivalent runs carry the same hash.
  Json canonical = tree;
  canonical.erase("out_dir");
  canonical.erase("threads");
  const std::string s = canonical.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace imclab::harness
