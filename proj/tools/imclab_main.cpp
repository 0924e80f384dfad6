#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "imclab/harness.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string model_path;
  long long seed = -1;
  int threads = -1;
};

imclab::harness::Config resolve(const CommonArgs& args) {
  using imclab::harness::Config;
  Config cfg = args.config_path.empty() ? Config::defaults()
                                        : Config::from_file(args.config_path);
  for (const std::string& o : args.overrides) cfg.set_path(o);
  if (!args.out_dir.empty()) cfg.tree["out_dir"] = args.out_dir;
  if (!args.model_path.empty()) cfg.tree["model_path"] = args.model_path;
  if (args.seed >= 0) cfg.tree["seed"] = args.seed;
  if (args.threads >= 0) cfg.tree["threads"] = args.threads;
  return cfg;
}

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("-c,--config", args.config_path, "JSON config file");
  sub->add_option("--set", args.overrides, "override a config key, e.g. dataset.n=1000");
  sub->add_option("-o,--out", args.out_dir, "output directory");
  sub->add_option("-m,--model", args.model_path, "model checkpoint path");
  sub->add_option("--seed", args.seed, "global seed");
  sub->add_option("--threads", args.threads, "worker pool size");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale input/model attack laboratory"};
  app.require_subcommand(1);

  CommonArgs args;
  std::map<std::string, std::function<int(const imclab::harness::Config&)>> handlers = {
      {"train", imclab::harness::cmd_train},
      {"attack", imclab::harness::cmd_attack},
      {"sweep-tradeoff", imclab::harness::cmd_sweep_tradeoff},
      {"sweep-surface", imclab::harness::cmd_sweep_surface},
      {"detect", imclab::harness::cmd_detect},
      {"analyze", imclab::harness::cmd_analyze},
      {"retrain", imclab::harness::cmd_retrain},
  };
  const std::map<std::string, std::string> descriptions = {
      {"train", "train a benign model and save its checkpoint"},
      {"attack", "run pgd/poison/imc/trojan attacks against a checkpoint"},
      {"sweep-tradeoff", "fidelity-specificity trade-off sweep over (lambda, nu)"},
      {"sweep-surface", "efficacy surface over (fidelity cap, specificity cap)"},
      {"detect", "apply the detector suite to attack outputs"},
      {"analyze", "closed-form leverage surface and its verification report"},
      {"retrain", "adversarial re-training and robustness comparison"},
  };
  for (const auto& [name, fn] : handlers) {
    CLI::App* sub = app.add_subcommand(name, descriptions.at(name));
    add_common(sub, args);
    sub->callback([&args, fn = fn]() {
      const int rc = fn(resolve(args));
      if (rc != 0) throw CLI::RuntimeError(rc);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
