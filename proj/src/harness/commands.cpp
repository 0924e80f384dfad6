#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numeric>

#include "imclab/analytics.hpp"
#include "imclab/attacks.hpp"
#include "imclab/detectors.hpp"
#include "imclab/harness.hpp"
#include "imclab/metrics.hpp"
#include "imclab/micronet.hpp"
#include "imclab/rng.hpp"
#include "imclab/synthdata.hpp"

namespace imclab::harness {

namespace fs = std::filesystem;

namespace {

struct Task {
  LabeledSet train, test, reference;
  std::size_t grid_side = 0;
  int classes = 0;
};

Task build_task(const Config& cfg) {
  Task task;
  const std::string kind = cfg.str("dataset.kind");
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  LabeledSet full;
  if (kind == "patches") {
    task.grid_side = static_cast<std::size_t>(cfg.integer("dataset.side"));
    task.classes = static_cast<int>(cfg.integer("dataset.classes"));
    full = gen_patches(task.grid_side, task.classes,
                       static_cast<std::size_t>(cfg.integer("dataset.n")),
                       cfg.num("dataset.noise"), Rng::derive(seed, 101));
  } else if (kind == "spheres") {
    task.classes = 2;
    full = gen_spheres(static_cast<std::size_t>(cfg.integer("dataset.dim")),
                       cfg.num("dataset.outer_radius"),
                       static_cast<std::size_t>(cfg.integer("dataset.n")),
                       Rng::derive(seed, 101));
  } else {
    throw std::runtime_error("unknown dataset kind: " + kind);
  }
  const std::vector<double> fr = cfg.num_list("dataset.fractions");
  if (fr.size() != 3) throw std::runtime_error("dataset.fractions must have 3 entries");
  SplitResult s = split(full, fr[0], fr[1], fr[2], Rng::derive(seed, 102));
  task.train = std::move(s.train);
  task.test = std::move(s.test);
  task.reference = std::move(s.reference);
  return task;
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "quadratic") return Activation::quadratic;
  if (name == "identity") return Activation::identity;
  throw std::runtime_error("unknown activation: " + name);
}

OptimConfig optim_from(const Config& cfg) {
  OptimConfig o;
  o.kind = cfg.str("model.optimizer") == "adam" ? OptimConfig::Kind::adam
                                                : OptimConfig::Kind::sgd;
  o.lr = cfg.num("model.lr");
  o.batch = static_cast<int>(cfg.integer("model.batch"));
  return o;
}

std::string model_path(const Config& cfg) {
  const std::string p = cfg.str("model_path");
  if (!p.empty()) return p;
  return cfg.str("out_dir") + "/model.ckpt";
}

MicroNet load_model(const Config& cfg) { return load_net(model_path(cfg)); }

// (input, random wrong target) pairs drawn from the test split
struct TargetPick {
  Vec x0;
  int target;
  int true_label;
  std::size_t index;
};

std::vector<TargetPick> pick_targets(const LabeledSet& test, int count, std::uint64_t seed) {
  if (test.size() == 0) throw std::runtime_error("empty test split");
  std::vector<TargetPick> picks;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const std::size_t k = rng.below(test.size());
    int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(test.class_count)));
    while (t == test.labels[k]) {
      t = static_cast<int>(rng.below(static_cast<std::uint64_t>(test.class_count)));
    }
    picks.push_back({test.inputs[k], t, test.labels[k], k});
  }
  return picks;
}

// nested derivation keeps per-purpose streams disjoint even for large indices
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
  return Rng::derive(Rng::derive(seed, purpose), index);
}

AttackConfig base_attack_config(const Config& cfg) {
  AttackConfig a;
  a.eps = cfg.num("attack.eps");
  a.alpha = cfg.num("attack.alpha");
  a.n_iter = static_cast<int>(cfg.integer("attack.n_iter"));
  a.lambda = cfg.num("attack.lambda");
  a.nu = cfg.num("attack.nu");
  a.kappa = cfg.num("attack.kappa");
  a.max_outer = static_cast<int>(cfg.integer("attack.max_outer"));
  a.mix_copies = static_cast<int>(cfg.integer("attack.mix_copies"));
  a.retrain_subset = static_cast<int>(cfg.integer("attack.retrain_subset"));
  a.optim.lr = cfg.num("attack.model_lr");
  return a;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

int cmd_train(const Config& cfg) {
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  const std::string out_dir = cfg.str("out_dir");
  fs::create_directories(out_dir);

  Task task = build_task(cfg);
  const auto hidden = static_cast<std::size_t>(cfg.integer("model.hidden"));
  const Activation act = parse_activation(cfg.str("model.activation"));
  MicroNet net = make_net(task.train.dim,
                          {{hidden, act},
                           {static_cast<std::size_t>(task.classes), Activation::identity}},
                          Rng::derive(seed, 201));

  OptimConfig optim = optim_from(cfg);
  const int epochs = static_cast<int>(cfg.integer("model.epochs"));

  CsvWriter csv(out_dir + "/train_metrics.csv",
                {"epoch", "train_loss", "train_accuracy", "test_accuracy"},
                config_hash(cfg.tree), seed);
  OptimConfig step = optim;
  step.epochs = 1;
  for (int e = 0; e < epochs; ++e) {
    step.seed = sub_seed(seed, 3, static_cast<std::uint64_t>(e));
    net = train(net, task.train, step);
    csv.row({std::to_string(e), format_double(mean_loss(net, task.train)),
             format_double(accuracy(net, task.train)), format_double(accuracy(net, task.test))});
  }
  csv.close();
  save_net(net, out_dir + "/model.ckpt");
  std::cout << "trained model: train_acc=" << accuracy(net, task.train)
            << " test_acc=" << accuracy(net, task.test) << "\n";
  return 0;
}

int cmd_attack(const Config& cfg) {
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  const std::string out_dir = cfg.str("out_dir");
  fs::create_directories(out_dir);
  Task task = build_task(cfg);
  const MicroNet net = load_model(cfg);
  const std::string kind = cfg.str("attack.kind");

  if (kind == "trojan" || kind == "backdoor-fixed") {
    TrojanConfig tc;
    tc.region = {static_cast<std::size_t>(cfg.integer("trojan.top")),
                 static_cast<std::size_t>(cfg.integer("trojan.left")),
                 cfg.num("trojan.size")};
    tc.transparency = cfg.num("trojan.transparency");
    tc.mode = cfg.str("trojan.mode") == "free" ? TriggerMode::free_mask
                                               : TriggerMode::shared_transparency;
    tc.optimize_trigger = kind == "trojan" && cfg.at("trojan.optimize_trigger").get<bool>();
    tc.lambda_mask = kind == "trojan" ? cfg.num("trojan.lambda_mask") : 0.0;
    tc.nu_spec = cfg.num("trojan.nu_spec");
    tc.strip_entropy_nu = kind == "trojan" ? cfg.num("trojan.strip_entropy_nu") : 0.0;
    tc.outer_iters = static_cast<int>(cfg.integer("trojan.outer_iters"));
    tc.trigger_steps = static_cast<int>(cfg.integer("trojan.trigger_steps"));
    tc.trigger_lr = cfg.num("trojan.trigger_lr");
    tc.kappa = cfg.num("trojan.kappa");
    tc.optim.lr = cfg.num("trojan.model_lr");
    tc.seed = Rng::derive(seed, 400);
    const int target = static_cast<int>(cfg.integer("trojan.target"));

    const TrojanResult res = trojan_star(net, task.train, task.test, task.reference, target, tc);
    save_net(res.net, out_dir + "/theta_star.ckpt");
    CsvWriter trig(out_dir + "/trigger.csv", {"pixel", "mask", "pattern"},
                   config_hash(cfg.tree), seed);
    for (std::size_t i = 0; i < res.trigger.mask.size(); ++i) {
      trig.row({std::to_string(i), format_double(res.trigger.mask[i]),
                format_double(res.trigger.pattern[i])});
    }
    trig.close();
    CsvWriter csv(out_dir + "/attacks.csv",
                  {"target_id", "kappa", "eps", "lambda", "nu", "efficacy", "fidelity",
                   "specificity", "iterations", "converged"},
                  config_hash(cfg.tree), seed);
    double mask_l1 = 0.0;
    for (double m : res.trigger.mask) mask_l1 += m;
    csv.row({std::to_string(target), format_double(tc.kappa), "nan",
             format_double(tc.lambda_mask), format_double(tc.nu_spec),
             format_double(res.asr), format_double(mask_l1),
             format_double(res.specificity_loss), std::to_string(res.outer_iterations_used),
             "1"});
    csv.close();
    std::cout << "backdoor asr=" << res.asr << " specificity=" << res.specificity_loss << "\n";
    return 0;
  }

  const int n_targets = static_cast<int>(cfg.integer("attack.targets"));
  const std::vector<TargetPick> picks = pick_targets(task.test, n_targets,
                                                     Rng::derive(seed, 401));
  const bool save_models = cfg.at("attack.save_models").get<bool>();
  const AttackConfig base = base_attack_config(cfg);
  struct Row {
    double efficacy, fidelity, specificity;
    int iterations;
    bool converged;
  };
  std::vector<Row> rows(picks.size());

  run_cells(picks.size(), static_cast<int>(cfg.integer("threads")), [&](std::size_t i) {
    AttackConfig a = base;
    a.seed = sub_seed(seed, 5, i);
    const TargetPick& p = picks[i];
    if (kind == "pgd") {
      const Vec x_star = pgd_input(net, p.x0, p.target, a);
      rows[i] = {efficacy(net, x_star, p.target),
                 fidelity_loss(x_star, p.x0, Norm::linf), 0.0, a.n_iter, true};
    } else if (kind == "poison") {
      a.lambda = kInf;
      const PoisonResult r =
          poison_model(net, {{p.x0, p.target}}, task.train, task.reference, a);
      rows[i] = {r.efficacy[0], 0.0, r.specificity_loss, r.outer_iterations_used,
                 r.reached[0]};
      if (save_models) save_net(r.net, cfg.str("out_dir") + "/theta_star_" +
                                           std::to_string(i) + ".ckpt");
    } else if (kind == "imc") {
      const AttackOutcome r = imc(net, p.x0, p.target, task.train, task.reference, a);
      rows[i] = {r.efficacy, r.fidelity_loss, r.specificity_loss, r.outer_iterations_used,
                 r.converged};
      if (save_models) save_net(r.theta_star, cfg.str("out_dir") + "/theta_star_" +
                                                  std::to_string(i) + ".ckpt");
    } else {
      throw std::runtime_error("unknown attack kind: " + kind);
    }
  });

  CsvWriter csv(out_dir + "/attacks.csv",
                {"target_id", "kappa", "eps", "lambda", "nu", "efficacy", "fidelity",
                 "specificity", "iterations", "converged"},
                config_hash(cfg.tree), seed);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv.row({std::to_string(i), format_double(base.kappa), format_double(base.eps),
             format_double(base.lambda), format_double(base.nu),
             format_double(rows[i].efficacy), format_double(rows[i].fidelity),
             format_double(rows[i].specificity), std::to_string(rows[i].iterations),
             rows[i].converged ? "1" : "0"});
  }
  csv.close();
  return 0;
}

int cmd_sweep_tradeoff(const Config& cfg) {
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  const std::string out_dir = cfg.str("out_dir");
  fs::create_directories(out_dir);
  Task task = build_task(cfg);
  const MicroNet net = load_model(cfg);

  const std::vector<double> lambdas = cfg.num_list("sweep.lambdas");
  const std::vector<double> nus = cfg.num_list("sweep.nus");
  const int n_targets = static_cast<int>(cfg.integer("sweep.targets"));
  const int n_seeds = static_cast<int>(cfg.integer("sweep.seeds"));
  const double kappa = cfg.num("sweep.kappa");
  const int threads = static_cast<int>(cfg.integer("threads"));

  AttackConfig base = base_attack_config(cfg);
  base.eps = cfg.num("sweep.eps");
  base.alpha = cfg.num("sweep.alpha");
  base.n_iter = static_cast<int>(cfg.integer("sweep.n_iter"));
  base.kappa = kappa;
  base.max_outer = static_cast<int>(cfg.integer("sweep.max_outer"));

  const std::vector<TargetPick> picks =
      pick_targets(task.test, n_targets, Rng::derive(seed, 401));

  // single-vector baselines per target, averaged across targets
  struct Baseline {
    double fid = 0.0, spec = 0.0;
    bool poison_ok = false, pgd_ok = false;
  };
  std::vector<Baseline> baselines(picks.size());
  const double baseline_alpha = cfg.num("sweep.baseline_alpha");
  run_cells(picks.size(), threads, [&](std::size_t i) {
    const TargetPick& p = picks[i];
    const Vec x_pgd =
        pgd_to_confidence(net, p.x0, p.target, kappa, baseline_alpha, 4000, base.eps);
    baselines[i].fid = fidelity_loss(x_pgd, p.x0, Norm::linf);
    baselines[i].pgd_ok = efficacy(net, x_pgd, p.target) >= kappa;
    AttackConfig pa = base;
    pa.lambda = kInf;
    pa.nu = base.nu;
    pa.seed = sub_seed(seed, 6, i);
    const PoisonResult r = poison_model(net, {{p.x0, p.target}}, task.train, task.reference, pa);
    baselines[i].spec = r.specificity_loss;
    baselines[i].poison_ok = r.reached[0];
  });
  double base_fid = 0.0, base_spec = 0.0;
  int pgd_fail = 0, poison_fail = 0;
  for (const Baseline& b : baselines) {
    base_fid += b.fid;
    base_spec += b.spec;
    pgd_fail += b.pgd_ok ? 0 : 1;
    poison_fail += b.poison_ok ? 0 : 1;
  }
  base_fid /= static_cast<double>(picks.size());
  base_spec /= static_cast<double>(picks.size());

  const std::size_t n_cells = lambdas.size() * nus.size();
  const std::size_t total_cells = n_cells * static_cast<std::size_t>(n_seeds);
  std::vector<std::vector<double>> fid_acc(total_cells), spec_acc(total_cells);
  std::vector<std::vector<int>> conv_acc(total_cells);
  for (auto& v : fid_acc) v.assign(picks.size(), 0.0);
  for (auto& v : spec_acc) v.assign(picks.size(), 0.0);
  for (auto& v : conv_acc) v.assign(picks.size(), 0);

  run_cells(total_cells * picks.size(), threads, [&](std::size_t j) {
    const std::size_t cell = j / picks.size();
    const std::size_t ti = j % picks.size();
    const std::size_t grid_cell = cell % n_cells;
    AttackConfig a = base;
    a.lambda = lambdas[grid_cell / nus.size()];
    a.nu = nus[grid_cell % nus.size()];
    a.seed = sub_seed(seed, 7, j);
    const TargetPick& p = picks[ti];
    const AttackOutcome r = imc(net, p.x0, p.target, task.train, task.reference, a);
    fid_acc[cell][ti] = r.fidelity_loss;
    spec_acc[cell][ti] = r.specificity_loss;
    conv_acc[cell][ti] = (r.efficacy >= kappa) ? 1 : 0;
  });

  CsvWriter csv(out_dir + "/tradeoff.csv",
                {"kind", "sweep_seed", "lambda", "nu", "kappa", "raw_fidelity",
                 "raw_specificity", "fidelity_norm", "specificity_norm", "phi",
                 "unconverged"},
                config_hash(cfg.tree), seed);
  csv.row({"anchor_pgd", "0", "nan", "nan", format_double(kappa), format_double(base_fid),
           "0", "1", "0", "nan", std::to_string(pgd_fail)});
  csv.row({"anchor_poison", "0", "nan", "nan", format_double(kappa), "0",
           format_double(base_spec), "0", "1", "nan", std::to_string(poison_fail)});
  for (std::size_t cell = 0; cell < total_cells; ++cell) {
    const std::size_t grid_cell = cell % n_cells;
    const auto sweep_seed = static_cast<int>(cell / n_cells);
    double fid = 0.0, spec = 0.0;
    int unconverged = 0;
    for (std::size_t ti = 0; ti < picks.size(); ++ti) {
      fid += fid_acc[cell][ti];
      spec += spec_acc[cell][ti];
      unconverged += 1 - conv_acc[cell][ti];
    }
    fid /= static_cast<double>(picks.size());
    spec /= static_cast<double>(picks.size());
    const TradeoffPoint pt = normalize_tradeoff(fid, spec, kappa,
                                                lambdas[grid_cell / nus.size()],
                                                nus[grid_cell % nus.size()], base_fid,
                                                base_spec);
    const double phi = pt.fidelity_norm > 0.0 ? empirical_leverage(pt)
                                              : std::nan("");
    csv.row({"imc", std::to_string(sweep_seed), format_double(pt.lambda),
             format_double(pt.nu), format_double(kappa), format_double(fid),
             format_double(spec), format_double(pt.fidelity_norm),
             format_double(pt.specificity_norm), format_double(phi),
             std::to_string(unconverged)});
  }
  csv.close();
  return 0;
}

int cmd_sweep_surface(const Config& cfg) {
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  const std::string out_dir = cfg.str("out_dir");
  fs::create_directories(out_dir);
  Task task = build_task(cfg);
  const MicroNet net = load_model(cfg);

  const std::vector<double> fcaps = cfg.num_list("surface.fidelity_caps");
  const std::vector<double> scaps = cfg.num_list("surface.specificity_caps");
  const int n_targets = static_cast<int>(cfg.integer("surface.targets"));
  const double kappa = cfg.num("surface.kappa");
  const int threads = static_cast<int>(cfg.integer("threads"));

  AttackConfig base = base_attack_config(cfg);
  base.kappa = kappa;
  base.nu = cfg.num("surface.nu");
  base.max_outer = static_cast<int>(cfg.integer("surface.max_outer"));

  const std::vector<TargetPick> picks =
      pick_targets(task.test, n_targets, Rng::derive(seed, 401));

  const char* methods[3] = {"pgd", "poison", "imc"};
  const std::size_t n_cells = fcaps.size() * scaps.size() * 3;
  std::vector<std::vector<double>> eff(n_cells);
  for (auto& v : eff) v.assign(picks.size(), 0.0);

  run_cells(n_cells * picks.size(), threads, [&](std::size_t j) {
    const std::size_t cell = j / picks.size();
    const std::size_t ti = j % picks.size();
    const std::size_t m = cell % 3;
    const std::size_t f = (cell / 3) % fcaps.size();
    const std::size_t s = cell / 3 / fcaps.size();
    AttackConfig a = base;
    a.eps = fcaps[f];
    a.alpha = std::max(fcaps[f] / 8.0, 1e-4);
    a.specificity_cap = scaps[s];
    a.seed = sub_seed(seed, 8, j);
    const TargetPick& p = picks[ti];
    if (m == 0) {  // input vector only
      a.nu = kInf;
      if (a.eps == 0.0) {
        eff[cell][ti] = efficacy(net, p.x0, p.target);
      } else {
        const Vec x_star = pgd_input(net, p.x0, p.target, a);
        eff[cell][ti] = efficacy(net, x_star, p.target);
      }
    } else if (m == 1) {  // model vector only
      a.lambda = kInf;
      const PoisonResult r = poison_model(net, {{p.x0, p.target}}, task.train,
                                          task.reference, a);
      eff[cell][ti] = r.efficacy[0];
    } else {
      const AttackOutcome r = imc(net, p.x0, p.target, task.train, task.reference, a);
      eff[cell][ti] = r.efficacy;
    }
  });

  CsvWriter csv(out_dir + "/surface.csv",
                {"method", "fidelity_cap", "specificity_cap", "mean_efficacy"},
                config_hash(cfg.tree), seed);
  for (std::size_t s = 0; s < scaps.size(); ++s) {
    for (std::size_t f = 0; f < fcaps.size(); ++f) {
      for (std::size_t m = 0; m < 3; ++m) {
        const std::size_t cell = (s * fcaps.size() + f) * 3 + m;
        double mean = 0.0;
        for (double v : eff[cell]) mean += v;
        mean /= static_cast<double>(picks.size());
        csv.row({methods[m], format_double(fcaps[f]), format_double(scaps[s]),
                 format_double(mean)});
      }
    }
  }
  csv.close();
  return 0;
}

int cmd_detect(const Config& cfg) {
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  const std::string out_dir = cfg.str("out_dir");
  fs::create_directories(out_dir);
  Task task = build_task(cfg);
  const MicroNet net = load_model(cfg);
  const std::string mode = cfg.str("detect.mode");
  const int threads = static_cast<int>(cfg.integer("threads"));

  if (mode == "imc_sweep") {
    const std::vector<double> eps_grid = cfg.num_list("detect.eps_grid");
    const int n_targets = static_cast<int>(cfg.integer("detect.targets"));
    const int n_seeds = static_cast<int>(cfg.integer("detect.seeds"));
    const double sigma = cfg.num("detect.smooth_sigma");
    const int smooth_samples = static_cast<int>(cfg.integer("detect.smooth_samples"));
    const double smooth_threshold = cfg.num("detect.smooth_threshold");
    const double delta = cfg.num("detect.curvature_delta");

    AttackConfig base = base_attack_config(cfg);
    base.nu = cfg.num("detect.nu");
    base.kappa = cfg.num("detect.kappa");
    base.lambda = 0.0;

    struct Point {
      double mean_fid = 0.0, smooth_rate = 0.0, curvature_ks = 0.0;
    };
    const std::size_t n_points = eps_grid.size() * static_cast<std::size_t>(n_seeds);
    std::vector<Point> points(n_points);

    run_cells(n_points, threads, [&](std::size_t j) {
      const std::size_t e = j % eps_grid.size();
      AttackConfig a = base;
      a.eps = eps_grid[e];
      a.alpha = std::max(a.eps / 8.0, 1e-4);
      const std::uint64_t cell_seed = sub_seed(seed, 9, j);
      const std::vector<TargetPick> picks =
          pick_targets(task.test, n_targets, Rng::derive(cell_seed, 1));
      double fid = 0.0, flags = 0.0;
      std::vector<double> curv_attacked, curv_benign;
      Rng ref_rng(Rng::derive(cell_seed, 2));
      for (std::size_t ti = 0; ti < picks.size(); ++ti) {
        AttackConfig ai = a;
        ai.seed = Rng::derive(cell_seed, 10 + ti);
        const TargetPick& p = picks[ti];
        const AttackOutcome r = imc(net, p.x0, p.target, task.train, task.reference, ai);
        fid += r.fidelity_loss;
        const SmoothingResult sm =
            smoothing_detect(r.theta_star, r.x_star, sigma, smooth_samples, smooth_threshold,
                             Rng::derive(cell_seed, 50 + ti));
        flags += sm.flagged ? 1.0 : 0.0;
        curv_attacked.push_back(curvature_profile(r.theta_star, r.x_star, p.target, delta));
        for (int b = 0; b < 20; ++b) {
          const Vec& xb = task.reference.inputs[ref_rng.below(task.reference.size())];
          curv_benign.push_back(
              curvature_profile(r.theta_star, xb, predict(r.theta_star, xb), delta));
        }
      }
      points[j].mean_fid = fid / static_cast<double>(picks.size());
      points[j].smooth_rate = flags / static_cast<double>(picks.size());
      points[j].curvature_ks = ks_statistic(curv_attacked, curv_benign);
    });

    CsvWriter csv(out_dir + "/detect_sweep.csv",
                  {"eps", "seed_index", "mean_fidelity", "smoothing_rate", "curvature_ks"},
                  config_hash(cfg.tree), seed);
    for (std::size_t j = 0; j < n_points; ++j) {
      csv.row({format_double(eps_grid[j % eps_grid.size()]),
               std::to_string(j / eps_grid.size()), format_double(points[j].mean_fid),
               format_double(points[j].smooth_rate), format_double(points[j].curvature_ks)});
    }
    csv.close();
    return 0;
  }

  if (mode != "backdoor") throw std::runtime_error("unknown detect mode: " + mode);

  // backdoor pipeline: fixed-trigger baseline vs. evasion-optimized variant
  TrojanConfig tc;
  tc.region = {static_cast<std::size_t>(cfg.integer("trojan.top")),
               static_cast<std::size_t>(cfg.integer("trojan.left")), cfg.num("trojan.size")};
  tc.transparency = cfg.num("trojan.transparency");
  tc.kappa = cfg.num("trojan.kappa");
  tc.outer_iters = static_cast<int>(cfg.integer("trojan.outer_iters"));
  tc.trigger_steps = static_cast<int>(cfg.integer("trojan.trigger_steps"));
  tc.trigger_lr = cfg.num("trojan.trigger_lr");
  tc.optim.lr = cfg.num("trojan.model_lr");
  const int target = static_cast<int>(cfg.integer("trojan.target"));
  const double strip_threshold = cfg.num("detect.strip_threshold");
  const int strip_n = static_cast<int>(cfg.integer("detect.strip_n_test"));

  TrojanConfig baseline = tc;
  baseline.optimize_trigger = false;
  baseline.lambda_mask = 0.0;
  baseline.nu_spec = 0.0;
  baseline.strip_entropy_nu = 0.0;
  baseline.seed = Rng::derive(seed, 1000);

  TrojanConfig evasive = tc;
  evasive.optimize_trigger = true;
  evasive.lambda_mask = cfg.num("trojan.lambda_mask");
  evasive.nu_spec = cfg.num("trojan.nu_spec");
  evasive.strip_entropy_nu = cfg.num("trojan.strip_entropy_nu");
  evasive.seed = Rng::derive(seed, 1001);

  TrojanResult results[2];
  const TrojanConfig* configs[2] = {&baseline, &evasive};
  run_cells(2, threads, [&](std::size_t i) {
    results[i] = trojan_star(net, task.train, task.test, task.reference, target, *configs[i]);
  });

  CsvWriter csv(out_dir + "/detect_backdoor.csv",
                {"variant", "asr", "strip_f1", "anomaly_index_target", "ensemble_attacked",
                 "ensemble_benign", "specificity"},
                config_hash(cfg.tree), seed);
  ReverseTriggerConfig rc;
  rc.n_samples = static_cast<int>(cfg.integer("detect.nc_samples"));
  rc.epochs = static_cast<int>(cfg.integer("detect.nc_epochs"));

  for (int v = 0; v < 2; ++v) {
    const TrojanResult& res = results[v];
    // STRIP F-1 over trigger-embedded vs clean test inputs
    std::vector<Vec> attacked, benign;
    const std::size_t n_items = std::min<std::size_t>(task.test.size(), 100);
    for (std::size_t i = 0; i < n_items; ++i) {
      attacked.push_back(embed_trigger(task.test.inputs[i], res.trigger));
      benign.push_back(task.test.inputs[i]);
    }
    const double f1 = strip_f1(res.net, attacked, benign, task.reference, strip_threshold,
                               strip_n, sub_seed(seed, 11, static_cast<std::uint64_t>(v)));
    // trigger reverse engineering per class, MAD anomaly index of the target
    std::vector<double> l1(static_cast<std::size_t>(task.classes), 0.0);
    run_cells(static_cast<std::size_t>(task.classes), threads, [&](std::size_t c) {
      ReverseTriggerConfig rcc = rc;
      rcc.seed = sub_seed(seed, 12, static_cast<std::uint64_t>(v) * 16 + c);
      l1[c] = reverse_trigger(res.net, static_cast<int>(c), task.reference, rcc).l1;
    });
    const std::vector<double> idx = anomaly_index(l1);
    // ensemble self-entropy deviation with the recovered target trigger
    const TriggerSpec recovered =
        reverse_trigger(res.net, target, task.reference, rc).trigger;
    std::vector<double> weights;
    for (int w = 1; w <= 9; ++w) weights.push_back(0.1 * w);
    double ens_att = 0.0, ens_ben = 0.0;
    const std::size_t n_ens = std::min<std::size_t>(attacked.size(), 40);
    for (std::size_t i = 0; i < n_ens; ++i) {
      ens_att += ensemble_strip_score(res.net, attacked[i], recovered, task.reference, weights,
                                      4, sub_seed(seed, 13, i));
      ens_ben += ensemble_strip_score(res.net, benign[i], recovered, task.reference, weights,
                                      4, sub_seed(seed, 14, i));
    }
    ens_att /= static_cast<double>(n_ens);
    ens_ben /= static_cast<double>(n_ens);
    csv.row({v == 0 ? "baseline" : "evasive", format_double(res.asr), format_double(f1),
             format_double(idx[static_cast<std::size_t>(target)]), format_double(ens_att),
             format_double(ens_ben), format_double(res.specificity_loss)});
  }
  csv.close();
  return 0;
}

int cmd_analyze(const Config& cfg) {
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  const std::string out_dir = cfg.str("out_dir");
  fs::create_directories(out_dir);

  std::vector<int> dims;
  for (const auto& v : cfg.at("analyze.dims")) dims.push_back(v.get<int>());
  const std::vector<double> alphas = cfg.num_list("analyze.h_over_r");
  const double z_start = cfg.num("analyze.z_start");
  const double z_step = cfg.num("analyze.z_step");
  const int z_count = static_cast<int>(cfg.integer("analyze.z_count"));

  CsvWriter phi_csv(out_dir + "/analyze_phi.csv", {"d", "h_over_r", "z", "phi"},
                    config_hash(cfg.tree), seed);
  for (int d : dims) {
    for (double a : alphas) {
      for (int k = 0; k < z_count; ++k) {
        const double z = z_start + z_step * k;
        phi_csv.row({std::to_string(d), format_double(a), format_double(z),
                     format_double(analytics::leverage_phi(d, a, z))});
      }
    }
  }
  phi_csv.close();

  analytics::Prop2Grid grid;
  grid.dims = dims;
  grid.h_over_r = alphas;
  const analytics::Prop2Report rep = analytics::verify_prop2(grid);

  // dual-quadrature identity cross-check
  double max_fact_err = 0.0;
  for (int d : {1, 2, 5, 10, 50}) {
    for (int i = 0; i <= 20; ++i) {
      const double x = -1.0 + 0.1 * i;
      const double lhs = analytics::sin_power_integral(d, std::acos(x));
      const double rhs = analytics::flat_form_integral(d, x);
      max_fact_err = std::max(max_fact_err, std::abs(lhs - rhs));
    }
  }

  CsvWriter rep_csv(out_dir + "/analyze_report.csv", {"check", "value", "pass"},
                    config_hash(cfg.tree), seed);
  rep_csv.row({"min_phi", format_double(rep.min_phi), rep.min_phi > 1.0 ? "1" : "0"});
  rep_csv.row({"phi_at_one_error", format_double(rep.max_phi_one_error),
               rep.max_phi_one_error < 1e-9 ? "1" : "0"});
  rep_csv.row({"g_at_one", format_double(rep.max_abs_g_at_one),
               rep.max_abs_g_at_one < 1e-9 ? "1" : "0"});
  rep_csv.row({"min_g", format_double(rep.min_g), rep.min_g > 0.0 ? "1" : "0"});
  rep_csv.row({"max_g_prime", format_double(rep.max_g_prime),
               rep.max_g_prime < 0.0 ? "1" : "0"});
  rep_csv.row({"identity_max_error", format_double(max_fact_err),
               max_fact_err < 1e-9 ? "1" : "0"});
  rep_csv.close();

  const bool pass = rep.pass && max_fact_err < 1e-9;
  std::cout << (pass ? "PASS" : "FAIL") << ": min_phi=" << rep.min_phi
            << " identity_max_error=" << max_fact_err << "\n";
  return pass ? 0 : 1;
}

int cmd_retrain(const Config& cfg) {
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  const std::string out_dir = cfg.str("out_dir");
  fs::create_directories(out_dir);
  Task task = build_task(cfg);
  const MicroNet net = load_model(cfg);

  AttackConfig rt;
  rt.eps = cfg.num("retrain.eps");
  rt.alpha = cfg.num("retrain.alpha");
  rt.optim.lr = cfg.num("retrain.lr");
  rt.seed = Rng::derive(seed, 1500);

  AttackConfig eval;
  eval.eps = cfg.num("retrain.eval_eps");
  eval.alpha = cfg.num("retrain.eval_alpha");
  eval.n_iter = static_cast<int>(cfg.integer("retrain.eval_n_iter"));
  const int pairs = static_cast<int>(cfg.integer("retrain.eval_pairs"));

  const double asr_before = pgd_attack_success_rate(net, task.test, eval, pairs,
                                                    Rng::derive(seed, 1501));
  const MicroNet defended = adversarial_retrain(
      net, task.train, rt, static_cast<int>(cfg.integer("retrain.epochs")),
      static_cast<int>(cfg.integer("retrain.hop_steps")));
  const double asr_after = pgd_attack_success_rate(defended, task.test, eval, pairs,
                                                   Rng::derive(seed, 1502));

  // co-optimization against the defended model at a much smaller input budget
  AttackConfig ic = base_attack_config(cfg);
  ic.eps = cfg.num("retrain.imc_eps");
  ic.alpha = ic.eps / 4.0;
  const std::vector<TargetPick> picks = pick_targets(task.test, pairs,
                                                     Rng::derive(seed, 1503));
  std::vector<int> wins(picks.size(), 0);
  run_cells(picks.size(), static_cast<int>(cfg.integer("threads")), [&](std::size_t i) {
    AttackConfig a = ic;
    a.seed = sub_seed(seed, 16, i);
    const AttackOutcome r =
        imc(defended, picks[i].x0, picks[i].target, task.train, task.reference, a);
    wins[i] = r.efficacy >= a.kappa ? 1 : 0;
  });
  double imc_asr = 0.0;
  for (int w : wins) imc_asr += w;
  imc_asr /= static_cast<double>(picks.size());

  save_net(defended, out_dir + "/defended.ckpt");
  CsvWriter csv(out_dir + "/retrain.csv",
                {"pgd_asr_before", "pgd_asr_after", "imc_asr_after", "imc_eps",
                 "accuracy_before", "accuracy_after"},
                config_hash(cfg.tree), seed);
  csv.row({format_double(asr_before), format_double(asr_after), format_double(imc_asr),
           format_double(ic.eps), format_double(accuracy(net, task.test)),
           format_double(accuracy(defended, task.test))});
  csv.close();
  std::cout << "pgd_asr " << asr_before << " -> " << asr_after << ", imc_asr(defended) "
            << imc_asr << "\n";
  return 0;
}

}  // namespace imclab::harness
