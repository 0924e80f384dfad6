#include "imclab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "imclab/kernels.hpp"
#include "imclab/metrics.hpp"
#include "imclab/rng.hpp"

namespace imclab {

namespace {

bool weight_active(double w) { return std::isfinite(w); }

Vec penalized_grad_input(const MicroNet& net, const Vec& x, const Vec& x0, int t,
                         double lambda, double* ce_out) {
  const ForwardTrace tr = forward_trace(net, x);
  if (ce_out != nullptr) {
    *ce_out = -std::log(std::max(tr.probs[static_cast<std::size_t>(t)], 1e-300));
  }
  Vec g = backward(net, x, tr, cross_entropy_dlogits(tr.probs, t), nullptr);
  if (lambda > 0.0 && weight_active(lambda)) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += lambda * (x[i] - x0[i]);
  }
  return g;
}

double penalized_input_loss(const MicroNet& net, const Vec& x, const Vec& x0, int t,
                            double lambda) {
  double v = loss(net, x, t);
  if (lambda > 0.0 && weight_active(lambda)) {
    v += 0.5 * lambda * kernels::l2sq_diff(x.data(), x0.data(), x.size());
  }
  return v;
}

// Cached benign predictions on the reference subsample R' used by the
// differentiable KL specificity surrogate.
struct SpecRegularizer {
  std::vector<Vec> inputs;
  std::vector<Vec> benign_probs;

  static SpecRegularizer build(const MicroNet& benign, const LabeledSet& reference,
                               int pool_size, Rng& rng) {
    SpecRegularizer reg;
    if (reference.size() == 0 || pool_size <= 0) return reg;
    std::vector<std::size_t> idx(reference.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    const std::size_t take = std::min<std::size_t>(idx.size(), pool_size);
    for (std::size_t k = 0; k < take; ++k) {
      reg.inputs.push_back(reference.inputs[idx[k]]);
      reg.benign_probs.push_back(forward(benign, reg.inputs.back()));
    }
    return reg;
  }

  double mean_kl(const MicroNet& net) const {
    if (inputs.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const Vec p = forward(net, inputs[i]);
      const Vec& q = benign_probs[i];
      for (std::size_t c = 0; c < p.size(); ++c) {
        if (q[c] > 0.0) acc += q[c] * (std::log(q[c]) - std::log(std::max(p[c], 1e-300)));
      }
    }
    return acc / static_cast<double>(inputs.size());
  }
};

struct Injected {
  const Vec* x;
  int label;
};

// One re-training epoch over a random subset of the training data, each batch
// mixed with `mix` injected copies, plus the weighted KL surrogate gradient.
void model_step_epoch(MicroNet& net, const LabeledSet& train,
                      const std::vector<Injected>& injected, int mix, int batch_size,
                      int subset_size, double nu, const SpecRegularizer& reg,
                      int reg_per_batch, const OptimConfig& optim, AdamState* adam, Rng& rng,
                      std::size_t* inject_cursor) {
  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  const std::size_t subset =
      subset_size > 0 ? std::min<std::size_t>(train.size(), subset_size) : train.size();

  const int clean_per_batch = std::max(1, batch_size - mix);
  for (std::size_t start = 0; start < subset; start += clean_per_batch) {
    const std::size_t end = std::min(subset, start + clean_per_batch);
    ParamGrad g = ParamGrad::zeros_like(net);
    std::size_t count = 0;
    for (std::size_t k = start; k < end; ++k, ++count) {
      const Vec& x = train.inputs[idx[k]];
      const ForwardTrace t = forward_trace(net, x);
      backward(net, x, t, cross_entropy_dlogits(t.probs, train.labels[idx[k]]), &g);
    }
    if (!injected.empty()) {
      for (int k = 0; k < mix; ++k, ++count) {
        const Injected& inj = injected[(*inject_cursor)++ % injected.size()];
        const ForwardTrace t = forward_trace(net, *inj.x);
        backward(net, *inj.x, t, cross_entropy_dlogits(t.probs, inj.label), &g);
      }
    }
    g.scale(1.0 / static_cast<double>(count));
    if (nu > 0.0 && weight_active(nu) && !reg.inputs.empty() && reg_per_batch > 0) {
      const int draws = std::min<int>(reg_per_batch, static_cast<int>(reg.inputs.size()));
      ParamGrad kg = ParamGrad::zeros_like(net);
      for (int k = 0; k < draws; ++k) {
        const std::size_t i = rng.below(reg.inputs.size());
        const ForwardTrace t = forward_trace(net, reg.inputs[i]);
        Vec dlogits(t.probs.size());
        for (std::size_t c = 0; c < dlogits.size(); ++c) {
          dlogits[c] = t.probs[c] - reg.benign_probs[i][c];
        }
        backward(net, reg.inputs[i], t, dlogits, &kg);
      }
      kg.scale(nu / static_cast<double>(draws));
      g.add(kg);
    }
    apply_update(net, g, optim, adam);
  }
}

Vec pgd_block(const MicroNet& net, const Vec& x_init, const Vec& x0, int t,
              const AttackConfig& cfg, bool track_best) {
  Vec x = x_init;
  Vec best = x_init;
  double best_loss = penalized_input_loss(net, x_init, x0, t, cfg.lambda);
  for (int it = 0; it < cfg.n_iter; ++it) {
    const Vec g = penalized_grad_input(net, x, x0, t, cfg.lambda, nullptr);
    kernels::pgd_step(x.data(), g.data(), x0.data(), cfg.alpha, cfg.eps, x.size());
    const double cur = penalized_input_loss(net, x, x0, t, cfg.lambda);
    if (cur < best_loss) {
      best_loss = cur;
      best = x;
    }
  }
  return track_best ? best : x;
}

}  // namespace

void AttackConfig::validate() const {
  if (eps < 0.0) throw std::invalid_argument("eps must be >= 0");
  if (alpha <= 0.0) throw std::invalid_argument("alpha must be positive");
  if (n_iter < 1) throw std::invalid_argument("n_iter must be >= 1");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (nu < 0.0) throw std::invalid_argument("nu must be >= 0");
  if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("kappa must lie in (0,1)");
  if (max_outer < 0) throw std::invalid_argument("max_outer must be >= 0");
  optim.validate();
}

Vec pgd_input(const MicroNet& net, const Vec& x0, int t, const AttackConfig& cfg) {
  cfg.validate();
  if (t < 0 || t >= net.class_count()) throw std::invalid_argument("target class out of range");
  if (x0.size() != net.input_dim) throw std::invalid_argument("dimension mismatch");
  if (cfg.eps == 0.0 || !weight_active(cfg.lambda)) return x0;
  return pgd_block(net, x0, x0, t, cfg, /*track_best=*/true);
}

PoisonResult poison_model(const MicroNet& net, const std::vector<std::pair<Vec, int>>& targets,
                          const LabeledSet& train, const LabeledSet& reference,
                          const AttackConfig& cfg) {
  cfg.validate();
  if (targets.empty()) throw std::invalid_argument("poison_model needs at least one target");

  PoisonResult result;
  result.net = net;
  result.efficacy.assign(targets.size(), 0.0);
  result.reached.assign(targets.size(), false);

  Rng rng(cfg.seed);
  SpecRegularizer reg = SpecRegularizer::build(net, reference, cfg.spec_reg_pool, rng);
  AdamState adam = AdamState::zeros_like(net);
  std::vector<Injected> injected;
  injected.reserve(targets.size());
  for (const auto& [x, t] : targets) injected.push_back({&x, t});
  const int mix = cfg.mix_copies < 0 ? cfg.optim.batch / 2 : cfg.mix_copies;

  MicroNet best_net = net;
  double best_mean_eff = -1.0;
  double best_spec = 0.0;
  const bool capped = std::isfinite(cfg.specificity_cap);

  std::size_t cursor = 0;
  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    for (int e = 0; e < cfg.model_epochs_per_outer; ++e) {
      model_step_epoch(result.net, train, injected, mix, cfg.optim.batch, cfg.retrain_subset,
                       cfg.nu, reg, cfg.spec_reg_per_batch, cfg.optim, &adam, rng, &cursor);
    }
    if (!params_finite(result.net)) {
      throw TrainingDiverged(outer, "poisoning diverged at outer iteration " +
                                        std::to_string(outer));
    }
    result.outer_iterations_used = outer + 1;
    bool all = true;
    double mean_eff = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      result.efficacy[i] = efficacy(result.net, targets[i].first, targets[i].second);
      result.reached[i] = result.efficacy[i] >= cfg.kappa;
      all = all && result.reached[i];
      mean_eff += result.efficacy[i];
    }
    mean_eff /= static_cast<double>(targets.size());
    if (capped) {
      const double spec = specificity_loss(result.net, net, reference);
      if (spec <= cfg.specificity_cap && mean_eff > best_mean_eff) {
        best_mean_eff = mean_eff;
        best_net = result.net;
        best_spec = spec;
      }
    }
    if (all) break;
  }

  if (capped) {
    result.net = best_net;
    result.specificity_loss = best_mean_eff < 0.0 ? 0.0 : best_spec;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      result.efficacy[i] = best_mean_eff < 0.0
                               ? efficacy(net, targets[i].first, targets[i].second)
                               : efficacy(result.net, targets[i].first, targets[i].second);
      result.reached[i] = result.efficacy[i] >= cfg.kappa;
    }
    if (best_mean_eff < 0.0) result.net = net;  // no feasible iterate
  } else {
    result.specificity_loss =
        cfg.max_outer > 0 ? specificity_loss(result.net, net, reference) : 0.0;
  }
  return result;
}

AttackOutcome imc(const MicroNet& net, const Vec& x0, int t, const LabeledSet& train,
                  const LabeledSet& reference, const AttackConfig& cfg) {
  cfg.validate();
  if (x0.size() != net.input_dim) throw std::invalid_argument("dimension mismatch");
  if (t < 0 || t >= net.class_count()) throw std::invalid_argument("target class out of range");

  AttackOutcome out;
  out.x_star = x0;
  out.theta_star = net;

  Rng rng(cfg.seed);
  SpecRegularizer reg = SpecRegularizer::build(net, reference, cfg.spec_reg_pool, rng);
  AdamState adam = AdamState::zeros_like(net);
  const int mix = cfg.mix_copies < 0 ? cfg.optim.batch / 2 : cfg.mix_copies;
  const bool input_active = weight_active(cfg.lambda) && cfg.eps > 0.0;
  const bool model_active = weight_active(cfg.nu) && cfg.max_outer > 0;
  const bool capped = std::isfinite(cfg.specificity_cap);

  Vec x = x0;
  double prev_in = std::numeric_limits<double>::quiet_NaN();
  double prev_model = std::numeric_limits<double>::quiet_NaN();

  Vec best_x = x0;
  MicroNet best_net = net;
  double best_eff = -1.0;
  double best_fid = 0.0, best_spec = 0.0;
  std::size_t cursor = 0;

  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    if (input_active) {
      for (int s = 0; s < cfg.input_steps_per_outer; ++s) {
        x = pgd_block(out.theta_star, x, x0, t, cfg, /*track_best=*/false);
      }
    }
    if (model_active) {
      std::vector<Injected> injected{{&x, t}};
      for (int e = 0; e < cfg.model_epochs_per_outer; ++e) {
        model_step_epoch(out.theta_star, train, injected, mix, cfg.optim.batch,
                         cfg.retrain_subset, cfg.nu, reg, cfg.spec_reg_per_batch, cfg.optim,
                         &adam, rng, &cursor);
      }
      if (!params_finite(out.theta_star)) {
        throw TrainingDiverged(outer, "model step diverged at outer iteration " +
                                          std::to_string(outer));
      }
    }
    out.outer_iterations_used = outer + 1;

    const double eff = efficacy(out.theta_star, x, t);
    if (eff >= cfg.kappa && out.first_success_iteration < 0) {
      out.first_success_iteration = outer + 1;
    }
    const double fid = kernels::linf_diff(x.data(), x0.data(), x.size());
    const double spec = specificity_loss(out.theta_star, net, reference);
    if (!capped || spec <= cfg.specificity_cap) {
      if (eff > best_eff) {
        best_eff = eff;
        best_x = x;
        best_net = out.theta_star;
        best_fid = fid;
        best_spec = spec;
      }
    }

    const double cur_in = penalized_input_loss(out.theta_star, x, x0, t, cfg.lambda);
    const double cur_model =
        loss(out.theta_star, x, t) +
        (cfg.nu > 0.0 && weight_active(cfg.nu) ? cfg.nu * reg.mean_kl(out.theta_star) : 0.0);
    const bool in_stable = !input_active || (std::isfinite(prev_in) &&
                                             std::abs(cur_in - prev_in) < 1e-4);
    const bool model_stable = !model_active || (std::isfinite(prev_model) &&
                                                std::abs(cur_model - prev_model) < 1e-4);
    prev_in = cur_in;
    prev_model = cur_model;
    if (eff >= cfg.kappa && in_stable && model_stable) {
      out.converged = true;
      break;
    }
  }

  if (capped && best_eff >= 0.0) {
    out.x_star = best_x;
    out.theta_star = best_net;
    out.efficacy = best_eff;
    out.fidelity_loss = best_fid;
    out.specificity_loss = best_spec;
  } else if (capped) {
    // no feasible iterate: report the benign state
    out.x_star = x0;
    out.theta_star = net;
    out.efficacy = efficacy(net, x0, t);
    out.fidelity_loss = 0.0;
    out.specificity_loss = 0.0;
    out.converged = false;
  } else {
    out.x_star = x;
    out.efficacy = efficacy(out.theta_star, x, t);
    out.fidelity_loss = kernels::linf_diff(x.data(), x0.data(), x.size());
    out.specificity_loss =
        cfg.max_outer > 0 ? specificity_loss(out.theta_star, net, reference) : 0.0;
  }
  return out;
}

Vec init_trigger(const MicroNet& net, std::size_t grid_side, const RectRegion& region,
                 const LabeledSet& pool, int ascent_steps, double lr) {
  if (net.layers.size() < 2) throw std::invalid_argument("init_trigger needs a hidden layer");
  const std::size_t d = grid_side * grid_side;
  if (net.input_dim != d) throw std::invalid_argument("network does not match the grid");
  const std::size_t s = region.side_px(grid_side);
  if (region.top + s > grid_side || region.left + s > grid_side) {
    throw std::invalid_argument("trigger region exceeds the grid");
  }

  // Least mean post-activation unit of the first hidden layer over the pool.
  const Layer& l0 = net.layers[0];
  Vec mean_act(l0.w.rows, 0.0);
  for (const Vec& x : pool.inputs) {
    Vec pre(l0.w.rows), post;
    for (std::size_t i = 0; i < l0.w.rows; ++i) {
      pre[i] = kernels::dot(l0.w.row(i), x.data(), d) + l0.b[i];
    }
    post = pre;
    if (l0.act == Activation::relu) kernels::relu(pre.data(), post.data(), pre.size());
    if (l0.act == Activation::quadratic) kernels::square(pre.data(), post.data(), pre.size());
    kernels::axpy(1.0, post.data(), mean_act.data(), mean_act.size());
  }
  const std::size_t unit = static_cast<std::size_t>(
      std::min_element(mean_act.begin(), mean_act.end()) - mean_act.begin());

  Vec pattern(d, 0.0);
  std::vector<std::size_t> region_idx;
  for (std::size_t r = region.top; r < region.top + s; ++r) {
    for (std::size_t c = region.left; c < region.left + s; ++c) {
      region_idx.push_back(r * grid_side + c);
      pattern[r * grid_side + c] = 0.5;
    }
  }

  for (int step = 0; step < ascent_steps; ++step) {
    for (std::size_t i : region_idx) {
      pattern[i] = std::min(1.0, std::max(0.0, pattern[i] + lr * l0.w.at(unit, i)));
    }
  }
  return pattern;
}

double trigger_asr(const MicroNet& net, const LabeledSet& test, const TriggerSpec& trigger,
                   int t, double kappa) {
  if (test.size() == 0) throw std::invalid_argument("empty test set");
  std::size_t hits = 0;
  for (const Vec& x : test.inputs) {
    const Vec probs = forward(net, embed_trigger(x, trigger));
    if (probs[static_cast<std::size_t>(t)] >= kappa) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

namespace {

double inv_tanh01(double v) {
  const double c = std::min(1.0 - 1e-3, std::max(1e-3, v));
  return std::atanh(2.0 * c - 1.0);
}

struct TriggerVars {
  // change of variables: value = (tanh(w) + 1) / 2 on the covered pixels
  std::vector<std::size_t> region_idx;
  Vec w_pattern;
  Vec w_mask;        // free mode
  double w_p = 0.0;  // shared-transparency mode
  TriggerMode mode;

  TriggerSpec to_spec(std::size_t d, double p_init) const {
    TriggerSpec spec;
    spec.mask.assign(d, 0.0);
    spec.pattern.assign(d, 0.0);
    spec.transparency = p_init;
    for (std::size_t k = 0; k < region_idx.size(); ++k) {
      spec.pattern[region_idx[k]] = 0.5 * (std::tanh(w_pattern[k]) + 1.0);
      if (mode == TriggerMode::free_mask) {
        spec.mask[region_idx[k]] = 0.5 * (std::tanh(w_mask[k]) + 1.0);
      } else {
        spec.mask[region_idx[k]] = 0.5 * (std::tanh(w_p) + 1.0);
      }
    }
    if (mode == TriggerMode::shared_transparency) {
      spec.transparency = 1.0 - 0.5 * (std::tanh(w_p) + 1.0);
    }
    return spec;
  }
};

}  // namespace

TrojanResult trojan_star(const MicroNet& net, const LabeledSet& train, const LabeledSet& test,
                         const LabeledSet& reference, int t, const TrojanConfig& cfg) {
  if (t < 0 || t >= net.class_count()) throw std::invalid_argument("target class out of range");
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(
      static_cast<double>(net.input_dim))));
  if (side * side != net.input_dim) {
    throw std::invalid_argument("trojan_star expects a square pixel grid");
  }

  Rng rng(cfg.seed);
  const Vec init_pattern =
      init_trigger(net, side, cfg.region, train, cfg.init_ascent_steps, cfg.init_ascent_lr);

  TriggerVars vars;
  vars.mode = cfg.mode;
  const std::size_t s = cfg.region.side_px(side);
  for (std::size_t r = cfg.region.top; r < cfg.region.top + s; ++r) {
    for (std::size_t c = cfg.region.left; c < cfg.region.left + s; ++c) {
      vars.region_idx.push_back(r * side + c);
    }
  }
  const std::size_t covered = vars.region_idx.size();
  if (covered == 0) throw std::invalid_argument("trigger region is empty");
  vars.w_pattern.resize(covered);
  for (std::size_t k = 0; k < covered; ++k) {
    vars.w_pattern[k] = inv_tanh01(init_pattern[vars.region_idx[k]]);
  }
  vars.w_p = inv_tanh01(1.0 - cfg.transparency);
  if (cfg.mode == TriggerMode::free_mask) {
    vars.w_mask.assign(covered, inv_tanh01(1.0 - cfg.transparency));
  }
  // normalize the mask L1 penalty by the number of covered pixels
  const double lambda_eff = cfg.lambda_mask / static_cast<double>(covered);

  // fixed-trigger mode keeps the exact requested mask and the initializer's
  // pattern; only the optimizing mode goes through the tanh reparameterization
  TriggerSpec fixed_spec = make_rect_trigger(side, cfg.region, init_pattern,
                                             cfg.transparency);
  auto current_spec = [&]() {
    return cfg.optimize_trigger ? vars.to_spec(net.input_dim, cfg.transparency) : fixed_spec;
  };

  TrojanResult result;
  result.net = net;
  result.trigger = current_spec();

  SpecRegularizer reg = SpecRegularizer::build(net, reference, cfg.spec_reg_pool, rng);
  AdamState model_adam = AdamState::zeros_like(net);
  const int mix = cfg.mix_copies < 0 ? cfg.optim.batch / 2 : cfg.mix_copies;

  // Adam state for the trigger variables.
  Vec m_pat(covered, 0.0), v_pat(covered, 0.0);
  Vec m_mask(covered, 0.0), v_mask(covered, 0.0);
  double m_p = 0.0, v_p = 0.0;
  long adam_t = 0;

  std::size_t cursor = 0;
  std::vector<Vec> carriers;  // trigger-embedded batch storage for the model step

  for (int outer = 0; outer < cfg.outer_iters; ++outer) {
    result.outer_iterations_used = outer + 1;

    if (cfg.optimize_trigger) {
      for (int step = 0; step < cfg.trigger_steps; ++step) {
        const TriggerSpec spec = vars.to_spec(net.input_dim, cfg.transparency);
        Vec g_pat(covered, 0.0), g_mask(covered, 0.0);
        double g_p = 0.0;
        for (int b = 0; b < cfg.trigger_batch; ++b) {
          const Vec& x = train.inputs[rng.below(train.size())];
          const Vec u = embed_trigger(x, spec);
          const ForwardTrace tr = forward_trace(result.net, u);
          const Vec du =
              backward(result.net, u, tr, cross_entropy_dlogits(tr.probs, t), nullptr);
          for (std::size_t k = 0; k < covered; ++k) {
            const std::size_t i = vars.region_idx[k];
            const double d_r = du[i] * spec.mask[i];
            const double d_m = du[i] * (spec.pattern[i] - x[i]);
            g_pat[k] += d_r;
            if (cfg.mode == TriggerMode::free_mask) {
              g_mask[k] += d_m;
            } else {
              g_p += d_m;
            }
          }
        }
        const double inv_b = 1.0 / static_cast<double>(cfg.trigger_batch);
        for (std::size_t k = 0; k < covered; ++k) {
          g_pat[k] *= inv_b;
          g_mask[k] *= inv_b;
        }
        g_p *= inv_b;
        // mask L1 penalty (mask entries are nonnegative by construction)
        if (cfg.mode == TriggerMode::free_mask) {
          for (std::size_t k = 0; k < covered; ++k) g_mask[k] += lambda_eff;
        } else {
          g_p += lambda_eff * static_cast<double>(covered);
        }
        // chain through the tanh reparameterization
        for (std::size_t k = 0; k < covered; ++k) {
          const double th = std::tanh(vars.w_pattern[k]);
          g_pat[k] *= 0.5 * (1.0 - th * th);
          if (cfg.mode == TriggerMode::free_mask) {
            const double tm = std::tanh(vars.w_mask[k]);
            g_mask[k] *= 0.5 * (1.0 - tm * tm);
          }
        }
        adam_t += 1;
        const double bias1 = 1.0 - std::pow(0.9, static_cast<double>(adam_t));
        const double bias2 = 1.0 - std::pow(0.999, static_cast<double>(adam_t));
        kernels::adam_step(vars.w_pattern.data(), m_pat.data(), v_pat.data(), g_pat.data(),
                           cfg.trigger_lr, 0.9, 0.999, 1e-8, bias1, bias2, covered);
        if (cfg.mode == TriggerMode::free_mask) {
          kernels::adam_step(vars.w_mask.data(), m_mask.data(), v_mask.data(), g_mask.data(),
                             cfg.trigger_lr, 0.9, 0.999, 1e-8, bias1, bias2, covered);
        } else {
          const double tp = std::tanh(vars.w_p);
          const double gw = g_p * 0.5 * (1.0 - tp * tp);
          kernels::adam_step(&vars.w_p, &m_p, &v_p, &gw, cfg.trigger_lr, 0.9, 0.999, 1e-8,
                             bias1, bias2, 1);
        }
      }
    }

    // model perturbation: re-train on clean batches mixed with trigger-embedded
    // carriers labeled t, plus the optional evasion terms.
    const TriggerSpec spec = current_spec();
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    const std::size_t subset =
        cfg.retrain_subset > 0 ? std::min<std::size_t>(train.size(), cfg.retrain_subset)
                               : train.size();
    const int clean_per_batch = std::max(1, cfg.optim.batch - mix);
    for (std::size_t start = 0; start < subset; start += clean_per_batch) {
      const std::size_t end = std::min(subset, start + clean_per_batch);
      ParamGrad g = ParamGrad::zeros_like(result.net);
      std::size_t count = 0;
      for (std::size_t k = start; k < end; ++k, ++count) {
        const Vec& x = train.inputs[idx[k]];
        const ForwardTrace tr = forward_trace(result.net, x);
        backward(result.net, x, tr, cross_entropy_dlogits(tr.probs, train.labels[idx[k]]), &g);
      }
      carriers.clear();
      for (int k = 0; k < mix; ++k, ++count) {
        const Vec& x = train.inputs[(cursor + k) % train.size()];
        carriers.push_back(embed_trigger(x, spec));
        const ForwardTrace tr = forward_trace(result.net, carriers.back());
        backward(result.net, carriers.back(), tr, cross_entropy_dlogits(tr.probs, t), &g);
      }
      cursor += mix;
      g.scale(1.0 / static_cast<double>(count));

      if (cfg.nu_spec > 0.0 && !reg.inputs.empty() && cfg.spec_reg_per_batch > 0) {
        const int draws = std::min<int>(cfg.spec_reg_per_batch,
                                        static_cast<int>(reg.inputs.size()));
        ParamGrad kg = ParamGrad::zeros_like(result.net);
        for (int k = 0; k < draws; ++k) {
          const std::size_t i = rng.below(reg.inputs.size());
          const ForwardTrace tr = forward_trace(result.net, reg.inputs[i]);
          Vec dl(tr.probs.size());
          for (std::size_t c = 0; c < dl.size(); ++c) {
            dl[c] = tr.probs[c] - reg.benign_probs[i][c];
          }
          backward(result.net, reg.inputs[i], tr, dl, &kg);
        }
        kg.scale(cfg.nu_spec / static_cast<double>(draws));
        g.add(kg);
      }

      if (cfg.strip_entropy_nu > 0.0 && cfg.strip_pairs > 0) {
        // raise the self-entropy of trigger/benign mixtures
        ParamGrad eg = ParamGrad::zeros_like(result.net);
        for (int k = 0; k < cfg.strip_pairs; ++k) {
          const Vec& xa = train.inputs[rng.below(train.size())];
          const Vec& xb = train.inputs[rng.below(train.size())];
          Vec mixv = embed_trigger(xa, spec);
          for (std::size_t i = 0; i < mixv.size(); ++i) {
            mixv[i] = std::min(1.0, std::max(0.0, 0.5 * (mixv[i] + xb[i])));
          }
          const ForwardTrace tr = forward_trace(result.net, mixv);
          double H = 0.0;
          for (double p : tr.probs) {
            if (p > 0.0) H -= p * std::log(p);
          }
          Vec dl(tr.probs.size());
          for (std::size_t c = 0; c < dl.size(); ++c) {
            const double p = std::max(tr.probs[c], 1e-300);
            dl[c] = p * (std::log(p) + H);  // gradient of -H w.r.t. logits
          }
          backward(result.net, mixv, tr, dl, &eg);
        }
        eg.scale(cfg.strip_entropy_nu / static_cast<double>(cfg.strip_pairs));
        g.add(eg);
      }

      apply_update(result.net, g, cfg.optim, &model_adam);
    }
    if (!params_finite(result.net)) {
      throw TrainingDiverged(outer, "trojan model step diverged at outer iteration " +
                                        std::to_string(outer));
    }
  }

  result.trigger = current_spec();
  result.asr = trigger_asr(result.net, test, result.trigger, t, cfg.kappa);
  result.specificity_loss = specificity_loss(result.net, net, reference);
  return result;
}

MicroNet adversarial_retrain(const MicroNet& net, const LabeledSet& train,
                             const AttackConfig& cfg, int epochs, int hop_steps) {
  cfg.validate();
  if (train.size() == 0) throw std::invalid_argument("training set is empty");
  if (epochs == 0) return net;

  MicroNet out = net;
  AdamState adam = AdamState::zeros_like(net);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  OptimConfig optim = cfg.optim;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    // stated schedule: decay by 0.1 every 50 epochs
    optim.lr = cfg.optim.lr * std::pow(0.1, std::floor(static_cast<double>(epoch) / 50.0));
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += optim.batch) {
      const std::size_t end = std::min(order.size(), start + optim.batch);
      ParamGrad g = ParamGrad::zeros_like(out);
      for (std::size_t k = start; k < end; ++k) {
        const Vec& x0 = train.inputs[order[k]];
        const int y = train.labels[order[k]];
        // untargeted ascent on the true-label loss within the eps ball
        Vec x = x0;
        for (int h = 0; h < hop_steps; ++h) {
          Vec gx = grad_input(out, x, y);
          for (double& v : gx) v = -v;  // ascend
          kernels::pgd_step(x.data(), gx.data(), x0.data(), cfg.alpha, cfg.eps, x.size());
        }
        const ForwardTrace tr = forward_trace(out, x);
        epoch_loss += -std::log(std::max(tr.probs[static_cast<std::size_t>(y)], 1e-300));
        backward(out, x, tr, cross_entropy_dlogits(tr.probs, y), &g);
      }
      g.scale(1.0 / static_cast<double>(end - start));
      apply_update(out, g, optim, &adam);
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss) || !params_finite(out)) {
      throw TrainingDiverged(epoch, "adversarial re-training diverged at epoch " +
                                        std::to_string(epoch));
    }
  }
  return out;
}

double pgd_attack_success_rate(const MicroNet& net, const LabeledSet& pool,
                               const AttackConfig& cfg, int n_pairs, std::uint64_t seed) {
  if (pool.size() == 0 || n_pairs <= 0) throw std::invalid_argument("bad success-rate inputs");
  Rng rng(seed);
  int hits = 0;
  for (int k = 0; k < n_pairs; ++k) {
    const std::size_t i = rng.below(pool.size());
    int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(pool.class_count)));
    while (t == pool.labels[i]) {
      t = static_cast<int>(rng.below(static_cast<std::uint64_t>(pool.class_count)));
    }
    const Vec x_star = pgd_input(net, pool.inputs[i], t, cfg);
    if (predict(net, x_star) == t) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n_pairs);
}

Vec pgd_to_confidence(const MicroNet& net, const Vec& x0, int t, double kappa, double alpha,
                      int max_iter, double eps) {
  Vec x = x0;
  if (efficacy(net, x, t) >= kappa) return x;
  for (int it = 0; it < max_iter; ++it) {
    const Vec g = grad_input(net, x, t);
    kernels::pgd_step(x.data(), g.data(), x0.data(), alpha, eps, x.size());
    if (efficacy(net, x, t) >= kappa) break;
  }
  return x;
}

DanskinCheck danskin_descent_check(const MicroNet& net, const Vec& x0, int t, double eps,
                                   double theta_step, int pgd_iters, double pgd_alpha) {
  AttackConfig cfg;
  cfg.eps = eps;
  cfg.alpha = pgd_alpha;
  cfg.n_iter = pgd_iters;
  cfg.lambda = 0.0;

  const Vec x_min = pgd_block(net, x0, x0, t, cfg, /*track_best=*/true);
  DanskinCheck check;
  check.min_before = loss(net, x_min, t);

  const ParamGrad g = grad_params(net, x_min, t);
  MicroNet stepped = net;
  apply_param_step(stepped, g, -theta_step);

  const Vec x_min2 = pgd_block(stepped, x0, x0, t, cfg, /*track_best=*/true);
  // the previous minimizer remains a candidate under the stepped parameters
  check.min_after = std::min(loss(stepped, x_min2, t), loss(stepped, x_min, t));
  check.descent = check.min_after <= check.min_before + 1e-9;
  return check;
}

}  // namespace imclab
