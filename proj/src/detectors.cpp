#include "imclab/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "imclab/kernels.hpp"
#include "imclab/rng.hpp"

namespace imclab {

double curvature_score(const std::function<Vec(const Vec&)>& grad_fn, const Vec& x,
                       double delta) {
  if (delta <= 0.0) throw std::invalid_argument("delta must be positive");
  const Vec g0 = grad_fn(x);
  Vec z(g0.size(), 0.0);
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < g0.size(); ++i) {
    z[i] = (g0[i] > 0.0) ? 1.0 : (g0[i] < 0.0 ? -1.0 : 0.0);
    norm_sq += z[i] * z[i];
  }
  if (norm_sq == 0.0) return 0.0;  // zero gradient: z is the zero vector
  const double inv = 1.0 / std::sqrt(norm_sq);
  Vec xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) xp[i] += delta * z[i] * inv;
  const Vec g1 = grad_fn(xp);
  return kernels::l2sq_diff(g1.data(), g0.data(), g0.size());
}

double curvature_profile(const MicroNet& net, const Vec& x, int t, double delta) {
  return curvature_score([&](const Vec& p) { return grad_input(net, p, t); }, x, delta);
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double shannon_entropy(const Vec& probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

namespace {

Vec mix_clipped(const Vec& a, const Vec& b, double wa) {
  Vec m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    m[i] = std::min(1.0, std::max(0.0, wa * a[i] + (1.0 - wa) * b[i]));
  }
  return m;
}

}  // namespace

double strip_score(const MicroNet& net, const Vec& x, const LabeledSet& benign_pool,
                   int n_test, std::uint64_t seed) {
  if (n_test < 1) throw std::invalid_argument("n_test must be >= 1");
  if (benign_pool.size() == 0) throw std::invalid_argument("benign pool is empty");
  Rng rng(seed);
  double acc = 0.0;
  for (int k = 0; k < n_test; ++k) {
    const Vec& other = benign_pool.inputs[rng.below(benign_pool.size())];
    acc += shannon_entropy(forward(net, mix_clipped(x, other, 0.5)));
  }
  return acc / static_cast<double>(n_test);
}

double strip_f1(const MicroNet& net, const std::vector<Vec>& attacked,
                const std::vector<Vec>& benign, const LabeledSet& pool, double threshold,
                int n_test, std::uint64_t seed) {
  if (attacked.empty() || benign.empty()) {
    throw std::invalid_argument("strip_f1 needs nonempty item sets");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  std::uint64_t item = 0;
  for (const Vec& x : attacked) {
    const double s = strip_score(net, x, pool, n_test, Rng::derive(seed, item++));
    if (s < threshold) {
      ++tp;
    } else {
      ++fn;
    }
  }
  for (const Vec& x : benign) {
    const double s = strip_score(net, x, pool, n_test, Rng::derive(seed, item++));
    if (s < threshold) ++fp;
  }
  const double denom = static_cast<double>(2 * tp + fp + fn);
  return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
}

double ensemble_strip_score(const MicroNet& net, const Vec& x, const TriggerSpec& recovered,
                            const LabeledSet& pool, const std::vector<double>& weights,
                            int n_carriers, std::uint64_t seed) {
  if (weights.size() < 3) throw std::invalid_argument("need at least 3 mixture weights");
  if (pool.size() == 0 || n_carriers < 1) throw std::invalid_argument("bad carrier pool");
  Rng rng(seed);
  double acc = 0.0;
  std::vector<double> entropies(weights.size());
  for (int c = 0; c < n_carriers; ++c) {
    const Vec carrier = embed_trigger(pool.inputs[rng.below(pool.size())], recovered);
    double mean = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      entropies[k] = shannon_entropy(forward(net, mix_clipped(x, carrier, weights[k])));
      mean += entropies[k];
    }
    mean /= static_cast<double>(weights.size());
    double var = 0.0;
    for (double h : entropies) var += (h - mean) * (h - mean);
    acc += std::sqrt(var / static_cast<double>(weights.size()));
  }
  return acc / static_cast<double>(n_carriers);
}

ReverseTriggerResult reverse_trigger(const MicroNet& net, int t, const LabeledSet& samples,
                                     const ReverseTriggerConfig& cfg) {
  if (samples.size() == 0) throw std::invalid_argument("reverse_trigger needs sample inputs");
  if (t < 0 || t >= net.class_count()) throw std::invalid_argument("target class out of range");

  const std::size_t d = net.input_dim;
  Rng rng(cfg.seed);
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  idx.resize(std::min<std::size_t>(idx.size(), cfg.n_samples));

  // tanh change of variables; start with a faint full-image mask
  Vec w_m(d, std::atanh(2.0 * 0.1 - 1.0));
  Vec w_r(d, 0.0);
  Vec m_m(d, 0.0), v_m(d, 0.0), m_r(d, 0.0), v_r(d, 0.0);
  long adam_t = 0;
  double beta = cfg.beta_init;

  TriggerSpec cur;
  cur.mask.assign(d, 0.0);
  cur.pattern.assign(d, 0.0);
  auto refresh = [&]() {
    for (std::size_t i = 0; i < d; ++i) {
      cur.mask[i] = 0.5 * (std::tanh(w_m[i]) + 1.0);
      cur.pattern[i] = 0.5 * (std::tanh(w_r[i]) + 1.0);
    }
  };
  refresh();

  auto flip_rate = [&]() {
    std::size_t hits = 0;
    for (std::size_t k : idx) {
      if (predict(net, embed_trigger(samples.inputs[k], cur)) == t) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(idx.size());
  };

  ReverseTriggerResult best;
  best.l1 = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t start = 0; start < idx.size(); start += cfg.batch) {
      const std::size_t end = std::min(idx.size(), start + cfg.batch);
      Vec g_m(d, 0.0), g_r(d, 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const Vec& x = samples.inputs[idx[k]];
        const Vec u = embed_trigger(x, cur);
        const ForwardTrace tr = forward_trace(net, u);
        const Vec du = backward(net, u, tr, cross_entropy_dlogits(tr.probs, t), nullptr);
        for (std::size_t i = 0; i < d; ++i) {
          g_r[i] += du[i] * cur.mask[i];
          g_m[i] += du[i] * (cur.pattern[i] - x[i]);
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = 0; i < d; ++i) {
        g_r[i] *= inv;
        g_m[i] = g_m[i] * inv + beta;  // L1 penalty on the nonnegative mask
        const double thm = std::tanh(w_m[i]);
        const double thr = std::tanh(w_r[i]);
        g_m[i] *= 0.5 * (1.0 - thm * thm);
        g_r[i] *= 0.5 * (1.0 - thr * thr);
      }
      adam_t += 1;
      const double bias1 = 1.0 - std::pow(0.9, static_cast<double>(adam_t));
      const double bias2 = 1.0 - std::pow(0.999, static_cast<double>(adam_t));
      kernels::adam_step(w_m.data(), m_m.data(), v_m.data(), g_m.data(), cfg.lr, 0.9, 0.999,
                         1e-8, bias1, bias2, d);
      kernels::adam_step(w_r.data(), m_r.data(), v_r.data(), g_r.data(), cfg.lr, 0.9, 0.999,
                         1e-8, bias1, bias2, d);
      refresh();
    }
    const double rate = flip_rate();
    const double l1 = kernels::sum(cur.mask.data(), d);
    if (rate >= cfg.flip_target) {
      best.reached = true;
      if (l1 < best.l1) {
        best.l1 = l1;
        best.trigger = cur;
        best.flip_rate = rate;
      }
      beta *= 1.5;  // press for a smaller mask
    } else {
      beta /= 1.5;
    }
  }

  if (!best.reached) {
    best.trigger = cur;
    best.l1 = kernels::sum(cur.mask.data(), d);
    best.flip_rate = flip_rate();
  }
  return best;
}

std::vector<double> anomaly_index(const std::vector<double>& per_class_l1) {
  if (per_class_l1.size() < 3) throw std::invalid_argument("anomaly_index needs >= 3 classes");
  std::vector<double> sorted = per_class_l1;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median =
      (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<double> dev(per_class_l1.size());
  for (std::size_t i = 0; i < dev.size(); ++i) dev[i] = std::abs(per_class_l1[i] - median);
  std::vector<double> dev_sorted = dev;
  std::sort(dev_sorted.begin(), dev_sorted.end());
  const double mad =
      (n % 2 == 1) ? dev_sorted[n / 2] : 0.5 * (dev_sorted[n / 2 - 1] + dev_sorted[n / 2]);
  std::vector<double> idx(dev.size(), 0.0);
  bool all_zero = true;
  for (double v : dev) all_zero = all_zero && v == 0.0;
  if (all_zero) return idx;  // all norms equal: every index is 0
  if (mad == 0.0) throw std::invalid_argument("degenerate norm list: MAD is zero");
  for (std::size_t i = 0; i < dev.size(); ++i) idx[i] = dev[i] / (1.4826 * mad);
  return idx;
}

std::vector<bool> anomaly_flags(const std::vector<double>& per_class_l1, double threshold) {
  const std::vector<double> idx = anomaly_index(per_class_l1);
  std::vector<double> sorted = per_class_l1;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median =
      (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<bool> flags(per_class_l1.size(), false);
  for (std::size_t i = 0; i < flags.size(); ++i) {
    flags[i] = idx[i] > threshold && per_class_l1[i] < median;
  }
  return flags;
}

SmoothingResult smoothing_detect(const MicroNet& net, const Vec& x, double sigma,
                                 int n_samples, double threshold, std::uint64_t seed) {
  if (sigma <= 0.0) throw std::invalid_argument("sigma must be positive");
  if (n_samples < 10) throw std::invalid_argument("n_samples must be >= 10");
  Rng rng(seed);
  std::vector<std::size_t> votes(static_cast<std::size_t>(net.class_count()), 0);
  Vec noisy(x.size());
  for (int s = 0; s < n_samples; ++s) {
    for (std::size_t i = 0; i < x.size(); ++i) noisy[i] = x[i] + sigma * rng.gaussian();
    votes[static_cast<std::size_t>(predict(net, noisy))] += 1;
  }
  std::size_t top1 = 0, top2 = 0;
  for (std::size_t v : votes) {
    if (v >= top1) {
      top2 = top1;
      top1 = v;
    } else if (v > top2) {
      top2 = v;
    }
  }
  SmoothingResult r;
  r.margin = static_cast<double>(top1 - top2) / static_cast<double>(n_samples);
  r.flagged = r.margin >= threshold;
  return r;
}

}  // namespace imclab
