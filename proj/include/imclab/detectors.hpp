#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "imclab/micronet.hpp"
#include "imclab/synthdata.hpp"

// Input- and model-anomaly detectors: loss-curvature profiling with the
// Kolmogorov-Smirnov statistic, randomized-smoothing margins, self-entropy
// scoring of input mixtures, and trigger reverse-engineering with MAD
// anomaly scoring.

namespace imclab {

// ||grad(x + delta z) - grad(x)||^2 with z the normalized gradient sign
// direction; zero gradient yields z = 0 and a zero score.
double curvature_score(const std::function<Vec(const Vec&)>& grad_fn, const Vec& x,
                       double delta);
double curvature_profile(const MicroNet& net, const Vec& x, int t, double delta = 1e-3);

// Two-sample Kolmogorov-Smirnov statistic (sup distance of empirical CDFs).
double ks_statistic(std::vector<double> a, std::vector<double> b);

double shannon_entropy(const Vec& probs);

// Mean self-entropy of equal-weight mixtures of x with n_test benign inputs
// sampled from the pool; mixtures are clipped to [0,1].
double strip_score(const MicroNet& net, const Vec& x, const LabeledSet& benign_pool,
                   int n_test, std::uint64_t seed);

// F-1 of the rule "score < threshold => attacked" over the two item sets.
double strip_f1(const MicroNet& net, const std::vector<Vec>& attacked,
                const std::vector<Vec>& benign, const LabeledSet& pool, double threshold,
                int n_test, std::uint64_t seed);

// Ensemble variant: attaches a recovered trigger to sampled benign carriers,
// mixes each carrier with x under the weight grid, and returns the mean (over
// carriers) standard deviation (over weights) of the mixture self-entropies.
double ensemble_strip_score(const MicroNet& net, const Vec& x, const TriggerSpec& recovered,
                            const LabeledSet& pool, const std::vector<double>& weights,
                            int n_carriers, std::uint64_t seed);

struct ReverseTriggerConfig {
  int n_samples = 256;  // inputs sampled for the search
  int epochs = 10;
  int batch = 32;
  double lr = 0.1;
  double beta_init = 1e-3;   // L1 weight, adapted during the search
  double flip_target = 0.95; // required flip rate
  std::uint64_t seed = 1;
};

struct ReverseTriggerResult {
  TriggerSpec trigger;
  double l1 = 0.0;         // ||m||_1 of the best feasible trigger
  double flip_rate = 0.0;  // achieved flip rate of the returned trigger
  bool reached = false;    // flip_target reached at least once
};

// Searches a full-image (mask, pattern) pair, tanh-parameterized, that flips
// sampled inputs to class t, minimizing the mask L1 norm among feasible
// candidates. The L1 weight increases while the flip constraint holds and
// backs off otherwise.
ReverseTriggerResult reverse_trigger(const MicroNet& net, int t, const LabeledSet& samples,
                                     const ReverseTriggerConfig& cfg);

// |x - median| / (1.4826 * MAD) per class. MAD of zero is degenerate.
std::vector<double> anomaly_index(const std::vector<double>& per_class_l1);

// Classes whose index exceeds the threshold on the low side (small norms).
std::vector<bool> anomaly_flags(const std::vector<double>& per_class_l1,
                                double threshold = 2.0);

struct SmoothingResult {
  bool flagged = false;
  double margin = 0.0;  // top1 - top2 smoothed vote fractions
};

// Gaussian-noise voting around x; the input is flagged when the vote margin
// between the two most frequent classes reaches the threshold.
SmoothingResult smoothing_detect(const MicroNet& net, const Vec& x, double sigma,
                                 int n_samples, double threshold, std::uint64_t seed);

struct DetectionReport {
  std::vector<double> scores;
  std::vector<int> attacked;  // ground truth per item (1 = attacked)
  double threshold = 0.0;
  double detection_rate = 0.0;
  double f1 = 0.0;
  double ks = 0.0;
};

}  // namespace imclab
