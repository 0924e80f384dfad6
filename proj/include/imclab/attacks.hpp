#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "imclab/micronet.hpp"
#include "imclab/synthdata.hpp"

// Attack procedures: projected-gradient adversarial inputs, model poisoning,
// the alternating input/model co-optimization, trigger-based backdoors, and
// adversarial re-training.

namespace imclab {

struct AttackConfig {
  double eps = 8.0 / 255.0;   // L-inf input budget
  double alpha = 1.0 / 255.0; // signed step size
  int n_iter = 10;            // inner PGD iterations per input step
  double lambda = 0.0;        // fidelity weight (infinity freezes the input)
  double nu = 0.0;            // specificity weight (infinity freezes the model)
  double kappa = 0.75;        // misclassification-confidence threshold
  int max_outer = 20;         // outer alternation cap
  int mix_copies = -1;        // adversarial copies per batch; -1 -> batch/2
  int input_steps_per_outer = 1;
  int model_epochs_per_outer = 1;
  int retrain_subset = 512;    // training samples drawn per model-step epoch
  int spec_reg_pool = 256;     // reference subsample R' for the KL surrogate
  int spec_reg_per_batch = 32; // R' draws per batch
  double specificity_cap = std::numeric_limits<double>::infinity();
  OptimConfig optim;           // model-step optimizer (SGD, lr 0.01 default)
  std::uint64_t seed = 1;

  void validate() const;
};

struct AttackOutcome {
  Vec x_star;
  MicroNet theta_star;
  double efficacy = 0.0;
  double fidelity_loss = 0.0;     // L-inf
  double specificity_loss = 0.0;  // prediction-disagreement rate on reference
  int outer_iterations_used = 0;
  int first_success_iteration = -1;  // first outer iterate with efficacy >= kappa
  bool converged = false;
};

// Projected signed-gradient descent on loss(x, t) [+ lambda/2 ||x-x0||_2^2].
// Iterates stay within the eps ball around x0 intersected with [0,1]^d; the
// best-loss iterate is returned, so the loss never exceeds the benign one.
Vec pgd_input(const MicroNet& net, const Vec& x0, int t, const AttackConfig& cfg);

struct PoisonResult {
  MicroNet net;
  std::vector<double> efficacy;  // per target
  std::vector<bool> reached;     // efficacy >= kappa
  double specificity_loss = 0.0;
  int outer_iterations_used = 0;
};

// Model-only attack: re-training epochs that mix clean batches with copies of
// the (unperturbed) targets, plus the KL specificity surrogate weighted by nu.
PoisonResult poison_model(const MicroNet& net, const std::vector<std::pair<Vec, int>>& targets,
                          const LabeledSet& train, const LabeledSet& reference,
                          const AttackConfig& cfg);

// Alternating input perturbation / model perturbation for a single target.
// Stops once efficacy >= kappa and both regularized losses have stabilized,
// or after max_outer iterations (outcome flagged unconverged).
// When specificity_cap is finite, the best feasible iterate is returned.
AttackOutcome imc(const MicroNet& net, const Vec& x0, int t, const LabeledSet& train,
                  const LabeledSet& reference, const AttackConfig& cfg);

enum class TriggerMode { shared_transparency, free_mask };

struct TrojanConfig {
  RectRegion region;
  double transparency = 0.3;
  TriggerMode mode = TriggerMode::shared_transparency;
  bool optimize_trigger = true;   // false: fixed trigger (classic baseline)
  double lambda_mask = 1.0;       // L1 mask penalty, normalized by covered pixels
  double nu_spec = 0.0;           // KL specificity weight in the model step
  double strip_entropy_nu = 0.0;  // mixture self-entropy evasion term (0 = off)
  int strip_pairs = 8;
  int outer_iters = 15;
  int trigger_steps = 40;         // Adam steps per trigger-perturbation phase
  double trigger_lr = 0.05;
  int trigger_batch = 32;         // carriers sampled per trigger step
  double kappa = 0.75;
  int init_ascent_steps = 100;
  double init_ascent_lr = 0.05;
  int mix_copies = -1;
  int retrain_subset = 512;
  int spec_reg_pool = 256;
  int spec_reg_per_batch = 32;
  OptimConfig optim;
  std::uint64_t seed = 1;
};

struct TrojanResult {
  TriggerSpec trigger;
  MicroNet net;
  double asr = 0.0;               // f_t(psi(x)) >= kappa rate over test inputs
  double specificity_loss = 0.0;  // vs. the benign model on the reference set
  int outer_iterations_used = 0;
};

// Joint trigger/model optimization for a square region. The trigger pattern is
// initialized by activation maximization (init_trigger) and both the pattern
// and mask are optimized through a tanh change of variables.
TrojanResult trojan_star(const MicroNet& net, const LabeledSet& train, const LabeledSet& test,
                         const LabeledSet& reference, int t, const TrojanConfig& cfg);

// Gradient ascent (restricted to the region) on the drive of the first hidden
// layer's least-active unit over the pool; the pattern starts at mid gray.
// Activity is measured pre-nonlinearity since a dead ReLU has zero gradient.
Vec init_trigger(const MicroNet& net, std::size_t grid_side, const RectRegion& region,
                 const LabeledSet& pool, int ascent_steps, double lr);

double trigger_asr(const MicroNet& net, const LabeledSet& test, const TriggerSpec& trigger,
                   int t, double kappa);

// PGD-based adversarial training: each batch is replaced by adversarial
// versions of its samples crafted against the current parameters.
MicroNet adversarial_retrain(const MicroNet& net, const LabeledSet& train,
                             const AttackConfig& cfg, int epochs, int hop_steps = 4);

// Fraction of sampled (input, random wrong target) pairs for which PGD flips
// the prediction to the target.
double pgd_attack_success_rate(const MicroNet& net, const LabeledSet& pool,
                               const AttackConfig& cfg, int n_pairs, std::uint64_t seed);

// Signed steps until f_t reaches kappa (or the budget runs out); stopping at
// the first crossing keeps the perturbation close to minimal. Used for the
// input-only fidelity baseline at a fixed efficacy level.
Vec pgd_to_confidence(const MicroNet& net, const Vec& x0, int t, double kappa, double alpha,
                      int max_iter, double eps);

struct DanskinCheck {
  double min_before = 0.0;
  double min_after = 0.0;
  bool descent = false;
};

// After minimizing over x at fixed theta, steps theta along the negative
// parameter gradient at the minimizer and re-minimizes; the re-minimized
// objective must not increase (tolerance 1e-9).
DanskinCheck danskin_descent_check(const MicroNet& net, const Vec& x0, int t, double eps,
                                   double theta_step, int pgd_iters, double pgd_alpha);

}  // namespace imclab
