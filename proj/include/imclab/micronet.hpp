#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "imclab/synthdata.hpp"

// Dense feed-forward network with exact manual backpropagation for both
// parameter and input gradients. All arithmetic is double precision so the
// finite-difference gradient checks in the test suite are tight.

namespace imclab {

enum class Activation : std::uint8_t { identity = 0, relu = 1, quadratic = 2 };

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double* row(std::size_t i) { return a.data() + i * cols; }
  const double* row(std::size_t i) const { return a.data() + i * cols; }
  double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

struct Layer {
  Matrix w;
  Vec b;
  Activation act = Activation::identity;
};

struct MicroNet {
  std::size_t input_dim = 0;
  std::vector<Layer> layers;

  int class_count() const { return static_cast<int>(layers.back().w.rows); }
  std::size_t param_count() const;
};

struct LayerSpec {
  std::size_t units;
  Activation act;
};

// He-style fan-in scaled uniform init, W ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
// biases zero.
MicroNet make_net(std::size_t input_dim, const std::vector<LayerSpec>& layers,
                  std::uint64_t seed);

// Softmax over the last layer's outputs.
Vec forward(const MicroNet& net, const Vec& x);
int predict(const MicroNet& net, const Vec& x);  // argmax; lowest index wins ties

struct ForwardTrace {
  std::vector<Vec> pre;   // pre-activation per layer
  std::vector<Vec> post;  // post-activation per layer (last entry = logits)
  Vec probs;
};

ForwardTrace forward_trace(const MicroNet& net, const Vec& x);

// Cross entropy -log p_t; the probability is clamped at 1e-300 before the log
// so a confidently wrong prediction yields a large finite loss.
double loss(const MicroNet& net, const Vec& x, int target);

struct ParamGrad {
  std::vector<Matrix> dw;
  std::vector<Vec> db;

  static ParamGrad zeros_like(const MicroNet& net);
  void scale(double s);
  void add(const ParamGrad& other, double coef = 1.0);
  double l2sq() const;
};

// Backpropagates d(loss)/d(logits) through the trace. Returns d/dx and, when
// grad is non-null, accumulates parameter gradients into it.
Vec backward(const MicroNet& net, const Vec& x, const ForwardTrace& trace,
             const Vec& dlogits, ParamGrad* grad);

Vec cross_entropy_dlogits(const Vec& probs, int target);

Vec grad_input(const MicroNet& net, const Vec& x, int target);
ParamGrad grad_params(const MicroNet& net, const Vec& x, int target);

// theta += coef * g
void apply_param_step(MicroNet& net, const ParamGrad& g, double coef);

bool params_finite(const MicroNet& net);
bool same_params(const MicroNet& a, const MicroNet& b);  // bitwise

struct OptimConfig {
  enum class Kind { sgd, adam };
  Kind kind = Kind::sgd;
  double lr = 0.01;
  int epochs = 50;
  int batch = 32;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch_index, const std::string& what)
      : std::runtime_error(what), epoch(epoch_index) {}
  int epoch;
};

// Plain mini-batch training; pure (returns a new net). Deterministic in
// (net, data, cfg).
MicroNet train(const MicroNet& net, const LabeledSet& data, const OptimConfig& cfg);

double accuracy(const MicroNet& net, const LabeledSet& data);
double mean_loss(const MicroNet& net, const LabeledSet& data);

// Versioned binary checkpoint; round-trip is bit-exact.
void save_net(const MicroNet& net, const std::string& path);
MicroNet load_net(const std::string& path);

// Optimizer state reusable across incremental training calls (the attack
// loops run one epoch at a time).
struct AdamState {
  std::vector<Matrix> m_w, v_w;
  std::vector<Vec> m_b, v_b;
  long step = 0;

  static AdamState zeros_like(const MicroNet& net);
};

void apply_update(MicroNet& net, const ParamGrad& g, const OptimConfig& cfg, AdamState* adam);

}  // namespace imclab
