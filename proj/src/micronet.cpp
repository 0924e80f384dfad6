#include "imclab/micronet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "imclab/kernels.hpp"
#include "imclab/rng.hpp"

namespace imclab {

namespace {

void check_dim(const MicroNet& net, const Vec& x) {
  if (x.size() != net.input_dim) {
    throw std::invalid_argument("input dimension " + std::to_string(x.size()) +
                                " does not match network input_dim " +
                                std::to_string(net.input_dim));
  }
}

void apply_activation(Activation act, const Vec& pre, Vec& post) {
  post.resize(pre.size());
  switch (act) {
    case Activation::identity:
      post = pre;
      break;
    case Activation::relu:
      kernels::relu(pre.data(), post.data(), pre.size());
      break;
    case Activation::quadratic:
      kernels::square(pre.data(), post.data(), pre.size());
      break;
  }
}

void activation_bwd(Activation act, const Vec& pre, Vec& delta) {
  switch (act) {
    case Activation::identity:
      break;
    case Activation::relu:
      kernels::relu_bwd(pre.data(), delta.data(), delta.size());
      break;
    case Activation::quadratic:
      kernels::square_bwd(pre.data(), delta.data(), delta.size());
      break;
  }
}

Vec softmax(const Vec& logits) {
  Vec p(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

void matvec(const Matrix& w, const Vec& b, const Vec& x, Vec& out) {
  out.resize(w.rows);
  for (std::size_t i = 0; i < w.rows; ++i) {
    out[i] = kernels::dot(w.row(i), x.data(), w.cols) + b[i];
  }
}

}  // namespace

std::size_t MicroNet::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.w.a.size() + l.b.size();
  return n;
}

MicroNet make_net(std::size_t input_dim, const std::vector<LayerSpec>& specs,
                  std::uint64_t seed) {
  if (input_dim == 0 || specs.empty()) {
    throw std::invalid_argument("network needs a positive input_dim and at least one layer");
  }
  if (specs.back().units < 2) {
    throw std::invalid_argument("output layer must have at least 2 classes");
  }
  MicroNet net;
  net.input_dim = input_dim;
  Rng rng(seed);
  std::size_t fan_in = input_dim;
  for (const LayerSpec& spec : specs) {
    Layer layer;
    layer.w = Matrix(spec.units, fan_in);
    layer.b = Vec(spec.units, 0.0);
    layer.act = spec.act;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : layer.w.a) v = rng.uniform(-limit, limit);
    net.layers.push_back(std::move(layer));
    fan_in = spec.units;
  }
  return net;
}

ForwardTrace forward_trace(const MicroNet& net, const Vec& x) {
  check_dim(net, x);
  ForwardTrace t;
  t.pre.resize(net.layers.size());
  t.post.resize(net.layers.size());
  const Vec* cur = &x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    matvec(net.layers[l].w, net.layers[l].b, *cur, t.pre[l]);
    apply_activation(net.layers[l].act, t.pre[l], t.post[l]);
    cur = &t.post[l];
  }
  t.probs = softmax(t.post.back());
  return t;
}

Vec forward(const MicroNet& net, const Vec& x) { return forward_trace(net, x).probs; }

int predict(const MicroNet& net, const Vec& x) {
  const Vec p = forward(net, x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double loss(const MicroNet& net, const Vec& x, int target) {
  if (target < 0 || target >= net.class_count()) {
    throw std::invalid_argument("target class out of range");
  }
  const Vec p = forward(net, x);
  return -std::log(std::max(p[static_cast<std::size_t>(target)], 1e-300));
}

ParamGrad ParamGrad::zeros_like(const MicroNet& net) {
  ParamGrad g;
  for (const Layer& l : net.layers) {
    g.dw.emplace_back(l.w.rows, l.w.cols);
    g.db.emplace_back(l.b.size(), 0.0);
  }
  return g;
}

void ParamGrad::scale(double s) {
  for (Matrix& m : dw)
    for (double& v : m.a) v *= s;
  for (Vec& b : db)
    for (double& v : b) v *= s;
}

void ParamGrad::add(const ParamGrad& other, double coef) {
  for (std::size_t l = 0; l < dw.size(); ++l) {
    kernels::axpy(coef, other.dw[l].a.data(), dw[l].a.data(), dw[l].a.size());
    kernels::axpy(coef, other.db[l].data(), db[l].data(), db[l].size());
  }
}

double ParamGrad::l2sq() const {
  double acc = 0.0;
  for (const Matrix& m : dw) acc += kernels::dot(m.a.data(), m.a.data(), m.a.size());
  for (const Vec& b : db) acc += kernels::dot(b.data(), b.data(), b.size());
  return acc;
}

Vec cross_entropy_dlogits(const Vec& probs, int target) {
  Vec d = probs;
  d[static_cast<std::size_t>(target)] -= 1.0;
  return d;
}

Vec backward(const MicroNet& net, const Vec& x, const ForwardTrace& trace,
             const Vec& dlogits, ParamGrad* grad) {
  const std::size_t L = net.layers.size();
  Vec delta = dlogits;
  for (std::size_t l = L; l-- > 0;) {
    const Layer& layer = net.layers[l];
    activation_bwd(layer.act, trace.pre[l], delta);
    const Vec& layer_in = (l == 0) ? x : trace.post[l - 1];
    if (grad != nullptr) {
      Matrix& dw = grad->dw[l];
      for (std::size_t i = 0; i < layer.w.rows; ++i) {
        kernels::axpy(delta[i], layer_in.data(), dw.row(i), layer.w.cols);
      }
      kernels::axpy(1.0, delta.data(), grad->db[l].data(), delta.size());
    }
    Vec prev(layer.w.cols, 0.0);
    for (std::size_t i = 0; i < layer.w.rows; ++i) {
      kernels::axpy(delta[i], layer.w.row(i), prev.data(), layer.w.cols);
    }
    delta = std::move(prev);
  }
  return delta;
}

Vec grad_input(const MicroNet& net, const Vec& x, int target) {
  const ForwardTrace t = forward_trace(net, x);
  return backward(net, x, t, cross_entropy_dlogits(t.probs, target), nullptr);
}

ParamGrad grad_params(const MicroNet& net, const Vec& x, int target) {
  const ForwardTrace t = forward_trace(net, x);
  ParamGrad g = ParamGrad::zeros_like(net);
  backward(net, x, t, cross_entropy_dlogits(t.probs, target), &g);
  return g;
}

void apply_param_step(MicroNet& net, const ParamGrad& g, double coef) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    kernels::axpy(coef, g.dw[l].a.data(), net.layers[l].w.a.data(), net.layers[l].w.a.size());
    kernels::axpy(coef, g.db[l].data(), net.layers[l].b.data(), net.layers[l].b.size());
  }
}

bool params_finite(const MicroNet& net) {
  for (const Layer& l : net.layers) {
    for (double v : l.w.a)
      if (!std::isfinite(v)) return false;
    for (double v : l.b)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

bool same_params(const MicroNet& a, const MicroNet& b) {
  if (a.input_dim != b.input_dim || a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].w.a != b.layers[l].w.a || a.layers[l].b != b.layers[l].b ||
        a.layers[l].act != b.layers[l].act) {
      return false;
    }
  }
  return true;
}

void OptimConfig::validate() const {
  if (lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
  if (batch < 1) throw std::invalid_argument("batch size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
}

AdamState AdamState::zeros_like(const MicroNet& net) {
  AdamState s;
  for (const Layer& l : net.layers) {
    s.m_w.emplace_back(l.w.rows, l.w.cols);
    s.v_w.emplace_back(l.w.rows, l.w.cols);
    s.m_b.emplace_back(l.b.size(), 0.0);
    s.v_b.emplace_back(l.b.size(), 0.0);
  }
  return s;
}

void apply_update(MicroNet& net, const ParamGrad& g, const OptimConfig& cfg, AdamState* adam) {
  if (cfg.kind == OptimConfig::Kind::sgd || adam == nullptr) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      kernels::sgd_step(net.layers[l].w.a.data(), g.dw[l].a.data(), cfg.lr,
                        net.layers[l].w.a.size());
      kernels::sgd_step(net.layers[l].b.data(), g.db[l].data(), cfg.lr, net.layers[l].b.size());
    }
    return;
  }
  adam->step += 1;
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam->step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam->step));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    kernels::adam_step(net.layers[l].w.a.data(), adam->m_w[l].a.data(), adam->v_w[l].a.data(),
                       g.dw[l].a.data(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, bias1, bias2,
                       net.layers[l].w.a.size());
    kernels::adam_step(net.layers[l].b.data(), adam->m_b[l].data(), adam->v_b[l].data(),
                       g.db[l].data(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, bias1, bias2,
                       net.layers[l].b.size());
  }
}

MicroNet train(const MicroNet& net, const LabeledSet& data, const OptimConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("training set is empty");
  for (int y : data.labels) {
    if (y < 0 || y >= net.class_count()) throw std::invalid_argument("label out of range");
  }

  MicroNet out = net;
  AdamState adam = AdamState::zeros_like(net);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      ParamGrad g = ParamGrad::zeros_like(out);
      for (std::size_t k = start; k < end; ++k) {
        const Vec& x = data.inputs[order[k]];
        const int y = data.labels[order[k]];
        const ForwardTrace t = forward_trace(out, x);
        epoch_loss += -std::log(std::max(t.probs[static_cast<std::size_t>(y)], 1e-300));
        backward(out, x, t, cross_entropy_dlogits(t.probs, y), &g);
      }
      g.scale(1.0 / static_cast<double>(end - start));
      apply_update(out, g, cfg, &adam);
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss) || !params_finite(out)) {
      throw TrainingDiverged(epoch, "training diverged at epoch " + std::to_string(epoch));
    }
  }
  return out;
}

double accuracy(const MicroNet& net, const LabeledSet& data) {
  if (data.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predict(net, data.inputs[i]) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double mean_loss(const MicroNet& net, const LabeledSet& data) {
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) acc += loss(net, data.inputs[i], data.labels[i]);
  return acc / static_cast<double>(data.size());
}

namespace {
constexpr char kMagic[8] = {'I', 'M', 'C', 'N', 'E', 'T', '0', '1'};

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_net(const MicroNet& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, static_cast<std::uint32_t>(net.layers.size()));
  write_pod(os, static_cast<std::uint32_t>(net.input_dim));
  for (const Layer& l : net.layers) {
    write_pod(os, static_cast<std::uint32_t>(l.w.rows));
    write_pod(os, static_cast<std::uint32_t>(l.w.cols));
    write_pod(os, static_cast<std::uint8_t>(l.act));
    os.write(reinterpret_cast<const char*>(l.w.a.data()),
             static_cast<std::streamsize>(l.w.a.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(l.b.data()),
             static_cast<std::streamsize>(l.b.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

MicroNet load_net(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a model checkpoint: " + path);
  }
  std::uint32_t n_layers = 0, input_dim = 0;
  read_pod(is, n_layers);
  read_pod(is, input_dim);
  MicroNet net;
  net.input_dim = input_dim;
  std::size_t fan_in = input_dim;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    std::uint32_t rows = 0, cols = 0;
    std::uint8_t act = 0;
    read_pod(is, rows);
    read_pod(is, cols);
    read_pod(is, act);
    if (!is || cols != fan_in || act > 2) {
      throw std::runtime_error("corrupt checkpoint: " + path);
    }
    Layer layer;
    layer.w = Matrix(rows, cols);
    layer.b = Vec(rows, 0.0);
    layer.act = static_cast<Activation>(act);
    is.read(reinterpret_cast<char*>(layer.w.a.data()),
            static_cast<std::streamsize>(layer.w.a.size() * sizeof(double)));
    is.read(reinterpret_cast<char*>(layer.b.data()),
            static_cast<std::streamsize>(layer.b.size() * sizeof(double)));
    fan_in = rows;
    net.layers.push_back(std::move(layer));
  }
  if (!is || net.layers.empty()) throw std::runtime_error("corrupt checkpoint: " + path);
  return net;
}

}  // namespace imclab
