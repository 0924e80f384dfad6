#include "imclab/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "imclab/rng.hpp"

namespace imclab {

LabeledSet gen_spheres(std::size_t d, double outer_radius, std::size_t n, std::uint64_t seed) {
  if (d < 2) throw std::invalid_argument("gen_spheres needs d >= 2");
  if (n < 2) throw std::invalid_argument("gen_spheres needs n >= 2");
  if (outer_radius <= 1.0) throw std::invalid_argument("outer radius must exceed 1");

  LabeledSet set;
  set.dim = d;
  set.class_count = 2;
  set.inputs.reserve(n);
  set.labels.reserve(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = rng.uniform01() < 0.5 ? 0 : 1;
    Vec x(d);
    double norm_sq = 0.0;
    do {
      norm_sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        x[j] = rng.gaussian();
        norm_sq += x[j] * x[j];
      }
    } while (norm_sq == 0.0);
    const double target = label == 0 ? 1.0 : outer_radius;
    const double s = target / std::sqrt(norm_sq);
    for (double& v : x) v *= s;
    set.inputs.push_back(std::move(x));
    set.labels.push_back(label);
  }
  return set;
}

namespace {

// Fixed binary motif for class c; depends on the class index only.
double base_pixel(int c, std::size_t i) {
  const std::uint64_t h =
      splitmix64(static_cast<std::uint64_t>(c) * 0x9e3779b97f4a7c15ULL + i + 1);
  return (h >> 63) ? 1.0 : 0.0;
}

}  // namespace

LabeledSet gen_patches(std::size_t side, int classes, std::size_t n, double noise_sigma,
                       std::uint64_t seed) {
  if (side < 4) throw std::invalid_argument("gen_patches needs side >= 4");
  if (classes < 2) throw std::invalid_argument("gen_patches needs >= 2 classes");

  const std::size_t d = side * side;
  LabeledSet set;
  set.dim = d;
  set.class_count = classes;
  set.inputs.reserve(n);
  set.labels.reserve(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(classes));
    Vec x(d);
    for (std::size_t j = 0; j < d; ++j) {
      double v = base_pixel(label, j);
      if (noise_sigma > 0.0) v += noise_sigma * rng.gaussian();
      x[j] = std::min(std::max(v, 0.0), 1.0);
    }
    set.inputs.push_back(std::move(x));
    set.labels.push_back(label);
  }
  return set;
}

SplitResult split(const LabeledSet& set, double train_frac, double test_frac,
                  double reference_frac, std::uint64_t seed) {
  if (set.size() == 0) throw std::invalid_argument("cannot split an empty set");
  const double fracs[3] = {train_frac, test_frac, reference_frac};
  double total = 0.0;
  for (double f : fracs) {
    if (f < 0.0) throw std::invalid_argument("split fractions must be nonnegative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");

  // Largest-remainder rounding; ties go to the earlier slice.
  const std::size_t n = set.size();
  std::size_t sizes[3];
  double rema[3];
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = static_cast<double>(n) * fracs[k];
    sizes[k] = static_cast<std::size_t>(std::floor(exact));
    rema[k] = exact - std::floor(exact);
    assigned += sizes[k];
  }
  while (assigned < n) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (rema[k] > rema[best]) best = k;
    }
    sizes[best] += 1;
    rema[best] = -1.0;
    ++assigned;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  SplitResult result;
  LabeledSet* outs[3] = {&result.train, &result.test, &result.reference};
  std::size_t pos = 0;
  for (int k = 0; k < 3; ++k) {
    outs[k]->dim = set.dim;
    outs[k]->class_count = set.class_count;
    for (std::size_t i = 0; i < sizes[k]; ++i, ++pos) {
      outs[k]->inputs.push_back(set.inputs[order[pos]]);
      outs[k]->labels.push_back(set.labels[order[pos]]);
    }
  }
  return result;
}

std::size_t RectRegion::side_px(std::size_t grid_side) const {
  const auto px = static_cast<std::size_t>(
      std::lround(size_fraction * static_cast<double>(grid_side)));
  return std::min(px, grid_side);
}

TriggerSpec make_rect_trigger(std::size_t grid_side, const RectRegion& region,
                              const Vec& pattern, double transparency) {
  if (transparency < 0.0 || transparency > 1.0) {
    throw std::invalid_argument("transparency must lie in [0,1]");
  }
  const std::size_t d = grid_side * grid_side;
  if (pattern.size() != d) throw std::invalid_argument("pattern size does not match grid");
  const std::size_t s = region.side_px(grid_side);
  if (region.top + s > grid_side || region.left + s > grid_side) {
    throw std::invalid_argument("trigger region exceeds the grid");
  }
  TriggerSpec spec;
  spec.transparency = transparency;
  spec.mask.assign(d, 0.0);
  spec.pattern.assign(d, 0.0);
  for (std::size_t r = region.top; r < region.top + s; ++r) {
    for (std::size_t c = region.left; c < region.left + s; ++c) {
      const std::size_t i = r * grid_side + c;
      spec.mask[i] = 1.0 - transparency;
      spec.pattern[i] = pattern[i];
    }
  }
  return spec;
}

Vec embed_trigger(const Vec& x, const TriggerSpec& spec) {
  if (x.size() != spec.mask.size() || x.size() != spec.pattern.size()) {
    throw std::invalid_argument("trigger dimensions do not match input");
  }
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] * (1.0 - spec.mask[i]) + spec.pattern[i] * spec.mask[i];
  }
  return out;
}

void save_csv(const LabeledSet& set, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  char buf[32];
  for (std::size_t i = 0; i < set.size(); ++i) {
    os << set.labels[i];
    for (double v : set.inputs[i]) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      os << ',' << buf;
    }
    os << '\n';
  }
}

LabeledSet load_csv(const std::string& path, int class_count) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  LabeledSet set;
  set.class_count = class_count;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    if (!std::getline(ss, tok, ',')) continue;
    Vec x;
    const int label = std::stoi(tok);
    while (std::getline(ss, tok, ',')) x.push_back(std::stod(tok));
    if (set.dim == 0) set.dim = x.size();
    if (x.size() != set.dim) throw std::runtime_error("ragged CSV row in " + path);
    set.inputs.push_back(std::move(x));
    set.labels.push_back(label);
  }
  return set;
}

}  // namespace imclab
