#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Deterministic synthetic datasets and the trigger embedding operator.

namespace imclab {

using Vec = std::vector<double>;

struct LabeledSet {
  std::vector<Vec> inputs;
  std::vector<int> labels;
  std::size_t dim = 0;
  int class_count = 0;

  std::size_t size() const { return inputs.size(); }
};

// Two concentric spheres: points of norm exactly 1 (class 0) or R (class 1),
// class chosen with probability 1/2 per point. R must exceed 1.
LabeledSet gen_spheres(std::size_t d, double outer_radius, std::size_t n, std::uint64_t seed);

// side x side grids, one fixed binary base pattern per class (deterministic in
// the class index alone), plus N(0, sigma^2) pixel noise clipped to [0,1].
// Labels are assigned round-robin, so class counts differ by at most one.
LabeledSet gen_patches(std::size_t side, int classes, std::size_t n, double noise_sigma,
                       std::uint64_t seed);

struct SplitResult {
  LabeledSet train;
  LabeledSet test;
  LabeledSet reference;
};

// Deterministic shuffle then contiguous slices. Sizes follow largest-remainder
// rounding of n * fraction; fractions must be nonnegative and sum to 1.
SplitResult split(const LabeledSet& set, double train_frac, double test_frac,
                  double reference_frac, std::uint64_t seed);

// Trigger (mask m, pattern r, transparency p). For a rectangular region the
// mask is (1-p) inside the region and 0 outside; a freely optimized mask may
// take any value in [0,1] per pixel.
struct TriggerSpec {
  Vec mask;
  Vec pattern;
  double transparency = 0.0;
};

struct RectRegion {
  std::size_t top = 0;
  std::size_t left = 0;
  double size_fraction = 0.0;  // trigger width / image width

  std::size_t side_px(std::size_t grid_side) const;
};

TriggerSpec make_rect_trigger(std::size_t grid_side, const RectRegion& region,
                              const Vec& pattern, double transparency);

// psi(x, r; m) = x (1-m) + r m, componentwise.
Vec embed_trigger(const Vec& x, const TriggerSpec& spec);

// CSV rows "label,p0,p1,..."; round-trips through %.17g.
void save_csv(const LabeledSet& set, const std::string& path);
LabeledSet load_csv(const std::string& path, int class_count);

}  // namespace imclab
