#pragma once

#include "imclab/micronet.hpp"
#include "imclab/rng.hpp"
#include "imclab/synthdata.hpp"

// Shared desk-scale patch task: dataset splits plus a trained classifier,
// built once per test process.

namespace imclab::testfx {

struct PatchTask {
  LabeledSet train, test, reference;
  MicroNet net;
  std::size_t side = 8;
  int classes = 4;
};

inline const PatchTask& patch_task() {
  static const PatchTask task = [] {
    PatchTask t;
    const LabeledSet full = gen_patches(t.side, t.classes, 1200, 0.1, 2024);
    SplitResult s = split(full, 0.5, 0.25, 0.25, 2025);
    t.train = std::move(s.train);
    t.test = std::move(s.test);
    t.reference = std::move(s.reference);
    MicroNet net = make_net(t.side * t.side,
                            {{24, Activation::relu},
                             {static_cast<std::size_t>(t.classes), Activation::identity}},
                            2026);
    OptimConfig cfg;
    cfg.lr = 0.05;
    cfg.epochs = 15;
    cfg.batch = 32;
    cfg.seed = 2027;
    t.net = train(net, t.train, cfg);
    return t;
  }();
  return task;
}

}  // namespace imclab::testfx
