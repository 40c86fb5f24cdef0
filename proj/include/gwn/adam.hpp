#pragma once

#include <cstdint>

#include "gwn/param_store.hpp"

namespace gwn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are kept per trainable entry, in
/// ParamStore entry order; frozen entries are skipped.
class AdamState {
 public:
  AdamState(const ParamStore& params, AdamConfig cfg = {});

  /// One update. `grads` is aligned with params.entries(); every trainable
  /// entry must have a gradient of matching shape.
  void step(ParamStore& params, const ParamGrads& grads);

  std::int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t step_ = 0;
  std::vector<Tensor> m_;  // parallel to entries; empty for frozen
  std::vector<Tensor> v_;
};

}  // namespace gwn
