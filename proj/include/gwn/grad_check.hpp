#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gwn/param_store.hpp"

namespace gwn {

/// Scalar function of the parameters. When `grads` is non-null the call must
/// also fill reverse-mode gradients (aligned with entries). Must be
/// deterministic: two calls on equal parameters return equal values.
using ScalarFn = std::function<double(const ParamStore&, ParamGrads* grads)>;

struct GradCheckItem {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckItem> params;  // trainable entries only
  double worst = 0.0;
};

/// Central finite differences (f(p+h) - f(p-h)) / 2h per coordinate against
/// the reverse-mode gradient; relative error |ad-fd| / max(1e-8, |ad|+|fd|).
GradCheckReport finite_diff_check(const ScalarFn& f, const ParamStore& params, double h = 1e-5);

}  // namespace gwn
