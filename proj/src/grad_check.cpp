#include "gwn/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace gwn {

GradCheckReport finite_diff_check(const ScalarFn& f, const ParamStore& params, double h) {
  ParamGrads analytic;
  f(params, &analytic);
  if (analytic.size() != params.size())
    throw std::runtime_error("finite_diff_check: function returned misaligned gradients");

  ParamStore work = params;
  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = work.entries()[i];
    if (!e.trainable) continue;
    const Tensor& g = analytic[i];
    if (g.empty() || !g.same_shape(e.value))
      throw std::runtime_error("finite_diff_check: bad gradient for '" + e.name + "'");
    GradCheckItem item{e.name, 0.0};
    for (std::size_t k = 0; k < e.value.numel(); ++k) {
      const double saved = e.value.data()[k];
      e.value.data()[k] = saved + h;
      const double up = f(work, nullptr);
      e.value.data()[k] = saved - h;
      const double down = f(work, nullptr);
      e.value.data()[k] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double ad = g.data()[k];
      const double rel = std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
      item.max_rel_err = std::max(item.max_rel_err, rel);
    }
    report.worst = std::max(report.worst, item.max_rel_err);
    report.params.push_back(std::move(item));
  }
  return report;
}

}  // namespace gwn
