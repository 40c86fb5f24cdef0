#include "gwn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace gwn {

AdamState::AdamState(const ParamStore& params, AdamConfig cfg) : cfg_(cfg) {
  m_.resize(params.size());
  v_.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entries()[i];
    if (!e.trainable) continue;
    m_[i] = Tensor::zeros(e.value.shape());
    v_[i] = Tensor::zeros(e.value.shape());
  }
}

void AdamState::step(ParamStore& params, const ParamGrads& grads) {
  if (grads.size() != params.size())
    throw std::invalid_argument("adam: gradient count " + std::to_string(grads.size()) +
                                " does not match parameter count " + std::to_string(params.size()));
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = params.entries()[i];
    if (!e.trainable) continue;
    const Tensor& g = grads[i];
    if (g.empty())
      throw std::invalid_argument("adam: missing gradient for trainable parameter '" + e.name + "'");
    if (!g.same_shape(e.value))
      throw std::invalid_argument("adam: gradient shape " + shape_str(g) + " does not match parameter '" + e.name +
                                  "' " + shape_str(e.value));
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t k = 0; k < g.numel(); ++k) {
      const double gk = g.data()[k];
      m.data()[k] = cfg_.beta1 * m.data()[k] + (1.0 - cfg_.beta1) * gk;
      v.data()[k] = cfg_.beta2 * v.data()[k] + (1.0 - cfg_.beta2) * gk * gk;
      const double mhat = m.data()[k] / bc1;
      const double vhat = v.data()[k] / bc2;
      e.value.data()[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace gwn
