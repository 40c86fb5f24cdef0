#include "gwn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gwn {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": operand shapes differ, " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace

NodeId Tape::push(Tensor value, std::vector<NodeId> parents, PullFn pull, const char* op) {
  if (!value.all_finite())
    throw std::runtime_error(std::string(op) + ": produced a non-finite value");
  nodes_.push_back(Node{std::move(value), std::move(parents), std::move(pull)});
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::input(Tensor value) {
  return push(std::move(value), {}, nullptr, "input");
}

void Tape::clear() {
  nodes_.clear();
  grads_.clear();
}

Tensor& Tape::grad(NodeId id) {
  Tensor& g = grads_[static_cast<std::size_t>(id)];
  if (g.empty()) g = Tensor::zeros(value(id).shape());
  return g;
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  Tensor out = Tensor::zeros({va.rows(), vb.cols()});
  matmul_acc(va, vb, out);
  return push(std::move(out), {a, b},
              [a, b](Tape& t, NodeId, const Tensor& gout) {
                matmul_nt_acc(gout, t.value(b), t.grad(a));  // dA += G B^T
                matmul_tn_acc(t.value(a), gout, t.grad(b));  // dB += A^T G
              },
              "matmul");
}

NodeId Tape::transpose(NodeId a) {
  const Tensor& va = value(a);
  const int m = va.rows(), n = va.cols();
  Tensor out = Tensor::zeros({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = va.at(i, j);
  return push(std::move(out), {a},
              [a, m, n](Tape& t, NodeId, const Tensor& gout) {
                Tensor& ga = t.grad(a);
                for (int i = 0; i < m; ++i)
                  for (int j = 0; j < n; ++j) ga.at(i, j) += gout.at(j, i);
              },
              "transpose");
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_same_shape(va, vb, "add");
  Tensor out = va;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] += vb.data()[i];
  return push(std::move(out), {a, b},
              [a, b](Tape& t, NodeId, const Tensor& gout) {
                Tensor& ga = t.grad(a);
                Tensor& gb = t.grad(b);
                for (std::size_t i = 0; i < gout.numel(); ++i) {
                  ga.data()[i] += gout.data()[i];
                  gb.data()[i] += gout.data()[i];
                }
              },
              "add");
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_same_shape(va, vb, "sub");
  Tensor out = va;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] -= vb.data()[i];
  return push(std::move(out), {a, b},
              [a, b](Tape& t, NodeId, const Tensor& gout) {
                Tensor& ga = t.grad(a);
                Tensor& gb = t.grad(b);
                for (std::size_t i = 0; i < gout.numel(); ++i) {
                  ga.data()[i] += gout.data()[i];
                  gb.data()[i] -= gout.data()[i];
                }
              },
              "sub");
}

NodeId Tape::hadamard(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_same_shape(va, vb, "hadamard");
  Tensor out = va;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] *= vb.data()[i];
  return push(std::move(out), {a, b},
              [a, b](Tape& t, NodeId, const Tensor& gout) {
                const Tensor& va = t.value(a);
                const Tensor& vb = t.value(b);
                Tensor& ga = t.grad(a);
                Tensor& gb = t.grad(b);
                for (std::size_t i = 0; i < gout.numel(); ++i) {
                  ga.data()[i] += gout.data()[i] * vb.data()[i];
                  gb.data()[i] += gout.data()[i] * va.data()[i];
                }
              },
              "hadamard");
}

NodeId Tape::scale(NodeId a, double c) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] *= c;
  return push(std::move(out), {a},
              [a, c](Tape& t, NodeId, const Tensor& gout) {
                Tensor& ga = t.grad(a);
                for (std::size_t i = 0; i < gout.numel(); ++i) ga.data()[i] += c * gout.data()[i];
              },
              "scale");
}

NodeId Tape::relu(NodeId a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = std::max(0.0, out.data()[i]);
  return push(std::move(out), {a},
              [a](Tape& t, NodeId, const Tensor& gout) {
                const Tensor& va = t.value(a);
                Tensor& ga = t.grad(a);
                // subgradient at exactly 0 is 0
                for (std::size_t i = 0; i < gout.numel(); ++i)
                  if (va.data()[i] > 0.0) ga.data()[i] += gout.data()[i];
              },
              "relu");
}

NodeId Tape::sigmoid(NodeId a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    double x = out.data()[i];
    out.data()[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  return push(std::move(out), {a},
              [a](Tape& t, NodeId self, const Tensor& gout) {
                const Tensor& y = t.value(self);
                Tensor& ga = t.grad(a);
                for (std::size_t i = 0; i < gout.numel(); ++i) {
                  double s = y.data()[i];
                  ga.data()[i] += gout.data()[i] * s * (1.0 - s);
                }
              },
              "sigmoid");
}

NodeId Tape::tanh(NodeId a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = std::tanh(out.data()[i]);
  return push(std::move(out), {a},
              [a](Tape& t, NodeId self, const Tensor& gout) {
                const Tensor& y = t.value(self);
                Tensor& ga = t.grad(a);
                for (std::size_t i = 0; i < gout.numel(); ++i) {
                  double v = y.data()[i];
                  ga.data()[i] += gout.data()[i] * (1.0 - v * v);
                }
              },
              "tanh");
}

NodeId Tape::add_rowwise(NodeId x, NodeId bias) {
  const Tensor& vx = value(x);
  const Tensor& vb = value(bias);
  const int m = vx.rows(), n = vx.cols();
  if (vb.rank() != 1 || vb.shape()[0] != n)
    throw std::invalid_argument("add_rowwise: bias shape " + shape_str(vb) + " does not match columns of " + shape_str(vx));
  Tensor out = vx;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) += vb.data()[j];
  return push(std::move(out), {x, bias},
              [x, bias, m, n](Tape& t, NodeId, const Tensor& gout) {
                Tensor& gx = t.grad(x);
                Tensor& gb = t.grad(bias);
                for (int i = 0; i < m; ++i)
                  for (int j = 0; j < n; ++j) {
                    gx.at(i, j) += gout.at(i, j);
                    gb.data()[j] += gout.at(i, j);
                  }
              },
              "add_rowwise");
}

NodeId Tape::softmax_rows(NodeId x) {
  const Tensor& vx = value(x);
  const int m = vx.rows(), n = vx.cols();
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i) {
    double mx = vx.at(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, vx.at(i, j));
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
      double e = std::exp(vx.at(i, j) - mx);
      out.at(i, j) = e;
      z += e;
    }
    for (int j = 0; j < n; ++j) out.at(i, j) /= z;
  }
  return push(std::move(out), {x},
              [x, m, n](Tape& t, NodeId self, const Tensor& gout) {
                const Tensor& y = t.value(self);
                Tensor& gx = t.grad(x);
                for (int i = 0; i < m; ++i) {
                  double dot = 0.0;
                  for (int j = 0; j < n; ++j) dot += gout.at(i, j) * y.at(i, j);
                  for (int j = 0; j < n; ++j) gx.at(i, j) += y.at(i, j) * (gout.at(i, j) - dot);
                }
              },
              "softmax_rows");
}

NodeId Tape::layer_norm(NodeId x, NodeId gain, NodeId bias) {
  const Tensor& vx = value(x);
  const Tensor& vg = value(gain);
  const Tensor& vb = value(bias);
  const int m = vx.rows(), n = vx.cols();
  if (n < 2) throw std::invalid_argument("layer_norm: needs at least 2 columns, got " + shape_str(vx));
  if (vg.rank() != 1 || vg.shape()[0] != n || vb.rank() != 1 || vb.shape()[0] != n)
    throw std::invalid_argument("layer_norm: gain/bias must be rank-1 of length " + std::to_string(n));
  Tensor out = Tensor::zeros({m, n});
  Tensor xhat = Tensor::zeros({m, n});
  std::vector<double> inv_std(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += vx.at(i, j);
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      double d = vx.at(i, j) - mean;
      var += d * d;
    }
    var /= n;
    double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[static_cast<std::size_t>(i)] = inv;
    for (int j = 0; j < n; ++j) {
      double h = (vx.at(i, j) - mean) * inv;
      xhat.at(i, j) = h;
      out.at(i, j) = h * vg.data()[j] + vb.data()[j];
    }
  }
  return push(std::move(out), {x, gain, bias},
              [x, gain, bias, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                  Tape& t, NodeId, const Tensor& gout) {
                const Tensor& vg = t.value(gain);
                Tensor& gx = t.grad(x);
                Tensor& gg = t.grad(gain);
                Tensor& gb = t.grad(bias);
                for (int i = 0; i < m; ++i) {
                  double sum_dh = 0.0, sum_dh_h = 0.0;
                  for (int j = 0; j < n; ++j) {
                    double go = gout.at(i, j);
                    double h = xhat.at(i, j);
                    gg.data()[j] += go * h;
                    gb.data()[j] += go;
                    double dh = go * vg.data()[j];
                    sum_dh += dh;
                    sum_dh_h += dh * h;
                  }
                  double inv = inv_std[static_cast<std::size_t>(i)];
                  for (int j = 0; j < n; ++j) {
                    double dh = gout.at(i, j) * vg.data()[j];
                    gx.at(i, j) += inv * (dh - sum_dh / n - xhat.at(i, j) * sum_dh_h / n);
                  }
                }
              },
              "layer_norm");
}

NodeId Tape::concat_rows(std::span<const NodeId> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no operands");
  const int n = value(parts[0]).cols();
  int m = 0;
  for (NodeId p : parts) {
    if (value(p).cols() != n)
      throw std::invalid_argument("concat_rows: column counts differ, " + shape_str(value(parts[0])) + " vs " + shape_str(value(p)));
    m += value(p).rows();
  }
  Tensor out = Tensor::zeros({m, n});
  int r = 0;
  for (NodeId p : parts) {
    const Tensor& v = value(p);
    std::copy(v.data(), v.data() + v.numel(), out.data() + static_cast<std::size_t>(r) * n);
    r += v.rows();
  }
  std::vector<NodeId> ps(parts.begin(), parts.end());
  return push(std::move(out), ps,
              [ps, n](Tape& t, NodeId, const Tensor& gout) {
                int r = 0;
                for (NodeId p : ps) {
                  Tensor& gp = t.grad(p);
                  const int rows = gp.rows();
                  const double* src = gout.data() + static_cast<std::size_t>(r) * n;
                  for (std::size_t i = 0; i < gp.numel(); ++i) gp.data()[i] += src[i];
                  r += rows;
                }
              },
              "concat_rows");
}

NodeId Tape::concat_cols(std::span<const NodeId> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no operands");
  const int m = value(parts[0]).rows();
  int n = 0;
  for (NodeId p : parts) {
    if (value(p).rows() != m)
      throw std::invalid_argument("concat_cols: row counts differ, " + shape_str(value(parts[0])) + " vs " + shape_str(value(p)));
    n += value(p).cols();
  }
  Tensor out = Tensor::zeros({m, n});
  int c = 0;
  for (NodeId p : parts) {
    const Tensor& v = value(p);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < v.cols(); ++j) out.at(i, c + j) = v.at(i, j);
    c += v.cols();
  }
  std::vector<NodeId> ps(parts.begin(), parts.end());
  return push(std::move(out), ps,
              [ps, m](Tape& t, NodeId, const Tensor& gout) {
                int c = 0;
                for (NodeId p : ps) {
                  Tensor& gp = t.grad(p);
                  const int cols = gp.cols();
                  for (int i = 0; i < m; ++i)
                    for (int j = 0; j < cols; ++j) gp.at(i, j) += gout.at(i, c + j);
                  c += cols;
                }
              },
              "concat_cols");
}

NodeId Tape::slice_rows(NodeId x, int row_begin, int row_end) {
  const Tensor& vx = value(x);
  const int m = vx.rows(), n = vx.cols();
  if (row_begin < 0 || row_end > m || row_begin >= row_end)
    throw std::invalid_argument("slice_rows: range [" + std::to_string(row_begin) + ", " + std::to_string(row_end) +
                                ") out of bounds for " + shape_str(vx));
  Tensor out = Tensor::zeros({row_end - row_begin, n});
  std::copy(vx.data() + static_cast<std::size_t>(row_begin) * n, vx.data() + static_cast<std::size_t>(row_end) * n,
            out.data());
  return push(std::move(out), {x},
              [x, row_begin, n](Tape& t, NodeId, const Tensor& gout) {
                Tensor& gx = t.grad(x);
                double* dst = gx.data() + static_cast<std::size_t>(row_begin) * n;
                for (std::size_t i = 0; i < gout.numel(); ++i) dst[i] += gout.data()[i];
              },
              "slice_rows");
}

NodeId Tape::reshape(NodeId x, std::vector<int> shape) {
  Tensor out = value(x).reshaped(std::move(shape));
  return push(std::move(out), {x},
              [x](Tape& t, NodeId, const Tensor& gout) {
                Tensor& gx = t.grad(x);
                for (std::size_t i = 0; i < gout.numel(); ++i) gx.data()[i] += gout.data()[i];
              },
              "reshape");
}

NodeId Tape::add_n(std::span<const NodeId> parts) {
  if (parts.empty()) throw std::invalid_argument("add_n: no operands");
  const Tensor& first = value(parts[0]);
  for (NodeId p : parts) check_same_shape(first, value(p), "add_n");
  Tensor out = Tensor::zeros(first.shape());
  std::vector<double> slot(parts.size());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    for (std::size_t k = 0; k < parts.size(); ++k) slot[k] = value(parts[k]).data()[i];
    std::sort(slot.begin(), slot.end());
    double acc = 0.0;
    for (double v : slot) acc += v;
    out.data()[i] = acc;
  }
  std::vector<NodeId> ps(parts.begin(), parts.end());
  return push(std::move(out), ps,
              [ps](Tape& t, NodeId, const Tensor& gout) {
                for (NodeId p : ps) {
                  Tensor& gp = t.grad(p);
                  for (std::size_t i = 0; i < gout.numel(); ++i) gp.data()[i] += gout.data()[i];
                }
              },
              "add_n");
}

NodeId Tape::sum(NodeId x) {
  const Tensor& vx = value(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < vx.numel(); ++i) acc += vx.data()[i];
  return push(Tensor::vec({acc}), {x},
              [x](Tape& t, NodeId, const Tensor& gout) {
                Tensor& gx = t.grad(x);
                for (std::size_t i = 0; i < gx.numel(); ++i) gx.data()[i] += gout.data()[0];
              },
              "sum");
}

NodeId Tape::cross_entropy(NodeId logits, std::vector<int> labels) {
  const Tensor& vx = value(logits);
  const int m = vx.rows(), n = vx.cols();
  if (static_cast<int>(labels.size()) != m)
    throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(m) + " rows");
  for (int lab : labels)
    if (lab < 0 || lab >= n)
      throw std::invalid_argument("cross_entropy: label " + std::to_string(lab) + " outside [0, " + std::to_string(n) + ")");
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    double mx = vx.at(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, vx.at(i, j));
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp(vx.at(i, j) - mx);
    total += mx + std::log(z) - vx.at(i, static_cast<int>(labels[static_cast<std::size_t>(i)]));
  }
  total /= m;
  return push(Tensor::vec({total}), {logits},
              [logits, labels = std::move(labels), m, n](Tape& t, NodeId, const Tensor& gout) {
                const Tensor& vx = t.value(logits);
                Tensor& gx = t.grad(logits);
                const double g = gout.data()[0] / m;
                for (int i = 0; i < m; ++i) {
                  double mx = vx.at(i, 0);
                  for (int j = 1; j < n; ++j) mx = std::max(mx, vx.at(i, j));
                  double z = 0.0;
                  for (int j = 0; j < n; ++j) z += std::exp(vx.at(i, j) - mx);
                  for (int j = 0; j < n; ++j) {
                    double p = std::exp(vx.at(i, j) - mx) / z;
                    gx.at(i, j) += g * (p - (j == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0));
                  }
                }
              },
              "cross_entropy");
}

std::vector<Tensor> Tape::backward(NodeId loss, std::span<const NodeId> wrt) {
  if (loss < 0 || static_cast<std::size_t>(loss) >= nodes_.size())
    throw std::invalid_argument("backward: loss node out of range");
  if (value(loss).numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(value(loss)));

  std::vector<char> needed(nodes_.size(), 0);
  needed[static_cast<std::size_t>(loss)] = 1;
  for (NodeId id = loss; id >= 0; --id) {
    if (!needed[static_cast<std::size_t>(id)]) continue;
    for (NodeId p : nodes_[static_cast<std::size_t>(id)].parents) needed[static_cast<std::size_t>(p)] = 1;
  }

  grads_.assign(nodes_.size(), Tensor{});
  grads_[static_cast<std::size_t>(loss)] = Tensor::full(value(loss).shape(), 1.0);

  for (NodeId id = loss; id >= 0; --id) {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (!needed[static_cast<std::size_t>(id)] || !node.pull) continue;
    const Tensor& g = grads_[static_cast<std::size_t>(id)];
    if (g.empty()) continue;
    node.pull(*this, id, g);
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (NodeId id : wrt) {
    Tensor& g = grads_[static_cast<std::size_t>(id)];
    out.push_back(g.empty() ? Tensor::zeros(value(id).shape()) : std::move(g));
  }
  grads_.clear();
  return out;
}

}  // namespace gwn
