#include "gwn/mapping.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gwn/adam.hpp"
#include "gwn/rng.hpp"

namespace gwn {

NodeId mlp2(Tape& tape, NodeId x, const Mlp2Nodes& p) {
  NodeId h = tape.relu(tape.add_rowwise(tape.matmul(x, p.W1), p.b1));
  return tape.add_rowwise(tape.matmul(h, p.W2), p.b2);
}

std::vector<std::string> encoder_param_names(int modality) {
  const std::string base = "enc" + std::to_string(modality) + ".";
  return {base + "W1", base + "b1", base + "W2", base + "b2"};
}

std::vector<std::string> decoder_param_names(int modality) {
  const std::string base = "dec" + std::to_string(modality) + ".";
  return {base + "W1", base + "b1", base + "W2", base + "b2"};
}

Tensor glorot_uniform(int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor w = Tensor::zeros({fan_in, fan_out});
  for (std::size_t i = 0; i < w.numel(); ++i) w.data()[i] = rng.uniform(-limit, limit);
  return w;
}

ParamStore init_autoencoders(const std::vector<int>& dims, int hidden, int common, std::uint64_t seed) {
  Rng rng(seed);
  ParamStore store;
  for (std::size_t m = 0; m < dims.size(); ++m) {
    const int d = dims[m];
    auto enc = encoder_param_names(static_cast<int>(m));
    store.add(enc[0], glorot_uniform(d, hidden, rng));
    store.add(enc[1], Tensor::zeros({hidden}));
    store.add(enc[2], glorot_uniform(hidden, common, rng));
    store.add(enc[3], Tensor::zeros({common}));
  }
  for (std::size_t m = 0; m < dims.size(); ++m) {
    const int d = dims[m];
    auto dec = decoder_param_names(static_cast<int>(m));
    store.add(dec[0], glorot_uniform(common, hidden, rng));
    store.add(dec[1], Tensor::zeros({hidden}));
    store.add(dec[2], glorot_uniform(hidden, d, rng));
    store.add(dec[3], Tensor::zeros({d}));
  }
  return store;
}

NodeId fuse_common(Tape& tape, std::span<const NodeId> encodings) {
  return tape.add_n(encodings);
}

NodeId stack_mapped(Tape& tape, std::span<const NodeId> sequence_encodings, int t) {
  std::vector<NodeId> rows;
  rows.reserve(sequence_encodings.size());
  for (NodeId seq : sequence_encodings) rows.push_back(tape.slice_rows(seq, t, t + 1));
  return tape.concat_rows(rows);
}

NodeId reconstruction_loss(Tape& tape, std::span<const NodeId> inputs, std::span<const NodeId> recons) {
  if (inputs.size() != recons.size())
    throw std::invalid_argument("reconstruction_loss: " + std::to_string(inputs.size()) + " inputs vs " +
                                std::to_string(recons.size()) + " reconstructions");
  if (inputs.empty()) throw std::invalid_argument("reconstruction_loss: no modalities");
  const int rows = tape.value(inputs[0]).rows();
  std::vector<NodeId> terms;
  for (std::size_t m = 0; m < inputs.size(); ++m) {
    NodeId diff = tape.sub(recons[m], inputs[m]);
    terms.push_back(tape.sum(tape.hadamard(diff, diff)));
  }
  NodeId total = terms.size() == 1 ? terms[0] : tape.add_n(terms);
  return tape.scale(total, 1.0 / rows);
}

namespace {

struct AutoencoderNodes {
  std::vector<Mlp2Nodes> enc, dec;
};

AutoencoderNodes bind_autoencoders(const ParamStore& store, const std::vector<NodeId>& nodes, int modalities) {
  AutoencoderNodes out;
  for (int m = 0; m < modalities; ++m) {
    auto e = encoder_param_names(m);
    auto d = decoder_param_names(m);
    out.enc.push_back({nodes[store.index_of(e[0])], nodes[store.index_of(e[1])], nodes[store.index_of(e[2])],
                       nodes[store.index_of(e[3])]});
    out.dec.push_back({nodes[store.index_of(d[0])], nodes[store.index_of(d[1])], nodes[store.index_of(d[2])],
                       nodes[store.index_of(d[3])]});
  }
  return out;
}

}  // namespace

PretrainResult pretrain_autoencoders(const Dataset& ds, const PretrainConfig& cfg) {
  if (ds.instances.empty()) throw std::invalid_argument("pretrain_autoencoders: empty dataset");
  const int modalities = static_cast<int>(ds.info.modalities.size());
  std::vector<int> dims;
  for (const auto& m : ds.info.modalities) dims.push_back(m.dim);

  // pool non-padded timesteps across instances: one row set per modality
  std::vector<std::pair<std::size_t, int>> steps;  // (instance index, row)
  for (std::size_t i = 0; i < ds.instances.size(); ++i)
    for (int r = ds.instances[i].pad_rows(); r < ds.instances[i].length(); ++r) steps.emplace_back(i, r);
  if (steps.empty()) throw std::invalid_argument("pretrain_autoencoders: no non-padded timesteps");

  PretrainResult result;
  result.params = init_autoencoders(dims, cfg.hidden, cfg.common, cfg.seed);
  if (cfg.epochs <= 0) return result;

  AdamState adam(result.params, AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  Rng shuffle_rng = Rng(cfg.seed).fork(0x70726574ULL);

  std::vector<std::size_t> order(steps.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      const int rows = static_cast<int>(stop - start);

      Tape tape;
      auto nodes = bind_params(tape, result.params);
      auto ae = bind_autoencoders(result.params, nodes, modalities);

      std::vector<NodeId> inputs, encodings;
      for (int m = 0; m < modalities; ++m) {
        Tensor batch = Tensor::zeros({rows, dims[static_cast<std::size_t>(m)]});
        for (std::size_t k = start; k < stop; ++k) {
          const auto& [ii, rr] = steps[order[k]];
          const Tensor& mat = ds.instances[ii].modalities[static_cast<std::size_t>(m)];
          for (int c = 0; c < mat.cols(); ++c) batch.at(static_cast<int>(k - start), c) = mat.at(rr, c);
        }
        NodeId x = tape.input(std::move(batch));
        inputs.push_back(x);
        encodings.push_back(mlp2(tape, x, ae.enc[static_cast<std::size_t>(m)]));
      }
      NodeId code = fuse_common(tape, encodings);
      std::vector<NodeId> recons;
      for (int m = 0; m < modalities; ++m) recons.push_back(mlp2(tape, code, ae.dec[static_cast<std::size_t>(m)]));
      NodeId loss = reconstruction_loss(tape, inputs, recons);

      ParamGrads grads = tape.backward(loss, nodes);
      adam.step(result.params, grads);
      epoch_loss += tape.value(loss).data()[0] * rows;
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

}  // namespace gwn
