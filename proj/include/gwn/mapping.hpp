#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gwn/data.hpp"
#include "gwn/param_store.hpp"
#include "gwn/tape.hpp"

namespace gwn {

/// Two-layer MLP: relu(x W1 + b1) W2 + b2. The shared shape of the encoders,
/// decoders, position-wise FFN and prediction head.
struct Mlp2Nodes {
  NodeId W1, b1, W2, b2;
};

NodeId mlp2(Tape& tape, NodeId x, const Mlp2Nodes& p);

class Rng;
/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(int fan_in, int fan_out, Rng& rng);

/// Per-modality encoder/decoder parameter names inside a ParamStore.
std::vector<std::string> encoder_param_names(int modality);
std::vector<std::string> decoder_param_names(int modality);

/// Fresh autoencoder parameters for all modalities (encoders + decoders),
/// scaled uniform init for weights, zero biases.
ParamStore init_autoencoders(const std::vector<int>& dims, int hidden, int common, std::uint64_t seed);

/// Elementwise sum of the per-modality encodings; bit-exactly invariant to
/// any permutation of the operands.
NodeId fuse_common(Tape& tape, std::span<const NodeId> encodings);

/// Row m = encoding of modality m at timestep t, in declared modality order.
NodeId stack_mapped(Tape& tape, std::span<const NodeId> sequence_encodings, int t);

/// Sum over modalities of squared reconstruction error, averaged over rows.
NodeId reconstruction_loss(Tape& tape, std::span<const NodeId> inputs, std::span<const NodeId> recons);

struct PretrainConfig {
  int common = 32;        // H, the shared feature dimension
  int hidden = 64;        // encoder/decoder hidden width
  int epochs = 100;
  double lr = 1e-3;
  int batch = 32;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  ParamStore params;               // encoders and decoders
  std::vector<double> loss_curve;  // mean loss per epoch
};

/// Unsupervised pre-training of the mapping autoencoders on timestep vectors
/// pooled across instances; padded timesteps are excluded.
PretrainResult pretrain_autoencoders(const Dataset& ds, const PretrainConfig& cfg);

}  // namespace gwn
