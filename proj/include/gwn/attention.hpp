#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gwn/mapping.hpp"
#include "gwn/param_store.hpp"
#include "gwn/tape.hpp"

namespace gwn {

/// Per-head projections plus output projection, position-wise FFN, and the
/// two layer-norm affine pairs.
struct AttentionNodes {
  struct Head {
    NodeId WQ, WK, WV;
  };
  std::vector<Head> heads;
  NodeId WO;
  Mlp2Nodes ffn;
  NodeId ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

/// Raw attention score matrices for one instance: scores[t][k] is the M x M
/// row-stochastic matrix of head k at timestep t. valid[t] is false for
/// pre-padded timesteps (excluded from pattern analysis, not from compute).
struct AttentionTrace {
  std::string instance_id;
  int heads = 0;
  std::vector<std::vector<Tensor>> scores;
  std::vector<std::uint8_t> valid;
};

/// softmax(Q K^T / sqrt(H)) V; returns (context, scores).
std::pair<NodeId, NodeId> scaled_attention(Tape& tape, NodeId q, NodeId k, NodeId v);

/// All heads attended and concatenated, then projected by WO.
/// Returns (output, per-head score nodes).
std::pair<NodeId, std::vector<NodeId>> multi_head(Tape& tape, NodeId x, const AttentionNodes& p);

struct AttentionStep {
  NodeId output;                // M x H
  std::vector<NodeId> scores;   // K score matrices, M x M
};

/// One timestep: multi-head attention, residual + layer norm, FFN,
/// residual + layer norm.
AttentionStep attention_forward(Tape& tape, NodeId x_map, const AttentionNodes& p);

/// Applies attention_forward independently per timestep with shared
/// parameters and collects the trace (`valid[t]` from the padding mask).
std::vector<AttentionStep> run_attention_sequence(Tape& tape, std::span<const NodeId> x_map_sequence,
                                                  const AttentionNodes& p);

std::vector<std::string> attention_param_names(int heads);
/// Fresh attention parameters; layer-norm gains start at one.
void add_attention_params(ParamStore& store, int common, int heads, int ffn_width, Rng& rng);
AttentionNodes bind_attention(const ParamStore& store, const std::vector<NodeId>& nodes, int heads);

/// Trace CSV: instance_id,t,head,row_modality,col_modality,score,valid
std::string traces_to_csv(std::span<const AttentionTrace> traces);
std::vector<AttentionTrace> traces_from_csv(const std::string& text);

}  // namespace gwn
