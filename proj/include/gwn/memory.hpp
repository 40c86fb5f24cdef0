#pragma once

#include <span>
#include <string>
#include <vector>

#include "gwn/param_store.hpp"
#include "gwn/tape.hpp"

namespace gwn {

class Rng;

struct LstmNodes {
  NodeId Wf, bf, Wi, bi, Wo, bo, Wc, bc;
};

struct LstmState {
  NodeId c, h;  // each 1 x G
};

/// One LSTM update on the concatenation [x; h_prev]; x is 1 x D.
LstmState lstm_step(Tape& tape, NodeId x, LstmState prev, const LstmNodes& p);

/// Fold from the all-zero state; returns the full state history (index t
/// holds the state after consuming input t).
std::vector<LstmState> run_memory(Tape& tape, std::span<const NodeId> inputs, const LstmNodes& p);

/// Gate weights are (input_dim + G) x G.
void add_lstm_params(ParamStore& store, int input_dim, int state_dim, Rng& rng);
LstmNodes bind_lstm(const ParamStore& store, const std::vector<NodeId>& nodes);

}  // namespace gwn
