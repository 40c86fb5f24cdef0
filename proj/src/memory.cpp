#include "gwn/memory.hpp"

#include <stdexcept>

#include "gwn/mapping.hpp"
#include "gwn/rng.hpp"

namespace gwn {

LstmState lstm_step(Tape& tape, NodeId x, LstmState prev, const LstmNodes& p) {
  std::vector<NodeId> joined = {x, prev.h};
  NodeId z = tape.concat_cols(joined);
  NodeId f = tape.sigmoid(tape.add_rowwise(tape.matmul(z, p.Wf), p.bf));
  NodeId i = tape.sigmoid(tape.add_rowwise(tape.matmul(z, p.Wi), p.bi));
  NodeId o = tape.sigmoid(tape.add_rowwise(tape.matmul(z, p.Wo), p.bo));
  NodeId candidate = tape.tanh(tape.add_rowwise(tape.matmul(z, p.Wc), p.bc));
  NodeId c = tape.add(tape.hadamard(f, prev.c), tape.hadamard(i, candidate));
  NodeId h = tape.hadamard(o, tape.tanh(c));
  return {c, h};
}

std::vector<LstmState> run_memory(Tape& tape, std::span<const NodeId> inputs, const LstmNodes& p) {
  if (inputs.empty()) throw std::invalid_argument("run_memory: empty input sequence");
  const int g = tape.value(p.bf).shape()[0];
  LstmState state{tape.input(Tensor::zeros({1, g})), tape.input(Tensor::zeros({1, g}))};
  std::vector<LstmState> history;
  history.reserve(inputs.size());
  for (NodeId x : inputs) {
    state = lstm_step(tape, x, state, p);
    history.push_back(state);
  }
  return history;
}

void add_lstm_params(ParamStore& store, int input_dim, int state_dim, Rng& rng) {
  const int rows = input_dim + state_dim;
  for (const char* gate : {"f", "i", "o", "c"}) {
    store.add(std::string("lstm.W") + gate, glorot_uniform(rows, state_dim, rng));
    store.add(std::string("lstm.b") + gate, Tensor::zeros({state_dim}));
  }
}

LstmNodes bind_lstm(const ParamStore& store, const std::vector<NodeId>& nodes) {
  return {nodes[store.index_of("lstm.Wf")], nodes[store.index_of("lstm.bf")],
          nodes[store.index_of("lstm.Wi")], nodes[store.index_of("lstm.bi")],
          nodes[store.index_of("lstm.Wo")], nodes[store.index_of("lstm.bo")],
          nodes[store.index_of("lstm.Wc")], nodes[store.index_of("lstm.bc")]};
}

}  // namespace gwn
