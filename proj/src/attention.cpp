#include "gwn/attention.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "gwn/io.hpp"
#include "gwn/rng.hpp"

namespace gwn {

std::pair<NodeId, NodeId> scaled_attention(Tape& tape, NodeId q, NodeId k, NodeId v) {
  const int h = tape.value(q).cols();
  NodeId logits = tape.scale(tape.matmul(q, tape.transpose(k)), 1.0 / std::sqrt(static_cast<double>(h)));
  NodeId scores = tape.softmax_rows(logits);
  NodeId context = tape.matmul(scores, v);
  return {context, scores};
}

std::pair<NodeId, std::vector<NodeId>> multi_head(Tape& tape, NodeId x, const AttentionNodes& p) {
  std::vector<NodeId> contexts, scores;
  contexts.reserve(p.heads.size());
  scores.reserve(p.heads.size());
  for (const auto& head : p.heads) {
    NodeId q = tape.matmul(x, head.WQ);
    NodeId k = tape.matmul(x, head.WK);
    NodeId v = tape.matmul(x, head.WV);
    auto [context, score] = scaled_attention(tape, q, k, v);
    contexts.push_back(context);
    scores.push_back(score);
  }
  NodeId merged = contexts.size() == 1 ? contexts[0] : tape.concat_cols(contexts);
  return {tape.matmul(merged, p.WO), std::move(scores)};
}

AttentionStep attention_forward(Tape& tape, NodeId x_map, const AttentionNodes& p) {
  auto [attended, scores] = multi_head(tape, x_map, p);
  NodeId z = tape.layer_norm(tape.add(attended, x_map), p.ln1_gain, p.ln1_bias);
  NodeId ffn = mlp2(tape, z, p.ffn);
  NodeId out = tape.layer_norm(tape.add(ffn, z), p.ln2_gain, p.ln2_bias);
  return {out, std::move(scores)};
}

std::vector<AttentionStep> run_attention_sequence(Tape& tape, std::span<const NodeId> x_map_sequence,
                                                  const AttentionNodes& p) {
  std::vector<AttentionStep> steps;
  steps.reserve(x_map_sequence.size());
  for (NodeId x : x_map_sequence) steps.push_back(attention_forward(tape, x, p));
  return steps;
}

std::vector<std::string> attention_param_names(int heads) {
  std::vector<std::string> names;
  for (int k = 0; k < heads; ++k) {
    const std::string base = "attn.head" + std::to_string(k) + ".";
    names.push_back(base + "WQ");
    names.push_back(base + "WK");
    names.push_back(base + "WV");
  }
  for (const char* n : {"attn.WO", "attn.ffn.W1", "attn.ffn.b1", "attn.ffn.W2", "attn.ffn.b2", "attn.ln1.gain",
                        "attn.ln1.bias", "attn.ln2.gain", "attn.ln2.bias"})
    names.push_back(n);
  return names;
}

void add_attention_params(ParamStore& store, int common, int heads, int ffn_width, Rng& rng) {
  if (heads < 1) throw std::invalid_argument("attention: needs at least one head");
  for (int k = 0; k < heads; ++k) {
    const std::string base = "attn.head" + std::to_string(k) + ".";
    store.add(base + "WQ", glorot_uniform(common, common, rng));
    store.add(base + "WK", glorot_uniform(common, common, rng));
    store.add(base + "WV", glorot_uniform(common, common, rng));
  }
  store.add("attn.WO", glorot_uniform(heads * common, common, rng));
  store.add("attn.ffn.W1", glorot_uniform(common, ffn_width, rng));
  store.add("attn.ffn.b1", Tensor::zeros({ffn_width}));
  store.add("attn.ffn.W2", glorot_uniform(ffn_width, common, rng));
  store.add("attn.ffn.b2", Tensor::zeros({common}));
  store.add("attn.ln1.gain", Tensor::full({common}, 1.0));
  store.add("attn.ln1.bias", Tensor::zeros({common}));
  store.add("attn.ln2.gain", Tensor::full({common}, 1.0));
  store.add("attn.ln2.bias", Tensor::zeros({common}));
}

AttentionNodes bind_attention(const ParamStore& store, const std::vector<NodeId>& nodes, int heads) {
  AttentionNodes out;
  for (int k = 0; k < heads; ++k) {
    const std::string base = "attn.head" + std::to_string(k) + ".";
    out.heads.push_back({nodes[store.index_of(base + "WQ")], nodes[store.index_of(base + "WK")],
                         nodes[store.index_of(base + "WV")]});
  }
  out.WO = nodes[store.index_of("attn.WO")];
  out.ffn = {nodes[store.index_of("attn.ffn.W1")], nodes[store.index_of("attn.ffn.b1")],
             nodes[store.index_of("attn.ffn.W2")], nodes[store.index_of("attn.ffn.b2")]};
  out.ln1_gain = nodes[store.index_of("attn.ln1.gain")];
  out.ln1_bias = nodes[store.index_of("attn.ln1.bias")];
  out.ln2_gain = nodes[store.index_of("attn.ln2.gain")];
  out.ln2_bias = nodes[store.index_of("attn.ln2.bias")];
  return out;
}

std::string traces_to_csv(std::span<const AttentionTrace> traces) {
  std::string out = "instance_id,t,head,row_modality,col_modality,score,valid\n";
  for (const auto& trace : traces) {
    for (std::size_t t = 0; t < trace.scores.size(); ++t) {
      for (std::size_t k = 0; k < trace.scores[t].size(); ++k) {
        const Tensor& s = trace.scores[t][k];
        for (int i = 0; i < s.rows(); ++i)
          for (int j = 0; j < s.cols(); ++j) {
            out += trace.instance_id;
            out += ',' + std::to_string(t) + ',' + std::to_string(k) + ',' + std::to_string(i) + ',' +
                   std::to_string(j) + ',' + format_double(s.at(i, j)) + ',' + (trace.valid[t] ? "1" : "0") + '\n';
          }
      }
    }
  }
  return out;
}

std::vector<AttentionTrace> traces_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trace csv: empty input");
  // (instance -> t -> head -> entries)
  std::map<std::string, std::map<int, std::map<int, std::vector<std::array<double, 3>>>>> cells;
  std::map<std::string, std::map<int, bool>> valid;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 7) throw std::runtime_error("trace csv: line " + std::to_string(lineno) + " has " +
                                                std::to_string(f.size()) + " fields, expected 7");
    const std::string& id = f[0];
    const int t = std::stoi(f[1]);
    const int head = std::stoi(f[2]);
    cells[id][t][head].push_back({std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
    valid[id][t] = f[6] == "1";
  }
  std::vector<AttentionTrace> traces;
  for (const auto& [id, by_t] : cells) {
    AttentionTrace trace;
    trace.instance_id = id;
    for (const auto& [t, by_head] : by_t) {
      if (t != static_cast<int>(trace.scores.size()))
        throw std::runtime_error("trace csv: instance '" + id + "' missing timestep " +
                                 std::to_string(trace.scores.size()));
      std::vector<Tensor> heads;
      for (const auto& [k, entries] : by_head) {
        if (k != static_cast<int>(heads.size()))
          throw std::runtime_error("trace csv: instance '" + id + "' missing head " + std::to_string(heads.size()));
        int m = 0;
        for (const auto& e : entries) m = std::max(m, static_cast<int>(e[0]) + 1);
        Tensor s = Tensor::zeros({m, m});
        for (const auto& e : entries) s.at(static_cast<int>(e[0]), static_cast<int>(e[1])) = e[2];
        heads.push_back(std::move(s));
      }
      trace.scores.push_back(std::move(heads));
      trace.valid.push_back(valid[id][t] ? 1 : 0);
    }
    trace.heads = trace.scores.empty() ? 0 : static_cast<int>(trace.scores[0].size());
    traces.push_back(std::move(trace));
  }
  return traces;
}

}  // namespace gwn
