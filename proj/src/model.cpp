#include "gwn/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "gwn/adam.hpp"
#include "gwn/memory.hpp"
#include "gwn/parallel.hpp"
#include "gwn/rng.hpp"

namespace gwn {

int default_workers() {
  if (const char* env = std::getenv("GWN_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::min(4u, hw == 0 ? 1u : hw));
}

std::string to_string(ModelKind kind) { return kind == ModelKind::gwn ? "gwn" : "concatn"; }

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "gwn") return ModelKind::gwn;
  if (s == "concatn") return ModelKind::concatn;
  throw std::invalid_argument("unknown model kind '" + s + "' (expected gwn or concatn)");
}

ModelDims ModelDims::for_dataset(const DatasetInfo& info) {
  ModelDims d;
  d.modalities = static_cast<int>(info.modalities.size());
  for (const auto& m : info.modalities) d.dims.push_back(m.dim);
  d.labels = info.classes;
  return d;
}

namespace {

void check_dims(const ModelDims& d) {
  if (d.modalities < 1 || static_cast<int>(d.dims.size()) != d.modalities)
    throw std::invalid_argument("model: modality count and dims disagree");
  for (int v : {d.common, d.enc_hidden, d.heads, d.state, d.ffn, d.head_hidden, d.labels})
    if (v < 1) throw std::invalid_argument("model: all dimensions must be positive");
}

int concat_width(const ModelDims& d) { return std::accumulate(d.dims.begin(), d.dims.end(), 0); }

void add_prediction_params(ParamStore& store, int state, int hidden, int labels, Rng& rng) {
  store.add("head.W1", glorot_uniform(state, hidden, rng));
  store.add("head.b1", Tensor::zeros({hidden}));
  store.add("head.W2", glorot_uniform(hidden, labels, rng));
  store.add("head.b2", Tensor::zeros({labels}));
}

Mlp2Nodes bind_prediction(const ParamStore& store, const std::vector<NodeId>& nodes) {
  return {nodes[store.index_of("head.W1")], nodes[store.index_of("head.b1")], nodes[store.index_of("head.W2")],
          nodes[store.index_of("head.b2")]};
}

void check_instance(const Model& model, const MultimodalInstance& inst) {
  if (static_cast<int>(inst.modalities.size()) != model.dims.modalities)
    throw std::invalid_argument("instance '" + inst.id + "': " + std::to_string(inst.modalities.size()) +
                                " modalities, model expects " + std::to_string(model.dims.modalities));
  if (inst.length() == 0) throw std::invalid_argument("instance '" + inst.id + "': empty sequence");
  for (int m = 0; m < model.dims.modalities; ++m)
    if (inst.modalities[static_cast<std::size_t>(m)].cols() != model.dims.dims[static_cast<std::size_t>(m)])
      throw std::invalid_argument("instance '" + inst.id + "' modality " + std::to_string(m) + ": dimension " +
                                  std::to_string(inst.modalities[static_cast<std::size_t>(m)].cols()) +
                                  ", model expects " + std::to_string(model.dims.dims[static_cast<std::size_t>(m)]));
  if (inst.label < 0 || inst.label >= model.dims.labels)
    throw std::invalid_argument("instance '" + inst.id + "': label " + std::to_string(inst.label) +
                                " outside [0, " + std::to_string(model.dims.labels) + ")");
}

struct GraphOut {
  NodeId logits;                             // 1 x L
  std::vector<LstmState> states;             // per timestep
  std::vector<std::vector<NodeId>> scores;   // [t][k]; empty for CONCATN
};

GraphOut build_graph(Tape& tape, const Model& model, const std::vector<NodeId>& nodes,
                     const MultimodalInstance& inst) {
  const ModelDims& d = model.dims;
  const int t_len = inst.length();
  GraphOut out;
  std::vector<NodeId> memory_inputs;
  memory_inputs.reserve(static_cast<std::size_t>(t_len));

  if (model.kind == ModelKind::gwn) {
    std::vector<NodeId> encoded;  // per modality, T x H
    for (int m = 0; m < d.modalities; ++m) {
      auto names = encoder_param_names(m);
      Mlp2Nodes enc{nodes[model.params.index_of(names[0])], nodes[model.params.index_of(names[1])],
                    nodes[model.params.index_of(names[2])], nodes[model.params.index_of(names[3])]};
      NodeId x = tape.input(inst.modalities[static_cast<std::size_t>(m)]);
      encoded.push_back(mlp2(tape, x, enc));
    }
    AttentionNodes attn = bind_attention(model.params, nodes, d.heads);
    for (int t = 0; t < t_len; ++t) {
      NodeId x_map = stack_mapped(tape, encoded, t);
      AttentionStep step = attention_forward(tape, x_map, attn);
      out.scores.push_back(step.scores);
      memory_inputs.push_back(tape.reshape(step.output, {1, d.modalities * d.common}));
    }
  } else {
    // CONCATN: modalities concatenated along the feature axis, no attention
    Tensor joined = Tensor::zeros({t_len, concat_width(d)});
    int col = 0;
    for (const Tensor& mat : inst.modalities) {
      for (int r = 0; r < t_len; ++r)
        for (int c = 0; c < mat.cols(); ++c) joined.at(r, col + c) = mat.at(r, c);
      col += mat.cols();
    }
    NodeId x = tape.input(std::move(joined));
    for (int t = 0; t < t_len; ++t) memory_inputs.push_back(tape.slice_rows(x, t, t + 1));
  }

  LstmNodes lstm = bind_lstm(model.params, nodes);
  out.states = run_memory(tape, memory_inputs, lstm);
  Mlp2Nodes head = bind_prediction(model.params, nodes);
  out.logits = mlp2(tape, out.states.back().h, head);
  return out;
}

int argmax_row(const Tensor& row) {
  int best = 0;
  for (std::size_t j = 1; j < row.numel(); ++j)
    if (row.data()[j] > row.data()[best]) best = static_cast<int>(j);
  return best;
}

AttentionTrace collect_trace(const Tape& tape, const GraphOut& graph, const MultimodalInstance& inst, int heads) {
  AttentionTrace trace;
  trace.instance_id = inst.id;
  trace.heads = heads;
  const int pad = inst.pad_rows();
  for (std::size_t t = 0; t < graph.scores.size(); ++t) {
    std::vector<Tensor> per_head;
    per_head.reserve(graph.scores[t].size());
    for (NodeId s : graph.scores[t]) per_head.push_back(tape.value(s));
    trace.scores.push_back(std::move(per_head));
    trace.valid.push_back(static_cast<int>(t) >= pad ? 1 : 0);
  }
  return trace;
}

}  // namespace

Model init_model(ModelKind kind, const ModelDims& dims, std::uint64_t seed, const ParamStore* pretrained,
                 bool freeze_encoders) {
  check_dims(dims);
  Model model;
  model.kind = kind;
  model.dims = dims;
  Rng rng = Rng(seed).fork(kind == ModelKind::gwn ? 0x67776eULL : 0x636f6eULL);

  if (kind == ModelKind::gwn) {
    for (int m = 0; m < dims.modalities; ++m) {
      auto names = encoder_param_names(m);
      model.params.add(names[0], glorot_uniform(dims.dims[static_cast<std::size_t>(m)], dims.enc_hidden, rng));
      model.params.add(names[1], Tensor::zeros({dims.enc_hidden}));
      model.params.add(names[2], glorot_uniform(dims.enc_hidden, dims.common, rng));
      model.params.add(names[3], Tensor::zeros({dims.common}));
    }
    add_attention_params(model.params, dims.common, dims.heads, dims.ffn, rng);
    add_lstm_params(model.params, dims.modalities * dims.common, dims.state, rng);
    if (pretrained) {
      for (int m = 0; m < dims.modalities; ++m)
        for (const auto& name : encoder_param_names(m)) {
          if (!pretrained->contains(name))
            throw std::invalid_argument("pretrained encoders: missing '" + name + "'");
          model.params.set(name, pretrained->at(name));
        }
    }
    if (freeze_encoders)
      for (int m = 0; m < dims.modalities; ++m)
        for (const auto& name : encoder_param_names(m)) model.params.set_trainable(name, false);
  } else {
    add_lstm_params(model.params, concat_width(dims), dims.state, rng);
  }
  add_prediction_params(model.params, dims.state, dims.head_hidden, dims.labels, rng);
  return model;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["kind"] = to_string(model.kind);
  meta["dims"] = {{"modalities", model.dims.modalities}, {"dims", model.dims.dims},
                  {"common", model.dims.common},         {"enc_hidden", model.dims.enc_hidden},
                  {"heads", model.dims.heads},           {"state", model.dims.state},
                  {"ffn", model.dims.ffn},               {"head_hidden", model.dims.head_hidden},
                  {"labels", model.dims.labels}};
  model.params.save(path, meta.dump());
}

Model load_model(const std::filesystem::path& path) {
  auto loaded = load_checkpoint(path);
  if (loaded.meta_json.empty()) throw std::runtime_error("checkpoint has no model metadata: " + path.string());
  nlohmann::json meta = nlohmann::json::parse(loaded.meta_json);
  Model model;
  model.kind = model_kind_from_string(meta.at("kind").get<std::string>());
  const auto& d = meta.at("dims");
  model.dims.modalities = d.at("modalities").get<int>();
  model.dims.dims = d.at("dims").get<std::vector<int>>();
  model.dims.common = d.at("common").get<int>();
  model.dims.enc_hidden = d.at("enc_hidden").get<int>();
  model.dims.heads = d.at("heads").get<int>();
  model.dims.state = d.at("state").get<int>();
  model.dims.ffn = d.at("ffn").get<int>();
  model.dims.head_hidden = d.at("head_hidden").get<int>();
  model.dims.labels = d.at("labels").get<int>();
  model.params = std::move(loaded.params);

  // cross-check the stored names and shapes against a fresh layout
  Model expected = init_model(model.kind, model.dims, 0);
  if (expected.params.size() != model.params.size())
    throw std::runtime_error("checkpoint parameter count does not match its metadata: " + path.string());
  for (std::size_t i = 0; i < expected.params.size(); ++i) {
    const auto& want = expected.params.entries()[i];
    const auto& got = model.params.entries()[i];
    if (want.name != got.name || !want.value.same_shape(got.value))
      throw std::runtime_error("checkpoint entry '" + got.name + "' does not match its metadata: " + path.string());
  }
  return model;
}

double instance_loss(const Model& model, const MultimodalInstance& inst, ParamGrads* grads, int* predicted) {
  check_instance(model, inst);
  Tape tape;
  auto nodes = bind_params(tape, model.params);
  GraphOut graph = build_graph(tape, model, nodes, inst);
  NodeId loss = tape.cross_entropy(graph.logits, {inst.label});
  if (predicted) *predicted = argmax_row(tape.value(graph.logits));
  const double value = tape.value(loss).data()[0];
  if (grads) *grads = tape.backward(loss, nodes);
  return value;
}

ForwardResult forward(const Model& model, const MultimodalInstance& inst) {
  check_instance(model, inst);
  Tape tape;
  auto nodes = bind_params(tape, model.params);
  GraphOut graph = build_graph(tape, model, nodes, inst);
  NodeId probs = tape.softmax_rows(graph.logits);
  ForwardResult out;
  out.probs = tape.value(probs).reshaped({model.dims.labels});
  out.predicted = argmax_row(out.probs);
  if (model.kind == ModelKind::gwn) out.trace = collect_trace(tape, graph, inst, model.dims.heads);
  return out;
}

Tensor probs_at(const Model& model, const MultimodalInstance& inst, int t) {
  check_instance(model, inst);
  if (t < 1 || t > inst.length())
    throw std::invalid_argument("probs_at: t=" + std::to_string(t) + " outside [1, " +
                                std::to_string(inst.length()) + "]");
  Tape tape;
  auto nodes = bind_params(tape, model.params);
  GraphOut graph = build_graph(tape, model, nodes, inst);
  Mlp2Nodes head{nodes[model.params.index_of("head.W1")], nodes[model.params.index_of("head.b1")],
                 nodes[model.params.index_of("head.W2")], nodes[model.params.index_of("head.b2")]};
  NodeId probs = tape.softmax_rows(mlp2(tape, graph.states[static_cast<std::size_t>(t - 1)].h, head));
  return tape.value(probs).reshaped({model.dims.labels});
}

TrainResult train(Model& model, const Dataset& ds, const TrainConfig& cfg) {
  if (ds.instances.empty()) throw std::invalid_argument("train: empty dataset");
  for (const auto& inst : ds.instances) check_instance(model, inst);
  if (cfg.batch < 1) throw std::invalid_argument("train: batch must be positive");

  TrainResult result;
  if (cfg.epochs <= 0) return result;

  AdamState adam(model.params, AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  Rng shuffle_rng = Rng(cfg.seed).fork(0x736875ULL);
  const int n = static_cast<int>(ds.instances.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  double best_loss = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    int correct = 0;
    for (int start = 0; start < n; start += cfg.batch) {
      const int stop = std::min(n, start + cfg.batch);
      const int batch_n = stop - start;
      std::vector<ParamGrads> grads(static_cast<std::size_t>(batch_n));
      std::vector<double> losses(static_cast<std::size_t>(batch_n));
      std::vector<int> preds(static_cast<std::size_t>(batch_n));
      parallel_for(batch_n, cfg.workers, [&](int b) {
        const auto& inst = ds.instances[static_cast<std::size_t>(order[static_cast<std::size_t>(start + b)])];
        losses[static_cast<std::size_t>(b)] = instance_loss(model, inst, &grads[static_cast<std::size_t>(b)],
                                                            &preds[static_cast<std::size_t>(b)]);
      });
      // reduce in slot order so the result is worker-count independent
      ParamGrads total = std::move(grads[0]);
      for (int b = 1; b < batch_n; ++b)
        for (std::size_t p = 0; p < total.size(); ++p) {
          const Tensor& g = grads[static_cast<std::size_t>(b)][p];
          for (std::size_t k = 0; k < g.numel(); ++k) total[p].data()[k] += g.data()[k];
        }
      const double inv = 1.0 / batch_n;
      for (auto& g : total)
        for (std::size_t k = 0; k < g.numel(); ++k) g.data()[k] *= inv;
      adam.step(model.params, total);

      for (int b = 0; b < batch_n; ++b) {
        epoch_loss += losses[static_cast<std::size_t>(b)];
        const auto& inst = ds.instances[static_cast<std::size_t>(order[static_cast<std::size_t>(start + b)])];
        if (preds[static_cast<std::size_t>(b)] == inst.label) ++correct;
      }
    }
    epoch_loss /= n;
    result.curve.push_back({epoch, epoch_loss, static_cast<double>(correct) / n});

    if (epoch_loss < best_loss - cfg.min_delta) {
      best_loss = epoch_loss;
      stale = 0;
    } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

std::pair<Model, TrainResult> train_model(ModelKind kind, const Dataset& ds, const TrainConfig& cfg,
                                          const ModelDims& dims, const ParamStore* pretrained) {
  Model model = init_model(kind, dims, cfg.seed, pretrained, cfg.freeze_encoders);
  TrainResult curve = train(model, ds, cfg);
  return {std::move(model), std::move(curve)};
}

std::vector<Prediction> predict_batch(const Model& model, const Dataset& ds, std::vector<AttentionTrace>* traces,
                                      int workers) {
  const int n = static_cast<int>(ds.instances.size());
  std::vector<Prediction> out(static_cast<std::size_t>(n));
  if (traces) traces->assign(static_cast<std::size_t>(model.kind == ModelKind::gwn ? n : 0), {});
  parallel_for(n, workers, [&](int i) {
    const auto& inst = ds.instances[static_cast<std::size_t>(i)];
    ForwardResult fr = forward(model, inst);
    out[static_cast<std::size_t>(i)] = {inst.id, inst.label, fr.predicted, std::move(fr.probs)};
    if (traces && model.kind == ModelKind::gwn) (*traces)[static_cast<std::size_t>(i)] = std::move(fr.trace);
  });
  return out;
}

}  // namespace gwn
