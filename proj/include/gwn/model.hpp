#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gwn/attention.hpp"
#include "gwn/data.hpp"
#include "gwn/param_store.hpp"

namespace gwn {

enum class ModelKind { gwn, concatn };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct ModelDims {
  int modalities = 0;      // M
  std::vector<int> dims;   // d_m per modality
  int common = 32;         // H, shared feature dimension
  int enc_hidden = 64;     // encoder hidden width
  int heads = 4;           // K
  int state = 64;          // G, LSTM state size
  int ffn = 64;            // F
  int head_hidden = 64;    // P, prediction-head hidden width
  int labels = 2;          // L

  static ModelDims for_dataset(const DatasetInfo& info);
};

struct Model {
  ModelKind kind = ModelKind::gwn;
  ModelDims dims;
  ParamStore params;
};

/// Fresh model. For the GWN, `pretrained` (when given) seeds the encoder
/// parameters; they stay trainable unless `freeze_encoders`.
Model init_model(ModelKind kind, const ModelDims& dims, std::uint64_t seed,
                 const ParamStore* pretrained = nullptr, bool freeze_encoders = false);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

struct ForwardResult {
  Tensor probs;          // {L}, sums to one
  int predicted = 0;     // argmax, ties to the lowest class index
  AttentionTrace trace;  // empty for CONCATN
};

ForwardResult forward(const Model& model, const MultimodalInstance& inst);

/// Class distribution read off the memory state after `t` steps (1-based);
/// the prediction head can be applied at any timestep.
Tensor probs_at(const Model& model, const MultimodalInstance& inst, int t);

struct TrainConfig {
  double lr = 1e-3;
  int batch = 32;
  int epochs = 200;
  std::uint64_t seed = 0;
  int patience = 20;        // early stop on training-loss plateau; <= 0 disables
  double min_delta = 1e-6;  // required improvement to reset patience
  bool freeze_encoders = false;
  int workers = 1;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> curve;
};

/// Mini-batch cross-entropy with Adam; bitwise deterministic in the seed
/// (for any worker count).
TrainResult train(Model& model, const Dataset& ds, const TrainConfig& cfg);

/// Convenience: init + train in one call.
std::pair<Model, TrainResult> train_model(ModelKind kind, const Dataset& ds, const TrainConfig& cfg,
                                          const ModelDims& dims, const ParamStore* pretrained = nullptr);

struct Prediction {
  std::string instance_id;
  int truth = 0;
  int predicted = 0;
  Tensor probs;
};

std::vector<Prediction> predict_batch(const Model& model, const Dataset& ds,
                                      std::vector<AttentionTrace>* traces = nullptr, int workers = 1);

/// Instance loss and, optionally, gradients in ParamStore entry order.
double instance_loss(const Model& model, const MultimodalInstance& inst, ParamGrads* grads,
                     int* predicted = nullptr);

}  // namespace gwn
