#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gwn/attention.hpp"
#include "gwn/evaluation.hpp"

namespace gwn {

/// The five attention patterns, ordered by how often a modality favours
/// itself: always / mostly / balanced / rarely / never.
enum class Pattern { FIA, FOS, FIOB, FIS, FOA };

std::string to_string(Pattern p);

/// Per (instance, head, modality): the self-attention weight a_t[m,m] over
/// valid (non-padded) timesteps, and whether that step favours self (the self
/// weight strictly exceeds every other entry of row m; ties favour other).
struct SelfAttentionSeries {
  std::string instance_id;
  int head = 0;
  int modality = 0;
  std::vector<double> self_weight;
  std::vector<std::uint8_t> favors_self;

  double self_fraction() const;  // fraction of steps favouring self
};

std::vector<SelfAttentionSeries> self_attention_series(const AttentionTrace& trace);

/// Number of consecutive-step changes of the favoured target.
int count_switches(const SelfAttentionSeries& series);

/// s = fraction of steps favouring self: s=1 FIA; 0.6<s<1 FOS;
/// 0.4<=s<=0.6 FIOB; 0<s<0.4 FIS; s=0 FOA. Boundary fractions at exactly
/// 0.4 / 0.6 fall inside the balanced band.
Pattern classify_pattern(const SelfAttentionSeries& series);

struct PatternRow {
  int modality = 0;
  std::array<double, 5> freq{};  // FIA, FOS, FIOB, FIS, FOA; sums to one
  double switch_mean = 0.0;
  double switch_std = 0.0;       // population std
  int pairs = 0;                 // (instance, head) pairs pooled
};

/// Frequencies pooled over (instance, head) pairs, one row per modality.
std::vector<PatternRow> pattern_table(std::span<const AttentionTrace> traces);

/// Per-(instance, head, modality) classification rows:
/// instance_id,head,modality,s,switches,label
std::string patterns_to_csv(std::span<const AttentionTrace> traces);
/// Table-shaped summary rows: condition,modality,fia,fos,fiob,fis,foa,
/// switch_mean,switch_std
std::string pattern_summary_to_csv(std::span<const PatternRow> rows, const std::string& condition);

/// Noise condition: -1 is the clean baseline, otherwise the modality index
/// receiving noise.
struct NoiseCondition {
  int modality = -1;
  std::string name() const { return modality < 0 ? "none" : "in_m" + std::to_string(modality); }
};

struct NoiseExperimentConfig {
  std::vector<NoiseCondition> conditions;  // default: none, in_m0, in_m1
  std::vector<std::uint64_t> seeds = {1};
  double fraction = 0.10;
  PlanKind plan = PlanKind::five_by_two;
  ModelDims dims;
  TrainConfig train;
  bool pretrain = true;
  PretrainConfig pretrain_cfg;
  bool oversample_train = true;
  bool rotate_train = false;
  int workers = 1;
};

struct NoiseRun {
  std::string condition;
  std::uint64_t seed = 0;
  double sigma = 0.0;  // 0 for the clean condition
  Metrics metrics;     // pooled over folds, GWN only
  std::vector<PatternRow> patterns;
};

struct NoiseExperimentResult {
  std::vector<NoiseRun> runs;  // condition-major, then seed
};

/// Retrains and evaluates the GWN per condition and seed under the chosen CV
/// plan; pattern tables come from the test-set attention traces.
NoiseExperimentResult noise_experiment(const Dataset& ds, const NoiseExperimentConfig& cfg);

/// Table-3-shaped rows (condition,seed,acc,mcc,f1_*,f1_avg) with per-condition
/// means over seeds.
std::string noise_report_to_csv(const NoiseExperimentResult& result, int labels);
/// Per-seed FIA-frequency change of each modality versus the clean condition:
/// condition,seed,modality,fia,fia_none,fia_delta
std::string fia_delta_csv(const NoiseExperimentResult& result);

}  // namespace gwn
