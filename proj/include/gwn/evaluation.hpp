#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gwn/data.hpp"
#include "gwn/mapping.hpp"
#include "gwn/model.hpp"

namespace gwn {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  int labels = 0;
  std::vector<std::int64_t> counts;

  explicit ConfusionMatrix(int labels_ = 0)
      : labels(labels_), counts(static_cast<std::size_t>(labels_) * labels_, 0) {}
  std::int64_t& at(int truth, int pred) { return counts[static_cast<std::size_t>(truth) * labels + pred]; }
  std::int64_t at(int truth, int pred) const { return counts[static_cast<std::size_t>(truth) * labels + pred]; }
  std::int64_t total() const;
  void merge(const ConfusionMatrix& other);
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, int labels);

struct Metrics {
  double acc = 0.0;
  double mcc = 0.0;
  bool mcc_degenerate = false;  // a zero factor under the root; mcc reported as 0
  std::vector<double> f1;       // per class
  double f1_avg = 0.0;          // unweighted macro mean
};

Metrics metrics(const ConfusionMatrix& cm);

enum class PlanKind { losocv, five_by_two };
PlanKind plan_kind_from_string(const std::string& s);
std::string to_string(PlanKind kind);

struct CvFold {
  std::vector<std::string> train_ids, test_ids;
};

struct CvPlan {
  PlanKind kind = PlanKind::losocv;
  std::uint64_t seed = 0;
  std::vector<CvFold> folds;
};

/// One fold per subject; that subject's instances are the test set.
CvPlan losocv_plan(const Dataset& ds);

/// Five seeded subject-level 50/50 splits, each used in both directions.
CvPlan five_by_two_plan(const Dataset& ds, std::uint64_t seed);

CvPlan make_plan(PlanKind kind, const Dataset& ds, std::uint64_t seed);

struct WilcoxonResult {
  double w = 0.0;       // min of the signed-rank sums
  double w_pos = 0.0;
  double p = 1.0;       // two-sided
  double z = 0.0;       // normal approximation with continuity correction
  double r = 0.0;       // z / sqrt(n)
  int n = 0;            // pairs with nonzero difference
  bool exact = false;   // p from full enumeration (n <= 25)
  bool degenerate = false;  // all differences zero; W undefined, p = 1
};

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

struct FoldResult {
  int fold = 0;
  ModelKind model = ModelKind::gwn;
  int n_test = 0;
  Metrics metrics;
};

struct ComparisonReport {
  CvPlan plan;
  std::vector<FoldResult> per_fold;                 // fold-major, gwn then concatn
  Metrics pooled_gwn, pooled_concatn;               // from confusion pooled over folds
  WilcoxonResult wilcoxon_acc;                      // paired per-fold accuracies
  WilcoxonResult wilcoxon_f1;                       // paired per-fold macro F1
  std::vector<AttentionTrace> gwn_traces;           // test-set traces, all folds
};

struct CompareOptions {
  ModelDims dims;
  TrainConfig train;
  bool rotate_train = false;     // augmentation applied to training folds only
  bool oversample_train = true;  // oversampling applied to training folds only
  bool pretrain = true;          // autoencoder pre-training per fold (GWN)
  PretrainConfig pretrain_cfg;
  int workers = 1;               // folds run as independent parallel jobs
  bool collect_traces = false;
};

/// Trains both models per fold on identical train sets with identical seeds,
/// evaluates on the fold's test set, and aggregates.
ComparisonReport run_comparison(const Dataset& ds, const CvPlan& plan, const CompareOptions& opts);

/// CSV: one row per model x fold plus pooled rows.
std::string comparison_to_csv(const ComparisonReport& report);
/// JSON summary: pooled metrics per model, Wilcoxon results, plan shape.
std::string comparison_summary_json(const ComparisonReport& report);

}  // namespace gwn
