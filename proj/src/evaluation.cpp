#include "gwn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "gwn/io.hpp"
#include "gwn/parallel.hpp"
#include "gwn/rng.hpp"

namespace gwn {

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (labels != other.labels) throw std::invalid_argument("confusion merge: label counts differ");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, int labels) {
  if (truth.size() != predicted.size())
    throw std::invalid_argument("confusion: " + std::to_string(truth.size()) + " true labels vs " +
                                std::to_string(predicted.size()) + " predictions");
  if (labels < 1) throw std::invalid_argument("confusion: labels must be positive");
  ConfusionMatrix cm(labels);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= labels || predicted[i] < 0 || predicted[i] >= labels)
      throw std::invalid_argument("confusion: label outside [0, " + std::to_string(labels) + ") at index " +
                                  std::to_string(i));
    ++cm.at(truth[i], predicted[i]);
  }
  return cm;
}

Metrics metrics(const ConfusionMatrix& cm) {
  const std::int64_t n = cm.total();
  if (cm.labels < 1 || n == 0) throw std::invalid_argument("metrics: empty confusion matrix");
  Metrics out;

  std::int64_t trace = 0;
  std::vector<std::int64_t> row_sum(static_cast<std::size_t>(cm.labels), 0);
  std::vector<std::int64_t> col_sum(static_cast<std::size_t>(cm.labels), 0);
  for (int i = 0; i < cm.labels; ++i)
    for (int j = 0; j < cm.labels; ++j) {
      row_sum[static_cast<std::size_t>(i)] += cm.at(i, j);
      col_sum[static_cast<std::size_t>(j)] += cm.at(i, j);
      if (i == j) trace += cm.at(i, j);
    }

  out.acc = static_cast<double>(trace) / static_cast<double>(n);

  // multiclass MCC, covariance form over the confusion matrix
  double dot_tp = 0.0, sum_t2 = 0.0, sum_p2 = 0.0;
  for (int k = 0; k < cm.labels; ++k) {
    dot_tp += static_cast<double>(row_sum[static_cast<std::size_t>(k)]) *
              static_cast<double>(col_sum[static_cast<std::size_t>(k)]);
    sum_t2 += static_cast<double>(row_sum[static_cast<std::size_t>(k)]) *
              static_cast<double>(row_sum[static_cast<std::size_t>(k)]);
    sum_p2 += static_cast<double>(col_sum[static_cast<std::size_t>(k)]) *
              static_cast<double>(col_sum[static_cast<std::size_t>(k)]);
  }
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  const double cov = static_cast<double>(n) * static_cast<double>(trace) - dot_tp;
  const double denom = std::sqrt(nn - sum_p2) * std::sqrt(nn - sum_t2);
  if (denom == 0.0) {
    out.mcc = 0.0;
    out.mcc_degenerate = true;
  } else {
    out.mcc = cov / denom;
  }

  for (int k = 0; k < cm.labels; ++k) {
    const double tp = static_cast<double>(cm.at(k, k));
    const double pred_k = static_cast<double>(col_sum[static_cast<std::size_t>(k)]);
    const double true_k = static_cast<double>(row_sum[static_cast<std::size_t>(k)]);
    const double precision = pred_k > 0 ? tp / pred_k : 0.0;
    const double recall = true_k > 0 ? tp / true_k : 0.0;
    const double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    out.f1.push_back(f1);
    out.f1_avg += f1;
  }
  out.f1_avg /= cm.labels;
  return out;
}

PlanKind plan_kind_from_string(const std::string& s) {
  if (s == "losocv") return PlanKind::losocv;
  if (s == "5x2") return PlanKind::five_by_two;
  throw std::invalid_argument("unknown plan '" + s + "' (expected losocv or 5x2)");
}

std::string to_string(PlanKind kind) { return kind == PlanKind::losocv ? "losocv" : "5x2"; }

namespace {

std::map<std::string, std::vector<std::string>> instances_by_subject(const Dataset& ds) {
  std::map<std::string, std::vector<std::string>> by_subject;
  for (const auto& inst : ds.instances) by_subject[inst.subject].push_back(inst.id);
  return by_subject;
}

}  // namespace

CvPlan losocv_plan(const Dataset& ds) {
  auto by_subject = instances_by_subject(ds);
  if (by_subject.size() < 2) throw std::invalid_argument("losocv_plan: needs at least 2 subjects");
  CvPlan plan;
  plan.kind = PlanKind::losocv;
  for (const auto& [subject, test_ids] : by_subject) {
    CvFold fold;
    fold.test_ids = test_ids;
    for (const auto& [other, ids] : by_subject)
      if (other != subject) fold.train_ids.insert(fold.train_ids.end(), ids.begin(), ids.end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

CvPlan five_by_two_plan(const Dataset& ds, std::uint64_t seed) {
  auto by_subject = instances_by_subject(ds);
  if (by_subject.size() < 2) throw std::invalid_argument("five_by_two_plan: needs at least 2 subjects");
  std::vector<std::string> subjects;
  for (const auto& [subject, ids] : by_subject) subjects.push_back(subject);

  CvPlan plan;
  plan.kind = PlanKind::five_by_two;
  plan.seed = seed;
  Rng rng(seed);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<std::string> order = subjects;
    rng.shuffle(order);
    const std::size_t half = order.size() / 2;
    std::vector<std::string> ids_a, ids_b;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto& ids = by_subject[order[i]];
      auto& dst = i < half ? ids_a : ids_b;
      dst.insert(dst.end(), ids.begin(), ids.end());
    }
    std::sort(ids_a.begin(), ids_a.end());
    std::sort(ids_b.begin(), ids_b.end());
    plan.folds.push_back({ids_a, ids_b});  // train on A, test on B
    plan.folds.push_back({ids_b, ids_a});  // and the reverse
  }
  return plan;
}

CvPlan make_plan(PlanKind kind, const Dataset& ds, std::uint64_t seed) {
  return kind == PlanKind::losocv ? losocv_plan(ds) : five_by_two_plan(ds, seed);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("wilcoxon: sample sizes differ, " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  WilcoxonResult res;
  res.n = static_cast<int>(diffs.size());
  if (diffs.empty()) {
    res.degenerate = true;
    res.p = 1.0;
    return res;
  }
  const int n = res.n;

  // ranks of |d| with average ranks for ties
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](int x, int y) { return std::abs(diffs[static_cast<std::size_t>(x)]) < std::abs(diffs[static_cast<std::size_t>(y)]); });
  std::vector<double> ranks(static_cast<std::size_t>(n));
  double tie_correction = 0.0;
  for (int i = 0; i < n;) {
    int j = i;
    while (j < n && std::abs(diffs[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])]) ==
                        std::abs(diffs[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]))
      ++j;
    const double avg = (i + 1 + j) / 2.0;
    for (int k = i; k < j; ++k) ranks[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = avg;
    const double t = j - i;
    tie_correction += (t * t * t - t) / 48.0;
    i = j;
  }

  double w_pos = 0.0, total_rank = 0.0;
  for (int i = 0; i < n; ++i) {
    total_rank += ranks[static_cast<std::size_t>(i)];
    if (diffs[static_cast<std::size_t>(i)] > 0) w_pos += ranks[static_cast<std::size_t>(i)];
  }
  res.w_pos = w_pos;
  res.w = std::min(w_pos, total_rank - w_pos);

  const double mu = n * (n + 1) / 4.0;
  const double var = n * (n + 1) * (2.0 * n + 1) / 24.0 - tie_correction;
  if (var > 0.0) {
    const double dev = w_pos - mu;
    const double cc = std::abs(dev) <= 0.5 ? std::abs(dev) : 0.5;  // continuity correction toward the mean
    res.z = (dev - (dev > 0 ? cc : -cc)) / std::sqrt(var);
    res.r = res.z / std::sqrt(static_cast<double>(n));
  }

  if (n <= 25) {
    // exact two-sided p by enumerating all 2^n sign assignments
    res.exact = true;
    const std::uint64_t count = 1ULL << n;
    std::uint64_t le = 0, ge = 0;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        if (mask & (1ULL << i)) s += ranks[static_cast<std::size_t>(i)];
      if (s <= w_pos) ++le;
      if (s >= w_pos) ++ge;
    }
    const double tail = static_cast<double>(std::min(le, ge)) / static_cast<double>(count);
    res.p = std::min(1.0, 2.0 * tail);
  } else {
    res.p = std::min(1.0, 2.0 * 0.5 * std::erfc(std::abs(res.z) / std::sqrt(2.0)));
  }
  return res;
}

namespace {

Dataset subset_by_ids(const Dataset& ds, const std::vector<std::string>& ids) {
  std::set<std::string> wanted(ids.begin(), ids.end());
  Dataset out;
  out.info = ds.info;
  for (const auto& inst : ds.instances)
    if (wanted.count(inst.id)) out.instances.push_back(inst);
  if (out.instances.size() != wanted.size())
    throw std::invalid_argument("plan references instance ids missing from the dataset");
  return out;
}

struct FoldOutcome {
  ConfusionMatrix cm_gwn, cm_concatn;
  Metrics m_gwn, m_concatn;
  int n_test = 0;
  std::vector<AttentionTrace> traces;
};

}  // namespace

ComparisonReport run_comparison(const Dataset& ds, const CvPlan& plan, const CompareOptions& opts) {
  if (plan.folds.empty()) throw std::invalid_argument("run_comparison: plan has no folds");

  const int folds = static_cast<int>(plan.folds.size());
  std::vector<FoldOutcome> outcomes(static_cast<std::size_t>(folds),
                                    FoldOutcome{ConfusionMatrix(ds.info.classes), ConfusionMatrix(ds.info.classes),
                                                {}, {}, 0, {}});

  parallel_for(folds, opts.workers, [&](int f) {
    const CvFold& fold = plan.folds[static_cast<std::size_t>(f)];
    Dataset train_set = subset_by_ids(ds, fold.train_ids);
    const Dataset test_set = subset_by_ids(ds, fold.test_ids);

    if (opts.rotate_train) train_set = rotate_augment(train_set);
    const std::uint64_t fold_seed = splitmix64(opts.train.seed ^ (0x666f6c64ULL + static_cast<std::uint64_t>(f)));
    if (opts.oversample_train) train_set = oversample_minority(train_set, fold_seed);

    std::set<int> train_classes;
    for (const auto& inst : train_set.instances) train_classes.insert(inst.label);
    for (int c = 0; c < ds.info.classes; ++c)
      if (!train_classes.count(c))
        throw std::runtime_error("fold " + std::to_string(f) + ": class " + std::to_string(c) +
                                 " absent from the training set");

    TrainConfig cfg = opts.train;
    cfg.seed = fold_seed;

    ParamStore pretrained;
    const ParamStore* pretrained_ptr = nullptr;
    if (opts.pretrain) {
      PretrainConfig pc = opts.pretrain_cfg;
      pc.common = opts.dims.common;
      pc.hidden = opts.dims.enc_hidden;
      pc.seed = fold_seed;
      pretrained = pretrain_autoencoders(train_set, pc).params;
      pretrained_ptr = &pretrained;
    }

    auto [gwn_model, gwn_curve] = train_model(ModelKind::gwn, train_set, cfg, opts.dims, pretrained_ptr);
    auto [concatn_model, concatn_curve] = train_model(ModelKind::concatn, train_set, cfg, opts.dims, nullptr);

    FoldOutcome& oc = outcomes[static_cast<std::size_t>(f)];
    oc.n_test = static_cast<int>(test_set.instances.size());

    std::vector<AttentionTrace> traces;
    auto run = [&](const Model& model, ConfusionMatrix& cm, std::vector<AttentionTrace>* trace_sink) {
      auto preds = predict_batch(model, test_set, trace_sink);
      std::vector<int> truth, predicted;
      for (const auto& p : preds) {
        truth.push_back(p.truth);
        predicted.push_back(p.predicted);
      }
      cm = confusion(truth, predicted, ds.info.classes);
    };
    run(gwn_model, oc.cm_gwn, opts.collect_traces ? &traces : nullptr);
    run(concatn_model, oc.cm_concatn, nullptr);
    oc.m_gwn = metrics(oc.cm_gwn);
    oc.m_concatn = metrics(oc.cm_concatn);
    oc.traces = std::move(traces);
  });

  ComparisonReport report;
  report.plan = plan;
  ConfusionMatrix pooled_gwn(ds.info.classes), pooled_concatn(ds.info.classes);
  std::vector<double> acc_gwn, acc_concatn, f1_gwn, f1_concatn;
  for (int f = 0; f < folds; ++f) {
    FoldOutcome& oc = outcomes[static_cast<std::size_t>(f)];
    report.per_fold.push_back({f, ModelKind::gwn, oc.n_test, oc.m_gwn});
    report.per_fold.push_back({f, ModelKind::concatn, oc.n_test, oc.m_concatn});
    pooled_gwn.merge(oc.cm_gwn);
    pooled_concatn.merge(oc.cm_concatn);
    acc_gwn.push_back(oc.m_gwn.acc);
    acc_concatn.push_back(oc.m_concatn.acc);
    f1_gwn.push_back(oc.m_gwn.f1_avg);
    f1_concatn.push_back(oc.m_concatn.f1_avg);
    for (auto& trace : oc.traces) report.gwn_traces.push_back(std::move(trace));
  }
  report.pooled_gwn = metrics(pooled_gwn);
  report.pooled_concatn = metrics(pooled_concatn);
  report.wilcoxon_acc = wilcoxon_signed_rank(acc_gwn, acc_concatn);
  report.wilcoxon_f1 = wilcoxon_signed_rank(f1_gwn, f1_concatn);
  return report;
}

namespace {

void append_metric_row(std::string& out, const std::string& model, const std::string& fold, int n_test,
                       const Metrics& m) {
  out += model + ',' + fold + ',' + std::to_string(n_test) + ',' + format_double(m.acc) + ',' + format_double(m.mcc);
  for (double f1 : m.f1) out += ',' + format_double(f1);
  out += ',' + format_double(m.f1_avg) + '\n';
}

}  // namespace

std::string comparison_to_csv(const ComparisonReport& report) {
  const int labels = static_cast<int>(report.pooled_gwn.f1.size());
  std::string out = "model,fold,n_test,acc,mcc";
  for (int c = 0; c < labels; ++c) out += ",f1_" + std::to_string(c);
  out += ",f1_avg\n";
  for (const auto& fr : report.per_fold)
    append_metric_row(out, to_string(fr.model), std::to_string(fr.fold), fr.n_test, fr.metrics);
  int total_test = 0;
  for (const auto& fr : report.per_fold)
    if (fr.model == ModelKind::gwn) total_test += fr.n_test;
  append_metric_row(out, "gwn", "pooled", total_test, report.pooled_gwn);
  append_metric_row(out, "concatn", "pooled", total_test, report.pooled_concatn);
  return out;
}

namespace {

nlohmann::json metrics_json(const Metrics& m) {
  return {{"acc", m.acc}, {"mcc", m.mcc},           {"mcc_degenerate", m.mcc_degenerate},
          {"f1", m.f1},   {"f1_avg", m.f1_avg}};
}

nlohmann::json wilcoxon_json(const WilcoxonResult& w) {
  return {{"w", w.w}, {"w_pos", w.w_pos},   {"p", w.p},
          {"z", w.z}, {"r", w.r},           {"n", w.n},
          {"exact", w.exact},               {"degenerate", w.degenerate}};
}

}  // namespace

std::string comparison_summary_json(const ComparisonReport& report) {
  nlohmann::json j;
  j["plan"] = to_string(report.plan.kind);
  j["folds"] = report.plan.folds.size();
  j["gwn"] = metrics_json(report.pooled_gwn);
  j["concatn"] = metrics_json(report.pooled_concatn);
  j["wilcoxon_acc"] = wilcoxon_json(report.wilcoxon_acc);
  j["wilcoxon_f1_avg"] = wilcoxon_json(report.wilcoxon_f1);
  return j.dump(2) + "\n";
}

}  // namespace gwn
