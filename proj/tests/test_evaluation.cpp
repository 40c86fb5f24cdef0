#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "gwn/evaluation.hpp"
#include "gwn/rng.hpp"
#include "test_util.hpp"

using namespace gwn;

namespace {

// Test-side oracle: per-class tally straight from the label vectors, no
// confusion matrix involved.
struct BruteMetrics {
  double acc;
  std::vector<double> f1;
  double f1_avg;
};

BruteMetrics brute_force_metrics(const std::vector<int>& truth, const std::vector<int>& pred, int labels) {
  BruteMetrics out{0.0, {}, 0.0};
  int correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] == pred[i]) ++correct;
  out.acc = static_cast<double>(correct) / static_cast<double>(truth.size());
  for (int k = 0; k < labels; ++k) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == k && truth[i] == k) ++tp;
      if (pred[i] == k && truth[i] != k) ++fp;
      if (pred[i] != k && truth[i] == k) ++fn;
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    out.f1.push_back(f1);
    out.f1_avg += f1;
  }
  out.f1_avg /= labels;
  return out;
}

// Test-side oracle: exact two-sided p by direct enumeration, written
// independently of the library routine.
double enumerate_exact_p(const std::vector<double>& diffs) {
  const int n = static_cast<int>(diffs.size());
  std::vector<double> mags;
  for (double d : diffs) mags.push_back(std::abs(d));
  std::vector<double> sorted = mags;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> ranks(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double lo = 0, eq = 0;
    for (double s : sorted) {
      if (s < mags[static_cast<std::size_t>(i)]) ++lo;
      if (s == mags[static_cast<std::size_t>(i)]) ++eq;
    }
    ranks[static_cast<std::size_t>(i)] = lo + (eq + 1.0) / 2.0;
  }
  double w_obs = 0.0;
  for (int i = 0; i < n; ++i)
    if (diffs[static_cast<std::size_t>(i)] > 0) w_obs += ranks[static_cast<std::size_t>(i)];

  std::uint64_t le = 0, ge = 0;
  const std::uint64_t total = 1ULL << n;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (int i = 0; i < n; ++i)
      if (mask & (1ULL << i)) w += ranks[static_cast<std::size_t>(i)];
    if (w <= w_obs) ++le;
    if (w >= w_obs) ++ge;
  }
  return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total));
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("confusion tabulation") {
  ConfusionMatrix cm = confusion(std::vector<int>{0, 1}, std::vector<int>{0, 1}, 2);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.at(0, 1) == 0);

  ConfusionMatrix wrong = confusion(std::vector<int>{0, 0}, std::vector<int>{1, 1}, 2);
  CHECK(wrong.at(0, 1) == 2);
  CHECK(wrong.total() == 2);

  CHECK_THROWS_AS(confusion(std::vector<int>{0}, std::vector<int>{0, 1}, 2), std::invalid_argument);
  CHECK_THROWS_AS(confusion(std::vector<int>{0, 2}, std::vector<int>{0, 0}, 2), std::invalid_argument);
}

TEST_CASE("metrics worked examples") {
  {  // perfect diagonal
    ConfusionMatrix cm(3);
    cm.at(0, 0) = 4;
    cm.at(1, 1) = 2;
    cm.at(2, 2) = 5;
    Metrics m = metrics(cm);
    CHECK(m.acc == 1.0);
    CHECK(m.mcc == doctest::Approx(1.0).epsilon(1e-12));
    for (double f1 : m.f1) CHECK(f1 == doctest::Approx(1.0).epsilon(1e-12));
  }
  {  // binary: TP=2 TN=1 FP=1 FN=0, positive class = 1
    ConfusionMatrix cm(2);
    cm.at(0, 0) = 1;  // TN
    cm.at(0, 1) = 1;  // FP
    cm.at(1, 0) = 0;  // FN
    cm.at(1, 1) = 2;  // TP
    Metrics m = metrics(cm);
    CHECK(m.mcc == doctest::Approx(2.0 / std::sqrt(12.0)).epsilon(1e-12));
    CHECK_FALSE(m.mcc_degenerate);
  }
  {  // everything predicted as one class on balanced truth
    ConfusionMatrix cm(2);
    cm.at(0, 0) = 3;
    cm.at(1, 0) = 3;
    Metrics m = metrics(cm);
    CHECK(m.mcc == 0.0);
    CHECK(m.mcc_degenerate);
  }
}

TEST_CASE("multiclass MCC reduces to the binary closed form") {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    ConfusionMatrix cm(2);
    std::int64_t tn = rng.below(20), fp = rng.below(20), fn = rng.below(20), tp = rng.below(20);
    if (tn + fp + fn + tp == 0) tp = 1;
    cm.at(0, 0) = tn;
    cm.at(0, 1) = fp;
    cm.at(1, 0) = fn;
    cm.at(1, 1) = tp;
    Metrics m = metrics(cm);
    const double denom = std::sqrt(static_cast<double>(tp + fp)) * std::sqrt(static_cast<double>(tp + fn)) *
                         std::sqrt(static_cast<double>(tn + fp)) * std::sqrt(static_cast<double>(tn + fn));
    if (denom == 0.0) {
      CHECK(m.mcc_degenerate);
      CHECK(m.mcc == 0.0);
    } else {
      const double closed = (static_cast<double>(tp) * tn - static_cast<double>(fp) * fn) / denom;
      CHECK(std::abs(m.mcc - closed) < 1e-12);
    }
  }
}

TEST_CASE("metrics agree with the brute-force label-level oracle") {
  Rng rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const int labels = 2 + rng.below(4);
    const int n = 5 + rng.below(60);
    std::vector<int> truth, pred;
    for (int i = 0; i < n; ++i) {
      truth.push_back(rng.below(labels));
      pred.push_back(rng.below(labels));
    }
    Metrics m = metrics(confusion(truth, pred, labels));
    BruteMetrics oracle = brute_force_metrics(truth, pred, labels);
    CHECK(m.acc == oracle.acc);
    REQUIRE(m.f1.size() == oracle.f1.size());
    for (std::size_t k = 0; k < oracle.f1.size(); ++k) CHECK(m.f1[k] == oracle.f1[k]);
    CHECK(m.f1_avg == oracle.f1_avg);
  }
}

TEST_CASE("LOSOCV folds partition subjects") {
  Dataset ds = gwn::test::tiny_dataset({6, 6}, {2}, 3, 3, 47, /*subjects=*/3);
  CvPlan plan = losocv_plan(ds);
  CHECK(plan.folds.size() == 3);

  Dataset big = gwn::test::tiny_dataset({110, 88}, {2}, 3, 3, 53, /*subjects=*/22);
  CvPlan plan22 = losocv_plan(big);
  CHECK(plan22.folds.size() == 22);

  std::map<std::string, std::string> subject_of;
  for (const auto& inst : big.instances) subject_of[inst.id] = inst.subject;
  std::set<std::string> tested_subjects;
  for (const auto& fold : plan22.folds) {
    std::set<std::string> train_subjects, test_subjects;
    for (const auto& id : fold.train_ids) train_subjects.insert(subject_of[id]);
    for (const auto& id : fold.test_ids) test_subjects.insert(subject_of[id]);
    REQUIRE(test_subjects.size() == 1);
    CHECK(train_subjects.count(*test_subjects.begin()) == 0);  // no leakage
    CHECK(tested_subjects.insert(*test_subjects.begin()).second);
    CHECK(fold.train_ids.size() + fold.test_ids.size() == big.instances.size());
  }
  CHECK(tested_subjects.size() == 22);

  Dataset lone = gwn::test::tiny_dataset({2}, {2}, 3, 3, 59, /*subjects=*/1);
  CHECK_THROWS_AS(losocv_plan(lone), std::invalid_argument);
}

TEST_CASE("5x2 plan structure") {
  Dataset ds = gwn::test::tiny_dataset({12, 12}, {2}, 3, 3, 61, /*subjects=*/8);
  CvPlan plan = five_by_two_plan(ds, 77);
  REQUIRE(plan.folds.size() == 10);
  for (int rep = 0; rep < 5; ++rep) {
    const CvFold& a = plan.folds[static_cast<std::size_t>(2 * rep)];
    const CvFold& b = plan.folds[static_cast<std::size_t>(2 * rep + 1)];
    CHECK(a.train_ids == b.test_ids);  // the two directions of one split
    CHECK(a.test_ids == b.train_ids);
    std::set<std::string> train(a.train_ids.begin(), a.train_ids.end());
    for (const auto& id : a.test_ids) CHECK(train.count(id) == 0);
  }

  CvPlan again = five_by_two_plan(ds, 77);
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    CHECK(plan.folds[f].train_ids == again.folds[f].train_ids);
    CHECK(plan.folds[f].test_ids == again.folds[f].test_ids);
  }

  CvPlan different = five_by_two_plan(ds, 78);
  bool any_difference = false;
  for (std::size_t f = 0; f < plan.folds.size(); ++f)
    if (plan.folds[f].train_ids != different.folds[f].train_ids) any_difference = true;
  CHECK(any_difference);
}

TEST_CASE("wilcoxon worked example: five positive differences") {
  std::vector<double> b = {0, 0, 0, 0, 0};
  std::vector<double> a = {1, 2, 3, 4, 5};
  WilcoxonResult res = wilcoxon_signed_rank(a, b);
  CHECK(res.n == 5);
  CHECK(res.w == 0.0);
  CHECK(res.w_pos == 15.0);
  CHECK(res.p == 0.0625);  // 2/32 by enumeration
  CHECK(res.exact);
  CHECK(res.z > 0.0);
  CHECK(res.r == doctest::Approx(res.z / std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("wilcoxon degenerate and symmetry cases") {
  std::vector<double> a = {1, 2, 3};
  WilcoxonResult same = wilcoxon_signed_rank(a, a);
  CHECK(same.degenerate);
  CHECK(same.p == 1.0);
  CHECK(same.n == 0);

  std::vector<double> b = {3, 0.5, 2.5};
  WilcoxonResult ab = wilcoxon_signed_rank(a, b);
  WilcoxonResult ba = wilcoxon_signed_rank(b, a);
  CHECK(ab.p == ba.p);
  CHECK(ab.z == doctest::Approx(-ba.z).epsilon(1e-12));

  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
                  std::invalid_argument);
}

TEST_CASE("wilcoxon exact p matches full enumeration for n <= 10") {
  Rng rng(67);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + rng.below(9);  // 2..10
    std::vector<double> a, b, diffs;
    for (int i = 0; i < n; ++i) {
      // small integer scores produce plenty of magnitude ties, and integer
      // arithmetic keeps a - b exact so the ties survive subtraction
      double d = static_cast<double>(rng.below(7)) - 3.0;
      if (d == 0.0) d = 1.0;
      diffs.push_back(d);
      b.push_back(static_cast<double>(rng.below(10)));
      a.push_back(b.back() + d);
    }
    WilcoxonResult res = wilcoxon_signed_rank(a, b);
    REQUIRE(res.exact);
    CHECK(res.p == doctest::Approx(enumerate_exact_p(diffs)).epsilon(1e-12));
  }
}

TEST_CASE("normal approximation tracks the exact p for moderate n") {
  Rng rng(71);
  for (int n : {12, 14, 16}) {
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
      std::set<double> used;
      for (int i = 0; i < n; ++i) {
        double d;
        do {
          d = rng.uniform(-1.0, 1.0);
        } while (d == 0.0 || used.count(std::abs(d)));  // tie-free magnitudes
        used.insert(std::abs(d));
        b[static_cast<std::size_t>(i)] = rng.uniform();
        a[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(i)] + d;
      }
      WilcoxonResult res = wilcoxon_signed_rank(a, b);
      REQUIRE(res.exact);
      const double approx = std::min(1.0, std::erfc(std::abs(res.z) / std::sqrt(2.0)));
      CHECK(std::abs(res.p - approx) < 0.02);
    }
  }
}

TEST_CASE("comparison pipeline produces the full report shape") {
  SynthConfig cfg;
  cfg.subjects = 4;
  cfg.instances_per_subject = 4;
  cfg.classes = 2;
  cfg.t_min = 6;
  cfg.t_max = 8;
  cfg.dims = {6, 3};
  cfg.seed = 5;
  Dataset ds = pre_pad(synth_generate(cfg));

  CompareOptions opts;
  opts.dims = ModelDims::for_dataset(ds.info);
  opts.dims.common = 4;
  opts.dims.enc_hidden = 4;
  opts.dims.heads = 2;
  opts.dims.state = 4;
  opts.dims.ffn = 4;
  opts.dims.head_hidden = 4;
  opts.train.epochs = 2;
  opts.train.batch = 8;
  opts.train.seed = 3;
  opts.pretrain = false;
  opts.rotate_train = true;
  opts.collect_traces = true;
  opts.workers = 2;

  CvPlan plan = five_by_two_plan(ds, 9);
  ComparisonReport report = run_comparison(ds, plan, opts);

  CHECK(report.per_fold.size() == 20);  // 10 folds x 2 models
  CHECK(report.pooled_gwn.f1.size() == 2);
  CHECK(report.wilcoxon_acc.n <= 10);
  CHECK(!report.gwn_traces.empty());

  std::string csv = comparison_to_csv(report);
  CHECK(csv.find("model,fold,n_test,acc,mcc,f1_0,f1_1,f1_avg") == 0);
  CHECK(csv.find("gwn,pooled") != std::string::npos);
  CHECK(csv.find("concatn,pooled") != std::string::npos);

  std::string json = comparison_summary_json(report);
  CHECK(json.find("wilcoxon_acc") != std::string::npos);
  CHECK(json.find("\"r\"") != std::string::npos);

  // determinism of the whole pipeline
  ComparisonReport rerun = run_comparison(ds, plan, opts);
  CHECK(comparison_to_csv(rerun) == csv);
}

TEST_CASE("a training fold missing a class is an error") {
  Dataset ds = gwn::test::tiny_dataset({2, 2}, {3, 2}, 4, 4, 73, /*subjects=*/2);
  // put every class-0 instance on one subject and class-1 on the other
  for (auto& inst : ds.instances) inst.subject = inst.label == 0 ? "s0" : "s1";
  CvPlan plan = losocv_plan(ds);
  CompareOptions opts;
  opts.dims = ModelDims::for_dataset(ds.info);
  opts.dims.common = 4;
  opts.dims.enc_hidden = 4;
  opts.dims.heads = 1;
  opts.dims.state = 4;
  opts.dims.ffn = 4;
  opts.dims.head_hidden = 4;
  opts.train.epochs = 1;
  opts.pretrain = false;
  opts.oversample_train = false;
  CHECK_THROWS_WITH_AS(run_comparison(ds, plan, opts), doctest::Contains("absent"), std::runtime_error);
}

}  // TEST_SUITE
