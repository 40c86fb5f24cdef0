#include <doctest.h>

#include <cmath>

#include "gwn/analysis.hpp"
#include "gwn/rng.hpp"
#include "test_util.hpp"

using namespace gwn;

namespace {

AttentionTrace trace_from_scores(std::vector<std::vector<Tensor>> scores, std::vector<std::uint8_t> valid) {
  AttentionTrace trace;
  trace.instance_id = "t";
  trace.heads = scores.empty() ? 0 : static_cast<int>(scores[0].size());
  trace.scores = std::move(scores);
  trace.valid = std::move(valid);
  return trace;
}

// a two-modality score matrix with the given self weights
Tensor m2_scores(double self0, double self1) {
  return Tensor::matrix({{self0, 1.0 - self0}, {1.0 - self1, self1}});
}

SelfAttentionSeries series_with_pattern(const std::vector<int>& favors) {
  SelfAttentionSeries s;
  s.instance_id = "x";
  for (int f : favors) {
    s.favors_self.push_back(f ? 1 : 0);
    s.self_weight.push_back(f ? 0.9 : 0.1);
  }
  return s;
}

// alternating runs of (favours-self flag, length)
SelfAttentionSeries series_from_runs(const std::vector<std::pair<int, int>>& runs) {
  std::vector<int> favors;
  for (const auto& [flag, len] : runs)
    for (int i = 0; i < len; ++i) favors.push_back(flag);
  return series_with_pattern(favors);
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("series extraction reads the diagonal and the favoured target") {
  AttentionTrace trace = trace_from_scores(
      {{m2_scores(0.9, 0.7)}}, {1});
  auto series = self_attention_series(trace);
  REQUIRE(series.size() == 2);  // one head, two modalities
  CHECK(series[0].self_weight == std::vector<double>{0.9});
  CHECK(series[0].favors_self == std::vector<std::uint8_t>{1});
  CHECK(series[1].self_weight == std::vector<double>{0.7});
  CHECK(series[1].favors_self == std::vector<std::uint8_t>{1});
}

TEST_CASE("uniform scores favour the other modality (strict dominance)") {
  AttentionTrace trace = trace_from_scores({{m2_scores(0.5, 0.5)}}, {1});
  auto series = self_attention_series(trace);
  CHECK(series[0].favors_self == std::vector<std::uint8_t>{0});
  CHECK(series[1].favors_self == std::vector<std::uint8_t>{0});
}

TEST_CASE("padded timesteps are excluded from the series") {
  AttentionTrace trace = trace_from_scores(
      {{m2_scores(0.1, 0.1)}, {m2_scores(0.9, 0.9)}, {m2_scores(0.8, 0.8)}}, {0, 1, 1});
  auto series = self_attention_series(trace);
  CHECK(series[0].self_weight == std::vector<double>{0.9, 0.8});

  AttentionTrace empty = trace_from_scores({{m2_scores(0.9, 0.9)}}, {0});
  CHECK_THROWS_AS(self_attention_series(empty), std::invalid_argument);
}

TEST_CASE("switch counting") {
  CHECK(count_switches(series_with_pattern({1, 1, 0, 1})) == 2);
  CHECK(count_switches(series_with_pattern({1, 1, 1})) == 0);
  CHECK(count_switches(series_with_pattern({0})) == 0);
  CHECK_THROWS_AS(count_switches(SelfAttentionSeries{}), std::invalid_argument);
}

TEST_CASE("pattern classification boundaries") {
  // s = 1, no switches
  CHECK(classify_pattern(series_with_pattern({1, 1, 1, 1})) == Pattern::FIA);
  // s = 0
  CHECK(classify_pattern(series_with_pattern({0, 0, 0})) == Pattern::FOA);
  // the reference case: s = 0.9854 with 6 switches is FOS
  SelfAttentionSeries ref = series_from_runs(
      {{1, 2463}, {0, 48}, {1, 2464}, {0, 49}, {1, 2463}, {0, 49}, {1, 2464}});
  CHECK(ref.self_fraction() == doctest::Approx(0.9854).epsilon(1e-12));
  CHECK(count_switches(ref) == 6);
  CHECK(classify_pattern(ref) == Pattern::FOS);
  // balanced band is closed at 0.4 and 0.6
  CHECK(classify_pattern(series_with_pattern({1, 0, 1, 0, 1, 0, 1, 0, 1, 0})) == Pattern::FIOB);  // s = 0.5
  CHECK(classify_pattern(series_with_pattern({1, 1, 0, 0, 0})) == Pattern::FIOB);                 // s = 0.4
  CHECK(classify_pattern(series_with_pattern({1, 1, 1, 0, 0})) == Pattern::FIOB);                 // s = 0.6
  // just outside the band
  CHECK(classify_pattern(series_with_pattern({1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0})) == Pattern::FIS);   // ~0.36
  CHECK(classify_pattern(series_with_pattern({1, 1, 1, 1, 1, 1, 1, 0, 0, 0})) == Pattern::FOS);      // 0.7
}

TEST_CASE("classification depends only on the favoured fraction") {
  for (int scale : {1, 3, 10}) {
    std::vector<int> favors;
    for (int i = 0; i < 2 * scale; ++i) favors.push_back(1);
    for (int i = 0; i < 8 * scale; ++i) favors.push_back(0);
    CHECK(classify_pattern(series_with_pattern(favors)) == Pattern::FIS);  // s = 0.2 at every length
  }
}

TEST_CASE("random traces satisfy the structural pattern properties") {
  Rng rng(91);
  for (int trial = 0; trial < 200; ++trial) {
    const int steps = 1 + rng.below(12);
    std::vector<int> favors;
    for (int t = 0; t < steps; ++t) favors.push_back(rng.below(2));
    SelfAttentionSeries s = series_with_pattern(favors);
    const Pattern label = classify_pattern(s);
    const int switches = count_switches(s);
    CHECK(switches <= steps - 1);
    if (label == Pattern::FIA || label == Pattern::FOA) CHECK(switches == 0);
    // for M = 2 the favoured flag is reconstructible from the diagonal
    for (std::size_t t = 0; t < s.self_weight.size(); ++t)
      CHECK((s.self_weight[t] > 0.5) == (s.favors_self[t] == 1));
  }
}

TEST_CASE("pattern table frequencies are normalised per modality") {
  // single trace, single head: modality 0 always favours itself -> pure FIA
  AttentionTrace trace = trace_from_scores(
      {{m2_scores(0.9, 0.2)}, {m2_scores(0.8, 0.3)}}, {1, 1});
  auto rows = pattern_table(std::vector<AttentionTrace>{trace});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].modality == 0);
  CHECK(rows[0].freq == std::array<double, 5>{1.0, 0.0, 0.0, 0.0, 0.0});
  CHECK(rows[1].freq == std::array<double, 5>{0.0, 0.0, 0.0, 0.0, 1.0});
  CHECK(rows[0].switch_mean == 0.0);

  Rng rng(93);
  std::vector<AttentionTrace> traces;
  for (int i = 0; i < 6; ++i) {
    std::vector<std::vector<Tensor>> scores;
    std::vector<std::uint8_t> valid;
    const int steps = 2 + rng.below(6);
    for (int t = 0; t < steps; ++t) {
      scores.push_back({m2_scores(rng.uniform(), rng.uniform()), m2_scores(rng.uniform(), rng.uniform())});
      valid.push_back(1);
    }
    AttentionTrace tr = trace_from_scores(std::move(scores), std::move(valid));
    tr.instance_id = "r" + std::to_string(i);
    traces.push_back(std::move(tr));
  }
  auto table = pattern_table(traces);
  for (const auto& row : table) {
    double sum = 0.0;
    for (double f : row.freq) sum += f;
    CHECK(std::abs(sum - 1.0) < 1e-9);
    CHECK(row.pairs == 12);  // 6 instances x 2 heads
  }

  CHECK_THROWS_AS(pattern_table(std::vector<AttentionTrace>{}), std::invalid_argument);
}

TEST_CASE("patterns CSV lists one row per instance, head and modality") {
  AttentionTrace trace = trace_from_scores({{m2_scores(0.9, 0.2), m2_scores(0.4, 0.6)}}, {1});
  trace.instance_id = "abc";
  std::string csv = patterns_to_csv(std::vector<AttentionTrace>{trace});
  CHECK(csv.find("instance_id,head,modality,s,switches,label") == 0);
  CHECK(csv.find("abc,0,0,1,0,FIA") != std::string::npos);
  CHECK(csv.find("abc,1,1,1,0,FIA") != std::string::npos);
  CHECK(csv.find("abc,0,1,0,0,FOA") != std::string::npos);
}

TEST_CASE("noise experiment emits every condition for every seed") {
  SynthConfig synth;
  synth.subjects = 4;
  synth.instances_per_subject = 3;
  synth.classes = 2;
  synth.t_min = 6;
  synth.t_max = 6;
  synth.dims = {6, 3};
  synth.seed = 13;
  Dataset ds = pre_pad(synth_generate(synth));

  NoiseExperimentConfig cfg;
  cfg.seeds = {1, 2};
  cfg.plan = PlanKind::five_by_two;
  cfg.dims = ModelDims::for_dataset(ds.info);
  cfg.dims.common = 4;
  cfg.dims.enc_hidden = 4;
  cfg.dims.heads = 2;
  cfg.dims.state = 4;
  cfg.dims.ffn = 4;
  cfg.dims.head_hidden = 4;
  cfg.train.epochs = 1;
  cfg.train.batch = 8;
  cfg.pretrain = false;
  cfg.workers = 2;

  NoiseExperimentResult result = noise_experiment(ds, cfg);
  REQUIRE(result.runs.size() == 6);  // {none, in_m0, in_m1} x {1, 2}
  CHECK(result.runs[0].condition == "none");
  CHECK(result.runs[0].sigma == 0.0);
  CHECK(result.runs[2].condition == "in_m0");
  CHECK(result.runs[2].sigma > 0.0);
  for (const auto& run : result.runs) CHECK(run.patterns.size() == 2);

  std::string report = noise_report_to_csv(result, 2);
  CHECK(report.find("condition,seed,acc,mcc,f1_0,f1_1,f1_avg") == 0);
  CHECK(report.find("none,1,") != std::string::npos);
  CHECK(report.find("in_m1,2,") != std::string::npos);
  CHECK(report.find("none,mean,") != std::string::npos);
  CHECK(report.find("in_m0,mean,") != std::string::npos);

  std::string deltas = fia_delta_csv(result);
  CHECK(deltas.find("condition,seed,modality,fia,fia_none,fia_delta") == 0);
  CHECK(deltas.find("in_m0,1,m0,") != std::string::npos);
  CHECK(deltas.find("in_m1,2,m1,") != std::string::npos);

  std::string summary = pattern_summary_to_csv(result.runs[0].patterns, "none");
  CHECK(summary.find("none,m0,") == 0);
}

}  // TEST_SUITE
