#include "gwn/analysis.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "gwn/io.hpp"
#include "gwn/rng.hpp"

namespace gwn {

std::string to_string(Pattern p) {
  switch (p) {
    case Pattern::FIA: return "FIA";
    case Pattern::FOS: return "FOS";
    case Pattern::FIOB: return "FIOB";
    case Pattern::FIS: return "FIS";
    case Pattern::FOA: return "FOA";
  }
  throw std::logic_error("bad pattern");
}

double SelfAttentionSeries::self_fraction() const {
  if (favors_self.empty()) return 0.0;
  std::size_t n = 0;
  for (auto f : favors_self) n += f;
  return static_cast<double>(n) / static_cast<double>(favors_self.size());
}

std::vector<SelfAttentionSeries> self_attention_series(const AttentionTrace& trace) {
  int valid_steps = 0;
  for (auto v : trace.valid) valid_steps += v;
  if (valid_steps == 0) throw std::invalid_argument("self_attention_series: trace has no valid timesteps");
  const int heads = trace.heads;
  const int modalities = trace.scores.empty() || trace.scores[0].empty() ? 0 : trace.scores[0][0].rows();

  std::vector<SelfAttentionSeries> out;
  for (int k = 0; k < heads; ++k)
    for (int m = 0; m < modalities; ++m) {
      SelfAttentionSeries series;
      series.instance_id = trace.instance_id;
      series.head = k;
      series.modality = m;
      for (std::size_t t = 0; t < trace.scores.size(); ++t) {
        if (!trace.valid[t]) continue;
        const Tensor& s = trace.scores[t][static_cast<std::size_t>(k)];
        const double self = s.at(m, m);
        bool dominant = true;
        for (int j = 0; j < s.cols(); ++j)
          if (j != m && s.at(m, j) >= self) {
            dominant = false;  // exact ties favour "other"
            break;
          }
        series.self_weight.push_back(self);
        series.favors_self.push_back(dominant ? 1 : 0);
      }
      out.push_back(std::move(series));
    }
  return out;
}

int count_switches(const SelfAttentionSeries& series) {
  if (series.favors_self.empty()) throw std::invalid_argument("count_switches: empty series");
  int switches = 0;
  for (std::size_t t = 1; t < series.favors_self.size(); ++t)
    if (series.favors_self[t] != series.favors_self[t - 1]) ++switches;
  return switches;
}

Pattern classify_pattern(const SelfAttentionSeries& series) {
  if (series.favors_self.empty()) throw std::invalid_argument("classify_pattern: empty series");
  std::size_t self_steps = 0;
  for (auto f : series.favors_self) self_steps += f;
  const std::size_t n = series.favors_self.size();
  if (self_steps == n) return Pattern::FIA;
  if (self_steps == 0) return Pattern::FOA;
  const double s = static_cast<double>(self_steps) / static_cast<double>(n);
  if (s > 0.6) return Pattern::FOS;
  if (s >= 0.4) return Pattern::FIOB;
  return Pattern::FIS;
}

std::vector<PatternRow> pattern_table(std::span<const AttentionTrace> traces) {
  if (traces.empty()) throw std::invalid_argument("pattern_table: no traces");
  std::map<int, PatternRow> rows;
  std::map<int, std::vector<int>> switch_counts;
  for (const auto& trace : traces) {
    for (const auto& series : self_attention_series(trace)) {
      PatternRow& row = rows[series.modality];
      row.modality = series.modality;
      row.freq[static_cast<std::size_t>(classify_pattern(series))] += 1.0;
      switch_counts[series.modality].push_back(count_switches(series));
      ++row.pairs;
    }
  }
  std::vector<PatternRow> out;
  for (auto& [modality, row] : rows) {
    for (double& f : row.freq) f /= row.pairs;
    const auto& counts = switch_counts[modality];
    double mean = 0.0;
    for (int c : counts) mean += c;
    mean /= static_cast<double>(counts.size());
    double var = 0.0;
    for (int c : counts) var += (c - mean) * (c - mean);
    var /= static_cast<double>(counts.size());
    row.switch_mean = mean;
    row.switch_std = std::sqrt(var);
    out.push_back(row);
  }
  return out;
}

std::string patterns_to_csv(std::span<const AttentionTrace> traces) {
  std::string out = "instance_id,head,modality,s,switches,label\n";
  for (const auto& trace : traces)
    for (const auto& series : self_attention_series(trace)) {
      out += series.instance_id + ',' + std::to_string(series.head) + ',' + std::to_string(series.modality) + ',' +
             format_double(series.self_fraction()) + ',' + std::to_string(count_switches(series)) + ',' +
             to_string(classify_pattern(series)) + '\n';
    }
  return out;
}

std::string pattern_summary_to_csv(std::span<const PatternRow> rows, const std::string& condition) {
  std::string out;
  for (const auto& row : rows) {
    out += condition + ",m" + std::to_string(row.modality);
    for (double f : row.freq) out += ',' + format_double(f);
    out += ',' + format_double(row.switch_mean) + ',' + format_double(row.switch_std) + '\n';
  }
  return out;
}

NoiseExperimentResult noise_experiment(const Dataset& ds, const NoiseExperimentConfig& cfg) {
  std::vector<NoiseCondition> conditions = cfg.conditions;
  if (conditions.empty()) {
    conditions.push_back({-1});
    for (int m = 0; m < static_cast<int>(ds.info.modalities.size()); ++m) conditions.push_back({m});
  }
  for (const auto& cond : conditions)
    if (cond.modality >= static_cast<int>(ds.info.modalities.size()))
      throw std::invalid_argument("noise_experiment: no modality " + std::to_string(cond.modality));

  NoiseExperimentResult result;
  for (const auto& cond : conditions) {
    for (std::uint64_t seed : cfg.seeds) {
      Dataset working = ds;
      double sigma = 0.0;
      if (cond.modality >= 0) {
        NoiseResult noised = inject_noise(ds, cond.modality, cfg.fraction, seed);
        working = std::move(noised.data);
        sigma = noised.sigma;
      }
      CvPlan plan = make_plan(cfg.plan, working, seed);

      CompareOptions opts;
      opts.dims = cfg.dims;
      opts.train = cfg.train;
      opts.train.seed = splitmix64(cfg.train.seed ^ seed);
      opts.rotate_train = cfg.rotate_train;
      opts.oversample_train = cfg.oversample_train;
      opts.pretrain = cfg.pretrain;
      opts.pretrain_cfg = cfg.pretrain_cfg;
      opts.workers = cfg.workers;
      opts.collect_traces = true;

      ComparisonReport report = run_comparison(working, plan, opts);

      NoiseRun run;
      run.condition = cond.name();
      run.seed = seed;
      run.sigma = sigma;
      run.metrics = report.pooled_gwn;
      run.patterns = pattern_table(report.gwn_traces);
      result.runs.push_back(std::move(run));
    }
  }
  return result;
}

std::string noise_report_to_csv(const NoiseExperimentResult& result, int labels) {
  std::string out = "condition,seed,acc,mcc";
  for (int c = 0; c < labels; ++c) out += ",f1_" + std::to_string(c);
  out += ",f1_avg\n";
  auto row = [&](const std::string& condition, const std::string& seed, const Metrics& m) {
    out += condition + ',' + seed + ',' + format_double(m.acc) + ',' + format_double(m.mcc);
    for (double f1 : m.f1) out += ',' + format_double(f1);
    out += ',' + format_double(m.f1_avg) + '\n';
  };
  std::vector<std::string> cond_order;
  std::map<std::string, std::vector<const NoiseRun*>> by_cond;
  for (const auto& run : result.runs) {
    if (!by_cond.count(run.condition)) cond_order.push_back(run.condition);
    by_cond[run.condition].push_back(&run);
    row(run.condition, std::to_string(run.seed), run.metrics);
  }
  for (const auto& cond : cond_order) {
    const auto& runs = by_cond[cond];
    Metrics mean;
    mean.f1.assign(static_cast<std::size_t>(labels), 0.0);
    for (const NoiseRun* run : runs) {
      mean.acc += run->metrics.acc;
      mean.mcc += run->metrics.mcc;
      mean.f1_avg += run->metrics.f1_avg;
      for (std::size_t c = 0; c < mean.f1.size(); ++c) mean.f1[c] += run->metrics.f1[c];
    }
    const double inv = 1.0 / static_cast<double>(runs.size());
    mean.acc *= inv;
    mean.mcc *= inv;
    mean.f1_avg *= inv;
    for (double& f : mean.f1) f *= inv;
    row(cond, "mean", mean);
  }
  return out;
}

std::string fia_delta_csv(const NoiseExperimentResult& result) {
  // FIA frequency per modality, keyed by (condition, seed)
  std::map<std::pair<std::string, std::uint64_t>, std::map<int, double>> fia;
  for (const auto& run : result.runs)
    for (const auto& row : run.patterns) fia[{run.condition, run.seed}][row.modality] = row.freq[0];

  std::string out = "condition,seed,modality,fia,fia_none,fia_delta\n";
  for (const auto& run : result.runs) {
    if (run.condition == "none") continue;
    auto base = fia.find({"none", run.seed});
    for (const auto& row : run.patterns) {
      const double fia_cond = row.freq[0];
      double fia_none = std::numeric_limits<double>::quiet_NaN();
      if (base != fia.end() && base->second.count(row.modality)) fia_none = base->second.at(row.modality);
      out += run.condition + ',' + std::to_string(run.seed) + ",m" + std::to_string(row.modality) + ',' +
             format_double(fia_cond) + ',' + format_double(fia_none) + ',' + format_double(fia_cond - fia_none) +
             '\n';
    }
  }
  return out;
}

}  // namespace gwn
