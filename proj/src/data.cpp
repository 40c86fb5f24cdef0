#include "gwn/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "gwn/io.hpp"
#include "gwn/rng.hpp"

namespace gwn {

namespace {

void validate_instance(const MultimodalInstance& inst, const DatasetInfo& info) {
  if (inst.subject.empty()) throw std::runtime_error("instance '" + inst.id + "': empty subject id");
  if (inst.label < 0 || inst.label >= info.classes)
    throw std::runtime_error("instance '" + inst.id + "': label " + std::to_string(inst.label) + " outside [0, " +
                             std::to_string(info.classes) + ")");
  if (inst.modalities.size() != info.modalities.size())
    throw std::runtime_error("instance '" + inst.id + "': has " + std::to_string(inst.modalities.size()) +
                             " modalities, manifest declares " + std::to_string(info.modalities.size()));
  const int t = inst.length();
  for (std::size_t m = 0; m < inst.modalities.size(); ++m) {
    const Tensor& mat = inst.modalities[m];
    if (mat.cols() != info.modalities[m].dim)
      throw std::runtime_error("instance '" + inst.id + "' modality '" + info.modalities[m].name + "': " +
                               std::to_string(mat.cols()) + " columns, expected " +
                               std::to_string(info.modalities[m].dim));
    if (mat.rows() != t)
      throw std::runtime_error("instance '" + inst.id + "': modalities disagree on sequence length");
  }
  if (inst.original_length <= 0 || inst.original_length > t)
    throw std::runtime_error("instance '" + inst.id + "': bad original_length " +
                             std::to_string(inst.original_length));
}

std::string instance_file(const std::string& id, const std::string& modality) {
  return id + "_" + modality + ".csv";
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("manifest parse error in " + manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "gwn-dataset")
    throw std::runtime_error(manifest_path.string() + ": not a dataset manifest");

  Dataset ds;
  for (const auto& m : manifest.at("modalities")) {
    ModalityInfo info;
    info.name = m.at("name").get<std::string>();
    info.dim = m.at("dim").get<int>();
    info.sampling_rate_hz = m.value("sampling_rate_hz", 0.0);
    info.positional = m.value("positional", false);
    if (info.dim <= 0) throw std::runtime_error("manifest: modality '" + info.name + "' has non-positive dim");
    ds.info.modalities.push_back(std::move(info));
  }
  if (ds.info.modalities.empty()) throw std::runtime_error("manifest: no modalities declared");
  ds.info.classes = manifest.at("classes").get<int>();
  ds.info.label_scheme = manifest.value("label_scheme", "");

  std::set<std::string> seen;
  for (const auto& item : manifest.at("instances")) {
    MultimodalInstance inst;
    inst.id = item.at("id").get<std::string>();
    if (!seen.insert(inst.id).second) throw std::runtime_error("manifest: duplicate instance id '" + inst.id + "'");
    inst.subject = item.at("subject").get<std::string>();
    inst.label = item.at("label").get<int>();
    for (const auto& mi : ds.info.modalities) {
      const auto path = dir / instance_file(inst.id, mi.name);
      if (!std::filesystem::exists(path))
        throw std::runtime_error("instance '" + inst.id + "': missing file " + path.string());
      auto rows = parse_csv(read_file(path), mi.dim, "instance '" + inst.id + "' modality '" + mi.name + "'");
      if (rows.empty()) throw std::runtime_error("instance '" + inst.id + "': empty modality file " + path.string());
      Tensor mat = Tensor::zeros({static_cast<int>(rows.size()), mi.dim});
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (int c = 0; c < mi.dim; ++c) mat.at(static_cast<int>(r), c) = rows[r][static_cast<std::size_t>(c)];
      inst.modalities.push_back(std::move(mat));
    }
    inst.original_length = item.value("original_length", inst.length());
    validate_instance(inst, ds.info);
    ds.instances.push_back(std::move(inst));
  }
  std::sort(ds.instances.begin(), ds.instances.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "gwn-dataset";
  manifest["version"] = 1;
  auto& mods = manifest["modalities"] = nlohmann::json::array();
  for (const auto& m : ds.info.modalities)
    mods.push_back({{"name", m.name},
                    {"dim", m.dim},
                    {"sampling_rate_hz", m.sampling_rate_hz},
                    {"positional", m.positional}});
  manifest["classes"] = ds.info.classes;
  manifest["label_scheme"] = ds.info.label_scheme;
  auto& list = manifest["instances"] = nlohmann::json::array();
  for (const auto& inst : ds.instances) {
    validate_instance(inst, ds.info);
    list.push_back({{"id", inst.id},
                    {"subject", inst.subject},
                    {"label", inst.label},
                    {"original_length", inst.original_length}});
    for (std::size_t m = 0; m < inst.modalities.size(); ++m) {
      const Tensor& mat = inst.modalities[m];
      std::vector<std::vector<double>> rows(static_cast<std::size_t>(mat.rows()));
      for (int r = 0; r < mat.rows(); ++r) {
        rows[static_cast<std::size_t>(r)].reserve(static_cast<std::size_t>(mat.cols()));
        for (int c = 0; c < mat.cols(); ++c) rows[static_cast<std::size_t>(r)].push_back(mat.at(r, c));
      }
      write_file_atomic(dir / instance_file(inst.id, ds.info.modalities[m].name), to_csv(rows));
    }
  }
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset downsample(const Dataset& ds, int factor) {
  if (factor <= 0) throw std::invalid_argument("downsample: factor must be >= 1, got " + std::to_string(factor));
  Dataset out;
  out.info = ds.info;
  for (const auto& inst : ds.instances) {
    const int t = inst.length();
    const int first_real = inst.pad_rows();
    // padded prefix shrinks by the same factor; real rows are strided from
    // the first non-padded row so the result is independent of padding
    const int pad_keep = (first_real + factor - 1) / factor;
    MultimodalInstance copy;
    copy.id = inst.id;
    copy.subject = inst.subject;
    copy.label = inst.label;
    std::vector<int> real_rows;
    for (int r = first_real; r < t; r += factor) real_rows.push_back(r);
    copy.original_length = static_cast<int>(real_rows.size());
    const int new_t = pad_keep + copy.original_length;
    for (const Tensor& mat : inst.modalities) {
      Tensor m2 = Tensor::zeros({new_t, mat.cols()});
      for (std::size_t k = 0; k < real_rows.size(); ++k)
        for (int c = 0; c < mat.cols(); ++c)
          m2.at(pad_keep + static_cast<int>(k), c) = mat.at(real_rows[k], c);
      copy.modalities.push_back(std::move(m2));
    }
    out.instances.push_back(std::move(copy));
  }
  return out;
}

Dataset pre_pad(const Dataset& ds, int t_target) {
  int target = t_target;
  if (target == 0)
    for (const auto& inst : ds.instances) target = std::max(target, inst.length());
  Dataset out;
  out.info = ds.info;
  for (const auto& inst : ds.instances) {
    const int t = inst.length();
    if (t > target)
      throw std::invalid_argument("pre_pad: instance '" + inst.id + "' has length " + std::to_string(t) +
                                  " > target " + std::to_string(target));
    MultimodalInstance copy;
    copy.id = inst.id;
    copy.subject = inst.subject;
    copy.label = inst.label;
    copy.original_length = inst.original_length;
    const int pad = target - t;
    for (const Tensor& mat : inst.modalities) {
      Tensor m2 = Tensor::zeros({target, mat.cols()});
      for (int r = 0; r < t; ++r)
        for (int c = 0; c < mat.cols(); ++c) m2.at(pad + r, c) = mat.at(r, c);
      copy.modalities.push_back(std::move(m2));
    }
    out.instances.push_back(std::move(copy));
  }
  return out;
}

Dataset oversample_minority(const Dataset& ds, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.instances.size(); ++i) by_class[ds.instances[i].label].push_back(i);
  for (int c = 0; c < ds.info.classes; ++c)
    if (!by_class.count(c))
      throw std::invalid_argument("oversample_minority: class " + std::to_string(c) + " has zero instances");
  std::size_t majority = 0;
  for (const auto& [c, idx] : by_class) majority = std::max(majority, idx.size());

  Dataset out = ds;
  Rng rng(seed);
  std::map<std::string, int> copy_counter;
  for (const auto& [c, idx] : by_class) {
    for (std::size_t need = majority - idx.size(); need > 0; --need) {
      const auto& src = ds.instances[idx[static_cast<std::size_t>(rng.below(static_cast<int>(idx.size())))]];
      MultimodalInstance copy = src;
      copy.id = src.id + "_os" + std::to_string(copy_counter[src.id]++);
      out.instances.push_back(std::move(copy));
    }
  }
  return out;
}

Dataset rotate_augment(const Dataset& ds) {
  for (const auto& m : ds.info.modalities)
    if (m.positional && m.dim % 3 != 0)
      throw std::invalid_argument("rotate_augment: positional modality '" + m.name + "' dim " +
                                  std::to_string(m.dim) + " is not divisible by 3");
  // exact right-angle cosines/sines so the 0-degree copy is bit-identical
  static constexpr int kCos[4] = {1, 0, -1, 0};
  static constexpr int kSin[4] = {0, 1, 0, -1};
  static const char* kTag[4] = {"", "_rot090", "_rot180", "_rot270"};

  Dataset out;
  out.info = ds.info;
  for (const auto& inst : ds.instances) {
    for (int a = 0; a < 4; ++a) {
      if (a == 0) {
        out.instances.push_back(inst);
        continue;
      }
      MultimodalInstance copy = inst;
      copy.id = inst.id + kTag[a];
      const double c = kCos[a], s = kSin[a];
      for (std::size_t m = 0; m < copy.modalities.size(); ++m) {
        if (!ds.info.modalities[m].positional) continue;
        Tensor& mat = copy.modalities[m];
        for (int r = 0; r < mat.rows(); ++r)
          for (int j = 0; j < mat.cols(); j += 3) {
            const double x = mat.at(r, j), z = mat.at(r, j + 2);
            mat.at(r, j) = x * c + z * s;
            mat.at(r, j + 2) = -x * s + z * c;
          }
      }
      out.instances.push_back(std::move(copy));
    }
  }
  return out;
}

double round_to_one_sig_fig(double x) {
  if (x == 0.0) return 0.0;
  const double mag = std::pow(10.0, std::floor(std::log10(std::abs(x))));
  return std::round(x / mag) * mag;
}

NoiseResult inject_noise(const Dataset& ds, int modality, double fraction, std::uint64_t seed) {
  if (modality < 0 || modality >= static_cast<int>(ds.info.modalities.size()))
    throw std::invalid_argument("inject_noise: no modality " + std::to_string(modality));
  // pooled mean/std over all non-padded entries of the target modality
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& inst : ds.instances) {
    const Tensor& mat = inst.modalities[static_cast<std::size_t>(modality)];
    for (int r = inst.pad_rows(); r < mat.rows(); ++r)
      for (int c = 0; c < mat.cols(); ++c) {
        sum += mat.at(r, c);
        ++count;
      }
  }
  if (count == 0) throw std::invalid_argument("inject_noise: modality has no non-padded data");
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (const auto& inst : ds.instances) {
    const Tensor& mat = inst.modalities[static_cast<std::size_t>(modality)];
    for (int r = inst.pad_rows(); r < mat.rows(); ++r)
      for (int c = 0; c < mat.cols(); ++c) {
        const double d = mat.at(r, c) - mean;
        ss += d * d;
      }
  }
  const double std_dev = std::sqrt(ss / static_cast<double>(count));
  if (std_dev == 0.0)
    throw std::invalid_argument("inject_noise: modality " + std::to_string(modality) + " has zero variance");

  NoiseResult result;
  result.pooled_std = std_dev;
  result.sigma = round_to_one_sig_fig(fraction * std_dev);
  result.data = ds;
  if (result.sigma == 0.0) return result;

  Rng rng = Rng(seed).fork(0x6e6f697365ULL);  // independent noise stream
  for (auto& inst : result.data.instances) {
    Tensor& mat = inst.modalities[static_cast<std::size_t>(modality)];
    for (int r = inst.pad_rows(); r < mat.rows(); ++r)
      for (int c = 0; c < mat.cols(); ++c) mat.at(r, c) += rng.normal(0.0, result.sigma);
  }
  return result;
}

Dataset synth_generate(const SynthConfig& cfg) {
  if (cfg.subjects < 1 || cfg.instances_per_subject < 1 || cfg.classes < 2)
    throw std::invalid_argument("synth_generate: need >=1 subject, >=1 instance, >=2 classes");
  if (cfg.t_min < 2 || cfg.t_max < cfg.t_min) throw std::invalid_argument("synth_generate: bad T range");
  for (int d : cfg.dims)
    if (d <= 0) throw std::invalid_argument("synth_generate: modality dims must be positive");
  if (cfg.segments < 1) throw std::invalid_argument("synth_generate: segments must be >= 1");

  const int num_modalities = static_cast<int>(cfg.dims.size());
  Dataset ds;
  for (int m = 0; m < num_modalities; ++m) {
    ModalityInfo info;
    info.name = "m" + std::to_string(m);
    info.dim = cfg.dims[static_cast<std::size_t>(m)];
    info.sampling_rate_hz = cfg.sampling_rate_hz;
    info.positional = (m == 0 && info.dim % 3 == 0);
    ds.info.modalities.push_back(std::move(info));
  }
  ds.info.classes = cfg.classes;
  ds.info.label_scheme = "synthetic";

  // mild class imbalance so the oversampling path is exercised
  std::vector<double> weights(static_cast<std::size_t>(cfg.classes));
  double wsum = 0.0;
  for (int c = 0; c < cfg.classes; ++c) {
    weights[static_cast<std::size_t>(c)] = 1.0 / (1.0 + 0.4 * c);
    wsum += weights[static_cast<std::size_t>(c)];
  }

  Rng root(cfg.seed);
  for (int s = 0; s < cfg.subjects; ++s) {
    const std::string subject = "s" + std::string(s < 10 ? "0" : "") + std::to_string(s);
    Rng subject_rng = root.fork(static_cast<std::uint64_t>(s) + 1);
    // constant per-subject offsets per feature
    std::vector<std::vector<double>> offsets;
    for (int m = 0; m < num_modalities; ++m) {
      std::vector<double> off(static_cast<std::size_t>(cfg.dims[static_cast<std::size_t>(m)]));
      for (double& v : off) v = subject_rng.normal(0.0, cfg.subject_shift);
      offsets.push_back(std::move(off));
    }

    for (int e = 0; e < cfg.instances_per_subject; ++e) {
      Rng rng = subject_rng.fork(static_cast<std::uint64_t>(e) + 1);
      MultimodalInstance inst;
      inst.id = subject + "_e" + std::string(e < 10 ? "0" : "") + std::to_string(e);
      inst.subject = subject;

      double pick = rng.uniform() * wsum;
      int label = cfg.classes - 1;
      for (int c = 0; c < cfg.classes; ++c) {
        pick -= weights[static_cast<std::size_t>(c)];
        if (pick < 0.0) {
          label = c;
          break;
        }
      }
      inst.label = label;

      const int t_len = cfg.t_min + rng.below(cfg.t_max - cfg.t_min + 1);
      inst.original_length = t_len;

      // class-specific low-band carrier; uninformative high band elsewhere
      const double class_freq = 0.08 * cfg.sampling_rate_hz * (1.0 + label);
      const double class_amp = cfg.signal_amp * (1.0 + 0.3 * label);

      for (int m = 0; m < num_modalities; ++m) {
        const int dim = cfg.dims[static_cast<std::size_t>(m)];
        Tensor mat = Tensor::zeros({t_len, dim});
        for (int r = 0; r < t_len; ++r)
          for (int c = 0; c < dim; ++c)
            mat.at(r, c) = offsets[static_cast<std::size_t>(m)][static_cast<std::size_t>(c)] +
                           rng.normal(0.0, cfg.noise_level);
        inst.modalities.push_back(std::move(mat));
      }

      for (int seg = 0; seg < cfg.segments; ++seg) {
        const int r0 = seg * t_len / cfg.segments;
        const int r1 = (seg + 1) * t_len / cfg.segments;
        const int carrier = seg % num_modalities;
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        std::vector<double> distractor_freq(static_cast<std::size_t>(num_modalities));
        std::vector<double> distractor_phase(static_cast<std::size_t>(num_modalities));
        for (int m = 0; m < num_modalities; ++m) {
          distractor_freq[static_cast<std::size_t>(m)] = rng.uniform(0.36, 0.46) * cfg.sampling_rate_hz;
          distractor_phase[static_cast<std::size_t>(m)] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
        for (int m = 0; m < num_modalities; ++m) {
          Tensor& mat = inst.modalities[static_cast<std::size_t>(m)];
          const int dim = mat.cols();
          const int stride = ds.info.modalities[static_cast<std::size_t>(m)].positional ? 3 : 1;
          for (int r = r0; r < r1; ++r) {
            const double t_sec = static_cast<double>(r) / cfg.sampling_rate_hz;
            double wave;
            if (m == carrier) {
              wave = class_amp * std::sin(2.0 * std::numbers::pi * class_freq * t_sec + phase);
            } else {
              wave = cfg.distractor_amp *
                     std::sin(2.0 * std::numbers::pi * distractor_freq[static_cast<std::size_t>(m)] * t_sec +
                              distractor_phase[static_cast<std::size_t>(m)]);
            }
            for (int c = 0; c < dim; c += stride) mat.at(r, c) += wave;
          }
        }
      }
      ds.instances.push_back(std::move(inst));
    }
  }
  std::sort(ds.instances.begin(), ds.instances.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return ds;
}

}  // namespace gwn
