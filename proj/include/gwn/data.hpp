#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gwn/tensor.hpp"

namespace gwn {

struct ModalityInfo {
  std::string name;
  int dim = 0;
  double sampling_rate_hz = 0.0;
  bool positional = false;  // features are consecutive (x, y, z) triplets
};

struct DatasetInfo {
  std::vector<ModalityInfo> modalities;
  int classes = 2;
  std::string label_scheme;  // free-form tag, e.g. "pain_level"
};

/// One exercise instance: per-modality T x d_m matrices sharing T, a subject,
/// and a class label. `original_length` survives pre-padding: the last
/// `original_length` rows are real data, anything before is padding.
struct MultimodalInstance {
  std::string id;
  std::string subject;
  int label = 0;
  int original_length = 0;
  std::vector<Tensor> modalities;

  int length() const { return modalities.empty() ? 0 : modalities[0].rows(); }
  int pad_rows() const { return length() - original_length; }
};

struct Dataset {
  DatasetInfo info;
  std::vector<MultimodalInstance> instances;
};

/// Directory layout: manifest.json plus one CSV per instance per modality
/// (rows = timesteps). Values round-trip exactly.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Keep every factor-th timestep starting at the first non-padded row (index
/// 0 for unpadded instances), identically across modalities.
Dataset downsample(const Dataset& ds, int factor);

/// Prepend all-zero timesteps so every instance has t_target rows
/// (t_target = 0 means the longest instance in the dataset).
Dataset pre_pad(const Dataset& ds, int t_target = 0);

/// Duplicate uniformly-random minority-class instances until all classes
/// match the majority count. Copies get fresh ids, same subject.
Dataset oversample_minority(const Dataset& ds, std::uint64_t seed);

/// Rotate every (x, y, z) triplet of each positional modality about the y
/// axis by 0/90/180/270 degrees; other modalities are copied unchanged.
/// Returns 4x the instances; the 0-degree instance is the original.
Dataset rotate_augment(const Dataset& ds);

/// Nearest value with one significant figure (0 stays 0).
double round_to_one_sig_fig(double x);

struct NoiseResult {
  Dataset data;
  double pooled_std = 0.0;  // population std over non-padded entries
  double sigma = 0.0;       // round_to_one_sig_fig(fraction * pooled_std)
};

/// Add N(0, sigma) i.i.d. to every non-padded entry of one modality, where
/// sigma is `fraction` of that modality's pooled standard deviation, rounded
/// to one significant figure.
NoiseResult inject_noise(const Dataset& ds, int modality, double fraction, std::uint64_t seed);

struct SynthConfig {
  int subjects = 22;
  int instances_per_subject = 9;
  int classes = 3;
  int t_min = 24;
  int t_max = 36;
  std::vector<int> dims = {78, 4};
  double sampling_rate_hz = 10.0;
  std::uint64_t seed = 1;
  int segments = 3;            // carrier modality alternates across segments
  double signal_amp = 1.0;     // class-dependent oscillation amplitude
  double distractor_amp = 1.0; // off-band oscillation in the non-carrier modality
  double noise_level = 0.3;    // background gaussian level
  double subject_shift = 0.3;  // per-subject constant feature offsets
};

/// Class-separable multimodal sequences: each time segment plants a
/// class-specific low-band oscillation in one carrier modality (alternating
/// across segments) while the other modality carries an uninformative
/// high-band oscillation. Deterministic in the seed.
Dataset synth_generate(const SynthConfig& cfg);

}  // namespace gwn
