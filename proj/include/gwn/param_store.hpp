#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "gwn/tape.hpp"
#include "gwn/tensor.hpp"

namespace gwn {

/// Named, ordered collection of trainable tensors. Iteration order is the
/// insertion order and is the canonical order for gradients, Adam moments,
/// and the checkpoint payload.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable = true;
  };

  void add(std::string name, Tensor value, bool trainable = true);
  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  void set(const std::string& name, Tensor value);
  void set_trainable(const std::string& name, bool trainable);
  std::size_t index_of(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }

  /// Checkpoint: one JSON header line (names, shapes, flags, optional meta)
  /// followed by the raw little-endian float64 payload in entry order.
  /// Round trips byte-exactly.
  void save(const std::filesystem::path& path, const std::string& meta_json = "") const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct LoadedCheckpoint {
  ParamStore params;
  std::string meta_json;  // "" when absent
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Gradients aligned with ParamStore::entries() order.
using ParamGrads = std::vector<Tensor>;

/// Leaf node per entry, in entry order, for building a forward pass.
std::vector<NodeId> bind_params(Tape& tape, const ParamStore& params);

}  // namespace gwn
