#include "gwn/param_store.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace gwn {

void ParamStore::add(std::string name, Tensor value, bool trainable) {
  if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{std::move(name), std::move(value), trainable});
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) != 0; }

std::size_t ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown name '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const { return entries_[index_of(name)].value; }

void ParamStore::set(const std::string& name, Tensor value) {
  Entry& e = entries_[index_of(name)];
  if (!e.value.same_shape(value))
    throw std::invalid_argument("ParamStore: shape mismatch for '" + name + "', " + shape_str(e.value) + " vs " +
                                shape_str(value));
  e.value = std::move(value);
}

void ParamStore::set_trainable(const std::string& name, bool trainable) {
  entries_[index_of(name)].trainable = trainable;
}

namespace {

void write_f64_le(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 8);
}

double read_f64_le(std::istream& in) {
  char b[8];
  in.read(b, 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void ParamStore::save(const std::filesystem::path& path, const std::string& meta_json) const {
  nlohmann::json header;
  header["format"] = "gwn-checkpoint";
  header["version"] = 1;
  auto& list = header["entries"] = nlohmann::json::array();
  for (const Entry& e : entries_) {
    list.push_back({{"name", e.name}, {"shape", e.value.shape()}, {"trainable", e.trainable}});
  }
  if (!meta_json.empty()) header["meta"] = nlohmann::json::parse(meta_json);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  out << header.dump() << "\n";
  for (const Entry& e : entries_)
    for (std::size_t i = 0; i < e.value.numel(); ++i) write_f64_le(out, e.value.data()[i]);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint header missing: " + path.string());
  nlohmann::json header = nlohmann::json::parse(line);
  if (header.value("format", "") != "gwn-checkpoint")
    throw std::runtime_error("not a checkpoint file: " + path.string());

  LoadedCheckpoint result;
  for (const auto& item : header.at("entries")) {
    std::vector<int> shape = item.at("shape").get<std::vector<int>>();
    Tensor t = Tensor::zeros(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = read_f64_le(in);
    if (!in) throw std::runtime_error("checkpoint payload truncated: " + path.string());
    result.params.add(item.at("name").get<std::string>(), std::move(t), item.at("trainable").get<bool>());
  }
  if (in.get() != std::ifstream::traits_type::eof())
    throw std::runtime_error("checkpoint has trailing bytes: " + path.string());
  if (header.contains("meta")) result.meta_json = header["meta"].dump();
  return result;
}

std::vector<NodeId> bind_params(Tape& tape, const ParamStore& params) {
  std::vector<NodeId> nodes;
  nodes.reserve(params.size());
  for (const auto& e : params.entries()) nodes.push_back(tape.input(e.value));
  return nodes;
}

}  // namespace gwn
