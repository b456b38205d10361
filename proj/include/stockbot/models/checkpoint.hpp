#pragma once

// Checkpoint container (all integers little-endian):
//
//   magic        8 bytes   "SBCKPT01"
//   header_len   u64       byte length of the JSON header
//   header       bytes     UTF-8 JSON: {"format":1,"spec":{...},"step_count":N,
//                          "params":[{"name":..,"shape":[..]}, ...]}
//   n_arrays     u32
//   per array, in header order:
//     name_len   u32, name bytes
//     rank       u32, dims u64 x rank
//     count      u64, values f64 x count (IEEE-754 binary64)

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "stockbot/models/model.hpp"

namespace stockbot::models {

inline constexpr char kCheckpointMagic[8] = {'S', 'B', 'C', 'K', 'P', 'T', '0', '1'};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(ErrorKind::format, "model-zoo", "truncated checkpoint");
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const ModelState& state) {
  nlohmann::json header;
  header["format"] = 1;
  header["spec"] = state.spec;
  header["step_count"] = state.step_count;
  header["params"] = nlohmann::json::array();
  for (const auto& [name, t] : state.params) header["params"].push_back({{"name", name}, {"shape", t.shape()}});
  const std::string head = header.dump();

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put<std::uint64_t>(out, head.size());
  out += head;
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(state.params.size()));
  for (const auto& [name, t] : state.params) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) detail::put<std::uint64_t>(out, d);
    detail::put<std::uint64_t>(out, t.size());
    for (double v : t.data()) detail::put<double>(out, v);
  }
  return out;
}

/// Parses a checkpoint and checks the parameter inventory against a fresh
/// build of the embedded spec.
inline ModelState deserialize_checkpoint(std::string bytes) {
  detail::Reader in(std::move(bytes));
  if (in.str(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw Error(ErrorKind::format, "model-zoo", "not a checkpoint (bad magic)");
  }
  const auto head_len = in.get<std::uint64_t>();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.str(head_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, "model-zoo", std::string("checkpoint header: ") + e.what());
  }
  ModelState state;
  state.spec = header.at("spec").get<ModelSpec>();
  state.step_count = header.at("step_count").get<std::uint64_t>();
  const auto n = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = in.str(in.get<std::uint32_t>());
    Shape shape(in.get<std::uint32_t>());
    for (auto& d : shape) d = in.get<std::uint64_t>();
    std::vector<double> values(in.get<std::uint64_t>());
    for (auto& v : values) v = in.get<double>();
    state.params.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (!in.done()) throw Error(ErrorKind::format, "model-zoo", "trailing bytes after checkpoint arrays");

  const ModelState reference = build(state.spec);
  if (reference.params.size() != state.params.size()) {
    throw Error(ErrorKind::format, "model-zoo", "checkpoint parameter inventory does not match its spec");
  }
  for (const auto& [name, t] : reference.params) {
    auto it = state.params.find(name);
    if (it == state.params.end() || it->second.shape() != t.shape()) {
      throw Error(ErrorKind::format, "model-zoo", "checkpoint parameter '" + name + "' missing or misshapen");
    }
  }
  return state;
}

inline void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::input_not_found, "model-zoo", "cannot write checkpoint " + path.string());
  const std::string bytes = serialize_checkpoint(state);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::input_not_found, "model-zoo", "checkpoint not found: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace stockbot::models
