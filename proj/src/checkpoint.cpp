// SPDX-License-Identifier: Apache-2.0
#include "l2a/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace l2a {

namespace {

constexpr char kMagic[4] = {'L', '2', 'A', 'C'};
constexpr std::uint32_t kVersion = 1;

void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t read_u64(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(out, bits);
  }
}

std::vector<double> read_doubles(std::istream& in, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bits = read_u64(in);
    std::memcpy(&v[i], &bits, 8);
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const nlohmann::json& config,
                     const ParameterStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, 4);
  write_u64(out, kVersion);
  write_string(out, config.dump());
  write_u64(out, params.names().size());
  for (const auto& name : params.names()) {
    const Tensor& t = params.at(name);
    write_string(out, name);
    write_u64(out, t.shape().size());
    for (std::size_t d : t.shape()) write_u64(out, d);
    write_doubles(out, t.values());
  }
  if (!out) throw Error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("checkpoint: bad magic in " + path);
  const std::uint64_t version = read_u64(in);
  if (version != kVersion)
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.config = nlohmann::json::parse(read_string(in));
  const std::uint64_t count = read_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = read_string(in);
    const std::uint64_t ndim = read_u64(in);
    Shape shape(ndim);
    for (auto& d : shape) d = read_u64(in);
    auto values = read_doubles(in, shape_numel(shape));
    if (!in) throw Error("checkpoint: truncated file " + path);
    ckpt.params.add(name, Tensor::from_values(shape, std::move(values), true));
  }
  return ckpt;
}

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["layers"] = cfg.layers;
  j["hidden"] = cfg.hidden;
  j["heads"] = cfg.heads;
  j["ffn"] = cfg.ffn;
  j["vocab_size"] = cfg.vocab_size;
  j["max_len"] = cfg.max_len;
  j["head"] = head_kind_name(cfg.head);
  j["num_classes"] = cfg.num_classes;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.layers = j.at("layers").get<std::size_t>();
  cfg.hidden = j.at("hidden").get<std::size_t>();
  cfg.heads = j.at("heads").get<std::size_t>();
  cfg.ffn = j.at("ffn").get<std::size_t>();
  cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
  cfg.max_len = j.at("max_len").get<std::size_t>();
  cfg.head = head_kind_from_name(j.at("head").get<std::string>());
  cfg.num_classes = j.at("num_classes").get<int>();
  cfg.validate();
  return cfg;
}

}  // namespace l2a
