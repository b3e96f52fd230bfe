#include "vmask/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vmask::ckpt {

namespace {

constexpr char kMagic[5] = {'V', 'M', 'S', 'K', '1'};
constexpr int kFormatVersion = 1;

void put_u32le(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32le(const std::string& s, size_t off) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
  return v;
}

void put_f64le(std::string& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64le(const std::string& s, size_t off) {
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<uint64_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
  }
  double d;
  std::memcpy(&d, &bits, sizeof(d));
  return d;
}

}  // namespace

void save(const std::string& path, const trainer::Checkpoint& state,
          const nlohmann::json& run_config) {
  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  header["vocab_fingerprint"] = config::fingerprint_hex(state.vocab_fingerprint);
  header["config"] = run_config;
  header["epoch"] = state.epoch;
  header["dev_accuracy"] = state.dev_accuracy;

  nlohmann::json manifest = nlohmann::json::array();
  uint64_t offset = 0;
  for (const models::NamedParam& p : state.tensors) {
    manifest.push_back({{"name", p.name},
                        {"shape", p.value.shape()},
                        {"offset", offset},
                        {"frozen", p.frozen}});
    offset += p.value.size() * sizeof(double);
  }
  header["tensors"] = manifest;

  const std::string header_str = header.dump();
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32le(out, static_cast<uint32_t>(header_str.size()));
  out += header_str;
  for (const models::NamedParam& p : state.tensors) {
    for (double v : p.value.data()) put_f64le(out, v);
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("checkpoint: short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("checkpoint: cannot rename " + tmp + " to " + path);
  }
}

CheckpointFile load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kMagic) + 4 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const uint32_t header_len = get_u32le(bytes, sizeof(kMagic));
  const size_t data_start = sizeof(kMagic) + 4 + header_len;
  if (bytes.size() < data_start) {
    throw std::runtime_error("checkpoint: unexpected end of file (truncated header)");
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(sizeof(kMagic) + 4, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: corrupt header: ") + e.what());
  }
  if (header.at("format_version").get<int>() != kFormatVersion) {
    throw std::runtime_error("checkpoint: unsupported format_version " +
                             header.at("format_version").dump());
  }

  CheckpointFile out;
  out.run_config = header.at("config");
  out.state.epoch = header.value("epoch", 0);
  out.state.dev_accuracy = header.value("dev_accuracy", 0.0);
  {
    const std::string fp = header.at("vocab_fingerprint").get<std::string>();
    out.state.vocab_fingerprint = std::stoull(fp, nullptr, 16);
  }

  uint64_t expect_offset = 0;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    const uint64_t offset = entry.at("offset").get<uint64_t>();
    if (offset != expect_offset) {
      throw std::runtime_error("checkpoint: non-contiguous offset for tensor '" + name + "'");
    }
    size_t numel = 1;
    for (int d : shape) numel *= static_cast<size_t>(d);
    const size_t begin = data_start + offset;
    const size_t end = begin + numel * sizeof(double);
    if (end > bytes.size()) {
      throw std::runtime_error("checkpoint: unexpected end of file while reading tensor '" + name +
                               "'");
    }
    std::vector<double> vals(numel);
    for (size_t i = 0; i < numel; ++i) vals[i] = get_f64le(bytes, begin + i * sizeof(double));
    out.state.tensors.push_back(
        {name, tg::Tensor(shape, std::move(vals)), entry.value("frozen", false)});
    expect_offset = offset + numel * sizeof(double);
  }
  if (data_start + expect_offset != bytes.size()) {
    throw std::runtime_error("checkpoint: file length does not match manifest");
  }
  return out;
}

models::Model rebuild_model(const CheckpointFile& file) {
  config::RunConfig cfg = config::RunConfig::parse(file.run_config);
  models::ClassifierSpec spec = cfg.model;

  int vocab_size = -1, num_classes = -1;
  for (const models::NamedParam& p : file.state.tensors) {
    if (p.name == "embedding") vocab_size = p.value.shape()[0];
    if (p.name == "cnn.b_out" || p.name == "boe.b2") num_classes = p.value.shape()[0];
  }
  if (vocab_size < 0) throw std::runtime_error("checkpoint: no embedding tensor in manifest");
  if (num_classes < 0) throw std::runtime_error("checkpoint: no output bias in manifest");
  spec.num_classes = num_classes;

  models::Model model(spec, cfg.train.strategy, vocab_size, cfg.init_seed);
  trainer::restore(model, file.state);
  return model;
}

}  // namespace vmask::ckpt
