#include "ecg/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ecg/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

namespace ecg {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'G', 'M'};
constexpr uint32_t kVersion = 1;
constexpr uint64_t kMaxHeaderBytes = 16ull << 20;

using nlohmann::json;

void write_bytes(std::ofstream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

}  // namespace

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  json manifest = json::array();
  uint64_t offset = 0;
  for (const ParamTensor& t : net.tensors()) {
    const uint64_t len = t.size() * sizeof(float);
    manifest.push_back({{"name", t.name},
                        {"shape", t.shape},
                        {"byte_offset", offset},
                        {"byte_len", len}});
    offset += len;
  }
  json header = {{"arch", net.spec().name},
                 {"input_length", net.spec().input_length},
                 {"label_names", net.spec().label_names},
                 {"tensors", manifest}};
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CheckpointError("cannot open " + path.string() + " for writing");
  }
  write_bytes(out, kMagic, sizeof(kMagic));
  const uint32_t version = kVersion;
  write_bytes(out, &version, sizeof(version));
  const uint64_t header_len = header_text.size();
  write_bytes(out, &header_len, sizeof(header_len));
  write_bytes(out, header_text.data(), header_text.size());
  for (const ParamTensor& t : net.tensors()) {
    write_bytes(out, t.values.data(), t.size() * sizeof(float));
  }
  out.flush();
  if (!out) throw CheckpointError("short write to " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());

  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(path.string() + ": bad magic (not an ECGM file)");
  }
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kVersion) {
    throw CheckpointError(path.string() + ": unsupported version " +
                          std::to_string(version));
  }
  uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || header_len == 0 || header_len > kMaxHeaderBytes) {
    throw CheckpointError(path.string() + ": bad header length");
  }
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw CheckpointError(path.string() + ": truncated header");

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": malformed header: " + e.what());
  }

  std::string arch;
  int input_length = 0;
  std::vector<std::string> label_names;
  json manifest;
  try {
    arch = header.at("arch").get<std::string>();
    input_length = header.at("input_length").get<int>();
    label_names = header.at("label_names").get<std::vector<std::string>>();
    manifest = header.at("tensors");
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": incomplete header: " + e.what());
  }
  const int n_classes = static_cast<int>(label_names.size());

  ModelSpec spec;
  if (arch == "original") {
    spec = original_spec(input_length, n_classes, label_names);
  } else if (arch == "modified") {
    spec = modified_spec(input_length, n_classes, label_names);
  } else {
    throw CheckpointError(path.string() + ": unknown arch '" + arch + "'");
  }
  Network net = Network::build(spec, /*seed=*/0);

  std::vector<char> payload(std::istreambuf_iterator<char>(in), {});
  const uint64_t payload_len = payload.size();

  if (!manifest.is_array() || manifest.size() != net.tensors().size()) {
    throw CheckpointError(path.string() + ": tensor manifest count mismatch");
  }
  // Offsets must be in-bounds and non-overlapping.
  std::vector<std::pair<uint64_t, uint64_t>> ranges;
  for (const json& entry : manifest) {
    const uint64_t off = entry.at("byte_offset").get<uint64_t>();
    const uint64_t len = entry.at("byte_len").get<uint64_t>();
    if (len == 0 || off + len > payload_len) {
      throw CheckpointError(path.string() + ": truncated payload (tensor '" +
                            entry.at("name").get<std::string>() +
                            "' out of bounds)");
    }
    ranges.emplace_back(off, len);
  }
  std::sort(ranges.begin(), ranges.end());
  for (size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i - 1].first + ranges[i - 1].second > ranges[i].first) {
      throw CheckpointError(path.string() + ": overlapping tensor ranges");
    }
  }

  for (const json& entry : manifest) {
    const std::string name = entry.at("name").get<std::string>();
    ParamTensor* t = net.find_tensor(name);
    if (!t) {
      throw CheckpointError(path.string() + ": unexpected tensor '" + name +
                            "' for arch '" + arch + "'");
    }
    const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    if (shape != t->shape) {
      throw CheckpointError(path.string() + ": tensor '" + name +
                            "' shape mismatch");
    }
    const uint64_t off = entry.at("byte_offset").get<uint64_t>();
    const uint64_t len = entry.at("byte_len").get<uint64_t>();
    if (len != t->size() * sizeof(float)) {
      throw CheckpointError(path.string() + ": tensor '" + name +
                            "' byte length mismatch");
    }
    std::memcpy(t->values.data(), payload.data() + off, len);
    for (float v : t->values) {
      if (!std::isfinite(v)) {
        throw CheckpointError(path.string() + ": tensor '" + name +
                              "' holds non-finite values");
      }
    }
  }
  return net;
}

}  // namespace ecg
