#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "matmodal/config_json.hpp"
#include "matmodal/models.hpp"

namespace matmodal {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'M', 'M', 'C', 'K', 'P', 'T', '0', '\n'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void doubles_to_le_bytes(const std::vector<double>& vals,
                         std::vector<unsigned char>& out) {
  for (double d : vals) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i)
      out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
  }
}

double le_bytes_to_double(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::vector<unsigned char> payload;
  json tensor_manifest = json::array();
  std::uint64_t offset = 0;  // in doubles
  for (const auto& [name, t] : ckpt.tensors) {
    tensor_manifest.push_back(
        {{"name", name}, {"shape", t.shape()}, {"offset", offset},
         {"count", t.size()}});
    doubles_to_le_bytes(t.values(), payload);
    offset += t.size();
  }

  json manifest = {{"model_kind", ckpt.model_kind},
                   {"modalities", ckpt.modalities},
                   {"tasks", ckpt.tasks},
                   {"encoder", ckpt.encoder},
                   {"train", ckpt.train},
                   {"xrd", ckpt.xrd},
                   {"stats", ckpt.stats},
                   {"seed", ckpt.seed},
                   {"tensors", tensor_manifest},
                   {"loss_history", ckpt.loss_history},
                   {"payload_checksum",
                    fnv1a64(payload.data(), payload.size())}};
  const std::string manifest_str = manifest.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_u32(os, kFormatVersion);
  write_u64(os, manifest_str.size());
  os.write(manifest_str.data(), static_cast<std::streamsize>(manifest_str.size()));
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size()));
  if (!os) throw std::runtime_error("write failed for checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);

  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  const std::uint32_t version = read_u32(is);
  if (version != kFormatVersion)
    throw std::runtime_error("unsupported checkpoint format version " +
                             std::to_string(version) + " in " + path);
  const std::uint64_t manifest_len = read_u64(is);
  std::string manifest_str(manifest_len, '\0');
  is.read(manifest_str.data(), static_cast<std::streamsize>(manifest_len));
  if (!is) throw std::runtime_error("truncated checkpoint manifest: " + path);

  json manifest;
  try {
    manifest = json::parse(manifest_str);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("corrupt checkpoint manifest in " + path + ": " +
                             e.what());
  }

  std::vector<unsigned char> payload;
  {
    std::ostringstream rest;
    rest << is.rdbuf();
    const std::string& s = rest.str();
    payload.assign(s.begin(), s.end());
  }
  const auto expect_sum = manifest.at("payload_checksum").get<std::uint64_t>();
  if (fnv1a64(payload.data(), payload.size()) != expect_sum)
    throw std::runtime_error("checkpoint payload checksum mismatch: " + path);

  Checkpoint ckpt;
  ckpt.format_version = static_cast<int>(version);
  ckpt.model_kind = manifest.at("model_kind").get<std::string>();
  ckpt.modalities = manifest.at("modalities").get<std::vector<std::string>>();
  ckpt.tasks = manifest.at("tasks").get<std::vector<std::string>>();
  ckpt.encoder = manifest.at("encoder").get<EncoderConfig>();
  ckpt.train = manifest.at("train").get<TrainConfig>();
  ckpt.xrd = manifest.at("xrd").get<XrdSimConfig>();
  ckpt.stats = manifest.at("stats").get<Standardization>();
  ckpt.seed = manifest.at("seed").get<std::uint64_t>();
  ckpt.loss_history = manifest.at("loss_history").get<std::vector<double>>();

  for (const auto& entry : manifest.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<int>>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto count = entry.at("count").get<std::uint64_t>();
    if ((offset + count) * 8 > payload.size())
      throw std::runtime_error("checkpoint tensor '" + name +
                               "' extends past payload in " + path);
    std::vector<double> vals(count);
    for (std::uint64_t i = 0; i < count; ++i)
      vals[i] = le_bytes_to_double(payload.data() + (offset + i) * 8);
    ckpt.tensors.emplace(name,
                         nn::Tensor::from(shape, std::move(vals), true));
  }
  return ckpt;
}

}  // namespace matmodal
