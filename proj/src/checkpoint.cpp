// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "adlm/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace adlm {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }
  void patch_u64(std::size_t at, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_[at + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
  }
  std::size_t size() const { return bytes_.size(); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError(CheckpointErrorKind::bad_shape, "checkpoint: truncated data");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') {
      out += "\\\\";
    } else if (c == '\n') {
      out += "\\n";
    } else if (c == '\r') {
      out += "\\r";
    } else {
      out += c;
    }
  }
  return out;
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    const char n = s[++i];
    out += n == 'n' ? '\n' : n == 'r' ? '\r' : n;
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::string config_text(const CheckpointHeader& h) {
  std::ostringstream os;
  const LMConfig& c = h.config;
  os << "num_layers=" << c.num_layers << '\n'
     << "hidden=" << c.hidden << '\n'
     << "ffn=" << c.ffn << '\n'
     << "num_heads=" << c.num_heads << '\n'
     << "vocab_size=" << c.vocab_size << '\n'
     << "adapter_dim=" << c.adapter_dim << '\n'
     << "max_len=" << c.max_len << '\n'
     << "domains=" << join(h.domains) << '\n'
     << "active=" << h.active << '\n';
  if (h.vocab) {
    std::ostringstream vs;
    h.vocab->write(vs);
    os << "vocab=" << escape(vs.str()) << '\n';
  }
  return os.str();
}

[[noreturn]] void shape_error(const std::string& what) {
  throw CheckpointError(CheckpointErrorKind::bad_shape, "checkpoint: " + what);
}

std::size_t parse_size(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) shape_error("config block lacks '" + key + "'");
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    shape_error("bad value for '" + key + "'");
  }
}

CheckpointHeader parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) shape_error("malformed config line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  CheckpointHeader h;
  h.config.num_layers = parse_size(kv, "num_layers");
  h.config.hidden = parse_size(kv, "hidden");
  h.config.ffn = parse_size(kv, "ffn");
  h.config.num_heads = parse_size(kv, "num_heads");
  h.config.vocab_size = parse_size(kv, "vocab_size");
  h.config.adapter_dim = parse_size(kv, "adapter_dim");
  h.config.max_len = parse_size(kv, "max_len");
  try {
    h.config.validate();
  } catch (const ContractError& e) {
    shape_error(e.what());
  }
  if (const auto it = kv.find("domains"); it != kv.end() && !it->second.empty()) {
    std::string item;
    std::istringstream ds(it->second);
    while (std::getline(ds, item, ',')) h.domains.push_back(item);
  }
  if (const auto it = kv.find("active"); it != kv.end()) h.active = it->second;
  if (const auto it = kv.find("vocab"); it != kv.end()) {
    std::istringstream vs(unescape(it->second));
    try {
      h.vocab = Vocabulary::read(vs);
    } catch (const Error& e) {
      shape_error(std::string("embedded vocabulary: ") + e.what());
    }
    if (h.vocab->size() != h.config.vocab_size) shape_error("embedded vocabulary size differs from vocab_size");
  }
  return h;
}

void write_records(Writer& w, std::span<const NamedTensor<float>> params) {
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) w.u64(d);
    for (float v : p.tensor.data()) w.f32(v);
  }
}

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
    crc = crc32(crc, bytes.data() + offset, static_cast<uInt>(chunk));
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> serialize_parameters(std::span<const NamedTensor<float>> params) {
  Writer w;
  write_records(w, params);
  return std::move(w.bytes());
}

std::vector<std::uint8_t> encode_checkpoint(const DomainRegistry<float>& registry, const Vocabulary* vocab) {
  CheckpointHeader h;
  h.config = registry.config();
  h.domains = registry.domain_names();
  h.active = registry.active();
  if (vocab) h.vocab = *vocab;
  Writer w;
  w.raw(std::string_view(kCheckpointMagic, 4));
  w.u32(kCheckpointVersion);
  const std::size_t length_at = w.size();
  w.u64(0);
  w.str(config_text(h));
  write_records(w, registry.named_parameters());
  w.patch_u64(length_at, w.size() + 4);
  w.u32(crc32_of(w.bytes()));
  return std::move(w.bytes());
}

LoadedCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError(CheckpointErrorKind::bad_magic, "checkpoint: bad magic");
  }
  Reader r(bytes.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrorKind::bad_version,
                          "checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint64_t length = r.u64();
  if (length != bytes.size()) {
    shape_error("file holds " + std::to_string(bytes.size()) + " bytes, header declares " + std::to_string(length));
  }
  if (bytes.size() < 24) shape_error("file too short");
  const std::uint32_t stored = Reader(bytes.subspan(bytes.size() - 4)).u32();
  if (crc32_of(bytes.first(bytes.size() - 4)) != stored) {
    throw CheckpointError(CheckpointErrorKind::bad_crc, "checkpoint: CRC mismatch");
  }

  Reader body(bytes.subspan(16, bytes.size() - 20));
  CheckpointHeader header = parse_config(body.str());
  const LMConfig& cfg = header.config;
  DomainRegistry<float> registry(cfg, LMParameters<float>::zeros(cfg));
  for (const auto& name : header.domains) {
    try {
      registry.add_domain(name, 0.0, 0);
    } catch (const ContractError& e) {
      shape_error(e.what());
    }
  }
  if (header.active != kBaseDomain && !registry.has_domain(header.active)) {
    shape_error("active domain '" + header.active + "' is not registered");
  }
  registry.set_active(header.active);

  std::map<std::string, Tensor<float>> slots;
  for (const auto& nt : registry.named_parameters()) slots.emplace(nt.name, nt.tensor);
  const std::uint32_t count = body.u32();
  if (count != slots.size()) {
    shape_error(std::to_string(count) + " records, the configuration implies " + std::to_string(slots.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = body.str();
    const auto it = slots.find(name);
    if (it == slots.end()) shape_error("unexpected parameter '" + name + "'");
    const std::uint32_t rank = body.u32();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(body.u64());
    if (shape != it->second.shape()) {
      shape_error("parameter '" + name + "' has shape " + shape_str(shape) + ", expected " +
                  shape_str(it->second.shape()));
    }
    auto data = it->second.mutable_data();
    for (float& v : data) v = body.f32();
    slots.erase(it);
  }
  if (body.remaining() != 0) shape_error("trailing bytes after the last record");
  return {std::move(header), std::move(registry)};
}

void save_checkpoint(const std::string& path, const DomainRegistry<float>& registry, const Vocabulary* vocab) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(registry, vocab);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("save_checkpoint: cannot open '" + tmp + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("save_checkpoint: write to '" + tmp + "' failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("save_checkpoint: cannot rename '" + tmp + "' to '" + path + "'");
  }
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(e.kind(), std::string(e.what()) + " (" + path + ")");
  }
}

}  // namespace adlm
