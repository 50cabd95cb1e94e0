#include "crowdnav/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

namespace crowdnav {

namespace {

constexpr char kMagic[8] = {'C', 'N', 'A', 'V', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void floats(const std::vector<float>& v) {
    for (const float f : v) u32(std::bit_cast<std::uint32_t>(f));
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::size_t end) : bytes_(b), end_(end) {}

  void need(std::size_t n) const {
    if (end_ - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
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
  std::vector<float> floats(std::uint64_t n) {
    if (n > (end_ - pos_) / 4) throw CheckpointError("checkpoint truncated");
    std::vector<float> v(static_cast<std::size_t>(n));
    for (float& f : v) f = std::bit_cast<float>(u32());
    return v;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

void write_adam(Writer& w, const AdamState<float>& a) {
  w.u64(a.step);
  w.floats(a.m);
  w.floats(a.v);
}

AdamState<float> read_adam(Reader& r, std::size_t n) {
  AdamState<float> a;
  a.step = r.u64();
  a.m = r.floats(n);
  a.v = r.floats(n);
  return a;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  const bool has_adam = c.policy_adam.has_value() && c.value_adam.has_value();
  if (has_adam && (c.policy_adam->m.size() != c.policy.size() ||
                   c.value_adam->m.size() != c.value.size())) {
    throw CheckpointError("optimizer state does not match parameter count");
  }
  Writer w;
  w.out.insert(w.out.end(), std::begin(kMagic), std::end(kMagic));
  w.u32(kCheckpointVersion);
  w.u32(has_adam ? 1U : 0U);
  w.u64(c.policy_hash);
  w.u64(c.value_hash);
  w.u64(c.iteration);
  w.u64(c.policy.size());
  w.floats(c.policy);
  w.u64(c.value.size());
  w.floats(c.value);
  if (has_adam) {
    write_adam(w, *c.policy_adam);
    write_adam(w, *c.value_adam);
  }
  w.u64(fnv1a(w.out.data(), w.out.size()));
  return std::move(w.out);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) + 8) throw CheckpointError("checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[body + i]) << (8 * i);
  if (stored != fnv1a(bytes.data(), body)) throw CheckpointError("checkpoint checksum mismatch");

  Reader r(bytes, body);
  r.skip(sizeof(kMagic));
  Checkpoint c;
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t flags = r.u32();
  c.policy_hash = r.u64();
  c.value_hash = r.u64();
  c.iteration = r.u64();
  c.policy = r.floats(r.u64());
  c.value = r.floats(r.u64());
  if ((flags & 1U) != 0U) {
    c.policy_adam = read_adam(r, c.policy.size());
    c.value_adam = read_adam(r, c.value.size());
  }
  if (r.pos() != body) throw CheckpointError("trailing bytes in checkpoint");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(ckpt);
  // Write to a side file first so a crash never leaves a half-written checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("failed writing " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw CheckpointError("cannot rename to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Checkpoint load_checkpoint(const std::string& path, const nn::NetArch& policy_arch,
                           const nn::NetArch& value_arch) {
  Checkpoint c = load_checkpoint(path);
  if (c.policy_hash != policy_arch.hash() || c.value_hash != value_arch.hash()) {
    throw CheckpointError("checkpoint architecture hash mismatch (expected policy " +
                          policy_arch.describe() + ")");
  }
  if (c.policy.size() != policy_arch.parameter_count() ||
      c.value.size() != value_arch.parameter_count()) {
    throw CheckpointError("checkpoint parameter count mismatch");
  }
  return c;
}

}  // namespace crowdnav
