#ifndef MMC_CHECKPOINT_HPP
#define MMC_CHECKPOINT_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "mmc/config.hpp"
#include "mmc/hash.hpp"
#include "mmc/types.hpp"

namespace mmc {

/// One serialized tensor: row-major float32 payload with 2-D shape.
struct NamedArray {
  std::string name;
  std::int64_t rows = 0, cols = 0;
  std::vector<float> data;  // rows*cols, row-major
};

/// Checkpoint container contents: a config echo, a small string-keyed state
/// block (epoch, step, ...), and named float32 arrays.
struct CheckpointData {
  KVConfig config;
  std::map<std::string, std::string> state;
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const {
    for (const auto& a : arrays)
      if (a.name == name) return &a;
    return nullptr;
  }
};

namespace detail {

inline void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void append_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  append_u32(out, bits);
}

inline void append_str(std::string& out, const std::string& s) {
  append_u64(out, s.size());
  out.append(s);
}

class ByteReader {
 public:
  ByteReader(const std::string& buf, const std::string& origin)
      : buf_(buf), origin_(origin) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[at_ + i])) << (8 * i);
    at_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[at_ + i])) << (8 * i);
    at_ += 8;
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s = buf_.substr(at_, n);
    at_ += n;
    return s;
  }

  std::size_t at() const { return at_; }
  std::size_t remaining() const { return buf_.size() - at_; }

 private:
  void need(std::uint64_t n) const {
    if (at_ + n > buf_.size()) throw IoError(origin_ + ": truncated checkpoint");
  }
  const std::string& buf_;
  std::string origin_;
  std::size_t at_ = 0;
};

}  // namespace detail

inline constexpr char kCheckpointMagic[4] = {'M', 'M', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Serializes config echo, state, and arrays, ending with a 64-bit content
/// hash of every preceding byte. Loading recomputes and compares the hash.
inline std::string serialize_checkpoint(const CheckpointData& data) {
  std::string out;
  out.append(kCheckpointMagic, 4);
  detail::append_u32(out, kCheckpointVersion);

  detail::append_str(out, data.config.serialize());

  std::string state_text;
  for (const auto& [k, v] : data.state) state_text += k + "=" + v + "\n";
  detail::append_str(out, state_text);

  detail::append_u64(out, data.arrays.size());
  for (const auto& a : data.arrays) {
    if (static_cast<std::int64_t>(a.data.size()) != a.rows * a.cols)
      throw InvalidArgument("checkpoint: array " + a.name + " has inconsistent shape");
    detail::append_str(out, a.name);
    detail::append_u32(out, 2);
    detail::append_u64(out, static_cast<std::uint64_t>(a.rows));
    detail::append_u64(out, static_cast<std::uint64_t>(a.cols));
    for (const float v : a.data) detail::append_f32(out, v);
  }

  Fnv1a h;
  h.update(out.data(), out.size());
  detail::append_u64(out, h.digest());
  return out;
}

inline CheckpointData deserialize_checkpoint(const std::string& buf,
                                             const std::string& origin) {
  if (buf.size() < 16 || std::memcmp(buf.data(), kCheckpointMagic, 4) != 0)
    throw IoError(origin + ": not a checkpoint file");

  Fnv1a h;
  h.update(buf.data(), buf.size() - 8);
  const std::string body = buf.substr(0, buf.size() - 8);

  detail::ByteReader r(body, origin);
  r.u32();  // magic, already checked
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw IoError(origin + ": unsupported checkpoint version");

  CheckpointData data;
  data.config.parse_string(r.str(), origin + "#config");

  const std::string state_text = r.str();
  std::size_t pos = 0;
  while (pos < state_text.size()) {
    const std::size_t nl = state_text.find('\n', pos);
    const std::string line = state_text.substr(pos, nl - pos);
    pos = (nl == std::string::npos) ? state_text.size() : nl + 1;
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw IoError(origin + ": malformed state line");
    data.state[line.substr(0, eq)] = line.substr(eq + 1);
  }

  const std::uint64_t count = r.u64();
  data.arrays.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.str();
    const std::uint32_t ndim = r.u32();
    if (ndim != 2) throw IoError(origin + ": unsupported array rank");
    a.rows = static_cast<std::int64_t>(r.u64());
    a.cols = static_cast<std::int64_t>(r.u64());
    if (a.rows < 0 || a.cols < 0 || a.rows * a.cols > (1LL << 32))
      throw IoError(origin + ": unreasonable array shape");
    a.data.resize(static_cast<std::size_t>(a.rows * a.cols));
    for (auto& v : a.data) v = r.f32();
    data.arrays.push_back(std::move(a));
  }

  // trailing content hash
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= static_cast<std::uint64_t>(
                  static_cast<unsigned char>(buf[buf.size() - 8 + static_cast<std::size_t>(i)]))
              << (8 * i);
  if (stored != h.digest())
    throw IoError(origin + ": checkpoint content hash mismatch");
  return data;
}

inline void save_checkpoint(const std::string& path, const CheckpointData& data) {
  const std::string buf = serialize_checkpoint(data);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("error while writing checkpoint: " + path);
}

inline CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(buf, path);
}

/// Digest of a whole file, for ledger records and tamper checks.
inline std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  Fnv1a h;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.digest();
}

}  // namespace mmc

#endif  // MMC_CHECKPOINT_HPP
