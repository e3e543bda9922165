#include "sadiar/checkpoint.hpp"

#include <cstdint>
#include <cstring>

#include "sadiar/errors.hpp"
#include "sadiar/io_util.hpp"

namespace sadiar::io {

namespace {
constexpr char kMagic[8] = {'S', 'A', 'D', 'C', 'K', 'P', 'T', '\n'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.append(reinterpret_cast<char*>(b), 4);
}

uint32_t get_u32(const std::string& s, size_t off) {
  if (off + 4 > s.size()) throw DataError("checkpoint: truncated file");
  const unsigned char* b = reinterpret_cast<const unsigned char*>(s.data()) + off;
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
         uint32_t(b[3]) << 24;
}

size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "f64") return 8;
  throw DataError("checkpoint: unknown dtype '" + dtype + "'");
}
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format_version"] = kVersion;
  header["meta"] = ckpt.meta;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : ckpt.tensors) {
    nlohmann::json jt;
    jt["name"] = t.name;
    jt["dtype"] = t.dtype;
    jt["shape"] = t.shape;
    jt["bytes"] = t.bytes.size();
    if (t.bytes.size() % dtype_size(t.dtype) != 0)
      throw InternalError("checkpoint: blob size not a dtype multiple");
    tensors.push_back(std::move(jt));
  }
  header["tensors"] = std::move(tensors);
  const std::string hs = header.dump();

  std::string out;
  out.reserve(16 + hs.size() + 1024);
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(hs.size()));
  out += hs;
  for (const auto& t : ckpt.tensors)
    out.append(reinterpret_cast<const char*>(t.bytes.data()), t.bytes.size());
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string s = read_file(path);
  if (s.size() < 16 || std::memcmp(s.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("checkpoint: bad magic in '" + path + "'");
  const uint32_t version = get_u32(s, 8);
  if (version != kVersion)
    throw DataError("checkpoint: unsupported version " +
                    std::to_string(version));
  const uint32_t hlen = get_u32(s, 12);
  if (16 + size_t(hlen) > s.size())
    throw DataError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(s.substr(16, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad header json: ") + e.what());
  }
  Checkpoint ckpt;
  ckpt.meta = header.value("meta", nlohmann::json::object());
  size_t off = 16 + hlen;
  for (const auto& jt : header.at("tensors")) {
    CheckpointTensor t;
    t.name = jt.at("name").get<std::string>();
    t.dtype = jt.at("dtype").get<std::string>();
    t.shape = jt.at("shape").get<std::vector<long>>();
    const size_t nbytes = jt.at("bytes").get<size_t>();
    long n = 1;
    for (long d : t.shape) n *= d;
    if (nbytes != size_t(n) * dtype_size(t.dtype))
      throw DataError("checkpoint: blob size disagrees with shape for '" +
                      t.name + "'");
    if (off + nbytes > s.size())
      throw DataError("checkpoint: truncated blob for '" + t.name + "'");
    t.bytes.assign(s.begin() + off, s.begin() + off + nbytes);
    off += nbytes;
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace sadiar::io
