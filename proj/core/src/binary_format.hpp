#pragma once

// Shared container for the HNDA1/HNDW1 binary formats: a 5-byte magic, a
// little-endian u64 header length, a JSON header describing the payload
// fields, then tightly packed little-endian float32 arrays in row-major
// order.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace handfit::detail {

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t read_u64_le(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline void write_f32_le(std::vector<unsigned char>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  out.push_back(static_cast<unsigned char>(bits & 0xff));
  out.push_back(static_cast<unsigned char>((bits >> 8) & 0xff));
  out.push_back(static_cast<unsigned char>((bits >> 16) & 0xff));
  out.push_back(static_cast<unsigned char>((bits >> 24) & 0xff));
}

inline float read_f32_le(const unsigned char* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

struct ChunkFile {
  nlohmann::json header;
  std::vector<unsigned char> payload;
};

inline void write_chunk_file(const std::string& path, const std::string& magic,
                             const nlohmann::json& header,
                             const std::vector<unsigned char>& payload) {
  if (magic.size() != 5) throw std::logic_error("magic must be 5 bytes");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write(magic.data(), 5);
  const std::string h = header.dump();
  write_u64_le(os, h.size());
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size()));
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline ChunkFile read_chunk_file(const std::string& path, const std::string& magic) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char got[5];
  is.read(got, 5);
  if (!is || std::string(got, 5) != magic)
    throw std::runtime_error("bad magic in " + path + " (expected " + magic + ")");
  const std::uint64_t hlen = read_u64_le(is);
  if (!is || hlen > (1ull << 30)) throw std::runtime_error("corrupt header length in " + path);
  std::string h(hlen, '\0');
  is.read(h.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw std::runtime_error("truncated header in " + path);
  ChunkFile out;
  out.header = nlohmann::json::parse(h);
  out.payload.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
  return out;
}

// Row-major append of an Eigen matrix as float32.
template <typename Derived>
void append_matrix(std::vector<unsigned char>& payload, const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      write_f32_le(payload, static_cast<float>(m(r, c)));
}

inline void read_matrix(const std::vector<unsigned char>& payload, std::size_t& cursor,
                        Eigen::Ref<Eigen::MatrixXd> out) {
  const std::size_t need = static_cast<std::size_t>(out.rows()) * out.cols() * 4;
  if (cursor + need > payload.size()) throw std::runtime_error("payload truncated");
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      out(r, c) = static_cast<double>(read_f32_le(payload.data() + cursor));
      cursor += 4;
    }
}

}  // namespace handfit::detail
