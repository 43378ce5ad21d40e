#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "morai/errors.hpp"
#include "morai/nn/tensor.hpp"

namespace morai::nn {

// Weights container:
//   u8  version (1)
//   4   magic "MRAI"
//   u32 header length, then that many bytes of JSON (layer specs and model settings)
//   u64 value count, then the values as little-endian IEEE-754 doubles, tensors in order
inline constexpr std::uint8_t kWeightsVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint64_t get_le(const std::string& in, std::size_t& pos, int bytes) {
  if (pos + static_cast<std::size_t>(bytes) > in.size()) throw FormatError("weights file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += static_cast<std::size_t>(bytes);
  return v;
}

}  // namespace detail

inline std::string encode_weights(const nlohmann::json& header, const std::vector<const Tensor*>& tensors) {
  std::string out;
  out.push_back(static_cast<char>(kWeightsVersion));
  out += "MRAI";
  const std::string h = header.dump();
  detail::put_u32(out, static_cast<std::uint32_t>(h.size()));
  out += h;
  std::uint64_t n = 0;
  for (const Tensor* t : tensors) n += t->size();
  detail::put_u64(out, n);
  for (const Tensor* t : tensors)
    for (double v : t->values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      detail::put_u64(out, bits);
    }
  return out;
}

struct DecodedWeights {
  nlohmann::json header;
  std::vector<double> values;

  /// Copies the flat values into `tensors` (whose shapes must already be set).
  void assign_to(const std::vector<Tensor*>& tensors) const {
    std::size_t need = 0;
    for (const Tensor* t : tensors) need += t->size();
    if (need != values.size())
      throw FormatError("weights file holds " + std::to_string(values.size()) + " values, model needs " +
                        std::to_string(need));
    std::size_t pos = 0;
    for (Tensor* t : tensors) {
      std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), t->size(), t->values.begin());
      pos += t->size();
    }
  }
};

inline DecodedWeights decode_weights(const std::string& bytes) {
  if (bytes.empty()) throw FormatError("weights file is empty");
  if (static_cast<std::uint8_t>(bytes[0]) != kWeightsVersion)
    throw FormatError("unsupported weights version " + std::to_string(static_cast<unsigned char>(bytes[0])));
  if (bytes.size() < 5 || bytes.compare(1, 4, "MRAI") != 0) throw FormatError("not a weights file");
  std::size_t pos = 5;
  const auto hlen = detail::get_le(bytes, pos, 4);
  if (pos + hlen > bytes.size()) throw FormatError("weights header truncated");
  DecodedWeights d;
  try {
    d.header = nlohmann::json::parse(bytes.substr(pos, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad weights header: ") + e.what());
  }
  pos += hlen;
  const auto n = detail::get_le(bytes, pos, 8);
  if ((bytes.size() - pos) / 8 != n || (bytes.size() - pos) % 8 != 0) throw FormatError("weights payload size mismatch");
  d.values.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint64_t bits = detail::get_le(bytes, pos, 8);
    std::memcpy(&d.values[i], &bits, sizeof bits);
  }
  return d;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace morai::nn
