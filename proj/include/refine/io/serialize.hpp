#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "refine/core/errors.hpp"
#include "refine/nn/layers.hpp"

namespace refine::io {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) throw IngestionError("truncated checkpoint");
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw IngestionError("truncated checkpoint string");
  return s;
}

inline void write_floats(std::ostream& out, const std::vector<float>& v) {
  write_u32(out, static_cast<std::uint32_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}

inline std::vector<float> read_floats(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::vector<float> v(n);
  if (n && !in.read(reinterpret_cast<char*>(v.data()),
                    static_cast<std::streamsize>(n * sizeof(float)))) {
    throw IngestionError("truncated checkpoint blob");
  }
  return v;
}

// Named parameter blobs in declaration order (buffers included).
inline void write_params(std::ostream& out, std::vector<nn::ParamView> params) {
  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    write_string(out, p.name);
    write_floats(out, *p.value);
  }
}

inline void read_params(std::istream& in, std::vector<nn::ParamView> params) {
  const std::uint32_t n = read_u32(in);
  if (n != params.size()) throw IngestionError("checkpoint parameter count mismatch");
  for (auto& p : params) {
    const std::string name = read_string(in);
    if (name != p.name) throw IngestionError("checkpoint parameter order mismatch at " + name);
    std::vector<float> blob = read_floats(in);
    if (blob.size() != p.value->size()) {
      throw IngestionError("checkpoint blob size mismatch for " + name);
    }
    *p.value = std::move(blob);
  }
}

// Serialized parameter bytes, used by the frozen-model contract check.
inline std::string param_fingerprint(std::vector<nn::ParamView> params) {
  std::string bytes;
  for (const auto& p : params) {
    bytes.append(reinterpret_cast<const char*>(p.value->data()), p.value->size() * sizeof(float));
  }
  return bytes;
}

}  // namespace refine::io
