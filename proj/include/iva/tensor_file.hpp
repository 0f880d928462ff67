// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IVA_TENSOR_FILE_HPP
#define IVA_TENSOR_FILE_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "iva/errors.hpp"

namespace iva {

// Container shared by weight files, separation-state checkpoints and RIR
// banks: a line-oriented text manifest naming each tensor (dtype and shape),
// then the raw little-endian payloads in manifest order.
//
//   IVATF 1
//   meta <key> <value>
//   tensor <name> <f32|f64> <ndim> <d0> <d1> ...
//   end
//   <payload bytes>
struct TensorEntry {
  std::string name;
  bool f64 = false;
  std::vector<std::int64_t> dims;
  std::vector<double> data;

  std::int64_t element_count() const {
    std::int64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

struct TensorFile {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<TensorEntry> tensors;

  const std::string* find_meta(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return &v;
    return nullptr;
  }

  std::int64_t meta_int(const std::string& key) const {
    const std::string* v = find_meta(key);
    if (!v) throw format_error("tensor file: missing meta key " + key);
    return std::stoll(*v);
  }

  const TensorEntry* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
};

namespace detail {

template <typename T>
void append_le(std::string& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T take_le(const unsigned char* p) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace detail

inline void write_tensor_file(const std::string& path, const TensorFile& tf) {
  std::ostringstream head;
  head << "IVATF 1\n";
  for (const auto& [k, v] : tf.meta) head << "meta " << k << ' ' << v << '\n';
  for (const auto& t : tf.tensors) {
    head << "tensor " << t.name << ' ' << (t.f64 ? "f64" : "f32") << ' '
         << t.dims.size();
    for (auto d : t.dims) head << ' ' << d;
    head << '\n';
  }
  head << "end\n";

  std::string payload;
  for (const auto& t : tf.tensors) {
    if (static_cast<std::int64_t>(t.data.size()) != t.element_count())
      throw format_error("tensor file: data size does not match dims for " +
                         t.name);
    for (double v : t.data) {
      if (t.f64)
        detail::append_le<double>(payload, v);
      else
        detail::append_le<float>(payload, static_cast<float>(v));
    }
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw format_error("tensor file: cannot write " + path);
  const std::string h = head.str();
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

inline TensorFile read_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("tensor file: cannot open " + path);
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());

  TensorFile tf;
  size_t pos = 0;
  bool saw_end = false;
  auto next_line = [&]() -> std::string {
    size_t eol = pos;
    while (eol < raw.size() && raw[eol] != '\n') ++eol;
    if (eol >= raw.size())
      throw format_error("tensor file: unterminated manifest in " + path);
    std::string line(reinterpret_cast<const char*>(raw.data() + pos),
                     eol - pos);
    pos = eol + 1;
    return line;
  };

  std::string magic = next_line();
  if (magic != "IVATF 1")
    throw format_error("tensor file: bad magic or version in " + path);
  while (pos < raw.size()) {
    std::string line = next_line();
    if (line == "end") {
      saw_end = true;
      break;
    }
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string k, v;
      ls >> k;
      std::getline(ls, v);
      if (!v.empty() && v.front() == ' ') v.erase(0, 1);
      tf.meta.emplace_back(k, v);
    } else if (kind == "tensor") {
      TensorEntry t;
      std::string dtype;
      size_t ndim = 0;
      ls >> t.name >> dtype >> ndim;
      if (!ls || (dtype != "f32" && dtype != "f64"))
        throw format_error("tensor file: bad tensor line: " + line);
      t.f64 = dtype == "f64";
      t.dims.resize(ndim);
      for (size_t i = 0; i < ndim; ++i) ls >> t.dims[i];
      if (!ls) throw format_error("tensor file: bad tensor dims: " + line);
      for (auto d : t.dims)
        if (d <= 0) throw format_error("tensor file: nonpositive dim: " + line);
      tf.tensors.push_back(std::move(t));
    } else {
      throw format_error("tensor file: unknown manifest entry: " + line);
    }
  }
  if (!saw_end) throw format_error("tensor file: missing end marker in " + path);

  for (auto& t : tf.tensors) {
    const size_t bytes_per = t.f64 ? 8 : 4;
    const size_t need = static_cast<size_t>(t.element_count()) * bytes_per;
    if (pos + need > raw.size())
      throw format_error("tensor file: truncated payload for " + t.name);
    t.data.resize(static_cast<size_t>(t.element_count()));
    for (size_t i = 0; i < t.data.size(); ++i) {
      const unsigned char* p = raw.data() + pos + i * bytes_per;
      t.data[i] = t.f64 ? detail::take_le<double>(p)
                        : static_cast<double>(detail::take_le<float>(p));
    }
    pos += need;
  }
  if (pos != raw.size())
    throw format_error("tensor file: trailing bytes in " + path);
  return tf;
}

}  // namespace iva

#endif  // IVA_TENSOR_FILE_HPP
