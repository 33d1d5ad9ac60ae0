#pragma once

// Binary checkpoint of named (shape, row-major doubles) records. Values are
// written as raw IEEE-754 bytes so a save/load cycle is bit-exact.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "tcat/optim.hpp"
#include "tcat/tensor.hpp"

namespace tcat {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::vector<CheckpointRecord> records;

  const CheckpointRecord* find(const std::string& name) const {
    for (const auto& r : records)
      if (r.name == name) return &r;
    return nullptr;
  }

  void add(std::string name, Shape shape, std::vector<double> values) {
    records.push_back({std::move(name), std::move(shape), std::move(values)});
  }

  void add_scalar(std::string name, double v) { add(std::move(name), {1}, {v}); }

  double scalar(const std::string& name, double fallback) const {
    const CheckpointRecord* r = find(name);
    return r ? r->values.at(0) : fallback;
  }
};

namespace ckpt_detail {

constexpr char kMagic[4] = {'T', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

inline void write_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline std::uint64_t read_u64(std::istream& is) {
  char b[8];
  is.read(b, 8);
  if (!is) throw DataError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

}  // namespace ckpt_detail

inline void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("checkpoint: cannot open for write: " + path);
  os.write(ckpt_detail::kMagic, 4);
  ckpt_detail::write_u64(os, ckpt_detail::kVersion);
  ckpt_detail::write_u64(os, ck.records.size());
  for (const auto& r : ck.records) {
    ckpt_detail::write_u64(os, r.name.size());
    os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    ckpt_detail::write_u64(os, r.shape.size());
    for (auto d : r.shape) ckpt_detail::write_u64(os, d);
    if (shape_numel(r.shape) != r.values.size())
      throw DataError("checkpoint: record " + r.name + " shape/value mismatch");
    os.write(reinterpret_cast<const char*>(r.values.data()),
             static_cast<std::streamsize>(r.values.size() * sizeof(double)));
  }
  if (!os) throw DataError("checkpoint: write failed: " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, ckpt_detail::kMagic, 4) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  std::uint64_t version = ckpt_detail::read_u64(is);
  if (version != ckpt_detail::kVersion)
    throw DataError("checkpoint: unsupported format version " + std::to_string(version));
  std::uint64_t count = ckpt_detail::read_u64(is);
  Checkpoint ck;
  ck.records.reserve(count);
  for (std::uint64_t r = 0; r < count; ++r) {
    CheckpointRecord rec;
    std::uint64_t name_len = ckpt_detail::read_u64(is);
    rec.name.resize(name_len);
    is.read(rec.name.data(), static_cast<std::streamsize>(name_len));
    std::uint64_t ndim = ckpt_detail::read_u64(is);
    rec.shape.resize(ndim);
    for (auto& d : rec.shape) d = ckpt_detail::read_u64(is);
    rec.values.resize(shape_numel(rec.shape));
    is.read(reinterpret_cast<char*>(rec.values.data()),
            static_cast<std::streamsize>(rec.values.size() * sizeof(double)));
    if (!is) throw DataError("checkpoint: truncated record in " + path);
    ck.records.push_back(std::move(rec));
  }
  return ck;
}

inline void checkpoint_put_params(Checkpoint& ck, const NamedParams& params) {
  for (const auto& [name, t] : params) ck.add(name, t.shape(), t.values());
}

// Loads values into existing parameters by name; unknown or missing names
// and shape mismatches are errors.
inline void checkpoint_load_params(const Checkpoint& ck, NamedParams& params) {
  for (auto& [name, t] : params) {
    const CheckpointRecord* r = ck.find(name);
    if (!r) throw DataError("checkpoint: missing parameter " + name);
    if (r->shape != t.shape())
      throw DataError("checkpoint: shape mismatch for " + name + ": file " + shape_str(r->shape) +
                      " vs model " + shape_str(t.shape()));
    t.mutable_values() = r->values;
  }
}

inline void checkpoint_put_adam(Checkpoint& ck, const AdamState& st, const NamedParams& params) {
  ck.add_scalar("opt.step", static_cast<double>(st.step));
  if (st.m.empty()) return;
  for (std::size_t i = 0; i < params.size(); ++i) {
    ck.add("opt.m." + params[i].first, params[i].second.shape(), st.m[i]);
    ck.add("opt.v." + params[i].first, params[i].second.shape(), st.v[i]);
  }
}

inline void checkpoint_load_adam(const Checkpoint& ck, AdamState& st, const NamedParams& params) {
  st.step = static_cast<long>(ck.scalar("opt.step", 0.0));
  st.m.clear();
  st.v.clear();
  if (!ck.find("opt.m." + (params.empty() ? std::string() : params[0].first))) return;
  st.m.resize(params.size());
  st.v.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const CheckpointRecord* m = ck.find("opt.m." + params[i].first);
    const CheckpointRecord* v = ck.find("opt.v." + params[i].first);
    if (!m || !v) throw DataError("checkpoint: incomplete optimizer state for " + params[i].first);
    st.m[i] = m->values;
    st.v[i] = v->values;
  }
}

}  // namespace tcat
