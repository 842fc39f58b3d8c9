#include "marl/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace marl::nn {

namespace {

constexpr char kMagic[8] = {'M', 'A', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return value;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const uint64_t len = read_pod<uint64_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

}  // namespace

void Checkpoint::put_tensor(const std::string& name, const Matrix& value) {
  if (has(name)) throw std::invalid_argument("checkpoint: duplicate entry " + name);
  index_[name] = entries_.size();
  entries_.push_back({Entry::Kind::tensor, name, value, {}});
}

void Checkpoint::put_text(const std::string& name, const std::string& value) {
  if (has(name)) throw std::invalid_argument("checkpoint: duplicate entry " + name);
  index_[name] = entries_.size();
  entries_.push_back({Entry::Kind::text, name, {}, value});
}

const Checkpoint::Entry& Checkpoint::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("checkpoint: missing entry " + name);
  return entries_[it->second];
}

const Matrix& Checkpoint::tensor(const std::string& name) const {
  const Entry& e = find(name);
  if (e.kind != Entry::Kind::tensor) throw std::invalid_argument("checkpoint: " + name + " is not a tensor");
  return e.tensor;
}

const std::string& Checkpoint::text(const std::string& name) const {
  const Entry& e = find(name);
  if (e.kind != Entry::Kind::text) throw std::invalid_argument("checkpoint: " + name + " is not text");
  return e.text;
}

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) out.push_back(e.name);
  return out;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_pod<uint32_t>(out, kVersion);
  write_pod<uint64_t>(out, entries_.size());
  for (const Entry& e : entries_) {
    write_pod<uint8_t>(out, static_cast<uint8_t>(e.kind));
    write_string(out, e.name);
    if (e.kind == Entry::Kind::tensor) {
      write_pod<uint64_t>(out, static_cast<uint64_t>(e.tensor.rows()));
      write_pod<uint64_t>(out, static_cast<uint64_t>(e.tensor.cols()));
      out.write(reinterpret_cast<const char*>(e.tensor.data()),
                static_cast<std::streamsize>(sizeof(Scalar) * e.tensor.size()));
    } else {
      write_string(out, e.text);
    }
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  const uint32_t version = read_pod<uint32_t>(in);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const uint64_t count = read_pod<uint64_t>(in);
  Checkpoint ckpt;
  for (uint64_t i = 0; i < count; ++i) {
    const auto kind = static_cast<Entry::Kind>(read_pod<uint8_t>(in));
    std::string name = read_string(in);
    if (kind == Entry::Kind::tensor) {
      const auto rows = static_cast<Index>(read_pod<uint64_t>(in));
      const auto cols = static_cast<Index>(read_pod<uint64_t>(in));
      Matrix m(rows, cols);
      in.read(reinterpret_cast<char*>(m.data()),
              static_cast<std::streamsize>(sizeof(Scalar) * m.size()));
      if (!in) throw std::runtime_error("checkpoint: truncated tensor " + name);
      ckpt.put_tensor(name, m);
    } else {
      ckpt.put_text(name, read_string(in));
    }
  }
  return ckpt;
}

}  // namespace marl::nn
