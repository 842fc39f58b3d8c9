#pragma once

#include "marl/common.hpp"

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace marl::nn {

/// Flat, insertion-ordered container of named tensors and text blobs with a
/// versioned binary file form. Tensor payloads are raw doubles, so a
/// save/load cycle is bit-exact.
class Checkpoint {
 public:
  void put_tensor(const std::string& name, const Matrix& value);
  void put_text(const std::string& name, const std::string& value);

  bool has(const std::string& name) const { return index_.count(name) > 0; }
  const Matrix& tensor(const std::string& name) const;
  const std::string& text(const std::string& name) const;
  std::vector<std::string> names() const;
  size_t size() const { return entries_.size(); }

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  struct Entry {
    enum class Kind : uint8_t { tensor = 0, text = 1 };
    Kind kind;
    std::string name;
    Matrix tensor;
    std::string text;
  };

  const Entry& find(const std::string& name) const;

  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace marl::nn
