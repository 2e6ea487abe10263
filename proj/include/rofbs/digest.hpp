#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

namespace rofbs {

// Incremental SHA-256, hex-encoded output.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t len);
  std::string finish_hex();

 private:
  void* ctx_;
};

std::string sha256_hex(const std::string& data);

// Empty optional when the file cannot be opened or read.
std::optional<std::string> sha256_file(const std::string& path);

}  // namespace rofbs
