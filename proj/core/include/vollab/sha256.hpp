#pragma once
// SHA-256, used for content-addressed run directories and input-file hashes
// recorded in manifests. Self-contained so artifact hashing never depends on
// an external crypto library.

#include <cstdint>
#include <string>

namespace vollab {

class Sha256 {
 public:
  Sha256();
  void update(const void* data, std::size_t len);
  void update(const std::string& s) { update(s.data(), s.size()); }
  // Finalizes and returns the lowercase hex digest; the object is spent.
  std::string hex_digest();

 private:
  void process_block(const std::uint8_t* block);

  std::uint32_t h_[8];
  std::uint8_t buffer_[64];
  std::size_t buffer_len_ = 0;
  std::uint64_t total_bits_ = 0;
};

std::string sha256_hex(const std::string& data);
std::string sha256_file_hex(const std::string& path);

}  // namespace vollab
