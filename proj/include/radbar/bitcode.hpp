#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radbar/error.hpp"

namespace radbar {

enum class CodeKind { Cnnc, Rbc };

/// Where the real-valued vector behind a CNNC came from.
enum class ActivationSource { Fallback, External };

std::string to_string(CodeKind kind);
std::string to_string(ActivationSource source);
ActivationSource parse_activation_source(std::string_view text);

/// Generation parameters recorded on every code. RBC codes use image_side and
/// angle_count; CNNC codes use dimension and source.
struct CodeConfig {
  std::size_t image_side = 0;
  std::size_t angle_count = 0;
  std::size_t dimension = 0;
  ActivationSource source = ActivationSource::Fallback;

  bool operator==(const CodeConfig&) const = default;
};

/// Fixed-length bit string. Bit i lives in word i / 64 at bit position
/// 63 - i % 64, so the words read most-significant-bit first, matching the
/// hex serialization.
class BitCode {
 public:
  BitCode() = default;

  /// `bits` holds one 0/1 value per position.
  static BitCode from_bits(std::span<const std::uint8_t> bits, CodeKind kind, CodeConfig config = {});
  /// Throws InvalidInput on non-hex characters, wrong hex length or non-zero
  /// tail padding.
  static BitCode from_hex(std::string_view hex, std::size_t length, CodeKind kind, CodeConfig config = {});

  std::size_t length() const { return length_; }
  CodeKind kind() const { return kind_; }
  const CodeConfig& config() const { return config_; }
  std::span<const std::uint64_t> words() const { return words_; }

  bool bit(std::size_t i) const { return (words_[i / 64] >> (63 - i % 64)) & 1u; }
  std::size_t count_ones() const;

  /// Lowercase hex, MSB-first within each byte, zero-padded tail.
  std::string to_hex() const;
  /// "0110..." for diagnostics and tests.
  std::string to_bit_string() const;
  BitCode complement() const;

  bool operator==(const BitCode&) const = default;

 private:
  std::vector<std::uint64_t> words_;
  std::size_t length_ = 0;
  CodeKind kind_ = CodeKind::Cnnc;
  CodeConfig config_;
};

constexpr std::size_t words_for_bits(std::size_t bits) { return (bits + 63) / 64; }

/// Number of differing positions. Throws InvalidInput on length or kind
/// mismatch.
std::uint32_t hamming(const BitCode& a, const BitCode& b);

}  // namespace radbar
