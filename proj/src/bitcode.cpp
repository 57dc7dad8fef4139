#include "radbar/bitcode.hpp"

#include <bit>

namespace radbar {

std::string to_string(CodeKind kind) { return kind == CodeKind::Cnnc ? "cnnc" : "rbc"; }

std::string to_string(ActivationSource source) {
  return source == ActivationSource::Fallback ? "fallback" : "external";
}

ActivationSource parse_activation_source(std::string_view text) {
  if (text == "fallback") return ActivationSource::Fallback;
  if (text == "external") return ActivationSource::External;
  throw InvalidInput("unknown activation source '" + std::string(text) + "'");
}

BitCode BitCode::from_bits(std::span<const std::uint8_t> bits, CodeKind kind, CodeConfig config) {
  BitCode code;
  code.length_ = bits.size();
  code.kind_ = kind;
  code.config_ = config;
  code.words_.assign(words_for_bits(bits.size()), 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) code.words_[i / 64] |= std::uint64_t{1} << (63 - i % 64);
  }
  return code;
}

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

}  // namespace

BitCode BitCode::from_hex(std::string_view hex, std::size_t length, CodeKind kind, CodeConfig config) {
  const std::size_t bytes = (length + 7) / 8;
  if (hex.size() != bytes * 2) {
    throw InvalidInput("hex string has " + std::to_string(hex.size()) + " digits, expected " +
                       std::to_string(bytes * 2) + " for " + std::to_string(length) + " bits");
  }
  BitCode code;
  code.length_ = length;
  code.kind_ = kind;
  code.config_ = config;
  code.words_.assign(words_for_bits(length), 0);
  for (std::size_t b = 0; b < bytes; ++b) {
    const int hi = hex_value(hex[2 * b]);
    const int lo = hex_value(hex[2 * b + 1]);
    if (hi < 0 || lo < 0) throw InvalidInput("invalid hex digit in code");
    const auto byte = static_cast<std::uint64_t>(hi * 16 + lo);
    code.words_[b / 8] |= byte << ((7 - b % 8) * 8);
  }
  if (length % 64 != 0 && !code.words_.empty()) {
    const std::uint64_t tail_mask = ~std::uint64_t{0} >> (length % 64);
    if (code.words_.back() & tail_mask) throw InvalidInput("non-zero padding bits in hex code");
  }
  return code;
}

std::size_t BitCode::count_ones() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::string BitCode::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  const std::size_t bytes = (length_ + 7) / 8;
  std::string out;
  out.reserve(bytes * 2);
  for (std::size_t b = 0; b < bytes; ++b) {
    const auto byte = static_cast<unsigned>((words_[b / 8] >> ((7 - b % 8) * 8)) & 0xffu);
    out.push_back(kDigits[byte >> 4]);
    out.push_back(kDigits[byte & 0xf]);
  }
  return out;
}

std::string BitCode::to_bit_string() const {
  std::string out(length_, '0');
  for (std::size_t i = 0; i < length_; ++i) {
    if (bit(i)) out[i] = '1';
  }
  return out;
}

BitCode BitCode::complement() const {
  BitCode out = *this;
  for (auto& w : out.words_) w = ~w;
  if (length_ % 64 != 0 && !out.words_.empty()) {
    out.words_.back() &= ~(~std::uint64_t{0} >> (length_ % 64));
  }
  return out;
}

std::uint32_t hamming(const BitCode& a, const BitCode& b) {
  if (a.kind() != b.kind()) {
    throw InvalidInput("cannot compare a " + to_string(a.kind()) + " code with a " + to_string(b.kind()) + " code");
  }
  if (a.length() != b.length()) {
    throw InvalidInput("code length mismatch: " + std::to_string(a.length()) + " vs " + std::to_string(b.length()));
  }
  std::uint32_t d = 0;
  const auto wa = a.words();
  const auto wb = b.words();
  for (std::size_t k = 0; k < wa.size(); ++k) d += static_cast<std::uint32_t>(std::popcount(wa[k] ^ wb[k]));
  return d;
}

}  // namespace radbar
