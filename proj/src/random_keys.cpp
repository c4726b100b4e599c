#include "dose/random_keys.hpp"

#include <sodium.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dose {
namespace {

void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium initialisation failed");
}

std::uint64_t load_le64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

Digest128 hash128(std::uint64_t seed, std::string_view tag, std::string_view id) {
  ensure_sodium();
  // seed (8 bytes LE) | tag length (1 byte) | tag | id
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, 16);
  std::uint8_t head[9];
  for (int i = 0; i < 8; ++i) head[i] = static_cast<std::uint8_t>(seed >> (8 * i));
  head[8] = static_cast<std::uint8_t>(tag.size() & 0xff);
  crypto_generichash_update(&st, head, sizeof head);
  crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(tag.data()), tag.size());
  crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(id.data()), id.size());
  Digest128 out{};
  crypto_generichash_final(&st, out.data(), out.size());
  return out;
}

double uniform_key(std::uint64_t seed, std::string_view tag, std::string_view id) {
  const auto d = hash128(seed, tag, id);
  const std::uint64_t bits = load_le64(d.data()) >> 11;
  return static_cast<double>(bits + 1) * 0x1.0p-53;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  const auto d = hash128(seed, "derive", tag);
  return load_le64(d.data());
}

struct ContentHasher::State {
  crypto_generichash_state st;
};

ContentHasher::ContentHasher() : state_(std::make_unique<State>()) {
  ensure_sodium();
  crypto_generichash_init(&state_->st, nullptr, 0, 16);
}

ContentHasher::~ContentHasher() = default;

void ContentHasher::update(std::string_view bytes) {
  crypto_generichash_update(&state_->st, reinterpret_cast<const unsigned char*>(bytes.data()),
                            bytes.size());
}

std::string ContentHasher::hex_digest() {
  std::uint8_t out[16];
  crypto_generichash_final(&state_->st, out, sizeof out);
  std::string hex(32, '0');
  sodium_bin2hex(hex.data(), hex.size() + 1, out, sizeof out);
  return hex;
}

double PortableRng::normal() {
  // Marsaglia polar method.
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::uint64_t PortableRng::below(std::uint64_t n) {
  // Rejection sampling for an unbiased result.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

}  // namespace dose
