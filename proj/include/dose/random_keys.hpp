#pragma once
// Order-independent randomness.
//
// Every random quantity the selection needs is a pure function of
// (seed, domain tag, item id), computed with a 128-bit BLAKE2b digest. The
// same subset therefore comes out regardless of record order, thread count or
// platform. Sequential generators (for synthetic corpora) use mt19937_64 plus
// our own bit-to-double conversions, since the std distributions are not
// portable across standard library implementations.

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>

namespace dose {

using Digest128 = std::array<std::uint8_t, 16>;

Digest128 hash128(std::uint64_t seed, std::string_view tag, std::string_view id);

// Uniform variate in (0, 1]: top 53 bits of the digest, plus one, over 2^53.
double uniform_key(std::uint64_t seed, std::string_view tag, std::string_view id);

// Independent child seed for a named sub-stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

// Hex string of a BLAKE2b-128 digest of a whole byte stream (input content hashes).
class ContentHasher {
 public:
  ContentHasher();
  ~ContentHasher();
  ContentHasher(const ContentHasher&) = delete;
  ContentHasher& operator=(const ContentHasher&) = delete;

  void update(std::string_view bytes);
  std::string hex_digest();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // (0, 1]
  double uniform_open_low() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }
  double normal();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dose
