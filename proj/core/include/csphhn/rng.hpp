#ifndef CSPHHN_RNG_HPP_
#define CSPHHN_RNG_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace csphhn {

// One engine type everywhere so seeded runs reproduce on a given toolchain.
using Rng = std::mt19937_64;

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64(std::span<const double> values);

// Lower-case 16-digit hex of a 64-bit digest.
std::string hex_digest(std::uint64_t digest);

// Component seeds derive from the user seed plus a stable tag hash, so
// adding a new consumer never shifts the stream of an existing one.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  return seed + fnv1a64(tag);
}

inline Rng make_rng(std::uint64_t seed, std::string_view tag) {
  return Rng(derive_seed(seed, tag));
}

}  // namespace csphhn

#endif  // CSPHHN_RNG_HPP_
