#pragma once
// Counter-based seeding. Every random stream is identified by a tuple
// (base seed, scenario, replicate, role) and seeded by hashing that tuple, so
// results never depend on scheduling order.

#include <cstdint>
#include <random>
#include <string_view>

namespace pragsim {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// FNV-1a over the bytes of `s`.
std::uint64_t hash_name(std::string_view s);

std::uint64_t stream_seed(std::uint64_t base_seed, std::uint64_t scenario,
                          std::uint64_t replicate, std::uint64_t role);

Rng make_stream(std::uint64_t base_seed, std::uint64_t scenario,
                std::uint64_t replicate, std::uint64_t role);

// Stream roles that are not derived from a method key.
namespace role {
inline constexpr std::uint64_t kDataset = 0x64617461ULL;   // "data"
inline constexpr std::uint64_t kOracle = 0x6f72636cULL;    // "orcl"
inline constexpr std::uint64_t kCohort = 0x636f6872ULL;    // "cohr"
}  // namespace role

}  // namespace pragsim
