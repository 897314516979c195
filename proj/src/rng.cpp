#include "pragsim/rng.hpp"

namespace pragsim {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_name(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t stream_seed(std::uint64_t base_seed, std::uint64_t scenario,
                          std::uint64_t replicate, std::uint64_t role) {
  std::uint64_t h = splitmix64(base_seed);
  h = splitmix64(h ^ scenario);
  h = splitmix64(h ^ replicate);
  h = splitmix64(h ^ role);
  return h;
}

Rng make_stream(std::uint64_t base_seed, std::uint64_t scenario,
                std::uint64_t replicate, std::uint64_t role) {
  return Rng(stream_seed(base_seed, scenario, replicate, role));
}

}  // namespace pragsim
