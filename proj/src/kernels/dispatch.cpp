#include <atomic>
#include <cstdlib>
#include <string>

#include "pragsim/kernels.hpp"

namespace pragsim::kernels {

#ifndef PRAGSIM_HAVE_AVX2
namespace avx2 {
void gram_upper(std::span<const double> rows, std::size_t dim,
                std::span<const double> weights, std::span<double> gram) {
  scalar::gram_upper(rows, dim, weights, gram);
}
void ar1_whiten(std::span<const double> in, std::size_t dim,
                std::span<const double> rho, std::span<const double> scale,
                std::span<double> out) {
  scalar::ar1_whiten(in, dim, rho, scale, out);
}
}  // namespace avx2
#endif

namespace {

Isa initial_isa() {
  Isa best = detect_isa();
  if (const char* env = std::getenv("PRAGSIM_ISA")) {
    if (std::string(env) == "scalar") return Isa::Scalar;
  }
  return best;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  return isa == Isa::Avx2 ? "avx2" : "scalar";
}

Isa detect_isa() {
#if defined(PRAGSIM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool has = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return has ? Isa::Avx2 : Isa::Scalar;
#else
  return Isa::Scalar;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

Isa set_isa(Isa isa) {
  if (isa == Isa::Avx2 && detect_isa() != Isa::Avx2) isa = Isa::Scalar;
  current().store(isa, std::memory_order_relaxed);
  return isa;
}

void gram_upper(std::span<const double> rows, std::size_t dim,
                std::span<const double> weights, std::span<double> gram) {
  if (active_isa() == Isa::Avx2)
    avx2::gram_upper(rows, dim, weights, gram);
  else
    scalar::gram_upper(rows, dim, weights, gram);
}

void ar1_whiten(std::span<const double> in, std::size_t dim,
                std::span<const double> rho, std::span<const double> scale,
                std::span<double> out) {
  if (active_isa() == Isa::Avx2)
    avx2::ar1_whiten(in, dim, rho, scale, out);
  else
    scalar::ar1_whiten(in, dim, rho, scale, out);
}

void symmetrize_upper(std::span<double> gram, std::size_t dim) {
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = i + 1; j < dim; ++j) gram[j * dim + i] = gram[i * dim + j];
}

}  // namespace pragsim::kernels
