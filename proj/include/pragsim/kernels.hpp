#pragma once
// Data-parallel inner loops shared by the regression engines.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. The active variant is chosen once at startup from the CPU feature
// bits; set PRAGSIM_ISA=scalar in the environment (or call set_isa) to force
// the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace pragsim::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

/// Best ISA this CPU supports (ignores the override).
Isa detect_isa();
/// ISA currently used by the dispatching entry points.
Isa active_isa();
/// Force an ISA. Requesting Avx2 on a CPU without it falls back to Scalar.
/// Returns the ISA actually selected.
Isa set_isa(Isa isa);

// Adds sum_r w_r * z_r z_r^T into the upper triangle (j >= i) of the
// dim x dim row-major buffer `gram`. `rows` is n x dim row-major. An empty
// `weights` span means unit weights. The lower triangle is left untouched.
void gram_upper(std::span<const double> rows, std::size_t dim,
                std::span<const double> weights, std::span<double> gram);

// Whitening for a continuous-time AR(1) correlation on sorted times:
//   out_0 = in_0,  out_j = (in_j - rho_j * in_{j-1}) * scale_j  (j >= 1)
// applied row-wise to an n x dim row-major block. rho[0] and scale[0] are
// ignored. `out` must not alias `in`.
void ar1_whiten(std::span<const double> in, std::size_t dim,
                std::span<const double> rho, std::span<const double> scale,
                std::span<double> out);

/// Copies the upper triangle into the lower one.
void symmetrize_upper(std::span<double> gram, std::size_t dim);

namespace scalar {
void gram_upper(std::span<const double> rows, std::size_t dim,
                std::span<const double> weights, std::span<double> gram);
void ar1_whiten(std::span<const double> in, std::size_t dim,
                std::span<const double> rho, std::span<const double> scale,
                std::span<double> out);
}  // namespace scalar

namespace avx2 {
// Only callable when detect_isa() == Isa::Avx2.
void gram_upper(std::span<const double> rows, std::size_t dim,
                std::span<const double> weights, std::span<double> gram);
void ar1_whiten(std::span<const double> in, std::size_t dim,
                std::span<const double> rho, std::span<const double> scale,
                std::span<double> out);
}  // namespace avx2

}  // namespace pragsim::kernels
