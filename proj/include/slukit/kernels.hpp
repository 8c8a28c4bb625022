#pragma once

// Dense GEMM kernels behind every matmul-shaped op.
//
// Each kernel exists twice: `serial` is the reference loop nest, `parallel`
// splits the *output rows* across OpenMP threads. Every output element is
// reduced in the same order in both, so results are bitwise identical for
// any thread count. `gemm*` in the outer namespace dispatches between them.
//
// All matrices are row-major and densely packed. `accumulate` adds into C
// instead of overwriting it.

#include <cstddef>
#include <span>

namespace slukit::kernels {

struct GemmDims {
  std::size_t m;  // rows of op(A) and C
  std::size_t k;  // shared extent
  std::size_t n;  // cols of op(B) and C
};

namespace serial {
// C[m×n] (+)= A[m×k] · B[k×n]
void gemm_nn(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
// C[m×n] (+)= A[m×k] · B[n×k]ᵀ
void gemm_nt(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
// C[m×n] (+)= A[k×m]ᵀ · B[k×n]
void gemm_tn(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
}  // namespace serial

namespace parallel {
void gemm_nn(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
void gemm_nt(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
void gemm_tn(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
}  // namespace parallel

// Work (m·k·n) below which dispatch stays serial; thread startup dominates.
inline constexpr std::size_t kParallelThreshold = 1u << 18;

void gemm_nn(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
void gemm_nt(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
void gemm_tn(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);

// Number of threads the parallel kernels would use (1 without OpenMP).
int max_threads();

}  // namespace slukit::kernels
