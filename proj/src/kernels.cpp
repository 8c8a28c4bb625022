#include "slukit/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace slukit::kernels {
namespace {

// Row bodies shared by both variants; sharing them is what keeps the
// reduction order (and therefore the bits) identical.

inline void row_nn(std::size_t i, GemmDims d, const double* a, const double* b,
                   double* c, bool accumulate) {
  double* crow = c + i * d.n;
  if (!accumulate) std::fill(crow, crow + d.n, 0.0);
  const double* arow = a + i * d.k;
  for (std::size_t p = 0; p < d.k; ++p) {
    const double aip = arow[p];
    const double* brow = b + p * d.n;
    for (std::size_t j = 0; j < d.n; ++j) crow[j] += aip * brow[j];
  }
}

inline void row_tn(std::size_t i, GemmDims d, const double* a, const double* b,
                   double* c, bool accumulate) {
  double* crow = c + i * d.n;
  if (!accumulate) std::fill(crow, crow + d.n, 0.0);
  for (std::size_t p = 0; p < d.k; ++p) {
    const double api = a[p * d.m + i];
    const double* brow = b + p * d.n;
    for (std::size_t j = 0; j < d.n; ++j) crow[j] += api * brow[j];
  }
}

// B[rows×cols] -> Bᵀ. The nt product runs as an nn product over Bᵀ so the
// inner loop stays contiguous.
std::vector<double> transposed(std::span<const double> b, std::size_t rows,
                               std::size_t cols) {
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = b[i * cols + j];
  return out;
}

using RowFn = void (*)(std::size_t, GemmDims, const double*, const double*,
                       double*, bool);

void run_serial(RowFn fn, GemmDims d, std::span<const double> a,
                std::span<const double> b, std::span<double> c,
                bool accumulate) {
  for (std::size_t i = 0; i < d.m; ++i)
    fn(i, d, a.data(), b.data(), c.data(), accumulate);
}

void run_parallel(RowFn fn, GemmDims d, std::span<const double> a,
                  std::span<const double> b, std::span<double> c,
                  bool accumulate) {
  const auto rows = static_cast<long long>(d.m);
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < rows; ++i)
    fn(static_cast<std::size_t>(i), d, pa, pb, pc, accumulate);
}

bool worth_parallel(GemmDims d) {
  return d.m > 1 && d.m * d.k * d.n >= kParallelThreshold && max_threads() > 1;
}

}  // namespace

namespace serial {
void gemm_nn(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  run_serial(row_nn, d, a, b, c, accumulate);
}
void gemm_nt(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  const auto bt = transposed(b, d.n, d.k);
  run_serial(row_nn, d, a, bt, c, accumulate);
}
void gemm_tn(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  run_serial(row_tn, d, a, b, c, accumulate);
}
}  // namespace serial

namespace parallel {
void gemm_nn(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  run_parallel(row_nn, d, a, b, c, accumulate);
}
void gemm_nt(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  const auto bt = transposed(b, d.n, d.k);
  run_parallel(row_nn, d, a, bt, c, accumulate);
}
void gemm_tn(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  run_parallel(row_tn, d, a, b, c, accumulate);
}
}  // namespace parallel

void gemm_nn(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  if (worth_parallel(d))
    parallel::gemm_nn(d, a, b, c, accumulate);
  else
    serial::gemm_nn(d, a, b, c, accumulate);
}

void gemm_nt(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  if (worth_parallel(d))
    parallel::gemm_nt(d, a, b, c, accumulate);
  else
    serial::gemm_nt(d, a, b, c, accumulate);
}

void gemm_tn(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  if (worth_parallel(d))
    parallel::gemm_tn(d, a, b, c, accumulate);
  else
    serial::gemm_tn(d, a, b, c, accumulate);
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace slukit::kernels
