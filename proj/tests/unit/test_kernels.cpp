#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "slukit/kernels.hpp"

using namespace slukit::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = uni(rng);
  return v;
}

// Textbook triple loop; only used as an approximate oracle.
double naive(const std::vector<double>& a, const std::vector<double>& b,
             std::size_t i, std::size_t j, GemmDims d, char layout) {
  double s = 0.0;
  for (std::size_t p = 0; p < d.k; ++p) {
    const double x = layout == 't' ? a[p * d.m + i] : a[i * d.k + p];
    const double y = layout == 'n' ? b[j * d.k + p] : b[p * d.n + j];
    s += x * y;
  }
  return s;
}

}  // namespace

TEST_CASE("serial and parallel kernels agree bitwise") {
#ifdef _OPENMP
  omp_set_num_threads(4);
#endif
  std::mt19937_64 rng(1);
  const GemmDims shapes[] = {{1, 1, 1}, {3, 5, 2}, {17, 9, 33}, {64, 128, 48}};
  for (const auto d : shapes) {
    const auto a = random_vec(d.m * d.k, rng);
    const auto bn = random_vec(d.k * d.n, rng);
    const auto bt = random_vec(d.n * d.k, rng);
    const auto at = random_vec(d.k * d.m, rng);
    for (bool acc : {false, true}) {
      auto init = random_vec(d.m * d.n, rng);
      auto c1 = init, c2 = init;
      serial::gemm_nn(d, a, bn, c1, acc);
      parallel::gemm_nn(d, a, bn, c2, acc);
      CHECK(c1 == c2);
      c1 = init; c2 = init;
      serial::gemm_nt(d, a, bt, c1, acc);
      parallel::gemm_nt(d, a, bt, c2, acc);
      CHECK(c1 == c2);
      c1 = init; c2 = init;
      serial::gemm_tn(d, at, bn, c1, acc);
      parallel::gemm_tn(d, at, bn, c2, acc);
      CHECK(c1 == c2);
    }
  }
}

TEST_CASE("kernels match the textbook product") {
  std::mt19937_64 rng(2);
  const GemmDims d{7, 11, 5};
  const auto a = random_vec(d.m * d.k, rng);
  const auto at = random_vec(d.k * d.m, rng);
  const auto bn = random_vec(d.k * d.n, rng);
  const auto bt = random_vec(d.n * d.k, rng);
  std::vector<double> c(d.m * d.n);
  gemm_nn(d, a, bn, c, false);
  for (std::size_t i = 0; i < d.m; ++i)
    for (std::size_t j = 0; j < d.n; ++j)
      CHECK(c[i * d.n + j] == doctest::Approx(naive(a, bn, i, j, d, 'x')).epsilon(1e-12));
  gemm_nt(d, a, bt, c, false);
  for (std::size_t i = 0; i < d.m; ++i)
    for (std::size_t j = 0; j < d.n; ++j)
      CHECK(c[i * d.n + j] == doctest::Approx(naive(a, bt, i, j, d, 'n')).epsilon(1e-12));
  gemm_tn(d, at, bn, c, false);
  for (std::size_t i = 0; i < d.m; ++i)
    for (std::size_t j = 0; j < d.n; ++j)
      CHECK(c[i * d.n + j] == doctest::Approx(naive(at, bn, i, j, d, 't')).epsilon(1e-12));
}

TEST_CASE("accumulate adds into the destination") {
  const GemmDims d{1, 2, 1};
  const std::vector<double> a{1, 2}, b{3, 4};
  std::vector<double> c{10};
  gemm_nn(d, a, b, c, true);
  CHECK(c[0] == 21.0);
  gemm_nn(d, a, b, c, false);
  CHECK(c[0] == 11.0);
}
