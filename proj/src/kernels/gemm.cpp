#include "fedperi/kernels/gemm.hpp"

#include <cstdint>

namespace fedperi::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 16;

inline void nn_row(const double* a_row, const double* b, double* c_row, std::size_t k,
                   std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a_row[p];
    if (av == 0.0) continue;
    const double* b_row = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

inline void nt_row(const double* a_row, const double* b, double* c_row, std::size_t k,
                   std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const double* b_row = b + j * k;
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += a_row[p] * b_row[p];
    c_row[j] += s;
  }
}

// Output row p of A^T * B: sum over i ascending of A[i, p] * B[i, :].
inline void tn_row(const double* a, const double* b, double* c_row, std::size_t p, std::size_t m,
                   std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double av = a[i * k + p];
    if (av == 0.0) continue;
    const double* b_row = b + i * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

}  // namespace

void gemm_nn_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                    std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) nn_row(a.data() + i * k, b.data(), c.data() + i * n, k, n);
}

void gemm_nn_omp(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    nn_row(a.data() + r * k, b.data(), c.data() + r * n, k, n);
  }
}

void gemm_nt_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                    std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) nt_row(a.data() + i * k, b.data(), c.data() + i * n, k, n);
}

void gemm_nt_omp(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    nt_row(a.data() + r * k, b.data(), c.data() + r * n, k, n);
  }
}

void gemm_tn_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                    std::size_t m, std::size_t k, std::size_t n) {
  // i-outer for locality; each C[p, j] still sums over i in ascending order.
  for (std::size_t i = 0; i < m; ++i) {
    const double* b_row = b.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* c_row = c.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
    }
  }
}

void gemm_tn_omp(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::int64_t>(k);
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < rows; ++p) {
    const auto r = static_cast<std::size_t>(p);
    tn_row(a.data(), b.data(), c.data() + r * n, r, m, k, n);
  }
}

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  if (m > 1 && m * k * n >= kParallelWork)
    gemm_nn_omp(a, b, c, m, k, n);
  else
    gemm_nn_serial(a, b, c, m, k, n);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  if (m > 1 && m * k * n >= kParallelWork)
    gemm_nt_omp(a, b, c, m, k, n);
  else
    gemm_nt_serial(a, b, c, m, k, n);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  if (k > 1 && m * k * n >= kParallelWork)
    gemm_tn_omp(a, b, c, m, k, n);
  else
    gemm_tn_serial(a, b, c, m, k, n);
}

}  // namespace fedperi::kernels
