#pragma once

#include <cstddef>
#include <span>

// Dense row-major GEMM kernels used by the autodiff engine.
//
// Every kernel accumulates into C (C += op(A) * op(B)). The OpenMP versions
// split work by output row and keep the per-element summation order of the
// serial reference, so both produce bit-identical results for any thread
// count.
namespace fedperi::kernels {

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                    std::size_t m, std::size_t k, std::size_t n);
void gemm_nn_omp(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);

// C[m x n] += A[m x k] * B[n x k]^T
void gemm_nt_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                    std::size_t m, std::size_t k, std::size_t n);
void gemm_nt_omp(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);

// C[k x n] += A[m x k]^T * B[m x n]
void gemm_tn_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                    std::size_t m, std::size_t k, std::size_t n);
void gemm_tn_omp(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);

// Dispatchers: OpenMP above a work threshold, serial below it.
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);

}  // namespace fedperi::kernels
