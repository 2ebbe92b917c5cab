#pragma once

#include <cstddef>

#include "editlab/mat.hpp"

// Dense compute kernels. Each kernel has a plain serial reference (suffix
// _ref) kept for testing and benchmarking, and an optimized version that
// parallelizes with OpenMP when enabled. The optimized kernels partition work
// per output element and keep the inner accumulation order identical to the
// reference, so results are bit-identical to the reference regardless of the
// parallel switch or thread count; seeded runs stay byte-reproducible.
namespace editlab::kernels {

void set_parallel(bool on);
bool parallel_enabled();

#ifdef _OPENMP
#define EDITLAB_OMP_FOR _Pragma("omp parallel for schedule(static)")
#else
#define EDITLAB_OMP_FOR
#endif

// Parallel loop helper used by composite ops (attention, per-row transforms).
// The body must only write state owned by its own index.
template <typename F>
void par_for(int n, F&& f) {
    if (parallel_enabled()) {
        EDITLAB_OMP_FOR
        for (int i = 0; i < n; ++i) f(i);
    } else {
        for (int i = 0; i < n; ++i) f(i);
    }
}

// y[m x n] = x[m x k] * w[n x k]^T  -- linear layer forward, weights [out x in].
void matmul_nt_ref(const double* x, const double* w, double* y, int m, int n, int k);
void matmul_nt(const double* x, const double* w, double* y, int m, int n, int k);

// y[m x n] = a[m x k] * b[k x n]  -- backward data path (dX = dY * W).
void matmul_ref(const double* a, const double* b, double* y, int m, int n, int k);
void matmul(const double* a, const double* b, double* y, int m, int n, int k);

// y[m x n] += a[k x m]^T * b[k x n]  -- weight gradient accumulation
// (dW += dY^T * X with dY [k x m], X [k x n]).
void matmul_tn_acc_ref(const double* a, const double* b, double* y, int m, int n, int k);
void matmul_tn_acc(const double* a, const double* b, double* y, int m, int n, int k);

// Elementwise tanh-approximation GELU and its backward (dx = dy * gelu'(x)).
void gelu_ref(const double* x, double* y, size_t n);
void gelu(const double* x, double* y, size_t n);
void gelu_grad_ref(const double* x, const double* dy, double* dx, size_t n);
void gelu_grad(const double* x, const double* dy, double* dx, size_t n);

// In-place softmax over one row (max-shifted). Callers parallelize across rows.
void softmax_row(double* row, int n);

// Parameter-free layer norm per row: y = (x - mean) / sqrt(var + eps).
// rstd[r] receives 1/sqrt(var + eps) for the backward pass.
inline constexpr double kLnEps = 1e-8;
void layernorm_ref(const double* x, double* y, double* rstd, int rows, int cols);
void layernorm(const double* x, double* y, double* rstd, int rows, int cols);

// Layer norm backward; y is the normalized output from the forward pass.
void layernorm_grad_ref(const double* y, const double* rstd, const double* dy, double* dx,
                        int rows, int cols);
void layernorm_grad(const double* y, const double* rstd, const double* dy, double* dx,
                    int rows, int cols);

// Convenience wrappers on Mat (shapes must already agree).
void matmul_nt(const Mat& x, const Mat& w, Mat& y);
void matmul(const Mat& a, const Mat& b, Mat& y);
void matmul_tn_acc(const Mat& a, const Mat& b, Mat& y);

}  // namespace editlab::kernels
