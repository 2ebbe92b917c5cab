#include "editlab/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <vector>

namespace editlab::kernels {

namespace {
std::atomic<bool> g_parallel{true};
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

// ---- references: straightforward loops, ascending accumulation ----

void matmul_nt_ref(const double* x, const double* w, double* y, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += x[(size_t)i * k + p] * w[(size_t)j * k + p];
            y[(size_t)i * n + j] = s;
        }
    }
}

void matmul_ref(const double* a, const double* b, double* y, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += a[(size_t)i * k + p] * b[(size_t)p * n + j];
            y[(size_t)i * n + j] = s;
        }
    }
}

void matmul_tn_acc_ref(const double* a, const double* b, double* y, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int t = 0; t < k; ++t) s += a[(size_t)t * m + i] * b[(size_t)t * n + j];
            y[(size_t)i * n + j] += s;
        }
    }
}

// ---- optimized kernels ----
// Row-parallel, axpy-shaped inner loops so the compiler can vectorize over the
// output row while the per-element add order stays ascending in the reduction
// index (matching the references bit for bit).

void matmul_nt(const double* x, const double* w, double* y, int m, int n, int k) {
    // One pass of w^T so the hot loop streams contiguous rows.
    std::vector<double> wt((size_t)k * n);
    par_for(n, [&](int j) {
        for (int p = 0; p < k; ++p) wt[(size_t)p * n + j] = w[(size_t)j * k + p];
    });
    const double* bt = wt.data();
    par_for(m, [&](int i) {
        const double* xi = x + (size_t)i * k;
        double* yi = y + (size_t)i * n;
        for (int j = 0; j < n; ++j) yi[j] = 0.0;
        for (int p = 0; p < k; ++p) {
            const double xv = xi[p];
            const double* bp = bt + (size_t)p * n;
            for (int j = 0; j < n; ++j) yi[j] += xv * bp[j];
        }
    });
}

void matmul(const double* a, const double* b, double* y, int m, int n, int k) {
    par_for(m, [&](int i) {
        const double* ai = a + (size_t)i * k;
        double* yi = y + (size_t)i * n;
        for (int j = 0; j < n; ++j) yi[j] = 0.0;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + (size_t)p * n;
            for (int j = 0; j < n; ++j) yi[j] += av * bp[j];
        }
    });
}

void matmul_tn_acc(const double* a, const double* b, double* y, int m, int n, int k) {
    par_for(m, [&](int i) {
        double* yi = y + (size_t)i * n;
        // Sum into a fresh row first: the existing y value must join each
        // element's sum last, like the reference, or the rounding differs.
        std::vector<double> s((size_t)n, 0.0);
        for (int t = 0; t < k; ++t) {
            const double av = a[(size_t)t * m + i];
            const double* bt = b + (size_t)t * n;
            for (int j = 0; j < n; ++j) s[j] += av * bt[j];
        }
        for (int j = 0; j < n; ++j) yi[j] += s[j];
    });
}

// ---- elementwise ----

static inline double gelu_one(double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
}

static inline double gelu_grad_one(double v) {
    const double u = kGeluC * (v + kGeluA * v * v * v);
    const double t = std::tanh(u);
    const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
    return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
}

void gelu_ref(const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = gelu_one(x[i]);
}

void gelu(const double* x, double* y, size_t n) {
    par_for((int)n, [&](int i) { y[i] = gelu_one(x[i]); });
}

void gelu_grad_ref(const double* x, const double* dy, double* dx, size_t n) {
    for (size_t i = 0; i < n; ++i) dx[i] = dy[i] * gelu_grad_one(x[i]);
}

void gelu_grad(const double* x, const double* dy, double* dx, size_t n) {
    par_for((int)n, [&](int i) { dx[i] = dy[i] * gelu_grad_one(x[i]); });
}

// ---- row transforms ----

void softmax_row(double* row, int n) {
    double mx = row[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, row[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        row[i] = std::exp(row[i] - mx);
        sum += row[i];
    }
    const double inv = 1.0 / sum;
    for (int i = 0; i < n; ++i) row[i] *= inv;
}

static inline void layernorm_row(const double* x, double* y, double* rstd, int cols) {
    double mean = 0.0;
    for (int j = 0; j < cols; ++j) mean += x[j];
    mean /= cols;
    double var = 0.0;
    for (int j = 0; j < cols; ++j) {
        const double d = x[j] - mean;
        var += d * d;
    }
    var /= cols;
    const double r = 1.0 / std::sqrt(var + kLnEps);
    *rstd = r;
    for (int j = 0; j < cols; ++j) y[j] = (x[j] - mean) * r;
}

void layernorm_ref(const double* x, double* y, double* rstd, int rows, int cols) {
    for (int i = 0; i < rows; ++i)
        layernorm_row(x + (size_t)i * cols, y + (size_t)i * cols, rstd + i, cols);
}

void layernorm(const double* x, double* y, double* rstd, int rows, int cols) {
    par_for(rows, [&](int i) {
        layernorm_row(x + (size_t)i * cols, y + (size_t)i * cols, rstd + i, cols);
    });
}

static inline void layernorm_grad_row(const double* y, double rstd, const double* dy, double* dx,
                                      int cols) {
    double mean_dy = 0.0, mean_dyy = 0.0;
    for (int j = 0; j < cols; ++j) {
        mean_dy += dy[j];
        mean_dyy += dy[j] * y[j];
    }
    mean_dy /= cols;
    mean_dyy /= cols;
    for (int j = 0; j < cols; ++j) dx[j] = rstd * (dy[j] - mean_dy - y[j] * mean_dyy);
}

void layernorm_grad_ref(const double* y, const double* rstd, const double* dy, double* dx,
                        int rows, int cols) {
    for (int i = 0; i < rows; ++i)
        layernorm_grad_row(y + (size_t)i * cols, rstd[i], dy + (size_t)i * cols,
                           dx + (size_t)i * cols, cols);
}

void layernorm_grad(const double* y, const double* rstd, const double* dy, double* dx, int rows,
                    int cols) {
    par_for(rows, [&](int i) {
        layernorm_grad_row(y + (size_t)i * cols, rstd[i], dy + (size_t)i * cols,
                           dx + (size_t)i * cols, cols);
    });
}

// ---- Mat wrappers ----

void matmul_nt(const Mat& x, const Mat& w, Mat& y) {
    matmul_nt(x.data(), w.data(), y.data(), x.rows, w.rows, x.cols);
}

void matmul(const Mat& a, const Mat& b, Mat& y) {
    matmul(a.data(), b.data(), y.data(), a.rows, b.cols, a.cols);
}

void matmul_tn_acc(const Mat& a, const Mat& b, Mat& y) {
    matmul_tn_acc(a.data(), b.data(), y.data(), a.cols, b.cols, a.rows);
}

}  // namespace editlab::kernels
