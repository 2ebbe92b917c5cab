#pragma once

// Independent reference for the closed-form ridge update: conjugate gradients
// on the normal equations Delta * G = B, plus the raw objective the update
// minimizes. Shares no code with the production solver.

#include <cmath>
#include <vector>

#include "editlab/mat.hpp"

namespace testutil {

using editlab::Mat;

// y += a * x
inline void axpy(double a, const std::vector<double>& x, std::vector<double>& y) {
    for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// C = A * B  (plain triple loop; shapes: [m x k] * [k x n])
inline Mat mul(const Mat& a, const Mat& b) {
    Mat c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            for (int j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

// C = A * B^T
inline Mat mul_nt(const Mat& a, const Mat& b) {
    Mat c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.rows; ++j) {
            double s = 0;
            for (int k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
            c(i, j) = s;
        }
    return c;
}

inline double frob2(const Mat& m) {
    double s = 0;
    for (double v : m.a) s += v * v;
    return s;
}

// The quantity solve_update minimizes over Delta:
//   || (W + Delta) K1 - M1 ||_F^2  +  lambda || (W + Delta) K0 - W K0 ||_F^2
inline double edit_objective(const Mat& w, const Mat& delta, const Mat& k1, const Mat& m1,
                             const Mat& k0, double lambda) {
    Mat wd = w;
    for (size_t i = 0; i < wd.a.size(); ++i) wd.a[i] += delta.a[i];
    Mat r1 = mul(wd, k1);
    for (size_t i = 0; i < r1.a.size(); ++i) r1.a[i] -= m1.a[i];
    double obj = frob2(r1);
    if (lambda > 0 && k0.cols > 0) {
        Mat drift = mul(delta, k0);  // (W + D) K0 - W K0 = D K0
        obj += lambda * frob2(drift);
    }
    return obj;
}

// Solves x G = b (row vector x) for symmetric positive semidefinite G with
// b in range(G), by conjugate gradients from zero (yields the minimum-norm
// solution). G is d x d, b and x are length d.
inline std::vector<double> cg_solve_row(const Mat& g, const std::vector<double>& b,
                                        int max_iter, double tol) {
    const int d = g.rows;
    std::vector<double> x(d, 0.0), r = b, p = b, gp(d);
    double rr = dot(r, r);
    const double b2 = std::max(dot(b, b), 1e-300);
    for (int it = 0; it < max_iter && rr > tol * tol * b2; ++it) {
        for (int i = 0; i < d; ++i) {
            double s = 0;
            for (int j = 0; j < d; ++j) s += g(i, j) * p[j];
            gp[i] = s;
        }
        const double pgp = dot(p, gp);
        if (pgp <= 0) break;  // numerical null-space direction: stop
        const double alpha = rr / pgp;
        axpy(alpha, p, x);
        axpy(-alpha, gp, r);
        const double rr_next = dot(r, r);
        const double beta = rr_next / rr;
        rr = rr_next;
        for (int i = 0; i < d; ++i) p[i] = r[i] + beta * p[i];
    }
    return x;
}

// Reference solution of the ridge-update normal equations
//   Delta (K1 K1^T + lambda K0 K0^T) = (M1 - W K1) K1^T
// computed row-by-row with conjugate gradients.
inline Mat reference_update(const Mat& w, const Mat& k1, const Mat& m1, const Mat& k0,
                            double lambda) {
    const int d_in = w.cols;
    Mat g = mul_nt(k1, k1);  // K1 [d_in x n1] -> G [d_in x d_in]
    if (lambda > 0 && k0.cols > 0) {
        const Mat g0 = mul_nt(k0, k0);
        for (size_t i = 0; i < g.a.size(); ++i) g.a[i] += lambda * g0.a[i];
    }
    Mat r = mul(w, k1);
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] = m1.a[i] - r.a[i];
    const Mat b = mul_nt(r, k1);  // [d_out x d_in]

    Mat delta(w.rows, w.cols);
    for (int row = 0; row < w.rows; ++row) {
        std::vector<double> brow(b.row(row), b.row(row) + d_in);
        const auto x = cg_solve_row(g, brow, 50 * d_in, 1e-15);
        for (int j = 0; j < d_in; ++j) delta(row, j) = x[j];
    }
    return delta;
}

}  // namespace testutil
