#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "editlab/kernels.hpp"
#include "editlab/rng.hpp"
#include "support/test_util.hpp"

namespace kn = editlab::kernels;
using editlab::Mat;
using editlab::Rng;
using testutil::rel_err;

namespace {

Mat random_mat(Rng& rng, int r, int c, double scale = 1.0) {
    Mat m(r, c);
    for (auto& v : m.a) v = rng.normal(0.0, scale);
    return m;
}

struct ParallelGuard {
    bool saved;
    explicit ParallelGuard(bool on) : saved(kn::parallel_enabled()) { kn::set_parallel(on); }
    ~ParallelGuard() { kn::set_parallel(saved); }
};

}  // namespace

TEST_CASE("matmul_nt matches a naive triple loop") {
    Rng rng(11);
    const int m = 7, n = 5, k = 9;
    Mat x = random_mat(rng, m, k), w = random_mat(rng, n, k);
    Mat y(m, n), naive(m, n);
    kn::matmul_nt(x, w, y);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int t = 0; t < k; ++t) s += x(i, t) * w(j, t);
            naive(i, j) = s;
        }
    for (size_t i = 0; i < y.size(); ++i) CHECK(rel_err(y.a[i], naive.a[i]) < 1e-12);
}

TEST_CASE("matmul matches a naive triple loop") {
    Rng rng(12);
    const int m = 6, n = 8, k = 4;
    Mat a = random_mat(rng, m, k), b = random_mat(rng, k, n);
    Mat y(m, n), naive(m, n);
    kn::matmul(a, b, y);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int t = 0; t < k; ++t) s += a(i, t) * b(t, j);
            naive(i, j) = s;
        }
    for (size_t i = 0; i < y.size(); ++i) CHECK(rel_err(y.a[i], naive.a[i]) < 1e-12);
}

TEST_CASE("matmul_tn_acc accumulates a^T * b on top of existing values") {
    Rng rng(13);
    const int m = 5, n = 6, k = 7;
    Mat a = random_mat(rng, k, m), b = random_mat(rng, k, n);
    Mat y = random_mat(rng, m, n);
    Mat expect = y;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            for (int t = 0; t < k; ++t) expect(i, j) += a(t, i) * b(t, j);
    kn::matmul_tn_acc(a, b, y);
    for (size_t i = 0; i < y.size(); ++i) CHECK(rel_err(y.a[i], expect.a[i]) < 1e-12);
}

TEST_CASE("optimized matmul kernels are bit-identical to the references in both modes") {
    Rng rng(21);
    // Sizes straddling any internal blocking, including degenerate ones.
    const int shapes[][3] = {{1, 1, 1}, {3, 5, 2}, {17, 13, 29}, {64, 64, 64}, {33, 65, 31}};
    for (bool par : {false, true}) {
        ParallelGuard guard(par);
        CAPTURE(par);
        for (auto [m, n, k] : shapes) {
            Mat x = random_mat(rng, m, k), wt = random_mat(rng, n, k);
            Mat y1(m, n), y2(m, n);
            kn::matmul_nt_ref(x.data(), wt.data(), y1.data(), m, n, k);
            kn::matmul_nt(x.data(), wt.data(), y2.data(), m, n, k);
            CHECK(y1.a == y2.a);

            Mat a = random_mat(rng, m, k), b = random_mat(rng, k, n);
            Mat z1(m, n), z2(m, n);
            kn::matmul_ref(a.data(), b.data(), z1.data(), m, n, k);
            kn::matmul(a.data(), b.data(), z2.data(), m, n, k);
            CHECK(z1.a == z2.a);

            Mat at = random_mat(rng, k, m), bt = random_mat(rng, k, n);
            Mat g1 = random_mat(rng, m, n);
            Mat g2 = g1;
            kn::matmul_tn_acc_ref(at.data(), bt.data(), g1.data(), m, n, k);
            kn::matmul_tn_acc(at.data(), bt.data(), g2.data(), m, n, k);
            CHECK(g1.a == g2.a);
        }
    }
}

TEST_CASE("gelu and gelu_grad are bit-identical to their references") {
    Rng rng(31);
    std::vector<double> x(513), dy(513);
    for (auto& v : x) v = rng.normal(0.0, 3.0);
    for (auto& v : dy) v = rng.normal();
    for (bool par : {false, true}) {
        ParallelGuard guard(par);
        std::vector<double> y1(x.size()), y2(x.size()), dx1(x.size()), dx2(x.size());
        kn::gelu_ref(x.data(), y1.data(), x.size());
        kn::gelu(x.data(), y2.data(), x.size());
        CHECK(y1 == y2);
        kn::gelu_grad_ref(x.data(), dy.data(), dx1.data(), x.size());
        kn::gelu_grad(x.data(), dy.data(), dx2.data(), x.size());
        CHECK(dx1 == dx2);
    }
}

TEST_CASE("gelu fixed points and asymptotes") {
    std::vector<double> x = {0.0, 10.0, -10.0}, y(3);
    kn::gelu(x.data(), y.data(), 3);
    CHECK(y[0] == 0.0);
    CHECK(rel_err(y[1], 10.0) < 1e-6);    // ~identity for large positive inputs
    CHECK(std::fabs(y[2]) < 1e-6);        // ~zero for large negative inputs
}

TEST_CASE("gelu_grad matches central finite differences") {
    Rng rng(32);
    std::vector<double> x(64);
    for (auto& v : x) v = rng.normal(0.0, 2.0);
    std::vector<double> dy(x.size(), 1.0), dx(x.size());
    kn::gelu_grad(x.data(), dy.data(), dx.data(), x.size());
    const double h = 1e-6;
    for (size_t i = 0; i < x.size(); ++i) {
        double xp = x[i] + h, xm = x[i] - h, yp, ym;
        kn::gelu(&xp, &yp, 1);
        kn::gelu(&xm, &ym, 1);
        double fd = (yp - ym) / (2 * h);
        CHECK(std::fabs(dx[i] - fd) < 1e-7);
    }
}

TEST_CASE("layernorm normalizes each row and matches the reference bitwise") {
    Rng rng(41);
    const int rows = 9, cols = 32;
    Mat x = random_mat(rng, rows, cols, 5.0);
    for (int c = 0; c < cols; ++c) x(4, c) += 100.0;  // large-offset row
    for (bool par : {false, true}) {
        ParallelGuard guard(par);
        Mat y1(rows, cols), y2(rows, cols);
        std::vector<double> r1(rows), r2(rows);
        kn::layernorm_ref(x.data(), y1.data(), r1.data(), rows, cols);
        kn::layernorm(x.data(), y2.data(), r2.data(), rows, cols);
        CHECK(y1.a == y2.a);
        CHECK(r1 == r2);
        for (int r = 0; r < rows; ++r) {
            double mean = 0.0, var = 0.0;
            for (int c = 0; c < cols; ++c) mean += y1(r, c);
            mean /= cols;
            for (int c = 0; c < cols; ++c) var += (y1(r, c) - mean) * (y1(r, c) - mean);
            var /= cols;
            CHECK(std::fabs(mean) < 1e-12);
            CHECK(std::fabs(var - 1.0) < 1e-6);
            CHECK(r1[r] > 0.0);
        }
    }
}

TEST_CASE("layernorm_grad matches central finite differences") {
    Rng rng(42);
    const int rows = 3, cols = 8;
    Mat x = random_mat(rng, rows, cols, 2.0);
    Mat dy = random_mat(rng, rows, cols);
    Mat y(rows, cols), dx(rows, cols);
    std::vector<double> rstd(rows);
    kn::layernorm(x.data(), y.data(), rstd.data(), rows, cols);
    kn::layernorm_grad(y.data(), rstd.data(), dy.data(), dx.data(), rows, cols);

    auto objective = [&](const Mat& xin) {
        Mat yo(rows, cols);
        std::vector<double> ro(rows);
        kn::layernorm(xin.data(), yo.data(), ro.data(), rows, cols);
        double s = 0.0;
        for (size_t i = 0; i < yo.size(); ++i) s += yo.a[i] * dy.a[i];
        return s;
    };
    const double h = 1e-6;
    for (size_t i = 0; i < x.size(); ++i) {
        Mat xp = x, xm = x;
        xp.a[i] += h;
        xm.a[i] -= h;
        double fd = (objective(xp) - objective(xm)) / (2 * h);
        CHECK(std::fabs(dx.a[i] - fd) < 1e-6);
    }
}

TEST_CASE("layernorm_grad optimized path is bit-identical to the reference") {
    Rng rng(43);
    const int rows = 6, cols = 24;
    Mat x = random_mat(rng, rows, cols);
    Mat dy = random_mat(rng, rows, cols);
    Mat y(rows, cols);
    std::vector<double> rstd(rows);
    kn::layernorm(x.data(), y.data(), rstd.data(), rows, cols);
    for (bool par : {false, true}) {
        ParallelGuard guard(par);
        Mat dx1(rows, cols), dx2(rows, cols);
        kn::layernorm_grad_ref(y.data(), rstd.data(), dy.data(), dx1.data(), rows, cols);
        kn::layernorm_grad(y.data(), rstd.data(), dy.data(), dx2.data(), rows, cols);
        CHECK(dx1.a == dx2.a);
    }
}

TEST_CASE("softmax_row sums to one and survives large logits") {
    std::vector<double> row = {1.0, 2.0, 3.0, 4.0};
    kn::softmax_row(row.data(), 4);
    double sum = row[0] + row[1] + row[2] + row[3];
    CHECK(std::fabs(sum - 1.0) < 1e-12);
    CHECK(row[0] < row[1]);
    CHECK(row[2] < row[3]);

    std::vector<double> big = {1000.0, 1000.0, 999.0};
    kn::softmax_row(big.data(), 3);
    CHECK(std::isfinite(big[0]));
    CHECK(std::fabs(big[0] - big[1]) < 1e-15);
    CHECK(std::fabs(big[0] + big[1] + big[2] - 1.0) < 1e-12);

    std::vector<double> one = {-7.5};
    kn::softmax_row(one.data(), 1);
    CHECK(one[0] == 1.0);
}

TEST_CASE("parallel switch round-trips") {
    bool before = kn::parallel_enabled();
    kn::set_parallel(!before);
    CHECK(kn::parallel_enabled() == !before);
    kn::set_parallel(before);
    CHECK(kn::parallel_enabled() == before);
}
