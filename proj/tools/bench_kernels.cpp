// Times the OpenMP kernels against their serial reference implementations and
// verifies the results agree bit for bit. Usage: bench_kernels [dim] [reps]
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#include "editlab/kernels.hpp"
#include "editlab/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

namespace kn = editlab::kernels;
using editlab::Mat;

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

Mat random_mat(int rows, int cols, editlab::Rng& rng) {
    Mat m(rows, cols);
    for (double& v : m.a) v = rng.normal();
    return m;
}

bool bit_equal(const Mat& a, const Mat& b) {
    return a.rows == b.rows && a.cols == b.cols &&
           std::equal(a.a.begin(), a.a.end(), b.a.begin());
}

struct Row {
    const char* name;
    double gflop;
    std::function<void()> serial;
    std::function<void()> parallel;
    std::function<bool()> check;
};

}  // namespace

int main(int argc, char** argv) {
    const int n = argc > 1 ? std::atoi(argv[1]) : 512;
    const int reps = argc > 2 ? std::atoi(argv[2]) : 5;
    if (n < 1 || reps < 1) {
        std::fprintf(stderr, "usage: bench_kernels [dim >= 1] [reps >= 1]\n");
        return 1;
    }

    editlab::Rng rng(42);
    const Mat x = random_mat(n, n, rng);
    const Mat w = random_mat(n, n, rng);
    Mat y_ser(n, n), y_par(n, n);

    const double flops = 2.0 * n * n * n / 1e9;
    Row rows[] = {
        {"matmul_nt", flops,
         [&] { kn::matmul_nt_ref(x.data(), w.data(), y_ser.data(), n, n, n); },
         [&] { kn::matmul_nt(x.data(), w.data(), y_par.data(), n, n, n); },
         [&] { return bit_equal(y_ser, y_par); }},
        {"matmul", flops,
         [&] { kn::matmul_ref(x.data(), w.data(), y_ser.data(), n, n, n); },
         [&] { kn::matmul(x.data(), w.data(), y_par.data(), n, n, n); },
         [&] { return bit_equal(y_ser, y_par); }},
        {"matmul_tn_acc", flops,
         [&] {
             y_ser.zero();
             kn::matmul_tn_acc_ref(x.data(), w.data(), y_ser.data(), n, n, n);
         },
         [&] {
             y_par.zero();
             kn::matmul_tn_acc(x.data(), w.data(), y_par.data(), n, n, n);
         },
         [&] { return bit_equal(y_ser, y_par); }},
    };

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (built without OpenMP)\n");
#endif
    std::printf("%-14s %10s %12s %12s %9s %s\n", "kernel", "dim", "serial ms", "parallel ms",
                "speedup", "bit-identical");

    bool all_equal = true;
    for (auto& row : rows) {
        kn::set_parallel(false);
        const double ms_ser = time_ms(row.serial, reps);
        kn::set_parallel(true);
        const double ms_par = time_ms(row.parallel, reps);
        const bool equal = row.check();
        all_equal = all_equal && equal;
        std::printf("%-14s %10d %9.2f (%4.1f GF/s) %6.2f (%4.1f GF/s) %6.2fx %s\n", row.name, n,
                    ms_ser, row.gflop / ms_ser * 1e3, ms_par, row.gflop / ms_par * 1e3,
                    ms_ser / ms_par, equal ? "yes" : "NO");
    }
    return all_equal ? 0 : 1;
}
