#pragma once

#include <cstddef>
#include <vector>

namespace editlab {

// Dense row-major matrix of doubles. Everything numeric in the lab is double;
// the stated tolerances assume that precision.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

    double* data() { return a.data(); }
    const double* data() const { return a.data(); }

    double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

    double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return a.size(); }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
    bool operator==(const Mat& o) const { return rows == o.rows && cols == o.cols && a == o.a; }
};

using Vec = std::vector<double>;

}  // namespace editlab
