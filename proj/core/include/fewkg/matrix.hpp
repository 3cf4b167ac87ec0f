#pragma once
// Minimal dense double matrix (row-major) plus the handful of vector ops the
// model math needs. 64-bit throughout; loop order is fixed so that sums are
// reproducible bit-for-bit.

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace fewkg {

using Vec = std::vector<double>;

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

    double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return a.size(); }
    void fill(double v) { std::fill(a.begin(), a.end(), v); }
};

// y = x^T W for W (in x out): y[j] = sum_i x[i] W[i][j].
inline Vec matvec_in_out(const Vec& x, const Matrix& w) {
    assert(static_cast<int>(x.size()) == w.rows);
    Vec y(w.cols, 0.0);
    for (int i = 0; i < w.rows; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* wr = w.row(i);
        for (int j = 0; j < w.cols; ++j) y[j] += xi * wr[j];
    }
    return y;
}

// dW[i][j] += x[i] * dy[j]; dx[i] += sum_j W[i][j] dy[j].
inline void matvec_in_out_backward(const Vec& x, const Matrix& w, const Vec& dy,
                                   Matrix& dw, Vec& dx) {
    for (int i = 0; i < w.rows; ++i) {
        const double* wr = w.row(i);
        double* dwr = dw.row(i);
        double acc = 0.0;
        for (int j = 0; j < w.cols; ++j) {
            dwr[j] += x[i] * dy[j];
            acc += wr[j] * dy[j];
        }
        dx[i] += acc;
    }
}

inline void axpy(double alpha, const Vec& x, Vec& y) {
    assert(x.size() == y.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline double dot(const Vec& x, const Vec& y) {
    assert(x.size() == y.size());
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline Vec vsub(const Vec& x, const Vec& y) {
    assert(x.size() == y.size());
    Vec z(x.size());
    for (size_t i = 0; i < x.size(); ++i) z[i] = x[i] - y[i];
    return z;
}

inline double norm_l2(const Vec& x) { return std::sqrt(dot(x, x)); }

inline double norm_l1(const Vec& x) {
    double s = 0.0;
    for (double v : x) s += std::fabs(v);
    return s;
}

inline bool all_finite(const double* p, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

}  // namespace fewkg
