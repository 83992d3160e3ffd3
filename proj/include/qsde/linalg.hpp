#pragma once

#include <cblas.h>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "qsde/errors.hpp"

namespace qsde {

using cx = std::complex<double>;
using Vec = std::vector<cx>;

inline void require(bool ok, const char* what) {
    if (!ok) throw DimensionError(what);
}

// <x, y> = sum_k conj(x^k) y^k, conjugate-linear in the first slot.
inline cx inner(const Vec& x, const Vec& y) {
    require(x.size() == y.size(), "inner: dimension mismatch");
    require(!x.empty(), "inner: empty vectors");
    cx s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += std::conj(x[k]) * y[k];
    return s;
}

inline double norm(const Vec& x) {
    double s = 0.0;
    for (const cx& v : x) s += std::norm(v);
    return std::sqrt(s);
}

inline bool is_finite(const Vec& x) {
    for (const cx& v : x)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
}

// Dense complex matrix, column-major.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols) : rows_(rows), cols_(cols), a_(std::size_t(rows) * cols) {
        require(rows >= 1 && cols >= 1, "Matrix: dimensions must be positive");
    }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return a_.empty(); }

    cx& operator()(int r, int c) { return a_[std::size_t(c) * rows_ + r]; }
    const cx& operator()(int r, int c) const { return a_[std::size_t(c) * rows_ + r]; }

    cx* data() { return a_.data(); }
    const cx* data() const { return a_.data(); }

    Matrix adjoint() const {
        Matrix m(cols_, rows_);
        for (int c = 0; c < cols_; ++c)
            for (int r = 0; r < rows_; ++r) m(c, r) = std::conj((*this)(r, c));
        return m;
    }

    Matrix transpose() const {
        Matrix m(cols_, rows_);
        for (int c = 0; c < cols_; ++c)
            for (int r = 0; r < rows_; ++r) m(c, r) = (*this)(r, c);
        return m;
    }

    Matrix conj() const {
        Matrix m = *this;
        for (cx& v : m.a_) v = std::conj(v);
        return m;
    }

    Matrix& operator+=(const Matrix& o) {
        require(rows_ == o.rows_ && cols_ == o.cols_, "Matrix add: shape mismatch");
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        require(rows_ == o.rows_ && cols_ == o.cols_, "Matrix sub: shape mismatch");
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
        return *this;
    }
    Matrix& operator*=(cx s) {
        for (cx& v : a_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, cx s) { return a *= s; }
    friend Matrix operator*(cx s, Matrix a) { return a *= s; }

    Matrix operator*(const Matrix& o) const {
        require(cols_ == o.rows_, "Matrix mul: inner dimension mismatch");
        Matrix c(rows_, o.cols_);
        const cx one = 1.0, zero = 0.0;
        cblas_zgemm(CblasColMajor, CblasNoTrans, CblasNoTrans, rows_, o.cols_, cols_,
                    &one, data(), rows_, o.data(), o.rows_, &zero, c.data(), c.rows_);
        return c;
    }

    Vec operator*(const Vec& x) const {
        require(int(x.size()) == cols_, "Matrix.vec: dimension mismatch");
        Vec y(rows_);
        apply(x, y);
        return y;
    }

    // y = M x into an existing buffer (x and y must not alias).
    void apply(const Vec& x, Vec& y) const {
        require(int(x.size()) == cols_ && int(y.size()) == rows_,
                "Matrix.apply: dimension mismatch");
        if (rows_ <= 64 && cols_ <= 64) {
            // small sizes are dominated by the BLAS call overhead; spell the
            // complex arithmetic out in doubles so it stays inline
            auto* yd = reinterpret_cast<double*>(y.data());
            std::fill(yd, yd + 2 * rows_, 0.0);
            const auto* md = reinterpret_cast<const double*>(data());
            const auto* xd = reinterpret_cast<const double*>(x.data());
            for (int j = 0; j < cols_; ++j, md += 2 * rows_) {
                const double xr = xd[2 * j], xi = xd[2 * j + 1];
                for (int i = 0; i < rows_; ++i) {
                    const double mr = md[2 * i], mi = md[2 * i + 1];
                    yd[2 * i] += mr * xr - mi * xi;
                    yd[2 * i + 1] += mr * xi + mi * xr;
                }
            }
            return;
        }
        const cx one = 1.0, zero = 0.0;
        cblas_zgemv(CblasColMajor, CblasNoTrans, rows_, cols_, &one, data(), rows_,
                    x.data(), 1, &zero, y.data(), 1);
    }

    // Maximum absolute column sum.
    double norm1() const {
        double best = 0.0;
        for (int c = 0; c < cols_; ++c) {
            double s = 0.0;
            for (int r = 0; r < rows_; ++r) s += std::abs((*this)(r, c));
            best = std::max(best, s);
        }
        return best;
    }

    double frobenius() const {
        double s = 0.0;
        for (const cx& v : a_) s += std::norm(v);
        return std::sqrt(s);
    }

    double max_abs() const {
        double best = 0.0;
        for (const cx& v : a_) best = std::max(best, std::abs(v));
        return best;
    }

    bool is_finite() const {
        for (const cx& v : a_)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<cx> a_;
};

inline Matrix adjoint(const Matrix& m) { return m.adjoint(); }
inline Matrix transpose(const Matrix& m) { return m.transpose(); }
inline Matrix conj(const Matrix& m) { return m.conj(); }

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (int ca = 0; ca < a.cols(); ++ca)
        for (int ra = 0; ra < a.rows(); ++ra) {
            const cx v = a(ra, ca);
            if (v == cx(0.0)) continue;
            for (int cb = 0; cb < b.cols(); ++cb)
                for (int rb = 0; rb < b.rows(); ++rb)
                    k(ra * b.rows() + rb, ca * b.cols() + cb) = v * b(rb, cb);
        }
    return k;
}

// LU factorization with partial pivoting. A pivot smaller than
// 1e-13 * max|entry| of the input is treated as singular.
class LuFactor {
public:
    explicit LuFactor(Matrix m) : lu_(std::move(m)), piv_(lu_.rows()) {
        require(lu_.rows() == lu_.cols(), "solve: matrix must be square");
        const double scale = lu_.max_abs();
        const int n = lu_.rows();
        const int info = LAPACKE_zgetrf(LAPACK_COL_MAJOR, n, n,
                                        reinterpret_cast<lapack_complex_double*>(lu_.data()),
                                        n, piv_.data());
        if (info < 0) throw NumericalError("LU: invalid argument to zgetrf");
        if (info > 0) throw SingularMatrixError("LU: exactly singular matrix");
        for (int i = 0; i < n; ++i)
            if (std::abs(lu_(i, i)) < 1e-13 * scale)
                throw SingularMatrixError("LU: matrix singular to working tolerance");
    }

    Vec solve(Vec b) const {
        require(int(b.size()) == lu_.rows(), "solve: rhs dimension mismatch");
        const int n = lu_.rows();
        const int info = LAPACKE_zgetrs(LAPACK_COL_MAJOR, 'N', n, 1,
                                        reinterpret_cast<const lapack_complex_double*>(lu_.data()),
                                        n, piv_.data(),
                                        reinterpret_cast<lapack_complex_double*>(b.data()), n);
        if (info != 0) throw NumericalError("LU: zgetrs failed");
        return b;
    }

    Matrix solve(Matrix b) const {
        require(b.rows() == lu_.rows(), "solve: rhs dimension mismatch");
        const int n = lu_.rows();
        const int info = LAPACKE_zgetrs(LAPACK_COL_MAJOR, 'N', n, b.cols(),
                                        reinterpret_cast<const lapack_complex_double*>(lu_.data()),
                                        n, piv_.data(),
                                        reinterpret_cast<lapack_complex_double*>(b.data()), n);
        if (info != 0) throw NumericalError("LU: zgetrs failed");
        return b;
    }

    Matrix inverse() const { return solve(Matrix::identity(lu_.rows())); }

private:
    Matrix lu_;
    std::vector<int> piv_;
};

inline Vec solve(const Matrix& m, const Vec& b) { return LuFactor(m).solve(b); }

// Scaling-and-squaring with a diagonal Pade kernel of order 7; the input is
// scaled until its 1-norm is at most 0.5, so the kernel error is far below
// double rounding.
inline Matrix expm(const Matrix& m) {
    require(m.rows() == m.cols(), "expm: matrix must be square");
    if (!m.is_finite()) throw NumericalError("expm: non-finite input");

    const int n = m.rows();
    const double nrm = m.norm1();
    int s = 0;
    if (nrm > 0.5) s = int(std::ceil(std::log2(nrm / 0.5)));

    Matrix a = m * cx(std::ldexp(1.0, -s));
    static constexpr double b[8] = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                    25200.0,    1512.0,    56.0,      1.0};
    const Matrix a2 = a * a;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a4 * a2;
    const Matrix eye = Matrix::identity(n);

    const Matrix u = a * (a6 * b[7] + a4 * b[5] + a2 * b[3] + eye * b[1]);
    const Matrix v = a6 * b[6] + a4 * b[4] + a2 * b[2] + eye * b[0];

    Matrix x = LuFactor(v - u).solve(v + u);
    for (int i = 0; i < s; ++i) x = x * x;
    return x;
}

} // namespace qsde
