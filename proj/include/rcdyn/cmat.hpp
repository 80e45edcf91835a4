#ifndef RCDYN_CMAT_HPP
#define RCDYN_CMAT_HPP

#include <complex>
#include <cstddef>
#include <vector>

namespace rcdyn {

using cplx = std::complex<double>;

/// Dense square complex matrix, row-major. Heavy products go through the
/// kernels in kernels.hpp so the parallel/serial split stays in one place.
struct CMat {
    int n = 0;
    std::vector<cplx> a;

    CMat() = default;
    explicit CMat(int dim) : n(dim), a(static_cast<std::size_t>(dim) * dim, cplx{0.0, 0.0}) {}

    static CMat identity(int dim) {
        CMat m(dim);
        for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }

    cplx& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
    const cplx& operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }

    cplx* data() { return a.data(); }
    const cplx* data() const { return a.data(); }
    std::size_t size() const { return a.size(); }

    CMat dagger() const {
        CMat m(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(j, i) = std::conj((*this)(i, j));
        return m;
    }

    cplx trace() const {
        cplx t{0.0, 0.0};
        for (int i = 0; i < n; ++i) t += (*this)(i, i);
        return t;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& v : a) m = std::max(m, std::abs(v));
        return m;
    }

    double hermiticity_error() const {
        double m = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
                m = std::max(m, std::abs((*this)(i, j) - std::conj((*this)(j, i))));
        return m;
    }

    CMat& operator+=(const CMat& o) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += o.a[i];
        return *this;
    }
    CMat& operator-=(const CMat& o) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] -= o.a[i];
        return *this;
    }
    CMat& operator*=(cplx s) {
        for (auto& v : a) v *= s;
        return *this;
    }

    friend CMat operator+(CMat l, const CMat& r) { return l += r; }
    friend CMat operator-(CMat l, const CMat& r) { return l -= r; }
    friend CMat operator*(cplx s, CMat m) { return m *= s; }
};

// C = A * B (dispatches to the parallel or serial kernel)
CMat matmul(const CMat& A, const CMat& B);

// expectation value Tr(op * rho), real part
double expval(const CMat& op, const CMat& rho);

// Eigenvalues of a Hermitian matrix, ascending.
std::vector<double> hermitian_eigenvalues(const CMat& A);

// Full Hermitian eigensystem; columns of `vectors` are eigenvectors.
void hermitian_eigensystem(const CMat& A, std::vector<double>& values, CMat& vectors);

}  // namespace rcdyn

#endif
