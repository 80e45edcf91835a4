#include "rcdyn/cmat.hpp"

#include <Eigen/Dense>
#include <stdexcept>

#include "rcdyn/kernels.hpp"

namespace rcdyn {

CMat matmul(const CMat& A, const CMat& B) {
    if (A.n != B.n) throw std::invalid_argument("matmul: dimension mismatch");
    CMat C(A.n);
    kernels::matmul_acc(A.n, cplx{1.0, 0.0}, A.data(), B.data(), cplx{0.0, 0.0}, C.data());
    return C;
}

double expval(const CMat& op, const CMat& rho) {
    if (op.n != rho.n) throw std::invalid_argument("expval: dimension mismatch");
    cplx t{0.0, 0.0};
    for (int i = 0; i < op.n; ++i)
        for (int k = 0; k < op.n; ++k) t += op(i, k) * rho(k, i);
    return t.real();
}

namespace {
using EigenCMat = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
}

std::vector<double> hermitian_eigenvalues(const CMat& A) {
    Eigen::Map<const EigenCMat> m(A.data(), A.n, A.n);
    Eigen::SelfAdjointEigenSolver<EigenCMat> solver(m, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("hermitian_eigenvalues: eigensolver failed");
    std::vector<double> ev(static_cast<std::size_t>(A.n));
    for (int i = 0; i < A.n; ++i) ev[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
    return ev;
}

void hermitian_eigensystem(const CMat& A, std::vector<double>& values, CMat& vectors) {
    Eigen::Map<const EigenCMat> m(A.data(), A.n, A.n);
    Eigen::SelfAdjointEigenSolver<EigenCMat> solver(m);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("hermitian_eigensystem: eigensolver failed");
    values.resize(static_cast<std::size_t>(A.n));
    vectors = CMat(A.n);
    for (int i = 0; i < A.n; ++i) {
        values[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
        for (int j = 0; j < A.n; ++j) vectors(j, i) = solver.eigenvectors()(j, i);
    }
}

}  // namespace rcdyn
