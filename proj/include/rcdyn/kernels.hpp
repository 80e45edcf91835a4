#ifndef RCDYN_KERNELS_HPP
#define RCDYN_KERNELS_HPP

#include <complex>
#include <span>
#include <vector>

#include "rcdyn/cmat.hpp"

// Hot inner loops, each available as an OpenMP-parallel kernel and a plain
// serial reference. The parallel variants keep floating-point summation order
// fixed (blocked partials combined in block order), so serial and parallel
// results agree bitwise and reruns are reproducible.

namespace rcdyn::kernels {

bool parallel_enabled();
void set_parallel(bool on);

// --- principal-value reducer tabulation -----------------------------------
// phi[i] = J[i]*ln((w[i]-a)/(b-w[i])) - sum_j weight_j * (J[j]-J[i])/(w[j]-w[i])
// with the j == i integrand replaced by the derivative dJ[i] (continuity value).
void tabulate_reducer(std::span<const double> w, std::span<const double> J,
                      std::span<const double> dJ, double a, double b,
                      std::span<double> phi);
void tabulate_reducer_serial(std::span<const double> w, std::span<const double> J,
                             std::span<const double> dJ, double a, double b,
                             std::span<double> phi);
void tabulate_reducer_parallel(std::span<const double> w, std::span<const double> J,
                               std::span<const double> dJ, double a, double b,
                               std::span<double> phi);

// --- Volterra product-trapezoidal integration ------------------------------
// Solves dphi/dt = -int_0^t K(t-s) phi(s) ds - gamma phi, phi(0) = 1, on the
// uniform grid t_n = n*h (h in fs, K in 1/fs^2 sampled on the same grid,
// gamma in 1/fs). Returns phi at every grid point.
std::vector<cplx> volterra_trapezoid(std::span<const cplx> K, double gamma, double h);
std::vector<cplx> volterra_trapezoid_serial(std::span<const cplx> K, double gamma, double h);
std::vector<cplx> volterra_trapezoid_parallel(std::span<const cplx> K, double gamma, double h);

// --- dense complex matrix multiply -----------------------------------------
// C = alpha * A * B + beta * C, all n x n row-major.
void matmul_acc(int n, cplx alpha, const cplx* A, const cplx* B, cplx beta, cplx* C);
void matmul_acc_serial(int n, cplx alpha, const cplx* A, const cplx* B, cplx beta, cplx* C);
void matmul_acc_parallel(int n, cplx alpha, const cplx* A, const cplx* B, cplx beta, cplx* C);

// --- grid quadrature of a Fourier component --------------------------------
// sum_j F[j] * exp(-i(kx*x_j + ky*y_j)) * dx * dy over a uniform nx x ny grid
// (row-major, x fastest) centered so that x_j = (ix - (nx-1)/2) * dx.
cplx grid_fourier(std::span<const cplx> F, int nx, int ny, double dx, double dy,
                  double kx, double ky);
cplx grid_fourier_serial(std::span<const cplx> F, int nx, int ny, double dx, double dy,
                         double kx, double ky);
cplx grid_fourier_parallel(std::span<const cplx> F, int nx, int ny, double dx, double dy,
                           double kx, double ky);

}  // namespace rcdyn::kernels

#endif
