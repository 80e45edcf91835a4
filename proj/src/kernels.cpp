#include "rcdyn/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rcdyn::kernels {

namespace {

std::atomic<bool>& parallel_flag() {
    static std::atomic<bool> flag = [] {
        if (std::getenv("RCDYN_SERIAL") != nullptr) return false;
#ifdef _OPENMP
        return omp_get_max_threads() > 1;
#else
        return false;
#endif
    }();
    return flag;
}

// trapezoidal weights on a (possibly nonuniform) grid
std::vector<double> trapezoid_weights(std::span<const double> w) {
    const std::size_t m = w.size();
    std::vector<double> wt(m, 0.0);
    if (m < 2) return wt;
    wt[0] = 0.5 * (w[1] - w[0]);
    wt[m - 1] = 0.5 * (w[m - 1] - w[m - 2]);
    for (std::size_t j = 1; j + 1 < m; ++j) wt[j] = 0.5 * (w[j + 1] - w[j - 1]);
    return wt;
}

inline double reducer_point(std::span<const double> w, std::span<const double> J,
                            std::span<const double> dJ, std::span<const double> wt,
                            double a, double b, std::size_t i) {
    const double wi = w[i];
    if (!(wi > a) || !(wi < b)) return 0.0;  // boundary nodes carry no valid value
    const double Ji = J[i];
    double integral = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
        const double d = w[j] - wi;
        const double g = (j == i) ? dJ[i] : (J[j] - Ji) / d;
        integral += wt[j] * g;
    }
    return Ji * std::log((wi - a) / (b - wi)) - integral;
}

}  // namespace

bool parallel_enabled() { return parallel_flag().load(); }
void set_parallel(bool on) { parallel_flag().store(on); }

void tabulate_reducer_serial(std::span<const double> w, std::span<const double> J,
                             std::span<const double> dJ, double a, double b,
                             std::span<double> phi) {
    const auto wt = trapezoid_weights(w);
    for (std::size_t i = 0; i < w.size(); ++i) phi[i] = reducer_point(w, J, dJ, wt, a, b, i);
}

void tabulate_reducer_parallel(std::span<const double> w, std::span<const double> J,
                               std::span<const double> dJ, double a, double b,
                               std::span<double> phi) {
    const auto wt = trapezoid_weights(w);
    const long m = static_cast<long>(w.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < m; ++i)
        phi[static_cast<std::size_t>(i)] =
            reducer_point(w, J, dJ, wt, a, b, static_cast<std::size_t>(i));
}

void tabulate_reducer(std::span<const double> w, std::span<const double> J,
                      std::span<const double> dJ, double a, double b, std::span<double> phi) {
    if (w.size() != J.size() || w.size() != dJ.size() || w.size() != phi.size())
        throw std::invalid_argument("tabulate_reducer: size mismatch");
    if (parallel_enabled())
        tabulate_reducer_parallel(w, J, dJ, a, b, phi);
    else
        tabulate_reducer_serial(w, J, dJ, a, b, phi);
}

namespace {

constexpr std::size_t kVolterraBlock = 2048;

// S_{n+1} = h * (K[n+1]/2 + sum_{j=1..n} K[n+1-j] * y[j]), history convolution
// of the product-trapezoidal scheme. y[0] = 1 is folded into the first term.
// Both variants sum identical blocks and combine them in block order, so the
// serial and parallel results agree bitwise.
template <bool Parallel>
cplx history_sum(std::span<const cplx> K, const std::vector<cplx>& y, std::size_t n, double h,
                 std::vector<cplx>& partial) {
    const std::size_t nblk = n / kVolterraBlock + 1;
    partial.assign(nblk, cplx{0.0, 0.0});
    const auto block = [&](std::size_t bi) {
        const std::size_t j0 = bi * kVolterraBlock + 1;
        const std::size_t j1 = std::min(j0 + kVolterraBlock, n + 1);
        cplx acc{0.0, 0.0};
        for (std::size_t j = j0; j < j1; ++j) acc += K[n + 1 - j] * y[j];
        partial[bi] = acc;
    };
    if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
        for (long bi = 0; bi < static_cast<long>(nblk); ++bi) block(static_cast<std::size_t>(bi));
    } else {
        for (std::size_t bi = 0; bi < nblk; ++bi) block(bi);
    }
    cplx s = 0.5 * K[n + 1];
    for (const cplx& p : partial) s += p;  // fixed combine order
    return h * s;
}

template <bool Parallel>
std::vector<cplx> volterra_run(std::span<const cplx> K, double gamma, double h) {
    if (K.size() < 2) throw std::invalid_argument("volterra: kernel table too short");
    const std::size_t N = K.size();
    std::vector<cplx> y(N);
    std::vector<cplx> partial;
    y[0] = 1.0;
    cplx z = 0.0;  // running convolution value z_n
    const cplx denom = 1.0 + 0.5 * h * gamma + 0.25 * h * h * K[0];
    for (std::size_t n = 0; n + 1 < N; ++n) {
        const cplx S = history_sum<Parallel>(K, y, n, h, partial);
        y[n + 1] = (y[n] * (1.0 - 0.5 * h * gamma) - 0.5 * h * (z + S)) / denom;
        z = S + 0.5 * h * K[0] * y[n + 1];
    }
    return y;
}

}  // namespace

std::vector<cplx> volterra_trapezoid_serial(std::span<const cplx> K, double gamma, double h) {
    return volterra_run<false>(K, gamma, h);
}

std::vector<cplx> volterra_trapezoid_parallel(std::span<const cplx> K, double gamma, double h) {
    return volterra_run<true>(K, gamma, h);
}

std::vector<cplx> volterra_trapezoid(std::span<const cplx> K, double gamma, double h) {
    // the blocked inner reduction only pays off for long histories
    if (parallel_enabled() && K.size() > 2 * kVolterraBlock)
        return volterra_trapezoid_parallel(K, gamma, h);
    return volterra_trapezoid_serial(K, gamma, h);
}

namespace {

inline void matmul_row_range(int n, cplx alpha, const cplx* A, const cplx* B, cplx beta, cplx* C,
                             int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
        cplx* Ci = C + static_cast<std::size_t>(i) * n;
        if (beta == cplx{0.0, 0.0}) {
            for (int j = 0; j < n; ++j) Ci[j] = 0.0;
        } else if (beta != cplx{1.0, 0.0}) {
            for (int j = 0; j < n; ++j) Ci[j] *= beta;
        }
        const cplx* Ai = A + static_cast<std::size_t>(i) * n;
        for (int k = 0; k < n; ++k) {
            const cplx aik = alpha * Ai[k];
            if (aik == cplx{0.0, 0.0}) continue;
            const cplx* Bk = B + static_cast<std::size_t>(k) * n;
            for (int j = 0; j < n; ++j) Ci[j] += aik * Bk[j];
        }
    }
}

}  // namespace

void matmul_acc_serial(int n, cplx alpha, const cplx* A, const cplx* B, cplx beta, cplx* C) {
    matmul_row_range(n, alpha, A, B, beta, C, 0, n);
}

void matmul_acc_parallel(int n, cplx alpha, const cplx* A, const cplx* B, cplx beta, cplx* C) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) matmul_row_range(n, alpha, A, B, beta, C, i, i + 1);
}

void matmul_acc(int n, cplx alpha, const cplx* A, const cplx* B, cplx beta, cplx* C) {
    if (parallel_enabled() && n >= 64)
        matmul_acc_parallel(n, alpha, A, B, beta, C);
    else
        matmul_acc_serial(n, alpha, A, B, beta, C);
}

namespace {

// one grid row: sum_ix F(ix) * exp(-i kx x_ix), phase advanced by recurrence
inline cplx fourier_row(const cplx* F, int nx, double dx, double kx, double x0) {
    const cplx step{std::cos(kx * dx), -std::sin(kx * dx)};
    cplx phase{std::cos(kx * x0), -std::sin(kx * x0)};
    cplx acc{0.0, 0.0};
    for (int ix = 0; ix < nx; ++ix) {
        acc += F[ix] * phase;
        phase *= step;
    }
    return acc;
}

template <bool Parallel>
cplx grid_fourier_run(std::span<const cplx> F, int nx, int ny, double dx, double dy, double kx,
                      double ky) {
    const double x0 = -0.5 * (nx - 1) * dx;
    const double y0 = -0.5 * (ny - 1) * dy;
    std::vector<cplx> row_sum(static_cast<std::size_t>(ny));
    if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
        for (int iy = 0; iy < ny; ++iy)
            row_sum[static_cast<std::size_t>(iy)] =
                fourier_row(F.data() + static_cast<std::size_t>(iy) * nx, nx, dx, kx, x0);
    } else {
        for (int iy = 0; iy < ny; ++iy)
            row_sum[static_cast<std::size_t>(iy)] =
                fourier_row(F.data() + static_cast<std::size_t>(iy) * nx, nx, dx, kx, x0);
    }
    cplx acc{0.0, 0.0};
    for (int iy = 0; iy < ny; ++iy) {
        const double y = y0 + iy * dy;
        acc += row_sum[static_cast<std::size_t>(iy)] * cplx{std::cos(ky * y), -std::sin(ky * y)};
    }
    return acc * (dx * dy);
}

}  // namespace

cplx grid_fourier_serial(std::span<const cplx> F, int nx, int ny, double dx, double dy, double kx,
                         double ky) {
    return grid_fourier_run<false>(F, nx, ny, dx, dy, kx, ky);
}

cplx grid_fourier_parallel(std::span<const cplx> F, int nx, int ny, double dx, double dy, double kx,
                           double ky) {
    return grid_fourier_run<true>(F, nx, ny, dx, dy, kx, ky);
}

cplx grid_fourier(std::span<const cplx> F, int nx, int ny, double dx, double dy, double kx,
                  double ky) {
    if (F.size() != static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny))
        throw std::invalid_argument("grid_fourier: size mismatch");
    if (parallel_enabled())
        return grid_fourier_parallel(F, nx, ny, dx, dy, kx, ky);
    return grid_fourier_serial(F, nx, ny, dx, dy, kx, ky);
}

}  // namespace rcdyn::kernels
