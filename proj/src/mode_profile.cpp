#include "rcdyn/mode_profile.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rcdyn/kernels.hpp"
#include "rcdyn/units.hpp"

namespace rcdyn {

namespace {

using units::e2_over_eps0_ev_nm;
using units::meV;
using units::pi;

// valley projections of the in-plane polarisation: n.p^K ~ n_x + i n_y,
// n.p^K' ~ n_x - i n_y (circular Bloch matrix elements)
inline cplx valley_projection(const std::array<cplx, 2>& n, Valley v) {
    const cplx i{0.0, 1.0};
    return (v == Valley::K) ? n[0] + i * n[1] : n[0] - i * n[1];
}

// 2D trapezoidal weight (1, 1/2 on edges, 1/4 in corners) times the cell area
inline double trap_weight(int ix, int iy, int nx, int ny, double dx, double dy) {
    double w = dx * dy;
    if (ix == 0 || ix == nx - 1) w *= 0.5;
    if (iy == 0 || iy == ny - 1) w *= 0.5;
    return w;
}

double grid_norm_integral(const SampledGrid& g) {
    double s = 0.0;
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            const std::size_t idx = static_cast<std::size_t>(iy) * g.nx + ix;
            s += trap_weight(ix, iy, g.nx, g.ny, g.dx_nm, g.dy_nm) *
                 (std::norm(g.Fx[idx]) + std::norm(g.Fy[idx]));
        }
    return s;
}

void require_normalized_grid(const ModeProfile& mode) {
    if (!mode.is_gaussian() && !mode.grid().normalized)
        throw std::invalid_argument("sampled grid must be normalized first (normalize_grid)");
}

void check_nyquist(const SampledGrid& g, double kx, double ky) {
    const double kx_max = pi / g.dx_nm, ky_max = pi / g.dy_nm;
    if (std::abs(kx) > kx_max || std::abs(ky) > ky_max) {
        std::ostringstream os;
        os << "momentum (" << kx << ", " << ky << ") 1/nm exceeds the grid Nyquist limit (pi/dx = "
           << kx_max << ", pi/dy = " << ky_max << ") 1/nm";
        throw std::invalid_argument(os.str());
    }
}

}  // namespace

double SampledGrid::peak_magnitude() const {
    double m = 0.0;
    for (std::size_t i = 0; i < Fx.size(); ++i)
        m = std::max(m, std::sqrt(std::norm(Fx[i]) + std::norm(Fy[i])));
    return m;
}

double SampledGrid::boundary_magnitude() const {
    double m = 0.0;
    auto probe = [&](int ix, int iy) {
        const std::size_t idx = static_cast<std::size_t>(iy) * nx + ix;
        m = std::max(m, std::sqrt(std::norm(Fx[idx]) + std::norm(Fy[idx])));
    };
    for (int ix = 0; ix < nx; ++ix) {
        probe(ix, 0);
        probe(ix, ny - 1);
    }
    for (int iy = 0; iy < ny; ++iy) {
        probe(0, iy);
        probe(nx - 1, iy);
    }
    return m;
}

void ModeProfile::validate() const {
    if (!(omega_c_eV > 0.0)) throw std::invalid_argument("mode: omega_c must be positive");
    if (!(gamma_c_meV > 0.0)) throw std::invalid_argument("mode: gamma_c must be positive");
    if (is_gaussian()) {
        const auto& g = gaussian();
        if (!(g.L_nm > 0.0) || !(g.L_z_nm > 0.0))
            throw std::invalid_argument("mode: confinement lengths must be positive");
        const double n2 = std::norm(g.n_pol[0]) + std::norm(g.n_pol[1]);
        if (!(n2 > 0.0) || n2 > 1.0 + 1e-12)
            throw std::invalid_argument("mode: polarisation must satisfy 0 < |n|^2 <= 1");
    } else {
        const auto& g = grid();
        if (g.nx < 2 || g.ny < 2) throw std::invalid_argument("mode: grid too small");
        if (!(g.dx_nm > 0.0) || !(g.dy_nm > 0.0))
            throw std::invalid_argument("mode: grid spacings must be positive");
        if (g.Fx.size() != static_cast<std::size_t>(g.nx) * g.ny || g.Fx.size() != g.Fy.size())
            throw std::invalid_argument("mode: grid component size mismatch");
        for (std::size_t i = 0; i < g.Fx.size(); ++i)
            if (!std::isfinite(g.Fx[i].real()) || !std::isfinite(g.Fx[i].imag()) ||
                !std::isfinite(g.Fy[i].real()) || !std::isfinite(g.Fy[i].imag()))
                throw std::invalid_argument("mode: grid contains non-finite field values");
    }
}

double polarisation_prefactor(const std::array<cplx, 2>& n_pol) {
    const double p2_K = std::norm(valley_projection(n_pol, Valley::K));
    const double p2_Kp = std::norm(valley_projection(n_pol, Valley::Kprime));
    const double total = p2_K + p2_Kp;
    if (!(total > 0.0)) throw std::invalid_argument("polarisation vector must be nonzero");
    return (p2_K * p2_K + p2_Kp * p2_Kp) / (total * total);
}

double grid_nyquist_limit(const SampledGrid& grid) {
    return pi / std::max(grid.dx_nm, grid.dy_nm);
}

cplx coupling_gk(const ModeProfile& mode, const DerivedMaterial& material, double kx, double ky,
                 Valley valley) {
    require_normalized_grid(mode);
    const double w_c = mode.omega_c_eV;
    if (mode.is_gaussian()) {
        const auto& g = mode.gaussian();
        const double L = g.L_nm;
        const double k2 = kx * kx + ky * ky;
        const double pref = 2.0 * L * material.hbarV_ev_nm *
                            std::sqrt(e2_over_eps0_ev_nm /
                                      (w_c * material.a_B_nm * material.a_B_nm * g.L_z_nm));
        return -valley_projection(g.n_pol, valley) * pref * std::exp(-0.5 * k2 * L * L) / meV;
    }
    const auto& g = mode.grid();
    check_nyquist(g, kx, ky);
    std::vector<cplx> proj(g.Fx.size());
    const cplx i{0.0, 1.0};
    for (std::size_t j = 0; j < proj.size(); ++j)
        proj[j] = (valley == Valley::K) ? g.Fx[j] + i * g.Fy[j] : g.Fx[j] - i * g.Fy[j];
    const cplx T = kernels::grid_fourier(proj, g.nx, g.ny, g.dx_nm, g.dy_nm, kx, ky);
    const double pref =
        material.hbarV_ev_nm *
        std::sqrt(e2_over_eps0_ev_nm / (pi * w_c * material.a_B_nm * material.a_B_nm));
    return -T * pref / meV;
}

double coupling_gk2_sum(const ModeProfile& mode, const DerivedMaterial& material, double kx,
                        double ky) {
    return std::norm(coupling_gk(mode, material, kx, ky, Valley::K)) +
           std::norm(coupling_gk(mode, material, kx, ky, Valley::Kprime));
}

double rc_coupling_G0(const ModeProfile& mode, const DerivedMaterial& material) {
    require_normalized_grid(mode);
    const double hv2 = material.hbarV_ev_nm * material.hbarV_ev_nm;
    const double aB2 = material.a_B_nm * material.a_B_nm;
    if (mode.is_gaussian()) {
        const auto& g = mode.gaussian();
        const double n2 = std::norm(g.n_pol[0]) + std::norm(g.n_pol[1]);
        const double G2 =
            2.0 * n2 * e2_over_eps0_ev_nm * hv2 / (pi * mode.omega_c_eV * aB2 * g.L_z_nm);
        return std::sqrt(G2) / meV;
    }
    // sum_valleys int |F.p|^2 d^2r = 2 (m0 V)^2 int (|Fx|^2 + |Fy|^2) d^2r
    const double I2 = grid_norm_integral(mode.grid());
    const double G2 = 2.0 * e2_over_eps0_ev_nm * hv2 * I2 / (pi * mode.omega_c_eV * aB2);
    return std::sqrt(G2) / meV;
}

RCWavefunction rc_wavefunction(const ModeProfile& mode) {
    require_normalized_grid(mode);
    RCWavefunction psi;
    const cplx i{0.0, 1.0};
    if (mode.is_gaussian()) {
        const auto& g = mode.gaussian();
        // sample the analytic profile on a box wide enough for converged
        // quadratic and quartic integrals
        const int n = 161;
        const double half = 5.0 * g.L_nm;
        psi.nx = psi.ny = n;
        psi.dx_nm = psi.dy_nm = 2.0 * half / (n - 1);
        psi.psi_K.resize(static_cast<std::size_t>(n) * n);
        psi.psi_Kp.resize(psi.psi_K.size());
        const cplx uK = valley_projection(g.n_pol, Valley::K);
        const cplx uKp = valley_projection(g.n_pol, Valley::Kprime);
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix) {
                const double x = (ix - 0.5 * (n - 1)) * psi.dx_nm;
                const double y = (iy - 0.5 * (n - 1)) * psi.dy_nm;
                const double env = std::exp(-(x * x + y * y) / (2.0 * g.L_nm * g.L_nm));
                const std::size_t idx = static_cast<std::size_t>(iy) * n + ix;
                psi.psi_K[idx] = -uK * env;
                psi.psi_Kp[idx] = -uKp * env;
            }
    } else {
        const auto& g = mode.grid();
        psi.nx = g.nx;
        psi.ny = g.ny;
        psi.dx_nm = g.dx_nm;
        psi.dy_nm = g.dy_nm;
        psi.psi_K.resize(g.Fx.size());
        psi.psi_Kp.resize(g.Fx.size());
        for (std::size_t j = 0; j < g.Fx.size(); ++j) {
            psi.psi_K[j] = -(g.Fx[j] + i * g.Fy[j]);
            psi.psi_Kp[j] = -(g.Fx[j] - i * g.Fy[j]);
        }
    }
    double norm = 0.0;
    for (int iy = 0; iy < psi.ny; ++iy)
        for (int ix = 0; ix < psi.nx; ++ix) {
            const std::size_t idx = static_cast<std::size_t>(iy) * psi.nx + ix;
            norm += trap_weight(ix, iy, psi.nx, psi.ny, psi.dx_nm, psi.dy_nm) *
                    (std::norm(psi.psi_K[idx]) + std::norm(psi.psi_Kp[idx]));
        }
    if (!(norm > 0.0))
        throw std::invalid_argument("rc_wavefunction: projected field is identically zero");
    const double scale = 1.0 / std::sqrt(norm);
    for (auto& v : psi.psi_K) v *= scale;
    for (auto& v : psi.psi_Kp) v *= scale;
    return psi;
}

double RCWavefunction::norm_integral() const {
    double s = 0.0;
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            const std::size_t idx = static_cast<std::size_t>(iy) * nx + ix;
            s += trap_weight(ix, iy, nx, ny, dx_nm, dy_nm) *
                 (std::norm(psi_K[idx]) + std::norm(psi_Kp[idx]));
        }
    return s;
}

double RCWavefunction::quartic_integral() const {
    double s = 0.0;
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            const std::size_t idx = static_cast<std::size_t>(iy) * nx + ix;
            const double aK = std::norm(psi_K[idx]), aKp = std::norm(psi_Kp[idx]);
            s += trap_weight(ix, iy, nx, ny, dx_nm, dy_nm) * (aK * aK + aKp * aKp);
        }
    return s;
}

double rc_nonlinearity_W0(const ModeProfile& mode, const DerivedMaterial& material) {
    require_normalized_grid(mode);
    if (mode.is_gaussian()) {
        const auto& g = mode.gaussian();
        const double eta = polarisation_prefactor(g.n_pol);
        return material.SW000_eV_nm2 * eta / (2.0 * pi * g.L_nm * g.L_nm) / meV;
    }
    const auto psi = rc_wavefunction(mode);
    return material.SW000_eV_nm2 * psi.quartic_integral() / meV;
}

namespace {

// <k^2> of the projected profile from the real-space gradient (Parseval);
// the valley structure cancels, leaving the plain field components.
double grid_mean_k2(const SampledGrid& g) {
    double grad = 0.0, norm = 0.0;
    auto at = [&](const std::vector<cplx>& F, int ix, int iy) {
        return F[static_cast<std::size_t>(iy) * g.nx + ix];
    };
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            const double w = trap_weight(ix, iy, g.nx, g.ny, g.dx_nm, g.dy_nm);
            for (const auto* F : {&g.Fx, &g.Fy}) {
                const int ixm = std::max(ix - 1, 0), ixp = std::min(ix + 1, g.nx - 1);
                const int iym = std::max(iy - 1, 0), iyp = std::min(iy + 1, g.ny - 1);
                const cplx ddx = (at(*F, ixp, iy) - at(*F, ixm, iy)) / ((ixp - ixm) * g.dx_nm);
                const cplx ddy = (at(*F, ix, iyp) - at(*F, ix, iym)) / ((iyp - iym) * g.dy_nm);
                grad += w * (std::norm(ddx) + std::norm(ddy));
                norm += w * std::norm(at(*F, ix, iy));
            }
        }
    if (!(norm > 0.0)) throw std::invalid_argument("grid field is identically zero");
    return grad / norm;
}

}  // namespace

RCParams rc_params(const ModeProfile& mode, const DerivedMaterial& material) {
    RCParams p;
    p.G0_meV = rc_coupling_G0(mode, material);
    p.W0p_meV = rc_nonlinearity_W0(mode, material);
    const double kappa = dispersion_coefficient_ev_nm2(material);
    if (mode.is_gaussian()) {
        const double L = mode.gaussian().L_nm;
        p.xi_meV = kappa / (L * L) / meV;
        p.Omega0_eV = material.omega0_eV + p.xi_meV * meV;
    } else {
        p.xi_meV = 0.0;
        p.Omega0_eV = material.omega0_eV + kappa * grid_mean_k2(mode.grid());
    }
    return p;
}

SpectralDensity mode_spectral_density(const ModeProfile& mode, const DerivedMaterial& material,
                                      double support_factor) {
    const RCParams p = rc_params(mode, material);
    if (mode.is_gaussian())
        return gaussian_J(p.G0_meV, p.xi_meV, material.omega0_eV, support_factor);
    const auto& g = mode.grid();
    const double kappa = dispersion_coefficient_ev_nm2(material);
    const double k_nyq = 0.999 * grid_nyquist_limit(g);
    const double xi_proxy = p.Omega0_eV - material.omega0_eV;
    const double b = std::min(material.omega0_eV + support_factor * xi_proxy,
                              material.omega0_eV + kappa * k_nyq * k_nyq);
    auto sampler = [&](double kx, double ky) { return coupling_gk2_sum(mode, material, kx, ky); };
    return numeric_J(sampler, material, k_nyq, b, 512, 32);
}

ModeProfile load_field_grid(const std::string& path, double omega_c_eV, double gamma_c_meV) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open field grid: " + path);
    SampledGrid g;
    if (!(in >> g.nx >> g.ny >> g.dx_nm >> g.dy_nm >> g.z0_nm))
        throw std::runtime_error(path + ": malformed header (want: nx ny dx_nm dy_nm z0_nm)");
    if (g.nx < 2 || g.ny < 2 || !(g.dx_nm > 0.0) || !(g.dy_nm > 0.0))
        throw std::runtime_error(path + ": invalid grid geometry");
    const std::size_t total = static_cast<std::size_t>(g.nx) * g.ny;
    g.Fx.assign(total, cplx{});
    g.Fy.assign(total, cplx{});
    std::vector<bool> seen(total, false);
    for (std::size_t r = 0; r < total; ++r) {
        int ix, iy;
        double rex, imx, rey, imy;
        if (!(in >> ix >> iy >> rex >> imx >> rey >> imy))
            throw std::runtime_error(path + ": truncated grid data at row " + std::to_string(r));
        if (ix < 0 || ix >= g.nx || iy < 0 || iy >= g.ny)
            throw std::runtime_error(path + ": cell index out of range at row " +
                                     std::to_string(r));
        const std::size_t idx = static_cast<std::size_t>(iy) * g.nx + ix;
        if (seen[idx])
            throw std::runtime_error(path + ": duplicate cell at row " + std::to_string(r));
        seen[idx] = true;
        g.Fx[idx] = cplx{rex, imx};
        g.Fy[idx] = cplx{rey, imy};
    }
    ModeProfile mode{std::move(g), omega_c_eV, gamma_c_meV};
    mode.validate();
    return mode;
}

void save_field_grid(const ModeProfile& mode, const std::string& path) {
    const auto& g = mode.grid();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write field grid: " + path);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g %.17g\n", g.nx, g.ny, g.dx_nm, g.dy_nm,
                  g.z0_nm);
    out << buf;
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            const std::size_t idx = static_cast<std::size_t>(iy) * g.nx + ix;
            std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g %.17g %.17g\n", ix, iy,
                          g.Fx[idx].real(), g.Fx[idx].imag(), g.Fy[idx].real(), g.Fy[idx].imag());
            out << buf;
        }
}

ModeProfile normalize_grid(const ModeProfile& mode, double eps_eff, double L_z_eff_nm,
                           std::vector<std::string>* warnings) {
    if (mode.is_gaussian())
        throw std::invalid_argument("normalize_grid applies to sampled grids only");
    if (!(eps_eff > 0.0) || !(L_z_eff_nm > 0.0))
        throw std::invalid_argument("normalize_grid: eps_eff and L_z_eff must be positive");
    mode.validate();
    ModeProfile out = mode;
    auto& g = std::get<SampledGrid>(out.shape);
    const double I2 = grid_norm_integral(g);
    if (!(I2 > 0.0)) throw std::invalid_argument("normalize_grid: field is identically zero");
    const double scale = 1.0 / std::sqrt(eps_eff * L_z_eff_nm * I2);
    for (auto& v : g.Fx) v *= scale;
    for (auto& v : g.Fy) v *= scale;
    g.normalized = true;
    if (warnings) {
        const double peak = g.peak_magnitude();
        if (peak > 0.0 && g.boundary_magnitude() > 0.01 * peak)
            warnings->push_back(
                "field grid has not decayed at the boundary (boundary magnitude above 1% of "
                "peak); quadratures may be truncated");
    }
    return out;
}

}  // namespace rcdyn
