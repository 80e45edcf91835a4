#ifndef RCDYN_MODE_PROFILE_HPP
#define RCDYN_MODE_PROFILE_HPP

#include <array>
#include <complex>
#include <string>
#include <variant>
#include <vector>

#include "rcdyn/cmat.hpp"
#include "rcdyn/materials.hpp"
#include "rcdyn/spectral.hpp"

namespace rcdyn {

enum class Valley { K, Kprime };

/// Analytic mode: Gaussian lateral profile with confinement length L, an
/// out-of-plane confinement length L_z, and a complex in-plane polarisation
/// vector n with |n| <= 1 encoding the in-plane projection of the field.
struct GaussianSeparable {
    double L_nm = 0.0;
    double L_z_nm = 0.0;
    std::array<cplx, 2> n_pol{cplx{1.0, 0.0}, cplx{0.0, 0.0}};
};

/// Sampled in-plane field components at the sheet plane z0 on a uniform grid,
/// row-major with x running fastest; cell (ix, iy) sits at
/// ((ix-(nx-1)/2) dx, (iy-(ny-1)/2) dy).
struct SampledGrid {
    int nx = 0, ny = 0;
    double dx_nm = 0.0, dy_nm = 0.0, z0_nm = 0.0;
    std::vector<cplx> Fx, Fy;
    bool normalized = false;

    double peak_magnitude() const;
    double boundary_magnitude() const;
};

struct ModeProfile {
    std::variant<GaussianSeparable, SampledGrid> shape;
    double omega_c_eV = 0.0;   // resonance frequency
    double gamma_c_meV = 0.0;  // field decay rate

    bool is_gaussian() const { return std::holds_alternative<GaussianSeparable>(shape); }
    const GaussianSeparable& gaussian() const { return std::get<GaussianSeparable>(shape); }
    const SampledGrid& grid() const { return std::get<SampledGrid>(shape); }

    void validate() const;
};

struct RCParams {
    double G0_meV = 0.0;    // light-matter coupling
    double Omega0_eV = 0.0; // reaction-coordinate frequency
    double W0p_meV = 0.0;   // nonlinear interaction
    double xi_meV = 0.0;    // cutoff frequency (Gaussian modes only)
};

/// Per-valley reaction-coordinate amplitudes on the sheet plane, jointly
/// normalized so that sum_valleys int |psi|^2 d^2r = 1.
struct RCWavefunction {
    int nx = 0, ny = 0;
    double dx_nm = 0.0, dy_nm = 0.0;
    std::vector<cplx> psi_K, psi_Kp;  // 1/nm amplitudes

    double norm_integral() const;     // should be 1
    double quartic_integral() const;  // sum_valleys int |psi|^4 d^2r [1/nm^2]
};

// eta_n = sum_a |n.p_a|^4 / (sum_a |n.p_a|^2)^2 with circular valley matrix
// elements; lies in [1/2, 1]. Throws on a zero vector.
double polarisation_prefactor(const std::array<cplx, 2>& n_pol);

// Valley-resolved coupling sqrt(S)*hbar*g_k in meV nm at in-plane momentum
// (kx, ky) in 1/nm. SampledGrid modes must be normalized and |k| must stay
// below the grid Nyquist limit.
cplx coupling_gk(const ModeProfile& mode, const DerivedMaterial& material, double kx, double ky,
                 Valley valley);

// Valley-summed |sqrt(S) hbar g_k|^2 in (meV nm)^2, the quantity entering the
// spectral density.
double coupling_gk2_sum(const ModeProfile& mode, const DerivedMaterial& material, double kx,
                        double ky);

// hbar*G0 in meV (closed form for separable modes, quadrature of the
// projected field profile for grids).
double rc_coupling_G0(const ModeProfile& mode, const DerivedMaterial& material);

// hbar*W0' in meV.
double rc_nonlinearity_W0(const ModeProfile& mode, const DerivedMaterial& material);

RCWavefunction rc_wavefunction(const ModeProfile& mode);

// G0, Omega0, W0' and (for Gaussian modes) xi in one bundle.
RCParams rc_params(const ModeProfile& mode, const DerivedMaterial& material);

// The exciton spectral density of this mode. Gaussian modes return the
// analytic exponential form; grids are tabulated through numeric_J.
SpectralDensity mode_spectral_density(const ModeProfile& mode, const DerivedMaterial& material,
                                      double support_factor = 40.0);

// Text grid file: header "nx ny dx_nm dy_nm z0_nm", then nx*ny rows of
// "ix iy ReFx ImFx ReFy ImFy" in row-major order.
ModeProfile load_field_grid(const std::string& path, double omega_c_eV, double gamma_c_meV);
void save_field_grid(const ModeProfile& mode, const std::string& path);

// Scales the grid so that eps_eff * L_z_eff * int |F|^2 d^2r = 1. Appends a
// note to `warnings` when the field has not decayed at the grid boundary.
ModeProfile normalize_grid(const ModeProfile& mode, double eps_eff, double L_z_eff_nm,
                           std::vector<std::string>* warnings = nullptr);

// Nyquist bound of a sampled grid, pi/max(dx, dy).
double grid_nyquist_limit(const SampledGrid& grid);

}  // namespace rcdyn

#endif
