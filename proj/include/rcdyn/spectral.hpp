#ifndef RCDYN_SPECTRAL_HPP
#define RCDYN_SPECTRAL_HPP

#include <functional>
#include <string>
#include <vector>

#include "rcdyn/materials.hpp"

namespace rcdyn {

/// Evaluable spectral density J(omega) on a support [a, b]. Frequencies are
/// hbar*omega in eV and J itself is stored in eV, so that the integral of J
/// over the support equals (hbar*G0)^2 in eV^2.
class SpectralDensity {
public:
    enum class Kind {
        AnalyticGaussian,  // (G0^2/xi) exp(-(w-w0)/xi) above w0
        GaussianResidual,  // xi e^x / (Ei(x)^2 + pi^2), x = (w-w0)/xi
        Tabulated,         // linear interpolation of (w, J) samples
    };

    static SpectralDensity gaussian(double G0_meV, double xi_meV, double omega0_eV,
                                    double support_factor = 40.0);
    static SpectralDensity gaussian_residual(double G0_meV, double xi_meV, double omega0_eV,
                                             double support_factor = 40.0);
    static SpectralDensity tabulated(std::vector<double> omega_eV, std::vector<double> J_eV);

    double operator()(double omega_eV) const;
    Kind kind() const { return kind_; }
    double support_min() const { return a_; }
    double support_max() const { return b_; }

    // analytic parameters (valid for the two Gaussian kinds)
    double G0_meV() const { return G0_meV_; }
    double xi_meV() const { return xi_meV_; }
    double omega0_eV() const { return omega0_eV_; }

    const std::vector<double>& grid() const { return w_; }
    const std::vector<double>& values() const { return J_; }

    // Sample this density onto a fresh log-spaced grid (dense near the lower
    // support edge). Used by the reducer pipeline and the chain recurrence.
    SpectralDensity resample(int n_points) const;

private:
    Kind kind_ = Kind::Tabulated;
    double G0_meV_ = 0.0, xi_meV_ = 0.0, omega0_eV_ = 0.0;
    double a_ = 0.0, b_ = 0.0;
    std::vector<double> w_, J_;
};

struct ChainParams {
    std::vector<double> Omega_eV;  // mode frequencies, n = 0..N
    std::vector<double> G_meV;     // couplings; G[0] couples mode 0 to the resonator
    int depth() const { return static_cast<int>(Omega_eV.size()) - 1; }
};

struct GridOptions {
    int n_points = 4096;
    double log_stretch = 6.0;  // clustering strength toward the lower edge
};

// log-spaced grid on [a, b], node 0 at a, last node at b
std::vector<double> log_grid(double a, double b, int n, double stretch = 6.0);

SpectralDensity gaussian_J(double G0_meV, double xi_meV, double omega0_eV,
                           double support_factor = 40.0);

// Closed-form residual density of a Gaussian J (exponential-integral form);
// kept separate from the reducer pipeline so the two routes can be compared.
SpectralDensity gaussian_residual_J(double G0_meV, double xi_meV, double omega0_eV,
                                    double support_factor = 40.0);

/// Tabulates J(omega) from a momentum-space coupling sampler. The sampler
/// returns the valley-summed |hbar g(k)|^2 in (meV nm)^2 at in-plane momentum
/// (kx, ky); the angular integral and the change of variables to frequency are
/// handled here. Throws if k_max does not cover the requested support.
SpectralDensity numeric_J(const std::function<double(double, double)>& gk2_sampler,
                          const DerivedMaterial& material, double k_max_inv_nm,
                          double target_b_eV = 0.0, int n_omega = 2048, int n_theta = 64);

// (Omega0 in eV, G0 in meV): first moment and square root of the total weight.
std::pair<double, double> moments(const SpectralDensity& J);

// Principal-value reducer at a single frequency inside the open support.
double reducer(const SpectralDensity& J, double omega_eV, const GridOptions& opts = {});

// P int J(nu)/(omega - nu) dnu for any omega: reduces to the reducer inside
// the support and to a plain quadrature outside. Used for the Lamb shift.
double cauchy_transform(const SpectralDensity& J, double omega_eV, const GridOptions& opts = {});

// J_res = G0^2 J / (Phi^2 + pi^2 J^2), tabulated via the reducer pipeline.
SpectralDensity residual_J(const SpectralDensity& J, const GridOptions& opts = {});

// Secular dissipation rate 2*pi*J_res(omega_rot + omega_d) in meV (zero
// outside the support).
double markov_rate(const SpectralDensity& J_res, double omega_rot_eV, double omega_d_eV);

// Iterated reaction-coordinate extraction. Entry n = 0 reproduces moments(J).
ChainParams chain_map(const SpectralDensity& J, int N, const GridOptions& opts = {});

void export_density_csv(const SpectralDensity& J, const std::string& path);
void export_chain_csv(const ChainParams& chain, const std::string& path);

}  // namespace rcdyn

#endif
