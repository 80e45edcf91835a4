#ifndef RCDYN_SOLVERS_HPP
#define RCDYN_SOLVERS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rcdyn/liouville.hpp"
#include "rcdyn/materials.hpp"
#include "rcdyn/spectral.hpp"

namespace rcdyn {

struct DriveSpec {
    enum class Kind { None, CW, GaussianPulse };
    Kind kind = Kind::None;
    double F_meV = 0.0;       // CW amplitude, hbar*F
    double omega_d_eV = 0.0;  // drive frequency
    double A_meV = 0.0;       // pulse amplitude, hbar*A
    double Delta_fs = 0.0;    // pulse width
    double t0_fs = -1.0;      // pulse center; < 0 selects the default 3*Delta

    void validate() const;
    double center_fs() const { return t0_fs < 0.0 ? 3.0 * Delta_fs : t0_fs; }
    bool driven() const { return kind != Kind::None; }
};

/// Scalar parameters of the resonator + reaction-coordinate block.
struct SystemParams {
    double G0_meV = 0.0;
    double Omega0_eV = 0.0;
    double omega0_eV = 0.0;   // exciton gap (environment support edge)
    double omega_c_eV = 0.0;
    double gamma_c_meV = 0.0; // field decay rate, hbar*gamma_c
    double W0p_meV = 0.0;
};

struct Trajectory {
    std::vector<double> t_fs;
    std::map<std::string, std::vector<double>> series;
    std::vector<double> trace_error;
    std::map<std::string, double> params;     // resolved numeric parameters
    std::map<std::string, std::string> info;  // truncation, solver, hash

    const std::vector<double>& get(const std::string& name) const;
    void validate() const;
};

// --- exact single-excitation evolution ---------------------------------------

struct ExactOptions {
    double step_safety = 0.01;       // (E_max h / hbar) <= step_safety
    double max_step_fs = 0.0;        // 0: from step_safety only
    bool richardson_estimate = false;
};

struct ExactResult {
    std::vector<double> t_fs;
    std::vector<cplx> phi_c;          // resonator amplitude, phi_c(0) = 1
    std::vector<double> population;   // |phi_c|^2
    double step_fs = 0.0;
    double richardson_error = 0.0;    // max |phi_h - phi_{h/2}| / 3 when requested
};

// Memory-kernel integration of the resonator amplitude coupled to the full
// exciton continuum described by J. Gaussian densities use the closed kernel
// G0^2 exp(-i(w0-wc)tau)/(1 + i xi tau); tabulated densities use segmentwise
// exact (Filon-type) quadrature of the kernel integral.
ExactResult exact_single_excitation(const SpectralDensity& J, double omega_c_eV,
                                    double gamma_c_meV, const std::vector<double>& t_grid_fs,
                                    const ExactOptions& opts = {});

// Kernel table K(tau) in 1/fs^2 on a uniform tau grid (exposed for testing).
std::vector<cplx> memory_kernel(const SpectralDensity& J, double omega_c_eV, double h_fs,
                                std::size_t n_samples);

// --- master-equation drivers ---------------------------------------------------

enum class MarkovVariant { Full, Simplified };
enum class InitialState { Vacuum, SinglePhoton };

struct MarkovOptions {
    MarkovVariant variant = MarkovVariant::Simplified;
    bool include_residual = true;
    bool include_lamb_shift = false;  // computed but not applied by default
    bool full_eigenbasis = false;     // project on the full system eigenbasis
    InitialState initial = InitialState::SinglePhoton;
    std::variant<PerModeFock, TotalExcitationSector> truncation = TotalExcitationSector{1};
    double tol = 1e-8;
    bool audit_positivity = true;
};

Trajectory markov_trajectory(const SystemParams& sys, const SpectralDensity& J_res,
                             const DriveSpec& drive, const std::optional<PhononRates>& rates,
                             const std::vector<double>& t_grid_fs, const MarkovOptions& opts = {});

struct ChainOptions {
    InitialState initial = InitialState::SinglePhoton;
    std::variant<PerModeFock, TotalExcitationSector> truncation = TotalExcitationSector{1};
    double tol = 1e-8;
    bool audit_positivity = true;
};

// Truncated-chain master equation; the trajectory includes the population of
// the last chain site as the truncation audit.
Trajectory chain_trajectory(const ChainParams& chain, const SystemParams& sys,
                            const DriveSpec& drive, const std::optional<PhononRates>& rates,
                            const std::vector<double>& t_grid_fs, const ChainOptions& opts = {});

// --- error metric and spectrum -------------------------------------------------

// int (n - ref)^2 dt / int ref^2 dt on a common grid (trapezoidal).
double relative_error(const std::vector<double>& t_fs, const std::vector<double>& n,
                      const std::vector<double>& n_ref);

struct SpectrumOptions {
    double F_meV = 0.036;   // weak probe
    int fock_cutoff = 2;
    MarkovVariant variant = MarkovVariant::Simplified;
    bool include_residual = true;
    std::optional<PhononRates> rates;
    bool linearity_check = true;
    double linearity_tol = 0.01;
};

struct SpectrumResult {
    std::vector<double> omega_d_eV;
    std::vector<double> n_ss;
    std::vector<double> n_ss_normalized;
};

// Steady-state resonator population against the drive frequency, using the
// simplified (or full) secular master equation.
SpectrumResult excitation_spectrum(const SystemParams& sys, const SpectralDensity& J_res,
                                   const std::vector<double>& omega_d_grid_eV,
                                   const SpectrumOptions& opts = {});

void export_trajectory_csv(const Trajectory& traj, const std::string& path);
void export_spectrum_csv(const SpectrumResult& spec, const std::string& path);

// uniform time grid helper
std::vector<double> linspace(double a, double b, int n);

}  // namespace rcdyn

#endif
