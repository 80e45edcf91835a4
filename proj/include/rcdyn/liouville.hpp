#ifndef RCDYN_LIOUVILLE_HPP
#define RCDYN_LIOUVILLE_HPP

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "rcdyn/cmat.hpp"
#include "rcdyn/spectral.hpp"

namespace rcdyn {

// --- truncated product spaces ----------------------------------------------

/// Independent Fock cutoff per mode; cutoff = maximum occupation.
struct PerModeFock {
    std::vector<int> cutoffs;
};

/// All occupation vectors with total quanta <= max_total (the vacuum is part
/// of the basis; it is the sink of every decay channel).
struct TotalExcitationSector {
    int max_total = 1;
};

struct SpaceConfig {
    std::vector<std::string> mode_names;
    std::variant<PerModeFock, TotalExcitationSector> truncation = TotalExcitationSector{1};
    std::size_t memory_budget_bytes = 1ull << 31;

    // basis size, computable before any operator is allocated
    std::size_t dimension() const;
    // number of basis states carrying exactly `total` quanta
    std::size_t states_with_total(int total) const;
    void check_budget() const;  // throws when dimension^2 matrices exceed the budget
};

/// Enumerated basis over a SpaceConfig with bosonic operator builders.
class StateSpace {
public:
    explicit StateSpace(SpaceConfig cfg);

    int dim() const { return dim_; }
    int n_modes() const { return static_cast<int>(cfg_.mode_names.size()); }
    const SpaceConfig& config() const { return cfg_; }
    const std::vector<std::vector<int>>& basis() const { return basis_; }

    CMat annihilator(int mode) const;
    CMat number_op(int mode) const;
    // |occ><occ| as a density operator; throws if the state is not in the basis
    CMat fock_density(const std::vector<int>& occ) const;
    int basis_index(const std::vector<int>& occ) const;  // -1 when absent

private:
    SpaceConfig cfg_;
    int dim_ = 0;
    std::vector<std::vector<int>> basis_;
    std::map<std::vector<int>, int> index_;
};

// --- generator --------------------------------------------------------------

/// One Lindblad channel: weight * D(C, rho) with
/// D(C, rho) = C rho C† - (C†C rho + rho C†C)/2 and weight = hbar * rate (eV).
struct LindbladTerm {
    double weight_eV = 0.0;
    CMat op;
    std::string label;
};

/// Generator in the frame rotating at the drive frequency. All energies are
/// hbar-scaled (eV); the drive amplitude callback returns hbar*F(t) in eV.
struct Liouvillian {
    CMat H0;
    CMat H_drive;  // multiplied by drive_amplitude_eV(t); empty when undriven
    std::function<double(double)> drive_amplitude_eV;
    std::vector<LindbladTerm> collapse;

    int dim() const { return H0.n; }
    bool driven() const { return static_cast<bool>(drive_amplitude_eV) && H_drive.n > 0; }
};

// dρ/dt in 1/fs at time t for the current state.
CMat lindblad_rhs(const Liouvillian& L, const CMat& rho, double t_fs = 0.0);

// Dense matrix of the (time-independent) generator acting on row-major
// vectorized density operators, in 1/fs. Throws for time-dependent drives.
Eigen::MatrixXcd build_superoperator(const Liouvillian& L);

// --- Hamiltonians ------------------------------------------------------------

// Resonator + reaction coordinate block in the rotating frame:
// (w_c - w_d) n_c + (Omega0 - w_d) n_x + W0' n_x (n_x - 1) + G0 (a† B + B† a).
// Mode 0 is the resonator, mode 1 the reaction coordinate.
CMat build_system_hamiltonian(const StateSpace& space, double G0_meV, double Omega0_eV,
                              double omega_c_eV, double W0p_meV, double omega_d_eV);

// Truncated-chain Hamiltonian; modes 0 = resonator, 1..N+1 = chain sites.
CMat build_chain_hamiltonian(const StateSpace& space, const ChainParams& chain, double omega_c_eV,
                             double W0p_meV, double omega_d_eV);

// --- secular dissipator -------------------------------------------------------

struct PolaritonDecomposition {
    double omega_plus_rot_eV = 0.0;   // rotating-frame polariton frequencies
    double omega_minus_rot_eV = 0.0;
    double omega_plus_lab_eV = 0.0;
    double omega_minus_lab_eV = 0.0;
    double eta_eV = 0.0;              // polariton splitting
    double delta_cx_eV = 0.0;         // omega_c - Omega0
    // projected operators B0(w±) = ca a + cB B0
    double ca_plus = 0.0, cB_plus = 0.0;
    double ca_minus = 0.0, cB_minus = 0.0;
};

PolaritonDecomposition polariton_decomposition(double G0_meV, double omega_c_eV, double Omega0_eV,
                                               double omega_d_eV);

struct SecularOptions {
    bool include_lamb_shift = false;  // compute and return; applied by the caller
    double min_weight_eV = 0.0;       // drop channels at or below this weight
};

struct SecularDissipator {
    std::vector<LindbladTerm> terms;
    // hbar * Delta_res(w) in eV with its projector n = B0(w)† B0(w); add
    // sum_w Delta * n to the Hamiltonian to apply the Lamb shift
    std::vector<std::pair<double, CMat>> lamb_shift;
};

// Weak-drive three-state form: channels at the polariton frequencies, with
// the lower-polariton channel dropped once its lab frequency falls below the
// environment support.
SecularDissipator secular_dissipator(const PolaritonDecomposition& decomp,
                                     const SpectralDensity& J_res, double omega_d_eV,
                                     const StateSpace& space, const SecularOptions& opts = {});

// Full eigenbasis projection of B0 onto clustered eigenvalue differences of
// H_sys (relative clustering tolerance 1e-9).
SecularDissipator secular_dissipator_full(const CMat& H_sys, const CMat& B0_op,
                                          const SpectralDensity& J_res, double omega_d_eV,
                                          const SecularOptions& opts = {});

// --- propagation -------------------------------------------------------------

struct PropagateOptions {
    std::vector<std::pair<std::string, CMat>> observables;
    bool audit_positivity = true;
    double positivity_floor = -1e-7;
    double hermiticity_tol = 1e-9;
    double max_step_fs = 0.0;  // 0: unlimited
};

struct PropagationResult {
    std::vector<double> t_fs;
    std::map<std::string, std::vector<double>> series;  // named expectation values
    std::vector<double> trace_error;                    // |tr rho - 1| per sample
    CMat rho_final;
    std::size_t n_steps = 0;
    std::size_t n_rejected = 0;
};

// Adaptive embedded Runge-Kutta propagation sampled on t_grid (fs). rho0 must
// be a valid density operator (hermitian, unit trace). Local tolerance `tol`
// controls the embedded error estimate.
PropagationResult propagate(const Liouvillian& L, const CMat& rho0,
                            const std::vector<double>& t_grid_fs, double tol = 1e-8,
                            const PropagateOptions& opts = {});

// --- steady state -------------------------------------------------------------

struct SteadyStateOptions {
    bool check_uniqueness = true;
    double nullity_tol = 1e-10;    // singular values below tol*sigma_max count as null
    double residual_tol = 1e-10;
};

// Stationary density operator of a time-independent (or CW-driven) generator.
CMat steady_state(const Liouvillian& L, const SteadyStateOptions& opts = {});

// --- state audits --------------------------------------------------------------

double trace_error(const CMat& rho);
double min_eigenvalue(const CMat& rho);
// Throws std::runtime_error with diagnostics when rho violates hermiticity,
// trace normalization, or the positivity floor.
void audit_density(const CMat& rho, double herm_tol = 1e-9, double trace_tol = 1e-9,
                   double positivity_floor = -1e-7);

}  // namespace rcdyn

#endif
