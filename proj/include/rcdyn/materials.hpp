#ifndef RCDYN_MATERIALS_HPP
#define RCDYN_MATERIALS_HPP

#include <optional>
#include <string>
#include <vector>

namespace rcdyn {

/// Phonon-induced broadening coefficients of one material. The intervalley
/// activation amplitude is kept as separate decay/dephasing shares because
/// MoS2 splits it between the two channels.
struct PhononModel {
    double gamma0_nr_meV = 0.0;      // T-independent non-radiative decay
    double c1_ueV_per_K = 0.0;       // dephasing slope
    double c2_decay_meV = 0.0;       // intervalley activation, decay share
    double c2_dephasing_meV = 0.0;   // intervalley activation, dephasing share
    double Omega_ph_meV = 0.0;       // phonon activation energy
};

/// Band and exciton parameters of one monolayer material.
struct MaterialRecord {
    std::string name;
    double m_e = 0.0;                // effective electron mass [m0]
    double m_h = 0.0;                // effective hole mass [m0]
    double E_g_eV = 0.0;             // band gap
    double E_b_eV = 0.0;             // exciton binding energy
    double a_B_nm = 0.0;             // exciton Bohr radius
    double bloch_velocity_mps = 0.0; // velocity parameter for p_cv
    std::optional<PhononModel> phonon;

    // Throws std::invalid_argument on violated invariants.
    void validate() const;
};

struct DerivedMaterial {
    std::string name;
    double M = 0.0;          // total exciton mass m_e + m_h [m0]
    double omega0_eV = 0.0;  // exciton gap, hbar*omega0 = E_g - E_b
    double a_B_nm = 0.0;
    // valley-summed momentum magnitude convention: p_cv = sqrt(2) m0 V,
    // stored as hbar*p_cv/m0 in eV nm
    double p_cv_ev_nm = 0.0;
    double hbarV_ev_nm = 0.0;   // hbar * V (single-valley matrix element scale)
    double SW000_eV_nm2 = 0.0;  // area-scaled exciton-exciton constant hbar*S*W000
};

struct PhononRates {
    double gamma_x_meV = 0.0;        // population decay, hbar*gamma_x
    double gamma_x_prime_meV = 0.0;  // pure dephasing, hbar*gamma_x'
    double T_K = 0.0;
};

DerivedMaterial derive(const MaterialRecord& m);

// gamma_x = gamma0_nr + c2_decay * n_B(Omega, T), gamma_x' = c1 T (+ MoS2
// dephasing share of c2). Throws on T < 0 or missing phonon data.
PhononRates phonon_rates(const MaterialRecord& m, double T_K);

// hbar*omega_k in eV for center-of-mass momentum k >= 0 in 1/nm.
double exciton_dispersion(const DerivedMaterial& m, double k_inv_nm);

// Kinetic-energy coefficient kappa in hbar*omega_k = hbar*omega0 + kappa k^2.
double dispersion_coefficient_ev_nm2(const DerivedMaterial& m);

// hbar*xi = hbar/(2 M L^2) in eV, the cutoff frequency of a lateral
// confinement length L.
double cutoff_frequency_eV(const DerivedMaterial& m, double L_nm);

/// Material database backed by a plain-text file (one record per line,
/// comma-separated, '#' comments).
class MaterialDb {
public:
    static MaterialDb load(const std::string& path);

    const MaterialRecord& find(const std::string& name) const;  // throws if unknown
    bool contains(const std::string& name) const;
    const std::vector<MaterialRecord>& all() const { return records_; }
    std::vector<std::string> names() const;

private:
    std::vector<MaterialRecord> records_;
};

}  // namespace rcdyn

#endif
