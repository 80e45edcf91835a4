#ifndef RCDYN_UNITS_HPP
#define RCDYN_UNITS_HPP

// Internal unit system: energies in eV (rates stored as hbar*rate in eV),
// lengths in nm, times in fs. Frequencies are converted to 1/fs only inside
// the time integrators via ev_to_radfs.

namespace rcdyn::units {

inline constexpr double hbar_ev_fs = 0.6582119569;      // eV fs
inline constexpr double hbar_ev_s = 6.582119569e-16;    // eV s
inline constexpr double hbarc_ev_nm = 197.3269804;      // eV nm
inline constexpr double m0c2_ev = 510998.95;            // electron rest energy, eV
inline constexpr double coulomb_ev_nm = 1.4399645478;   // e^2/(4 pi eps0), eV nm
inline constexpr double e2_over_eps0_ev_nm = 4.0 * 3.14159265358979323846 * coulomb_ev_nm;
inline constexpr double kB_ev_per_K = 8.617333262e-5;   // eV/K
inline constexpr double c_nm_fs = 299.792458;           // nm/fs
inline constexpr double pi = 3.14159265358979323846;

inline constexpr double meV = 1.0e-3;                   // meV -> eV

// hbar*omega [eV] -> omega [rad/fs]
inline constexpr double ev_to_radfs(double e_ev) { return e_ev / hbar_ev_fs; }

}  // namespace rcdyn::units

#endif
