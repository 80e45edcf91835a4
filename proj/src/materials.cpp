#include "rcdyn/materials.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rcdyn/units.hpp"

namespace rcdyn {

void MaterialRecord::validate() const {
    auto fail = [&](const std::string& what) {
        throw std::invalid_argument("material '" + name + "': " + what);
    };
    if (name.empty()) fail("empty name");
    if (!(m_e > 0.0) || !(m_h > 0.0)) fail("masses must be positive");
    if (!(E_g_eV > 0.0) || !(E_b_eV > 0.0)) fail("energies must be positive");
    if (!(E_b_eV < E_g_eV)) fail("binding energy must be below the gap");
    if (!(a_B_nm > 0.0)) fail("Bohr radius must be positive");
    if (!(bloch_velocity_mps > 0.0)) fail("velocity parameter must be positive");
    if (phonon) {
        const auto& p = *phonon;
        if (p.gamma0_nr_meV < 0.0 || p.c1_ueV_per_K < 0.0 || p.c2_decay_meV < 0.0 ||
            p.c2_dephasing_meV < 0.0)
            fail("phonon coefficients must be non-negative");
        if (!(p.Omega_ph_meV > 0.0)) fail("phonon activation energy must be positive");
    }
}

DerivedMaterial derive(const MaterialRecord& m) {
    m.validate();
    DerivedMaterial d;
    d.name = m.name;
    d.M = m.m_e + m.m_h;
    d.omega0_eV = m.E_g_eV - m.E_b_eV;
    d.a_B_nm = m.a_B_nm;
    d.hbarV_ev_nm = units::hbar_ev_s * m.bloch_velocity_mps * 1.0e9;  // m -> nm
    d.p_cv_ev_nm = std::sqrt(2.0) * d.hbarV_ev_nm;
    d.SW000_eV_nm2 = 2.07 * m.E_b_eV * m.a_B_nm * m.a_B_nm;
    return d;
}

PhononRates phonon_rates(const MaterialRecord& m, double T_K) {
    if (T_K < 0.0) throw std::invalid_argument("temperature must be >= 0");
    if (!m.phonon)
        throw std::invalid_argument("material '" + m.name + "' has no phonon broadening data");
    const PhononModel& p = *m.phonon;
    double n_bose = 0.0;
    if (T_K > 0.0) {
        const double x = p.Omega_ph_meV * units::meV / (units::kB_ev_per_K * T_K);
        // expm1 keeps the occupation accurate for small x
        n_bose = 1.0 / std::expm1(x);
    }
    PhononRates r;
    r.T_K = T_K;
    r.gamma_x_meV = p.gamma0_nr_meV + p.c2_decay_meV * n_bose;
    r.gamma_x_prime_meV = 1.0e-3 * p.c1_ueV_per_K * T_K + p.c2_dephasing_meV * n_bose;
    return r;
}

double dispersion_coefficient_ev_nm2(const DerivedMaterial& m) {
    const double hc = units::hbarc_ev_nm;
    return hc * hc / (2.0 * m.M * units::m0c2_ev);
}

double exciton_dispersion(const DerivedMaterial& m, double k_inv_nm) {
    if (k_inv_nm < 0.0) throw std::invalid_argument("momentum magnitude must be >= 0");
    return m.omega0_eV + dispersion_coefficient_ev_nm2(m) * k_inv_nm * k_inv_nm;
}

double cutoff_frequency_eV(const DerivedMaterial& m, double L_nm) {
    if (!(L_nm > 0.0)) throw std::invalid_argument("confinement length must be positive");
    return dispersion_coefficient_ev_nm2(m) / (L_nm * L_nm);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t\r");
        const auto e = f.find_last_not_of(" \t\r");
        f = (b == std::string::npos) ? std::string{} : f.substr(b, e - b + 1);
    }
    return out;
}

double parse_num(const std::string& s, const std::string& ctx) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (...) {
        throw std::runtime_error("material database: bad number '" + s + "' in " + ctx);
    }
}

}  // namespace

MaterialDb MaterialDb::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open material database: " + path);
    MaterialDb db;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = split_csv(line);
        const std::string ctx = path + ":" + std::to_string(lineno);
        // Table 1 order (name, m_h, m_e, E_g, E_b, a_B, V) then Table 3 order
        // (gamma0_nr, c1, c2_decay, c2_dephasing, Omega); the phonon block may
        // be absent for materials without broadening data.
        if (f.size() != 7 && f.size() != 12)
            throw std::runtime_error("material database: expected 7 or 12 fields in " + ctx);
        MaterialRecord m;
        m.name = f[0];
        m.m_h = parse_num(f[1], ctx);
        m.m_e = parse_num(f[2], ctx);
        m.E_g_eV = parse_num(f[3], ctx);
        m.E_b_eV = parse_num(f[4], ctx);
        m.a_B_nm = parse_num(f[5], ctx);
        m.bloch_velocity_mps = parse_num(f[6], ctx);
        if (f.size() == 12) {
            PhononModel p;
            p.gamma0_nr_meV = parse_num(f[7], ctx);
            p.c1_ueV_per_K = parse_num(f[8], ctx);
            p.c2_decay_meV = parse_num(f[9], ctx);
            p.c2_dephasing_meV = parse_num(f[10], ctx);
            p.Omega_ph_meV = parse_num(f[11], ctx);
            m.phonon = p;
        }
        m.validate();
        db.records_.push_back(std::move(m));
    }
    return db;
}

const MaterialRecord& MaterialDb::find(const std::string& name) const {
    for (const auto& m : records_)
        if (m.name == name) return m;
    std::string msg = "unknown material '" + name + "'; available:";
    for (const auto& m : records_) msg += " " + m.name;
    throw std::runtime_error(msg);
}

bool MaterialDb::contains(const std::string& name) const {
    for (const auto& m : records_)
        if (m.name == name) return true;
    return false;
}

std::vector<std::string> MaterialDb::names() const {
    std::vector<std::string> out;
    out.reserve(records_.size());
    for (const auto& m : records_) out.push_back(m.name);
    return out;
}

}  // namespace rcdyn
