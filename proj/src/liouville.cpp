#include "rcdyn/liouville.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "rcdyn/kernels.hpp"
#include "rcdyn/units.hpp"

namespace rcdyn {

namespace {

using units::hbar_ev_fs;
using units::meV;

void axpy(cplx alpha, const CMat& x, CMat& y) {
    for (std::size_t i = 0; i < x.a.size(); ++i) y.a[i] += alpha * x.a[i];
}

}  // namespace

// --- spaces -------------------------------------------------------------------

std::size_t SpaceConfig::dimension() const {
    const std::size_t M = mode_names.size();
    if (M == 0) throw std::invalid_argument("space: no modes configured");
    if (std::holds_alternative<PerModeFock>(truncation)) {
        const auto& f = std::get<PerModeFock>(truncation);
        if (f.cutoffs.size() != M)
            throw std::invalid_argument("space: cutoff list does not match the mode list");
        std::size_t d = 1;
        for (int c : f.cutoffs) {
            if (c < 1) throw std::invalid_argument("space: cutoffs must be >= 1");
            d *= static_cast<std::size_t>(c) + 1;
        }
        return d;
    }
    const int max = std::get<TotalExcitationSector>(truncation).max_total;
    if (max < 0) throw std::invalid_argument("space: max_total must be >= 0");
    // binomial(M + max, max)
    std::size_t d = 1;
    for (int k = 1; k <= max; ++k) d = d * (M + static_cast<std::size_t>(k)) / k;
    return d;
}

std::size_t SpaceConfig::states_with_total(int total) const {
    const std::size_t M = mode_names.size();
    if (std::holds_alternative<TotalExcitationSector>(truncation)) {
        if (total > std::get<TotalExcitationSector>(truncation).max_total) return 0;
        std::size_t d = 1;  // multisets of size `total` over M modes
        for (int k = 1; k <= total; ++k) d = d * (M - 1 + static_cast<std::size_t>(k)) / k;
        return d;
    }
    const auto& cut = std::get<PerModeFock>(truncation).cutoffs;
    std::vector<std::size_t> count(static_cast<std::size_t>(total) + 1, 0);
    count[0] = 1;
    for (std::size_t m = 0; m < M; ++m) {
        std::vector<std::size_t> next(count.size(), 0);
        for (int t = 0; t <= total; ++t)
            for (int n = 0; n <= std::min(cut[m], total - t); ++n)
                next[static_cast<std::size_t>(t + n)] += count[static_cast<std::size_t>(t)];
        count = std::move(next);
    }
    return count[static_cast<std::size_t>(total)];
}

void SpaceConfig::check_budget() const {
    const std::size_t d = dimension();
    const std::size_t bytes = d * d * sizeof(cplx);
    if (bytes > memory_budget_bytes) {
        std::ostringstream os;
        os << "space dimension " << d << " needs " << bytes
           << " bytes per operator, beyond the configured budget of " << memory_budget_bytes;
        throw std::length_error(os.str());
    }
}

StateSpace::StateSpace(SpaceConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.check_budget();
    const int M = n_modes();
    if (std::holds_alternative<PerModeFock>(cfg_.truncation)) {
        const auto& cut = std::get<PerModeFock>(cfg_.truncation).cutoffs;
        std::vector<int> occ(static_cast<std::size_t>(M), 0);
        while (true) {
            basis_.push_back(occ);
            int m = M - 1;
            while (m >= 0 && occ[static_cast<std::size_t>(m)] == cut[static_cast<std::size_t>(m)]) {
                occ[static_cast<std::size_t>(m)] = 0;
                --m;
            }
            if (m < 0) break;
            ++occ[static_cast<std::size_t>(m)];
        }
    } else {
        const int max = std::get<TotalExcitationSector>(cfg_.truncation).max_total;
        // ordered by total quanta, lexicographic within one total
        std::vector<int> occ(static_cast<std::size_t>(M), 0);
        std::function<void(int, int)> rec = [&](int mode, int left) {
            if (mode == M - 1) {
                occ[static_cast<std::size_t>(mode)] = left;
                basis_.push_back(occ);
                occ[static_cast<std::size_t>(mode)] = 0;
                return;
            }
            for (int n = left; n >= 0; --n) {
                occ[static_cast<std::size_t>(mode)] = n;
                rec(mode + 1, left - n);
            }
            occ[static_cast<std::size_t>(mode)] = 0;
        };
        for (int total = 0; total <= max; ++total) rec(0, total);
    }
    dim_ = static_cast<int>(basis_.size());
    if (static_cast<std::size_t>(dim_) != cfg_.dimension())
        throw std::logic_error("state space enumeration does not match the dimension formula");
    for (int i = 0; i < dim_; ++i) index_[basis_[static_cast<std::size_t>(i)]] = i;
}

int StateSpace::basis_index(const std::vector<int>& occ) const {
    const auto it = index_.find(occ);
    return it == index_.end() ? -1 : it->second;
}

CMat StateSpace::annihilator(int mode) const {
    if (mode < 0 || mode >= n_modes()) throw std::invalid_argument("annihilator: bad mode index");
    CMat A(dim_);
    for (int col = 0; col < dim_; ++col) {
        const auto& occ = basis_[static_cast<std::size_t>(col)];
        const int n = occ[static_cast<std::size_t>(mode)];
        if (n == 0) continue;
        auto target = occ;
        --target[static_cast<std::size_t>(mode)];
        const int row = basis_index(target);
        if (row >= 0) A(row, col) = std::sqrt(static_cast<double>(n));
    }
    return A;
}

CMat StateSpace::number_op(int mode) const {
    if (mode < 0 || mode >= n_modes()) throw std::invalid_argument("number_op: bad mode index");
    CMat N(dim_);
    for (int i = 0; i < dim_; ++i)
        N(i, i) = static_cast<double>(
            basis_[static_cast<std::size_t>(i)][static_cast<std::size_t>(mode)]);
    return N;
}

CMat StateSpace::fock_density(const std::vector<int>& occ) const {
    const int i = basis_index(occ);
    if (i < 0) throw std::invalid_argument("fock_density: state outside the truncated basis");
    CMat rho(dim_);
    rho(i, i) = 1.0;
    return rho;
}

// --- generator -----------------------------------------------------------------

namespace {

/// Workspace-carrying evaluator of the master-equation right-hand side.
struct RhsEngine {
    const Liouvillian& L;
    std::vector<CMat> Cdag, CdagC;
    CMat Ht, W1;

    explicit RhsEngine(const Liouvillian& l) : L(l), Ht(l.dim()), W1(l.dim()) {
        Cdag.reserve(L.collapse.size());
        CdagC.reserve(L.collapse.size());
        for (const auto& term : L.collapse) {
            Cdag.push_back(term.op.dagger());
            CdagC.push_back(matmul(Cdag.back(), term.op));
        }
    }

    void eval(double t, const CMat& rho, CMat& out) {
        const int n = rho.n;
        const double ih = 1.0 / hbar_ev_fs;
        const CMat* H = &L.H0;
        if (L.driven()) {
            Ht = L.H0;
            axpy(L.drive_amplitude_eV(t), L.H_drive, Ht);
            H = &Ht;
        }
        kernels::matmul_acc(n, cplx{0.0, -ih}, H->data(), rho.data(), cplx{0.0, 0.0}, out.data());
        kernels::matmul_acc(n, cplx{0.0, ih}, rho.data(), H->data(), cplx{1.0, 0.0}, out.data());
        for (std::size_t k = 0; k < L.collapse.size(); ++k) {
            const double w = L.collapse[k].weight_eV * ih;
            if (w == 0.0) continue;
            kernels::matmul_acc(n, cplx{1.0, 0.0}, L.collapse[k].op.data(), rho.data(),
                                cplx{0.0, 0.0}, W1.data());
            kernels::matmul_acc(n, cplx{w, 0.0}, W1.data(), Cdag[k].data(), cplx{1.0, 0.0},
                                out.data());
            kernels::matmul_acc(n, cplx{-0.5 * w, 0.0}, CdagC[k].data(), rho.data(),
                                cplx{1.0, 0.0}, out.data());
            kernels::matmul_acc(n, cplx{-0.5 * w, 0.0}, rho.data(), CdagC[k].data(),
                                cplx{1.0, 0.0}, out.data());
        }
    }
};

}  // namespace

CMat lindblad_rhs(const Liouvillian& L, const CMat& rho, double t_fs) {
    if (rho.n != L.dim()) throw std::invalid_argument("lindblad_rhs: dimension mismatch");
    RhsEngine engine(L);
    CMat out(rho.n);
    engine.eval(t_fs, rho, out);
    return out;
}

Eigen::MatrixXcd build_superoperator(const Liouvillian& L) {
    if (L.driven())
        throw std::invalid_argument(
            "build_superoperator: generator is explicitly time dependent; fold a constant drive "
            "into H0");
    const int n = L.dim();
    const std::size_t d2 = static_cast<std::size_t>(n) * n;
    Eigen::MatrixXcd M =
        Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(d2), static_cast<Eigen::Index>(d2));
    const double ih = 1.0 / hbar_ev_fs;
    auto vec_idx = [n](int i, int j) { return static_cast<Eigen::Index>(i) * n + j; };

    // -(i/hbar)(H x I - I x H^T)
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            const cplx h = L.H0(i, k);
            if (h == cplx{0.0, 0.0}) continue;
            for (int j = 0; j < n; ++j) {
                M(vec_idx(i, j), vec_idx(k, j)) += cplx{0.0, -ih} * h;
                M(vec_idx(j, k), vec_idx(j, i)) += cplx{0.0, ih} * h;
            }
        }
    for (const auto& term : L.collapse) {
        const double w = term.weight_eV * ih;
        if (w == 0.0) continue;
        const CMat Cd = term.op.dagger();
        const CMat D = matmul(Cd, term.op);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                const cplx c = term.op(i, k);
                if (c != cplx{0.0, 0.0}) {
                    for (int j = 0; j < n; ++j)
                        for (int l = 0; l < n; ++l) {
                            const cplx cl = std::conj(term.op(j, l));
                            if (cl != cplx{0.0, 0.0})
                                M(vec_idx(i, j), vec_idx(k, l)) += w * c * cl;
                        }
                }
                const cplx d = D(i, k);
                if (d != cplx{0.0, 0.0}) {
                    for (int j = 0; j < n; ++j) {
                        M(vec_idx(i, j), vec_idx(k, j)) += -0.5 * w * d;
                        M(vec_idx(j, k), vec_idx(j, i)) += -0.5 * w * d;
                    }
                }
            }
    }
    return M;
}

// --- Hamiltonians -----------------------------------------------------------------

CMat build_system_hamiltonian(const StateSpace& space, double G0_meV, double Omega0_eV,
                              double omega_c_eV, double W0p_meV, double omega_d_eV) {
    if (space.n_modes() < 2)
        throw std::invalid_argument("system hamiltonian needs the resonator and RC modes");
    const CMat a = space.annihilator(0);
    const CMat B = space.annihilator(1);
    const CMat n_c = space.number_op(0);
    const CMat n_x = space.number_op(1);
    CMat H(space.dim());
    axpy(omega_c_eV - omega_d_eV, n_c, H);
    axpy(Omega0_eV - omega_d_eV, n_x, H);
    // Kerr term B'B'BB = n_x (n_x - 1)
    const double W0 = W0p_meV * meV;
    for (int i = 0; i < space.dim(); ++i) {
        const double nx = n_x(i, i).real();
        H(i, i) += W0 * nx * (nx - 1.0);
    }
    const double G0 = G0_meV * meV;
    const CMat hop = matmul(a.dagger(), B);
    axpy(G0, hop, H);
    axpy(G0, hop.dagger(), H);
    return H;
}

CMat build_chain_hamiltonian(const StateSpace& space, const ChainParams& chain, double omega_c_eV,
                             double W0p_meV, double omega_d_eV) {
    const int N = chain.depth();
    if (N < 0) throw std::invalid_argument("chain hamiltonian: empty chain");
    if (space.n_modes() != N + 2)
        throw std::invalid_argument("chain hamiltonian: space must hold resonator + " +
                                    std::to_string(N + 1) + " chain sites");
    CMat H(space.dim());
    axpy(omega_c_eV - omega_d_eV, space.number_op(0), H);
    for (int n = 0; n <= N; ++n)
        axpy(chain.Omega_eV[static_cast<std::size_t>(n)] - omega_d_eV, space.number_op(n + 1), H);
    // resonator-RC link uses G_0, intra-chain links G_1..G_N
    for (int n = 0; n <= N; ++n) {
        const double G = chain.G_meV[static_cast<std::size_t>(n)] * meV;
        const CMat hop = matmul(space.annihilator(n).dagger(), space.annihilator(n + 1));
        axpy(G, hop, H);
        axpy(G, hop.dagger(), H);
    }
    const double W0 = W0p_meV * meV;
    if (W0 != 0.0) {
        const CMat n_x = space.number_op(1);
        for (int i = 0; i < space.dim(); ++i) {
            const double nx = n_x(i, i).real();
            H(i, i) += W0 * nx * (nx - 1.0);
        }
    }
    return H;
}

// --- secular dissipator ---------------------------------------------------------------

PolaritonDecomposition polariton_decomposition(double G0_meV, double omega_c_eV, double Omega0_eV,
                                               double omega_d_eV) {
    if (!(G0_meV > 0.0)) throw std::invalid_argument("polariton decomposition: G0 must be > 0");
    PolaritonDecomposition d;
    const double G0 = G0_meV * meV;
    d.delta_cx_eV = omega_c_eV - Omega0_eV;
    d.eta_eV = std::sqrt(4.0 * G0 * G0 + d.delta_cx_eV * d.delta_cx_eV);
    d.omega_plus_rot_eV = 0.5 * (omega_c_eV + Omega0_eV - 2.0 * omega_d_eV + d.eta_eV);
    d.omega_minus_rot_eV = 0.5 * (omega_c_eV + Omega0_eV - 2.0 * omega_d_eV - d.eta_eV);
    d.omega_plus_lab_eV = d.omega_plus_rot_eV + omega_d_eV;
    d.omega_minus_lab_eV = d.omega_minus_rot_eV + omega_d_eV;
    const double p = d.eta_eV - d.delta_cx_eV;
    const double q = d.eta_eV + d.delta_cx_eV;
    d.ca_plus = 2.0 * G0 * p / (4.0 * G0 * G0 + p * p);
    d.cB_plus = p * p / (4.0 * G0 * G0 + p * p);
    d.ca_minus = -2.0 * G0 * q / (4.0 * G0 * G0 + q * q);
    d.cB_minus = q * q / (4.0 * G0 * G0 + q * q);
    return d;
}

SecularDissipator secular_dissipator(const PolaritonDecomposition& decomp,
                                     const SpectralDensity& J_res, double omega_d_eV,
                                     const StateSpace& space, const SecularOptions& opts) {
    if (space.n_modes() < 2)
        throw std::invalid_argument("secular dissipator needs the resonator and RC modes");
    SecularDissipator out;
    const CMat a = space.annihilator(0);
    const CMat B = space.annihilator(1);
    const double omega0 = J_res.support_min();

    struct Channel {
        double omega_rot, ca, cB;
        const char* label;
        bool active;
    };
    const Channel channels[2] = {
        {decomp.omega_plus_rot_eV, decomp.ca_plus, decomp.cB_plus, "residual upper polariton",
         true},
        {decomp.omega_minus_rot_eV, decomp.ca_minus, decomp.cB_minus, "residual lower polariton",
         decomp.omega_minus_lab_eV >= omega0},
    };
    for (const auto& ch : channels) {
        if (!ch.active) continue;
        const double weight = markov_rate(J_res, ch.omega_rot, omega_d_eV) * meV;  // eV
        CMat op(space.dim());
        axpy(ch.ca, a, op);
        axpy(ch.cB, B, op);
        if (weight > opts.min_weight_eV) out.terms.push_back(LindbladTerm{weight, op, ch.label});
        if (opts.include_lamb_shift) {
            const double lab = ch.omega_rot + omega_d_eV;
            if (lab != omega0 && lab != J_res.support_max()) {
                const double delta = cauchy_transform(J_res, lab);
                out.lamb_shift.emplace_back(delta, matmul(op.dagger(), op));
            }
        }
    }
    return out;
}

SecularDissipator secular_dissipator_full(const CMat& H_sys, const CMat& B0_op,
                                          const SpectralDensity& J_res, double omega_d_eV,
                                          const SecularOptions& opts) {
    std::vector<double> ev;
    CMat V;
    hermitian_eigensystem(H_sys, ev, V);
    const int n = H_sys.n;
    // cluster eigenvalues (sorted ascending on arrival)
    double scale = 1.0;
    for (double e : ev) scale = std::max(scale, std::abs(e));
    const double tol = 1e-9 * scale;
    std::vector<int> cluster_of(static_cast<std::size_t>(n), 0);
    std::vector<double> cluster_val;
    for (int i = 0; i < n; ++i) {
        if (i == 0 || ev[static_cast<std::size_t>(i)] - cluster_val.back() > tol)
            cluster_val.push_back(ev[static_cast<std::size_t>(i)]);
        cluster_of[static_cast<std::size_t>(i)] = static_cast<int>(cluster_val.size()) - 1;
    }
    const CMat Bt = matmul(matmul(V.dagger(), B0_op), V);

    struct Accum {
        double omega;
        CMat op;
    };
    std::vector<Accum> groups;
    auto group_for = [&](double omega) -> CMat& {
        for (auto& g : groups)
            if (std::abs(g.omega - omega) <= tol) return g.op;
        groups.push_back(Accum{omega, CMat(n)});
        return groups.back().op;
    };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (std::abs(Bt(i, j)) < 1e-14) continue;
            const double omega =
                cluster_val[static_cast<std::size_t>(
                    cluster_of[static_cast<std::size_t>(j)])] -
                cluster_val[static_cast<std::size_t>(cluster_of[static_cast<std::size_t>(i)])];
            group_for(omega)(i, j) += Bt(i, j);
        }
    SecularDissipator out;
    const double omega0 = J_res.support_min();
    for (auto& g : groups) {
        const double lab = g.omega + omega_d_eV;
        if (lab < omega0) continue;
        const double weight = markov_rate(J_res, g.omega, omega_d_eV) * meV;
        CMat op = matmul(matmul(V, g.op), V.dagger());
        if (weight > opts.min_weight_eV) {
            std::ostringstream label;
            label << "residual secular channel at " << g.omega << " eV";
            out.terms.push_back(LindbladTerm{weight, op, label.str()});
        }
        if (opts.include_lamb_shift && lab != omega0 && lab != J_res.support_max()) {
            const double delta = cauchy_transform(J_res, lab);
            out.lamb_shift.emplace_back(delta, matmul(op.dagger(), op));
        }
    }
    return out;
}

// --- propagation ------------------------------------------------------------------------

namespace {

// Dormand-Prince 5(4) tableau
constexpr double A21 = 1.0 / 5.0;
constexpr double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0;
constexpr double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0;
constexpr double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0, A53 = 64448.0 / 6561.0,
                 A54 = -212.0 / 729.0;
constexpr double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0,
                 A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0;
constexpr double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0,
                 B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0;
constexpr double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0,
                 E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0;
constexpr double C2 = 1.0 / 5.0, C3 = 3.0 / 10.0, C4 = 4.0 / 5.0, C5 = 8.0 / 9.0;
// dense-output weights
constexpr double D1 = -12715105075.0 / 11282082432.0;
constexpr double D3 = 87487479700.0 / 32700410799.0;
constexpr double D4 = -10690763975.0 / 1880347072.0;
constexpr double D5 = 701980252875.0 / 199316789632.0;
constexpr double D6 = -1453857185.0 / 822651844.0;
constexpr double D7 = 69997945.0 / 29380423.0;

void combine(CMat& out, const CMat& y, std::initializer_list<std::pair<double, const CMat*>> terms,
             double h) {
    out = y;
    for (const auto& [c, k] : terms) axpy(c * h, *k, out);
}

}  // namespace

PropagationResult propagate(const Liouvillian& L, const CMat& rho0,
                            const std::vector<double>& t_grid_fs, double tol,
                            const PropagateOptions& opts) {
    if (t_grid_fs.size() < 2) throw std::invalid_argument("propagate: need at least two times");
    for (std::size_t i = 0; i + 1 < t_grid_fs.size(); ++i)
        if (!(t_grid_fs[i + 1] > t_grid_fs[i]))
            throw std::invalid_argument("propagate: time grid must increase strictly");
    if (rho0.n != L.dim()) throw std::invalid_argument("propagate: dimension mismatch");
    audit_density(rho0, 1e-9, 1e-9, opts.audit_positivity ? opts.positivity_floor : 0.0);

    RhsEngine rhs(L);
    const int n = rho0.n;
    PropagationResult res;
    res.t_fs = t_grid_fs;
    for (const auto& [name, op] : opts.observables) res.series[name] = {};
    res.trace_error.reserve(t_grid_fs.size());

    CMat y = rho0, ynew(n), work(n);
    CMat k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    CMat r2(n), r3(n), r4(n), r5(n);  // dense-output coefficients

    double t = t_grid_fs.front();
    const double t_end = t_grid_fs.back();
    std::size_t next_sample = 0;

    auto record = [&](const CMat& state) {
        for (const auto& [name, op] : opts.observables)
            res.series[name].push_back(expval(op, state));
        res.trace_error.push_back(trace_error(state));
        const double sample_t = res.t_fs[res.trace_error.size() - 1];
        const double herm = state.hermiticity_error();
        if (herm > opts.hermiticity_tol) {
            std::ostringstream os;
            os << "propagate: hermiticity error " << herm << " at t = " << sample_t << " fs";
            throw std::runtime_error(os.str());
        }
        if (opts.audit_positivity) {
            const double mn = min_eigenvalue(state);
            if (mn < opts.positivity_floor) {
                std::ostringstream os;
                os << "propagate: density operator eigenvalue " << mn
                   << " below the positivity floor " << opts.positivity_floor << " at t = "
                   << sample_t << " fs (dim " << n << ")";
                throw std::runtime_error(os.str());
            }
        }
    };

    record(y);
    next_sample = 1;

    rhs.eval(t, y, k1);
    ++res.n_steps;
    double h = (t_end - t) * 1e-3;
    {
        const double d0 = std::max(y.max_abs(), 1e-8);
        const double d1 = k1.max_abs();
        if (d1 > 0.0) h = std::min(h, 0.01 * d0 / d1);
    }
    if (opts.max_step_fs > 0.0) h = std::min(h, opts.max_step_fs);

    while (t < t_end) {
        h = std::min(h, t_end - t);
        if (h < 1e-10 * std::max(1.0, std::abs(t))) {
            std::ostringstream os;
            os << "propagate: step size underflow (h = " << h << " fs) at t = " << t << " fs";
            throw std::runtime_error(os.str());
        }
        combine(work, y, {{A21, &k1}}, h);
        rhs.eval(t + C2 * h, work, k2);
        combine(work, y, {{A31, &k1}, {A32, &k2}}, h);
        rhs.eval(t + C3 * h, work, k3);
        combine(work, y, {{A41, &k1}, {A42, &k2}, {A43, &k3}}, h);
        rhs.eval(t + C4 * h, work, k4);
        combine(work, y, {{A51, &k1}, {A52, &k2}, {A53, &k3}, {A54, &k4}}, h);
        rhs.eval(t + C5 * h, work, k5);
        combine(work, y, {{A61, &k1}, {A62, &k2}, {A63, &k3}, {A64, &k4}, {A65, &k5}}, h);
        rhs.eval(t + h, work, k6);
        combine(ynew, y, {{B1, &k1}, {B3, &k3}, {B4, &k4}, {B5, &k5}, {B6, &k6}}, h);
        rhs.eval(t + h, ynew, k7);
        res.n_steps += 6;

        // scaled max-norm of the embedded error estimate
        double err = 0.0;
        for (std::size_t i = 0; i < y.a.size(); ++i) {
            const cplx e = h * (E1 * k1.a[i] + E3 * k3.a[i] + E4 * k4.a[i] + E5 * k5.a[i] +
                                E6 * k6.a[i] + E7 * k7.a[i]);
            const double sc = tol + tol * std::max(std::abs(y.a[i]), std::abs(ynew.a[i]));
            err = std::max(err, std::abs(e) / sc);
        }

        if (err <= 1.0) {
            if (next_sample < t_grid_fs.size() && t_grid_fs[next_sample] <= t + h + 1e-14) {
                r2 = ynew;
                axpy(-1.0, y, r2);  // ynew - y
                r3 = k1;
                r3 *= cplx{h, 0.0};
                axpy(-1.0, r2, r3);  // h k1 - (ynew - y)
                r4 = r2;
                axpy(-h, k7, r4);
                axpy(-1.0, r3, r4);  // (ynew - y) - h k7 - r3
                r5 = CMat(n);
                axpy(D1 * h, k1, r5);
                axpy(D3 * h, k3, r5);
                axpy(D4 * h, k4, r5);
                axpy(D5 * h, k5, r5);
                axpy(D6 * h, k6, r5);
                axpy(D7 * h, k7, r5);
                while (next_sample < t_grid_fs.size() && t_grid_fs[next_sample] <= t + h + 1e-14) {
                    const double s = (t_grid_fs[next_sample] - t) / h;
                    const double s1 = 1.0 - s;
                    // y + s(r2 + s1(r3 + s(r4 + s1 r5)))
                    work = r5;
                    work *= cplx{s1, 0.0};
                    axpy(1.0, r4, work);
                    work *= cplx{s, 0.0};
                    axpy(1.0, r3, work);
                    work *= cplx{s1, 0.0};
                    axpy(1.0, r2, work);
                    work *= cplx{s, 0.0};
                    axpy(1.0, y, work);
                    record(work);
                    ++next_sample;
                }
            }
            t += h;
            std::swap(y, ynew);
            std::swap(k1, k7);  // first-same-as-last
            const double fac = (err > 0.0) ? 0.9 * std::pow(err, -0.2) : 5.0;
            h *= std::clamp(fac, 0.2, 5.0);
            if (opts.max_step_fs > 0.0) h = std::min(h, opts.max_step_fs);
        } else {
            ++res.n_rejected;
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
        }
    }
    res.rho_final = y;
    return res;
}

// --- steady state -----------------------------------------------------------------------

CMat steady_state(const Liouvillian& L, const SteadyStateOptions& opts) {
    const Eigen::MatrixXcd M = build_superoperator(L);
    const int n = L.dim();
    const Eigen::Index d2 = M.rows();

    if (opts.check_uniqueness) {
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(M);
        const auto& sv = svd.singularValues();
        const double smax = std::max(sv(0), 1e-300);
        int nullity = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) <= opts.nullity_tol * smax) ++nullity;
        if (nullity != 1) {
            std::ostringstream os;
            os << "steady_state: generator nullspace has dimension " << nullity
               << " (need exactly 1)";
            throw std::runtime_error(os.str());
        }
    }

    // least squares on the generator stacked with the trace constraint
    Eigen::MatrixXcd A(d2 + 1, d2);
    A.topRows(d2) = M;
    A.row(d2).setZero();
    for (int i = 0; i < n; ++i) A(d2, static_cast<Eigen::Index>(i) * n + i) = 1.0;
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(d2 + 1);
    b(d2) = 1.0;
    const Eigen::VectorXcd x = A.colPivHouseholderQr().solve(b);

    const double residual = (M * x).norm() / std::max(1.0, x.norm());
    if (!(residual <= opts.residual_tol)) {
        std::ostringstream os;
        os << "steady_state: residual " << residual << " exceeds " << opts.residual_tol;
        throw std::runtime_error(os.str());
    }

    CMat rho(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) rho(i, j) = x(static_cast<Eigen::Index>(i) * n + j);
    // symmetrize roundoff and renormalize the trace exactly
    const CMat rd = rho.dagger();
    rho += rd;
    rho *= cplx{0.5, 0.0};
    const cplx tr = rho.trace();
    if (std::abs(tr) < 1e-12) throw std::runtime_error("steady_state: vanishing trace");
    rho *= cplx{1.0, 0.0} / tr;
    return rho;
}

// --- audits -----------------------------------------------------------------------------

double trace_error(const CMat& rho) { return std::abs(rho.trace() - cplx{1.0, 0.0}); }

double min_eigenvalue(const CMat& rho) {
    const auto ev = hermitian_eigenvalues(rho);
    return ev.front();
}

void audit_density(const CMat& rho, double herm_tol, double trace_tol, double positivity_floor) {
    const double he = rho.hermiticity_error();
    if (he > herm_tol) {
        std::ostringstream os;
        os << "density operator hermiticity error " << he << " exceeds " << herm_tol;
        throw std::runtime_error(os.str());
    }
    const double te = trace_error(rho);
    if (te > trace_tol) {
        std::ostringstream os;
        os << "density operator trace error " << te << " exceeds " << trace_tol;
        throw std::runtime_error(os.str());
    }
    if (positivity_floor < 0.0) {
        const double mn = min_eigenvalue(rho);
        if (mn < positivity_floor) {
            std::ostringstream os;
            os << "density operator eigenvalue " << mn << " below the floor " << positivity_floor;
            throw std::runtime_error(os.str());
        }
    }
}

}  // namespace rcdyn
