#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rcdyn/liouville.hpp"
#include "rcdyn/spectral.hpp"
#include "rcdyn/units.hpp"

using namespace rcdyn;
using rcdyn::units::hbar_ev_fs;
using rcdyn::units::meV;

namespace {

SpaceConfig two_mode_fock(int cutoff) {
    return SpaceConfig{{"cavity", "rc"}, PerModeFock{{cutoff, cutoff}}};
}

SpaceConfig two_mode_sector(int max) {
    return SpaceConfig{{"cavity", "rc"}, TotalExcitationSector{max}};
}

CMat random_density(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    CMat A(n);
    for (auto& v : A.a) v = cplx{u(rng), u(rng)};
    CMat rho = matmul(A, A.dagger());
    const double tr = rho.trace().real();
    rho *= cplx{1.0 / tr, 0.0};
    return rho;
}

double trace_distance(const CMat& a, const CMat& b) {
    CMat d = a;
    d -= b;
    double s = 0.0;
    for (double ev : hermitian_eigenvalues(d)) s += std::abs(ev);
    return 0.5 * s;
}

}  // namespace

TEST_CASE("space dimensions") {
    CHECK(two_mode_fock(4).dimension() == 25);
    CHECK(two_mode_sector(1).dimension() == 3);
    CHECK(two_mode_sector(2).dimension() == 6);

    SpaceConfig chain30;
    for (int m = 0; m < 32; ++m) chain30.mode_names.push_back("m" + std::to_string(m));
    chain30.truncation = TotalExcitationSector{1};
    CHECK(chain30.dimension() == 33);               // vacuum + one excitation per mode
    CHECK(chain30.states_with_total(1) == 32);      // the single-excitation sector itself
    CHECK(chain30.states_with_total(0) == 1);

    SpaceConfig big = two_mode_fock(4);
    big.memory_budget_bytes = 100;  // 25^2 complex entries exceed this
    CHECK_THROWS_AS(StateSpace{big}, std::length_error);
    CHECK(big.dimension() == 25);  // dimension stays computable without allocation

    SpaceConfig fock = two_mode_fock(3);
    CHECK(fock.states_with_total(2) == 3);  // (2,0), (1,1), (0,2)
}

TEST_CASE("ladder operators") {
    StateSpace s(two_mode_fock(3));
    const CMat a = s.annihilator(0);
    const CMat n_c = s.number_op(0);
    // a† a equals the number operator
    const CMat ada = matmul(a.dagger(), a);
    for (int i = 0; i < s.dim(); ++i)
        for (int j = 0; j < s.dim(); ++j)
            CHECK(std::abs(ada(i, j) - n_c(i, j)) < 1e-14);
    // matrix element <0|a|1> = 1, <1|a|2> = sqrt(2)
    const int v00 = s.basis_index({0, 0});
    const int v10 = s.basis_index({1, 0});
    const int v20 = s.basis_index({2, 0});
    CHECK(std::abs(a(v00, v10) - 1.0) < 1e-15);
    CHECK(std::abs(a(v10, v20) - std::sqrt(2.0)) < 1e-15);
    CHECK(s.basis_index({5, 0}) == -1);
    CHECK_THROWS(s.fock_density({5, 0}));
}

TEST_CASE("system hamiltonian") {
    const double G0 = 7.7, Om = 2.0109, wc = 2.0109, wd = wc;
    StateSpace s(two_mode_sector(1));
    const CMat H = build_system_hamiltonian(s, G0, Om, wc, 0.0, wd);
    CHECK(H.hermiticity_error() < 1e-15);
    const auto ev = hermitian_eigenvalues(H);
    // one-excitation block eigenvalues (omega_c - omega_d) ± G0, plus the vacuum
    CHECK(ev[0] == doctest::Approx(-G0 * meV).epsilon(1e-10));
    CHECK(ev[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ev[2] == doctest::Approx(G0 * meV).epsilon(1e-10));

    SUBCASE("Kerr term raises the two-exciton state") {
        const double W0 = 6.5;
        StateSpace sf(two_mode_fock(2));
        const CMat Hk = build_system_hamiltonian(sf, G0, Om, wc, W0, wd);
        const int i02 = sf.basis_index({0, 2});
        CHECK(Hk(i02, i02).real() ==
              doctest::Approx(2.0 * (Om - wd) + 2.0 * W0 * meV).epsilon(1e-12));
        CHECK(Hk.hermiticity_error() < 1e-15);
    }
}

TEST_CASE("chain hamiltonian") {
    ChainParams chain;
    chain.Omega_eV = {2.0109, 2.0127, 2.0145};
    chain.G_meV = {7.7, 0.9, 1.8};
    SpaceConfig cfg{{"cavity", "b0", "b1", "b2"}, TotalExcitationSector{1}};
    StateSpace s(cfg);
    const CMat H = build_chain_hamiltonian(s, chain, 2.0109, 0.0, 2.0109);
    CHECK(H.hermiticity_error() < 1e-15);

    SUBCASE("nearest-neighbor structure in the sector basis") {
        // single-excitation states are ordered cavity, b0, b1, b2 after the vacuum
        for (int i = 0; i < s.dim(); ++i)
            for (int j = 0; j < s.dim(); ++j)
                if (std::abs(H(i, j)) > 1e-15 && i != j) CHECK(std::abs(i - j) == 1);
    }

    SUBCASE("n = 0 chain reduces to the system hamiltonian") {
        ChainParams c0;
        c0.Omega_eV = {2.0109};
        c0.G_meV = {7.7};
        StateSpace s2(two_mode_sector(1));
        const CMat Hc = build_chain_hamiltonian(s2, c0, 2.0109, 0.0, 2.0109);
        const CMat Hs = build_system_hamiltonian(s2, 7.7, 2.0109, 2.0109, 0.0, 2.0109);
        for (std::size_t i = 0; i < Hc.a.size(); ++i) CHECK(std::abs(Hc.a[i] - Hs.a[i]) < 1e-15);
    }

    SUBCASE("total excitation commutes with the undriven hamiltonian") {
        CMat Ntot(s.dim());
        for (int m = 0; m < s.n_modes(); ++m) Ntot += s.number_op(m);
        const CMat c1 = matmul(H, Ntot);
        const CMat c2 = matmul(Ntot, H);
        for (std::size_t i = 0; i < c1.a.size(); ++i) CHECK(std::abs(c1.a[i] - c2.a[i]) < 1e-14);
    }
}

TEST_CASE("polariton decomposition") {
    const double G0 = 7.7;
    SUBCASE("resonant case") {
        const auto d = polariton_decomposition(G0, 2.0109, 2.0109, 2.0109);
        CHECK(d.eta_eV == doctest::Approx(2.0 * G0 * meV).epsilon(1e-12));
        CHECK(d.omega_plus_lab_eV == doctest::Approx(2.0109 + G0 * meV).epsilon(1e-12));
        CHECK(d.omega_minus_lab_eV == doctest::Approx(2.0109 - G0 * meV).epsilon(1e-12));
        // equal weights 1/sqrt(2) after normalization
        const double norm_p = std::hypot(d.ca_plus, d.cB_plus);
        CHECK(d.ca_plus / norm_p == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
        CHECK(d.cB_plus / norm_p == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
        const double norm_m = std::hypot(d.ca_minus, d.cB_minus);
        CHECK(std::abs(d.ca_minus) / norm_m == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    }
    SUBCASE("decoupling limit") {
        const double delta = 0.5;  // eV, far above G0
        const auto d = polariton_decomposition(G0, 2.0 + delta, 2.0, 2.0);
        CHECK(d.eta_eV == doctest::Approx(delta).epsilon(1e-3));
        // upper polariton becomes cavity-like, lower exciton-like
        CHECK(std::abs(d.cB_plus) / std::abs(d.ca_plus) < 0.05);
        CHECK(std::abs(d.ca_minus) / std::abs(d.cB_minus) < 0.05);
    }
    CHECK_THROWS(polariton_decomposition(0.0, 2.0, 2.0, 2.0));
}

TEST_CASE("secular dissipator") {
    const double xi = 0.88, w0 = 2.01;
    const double Om = w0 + xi * meV;
    StateSpace s(two_mode_sector(1));

    SUBCASE("strong coupling leaves only the upper-polariton channel") {
        const double G0 = 7.7;  // G0 > Omega0 - omega0 = xi
        const auto Jres = gaussian_residual_J(G0, xi, w0);
        const auto dec = polariton_decomposition(G0, Om, Om, Om);
        const auto dis = secular_dissipator(dec, Jres, Om, s);
        REQUIRE(dis.terms.size() == 1);
        CHECK(dis.terms[0].label == "residual upper polariton");
        CHECK(dis.terms[0].weight_eV > 0.0);
    }

    SUBCASE("weak coupling activates both channels") {
        const double G0 = 0.3;  // G0 < xi: lower polariton stays inside the support
        const auto Jres = gaussian_residual_J(G0, xi, w0);
        const auto dec = polariton_decomposition(G0, Om, Om, Om);
        const auto dis = secular_dissipator(dec, Jres, Om, s);
        CHECK(dis.terms.size() == 2);
    }

    SUBCASE("zero residual density gives an empty list") {
        auto grid = log_grid(w0, w0 + 0.04, 64);
        std::vector<double> zeros(grid.size(), 0.0);
        const auto Jres = SpectralDensity::tabulated(grid, zeros);
        const auto dec = polariton_decomposition(7.7, Om, Om, Om);
        const auto dis = secular_dissipator(dec, Jres, Om, s);
        CHECK(dis.terms.empty());
    }

    SUBCASE("upper-polariton rate decreases with the confinement length") {
        // Ei closed form across an L sweep at fixed G0 (xi ~ 1/L^2)
        double prev = 1e300;
        for (double L : {2.0, 4.0, 8.0, 16.0}) {
            const double xi_L = 0.88 * 64.0 / (L * L);
            const auto Jres = gaussian_residual_J(7.7, xi_L, w0);
            const double val = markov_rate(Jres, 7.7 * meV + xi_L * meV, w0);
            CHECK(val < prev);
            prev = val;
        }
    }

    SUBCASE("rates are invariant under a global phase of the projected operator") {
        const double G0 = 7.7;
        const auto Jres = gaussian_residual_J(G0, xi, w0);
        const auto dec = polariton_decomposition(G0, Om, Om, Om);
        auto dis = secular_dissipator(dec, Jres, Om, s);
        REQUIRE(dis.terms.size() == 1);
        Liouvillian L1{CMat(s.dim()), CMat{}, nullptr, dis.terms};
        auto rotated = dis.terms;
        const cplx phase{std::cos(0.7), std::sin(0.7)};
        rotated[0].op *= phase;
        Liouvillian L2{CMat(s.dim()), CMat{}, nullptr, rotated};
        const CMat rho = random_density(s.dim(), 42);
        const CMat r1 = lindblad_rhs(L1, rho);
        const CMat r2 = lindblad_rhs(L2, rho);
        for (std::size_t i = 0; i < r1.a.size(); ++i) CHECK(std::abs(r1.a[i] - r2.a[i]) < 1e-15);
    }

    SUBCASE("full eigenbasis projection matches the weak-drive form") {
        const double G0 = 7.7;
        const auto Jres = gaussian_residual_J(G0, xi, w0);
        const CMat H = build_system_hamiltonian(s, G0, Om, Om, 0.0, Om);
        const auto full = secular_dissipator_full(H, s.annihilator(1), Jres, Om);
        const auto dec = polariton_decomposition(G0, Om, Om, Om);
        const auto weak = secular_dissipator(dec, Jres, Om, s);
        REQUIRE(full.terms.size() == weak.terms.size());
        CHECK(full.terms[0].weight_eV ==
              doctest::Approx(weak.terms[0].weight_eV).epsilon(1e-9));
        // same channel operator up to a global phase
        const CMat& A = full.terms[0].op;
        const CMat& B = weak.terms[0].op;
        cplx ratio{0.0, 0.0};
        for (std::size_t i = 0; i < A.a.size(); ++i)
            if (std::abs(B.a[i]) > 1e-12) {
                ratio = A.a[i] / B.a[i];
                break;
            }
        CHECK(std::abs(std::abs(ratio) - 1.0) < 1e-9);
        for (std::size_t i = 0; i < A.a.size(); ++i)
            CHECK(std::abs(A.a[i] - ratio * B.a[i]) < 1e-9);
    }
}

TEST_CASE("lindblad dynamics") {
    SUBCASE("pure decay of the mode population") {
        SpaceConfig cfg{{"cavity"}, PerModeFock{{2}}};
        StateSpace s(cfg);
        const double gamma = 1.5;  // meV as hbar*gamma
        Liouvillian L{CMat(s.dim()), CMat{}, nullptr,
                      {LindbladTerm{2.0 * gamma * meV, s.annihilator(0), "decay"}}};
        std::vector<double> t_grid;
        for (int i = 0; i <= 60; ++i) t_grid.push_back(i * 10.0);
        PropagateOptions opts;
        opts.observables.emplace_back("n", s.number_op(0));
        const auto res = propagate(L, s.fock_density({1}), t_grid, 1e-10, opts);
        const double rate = 2.0 * gamma * meV / hbar_ev_fs;
        for (std::size_t i = 0; i < t_grid.size(); ++i) {
            const double expect = std::exp(-rate * t_grid[i]);
            CHECK(std::abs(res.series.at("n")[i] - expect) < 1e-6 * std::max(expect, 1e-3));
            CHECK(res.trace_error[i] < 1e-9);
        }
    }

    SUBCASE("pure dephasing freezes populations and damps coherences") {
        SpaceConfig cfg{{"rc"}, PerModeFock{{3}}};
        StateSpace s(cfg);
        const double gp = 0.11;  // meV
        const CMat n_op = s.number_op(0);
        Liouvillian L{CMat(s.dim()), CMat{}, nullptr,
                      {LindbladTerm{2.0 * gp * meV, n_op, "dephasing"}}};
        CMat rho(s.dim());
        // (|0> + |1> + |3>)/sqrt(3)
        const int i0 = s.basis_index({0}), i1 = s.basis_index({1}), i3 = s.basis_index({3});
        for (int a : {i0, i1, i3})
            for (int b : {i0, i1, i3}) rho(a, b) = 1.0 / 3.0;
        std::vector<double> t_grid{0.0, 400.0, 800.0};
        const auto res = propagate(L, rho, t_grid, 1e-10, {});
        const CMat& rf = res.rho_final;
        const double g = gp * meV / hbar_ev_fs;
        const double T = t_grid.back();
        CHECK(std::abs(rf(i0, i0).real() - 1.0 / 3.0) < 1e-8);
        CHECK(std::abs(rf(i1, i1).real() - 1.0 / 3.0) < 1e-8);
        CHECK(std::abs(rf(i3, i3).real() - 1.0 / 3.0) < 1e-8);
        CHECK(std::abs(rf(i0, i1)) == doctest::Approx(std::exp(-g * T) / 3.0).epsilon(1e-6));
        CHECK(std::abs(rf(i1, i3)) == doctest::Approx(std::exp(-4.0 * g * T) / 3.0).epsilon(1e-6));
        CHECK(std::abs(rf(i0, i3)) == doctest::Approx(std::exp(-9.0 * g * T) / 3.0).epsilon(1e-5));
    }

    SUBCASE("vacuum Rabi oscillation period") {
        const double G0 = 7.7;
        StateSpace s(two_mode_sector(1));
        const CMat H = build_system_hamiltonian(s, G0, 2.0109, 2.0109, 0.0, 2.0109);
        Liouvillian L{H, CMat{}, nullptr, {}};
        const double period = units::pi * hbar_ev_fs / (G0 * meV);
        std::vector<double> t_grid;
        const int steps = 2000;
        for (int i = 0; i <= steps; ++i) t_grid.push_back(1.25 * period * i / steps);
        PropagateOptions opts;
        opts.observables.emplace_back("n_c", s.number_op(0));
        const auto res = propagate(L, s.fock_density({1, 0}), t_grid, 1e-11, opts);
        const auto& n_c = res.series.at("n_c");
        // first full revival of the cavity population sits at t = period
        std::size_t best = steps / 2;
        for (std::size_t i = steps / 2; i < n_c.size(); ++i)
            if (n_c[i] > n_c[best]) best = i;
        const double h = t_grid[1] - t_grid[0];
        const double denom = n_c[best - 1] - 2.0 * n_c[best] + n_c[best + 1];
        const double t_peak =
            t_grid[best] + 0.5 * h * (n_c[best - 1] - n_c[best + 1]) / denom;
        CHECK(std::abs(t_peak - period) / period < 1e-4);
    }

    SUBCASE("total excitation is non-increasing under cavity decay") {
        StateSpace s(two_mode_sector(2));
        const CMat H = build_system_hamiltonian(s, 7.7, 2.0109, 2.0109, 0.0, 2.0109);
        Liouvillian L{H, CMat{}, nullptr,
                      {LindbladTerm{2.0 * 3.3 * meV, s.annihilator(0), "decay"}}};
        CMat Ntot(s.dim());
        Ntot += s.number_op(0);
        Ntot += s.number_op(1);
        std::vector<double> t_grid;
        for (int i = 0; i <= 100; ++i) t_grid.push_back(i * 5.0);
        PropagateOptions opts;
        opts.observables.emplace_back("N", Ntot);
        const auto res = propagate(L, s.fock_density({2, 0}), t_grid, 1e-10, opts);
        const auto& N = res.series.at("N");
        for (std::size_t i = 1; i < N.size(); ++i) CHECK(N[i] <= N[i - 1] + 1e-10);
    }

    SUBCASE("trace of the generator output vanishes") {
        StateSpace s(two_mode_fock(2));
        const CMat H = build_system_hamiltonian(s, 7.7, 2.0109, 2.0105, 6.5, 2.0);
        Liouvillian L{H, CMat{}, nullptr,
                      {LindbladTerm{6.6 * meV, s.annihilator(0), "decay"},
                       LindbladTerm{0.2 * meV, s.number_op(1), "dephasing"}}};
        const CMat rho = random_density(s.dim(), 7);
        const CMat r = lindblad_rhs(L, rho);
        CHECK(std::abs(r.trace()) < 1e-14);
    }
}

TEST_CASE("superoperator matches the direct right-hand side") {
    StateSpace s(two_mode_fock(2));
    const CMat H = build_system_hamiltonian(s, 7.7, 2.0109, 2.0105, 6.5, 2.0);
    Liouvillian L{H, CMat{}, nullptr,
                  {LindbladTerm{6.6 * meV, s.annihilator(0), "decay"},
                   LindbladTerm{4.2 * meV, s.annihilator(1), "x decay"},
                   LindbladTerm{0.2 * meV, s.number_op(1), "dephasing"}}};
    const auto M = build_superoperator(L);
    const CMat rho = random_density(s.dim(), 99);
    const CMat direct = lindblad_rhs(L, rho);
    const int n = s.dim();
    Eigen::VectorXcd v(n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) v(static_cast<Eigen::Index>(i) * n + j) = rho(i, j);
    const Eigen::VectorXcd w = M * v;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            CHECK(std::abs(w(static_cast<Eigen::Index>(i) * n + j) - direct(i, j)) < 1e-12);

    SUBCASE("adjoint generator annihilates the identity") {
        // trace preservation: the sum of rows (i,i) of M vanishes
        Eigen::RowVectorXcd tr_rows = Eigen::RowVectorXcd::Zero(n * n);
        for (int i = 0; i < n; ++i) tr_rows += M.row(static_cast<Eigen::Index>(i) * n + i);
        CHECK(tr_rows.cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("steady states") {
    SUBCASE("undriven decay relaxes to the vacuum") {
        StateSpace s(two_mode_fock(2));
        const CMat H = build_system_hamiltonian(s, 7.7, 2.0109, 2.0109, 0.0, 2.0109);
        Liouvillian L{H, CMat{}, nullptr,
                      {LindbladTerm{6.6 * meV, s.annihilator(0), "decay"},
                       LindbladTerm{4.2 * meV, s.annihilator(1), "x decay"}}};
        const CMat rho = steady_state(L);
        const int vac = s.basis_index({0, 0});
        CHECK(rho(vac, vac).real() == doctest::Approx(1.0).epsilon(1e-10));
    }

    SUBCASE("driven damped cavity population") {
        SpaceConfig cfg{{"cavity"}, PerModeFock{{3}}};
        StateSpace s(cfg);
        const double F = 0.05, gamma = 3.3, delta = 1.2;  // meV
        CMat H(s.dim());
        for (int i = 0; i < s.dim(); ++i) H(i, i) = delta * meV * i;
        const CMat a = s.annihilator(0);
        const CMat drive = a + a.dagger();
        for (std::size_t i = 0; i < H.a.size(); ++i) H.a[i] += F * meV * drive.a[i];
        Liouvillian L{H, CMat{}, nullptr, {LindbladTerm{2.0 * gamma * meV, a, "decay"}}};
        const CMat rho = steady_state(L);
        const double expect = F * F / (delta * delta + gamma * gamma);
        CHECK(expval(s.number_op(0), rho) == doctest::Approx(expect).epsilon(2e-3));
    }

    SUBCASE("long-time propagation converges to the steady state") {
        SpaceConfig cfg{{"cavity", "rc"}, PerModeFock{{2, 2}}};
        StateSpace s(cfg);
        CMat H = build_system_hamiltonian(s, 7.7, 2.0109, 2.0109, 0.0, 2.0109);
        const CMat a = s.annihilator(0);
        const CMat drive = a + a.dagger();
        for (std::size_t i = 0; i < H.a.size(); ++i) H.a[i] += 0.2 * meV * drive.a[i];
        Liouvillian L{H, CMat{}, nullptr,
                      {LindbladTerm{2.0 * 3.3 * meV, a, "decay"},
                       LindbladTerm{2.0 * 2.1 * meV, s.annihilator(1), "x decay"}}};
        const CMat rho_ss = steady_state(L);
        std::vector<double> t_grid{0.0, 2000.0, 4000.0};
        const auto res = propagate(L, s.fock_density({0, 0}), t_grid, 1e-10, {});
        CHECK(trace_distance(res.rho_final, rho_ss) < 1e-6);
    }

    SUBCASE("degenerate nullspace is reported") {
        SpaceConfig cfg{{"cavity"}, PerModeFock{{1}}};
        StateSpace s(cfg);
        Liouvillian L{CMat(s.dim()), CMat{}, nullptr, {}};  // every state is stationary
        CHECK_THROWS_WITH_AS(steady_state(L), doctest::Contains("nullspace"), std::runtime_error);
    }
}

TEST_CASE("density audits") {
    CMat rho(2);
    rho(0, 0) = 0.6;
    rho(1, 1) = 0.4;
    CHECK(trace_error(rho) < 1e-15);
    audit_density(rho);
    rho(0, 1) = cplx{0.0, 0.3};
    rho(1, 0) = cplx{0.0, 0.3};  // not hermitian: conj mismatch
    CHECK_THROWS(audit_density(rho));
    rho(1, 0) = cplx{0.0, -0.3};
    audit_density(rho);  // hermitian again
    // positivity floor: eigenvalues 0.5 ± sqrt(0.01+0.09)
    CMat neg(2);
    neg(0, 0) = 0.5;
    neg(1, 1) = 0.5;
    neg(0, 1) = 0.6;
    neg(1, 0) = 0.6;
    CHECK_THROWS(audit_density(neg));
}
