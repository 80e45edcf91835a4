#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rcdyn/materials.hpp"
#include "rcdyn/spectral.hpp"
#include "rcdyn/units.hpp"

using namespace rcdyn;
using rcdyn::units::meV;

namespace {

// independent quadrature oracle on a fine uniform grid
template <typename F>
double integrate_uniform(F f, double a, double b, int n) {
    double s = 0.5 * (f(a) + f(b));
    const double h = (b - a) / n;
    for (int i = 1; i < n; ++i) s += f(a + i * h);
    return s * h;
}

}  // namespace

TEST_CASE("gaussian density: step, weight and moments") {
    const double G0 = 7.7, xi = 0.88, w0 = 2.01;
    const auto J = gaussian_J(G0, xi, w0);

    CHECK(J(w0 - 1e-9) == 0.0);
    CHECK(J(w0) == doctest::Approx((G0 * meV) * (G0 * meV) / (xi * meV)).epsilon(1e-12));

    // independent uniform quadrature of the closed form
    const double total = integrate_uniform([&](double w) { return J(w); }, w0,
                                           J.support_max(), 400000);
    CHECK(total == doctest::Approx(G0 * meV * G0 * meV).epsilon(1e-6));
    const double first = integrate_uniform([&](double w) { return w * J(w); }, w0,
                                           J.support_max(), 400000) /
                         total;
    CHECK(first == doctest::Approx(w0 + xi * meV).epsilon(1e-9));

    const auto [Omega0, G0_out] = moments(J);
    CHECK(G0_out == doctest::Approx(G0).epsilon(1e-6));
    CHECK(Omega0 == doctest::Approx(w0 + xi * meV).epsilon(1e-9));
    CHECK(Omega0 - w0 == doctest::Approx(xi * meV).epsilon(1e-5));
}

TEST_CASE("moments: scaling and zero-measure error") {
    const auto J = gaussian_J(5.0, 1.3, 2.0).resample(4096);
    auto scaled_vals = J.values();
    for (auto& v : scaled_vals) v *= 4.0;
    const auto J4 = SpectralDensity::tabulated(J.grid(), scaled_vals);
    const auto [O1, g1] = moments(J);
    const auto [O4, g4] = moments(J4);
    CHECK(g4 == doctest::Approx(2.0 * g1).epsilon(1e-12));
    CHECK(O4 == doctest::Approx(O1).epsilon(1e-12));

    std::vector<double> w{1.0, 2.0, 3.0}, z{0.0, 0.0, 0.0};
    CHECK_THROWS(moments(SpectralDensity::tabulated(w, z)));
}

TEST_CASE("reducer: rectangular density vanishes at the midpoint") {
    std::vector<double> w = log_grid(1.0, 2.0, 2001, 1e-6);  // nearly uniform
    std::vector<double> v(w.size(), 3.0);
    const auto J = SpectralDensity::tabulated(w, v);
    CHECK(std::abs(reducer(J, 1.5)) < 1e-8);
    CHECK_THROWS(reducer(J, 0.99));
    CHECK_THROWS(reducer(J, 2.0));
}

TEST_CASE("reducer: Gaussian closed form via the exponential integral") {
    const double G0 = 7.7, xi = 0.88, w0 = 2.01;
    const auto J = gaussian_J(G0, xi, w0);
    for (double x : {0.2, 0.5, 1.0, 2.0, 5.0, 9.0}) {
        const double w = w0 + x * xi * meV;
        const double got = reducer(J, w);
        const double expect = J(w) * std::expint(x);
        CHECK(got == doctest::Approx(expect).epsilon(2e-4));
    }
}

TEST_CASE("reducer: insensitive to the upper support cutoff") {
    const double G0 = 7.7, xi = 0.88, w0 = 2.01;
    const auto J40 = gaussian_J(G0, xi, w0, 40.0);
    const auto J80 = gaussian_J(G0, xi, w0, 80.0);
    for (double x : {0.5, 1.0, 3.0, 8.0}) {
        const double w = w0 + x * xi * meV;
        const double p40 = reducer(J40, w);
        const double p80 = reducer(J80, w);
        CHECK(p40 == doctest::Approx(p80).epsilon(1e-4));
    }
}

TEST_CASE("residual density: pipeline matches the closed form") {
    const double G0 = 7.7, xi = 0.88, w0 = 2.01;
    const auto J = gaussian_J(G0, xi, w0);
    const auto Jres = residual_J(J);
    const auto closed = gaussian_residual_J(G0, xi, w0);

    double sup_err = 0.0, sup_ref = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double w = w0 + 10.0 * xi * meV * i / 1000.0;
        sup_err = std::max(sup_err, std::abs(Jres(w) - closed(w)));
        sup_ref = std::max(sup_ref, closed(w));
    }
    CHECK(sup_err / sup_ref < 1e-3);

    CHECK(closed(w0 - 1e-6) == 0.0);
    CHECK(Jres(w0) == 0.0);
    for (int i = 0; i <= 100; ++i) {
        const double w = w0 + 20.0 * xi * meV * i / 100.0;
        CHECK(Jres(w) >= 0.0);
    }
}

TEST_CASE("residual density scales with the cutoff frequency") {
    // at fixed x = (w - w0)/xi the closed form is proportional to xi
    const auto r1 = gaussian_residual_J(7.7, 0.5, 2.01);
    const auto r2 = gaussian_residual_J(7.7, 1.5, 2.01);
    for (double x : {0.3, 1.0, 4.0}) {
        const double v1 = r1(2.01 + x * 0.5 * meV);
        const double v2 = r2(2.01 + x * 1.5 * meV);
        CHECK(v2 == doctest::Approx(3.0 * v1).epsilon(1e-9));
    }
}

TEST_CASE("markov rate") {
    const double G0 = 7.7, xi = 0.88, w0 = 2.01;
    const auto Jres = gaussian_residual_J(G0, xi, w0);
    // below the support
    CHECK(markov_rate(Jres, -5.0e-3, w0) == 0.0);
    // upper polariton at resonance: 2 pi J_res(Omega0 + G0), lab frame
    const double Omega0 = w0 + xi * meV;
    const double rate = markov_rate(Jres, Omega0 + G0 * meV - w0, w0);
    CHECK(rate == doctest::Approx(2.0 * units::pi * Jres(Omega0 + G0 * meV) / meV).epsilon(1e-12));
    CHECK(rate > 0.0);

    // doubling G0 at fixed xi pushes the upper polariton into a weaker
    // region of the residual density
    double prev = 0.0;
    bool first = true;
    for (double g = 4.0; g <= 32.0; g *= 2.0) {
        const auto r = gaussian_residual_J(g, xi, w0);
        const double om_plus = w0 + xi * meV + g * meV;
        const double val = markov_rate(r, om_plus - w0, w0);
        if (!first) CHECK(val < prev);
        prev = val;
        first = false;
    }
}

TEST_CASE("chain map: head entries and the Laguerre oracle") {
    // For an exponential density the environment tridiagonalization has
    // Laguerre recurrence coefficients: Omega_n = w0 + (2n+1) xi, G_n = n xi.
    const double G0 = 7.7, xi = 0.88, w0 = 2.01;
    const auto J = gaussian_J(G0, xi, w0, 80.0);
    const auto chain = chain_map(J, 3, GridOptions{8192, 6.0});

    const auto [Omega0, G0_out] = moments(J);
    CHECK(chain.Omega_eV[0] == doctest::Approx(Omega0).epsilon(1e-12));
    CHECK(chain.G_meV[0] == doctest::Approx(G0_out).epsilon(1e-12));

    CHECK(chain.G_meV[1] == doctest::Approx(xi).epsilon(2e-3));
    CHECK(chain.Omega_eV[1] - w0 == doctest::Approx(3.0 * xi * meV).epsilon(5e-3));
    CHECK(chain.G_meV[2] == doctest::Approx(2.0 * xi).epsilon(1e-2));
    CHECK(chain.Omega_eV[2] - w0 == doctest::Approx(5.0 * xi * meV).epsilon(2e-2));

    for (double Om : chain.Omega_eV) CHECK(Om >= w0);
}

TEST_CASE("chain map: prefix stability and depth guard") {
    const auto J = gaussian_J(5.0, 1.1, 2.0);
    const auto c4 = chain_map(J, 4);
    const auto c8 = chain_map(J, 8);
    for (int n = 0; n <= 4; ++n) {
        CHECK(c8.Omega_eV[n] == c4.Omega_eV[n]);
        CHECK(c8.G_meV[n] == c4.G_meV[n]);
    }
    CHECK_THROWS(chain_map(J, 65));
    CHECK_THROWS(chain_map(J, -1));
}

TEST_CASE("numeric density from a momentum sampler") {
    // Synthetic isotropic Gaussian coupling; the analytic density is the oracle.
    const auto mat = derive(MaterialDb::load(std::string(RCDYN_DATA_DIR) + "/materials.csv")
                                .find("WS2"));
    const double L = 10.0;  // nm
    const double xi_eV = cutoff_frequency_eV(mat, L);
    const double G0_meV_in = 7.7;
    const double G0_eV = G0_meV_in * meV;
    // valley-summed |hbar g(k)|^2 = 4 pi L^2 (hbar G0)^2 exp(-k^2 L^2) [meV^2 nm^2]
    const double C = 4.0 * units::pi * L * L * (G0_meV_in * G0_meV_in);
    auto sampler = [&](double kx, double ky) {
        return C * std::exp(-(kx * kx + ky * ky) * L * L);
    };

    const double b = mat.omega0_eV + 40.0 * xi_eV;
    const double k_needed = std::sqrt((b - mat.omega0_eV) / dispersion_coefficient_ev_nm2(mat));
    const auto Jnum = numeric_J(sampler, mat, 1.2 * k_needed, b);
    const auto Jref = gaussian_J(G0_meV_in, xi_eV / meV, mat.omega0_eV);

    double sup_err = 0.0, sup_ref = 0.0;
    for (int i = 0; i <= 2000; ++i) {
        const double w = mat.omega0_eV + (b - mat.omega0_eV) * i / 2000.0;
        sup_err = std::max(sup_err, std::abs(Jnum(w) - Jref(w)));
        sup_ref = std::max(sup_ref, Jref(w));
    }
    CHECK(sup_err / sup_ref < 1e-3);

    // total weight against a direct k-space quadrature
    double acc = 0.0;
    const int nk = 400;
    const double kmax = 1.2 * k_needed;
    for (int i = 0; i < nk; ++i) {
        const double k = (i + 0.5) * kmax / nk;
        acc += sampler(k, 0.0) * 2.0 * units::pi * k * (kmax / nk);
    }
    acc /= 4.0 * units::pi * units::pi;  // sum over k -> integral/(2pi)^2
    acc *= meV * meV;                    // meV^2 -> eV^2
    const auto [Om, Gm] = moments(Jnum);
    CHECK(Gm * meV * (Gm * meV) == doctest::Approx(acc).epsilon(1e-4));
    CHECK(G0_eV * G0_eV == doctest::Approx(acc).epsilon(1e-4));

    // coverage guard
    CHECK_THROWS(numeric_J(sampler, mat, 0.5 * k_needed, b));
}
