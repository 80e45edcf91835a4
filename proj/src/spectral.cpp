#include "rcdyn/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "rcdyn/kernels.hpp"
#include "rcdyn/units.hpp"

namespace rcdyn {

namespace {

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
        s += 0.5 * (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
    return s;
}

// centered finite differences on a nonuniform grid, one-sided at the ends
std::vector<double> grid_derivative(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t m = x.size();
    std::vector<double> d(m, 0.0);
    if (m < 2) return d;
    d[0] = (y[1] - y[0]) / (x[1] - x[0]);
    d[m - 1] = (y[m - 1] - y[m - 2]) / (x[m - 1] - x[m - 2]);
    for (std::size_t i = 1; i + 1 < m; ++i) {
        const double hl = x[i] - x[i - 1], hr = x[i + 1] - x[i];
        // weighted three-point formula, exact for parabolas
        d[i] = (y[i + 1] * hl * hl - y[i - 1] * hr * hr + y[i] * (hr * hr - hl * hl)) /
               (hl * hr * (hl + hr));
    }
    return d;
}

}  // namespace

std::vector<double> log_grid(double a, double b, int n, double stretch) {
    if (n < 2 || !(b > a)) throw std::invalid_argument("log_grid: bad arguments");
    std::vector<double> w(static_cast<std::size_t>(n));
    const double denom = std::expm1(stretch);
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        w[static_cast<std::size_t>(i)] = a + (b - a) * std::expm1(stretch * t) / denom;
    }
    w.front() = a;
    w.back() = b;
    return w;
}

SpectralDensity SpectralDensity::gaussian(double G0_meV, double xi_meV, double omega0_eV,
                                          double support_factor) {
    if (!(G0_meV > 0.0) || !(xi_meV > 0.0) || !(omega0_eV > 0.0))
        throw std::invalid_argument("gaussian_J: parameters must be positive");
    SpectralDensity J;
    J.kind_ = Kind::AnalyticGaussian;
    J.G0_meV_ = G0_meV;
    J.xi_meV_ = xi_meV;
    J.omega0_eV_ = omega0_eV;
    J.a_ = omega0_eV;
    J.b_ = omega0_eV + support_factor * xi_meV * units::meV;
    return J;
}

SpectralDensity SpectralDensity::gaussian_residual(double G0_meV, double xi_meV, double omega0_eV,
                                                   double support_factor) {
    SpectralDensity J = gaussian(G0_meV, xi_meV, omega0_eV, support_factor);
    J.kind_ = Kind::GaussianResidual;
    return J;
}

SpectralDensity SpectralDensity::tabulated(std::vector<double> omega_eV, std::vector<double> J_eV) {
    if (omega_eV.size() != J_eV.size() || omega_eV.size() < 2)
        throw std::invalid_argument("tabulated density: need matching grids with >= 2 points");
    for (std::size_t i = 0; i + 1 < omega_eV.size(); ++i)
        if (!(omega_eV[i + 1] > omega_eV[i]))
            throw std::invalid_argument("tabulated density: grid must increase strictly");
    for (double v : J_eV)
        if (!std::isfinite(v) || v < 0.0)
            throw std::invalid_argument("tabulated density: values must be finite and >= 0");
    SpectralDensity J;
    J.kind_ = Kind::Tabulated;
    J.a_ = omega_eV.front();
    J.b_ = omega_eV.back();
    J.w_ = std::move(omega_eV);
    J.J_ = std::move(J_eV);
    return J;
}

double SpectralDensity::operator()(double w) const {
    if (w < a_ || w > b_) return 0.0;
    switch (kind_) {
        case Kind::AnalyticGaussian: {
            const double G0 = G0_meV_ * units::meV, xi = xi_meV_ * units::meV;
            return (G0 * G0 / xi) * std::exp(-(w - omega0_eV_) / xi);
        }
        case Kind::GaussianResidual: {
            const double xi = xi_meV_ * units::meV;
            const double x = (w - omega0_eV_) / xi;
            if (x <= 0.0) return 0.0;
            const double ei = std::expint(x);
            return xi * std::exp(x) / (ei * ei + units::pi * units::pi);
        }
        case Kind::Tabulated: {
            const auto it = std::upper_bound(w_.begin(), w_.end(), w);
            if (it == w_.begin()) return J_.front();
            if (it == w_.end()) return J_.back();
            const std::size_t hi = static_cast<std::size_t>(it - w_.begin());
            const std::size_t lo = hi - 1;
            const double t = (w - w_[lo]) / (w_[hi] - w_[lo]);
            return J_[lo] + t * (J_[hi] - J_[lo]);
        }
    }
    return 0.0;
}

SpectralDensity SpectralDensity::resample(int n_points) const {
    auto w = log_grid(a_, b_, n_points);
    std::vector<double> v(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) v[i] = (*this)(w[i]);
    return tabulated(std::move(w), std::move(v));
}

SpectralDensity gaussian_J(double G0_meV, double xi_meV, double omega0_eV, double support_factor) {
    return SpectralDensity::gaussian(G0_meV, xi_meV, omega0_eV, support_factor);
}

SpectralDensity gaussian_residual_J(double G0_meV, double xi_meV, double omega0_eV,
                                    double support_factor) {
    return SpectralDensity::gaussian_residual(G0_meV, xi_meV, omega0_eV, support_factor);
}

SpectralDensity numeric_J(const std::function<double(double, double)>& gk2_sampler,
                          const DerivedMaterial& material, double k_max_inv_nm, double target_b_eV,
                          int n_omega, int n_theta) {
    if (!(k_max_inv_nm > 0.0)) throw std::invalid_argument("numeric_J: k_max must be positive");
    const double kappa = dispersion_coefficient_ev_nm2(material);  // eV nm^2
    const double w0 = material.omega0_eV;
    const double b_reachable = w0 + kappa * k_max_inv_nm * k_max_inv_nm;
    double b = (target_b_eV > 0.0) ? target_b_eV : b_reachable;
    if (b > b_reachable * (1.0 + 1e-12))
        throw std::invalid_argument(
            "numeric_J: k_max covers the support only up to " + std::to_string(b_reachable) +
            " eV, requested " + std::to_string(b) + " eV");

    auto w = log_grid(w0, b, n_omega);
    std::vector<double> J(w.size(), 0.0);
    const double meV2nm2_to_eV2nm2 = units::meV * units::meV;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double k = std::sqrt(std::max(0.0, (w[i] - w0) / kappa));
        // periodic trapezoid over the ring
        double ang = 0.0;
        for (int t = 0; t < n_theta; ++t) {
            const double th = 2.0 * units::pi * t / n_theta;
            ang += gk2_sampler(k * std::cos(th), k * std::sin(th));
        }
        ang *= 2.0 * units::pi / n_theta;  // integral over theta
        const double val = ang * meV2nm2_to_eV2nm2 / (8.0 * units::pi * units::pi * kappa);
        if (!std::isfinite(val)) throw std::runtime_error("numeric_J: non-finite sample");
        J[i] = std::max(0.0, val);
    }
    return SpectralDensity::tabulated(std::move(w), std::move(J));
}

std::pair<double, double> moments(const SpectralDensity& J) {
    std::vector<double> w, v;
    if (J.kind() == SpectralDensity::Kind::Tabulated) {
        w = J.grid();
        v = J.values();
    } else {
        const auto tab = J.resample(4096);
        w = tab.grid();
        v = tab.values();
    }
    std::vector<double> wv(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) wv[i] = w[i] * v[i];
    const double total = trapezoid(w, v);
    if (!(total > 0.0)) throw std::runtime_error("moments: spectral density has zero weight");
    const double first = trapezoid(w, wv) / total;
    return {first, std::sqrt(total) / units::meV};
}

namespace {

struct ReducerTable {
    std::vector<double> w, J, dJ, phi;
    double a = 0.0, b = 0.0;
    double total = 0.0;  // integral of J
};

ReducerTable build_reducer_table(const SpectralDensity& J, const GridOptions& opts) {
    ReducerTable t;
    t.a = J.support_min();
    t.b = J.support_max();
    if (J.kind() == SpectralDensity::Kind::Tabulated &&
        static_cast<int>(J.grid().size()) >= opts.n_points) {
        t.w = J.grid();
        t.J = J.values();
    } else {
        t.w = log_grid(t.a, t.b, opts.n_points, opts.log_stretch);
        t.J.resize(t.w.size());
        for (std::size_t i = 0; i < t.w.size(); ++i) t.J[i] = J(t.w[i]);
    }
    t.dJ = grid_derivative(t.w, t.J);
    t.phi.assign(t.w.size(), 0.0);
    kernels::tabulate_reducer(t.w, t.J, t.dJ, t.a, t.b, t.phi);
    t.total = trapezoid(t.w, t.J);
    return t;
}

}  // namespace

double reducer(const SpectralDensity& J, double omega_eV, const GridOptions& opts) {
    const double a = J.support_min(), b = J.support_max();
    if (!(omega_eV > a) || !(omega_eV < b))
        throw std::invalid_argument("reducer: frequency outside the open support");
    // quadrature grid with the evaluation point inserted as a node, so the
    // subtracted integrand stays regular under the trapezoidal rule
    auto w = log_grid(a, b, opts.n_points, opts.log_stretch);
    const auto pos = std::lower_bound(w.begin(), w.end(), omega_eV);
    std::size_t idx = static_cast<std::size_t>(pos - w.begin());
    if (pos == w.end() || std::abs(*pos - omega_eV) > 1e-15) {
        w.insert(pos, omega_eV);
    }
    idx = static_cast<std::size_t>(std::lower_bound(w.begin(), w.end(), omega_eV) - w.begin());
    std::vector<double> Jv(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) Jv[i] = J(w[i]);
    const auto dJ = grid_derivative(w, Jv);
    const double Ji = Jv[idx];
    double integral = 0.0;
    // trapezoid weights inline (grid is small and call-local)
    for (std::size_t j = 0; j < w.size(); ++j) {
        double wt;
        if (j == 0)
            wt = 0.5 * (w[1] - w[0]);
        else if (j + 1 == w.size())
            wt = 0.5 * (w[j] - w[j - 1]);
        else
            wt = 0.5 * (w[j + 1] - w[j - 1]);
        const double g = (j == idx) ? dJ[j] : (Jv[j] - Ji) / (w[j] - omega_eV);
        integral += wt * g;
    }
    return Ji * std::log((omega_eV - a) / (b - omega_eV)) - integral;
}

double cauchy_transform(const SpectralDensity& J, double omega_eV, const GridOptions& opts) {
    const double a = J.support_min(), b = J.support_max();
    if (omega_eV > a && omega_eV < b) return reducer(J, omega_eV, opts);
    if (omega_eV == a || omega_eV == b)
        throw std::invalid_argument("cauchy_transform: frequency at the support edge");
    const auto w = log_grid(a, b, opts.n_points, opts.log_stretch);
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < w.size(); ++j) {
        const double f0 = J(w[j]) / (omega_eV - w[j]);
        const double f1 = J(w[j + 1]) / (omega_eV - w[j + 1]);
        s += 0.5 * (w[j + 1] - w[j]) * (f0 + f1);
    }
    return s;
}

SpectralDensity residual_J(const SpectralDensity& J, const GridOptions& opts) {
    const ReducerTable t = build_reducer_table(J, opts);
    if (!(t.total > 0.0)) throw std::runtime_error("residual_J: zero-weight density");
    std::vector<double> out(t.w.size(), 0.0);
    const double pi2 = units::pi * units::pi;
    for (std::size_t i = 1; i + 1 < t.w.size(); ++i) {
        const double denom = t.phi[i] * t.phi[i] + pi2 * t.J[i] * t.J[i];
        out[i] = (denom > 0.0) ? t.total * t.J[i] / denom : 0.0;
        if (!std::isfinite(out[i])) throw std::runtime_error("residual_J: non-finite value");
    }
    // support edges: J_res vanishes there in the continuum limit
    out.front() = 0.0;
    out.back() = 0.0;
    auto w = t.w;
    return SpectralDensity::tabulated(std::move(w), std::move(out));
}

double markov_rate(const SpectralDensity& J_res, double omega_rot_eV, double omega_d_eV) {
    const double w = omega_rot_eV + omega_d_eV;
    return 2.0 * units::pi * J_res(w) / units::meV;
}

ChainParams chain_map(const SpectralDensity& J, int N, const GridOptions& opts) {
    if (N < 0) throw std::invalid_argument("chain_map: depth must be >= 0");
    if (N > 64)
        throw std::invalid_argument("chain_map: depth > 64 requires a re-gridding audit");
    ChainParams chain;
    SpectralDensity cur = J;
    for (int n = 0; n <= N; ++n) {
        std::pair<double, double> m;
        try {
            m = moments(cur);
        } catch (const std::exception& e) {
            throw std::runtime_error("chain_map: iteration " + std::to_string(n) + ": " + e.what());
        }
        if (!std::isfinite(m.first) || !std::isfinite(m.second))
            throw std::runtime_error("chain_map: non-finite moments at iteration " +
                                     std::to_string(n));
        chain.Omega_eV.push_back(m.first);
        chain.G_meV.push_back(m.second);
        if (n < N) {
            try {
                cur = residual_J(cur, opts).resample(opts.n_points);
            } catch (const std::exception& e) {
                throw std::runtime_error("chain_map: iteration " + std::to_string(n) + ": " +
                                         e.what());
            }
        }
    }
    return chain;
}

void export_density_csv(const SpectralDensity& J, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    out << "omega_eV,J_eV\n";
    const SpectralDensity tab =
        (J.kind() == SpectralDensity::Kind::Tabulated) ? J : J.resample(2048);
    for (std::size_t i = 0; i < tab.grid().size(); ++i)
        out << tab.grid()[i] << "," << tab.values()[i] << "\n";
}

void export_chain_csv(const ChainParams& chain, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    out << "n,Omega_eV,G_meV\n";
    for (std::size_t n = 0; n < chain.Omega_eV.size(); ++n)
        out << n << "," << chain.Omega_eV[n] << "," << chain.G_meV[n] << "\n";
}

}  // namespace rcdyn
