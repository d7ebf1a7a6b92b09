#pragma once

// Exact solution of the fractional Kolmogorov equation
//     ∂_t f + v ∂_x f + Λ_v^{2s} f = 0,   Λ_v = (1 − Δ_v)^{1/2},
// on T × R in double Fourier variables (ξ ∈ ℤ, η ∈ ℝ). Along characteristics
//     f̂(t, ξ, η) = f̂₀(ξ, η + ξt) · exp(−∫₀ᵗ ⟨η + ξτ⟩^{2s} dτ).
// Symbols are kept as closed-form functions so shifted evaluation is exact.

#include "entropy.hpp"
#include "evolve.hpp"
#include "parallel.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypokinetic {

inline double bracket(double x) { return std::sqrt(1.0 + x * x); }

using SymbolFn = std::function<cplx(double xi, double eta)>;

struct PhaseGrid {
    int n_xi = 16;
    double eta_max = 64.0;
    int n_eta = 4097;

    void validate() const {
        if (n_xi < 0) throw std::invalid_argument("PhaseGrid: n_xi must be >= 0");
        if (!(eta_max > 0) || n_eta < 3) throw std::invalid_argument("PhaseGrid: need eta_max > 0 and n_eta >= 3");
    }
    int modes() const { return 2 * n_xi + 1; }
    double deta() const { return 2.0 * eta_max / (n_eta - 1); }
    double eta(int j) const { return -eta_max + j * deta(); }
};

struct SobolevSpec {
    double alpha = 0.0;
    double beta = 0.0;
};

class PhaseSymbolField {
public:
    using Storage = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    /// Samples `symbol` on the grid. `eta_support` bounds |η| outside which the
    /// initial symbol is negligible; it fixes how far characteristics may travel.
    PhaseSymbolField(const PhaseGrid& grid, double s, SymbolFn symbol, double eta_support, double time = 0.0)
        : grid_(grid), s_(s), support_(eta_support), time_(time),
          symbol_(std::make_shared<const SymbolFn>(std::move(symbol))) {
        grid.validate();
        if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("PhaseSymbolField: s must lie in (0, 1]");
        values_.resize(grid.modes(), grid.n_eta);
        parallel_for(grid.modes(), [&](int i) {
            const double xi = i - grid_.n_xi;
            for (int j = 0; j < grid_.n_eta; ++j) values_(i, j) = (*symbol_)(xi, grid_.eta(j));
        });
    }

    const PhaseGrid& grid() const { return grid_; }
    double s() const { return s_; }
    double time() const { return time_; }
    double eta_support() const { return support_; }
    const SymbolFn& symbol() const { return *symbol_; }
    const Storage& values() const { return values_; }
    cplx operator()(int xi, int j) const { return values_(xi + grid_.n_xi, j); }

    /// max over ξ of |f̂(ξ, ±η_max)| relative to max |f̂|.
    double boundary_ratio() const {
        const double top = values_.cwiseAbs().maxCoeff();
        if (top == 0.0) return 0.0;
        const double edge = std::max(values_.col(0).cwiseAbs().maxCoeff(), values_.col(grid_.n_eta - 1).cwiseAbs().maxCoeff());
        return edge / top;
    }

    double reality_defect() const {
        double d = 0.0;
        for (int xi = -grid_.n_xi; xi <= grid_.n_xi; ++xi)
            for (int j = 0; j < grid_.n_eta; ++j)
                d = std::max(d, std::abs((*this)(-xi, grid_.n_eta - 1 - j) - std::conj((*this)(xi, j))));
        return d;
    }

private:
    PhaseGrid grid_;
    double s_;
    double support_;
    double time_;
    std::shared_ptr<const SymbolFn> symbol_;
    Storage values_;
};

// ---------------------------------------------------------------------------
// Damping along characteristics

/// ∫₀ᵗ (1 + (η+ξτ)²) dτ = t(1 + η² + ηξt + ξ²t²/3), the s = 1 closed form.
inline double fk_damping_s1(double xi, double eta, double t) {
    return t * (1.0 + eta * eta + eta * xi * t + xi * xi * t * t / 3.0);
}

/// ∫₀ᵁ (1+w²)^s dw for 0 ≤ U ≤ 2 by 20-point Gauss–Legendre. The integrand
/// is analytic in the strip |Im w| < 1, so the rule is exact to rounding.
inline double fk_phi_near(double U, double s) {
    auto f = [s](double w) { return std::pow(1.0 + w * w, s); };
    return boost::math::quadrature::gauss<double, 20>::integrate(f, 0.0, U);
}

/// Φ_s(u) = ∫₀ᵘ (1+w²)^s dw. Quadrature on |w| ≤ 2; beyond that the binomial
/// series (1+w²)^s = Σ_k C(s,k) w^{2s−2k} is integrated term by term.
inline double fk_phi(double u, double s) {
    const double U = std::abs(u);
    if (U <= 2.0) return std::copysign(fk_phi_near(U, s), u);
    thread_local double cached_s = -1.0, cached_phi2 = 0.0;
    if (s != cached_s) {
        cached_phi2 = fk_phi_near(2.0, s);
        cached_s = s;
    }
    double acc = cached_phi2;
    const double lnU = std::log(U), ln2 = std::log(2.0);
    const double invU2 = 1.0 / (U * U);
    double Up = std::exp((2.0 * s + 1.0) * lnU), Tp = std::exp((2.0 * s + 1.0) * ln2);
    double binom = 1.0;
    for (int k = 0; k < 80; ++k) {
        const double p = 2.0 * s - 2.0 * k + 1.0;
        double term;
        if (std::abs(p) < 1e-3)
            term = p == 0.0 ? lnU - ln2 : (std::expm1(p * lnU) - std::expm1(p * ln2)) / p;
        else
            term = (Up - Tp) / p;
        const double add = binom * term;
        acc += add;
        if (k > 1 && std::abs(add) <= 1e-17 * std::abs(acc)) break;
        binom *= (s - k) / (k + 1.0);
        Up *= invU2;
        Tp *= 0.25;
    }
    return std::copysign(acc, u);
}

/// ∫₀ᵗ ⟨η+ξτ⟩^{2s} dτ. Short characteristics (relative to the distance of
/// η+ξτ from the origin) use adaptive Gauss–Kronrod in τ at tolerance 1e-12;
/// long ones use (Φ_s(η+ξt) − Φ_s(η))/ξ, where the subtraction is benign.
inline double fk_damping_quadrature(double xi, double eta, double t, double s) {
    if (t == 0.0) return 0.0;
    const double a = eta, b = eta + xi * t;
    const double len = std::abs(b - a);
    const double dist = (a > 0) == (b > 0) ? std::min(std::abs(a), std::abs(b)) : 0.0;
    if (len <= 0.25 * std::max(1.0, dist)) {
        auto f = [=](double tau) { return std::pow(1.0 + (eta + xi * tau) * (eta + xi * tau), s); };
        return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, 0.0, t, 15, 1e-12);
    }
    return (fk_phi(b, s) - fk_phi(a, s)) / xi;
}

inline double fk_damping(double xi, double eta, double t, double s) {
    if (s == 1.0) return fk_damping_s1(xi, eta, t);
    if (xi == 0.0) return t * std::pow(1.0 + eta * eta, s);
    return fk_damping_quadrature(xi, eta, t, s);
}

/// Minimal η_max that keeps every characteristic of a field with the given
/// support inside the grid up to time t.
inline double fk_required_eta_max(int n_xi, double eta_support, double t) { return n_xi * t + eta_support; }

/// Advances a field by t along characteristics.
inline PhaseSymbolField fk_exact(const PhaseSymbolField& f, double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("fk_exact: t must be >= 0");
    const PhaseGrid& g = f.grid();
    const double total = f.time() + t;
    const double need = fk_required_eta_max(g.n_xi, f.eta_support(), total);
    if (need > g.eta_max)
        throw std::out_of_range("fk_exact: characteristics leave the eta grid; required eta_max >= " + std::to_string(need));
    const double s = f.s();
    std::shared_ptr<const SymbolFn> prev = std::make_shared<const SymbolFn>(f.symbol());
    SymbolFn next = [prev, t, s](double xi, double eta) -> cplx {
        return (*prev)(xi, eta + xi * t) * std::exp(-fk_damping(xi, eta, t, s));
    };
    return PhaseSymbolField(g, s, std::move(next), f.eta_support(), total);
}

// ---------------------------------------------------------------------------
// Norms and entropy K

inline constexpr double kBoundaryLimit = 1e-10;

inline void require_boundary_small(const PhaseSymbolField& f, const char* who) {
    const double r = f.boundary_ratio();
    if (!(r < kBoundaryLimit))
        throw std::domain_error(std::string(who) + ": boundary smallness violated (edge/max = " + std::to_string(r) + ")");
}

/// Trapezoid weights along η.
template <class Fn>
double eta_trapezoid(const PhaseSymbolField& f, Fn&& weight) {
    const PhaseGrid& g = f.grid();
    std::vector<double> rows(g.modes(), 0.0);
    parallel_for(g.modes(), [&](int i) {
        const double xi = i - g.n_xi;
        double acc = 0.0;
        for (int j = 0; j < g.n_eta; ++j) {
            const double w = (j == 0 || j == g.n_eta - 1) ? 0.5 : 1.0;
            acc += w * weight(xi, g.eta(j)) * std::norm(f.values()(i, j));
        }
        rows[i] = acc * g.deta();
    });
    double total = 0.0;
    for (double r : rows) total += r;
    return total;
}

/// (Σ_ξ ∫ ⟨ξ⟩^{2α}⟨η⟩^{2β}|f̂|² dη)^{1/2}.
inline double sobolev_norm(const PhaseSymbolField& f, SobolevSpec spec) {
    require_boundary_small(f, "sobolev_norm");
    return std::sqrt(eta_trapezoid(f, [&](double xi, double eta) {
        return std::pow(1.0 + xi * xi, spec.alpha) * std::pow(1.0 + eta * eta, spec.beta);
    }));
}

/// Pieces of K: ‖f‖², ‖Λ_v^{s−1}∂_v f‖², Re⟨Λ_v^{s−1}∂_v f, Λ_x^{s−1}∂_x f⟩, ‖Λ_x^{s−1}∂_x f‖².
struct KParts {
    double norm_sq = 0, dv_sq = 0, cross = 0, dx_sq = 0;
};

inline KParts k_parts(const PhaseSymbolField& f) {
    require_boundary_small(f, "entropy_K");
    const double s = f.s();
    auto mv = [s](double eta) { return std::pow(1.0 + eta * eta, (s - 1.0) / 2.0) * eta; };
    auto mx = [s](double xi) { return std::pow(1.0 + xi * xi, (s - 1.0) / 2.0) * xi; };
    KParts p;
    p.norm_sq = eta_trapezoid(f, [](double, double) { return 1.0; });
    p.dv_sq = eta_trapezoid(f, [&](double, double eta) { return mv(eta) * mv(eta); });
    // Re[(iη m_v)(conj(iξ m_x))] = η ξ ⟨η⟩^{s−1}⟨ξ⟩^{s−1}
    p.cross = eta_trapezoid(f, [&](double xi, double eta) { return mv(eta) * mx(xi); });
    p.dx_sq = eta_trapezoid(f, [&](double xi, double) { return mx(xi) * mx(xi); });
    return p;
}

inline double entropy_K_unchecked(double t, const KParts& p, const EntropyConstants& k, double s) {
    return k.C * p.norm_sq + k.D * t * p.dv_sq + k.E * std::pow(t, 1.0 + s) * p.cross +
           std::pow(t, 1.0 + 2.0 * s) * p.dx_sq;
}

inline double entropy_K(double t, const PhaseSymbolField& f, const EntropyConstants& k) {
    if (!(t >= 0.0)) throw std::invalid_argument("entropy_K: t must be >= 0");
    const auto adm = admissible_K(k, f.s());
    if (!adm.ok()) throw std::invalid_argument("entropy_K: inadmissible constants: " + adm.first_violation());
    return entropy_K_unchecked(t, k_parts(f), k, f.s());
}

/// C‖f‖² + (D/2)t‖Λ_v^{s−1}∂_v f‖² + ½t^{1+2s}‖Λ_x^{s−1}∂_x f‖², a lower bound for K when E² ≤ D.
inline double k_lower_bound(double t, const KParts& p, const EntropyConstants& k, double s) {
    return k.C * p.norm_sq + 0.5 * k.D * t * p.dv_sq + 0.5 * std::pow(t, 1.0 + 2.0 * s) * p.dx_sq;
}

// ---------------------------------------------------------------------------
// Symbol identity behind the commutator of Λ_v^{s−1}∂_v with v∂_x

struct SymbolCheck {
    double max_residual = 0.0;    ///< max |lhs − rhs|
    double max_normalized = 0.0;  ///< max |lhs − rhs| / max(1, |ξ|)
};

/// Compares ξ·d/dη[⟨η⟩^{s−1}η] (central difference, step 1e-5) with
/// (1+sη²)⟨η⟩^{s−3}ξ over all grid pairs.
inline SymbolCheck symbol_commutator_check(double s, const std::vector<double>& xis, const std::vector<double>& etas) {
    if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("symbol_commutator_check: s must lie in (0, 1]");
    constexpr double h = 1e-5;
    auto g = [s](double eta) { return std::pow(1.0 + eta * eta, (s - 1.0) / 2.0) * eta; };
    SymbolCheck out;
    for (double eta : etas) {
        const double deriv = (g(eta + h) - g(eta - h)) / (2.0 * h);
        const double exact = (1.0 + s * eta * eta) * std::pow(1.0 + eta * eta, (s - 3.0) / 2.0);
        for (double xi : xis) {
            const double r = std::abs(deriv * xi - exact * xi);
            out.max_residual = std::max(out.max_residual, r);
            out.max_normalized = std::max(out.max_normalized, r / std::max(1.0, std::abs(xi)));
        }
    }
    return out;
}

struct KMonotonicity {
    double max_increment = 0.0;  ///< max(0, max_i K(t_{i+1}) − K(t_i))
    double K0 = 0.0;
    std::vector<double> values;
};

inline KMonotonicity k_monotonicity(const PhaseSymbolField& f0, const EntropyConstants& k, const std::vector<double>& t_grid) {
    KMonotonicity out;
    out.values.resize(t_grid.size());
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        const double t = t_grid[i];
        out.values[i] = entropy_K(t, t == 0.0 ? f0 : fk_exact(f0, t), k);
    }
    out.K0 = out.values.empty() ? 0.0 : out.values.front();
    for (std::size_t i = 1; i < out.values.size(); ++i)
        out.max_increment = std::max(out.max_increment, out.values[i] - out.values[i - 1]);
    return out;
}

// ---------------------------------------------------------------------------
// Initial symbols

/// ⟨ξ⟩^{−a} e^{−η²/2} with a = r + 1/2 + δ: only barely in H^{r,0} in x and
/// Gaussian in η. Real and even, hence the symbol of a real function.
inline SymbolFn rough_in_x_symbol(double r, double delta) {
    const double a = r + 0.5 + delta;
    return [a](double xi, double eta) -> cplx { return std::pow(1.0 + xi * xi, -a / 2.0) * std::exp(-0.5 * eta * eta); };
}

/// e^{−η²/2} at every ξ with weight e^{−ξ²/8}, a smooth test symbol.
inline SymbolFn gaussian_symbol() {
    return [](double xi, double eta) -> cplx { return std::exp(-xi * xi / 8.0 - 0.5 * eta * eta); };
}

/// Half-width in η beyond which e^{−η²/2}-type data is below 1e-14 of its peak.
inline constexpr double kGaussianEtaSupport = 8.2;

// ---------------------------------------------------------------------------
// Rate experiment on the full frequency lattice

struct FkRateOptions {
    double r = 0.0;
    double delta = 0.01;
    double t_min = 1e-3, t_max = 1e-1;
    int per_decade = 16;
    int n_exact = 256;           ///< ξ = 1..n_exact−1 summed term by term
    double zeta_half_width = 6.5;  ///< shifted-η window for the Gaussian profile
    double dzeta = 0.25;
    double panel = 0.5;          ///< log-ξ panel width for the tail integral
};

struct FkRateResult {
    RateFit fit_v;  ///< ‖f(t)‖_{r,s}
    RateFit fit_x;  ///< ‖f(t)‖_{r+s,0}
    Series norm_v, norm_x;
};

/// Both norms of the exact solution for rough_in_x_symbol data, summed over
/// ξ ∈ ℤ without a frequency cutoff. Frequencies below n_exact are summed
/// term by term; the rest of the lattice sum is replaced by its Euler–Maclaurin
/// continuum (integral plus endpoint corrections), integrated on log-ξ panels
/// until the damping has killed the integrand. In each ξ the η integral runs in
/// the shifted variable ζ = η + ξt, where the Gaussian profile sits at the origin.
inline std::pair<double, double> fk_norms_lattice(double s, double t, const FkRateOptions& o) {
    const double a2 = 2.0 * (o.r + 0.5 + o.delta);
    const int nz = static_cast<int>(std::lround(2.0 * o.zeta_half_width / o.dzeta)) + 1;
    // Returns the ξ-summand of both squared norms.
    auto summand = [&](double xi) -> std::pair<double, double> {
        double sv = 0.0, sx = 0.0;
        const double px = std::pow(1.0 + xi * xi, -a2 / 2.0);
        for (int j = 0; j < nz; ++j) {
            const double zeta = -o.zeta_half_width + j * o.dzeta;
            const double w = (j == 0 || j == nz - 1) ? 0.5 : 1.0;
            const double eta = zeta - xi * t;
            const double dens = px * std::exp(-zeta * zeta) * std::exp(-2.0 * fk_damping(xi, eta, t, s));
            sv += w * dens * std::pow(1.0 + eta * eta, s);
            sx += w * dens;
        }
        const double wxr = std::pow(1.0 + xi * xi, o.r);
        const double wxs = std::pow(1.0 + xi * xi, o.r + s);
        return {sv * wxr * o.dzeta, sx * wxs * o.dzeta};
    };
    const int N0 = o.n_exact;
    std::vector<std::pair<double, double>> exact(N0 + 2);
    parallel_for(N0 + 2, [&](int k) { exact[k] = summand(static_cast<double>(k)); });
    double v = 0.0, x = 0.0;
    for (int k = 1; k < N0; ++k) {
        v += exact[k].first;
        x += exact[k].second;
    }
    // Euler–Maclaurin endpoint terms at ξ = N0.
    v += 0.5 * exact[N0].first - (exact[N0 + 1].first - exact[N0 - 1].first) / 24.0;
    x += 0.5 * exact[N0].second - (exact[N0 + 1].second - exact[N0 - 1].second) / 24.0;
    // ∫_{N0}^∞ g(ξ) dξ with ξ = N0·e^y.
    const auto& gl = boost::math::quadrature::gauss<double, 8>::abscissa();
    const auto& gw = boost::math::quadrature::gauss<double, 8>::weights();
    std::vector<double> nodes, weights;
    for (std::size_t i = 0; i < gl.size(); ++i) {
        nodes.push_back(gl[i]);
        weights.push_back(gw[i]);
        if (gl[i] != 0.0) {
            nodes.push_back(-gl[i]);
            weights.push_back(gw[i]);
        }
    }
    double tail_v = 0.0, tail_x = 0.0;
    for (int p = 0; p < 400; ++p) {
        const double y0 = p * o.panel, half = o.panel / 2.0;
        double pv = 0.0, px = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double y = y0 + half * (1.0 + nodes[i]);
            const double xi = N0 * std::exp(y);
            const auto [gv, gx] = summand(xi);
            pv += weights[i] * half * xi * gv;
            px += weights[i] * half * xi * gx;
        }
        tail_v += pv;
        tail_x += px;
        if (pv <= 1e-17 * (v + tail_v) && px <= 1e-17 * (x + tail_x)) break;
    }
    v += tail_v;
    x += tail_x;
    // Mode ξ = 0 once, ξ ≠ 0 twice by the symmetry (ξ, η) → (−ξ, −η).
    return {std::sqrt(exact[0].first + 2.0 * v), std::sqrt(exact[0].second + 2.0 * x)};
}

inline FkRateResult fk_rate_experiment(double s, const FkRateOptions& o = {}) {
    if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("fk_rate_experiment: s must lie in (0, 1]");
    FkRateResult out;
    for (double t : log_spaced(o.t_min, o.t_max, o.per_decade)) {
        const auto [nv, nx] = fk_norms_lattice(s, t, o);
        out.norm_v.emplace_back(t, nv);
        out.norm_x.emplace_back(t, nx);
    }
    out.fit_v = fit_powerlaw(out.norm_v, o.t_min, o.t_max);
    out.fit_x = fit_powerlaw(out.norm_x, o.t_min, o.t_max);
    return out;
}

}  // namespace hypokinetic
