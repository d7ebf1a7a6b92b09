#pragma once

// Linear evolution f(t) = e^{−tP} f₀ mode by mode, a Crank–Nicolson cross-check,
// trajectory recording, rate regression and spectral gaps.

#include "entropy.hpp"
#include "expm.hpp"
#include "parallel.hpp"
#include "spectral_core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hypokinetic {

enum class ModeMethod { Diagonal, Eigen, Pade, Action };

inline const char* to_string(ModeMethod m) {
    switch (m) {
        case ModeMethod::Diagonal: return "diagonal";
        case ModeMethod::Eigen: return "eigen";
        case ModeMethod::Pade: return "pade";
        case ModeMethod::Action: return "action";
    }
    return "?";
}

/// Per-mode exponentials of one model on one grid. Only ξ ≥ 0 is factored;
/// negative modes use e^{−τP_{−ξ}} = conj(e^{−τP_ξ}), which also keeps
/// conjugate-symmetric data exactly conjugate-symmetric.
class LinearPropagator {
public:
    LinearPropagator(const GridSpec& grid, Model model, ExpMethod method = ExpMethod::Auto)
        : grid_(grid), model_(model) {
        grid.validate();
        const int n = grid.n_xi + 1;
        gens_.resize(n);
        factors_.resize(n);
        methods_.resize(n);
        parallel_for(n, [&](int xi) {
            gens_[xi] = assemble_mode(model, xi, grid.n_v);
            methods_[xi] = choose(xi, method);
        });
    }

    const GridSpec& grid() const { return grid_; }
    Model model() const { return model_; }
    const ModeGenerator& generator(int xi) const { return gens_.at(std::abs(xi)); }
    ModeMethod method(int xi) const { return methods_.at(std::abs(xi)); }
    double condition(int xi) const { return factors_.at(std::abs(xi)).cond; }

    /// Dense e^{−τP_ξ}.
    CMatrix matrix(int xi, double tau) const {
        CMatrix M = matrix_nonneg(std::abs(xi), tau);
        return xi < 0 ? CMatrix(M.conjugate()) : M;
    }

    /// e^{−τP_ξ} u.
    CVector apply(int xi, double tau, const CVector& u) const {
        if (xi < 0) return apply_nonneg(-xi, tau, u.conjugate()).conjugate();
        return apply_nonneg(xi, tau, u);
    }

    SpectralField apply(const SpectralField& f, double tau) const {
        check_grid(f);
        SpectralField out(grid_);
        parallel_for(grid_.modes(), [&](int i) {
            const int xi = i - grid_.n_xi;
            out.set_mode(xi, apply(xi, tau, f.mode(xi)));
        });
        return out;
    }

    void check_grid(const SpectralField& f) const {
        if (!(f.grid() == grid_)) throw std::invalid_argument("LinearPropagator: field grid mismatch");
    }

private:
    ModeMethod choose(int xi, ExpMethod req) {
        if (xi == 0) return ModeMethod::Diagonal;
        const int d = grid_.dim();
        switch (req) {
            case ExpMethod::Action: return ModeMethod::Action;
            case ExpMethod::Pade: return ModeMethod::Pade;
            case ExpMethod::Eigen:
                factors_[xi] = eigen_factor(gens_[xi].generator);
                return ModeMethod::Eigen;
            case ExpMethod::Auto:
            case ExpMethod::AutoVector:
                if (d > kDenseDimLimit) return ModeMethod::Action;
                factors_[xi] = eigen_factor(gens_[xi].generator);
                if (factors_[xi].cond < kEigenConditionLimit) return ModeMethod::Eigen;
                return req == ExpMethod::Auto ? ModeMethod::Pade : ModeMethod::Action;
        }
        return ModeMethod::Pade;
    }

    CMatrix matrix_nonneg(int xi, double tau) const {
        const ModeGenerator& G = gens_[xi];
        const int d = G.dim();
        switch (methods_[xi]) {
            case ModeMethod::Diagonal: {
                CMatrix M = CMatrix::Zero(d, d);
                for (int n = 0; n < d; ++n) M(n, n) = std::exp(-tau * G.generator(n, n));
                return M;
            }
            case ModeMethod::Eigen: {
                const EigenFactor& ef = factors_[xi];
                return ef.V * (-tau * ef.lambda).array().exp().matrix().asDiagonal() * ef.Vinv;
            }
            case ModeMethod::Pade: return expm_pade(-tau * G.generator);
            case ModeMethod::Action: {
                CMatrix M(d, d);
                for (int n = 0; n < d; ++n) M.col(n) = expmv_taylor(G.tri, tau, CVector::Unit(d, n));
                return M;
            }
        }
        return {};
    }

    CVector apply_nonneg(int xi, double tau, const CVector& u) const {
        const ModeGenerator& G = gens_[xi];
        switch (methods_[xi]) {
            case ModeMethod::Diagonal: {
                CVector y(u.size());
                for (int n = 0; n < u.size(); ++n) y(n) = std::exp(-tau * G.generator(n, n)) * u(n);
                return y;
            }
            case ModeMethod::Eigen: {
                const EigenFactor& ef = factors_[xi];
                return ef.V * ((-tau * ef.lambda).array().exp() * (ef.Vinv * u).array()).matrix();
            }
            case ModeMethod::Pade: return expm_pade(-tau * G.generator) * u;
            case ModeMethod::Action: return expmv_taylor(G.tri, tau, u);
        }
        return u;
    }

    GridSpec grid_;
    Model model_;
    std::vector<ModeGenerator> gens_;
    std::vector<EigenFactor> factors_;
    std::vector<ModeMethod> methods_;
};

/// A fixed time step τ with the dense per-mode exponentials cached when the
/// mode method produces them cheaply. The propagator must outlive the step.
class StepOperator {
public:
    StepOperator(const LinearPropagator& prop, double tau) : prop_(&prop), tau_(tau) {
        const GridSpec& g = prop.grid();
        mats_.resize(g.n_xi + 1);
        parallel_for(g.n_xi + 1, [&](int xi) {
            if (prop.method(xi) != ModeMethod::Action) mats_[xi] = prop.matrix(xi, tau);
        });
    }

    double tau() const { return tau_; }

    CVector apply(int xi, const CVector& u) const {
        const auto& M = mats_[std::abs(xi)];
        if (!M) return prop_->apply(xi, tau_, u);
        return xi < 0 ? CVector(M->conjugate() * u) : CVector(*M * u);
    }

    SpectralField apply(const SpectralField& f) const {
        prop_->check_grid(f);
        SpectralField out(f.grid());
        parallel_for(f.grid().modes(), [&](int i) {
            const int xi = i - f.n_xi();
            out.set_mode(xi, apply(xi, f.mode(xi)));
        });
        return out;
    }

private:
    const LinearPropagator* prop_;
    double tau_;
    std::vector<std::optional<CMatrix>> mats_;
};

inline SpectralField evolve_linear(const SpectralField& f0, Model model, double t, ExpMethod method = ExpMethod::Auto) {
    if (!(t >= 0.0)) throw std::invalid_argument("evolve_linear: t must be >= 0");
    if (t == 0.0) return f0;
    return LinearPropagator(f0.grid(), model, method).apply(f0, t);
}

/// Crank–Nicolson: n_steps of (I + dt/2·P)⁻¹(I − dt/2·P) per mode.
inline SpectralField evolve_implicit(const SpectralField& f0, Model model, double dt, int n_steps) {
    if (!(dt > 0.0)) throw std::invalid_argument("evolve_implicit: dt must be positive");
    if (n_steps < 0) throw std::invalid_argument("evolve_implicit: n_steps must be >= 0");
    const GridSpec& g = f0.grid();
    SpectralField out(g);
    parallel_for(g.modes(), [&](int i) {
        const int xi = i - g.n_xi;
        const CMatrix P = assemble_mode(model, xi, g.n_v).generator;
        const CMatrix Id = CMatrix::Identity(P.rows(), P.cols());
        Eigen::PartialPivLU<CMatrix> lu(Id + (dt / 2.0) * P);
        // Re⟨Pu,u⟩ ≥ 0 makes I + (dt/2)P invertible; a vanishing pivot means a broken generator.
        if (!(std::abs(lu.determinant()) > 0.0)) throw std::logic_error("evolve_implicit: singular resolvent");
        const CMatrix M = lu.solve(Id - (dt / 2.0) * P);
        CVector u = f0.mode(xi);
        for (int k = 0; k < n_steps; ++k) u = M * u;
        out.set_mode(xi, u);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Trajectories

struct Trajectory {
    std::vector<double> times;
    std::vector<SpectralField> states;
    std::vector<EntropyReport> reports;

    double max_tail_fraction() const {
        double m = 0.0;
        for (const auto& s : states) m = std::max(m, tail_fraction(s));
        return m;
    }
};

/// States at t = k·dt, k = 0..n_steps, by repeated application of one cached step.
inline Trajectory record_uniform(const LinearPropagator& prop, const SpectralField& f0, double dt, int n_steps) {
    if (!(dt > 0.0)) throw std::invalid_argument("record_uniform: dt must be positive");
    const StepOperator step(prop, dt);
    Trajectory tr;
    tr.times.reserve(n_steps + 1);
    tr.states.reserve(n_steps + 1);
    tr.times.push_back(0.0);
    tr.states.push_back(f0);
    for (int k = 1; k <= n_steps; ++k) {
        tr.times.push_back(k * dt);
        tr.states.push_back(step.apply(tr.states.back()));
    }
    return tr;
}

/// States at the given increasing times (all > 0) by successive increments.
inline Trajectory record_times(const LinearPropagator& prop, const SpectralField& f0, const std::vector<double>& times) {
    Trajectory tr;
    SpectralField cur = f0;
    double t = 0.0;
    for (double tk : times) {
        if (!(tk > t) && !(tr.times.empty() && tk == 0.0))
            throw std::invalid_argument("record_times: times must be strictly increasing and nonnegative");
        if (tk > t) cur = prop.apply(cur, tk - t);
        t = tk;
        tr.times.push_back(tk);
        tr.states.push_back(cur);
    }
    return tr;
}

inline void attach_reports(Trajectory& tr, const EntropyConstants& kE, double eps, const EntropyConstants& kG) {
    tr.reports.resize(tr.states.size());
    parallel_for(static_cast<int>(tr.states.size()),
                 [&](int i) { tr.reports[i] = make_report(tr.times[i], tr.states[i], kE, eps, kG); });
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& tr) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << kReportHeader << '\n';
    for (const auto& r : tr.reports) write_report_row(os, r);
}

/// Geometric samples from t_min to t_max inclusive, per_decade points per factor 10.
inline std::vector<double> log_spaced(double t_min, double t_max, int per_decade) {
    if (!(t_min > 0.0 && t_max > t_min) || per_decade < 1) throw std::invalid_argument("log_spaced: bad range");
    const double decades = std::log10(t_max / t_min);
    const int n = std::max(2, static_cast<int>(std::lround(decades * per_decade)) + 1);
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = t_min * std::pow(10.0, decades * i / (n - 1));
    out.back() = t_max;
    return out;
}

// ---------------------------------------------------------------------------
// Rate fits

struct RateFit {
    double exponent = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double t_min = 0.0, t_max = 0.0;
    int samples = 0;

    static constexpr double kConclusiveR2 = 0.99;
    bool conclusive() const { return r_squared >= kConclusiveR2; }

    std::string to_keyvalue(const std::string& prefix = "") const {
        std::ostringstream os;
        os << std::setprecision(12);
        os << prefix << "exponent=" << exponent << '\n'
           << prefix << "intercept=" << intercept << '\n'
           << prefix << "r_squared=" << r_squared << '\n'
           << prefix << "t_min=" << t_min << '\n'
           << prefix << "t_max=" << t_max << '\n';
        return os.str();
    }
};

using Series = std::vector<std::pair<double, double>>;

namespace detail {
inline RateFit linear_fit(const std::vector<double>& X, const std::vector<double>& Y) {
    const double n = static_cast<double>(X.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        mx += X[i];
        my += Y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        sxx += (X[i] - mx) * (X[i] - mx);
        sxy += (X[i] - mx) * (Y[i] - my);
        syy += (Y[i] - my) * (Y[i] - my);
    }
    RateFit f;
    const double slope = sxy / sxx;
    f.exponent = slope;
    f.intercept = my - slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        const double e = Y[i] - (f.intercept + slope * X[i]);
        sse += e * e;
    }
    f.r_squared = syy > 0 ? std::max(0.0, 1.0 - sse / syy) : 1.0;
    f.samples = static_cast<int>(X.size());
    return f;
}

inline void window_points(const Series& s, double t_min, double t_max, bool log_t, std::vector<double>& X,
                          std::vector<double>& Y, const char* who) {
    for (const auto& [t, v] : s) {
        if (t < t_min || t > t_max) continue;
        if (!(v > 0.0)) throw std::invalid_argument(std::string(who) + ": nonpositive value in window");
        if (log_t && !(t > 0.0)) throw std::invalid_argument(std::string(who) + ": nonpositive time");
        X.push_back(log_t ? std::log(t) : t);
        Y.push_back(std::log(v));
    }
    if (X.size() < 5) throw std::invalid_argument(std::string(who) + ": fewer than 5 samples in window");
}
}  // namespace detail

/// Least squares on (t, ln v); exponent = −slope.
inline RateFit fit_exponential(const Series& s, double t_min, double t_max) {
    std::vector<double> X, Y;
    detail::window_points(s, t_min, t_max, false, X, Y, "fit_exponential");
    RateFit f = detail::linear_fit(X, Y);
    f.exponent = -f.exponent;
    f.t_min = t_min;
    f.t_max = t_max;
    return f;
}

/// Least squares on (ln t, ln v); exponent = slope.
inline RateFit fit_powerlaw(const Series& s, double t_min, double t_max) {
    std::vector<double> X, Y;
    detail::window_points(s, t_min, t_max, true, X, Y, "fit_powerlaw");
    RateFit f = detail::linear_fit(X, Y);
    f.t_min = t_min;
    f.t_max = t_max;
    return f;
}

// ---------------------------------------------------------------------------
// Spectrum

struct SpectralGap {
    double gap = 0.0;
    int argmin_xi = 0;
    std::vector<std::vector<cplx>> per_xi;  ///< indexed by ξ + n_xi, sorted by real part
};

inline std::vector<cplx> mode_eigenvalues(const ModeGenerator& G) {
    std::vector<cplx> ev;
    if (G.is_diagonal()) {
        for (int n = 0; n < G.dim(); ++n) ev.push_back(G.generator(n, n));
    } else {
        Eigen::ComplexEigenSolver<CMatrix> es(G.generator, false);
        if (es.info() != Eigen::Success) throw std::runtime_error("spectral_gap: eigensolver failed at xi=" + std::to_string(G.xi));
        for (int n = 0; n < G.dim(); ++n) ev.push_back(es.eigenvalues()(n));
    }
    std::stable_sort(ev.begin(), ev.end(), [](cplx a, cplx b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return ev;
}

/// All eigenvalues of every P_ξ and the smallest real part, excluding the
/// single zero eigenvalue of the ξ = 0 mode (the conserved mass).
inline SpectralGap spectral_gap(const GridSpec& grid, Model model) {
    grid.validate();
    SpectralGap out;
    out.per_xi.resize(grid.modes());
    std::vector<std::vector<cplx>> pos(grid.n_xi + 1);
    parallel_for(grid.n_xi + 1, [&](int xi) { pos[xi] = mode_eigenvalues(assemble_mode(model, xi, grid.n_v)); });
    out.gap = std::numeric_limits<double>::infinity();
    for (int xi = -grid.n_xi; xi <= grid.n_xi; ++xi) {
        std::vector<cplx> ev = pos[std::abs(xi)];
        if (xi < 0) {
            for (auto& z : ev) z = std::conj(z);
            std::stable_sort(ev.begin(), ev.end(), [](cplx a, cplx b) {
                return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
            });
        }
        for (std::size_t k = (xi == 0 ? 1 : 0); k < ev.size(); ++k)
            if (ev[k].real() < out.gap) {
                out.gap = ev[k].real();
                out.argmin_xi = xi;
            }
        out.per_xi[xi + grid.n_xi] = std::move(ev);
    }
    return out;
}

}  // namespace hypokinetic
