#pragma once

// Mollified Vlasov–Poisson–Fokker–Planck in perturbative form
//     ∂_t f + P f = E(f) · (−∂_v + v) f,   E(f) = ±K ∗ r,   r = ∫ f dν,
// with two independent solvers: Strang splitting, and Picard iteration on the
// Duhamel formula f(t) = e^{−tP} f₀ + ∫₀ᵗ e^{−(t−s)P} (−∂_v+v)[E(s) f(s)] ds.

#include "evolve.hpp"
#include "parallel.hpp"
#include "spectral_core.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypokinetic {

struct Mollifier {
    int n_xi = 0;
    std::vector<cplx> khat;  ///< indexed by ξ + n_xi
    int sign = -1;
    double linf_bound = 0.0;  ///< Σ_ξ |khat(ξ)|

    cplx operator()(int xi) const { return khat.at(xi + n_xi); }
};

inline Mollifier make_mollifier(int n_xi, const std::function<cplx(int)>& k, int sign = -1) {
    if (sign != 1 && sign != -1) throw std::invalid_argument("mollifier sign must be +1 or -1");
    Mollifier m;
    m.n_xi = n_xi;
    m.sign = sign;
    for (int xi = -n_xi; xi <= n_xi; ++xi) {
        m.khat.push_back(k(xi));
        m.linf_bound += std::abs(m.khat.back());
    }
    return m;
}

/// khat(ξ) = e^{−ξ²}.
inline Mollifier gaussian_mollifier(int n_xi, int sign = -1) {
    return make_mollifier(n_xi, [](int xi) { return cplx(std::exp(-double(xi) * xi), 0.0); }, sign);
}

inline Mollifier zero_mollifier(int n_xi) {
    return make_mollifier(n_xi, [](int) { return cplx{}; }, -1);
}

struct FieldSample {
    CVector coeffs;           ///< Ê(ξ), indexed by ξ + n_xi
    double linf_bound = 0.0;  ///< Σ |Ê(ξ)| ≥ sup_x |E(x)|
    double grid_max = 0.0;    ///< max |E| over 4n_xi+8 uniform points
};

inline double field_grid_max(const CVector& E, int n_xi) {
    const int nx = 4 * n_xi + 8;
    double best = 0.0;
    for (int j = 0; j < nx; ++j) {
        const double x = GridSpec::torus_period * j / nx;
        cplx acc{};
        for (int xi = -n_xi; xi <= n_xi; ++xi) acc += E(xi + n_xi) * std::exp(I * (xi * x));
        best = std::max(best, std::abs(acc));
    }
    return best;
}

inline void check_mollifier(const SpectralField& f, const Mollifier& m) {
    if (m.n_xi != f.n_xi()) throw std::invalid_argument("mollifier and field have different n_xi");
}

/// Ê(ξ) = sign · khat(ξ) · f̂[ξ][0].
inline FieldSample field_from_density(const SpectralField& f, const Mollifier& moll) {
    check_mollifier(f, moll);
    FieldSample E;
    E.coeffs.resize(f.grid().modes());
    for (int xi = -f.n_xi(); xi <= f.n_xi(); ++xi) {
        E.coeffs(xi + f.n_xi()) = static_cast<double>(moll.sign) * moll(xi) * f(xi, 0);
        E.linf_bound += std::abs(E.coeffs(xi + f.n_xi()));
    }
    E.grid_max = field_grid_max(E.coeffs, f.n_xi());
    return E;
}

/// (E·g)^(ξ) = Σ_{ξ'} Ê(ξ−ξ') ĝ(ξ'), keeping |ξ| ≤ n_xi.
inline SpectralField multiply_field(const CVector& E, const SpectralField& g) {
    const int nx = g.n_xi();
    SpectralField out(g.grid());
    for (int xi = -nx; xi <= nx; ++xi) {
        const int lo = std::max(-nx, xi - nx), hi = std::min(nx, xi + nx);
        for (int xp = lo; xp <= hi; ++xp) {
            const cplx e = E(xi - xp + nx);
            if (e == cplx{}) continue;
            out.coeffs().row(xi + nx) += e * g.coeffs().row(xp + nx);
        }
    }
    return out;
}

/// Raising operator −∂_v + v applied in every mode.
inline SpectralField raise(const SpectralField& g) {
    SpectralField out(g.grid());
    for (int xi = -g.n_xi(); xi <= g.n_xi(); ++xi)
        for (int n = 1; n <= g.n_v(); ++n) out(xi, n) = std::sqrt(static_cast<double>(n)) * g(xi, n - 1);
    return out;
}

/// E(f)·(−∂_v+v) f.
inline SpectralField nonlinearity(const SpectralField& f, const Mollifier& moll) {
    return multiply_field(field_from_density(f, moll).coeffs, raise(f));
}

/// e^{−τP}(−∂_v+v) g. The raised field has no H₀ content, and the ξ = 0 mode
/// is exponentiated entrywise, so the global mean of the result is exactly 0.
inline SpectralField duhamel_kernel(const SpectralField& g, double tau, const LinearPropagator& prop) {
    if (!(tau > 0.0)) throw std::invalid_argument("duhamel_kernel: tau must be positive");
    return prop.apply(raise(g), tau);
}

inline SpectralField duhamel_kernel(const SpectralField& g, double tau) {
    return duhamel_kernel(g, tau, LinearPropagator(g.grid(), Model::FP));
}

// ---------------------------------------------------------------------------
// Strang splitting

/// One Strang step: half linear step, explicit midpoint on f' = N(f), half linear step.
class StrangStepper {
public:
    StrangStepper(const LinearPropagator& prop, const Mollifier& moll, double dt) : half_(prop, dt / 2.0), moll_(&moll), dt_(dt) {
        if (!(dt > 0.0)) throw std::invalid_argument("mvpfp_step: dt must be positive");
    }

    SpectralField step(const SpectralField& f) const {
        SpectralField a = half_.apply(f);
        SpectralField mid = a + cplx(dt_ / 2.0) * nonlinearity(a, *moll_);
        SpectralField b = a + cplx(dt_) * nonlinearity(mid, *moll_);
        return half_.apply(b);
    }

private:
    StepOperator half_;
    const Mollifier* moll_;
    double dt_;
};

inline SpectralField mvpfp_step(const SpectralField& f, const Mollifier& moll, double dt) {
    const LinearPropagator prop(f.grid(), Model::FP);
    return StrangStepper(prop, moll, dt).step(f);
}

/// Strang trajectory landing exactly on `times` (times[0] = 0), with `substeps`
/// equal steps inside every interval.
inline std::vector<SpectralField> strang_solve(const SpectralField& f0, const Mollifier& moll, const LinearPropagator& prop,
                                               const std::vector<double>& times, int substeps) {
    if (times.empty() || times.front() != 0.0) throw std::invalid_argument("strang_solve: times must start at 0");
    if (substeps < 1) throw std::invalid_argument("strang_solve: substeps must be >= 1");
    std::vector<SpectralField> out{f0};
    SpectralField cur = f0;
    for (std::size_t j = 1; j < times.size(); ++j) {
        const StrangStepper st(prop, moll, (times[j] - times[j - 1]) / substeps);
        for (int k = 0; k < substeps; ++k) cur = st.step(cur);
        out.push_back(cur);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Measured constants of the fixed-point argument

/// Chebyshev–Lobatto points on [0, horizon], clustered at both ends.
inline std::vector<double> chebyshev_times(double horizon, int n) {
    if (n < 2 || !(horizon > 0)) throw std::invalid_argument("chebyshev_times: need n >= 2 and horizon > 0");
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = 0.5 * horizon * (1.0 - std::cos(std::numbers::pi * i / (n - 1)));
    t.front() = 0.0;
    t.back() = horizon;
    return t;
}

struct KernelConstants {
    double kappa = 0.0;     ///< linear decay rate (spectral gap)
    double C_kernel = 0.0;  ///< sup_τ ‖e^{−τP}(−∂_v+v)‖ / ((τ^{−1/2}+1)e^{−κτ})
    double c_lin = 0.0;     ///< sup_t e^{κt}‖e^{−tP}‖ on mean-zero data
    double L = 0.0;         ///< mollifier L∞ bound
    double sigma = 0.5;
    double I_max = 0.0;     ///< ∫₀^∞ (τ^{−1/2}+1) e^{−σκτ} dτ
    double C_sq = 0.0;      ///< constant of ‖Φ(z)‖_Z ≤ C²(‖f₀‖ + ‖z‖_Z)²
    double eps0 = 0.0;      ///< radius with 4C²ε₀² ≤ ε₀
    std::vector<double> taus, kernel_norms, semigroup_norms;

    double envelope(double tau) const { return C_kernel * (1.0 / std::sqrt(tau) + 1.0) * std::exp(-kappa * tau); }
};

/// Spectral norm, via the largest eigenvalue of MᴴM.
inline double operator_norm(const CMatrix& M) {
    const CMatrix G = M.adjoint() * M;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(G, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

/// Operator norms of e^{−τP_ξ}(−∂_v+v) and e^{−τP_ξ} (mean-zero part), maximized over ξ.
inline std::pair<double, double> mode_operator_norms(const LinearPropagator& prop, double tau) {
    const GridSpec& g = prop.grid();
    const RMatrix Adag = hermite_ladder(g.n_v).Adag;
    std::vector<double> kn(g.n_xi + 1), sn(g.n_xi + 1);
    parallel_for(g.n_xi + 1, [&](int xi) {
        CMatrix M = prop.matrix(xi, tau);
        kn[xi] = operator_norm(M * Adag.cast<cplx>());
        if (xi == 0) {
            // drop the conserved H₀ direction
            sn[xi] = operator_norm(M.bottomRightCorner(g.n_v, g.n_v));
        } else {
            sn[xi] = operator_norm(M);
        }
    });
    return {*std::max_element(kn.begin(), kn.end()), *std::max_element(sn.begin(), sn.end())};
}

/// Measures C, κ of the kernel bound and the linear decay constant on a
/// log-spaced τ sweep, then ε₀ = 1/(4C²) with
///   C² = C_kernel · I_max · max(L·c_lin, 1) · max(c_lin, 1) · max(1, L).
/// Dense exponentials come from a separate Padé-backed propagator, since the
/// sweep needs whole matrices rather than actions.
inline KernelConstants measure_kernel_constants(const LinearPropagator& vector_prop, const Mollifier& moll, double tau_min = 1e-2,
                                                double tau_max = 10.0, int n_tau = 121) {
    const LinearPropagator prop(vector_prop.grid(), vector_prop.model(), ExpMethod::Auto);
    KernelConstants k;
    k.kappa = spectral_gap(prop.grid(), prop.model()).gap;
    k.L = moll.linf_bound;
    k.taus = log_spaced(tau_min, tau_max, std::max(1, static_cast<int>(std::lround((n_tau - 1) / std::log10(tau_max / tau_min)))));
    k.c_lin = 1.0;  // τ = 0
    for (double tau : k.taus) {
        const auto [kn, sn] = mode_operator_norms(prop, tau);
        k.kernel_norms.push_back(kn);
        k.semigroup_norms.push_back(sn);
        k.C_kernel = std::max(k.C_kernel, kn / ((1.0 / std::sqrt(tau) + 1.0) * std::exp(-k.kappa * tau)));
        k.c_lin = std::max(k.c_lin, sn * std::exp(k.kappa * tau));
    }
    const double sk = k.sigma * k.kappa;
    k.I_max = std::sqrt(std::numbers::pi) / std::sqrt(sk) + 1.0 / sk;
    k.C_sq = k.C_kernel * k.I_max * std::max(k.L * k.c_lin, 1.0) * std::max(k.c_lin, 1.0) * std::max(1.0, k.L);
    k.eps0 = 1.0 / (4.0 * k.C_sq);
    return k;
}

// ---------------------------------------------------------------------------
// Picard iteration

struct PicardOptions {
    double horizon = 10.0;
    int n_samples = 64;
    int max_iter = 50;
    double tol = 1e-14;      ///< absolute Z-distance between successive iterates
    int gl_nodes = 8;        ///< Gauss–Legendre nodes per interval in u = √(t−s)
    int interp_points = 6;   ///< local Lagrange stencil for the integrand in s
    double kappa = 1.0;      ///< decay rate in the weights e^{σκt}
    double sigma = 0.5;
    double eps0 = std::numeric_limits<double>::infinity();  ///< smallness radius, checked if finite
};

enum class PicardStatus { Converged, RatioViolation, NotConverged };

struct PicardResult {
    std::vector<double> times;
    std::vector<SpectralField> f_series;   ///< f = f_lin + g
    std::vector<SpectralField> g_series;
    std::vector<FieldSample> E_series;     ///< field of f
    std::vector<double> z_distances;       ///< ‖Φⁱ − Φⁱ⁻¹‖_Z, i ≥ 1
    std::vector<double> contraction_ratios;
    double norm_X = 0.0, norm_Y = 0.0, norm_Z = 0.0;
    int iterations = 0;
    PicardStatus status = PicardStatus::NotConverged;
    std::string message;
};

namespace detail {
struct PicardIterate {
    std::vector<SpectralField> g;
    std::vector<CVector> G;
};

inline double weighted_sup_field(const std::vector<SpectralField>& g, const std::vector<double>& t, double w) {
    double m = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) m = std::max(m, std::exp(w * t[i]) * g[i].norm());
    return m;
}

inline double weighted_sup_E(const std::vector<CVector>& G, const std::vector<double>& t, double w) {
    double m = 0.0;
    for (std::size_t i = 0; i < G.size(); ++i) m = std::max(m, std::exp(w * t[i]) * G[i].cwiseAbs().sum());
    return m;
}
}  // namespace detail

/// Solves the Duhamel formula by Picard iteration on (g, G), the remainder
/// f − e^{−tP}f₀ and its mollified field. On each sample interval
///   Φ₁(t_j) = e^{−Δ_j P} Φ₁(t_{j−1}) + ∫₀^{√Δ_j} e^{−u²P}(−∂_v+v) q(t_j − u²) 2u du,
/// q = E·f. The linear part of f is propagated exactly to each quadrature node;
/// the remainder (g, G) is interpolated by local Lagrange polynomials.
inline PicardResult picard_solve(const SpectralField& f0, const Mollifier& moll, const LinearPropagator& prop,
                                 const PicardOptions& opt = {}) {
    check_mollifier(f0, moll);
    prop.check_grid(f0);
    if (prop.model() != Model::FP) throw std::invalid_argument("picard_solve: the nonlinear system uses the FP generator");
    if (std::abs(f0.mean()) != 0.0) throw std::invalid_argument("picard_solve: initial data must have zero mean");
    if (f0.norm() > opt.eps0)
        throw std::invalid_argument("picard_solve: ||f0|| = " + std::to_string(f0.norm()) + " exceeds eps0 = " + std::to_string(opt.eps0));
    if (opt.interp_points < 2 || opt.interp_points > opt.n_samples) throw std::invalid_argument("picard_solve: bad interpolation stencil");

    PicardResult R;
    R.times = chebyshev_times(opt.horizon, opt.n_samples);
    const auto& t = R.times;
    const int N = opt.n_samples;
    const double w = opt.sigma * opt.kappa;

    // Step propagators and the linear part.
    std::vector<SpectralField> f_lin{f0};
    for (int j = 1; j < N; ++j) f_lin.push_back(prop.apply(f_lin.back(), t[j] - t[j - 1]));

    std::vector<double> gx, gw;
    {
        std::vector<double> xs(opt.gl_nodes), ws(opt.gl_nodes);
        // Golub–Welsch for Legendre on [−1, 1].
        RMatrix J = RMatrix::Zero(opt.gl_nodes, opt.gl_nodes);
        for (int k = 1; k < opt.gl_nodes; ++k) J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
        Eigen::SelfAdjointEigenSolver<RMatrix> es(J);
        for (int k = 0; k < opt.gl_nodes; ++k) {
            gx.push_back(es.eigenvalues()(k));
            gw.push_back(2.0 * es.eigenvectors()(0, k) * es.eigenvectors()(0, k));
        }
    }

    // Lagrange weights for each (interval, node).
    struct NodeStencil {
        double u, weight;  // u and the GL weight times the Jacobian 2u·(√Δ/2)
        int start;
        std::vector<double> lag;
    };
    std::vector<std::vector<NodeStencil>> stencils(N);
    const int m = opt.interp_points;
    for (int j = 1; j < N; ++j) {
        const double h = std::sqrt(t[j] - t[j - 1]);
        const int start = std::clamp(j - m / 2, 0, N - m);
        for (std::size_t k = 0; k < gx.size(); ++k) {
            NodeStencil ns;
            ns.u = 0.5 * h * (gx[k] + 1.0);
            ns.weight = gw[k] * 0.5 * h * 2.0 * ns.u;
            ns.start = start;
            const double s = t[j] - ns.u * ns.u;
            for (int a = 0; a < m; ++a) {
                double L = 1.0;
                for (int b = 0; b < m; ++b)
                    if (b != a) L *= (s - t[start + b]) / (t[start + a] - t[start + b]);
                ns.lag.push_back(L);
            }
            stencils[j].push_back(std::move(ns));
        }
    }

    const GridSpec& grid = f0.grid();
    // The linear part is known exactly, so it is propagated to every node
    // rather than interpolated; only the small remainder (g, G) is.
    std::vector<std::vector<SpectralField>> flin_node(N);
    std::vector<std::vector<CVector>> Elin_node(N);
    parallel_for(N - 1, [&](int jm1) {
        const int j = jm1 + 1;
        for (const auto& ns : stencils[j]) {
            const double lag_t = t[j] - t[j - 1] - ns.u * ns.u;
            flin_node[j].push_back(lag_t > 0 ? prop.apply(f_lin[j - 1], lag_t) : f_lin[j - 1]);
            Elin_node[j].push_back(field_from_density(flin_node[j].back(), moll).coeffs);
        }
    });

    detail::PicardIterate cur{std::vector<SpectralField>(N, SpectralField(grid)), std::vector<CVector>(N, CVector::Zero(grid.modes()))};

    auto apply_map = [&](const detail::PicardIterate& z) {
        detail::PicardIterate out{std::vector<SpectralField>(N, SpectralField(grid)), std::vector<CVector>(N)};
        // Interval integrals are independent; the recursion afterwards is sequential.
        std::vector<SpectralField> integral(N, SpectralField(grid));
        parallel_for(N - 1, [&](int jm1) {
            const int j = jm1 + 1;
            SpectralField acc(grid);
            for (std::size_t k = 0; k < stencils[j].size(); ++k) {
                const auto& ns = stencils[j][k];
                SpectralField f = flin_node[j][k];
                CVector E = Elin_node[j][k];
                for (int a = 0; a < m; ++a) {
                    f += cplx(ns.lag[a]) * z.g[ns.start + a];
                    E += ns.lag[a] * z.G[ns.start + a];
                }
                const SpectralField q = multiply_field(E, raise(f));
                acc += cplx(ns.weight) * (ns.u > 0 ? prop.apply(q, ns.u * ns.u) : q);
            }
            integral[j] = acc;
        });
        for (int j = 1; j < N; ++j) out.g[j] = prop.apply(out.g[j - 1], t[j] - t[j - 1]) + integral[j];
        for (int i = 0; i < N; ++i) out.G[i] = field_from_density(out.g[i], moll).coeffs;
        return out;
    };

    auto z_distance = [&](const detail::PicardIterate& a, const detail::PicardIterate& b) {
        std::vector<SpectralField> dg(N, SpectralField(grid));
        std::vector<CVector> dG(N);
        for (int i = 0; i < N; ++i) {
            dg[i] = a.g[i] - b.g[i];
            dG[i] = a.G[i] - b.G[i];
        }
        return std::max(detail::weighted_sup_field(dg, t, w), detail::weighted_sup_E(dG, t, w));
    };

    for (int it = 1; it <= opt.max_iter; ++it) {
        detail::PicardIterate next = apply_map(cur);
        const double d = z_distance(next, cur);
        R.z_distances.push_back(d);
        if (R.z_distances.size() >= 2) R.contraction_ratios.push_back(d / R.z_distances[R.z_distances.size() - 2]);
        cur = std::move(next);
        R.iterations = it;
        if (!R.contraction_ratios.empty() && R.contraction_ratios.back() >= 1.0 && d >= opt.tol) {
            R.status = PicardStatus::RatioViolation;
            std::ostringstream os;
            os << "contraction ratio " << R.contraction_ratios.back() << " >= 1; measured eps0 = " << opt.eps0
               << ", ||f0|| = " << f0.norm();
            R.message = os.str();
            break;
        }
        if (d < opt.tol) {
            R.status = PicardStatus::Converged;
            break;
        }
    }
    if (R.status == PicardStatus::NotConverged) R.message = "no convergence within max_iter";

    R.g_series = cur.g;
    for (int i = 0; i < N; ++i) {
        R.f_series.push_back(f_lin[i] + cur.g[i]);
        R.E_series.push_back(field_from_density(R.f_series.back(), moll));
    }
    R.norm_X = detail::weighted_sup_field(cur.g, t, w);
    R.norm_Y = detail::weighted_sup_E(cur.G, t, w);
    R.norm_Z = std::max(R.norm_X, R.norm_Y);
    return R;
}

inline void write_picard_log(std::ostream& os, const PicardResult& R) {
    os << std::setprecision(12);
    os << "iterations " << R.iterations << '\n';
    os << "status " << (R.status == PicardStatus::Converged ? "converged" : R.status == PicardStatus::RatioViolation ? "ratio_violation" : "not_converged")
       << '\n';
    if (!R.message.empty()) os << "message " << R.message << '\n';
    for (std::size_t i = 0; i < R.z_distances.size(); ++i) {
        os << "iter " << i + 1 << " z_distance " << R.z_distances[i];
        if (i >= 1) os << " ratio " << R.contraction_ratios[i - 1];
        os << '\n';
    }
    os << "norm_X " << R.norm_X << "\nnorm_Y " << R.norm_Y << "\nnorm_Z " << R.norm_Z << '\n';
}

inline void write_mvpfp_csv(std::ostream& os, const std::vector<double>& t, const std::vector<SpectralField>& f,
                            const std::vector<FieldSample>& E) {
    os << "t,f_norm,E_linf_bound,E_grid_max\n" << std::setprecision(17);
    for (std::size_t i = 0; i < t.size(); ++i) os << t[i] << ',' << f[i].norm() << ',' << E[i].linf_bound << ',' << E[i].grid_max << '\n';
}

// ---------------------------------------------------------------------------
// Decay

struct DecayReport {
    RateFit fit_f, fit_E;
    double C0 = 0.0;
    bool degenerate = false;  ///< all-zero series, trivially decayed
    bool conclusive = false;
};

/// Exponential fits of ‖f(t)‖ and the field bound over [t_min, t_max], and
/// C₀ = max_t e^{κ₀t}‖f(t)‖ with κ₀ the fitted rate of ‖f‖.
inline DecayReport decay_report(const std::vector<double>& times, const std::vector<SpectralField>& f_series,
                                const std::vector<FieldSample>& E_series, double t_min, double t_max) {
    DecayReport D;
    Series sf, sE;
    double top = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        sf.emplace_back(times[i], f_series[i].norm());
        sE.emplace_back(times[i], E_series[i].linf_bound);
        top = std::max({top, f_series[i].norm(), E_series[i].linf_bound});
    }
    if (top == 0.0) {
        D.degenerate = true;
        D.conclusive = true;
        return D;
    }
    D.fit_f = fit_exponential(sf, t_min, t_max);
    D.fit_E = fit_exponential(sE, t_min, t_max);
    for (const auto& [t, v] : sf) D.C0 = std::max(D.C0, std::exp(D.fit_f.exponent * t) * v);
    D.conclusive = D.fit_f.conclusive() && D.fit_E.conclusive();
    return D;
}

}  // namespace hypokinetic
