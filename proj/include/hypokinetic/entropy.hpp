#pragma once

// Modified entropies, their admissible constants, and the H-theorem
// diagnostics, all evaluated exactly in the Hermite–Fourier basis.

#include "spectral_core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypokinetic {

struct Derivatives {
    SpectralField dv;  ///< lowering applied per mode
    SpectralField dx;  ///< iξ times each mode
};

inline Derivatives derivatives(const SpectralField& f) {
    Derivatives d{SpectralField(f.grid()), SpectralField(f.grid())};
    for (int xi = -f.n_xi(); xi <= f.n_xi(); ++xi)
        for (int n = 0; n <= f.n_v(); ++n) {
            if (n < f.n_v()) d.dv(xi, n) = std::sqrt(static_cast<double>(n + 1)) * f(xi, n + 1);
            d.dx(xi, n) = I * static_cast<double>(xi) * f(xi, n);
        }
    return d;
}

/// The four quadratic quantities every H¹-type entropy is built from.
struct H1Parts {
    double norm_sq = 0.0;
    double dv_sq = 0.0;
    double dx_sq = 0.0;
    double cross = 0.0;  ///< Re⟨∂_v f, ∂_x f⟩

    double h1_sq() const { return norm_sq + dv_sq + dx_sq; }
};

inline H1Parts h1_parts(const SpectralField& f) {
    H1Parts p;
    for (int xi = -f.n_xi(); xi <= f.n_xi(); ++xi) {
        const double x = xi;
        for (int n = 0; n <= f.n_v(); ++n) {
            const cplx c = f(xi, n);
            p.norm_sq += std::norm(c);
            p.dx_sq += x * x * std::norm(c);
            if (n < f.n_v()) {
                const cplx dv = std::sqrt(static_cast<double>(n + 1)) * f(xi, n + 1);
                p.dv_sq += std::norm(dv);
                p.cross += (dv * std::conj(I * x * c)).real();
            }
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Constants and admissibility

struct EntropyConstants {
    double C = 0.0, D = 0.0, E = 0.0;
    double eps = 0.0;
    double eps_iii = 0.0, eps_iv = 0.0, eps_v = 0.0, eps_vii = 0.0;
};

struct Slack {
    std::string name;
    double value = 0.0;  ///< right side minus left side
    bool strict = false;
    bool holds() const { return strict ? value > 0.0 : value >= 0.0; }
};

struct Admissibility {
    std::vector<Slack> slacks;

    bool ok() const {
        for (const auto& s : slacks)
            if (!s.holds()) return false;
        return true;
    }
    std::string describe() const {
        std::ostringstream os;
        os << std::setprecision(6);
        for (const auto& s : slacks)
            os << s.name << (s.holds() ? " ok" : " VIOLATED") << " (slack " << s.value << "); ";
        return os.str();
    }
    std::string first_violation() const {
        for (const auto& s : slacks)
            if (!s.holds()) return s.name;
        return {};
    }
};

/// 1 < E < D < C, E² < D and ½(2D+E)² < C.
inline Admissibility admissible_E(const EntropyConstants& k) {
    return {{{"E>1", k.E - 1.0, true},
             {"D>E", k.D - k.E, true},
             {"C>D", k.C - k.D, true},
             {"D>E^2", k.D - k.E * k.E, true},
             {"C>(2D+E)^2/2", k.C - 0.5 * (2 * k.D + k.E) * (2 * k.D + k.E), true}}};
}

/// E ≥ 4, 2D ≥ E², 2C ≥ (2D+3E)² + D.
inline Admissibility admissible_G(const EntropyConstants& k) {
    return {{{"E>=4", k.E - 4.0, false},
             {"2D>=E^2", 2 * k.D - k.E * k.E, false},
             {"2C>=(2D+3E)^2+D", 2 * k.C - (2 * k.D + 3 * k.E) * (2 * k.D + 3 * k.E) - k.D, false}}};
}

/// eps ≤ 1/2 and C_op·eps ≤ 1/2.
inline Admissibility admissible_F(double eps, double c_op) {
    return {{{"eps>0", eps, true}, {"eps<=1/2", 0.5 - eps, false}, {"C_op*eps<=1/2", 0.5 - c_op * eps, false}}};
}

/// The seven K conditions for order s, plus E² ≤ D for the lower bound.
inline Admissibility admissible_K(const EntropyConstants& k, double s) {
    const double C2 = 2 * k.C / 10, Es = k.E * s / 10;
    const auto pw = [](double b, double e) { return std::pow(b, e); };
    Admissibility a;
    a.slacks = {
        {"(17) 2D<=2C/10", C2 - 2 * k.D, false},
        {"(18a) 2D/eps_iii<=2C/10", C2 - 2 * k.D / k.eps_iii, false},
        {"(18b) eps_iii^s*2D<=Es/10", Es - pw(k.eps_iii, s) * 2 * k.D, false},
        {"(19a) E(s+1)/eps_iv<=2C/10", C2 - k.E * (s + 1) / k.eps_iv, false},
        {"(19b) eps_iv^(1/s)*E(s+1)<=Es/10", Es - pw(k.eps_iv, 1.0 / s) * k.E * (s + 1), false},
        {"(20a) E/eps_v<=2D/10", 2 * k.D / 10 - k.E / k.eps_v, false},
        {"(20b) eps_v*E<=2/10", 0.2 - k.eps_v * k.E, false},
        {"(21) Es<=2C/10", C2 - k.E * s, false},
        {"(22a) (1+2s)/eps_vii<=2C/10", C2 - (1 + 2 * s) / k.eps_vii, false},
        {"(22b) eps_vii^((1-s)/2s)*(1+2s)<=Es/10", Es - pw(k.eps_vii, (1 - s) / (2 * s)) * (1 + 2 * s), false},
        {"(23) 2<=2C/10", C2 - 2.0, false},
        {"E^2<=D", k.D - k.E * k.E, false},
        {"eps_iii>0", k.eps_iii, true},
        {"eps_iv>0", k.eps_iv, true},
        {"eps_v>0", k.eps_v, true},
        {"eps_vii>0", k.eps_vii, true},
    };
    return a;
}

// ---------------------------------------------------------------------------
// Functionals

inline double entropy_E_unchecked(const H1Parts& p, const EntropyConstants& k) {
    return k.C * p.norm_sq + k.D * p.dv_sq + k.E * p.cross + p.dx_sq;
}

inline double entropy_E(const SpectralField& f, const EntropyConstants& k) {
    const auto adm = admissible_E(k);
    if (!adm.ok()) throw std::invalid_argument("entropy_E: inadmissible constants: " + adm.first_violation());
    return entropy_E_unchecked(h1_parts(f), k);
}

/// Σ_ξ Re[(iξ/(1+ξ²)) r̂(ξ) conj(m̂(ξ))].
inline double macro_cross(const SpectralField& f) {
    double acc = 0.0;
    for (int xi = -f.n_xi(); xi <= f.n_xi(); ++xi) {
        const double x = xi;
        acc += ((I * x / (1.0 + x * x)) * f(xi, 0) * std::conj(f(xi, 1))).real();
    }
    return acc;
}

inline double entropy_F(const SpectralField& f, double eps) {
    if (!(eps <= 0.5)) throw std::invalid_argument("entropy_F: eps must be <= 1/2");
    return f.norm_sq() + eps * macro_cross(f);
}

inline double entropy_G_unchecked(double t, const H1Parts& p, const EntropyConstants& k) {
    return k.C * p.norm_sq + k.D * t * p.dv_sq + k.E * t * t * p.cross + t * t * t * p.dx_sq;
}

inline double entropy_G(double t, const SpectralField& f, const EntropyConstants& k) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("entropy_G: t must lie in [0, 1]");
    const auto adm = admissible_G(k);
    if (!adm.ok()) throw std::invalid_argument("entropy_G: inadmissible constants: " + adm.first_violation());
    return entropy_G_unchecked(t, h1_parts(f), k);
}

// ---------------------------------------------------------------------------
// Macroscopic coupling constant for F

struct CouplingConstant {
    double value = 0.0;
    int argmax_xi = 0;
};

/// Smallest C such that, along f' = −P f, the time derivative Q' of the
/// cross term Q = macro_cross(f) satisfies Q' ≤ −½ Σ_ξ w(ξ)|r̂|² + C‖h‖²,
/// with w = ξ²/(1+ξ²). Per mode this is the top eigenvalue of the Schur
/// complement, on the micro block, of the quadratic form of Q' + ½w|r̂|².
/// The bound is model independent because both collisions damp H₁ at rate 1.
inline CouplingConstant measure_coupling_constant(const GridSpec& grid) {
    grid.validate();
    CouplingConstant out;
    const int d = grid.dim();
    for (int xi = 1; xi <= grid.n_xi; ++xi) {
        const double x = xi;
        const cplx a = I * x / (1.0 + x * x);
        const double w = x * x / (1.0 + x * x);
        const CMatrix P = assemble_mode(Model::FP, xi, grid.n_v).generator;
        CMatrix W = CMatrix::Zero(d, d);
        W(1, 0) = a / 2.0;
        W(0, 1) = std::conj(a) / 2.0;
        CMatrix B = -(W * P + P.adjoint() * W);
        B(0, 0) += w / 2.0;
        const double b00 = B(0, 0).real();
        const CVector b = B.block(1, 0, d - 1, 1);
        CMatrix S = B.block(1, 1, d - 1, d - 1) - (b * b.adjoint()) / b00;
        S = (S + S.adjoint()).eval() / 2.0;
        Eigen::SelfAdjointEigenSolver<CMatrix> es(S, Eigen::EigenvaluesOnly);
        const double top = es.eigenvalues().maxCoeff();
        if (top > out.value) {
            out.value = top;
            out.argmax_xi = xi;
        }
    }
    return out;
}

inline double eps_from_coupling(double c_op) { return c_op > 0 ? std::min(0.5, 1.0 / (2.0 * c_op)) : 0.5; }

// Rates that follow from the proofs with c_p = 1.

/// Decay rate of E along FP flow given by the proof: E·c_p/(8C).
inline double kappa_chain_E(const EntropyConstants& k) { return k.E * GridSpec::poincare_constant / (8.0 * k.C); }
/// Decay rate of F: (ε/4)·c_p/(c_p+1).
inline double kappa_chain_F(double eps) {
    const double cp = GridSpec::poincare_constant;
    return (eps / 4.0) * cp / (cp + 1.0);
}
/// Decay rate of ‖f‖ implied by the F chain: half the F rate.
inline double kappa_chain_norm(double eps) { return kappa_chain_F(eps) / 2.0; }

// ---------------------------------------------------------------------------
// Constant selection

enum class EntropyTarget { E, F, G, K };

inline EntropyConstants constants_E() { return {80.0, 5.0, 2.0}; }
inline EntropyConstants constants_G() { return {400.0, 8.0, 4.0}; }

/// K constants for order s, fixed in reverse order of the conditions:
/// E from (22) with eps_vii = 1, eps_v from (20b), D from (20a), eps_iv from
/// (19b), eps_iii from (18b), then C from every remaining upper bound.
/// Each choice keeps a 1% margin so no slack is lost to rounding.
inline EntropyConstants constants_K(double s) {
    if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("constants_K: s must lie in (0, 1]");
    constexpr double up = 1.01, down = 0.99;
    EntropyConstants k;
    k.eps_vii = 1.0;
    k.E = up * 10.0 * (1.0 + 2.0 * s) / s;
    k.eps_v = down / (5.0 * k.E);
    k.D = up * std::max(5.0 * k.E / k.eps_v, k.E * k.E);
    k.eps_iv = std::pow(down * s / (10.0 * (s + 1.0)), s);
    k.eps_iii = std::pow(down * k.E * s / (20.0 * k.D), 1.0 / s);
    k.C = up * std::max({10.0 * k.D, 10.0 * k.D / k.eps_iii, 5.0 * k.E * (s + 1.0) / k.eps_iv, 5.0 * k.E * s,
                         5.0 * (1.0 + 2.0 * s) / k.eps_vii, 10.0});
    return k;
}

inline EntropyConstants select_constants(EntropyTarget target, std::optional<double> s = {},
                                         std::optional<double> c_op = {}) {
    switch (target) {
        case EntropyTarget::E: return constants_E();
        case EntropyTarget::G: return constants_G();
        case EntropyTarget::F: {
            EntropyConstants k;
            k.eps = eps_from_coupling(c_op ? *c_op : measure_coupling_constant(GridSpec{}).value);
            return k;
        }
        case EntropyTarget::K: return constants_K(s.value_or(1.0));
    }
    return {};
}

// ---------------------------------------------------------------------------
// Reports

struct EntropyReport {
    double t = 0.0;
    double norm_sq = 0.0, dv_sq = 0.0, dx_sq = 0.0, cross = 0.0;
    double value_E = 0.0, value_F = 0.0, value_G = std::numeric_limits<double>::quiet_NaN();
    double r_sq = 0.0, m_sq = 0.0, h_sq = 0.0;
};

/// G is only defined on [0, 1]; later samples carry NaN in that column.
inline EntropyReport make_report(double t, const SpectralField& f, const EntropyConstants& kE, double eps,
                                 const EntropyConstants& kG) {
    const H1Parts p = h1_parts(f);
    EntropyReport r;
    r.t = t;
    r.norm_sq = p.norm_sq;
    r.dv_sq = p.dv_sq;
    r.dx_sq = p.dx_sq;
    r.cross = p.cross;
    r.value_E = entropy_E_unchecked(p, kE);
    r.value_F = p.norm_sq + eps * macro_cross(f);
    if (t >= 0.0 && t <= 1.0) r.value_G = entropy_G_unchecked(t, p, kG);
    for (int xi = -f.n_xi(); xi <= f.n_xi(); ++xi) {
        r.r_sq += std::norm(f(xi, 0));
        r.m_sq += std::norm(f(xi, 1));
    }
    r.h_sq = p.norm_sq - r.r_sq;
    return r;
}

inline constexpr const char* kReportHeader = "t,norm_sq,dv_sq,dx_sq,cross,E,F,G,r_sq,m_sq,h_sq";

inline void write_report_row(std::ostream& os, const EntropyReport& r) {
    os << std::setprecision(17) << r.t << ',' << r.norm_sq << ',' << r.dv_sq << ',' << r.dx_sq << ',' << r.cross
       << ',' << r.value_E << ',' << r.value_F << ',' << r.value_G << ',' << r.r_sq << ',' << r.m_sq << ','
       << r.h_sq << '\n';
}

// ---------------------------------------------------------------------------
// H-theorem

struct GaussRule {
    std::vector<double> nodes, weights;
};

/// Gauss–Hermite rule for the unit Gaussian (weights sum to 1), from the
/// eigen-decomposition of the Jacobi matrix of the orthonormal recurrence.
inline GaussRule gauss_hermite_probabilists(int n) {
    RMatrix J = RMatrix::Zero(n, n);
    for (int k = 0; k + 1 < n; ++k) J(k, k + 1) = J(k + 1, k) = std::sqrt(static_cast<double>(k + 1));
    Eigen::SelfAdjointEigenSolver<RMatrix> es(J);
    GaussRule g;
    for (int k = 0; k < n; ++k) {
        g.nodes.push_back(es.eigenvalues()(k));
        const double v0 = es.eigenvectors()(0, k);
        g.weights.push_back(v0 * v0);
    }
    return g;
}

struct HTheorem {
    double H = 0.0;  ///< ∬ (1+f) ln(1+f) dμ dν
    double D = 0.0;  ///< ∬ (∂_v f)² / (1+f) dμ dν
};

/// Relative entropy and its FP dissipation for the density F = M(1+f),
/// by Gauss–Hermite quadrature with 2n_v+8 nodes in v and a uniform rule with
/// 4n_xi+8 nodes in x. Throws if 1+f ≤ 0 at a node or f is not real there.
inline HTheorem htheorem_diagnostics(const SpectralField& f) {
    const int nv = 2 * f.n_v() + 8, nx = 4 * f.n_xi() + 8;
    const GaussRule gh = gauss_hermite_probabilists(nv);
    const int d = f.n_v() + 1;
    // Hermite values at nodes, shape nodes × d.
    RMatrix Hv(nv, d);
    std::vector<double> buf(d);
    for (int k = 0; k < nv; ++k) {
        hermite_values(f.n_v(), gh.nodes[k], buf.data());
        for (int n = 0; n < d; ++n) Hv(k, n) = buf[n];
    }
    const Derivatives der = derivatives(f);
    const CMatrix vals = f.coeffs() * Hv.transpose().cast<cplx>();      // modes × nodes
    const CMatrix dvals = der.dv.coeffs() * Hv.transpose().cast<cplx>();
    double scale = 1.0;
    HTheorem out;
    for (int j = 0; j < nx; ++j) {
        const double x = GridSpec::torus_period * j / nx;
        CVector phase(f.grid().modes());
        for (int xi = -f.n_xi(); xi <= f.n_xi(); ++xi) phase(xi + f.n_xi()) = std::exp(I * (xi * x));
        const CVector fv = vals.transpose() * phase;
        const CVector dfv = dvals.transpose() * phase;
        for (int k = 0; k < nv; ++k) {
            const double u = fv(k).real();
            if (std::abs(fv(k).imag()) > 1e-10 * (scale + std::abs(u)))
                throw std::invalid_argument("htheorem_diagnostics: field is not real at node x=" + std::to_string(x) +
                                            " v=" + std::to_string(gh.nodes[k]));
            const double F = 1.0 + u;
            if (!(F > 0.0))
                throw std::domain_error("htheorem_diagnostics: density 1+f = " + std::to_string(F) +
                                        " is not positive at node x=" + std::to_string(x) +
                                        " v=" + std::to_string(gh.nodes[k]));
            const double w = gh.weights[k] / nx;
            out.H += w * F * std::log1p(u);
            const double dv = dfv(k).real();
            out.D += w * dv * dv / F;
        }
    }
    return out;
}

}  // namespace hypokinetic
