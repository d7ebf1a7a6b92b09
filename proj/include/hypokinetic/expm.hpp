#pragma once

// Exponentials e^{−τP} of per-mode generators.
//
// Three back ends exist. Diagonal modes (ξ = 0) are exponentiated entrywise.
// Well-conditioned modes reuse an eigendecomposition. Everything else uses
// either Padé-13 scaling and squaring (dense result) or a truncated Taylor
// action on the tridiagonal form (vector result, cheap for large n_v).

#include "spectral_core.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <limits>

namespace hypokinetic {

/// Auto: eigendecomposition when well conditioned, Padé otherwise (Taylor
/// action above kDenseDimLimit). AutoVector: same but Taylor action instead of
/// Padé, for callers that apply many different τ to vectors.
enum class ExpMethod { Auto, AutoVector, Eigen, Pade, Action };

inline constexpr double kEigenConditionLimit = 1e6;
/// Above this Hermite dimension, Auto skips dense factorizations entirely.
inline constexpr int kDenseDimLimit = 128;

/// e^{A} by scaling and squaring with the degree-13 Padé approximant.
inline CMatrix expm_pade(const CMatrix& A) { return A.exp(); }

struct EigenFactor {
    CVector lambda;
    CMatrix V, Vinv;
    double cond = std::numeric_limits<double>::infinity();
};

inline EigenFactor eigen_factor(const CMatrix& P) {
    Eigen::ComplexEigenSolver<CMatrix> es(P);
    EigenFactor ef;
    if (es.info() != Eigen::Success) return ef;
    ef.lambda = es.eigenvalues();
    ef.V = es.eigenvectors();
    Eigen::JacobiSVD<CMatrix> svd(ef.V);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    ef.cond = smin > 0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
    ef.Vinv = ef.V.partialPivLu().inverse();
    return ef;
}

/// e^{−τP}v by the truncated Taylor series, in substeps with ‖hP̃‖₁ ≤ θ,
/// where P̃ = P − μ·Id and μ is the mean real diagonal.
inline CVector expmv_taylor(const Tridiagonal& P, double tau, CVector v) {
    if (tau == 0.0 || v.size() == 0) return v;
    constexpr double theta = 4.0;
    constexpr int m_max = 40;
    constexpr double tol = 0x1p-53;
    const int d = P.dim();
    double mu = 0.0;
    for (int n = 0; n < d; ++n) mu += P.diag(n).real();
    mu /= d;
    Tridiagonal S = P;
    for (int n = 0; n < d; ++n) S.diag(n) -= mu;
    const double nrm = S.norm1();
    const int steps = std::max(1, static_cast<int>(std::ceil(tau * nrm / theta)));
    const double h = tau / steps;
    const double damp = std::exp(-h * mu);
    for (int st = 0; st < steps; ++st) {
        CVector term = v;
        CVector sum = v;
        double prev = term.lpNorm<Eigen::Infinity>();
        for (int k = 1; k <= m_max; ++k) {
            term = S.apply(term) * (-h / k);
            sum += term;
            const double cur = term.lpNorm<Eigen::Infinity>();
            if (cur + prev <= tol * sum.lpNorm<Eigen::Infinity>()) break;
            prev = cur;
        }
        v = sum * damp;
    }
    return v;
}

}  // namespace hypokinetic
