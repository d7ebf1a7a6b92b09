#pragma once

// Deterministic initial data for experiments and tests.

#include "spectral_core.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace hypokinetic {

struct RandomProfile {
    double p = 2.0;  ///< decay exponent in ⟨ξ⟩
    double q = 4.0;  ///< decay exponent in ⟨n+1⟩
};

/// Complex Gaussian coefficients shaped by ⟨ξ⟩^{-p}⟨n+1⟩^{-q}, mean-zero and
/// conjugate-symmetric in ξ, scaled to unit L² norm. The seed fixes every draw.
inline SpectralField random_field(const GridSpec& grid, std::uint64_t seed, RandomProfile prof = {}) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    SpectralField f(grid);
    for (int xi = 0; xi <= grid.n_xi; ++xi) {
        const double wx = std::pow(1.0 + xi * xi, -prof.p / 2.0);
        for (int n = 0; n <= grid.n_v; ++n) {
            const double wn = std::pow(1.0 + (n + 1.0) * (n + 1.0), -prof.q / 2.0);
            const double re = gauss(rng), im = gauss(rng);
            const cplx z = (xi == 0 ? cplx(re, 0.0) : cplx(re, im) / std::sqrt(2.0)) * (wx * wn);
            f(xi, n) = z;
            if (xi > 0) f(-xi, n) = std::conj(z);
        }
    }
    f(0, 0) = 0.0;
    const double nrm = f.norm();
    if (nrm > 0) f *= 1.0 / nrm;
    return f;
}

/// f̂[ξ][n] = δ_{n,0}·⟨ξ⟩^{-1/2-δ} with the ξ = 0 entry removed: barely in L²
/// in x, so every x-derivative gain is visible at short times.
inline SpectralField rough_in_x_field(const GridSpec& grid, double delta = 0.01) {
    SpectralField f(grid);
    for (int xi = -grid.n_xi; xi <= grid.n_xi; ++xi)
        if (xi != 0) f(xi, 0) = std::pow(1.0 + double(xi) * xi, -0.25 - delta / 2.0);
    return f;
}

/// Single Hermite mode n at frequency ξ with unit amplitude.
inline SpectralField basis_field(const GridSpec& grid, int xi, int n) {
    SpectralField f(grid);
    f(xi, n) = 1.0;
    return f;
}

}  // namespace hypokinetic
