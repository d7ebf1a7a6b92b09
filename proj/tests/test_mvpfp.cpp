#include <hypokinetic/initial_data.hpp>
#include <hypokinetic/mvpfp.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace hypokinetic;

namespace {

const GridSpec kGrid{4, 12};

SpectralField scaled_random(std::uint64_t seed, double norm) {
    SpectralField f = random_field(kGrid, seed);
    f *= norm;
    return f;
}

cplx eval_x(const CVector& c, int n_xi, double x) {
    cplx acc{};
    for (int xi = -n_xi; xi <= n_xi; ++xi) acc += c(xi + n_xi) * std::exp(I * (xi * x));
    return acc;
}

}  // namespace

TEST(Field, Examples) {
    const GridSpec g{3, 4};
    SpectralField f(g);
    f(0, 1) = 0.7;  // ξ = 0 content with zero mean
    const Mollifier at0 = make_mollifier(3, [](int xi) { return xi == 0 ? cplx(1.0) : cplx{}; });
    EXPECT_EQ(field_from_density(f, at0).coeffs.norm(), 0.0);

    SpectralField h(g);
    h(1, 0) = 1.0;
    const Mollifier half = make_mollifier(3, [](int xi) { return xi == 1 ? cplx(0.5) : cplx{}; }, +1);
    const FieldSample E = field_from_density(h, half);
    EXPECT_EQ(E.coeffs(1 + 3), cplx(0.5));
    EXPECT_EQ(E.linf_bound, 0.5);
    EXPECT_NEAR(E.grid_max, 0.5, 1e-15);

    EXPECT_THROW(make_mollifier(3, [](int) { return cplx(1.0); }, 0), std::invalid_argument);
    EXPECT_THROW(field_from_density(h, gaussian_mollifier(4)), std::invalid_argument);
}

TEST(Field, LinfBoundOnRandomData) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> N(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        const int sign = trial % 2 ? 1 : -1;
        const Mollifier m = make_mollifier(kGrid.n_xi, [&](int) { return cplx(N(rng), N(rng)); }, sign);
        const SpectralField f = random_field(kGrid, trial + 1, {0.5, 1.0});
        const FieldSample E = field_from_density(f, m);
        EXPECT_LE(E.linf_bound, m.linf_bound * f.norm() * (1 + 1e-14));
        // A dense sweep that contains the sampling grid of grid_max never exceeds the coefficient bound.
        const int dense = 40 * (4 * kGrid.n_xi + 8);
        double sup = 0;
        for (int j = 0; j < dense; ++j) sup = std::max(sup, std::abs(eval_x(E.coeffs, kGrid.n_xi, 2 * M_PI * j / dense)));
        EXPECT_LE(sup, E.linf_bound * (1 + 1e-14));
        EXPECT_LE(E.grid_max, sup * (1 + 1e-12) + 1e-15);
    }
}

TEST(Field, ProductMatchesPointwiseMultiplication) {
    // Band-limited factors (|ξ| ≤ n_xi/2) so the truncated convolution loses nothing.
    const GridSpec g{8, 5};
    std::mt19937_64 rng(3);
    std::normal_distribution<double> N(0, 1);
    CVector E = CVector::Zero(g.modes());
    SpectralField f(g);
    for (int xi = -4; xi <= 4; ++xi) {
        E(xi + 8) = {N(rng), N(rng)};
        for (int n = 0; n <= 5; ++n) f(xi, n) = {N(rng), N(rng)};
    }
    const SpectralField prod = multiply_field(E, f);
    const int nx = 32;
    for (int n = 0; n <= 5; ++n) {
        CVector col(g.modes());
        for (int xi = -8; xi <= 8; ++xi) col(xi + 8) = f(xi, n);
        for (int xi = -8; xi <= 8; ++xi) {
            cplx acc{};
            for (int j = 0; j < nx; ++j) {
                const double x = 2 * M_PI * j / nx;
                acc += eval_x(E, 8, x) * eval_x(col, 8, x) * std::exp(-I * (xi * x));
            }
            EXPECT_LT(std::abs(acc / double(nx) - prod(xi, n)), 1e-12);
        }
    }
}

TEST(Field, RaiseIsTheLadderAdjoint) {
    const SpectralField f = random_field(kGrid, 5);
    const SpectralField r = raise(f);
    const RMatrix Ad = hermite_ladder(kGrid.n_v).Adag;
    for (int xi = -4; xi <= 4; ++xi) EXPECT_LT((r.mode(xi) - Ad.cast<cplx>() * f.mode(xi)).norm(), 1e-15);
}

TEST(Duhamel, Examples) {
    const double tau = 0.8;
    const SpectralField k = duhamel_kernel(basis_field(kGrid, 0, 0), tau);
    EXPECT_NEAR(std::abs(k(0, 1) - std::exp(-tau)), 0.0, 1e-15);
    EXPECT_NEAR(k.norm(), std::exp(-tau), 1e-15);
    EXPECT_EQ(duhamel_kernel(SpectralField(kGrid), tau).norm(), 0.0);
    EXPECT_THROW(duhamel_kernel(k, 0.0), std::invalid_argument);
    SpectralField g = scaled_random(6, 1.0);
    g(0, 0) = 0.3;
    EXPECT_EQ(duhamel_kernel(g, 0.1).mean(), cplx{});
}

TEST(Duhamel, EnvelopeFromMeasuredConstants) {
    const LinearPropagator prop(kGrid, Model::FP, ExpMethod::AutoVector);
    const KernelConstants kc = measure_kernel_constants(prop, gaussian_mollifier(kGrid.n_xi));
    EXPECT_NEAR(kc.kappa, spectral_gap(kGrid, Model::FP).gap, 1e-9);
    EXPECT_GT(kc.C_kernel, 0.0);
    EXPECT_GE(kc.c_lin, 1.0);
    EXPECT_GT(kc.eps0, 0.0);
    EXPECT_NEAR(4 * kc.C_sq * kc.eps0, 1.0, 1e-12);
    std::mt19937_64 rng(21);
    std::normal_distribution<double> N(0, 1);
    for (int trial = 0; trial < 10; ++trial) {
        SpectralField g(kGrid);
        for (int xi = -4; xi <= 4; ++xi)
            for (int n = 0; n <= kGrid.n_v; ++n) g(xi, n) = {N(rng), N(rng)};
        for (double tau : {0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0})
            EXPECT_LE(duhamel_kernel(g, tau, prop).norm(), kc.envelope(tau) * g.norm() * (1 + 1e-12)) << tau;
    }
}

TEST(Constants, OperatorNormMatchesSingularValues) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> N(0, 1);
    CMatrix M(7, 7);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) M(i, j) = {N(rng), N(rng)};
    Eigen::JacobiSVD<CMatrix> svd(M);
    EXPECT_NEAR(operator_norm(M), svd.singularValues()(0), 1e-12 * svd.singularValues()(0));
    const auto t = chebyshev_times(10.0, 64);
    ASSERT_EQ(t.size(), 64u);
    EXPECT_EQ(t.front(), 0.0);
    EXPECT_DOUBLE_EQ(t.back(), 10.0);
    for (std::size_t i = 1; i < t.size(); ++i) EXPECT_GT(t[i], t[i - 1]);
}

TEST(Strang, LinearLimitAndZeroData) {
    const LinearPropagator prop(kGrid, Model::FP);
    const SpectralField f0 = scaled_random(9, 0.3);
    const Mollifier zero = zero_mollifier(kGrid.n_xi);
    const StepOperator half(prop, 0.05);
    EXPECT_EQ(mvpfp_step(f0, zero, 0.1).coeffs(), half.apply(half.apply(f0)).coeffs());
    EXPECT_LT((mvpfp_step(f0, zero, 0.1) - evolve_linear(f0, Model::FP, 0.1)).norm(), 1e-13 * f0.norm());
    const auto traj = strang_solve(f0, zero, prop, {0.0, 0.5, 2.0}, 3);
    EXPECT_LT((traj.back() - prop.apply(f0, 2.0)).norm(), 1e-14);
    EXPECT_EQ(mvpfp_step(SpectralField(kGrid), gaussian_mollifier(4), 0.1).norm(), 0.0);
    EXPECT_THROW(mvpfp_step(f0, zero, 0.0), std::invalid_argument);
    EXPECT_THROW(strang_solve(f0, zero, prop, {0.1, 1.0}, 1), std::invalid_argument);
    EXPECT_THROW(strang_solve(f0, zero, prop, {0.0, 1.0}, 0), std::invalid_argument);
}

TEST(Picard, ZeroDataAndLinearLimit) {
    const LinearPropagator prop(kGrid, Model::FP, ExpMethod::AutoVector);
    const PicardResult z = picard_solve(SpectralField(kGrid), gaussian_mollifier(4), prop);
    EXPECT_EQ(z.status, PicardStatus::Converged);
    EXPECT_EQ(z.iterations, 1);
    for (const auto& g : z.g_series) EXPECT_EQ(g.norm(), 0.0);

    const SpectralField f0 = scaled_random(4, 0.5);
    const PicardResult lin = picard_solve(f0, zero_mollifier(4), prop);
    EXPECT_EQ(lin.status, PicardStatus::Converged);
    for (std::size_t i = 0; i < lin.times.size(); ++i) {
        EXPECT_EQ(lin.g_series[i].norm(), 0.0);
        EXPECT_LT((lin.f_series[i] - prop.apply(f0, lin.times[i])).norm(), 1e-14);
    }
}

TEST(Picard, Preconditions) {
    const LinearPropagator fp(kGrid, Model::FP), bl(kGrid, Model::BL);
    SpectralField f0 = scaled_random(4, 1e-2);
    const Mollifier m = gaussian_mollifier(4);
    EXPECT_THROW(picard_solve(f0, m, bl), std::invalid_argument);
    PicardOptions tight;
    tight.eps0 = 1e-3;
    EXPECT_THROW(picard_solve(f0, m, fp, tight), std::invalid_argument);
    f0(0, 0) = 1e-3;
    EXPECT_THROW(picard_solve(f0, m, fp), std::invalid_argument);
}

TEST(Picard, LargeDataReportsRatioViolation) {
    const LinearPropagator prop(kGrid, Model::FP, ExpMethod::AutoVector);
    const Mollifier strong = make_mollifier(4, [](int) { return cplx(5.0); });
    const PicardResult R = picard_solve(scaled_random(7, 50.0), strong, prop);
    EXPECT_EQ(R.status, PicardStatus::RatioViolation);
    ASSERT_FALSE(R.contraction_ratios.empty());
    EXPECT_GE(R.contraction_ratios.back(), 1.0);
    EXPECT_NE(R.message.find("contraction ratio"), std::string::npos);
}

TEST(Picard, AgreesWithStrangAtSecondOrder) {
    const LinearPropagator prop(kGrid, Model::FP, ExpMethod::AutoVector);
    const Mollifier m = gaussian_mollifier(4);
    const SpectralField f0 = scaled_random(7, 1e-2);
    const PicardResult R = picard_solve(f0, m, prop);
    ASSERT_EQ(R.status, PicardStatus::Converged);
    for (double r : R.contraction_ratios) EXPECT_LT(r, 1.0);
    // The nonlinear correction must be visible, otherwise the comparison is vacuous.
    EXPECT_GT((R.f_series.back() - prop.apply(f0, R.times.back())).norm(), 1e-3 * R.f_series.back().norm());
    double prev = 0;
    for (int sub : {1, 2, 4, 8}) {
        const auto S = strang_solve(f0, m, prop, R.times, sub);
        const double err = (S.back() - R.f_series.back()).norm();
        if (prev > 0) {
            EXPECT_NEAR(prev / err, 4.0, 0.8) << "substeps " << sub;
        }
        prev = err;
    }
    for (std::size_t i = 0; i < R.times.size(); ++i) {
        EXPECT_EQ(R.f_series[i].mean(), cplx{});
        EXPECT_LE(R.f_series[i].reality_defect(), 1e-12 * f0.norm());
    }
}

TEST(Picard, LogAndCsvFormats) {
    const LinearPropagator prop(kGrid, Model::FP, ExpMethod::AutoVector);
    const PicardResult R = picard_solve(scaled_random(3, 1e-3), gaussian_mollifier(4), prop);
    std::ostringstream log, csv;
    write_picard_log(log, R);
    write_mvpfp_csv(csv, R.times, R.f_series, R.E_series);
    EXPECT_NE(log.str().find("status converged"), std::string::npos);
    EXPECT_NE(log.str().find("iter 1 z_distance"), std::string::npos);
    std::istringstream is(csv.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t,f_norm,E_linf_bound,E_grid_max");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 64);
}

TEST(Decay, DegenerateSeries) {
    const std::vector<double> t = chebyshev_times(10, 16);
    const std::vector<SpectralField> f(t.size(), SpectralField(kGrid));
    std::vector<FieldSample> E;
    for (const auto& x : f) E.push_back(field_from_density(x, gaussian_mollifier(4)));
    const DecayReport D = decay_report(t, f, E, 5, 10);
    EXPECT_TRUE(D.degenerate);
    EXPECT_TRUE(D.conclusive);
}

TEST(Decay, LinearLimitMatchesGap) {
    const LinearPropagator prop(kGrid, Model::FP, ExpMethod::AutoVector);
    const Mollifier zero = zero_mollifier(4);
    const PicardResult R = picard_solve(scaled_random(12, 1e-2), zero, prop);
    // The zero mollifier gives a zero field, so fit only ‖f‖ here.
    Series s;
    for (std::size_t i = 0; i < R.times.size(); ++i) s.emplace_back(R.times[i], R.f_series[i].norm());
    const RateFit fit = fit_exponential(s, 5, 10);
    EXPECT_NEAR(fit.exponent, spectral_gap(kGrid, Model::FP).gap, 0.05);
}

TEST(Decay, SmallDataRateBeatsWeightedNormRate) {
    const LinearPropagator prop(kGrid, Model::FP, ExpMethod::AutoVector);
    const Mollifier m = gaussian_mollifier(4);
    const KernelConstants kc = measure_kernel_constants(prop, m);
    const SpectralField f0 = scaled_random(8, 0.5 * kc.eps0);
    PicardOptions o;
    o.eps0 = kc.eps0;
    o.kappa = kc.kappa;
    const PicardResult R = picard_solve(f0, m, prop, o);
    ASSERT_EQ(R.status, PicardStatus::Converged);
    const DecayReport D = decay_report(R.times, R.f_series, R.E_series, 5, 10);
    EXPECT_FALSE(D.degenerate);
    EXPECT_TRUE(D.conclusive);
    EXPECT_GE(D.fit_f.exponent, 0.8 * kc.sigma * kc.kappa);
    EXPECT_GT(D.fit_E.exponent, 0.0);
    EXPECT_GE(D.C0, f0.norm() * (1 - 1e-12));
}
