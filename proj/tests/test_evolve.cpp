#include <hypokinetic/evolve.hpp>
#include <hypokinetic/fk_oracle.hpp>
#include <hypokinetic/initial_data.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace hypokinetic;

namespace {

double max_diff(const SpectralField& a, const SpectralField& b) { return (a.coeffs() - b.coeffs()).cwiseAbs().maxCoeff(); }

Series sample(double t0, double t1, int n, const std::function<double(double)>& fn) {
    Series s;
    for (int i = 0; i < n; ++i) {
        const double t = t0 + (t1 - t0) * i / (n - 1);
        s.emplace_back(t, fn(t));
    }
    return s;
}

}  // namespace

TEST(EvolveLinear, ClosedFormZeroModes) {
    const GridSpec g{4, 8};
    const SpectralField f1 = evolve_linear(basis_field(g, 0, 1), Model::FP, 1.0);
    EXPECT_NEAR(std::abs(f1(0, 1) - std::exp(-1.0)), 0.0, 1e-15);
    EXPECT_NEAR(f1.norm(), std::exp(-1.0), 1e-15);

    const SpectralField f2 = evolve_linear(basis_field(g, 0, 2), Model::BL, std::log(2.0));
    EXPECT_NEAR(std::abs(f2(0, 2) - 0.5), 0.0, 1e-15);
    EXPECT_NEAR(f2.norm(), 0.5, 1e-15);

    const SpectralField f0 = random_field(g, 2);
    for (Model m : {Model::FP, Model::BL}) EXPECT_EQ(evolve_linear(f0, m, 0.0).coeffs(), f0.coeffs());
    EXPECT_THROW(evolve_linear(f0, Model::FP, -1.0), std::invalid_argument);
}

TEST(EvolveLinear, BackEndsAgree) {
    const GridSpec g{6, 24};
    const SpectralField f0 = random_field(g, 8, {1.0, 1.0});
    for (Model m : {Model::FP, Model::BL}) {
        // A forced eigendecomposition loses accuracy in proportion to the eigenvector conditioning.
        const LinearPropagator eig(g, m, ExpMethod::Eigen);
        double cond = 1.0;
        for (int xi = 1; xi <= g.n_xi; ++xi) cond = std::max(cond, eig.condition(xi));
        for (double t : {0.05, 0.7, 3.0}) {
            const SpectralField ref = evolve_linear(f0, m, t, ExpMethod::Pade);
            for (ExpMethod e : {ExpMethod::Auto, ExpMethod::AutoVector, ExpMethod::Action})
                EXPECT_LE(max_diff(evolve_linear(f0, m, t, e), ref), 1e-12) << to_string(m) << " t=" << t;
            EXPECT_LE(max_diff(eig.apply(f0, t), ref), cond * 1e-15) << to_string(m) << " t=" << t;
        }
    }
}

TEST(EvolveLinear, SemigroupProperty) {
    const GridSpec g{8, 32};
    const SpectralField f0 = random_field(g, 3);
    for (Model m : {Model::FP, Model::BL}) {
        const LinearPropagator prop(g, m);
        for (auto [t, s] : {std::pair{0.3, 0.9}, std::pair{1.0, 2.5}, std::pair{0.01, 4.0}}) {
            const SpectralField a = prop.apply(prop.apply(f0, t), s);
            const SpectralField b = prop.apply(f0, t + s);
            EXPECT_LE(max_diff(a, b), 1e-12);
        }
    }
}

TEST(EvolveLinear, InvariantsAlongFlow) {
    const GridSpec g{8, 32};
    const SpectralField f0 = random_field(g, 13);
    for (Model m : {Model::FP, Model::BL}) {
        const LinearPropagator prop(g, m);
        const Trajectory tr = record_uniform(prop, f0, 0.25, 40);
        for (std::size_t i = 1; i < tr.states.size(); ++i) {
            EXPECT_LE(tr.states[i].norm(), tr.states[i - 1].norm() * (1 + 1e-14));
            EXPECT_LE(std::abs(tr.states[i].mean()), 1e-15);
            EXPECT_LE(tr.states[i].reality_defect(), 1e-15);
        }
        const SpectralField direct = prop.apply(f0, 10.0);
        EXPECT_LE(max_diff(direct, tr.states.back()), 1e-12);
    }
}

TEST(EvolveLinear, MassIsConserved) {
    const GridSpec g{4, 8};
    SpectralField f = random_field(g, 1);
    f(0, 0) = 0.7;
    for (Model m : {Model::FP, Model::BL}) EXPECT_NEAR(std::abs(evolve_linear(f, m, 5.0).mean() - 0.7), 0.0, 1e-15);
}

TEST(EvolveImplicit, Examples) {
    const GridSpec g{4, 8};
    EXPECT_EQ(evolve_implicit(SpectralField(g), Model::FP, 0.1, 10).norm(), 0.0);
    const SpectralField cn = evolve_implicit(basis_field(g, 0, 1), Model::FP, 0.1, 10);
    const double factor = std::pow(0.95 / 1.05, 10);
    EXPECT_NEAR(cn(0, 1).real(), factor, 1e-14);
    EXPECT_NEAR(cn(0, 1).real(), std::exp(-1.0), 0.1 * 0.1);
    EXPECT_THROW(evolve_implicit(cn, Model::FP, 0.0, 1), std::invalid_argument);
}

TEST(EvolveImplicit, SecondOrderConvergence) {
    const GridSpec g{4, 16};
    const SpectralField f0 = random_field(g, 6);
    for (Model m : {Model::FP, Model::BL}) {
        const SpectralField ref = evolve_linear(f0, m, 1.0);
        double prev = 0;
        for (int k = 0; k < 4; ++k) {
            const int steps = 10 << k;
            const double err = (evolve_implicit(f0, m, 1.0 / steps, steps) - ref).norm();
            if (k > 0) {
                EXPECT_NEAR(prev / err, 4.0, 0.8) << to_string(m) << " steps=" << steps;
            }
            prev = err;
        }
    }
}

TEST(Fits, ExponentialExamples) {
    const RateFit a = fit_exponential(sample(0, 10, 50, [](double t) { return std::exp(-2 * t); }), 0, 10);
    EXPECT_NEAR(a.exponent, 2.0, 1e-12);
    EXPECT_NEAR(a.r_squared, 1.0, 1e-12);
    const RateFit b = fit_exponential(sample(0, 10, 50, [](double t) { return 5 * std::exp(-0.3 * t); }), 0, 10);
    EXPECT_NEAR(b.exponent, 0.3, 1e-12);
    EXPECT_NEAR(b.intercept, std::log(5.0), 1e-12);
    EXPECT_TRUE(b.conclusive());
}

TEST(Fits, PowerLawExamples) {
    const std::vector<double> ts = log_spaced(1e-3, 1e-1, 16);
    EXPECT_EQ(ts.size(), 33u);
    EXPECT_DOUBLE_EQ(ts.front(), 1e-3);
    EXPECT_DOUBLE_EQ(ts.back(), 1e-1);
    Series a, b;
    for (double t : ts) {
        a.emplace_back(t, std::pow(t, -0.5));
        b.emplace_back(t, 7 * std::pow(t, -1.5));
    }
    EXPECT_NEAR(fit_powerlaw(a, 1e-3, 1e-1).exponent, -0.5, 1e-12);
    const RateFit fb = fit_powerlaw(b, 1e-3, 1e-1);
    EXPECT_NEAR(fb.exponent, -1.5, 1e-12);
    EXPECT_NEAR(fb.intercept, std::log(7.0), 1e-10);
}

TEST(Fits, RejectsBadWindows) {
    const Series s = sample(0, 1, 10, [](double t) { return 1 + t; });
    EXPECT_THROW(fit_exponential(s, 0.0, 0.3), std::invalid_argument);  // four samples
    Series z = s;
    z[5].second = 0.0;
    EXPECT_THROW(fit_exponential(z, 0, 1), std::invalid_argument);
    EXPECT_THROW(fit_powerlaw(s, 0, 1), std::invalid_argument);  // t = 0 in a log fit
    EXPECT_THROW(log_spaced(1.0, 0.5, 4), std::invalid_argument);
}

TEST(Fits, FokkerPlanckDecayMatchesGap) {
    const GridSpec g{};
    const LinearPropagator prop(g, Model::FP);
    const Trajectory tr = record_uniform(prop, random_field(g, 42), 0.1, 200);
    Series s;
    for (std::size_t i = 0; i < tr.times.size(); ++i) s.emplace_back(tr.times[i], tr.states[i].norm());
    const RateFit fit = fit_exponential(s, 5, 20);
    const SpectralGap gap = spectral_gap(g, Model::FP);
    EXPECT_GT(fit.exponent, 0.0);
    EXPECT_TRUE(fit.conclusive());
    EXPECT_NEAR(fit.exponent, gap.gap, 0.05 * gap.gap);
    EXPECT_LT(tr.max_tail_fraction(), kTailLimit);
}

TEST(Fits, RoughDataRatesAgreeWithKolmogorovOracle) {
    const GridSpec g{192, 256};
    const LinearPropagator prop(g, Model::FP);
    const Trajectory tr = record_times(prop, rough_in_x_field(g, 0.01), log_spaced(0.05, 0.5, 16));
    Series sv, sx;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const H1Parts p = h1_parts(tr.states[i]);
        sv.emplace_back(tr.times[i], std::sqrt(p.dv_sq));
        sx.emplace_back(tr.times[i], std::sqrt(p.dx_sq));
    }
    const RateFit fv = fit_powerlaw(sv, 0.05, 0.5), fx = fit_powerlaw(sx, 0.05, 0.5);
    EXPECT_GE(fv.exponent, -0.6);
    EXPECT_LE(fv.exponent, -0.4);
    EXPECT_GE(fx.exponent, -1.6);
    EXPECT_LE(fx.exponent, -1.4);
    EXPECT_LT(tr.max_tail_fraction(), kTailLimit);

    const FkRateResult fk = fk_rate_experiment(1.0);
    EXPECT_NEAR(fx.exponent, fk.fit_x.exponent, 0.1);
    EXPECT_NEAR(fv.exponent, fk.fit_v.exponent, 0.1);
}

TEST(Gap, ZeroModeSpectra) {
    const GridSpec g{4, 10};
    const SpectralGap fp = spectral_gap(g, Model::FP);
    const auto& z = fp.per_xi[g.n_xi];
    ASSERT_EQ(z.size(), 11u);
    for (int n = 0; n <= 10; ++n) EXPECT_EQ(z[n], cplx(n, 0));
    const SpectralGap bl = spectral_gap(g, Model::BL);
    for (const cplx& e : bl.per_xi[g.n_xi]) EXPECT_TRUE(e == cplx(0) || e == cplx(1));
    EXPECT_EQ(bl.per_xi[g.n_xi].front(), cplx(0));
    EXPECT_GT(fp.gap, 0.0);
    EXPECT_GT(bl.gap, 0.0);
}

TEST(Gap, ConjugateModesMirror) {
    const GridSpec g{5, 12};
    const SpectralGap sg = spectral_gap(g, Model::FP);
    for (int xi = 1; xi <= 5; ++xi) {
        const auto& p = sg.per_xi[g.n_xi + xi];
        const auto& q = sg.per_xi[g.n_xi - xi];
        const double sp = std::accumulate(p.begin(), p.end(), 0.0, [](double a, cplx z) { return a + z.real(); });
        const double sq = std::accumulate(q.begin(), q.end(), 0.0, [](double a, cplx z) { return a + z.real(); });
        EXPECT_NEAR(sp, sq, 1e-9);
        // The trace of P_ξ is the sum of the collision rates.
        EXPECT_NEAR(sp, 12.0 * 13.0 / 2.0, 1e-8);
    }
}

TEST(Gap, StableUnderHermiteRefinement) {
    const double g32 = spectral_gap(GridSpec{8, 32}, Model::FP).gap;
    const double g48 = spectral_gap(GridSpec{8, 48}, Model::FP).gap;
    EXPECT_NEAR(g32, g48, 0.01 * g48);
}
