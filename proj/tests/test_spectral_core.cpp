#include <hypokinetic/evolve.hpp>
#include <hypokinetic/initial_data.hpp>
#include <hypokinetic/spectral_core.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

using namespace hypokinetic;

namespace {

// Orthonormal probabilists' Hermite functions written out by hand, so the
// ladder checks do not reuse the library recursion.
double he_normalized(int n, double v) {
    switch (n) {
        case 0: return 1.0;
        case 1: return v;
        case 2: return (v * v - 1.0) / std::sqrt(2.0);
        case 3: return (v * v * v - 3.0 * v) / std::sqrt(6.0);
        case 4: return (v * v * v * v - 6.0 * v * v + 3.0) / std::sqrt(24.0);
    }
    throw std::logic_error("he_normalized: n out of range");
}

SpectralField random_complex_field(const GridSpec& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0, 1);
    SpectralField f(g);
    for (int xi = -g.n_xi; xi <= g.n_xi; ++xi)
        for (int n = 0; n <= g.n_v; ++n) f(xi, n) = {N(rng), N(rng)};
    return f;
}

}  // namespace

TEST(Ladder, NvOneMatrices) {
    const Ladder L = hermite_ladder(1);
    RMatrix A(2, 2), Ad(2, 2);
    A << 0, 1, 0, 0;
    Ad << 0, 0, 1, 0;
    EXPECT_EQ(L.A, A);
    EXPECT_EQ(L.Adag, Ad);
}

TEST(Ladder, NvTwoRaisingSubdiagonal) {
    const Ladder L = hermite_ladder(2);
    EXPECT_DOUBLE_EQ(L.Adag(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(L.Adag(2, 1), std::sqrt(2.0));
    EXPECT_EQ(L.Adag, L.A.transpose());
}

TEST(Ladder, NumberOperatorIsDiagonal) {
    for (int nv : {2, 5, 17}) {
        const Ladder L = hermite_ladder(nv);
        const RMatrix N = L.Adag * L.A;
        for (int i = 0; i <= nv; ++i)
            for (int j = 0; j <= nv; ++j) EXPECT_NEAR(N(i, j), i == j ? double(i) : 0.0, 1e-14);
    }
}

TEST(Ladder, MatchesFiniteDifferenceDerivatives) {
    // A should act as d/dv and A†A as (−d/dv + v) d/dv on the Hermite functions.
    const int nv = 4;
    const Ladder L = hermite_ladder(nv);
    const double h = 1e-3;
    for (double v : {-2.3, -0.7, 0.0, 0.4, 1.9}) {
        for (int n = 0; n <= nv; ++n) {
            const double up = he_normalized(n, v + h), um = he_normalized(n, v - h), u0 = he_normalized(n, v);
            const double d1 = (up - um) / (2 * h);
            const double d2 = (up - 2 * u0 + um) / (h * h);
            double lowered = 0.0;
            for (int m = 0; m <= nv; ++m) lowered += L.A(m, n) * he_normalized(m, v);
            EXPECT_NEAR(lowered, d1, 1e-5) << "n=" << n << " v=" << v;
            EXPECT_NEAR(-d2 + v * d1, double(n) * u0, 1e-4) << "n=" << n << " v=" << v;
        }
    }
}

TEST(Ladder, RejectsTinyTruncation) {
    EXPECT_THROW(hermite_ladder(0), std::invalid_argument);
    EXPECT_THROW(hermite_ladder(GridSpec{4, 1}), std::invalid_argument);
}

TEST(Ladder, LibraryHermiteValuesAgreeWithExplicitPolynomials) {
    double vals[5];
    for (double v : {-1.5, 0.3, 2.2}) {
        hermite_values(4, v, vals);
        for (int n = 0; n <= 4; ++n) EXPECT_NEAR(vals[n], he_normalized(n, v), 1e-13);
    }
}

TEST(Generator, ZeroModeIsCollisionSpectrum) {
    const GridSpec g{4, 6};
    const ModeGenerator fp = assemble_generator(g, "FP", 0);
    const ModeGenerator bl = assemble_generator(g, "BL", 0);
    for (int i = 0; i <= 6; ++i)
        for (int j = 0; j <= 6; ++j) {
            EXPECT_EQ(fp.generator(i, j), (i == j ? cplx(i, 0) : cplx{}));
            EXPECT_EQ(bl.generator(i, j), (i == j ? cplx(i == 0 ? 0 : 1, 0) : cplx{}));
        }
}

TEST(Generator, FpModeOneSmallestTruncation) {
    const ModeGenerator G = assemble_mode(Model::FP, 1, 1);
    EXPECT_EQ(G.transport(0, 0), cplx{});
    EXPECT_EQ(G.transport(0, 1), I);
    EXPECT_EQ(G.transport(1, 0), I);
    EXPECT_EQ(G.transport(1, 1), cplx{});
}

TEST(Generator, RejectsBadInput) {
    const GridSpec g{4, 6};
    EXPECT_THROW(assemble_generator(g, "XX", 0), std::invalid_argument);
    EXPECT_THROW(assemble_generator(g, Model::FP, 5), std::out_of_range);
    EXPECT_THROW(assemble_generator(g, Model::FP, -5), std::out_of_range);
    EXPECT_THROW(assemble_generator(GridSpec{0, 6}, Model::FP, 0), std::invalid_argument);
}

TEST(Generator, StructuralInvariants) {
    const GridSpec g{6, 12};
    std::mt19937_64 rng(7);
    std::normal_distribution<double> N(0, 1);
    for (Model m : {Model::FP, Model::BL}) {
        for (const ModeGenerator& G : assemble_all(g, m)) {
            EXPECT_LE((G.transport + G.transport.adjoint()).cwiseAbs().maxCoeff(), 1e-15);
            const RMatrix& L = G.collision;
            EXPECT_EQ(L, L.transpose());
            EXPECT_EQ(L(0, 0), 0.0);
            for (int n = 1; n < G.dim(); ++n) EXPECT_LT(L(n, n), 0.0);
            // The Hermitian part of P is −L, whose smallest nonzero eigenvalue is 1.
            const CMatrix herm = (G.generator + G.generator.adjoint()) / 2.0;
            for (int n = 0; n < G.dim(); ++n) EXPECT_NEAR(herm(n, n).real(), collision_rate(m, n), 1e-15);
            EXPECT_NEAR(herm(1, 1).real(), 1.0, 1e-15);
            for (int trial = 0; trial < 5; ++trial) {
                CVector u(G.dim());
                for (auto& z : u) z = {N(rng), N(rng)};
                EXPECT_GE(u.dot(G.generator * u).real(), -1e-12);
            }
            EXPECT_LE((G.tri.apply(CVector::Ones(G.dim())) - G.generator * CVector::Ones(G.dim())).norm(), 1e-13);
        }
    }
}

TEST(Commutator, ZeroModeVanishes) {
    EXPECT_EQ(commutator_check(8, 0, true), 0.0);
    EXPECT_EQ(commutator_check(8, 0, false), 0.0);
}

TEST(Commutator, RestrictedColumnsExact) {
    EXPECT_EQ(commutator_check(8, 3, true), 0.0);
    for (int nv : {2, 16, 48})
        for (int xi : {-7, 1, 12}) EXPECT_EQ(commutator_check(nv, xi, true), 0.0);
}

TEST(Commutator, UnrestrictedTruncationCorner) {
    const int nv = 8, xi = 3;
    const Ladder L = hermite_ladder(nv);
    const CMatrix A = L.A.cast<cplx>();
    const CMatrix T = cplx(0, xi) * (L.A + L.Adag).cast<cplx>();
    CMatrix C = A * T - T * A - cplx(0, xi) * CMatrix::Identity(nv + 1, nv + 1);
    EXPECT_NEAR(std::abs(C(nv, nv)), 3.0 * (nv + 1), 1e-12);
    C(nv, nv) = 0.0;
    EXPECT_LE(C.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(commutator_check(nv, xi, false), 3.0 * (nv + 1), 1e-12);
}

TEST(MicroMacro, DocumentedExample) {
    SpectralField f(GridSpec{2, 4});
    f(1, 0) = 2.0;
    f(1, 1) = 3.0;
    const MacroFields mm = micro_macro(f);
    EXPECT_EQ(mm.r(1 + 2), cplx(2.0));
    EXPECT_EQ(mm.m(1 + 2), cplx(3.0));
    EXPECT_EQ(mm.h(1, 0), cplx{});
    EXPECT_EQ(mm.h(1, 1), cplx(3.0));
    for (int n = 2; n <= 4; ++n) EXPECT_EQ(mm.h(1, n), cplx{});
}

TEST(MicroMacro, PureDensityHasNoMicroPart) {
    SpectralField f(GridSpec{3, 4});
    for (int xi = -3; xi <= 3; ++xi) f(xi, 0) = cplx(xi, 1.0);
    const MacroFields mm = micro_macro(f);
    EXPECT_EQ(mm.h.norm(), 0.0);
    EXPECT_EQ(mm.m.norm(), 0.0);
}

TEST(MicroMacro, OrthogonalSplitting) {
    const GridSpec g{5, 10};
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const SpectralField f = random_complex_field(g, seed);
        const MacroFields mm = micro_macro(f);
        EXPECT_NEAR(f.norm_sq(), mm.r.squaredNorm() + mm.h.norm_sq(), 1e-12 * f.norm_sq());
        SpectralField rf(g);
        for (int xi = -g.n_xi; xi <= g.n_xi; ++xi) rf(xi, 0) = mm.r(xi + g.n_xi);
        EXPECT_EQ(inner_re(rf, mm.h), 0.0);
        EXPECT_LE(mm.m.norm(), mm.h.norm());
    }
}

TEST(MacroResidual, ZeroFieldAndZeroModeOnly) {
    const GridSpec g{3, 6};
    std::vector<SpectralField> series(4, SpectralField(g));
    const MacroResidual z = macroscopic_residual(series, 0.1, Model::FP);
    EXPECT_EQ(z.res_r, 0.0);
    EXPECT_EQ(z.res_m, 0.0);

    SpectralField f(g);
    f(0, 1) = 0.5;
    f(0, 2) = 0.3;
    const LinearPropagator prop(g, Model::FP);
    const Trajectory tr = record_uniform(prop, f, 0.01, 10);
    EXPECT_EQ(macroscopic_residual(tr.states, 0.01, Model::FP).res_r, 0.0);
}

TEST(MacroResidual, FirstOrderInTimeStep) {
    const GridSpec g{4, 16};
    const SpectralField f0 = random_field(g, 11);
    const LinearPropagator prop(g, Model::FP);
    const double horizon = 0.2;
    double prev_r = 0, prev_m = 0;
    for (int k = 0; k < 3; ++k) {
        const double dt = 2e-3 / (1 << k);
        const int steps = static_cast<int>(std::lround(horizon / dt));
        const MacroResidual res = macroscopic_residual(record_uniform(prop, f0, dt, steps).states, dt, Model::FP);
        if (k > 0) {
            EXPECT_NEAR(prev_r / res.res_r, 2.0, 0.4);
            EXPECT_NEAR(prev_m / res.res_m, 2.0, 0.4);
        }
        prev_r = res.res_r;
        prev_m = res.res_m;
    }
}

TEST(MacroResidual, RejectsShortSeries) {
    const GridSpec g{3, 6};
    std::vector<SpectralField> two(2, SpectralField(g));
    EXPECT_THROW(macroscopic_residual(two, 0.1, Model::FP), std::invalid_argument);
}

TEST(Field, TailFractionAndReality) {
    const GridSpec g{3, 6};
    EXPECT_EQ(tail_fraction(SpectralField(g)), 0.0);
    SpectralField f(g);
    f(1, 0) = 1.0;
    f(1, 6) = 1.0;
    EXPECT_DOUBLE_EQ(tail_fraction(f), 0.5);
    EXPECT_EQ(random_field(g, 3).reality_defect(), 0.0);
    EXPECT_EQ(random_field(g, 3).mean(), cplx{});
}

TEST(Snapshot, ByteLayout) {
    SpectralField f(GridSpec{1, 2});
    f(-1, 0) = {1.5, -2.0};
    f(1, 2) = {0.25, 4.0};
    std::stringstream ss;
    write_snapshot(ss, f, 3.5);
    const std::string bytes = ss.str();
    ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 4 + 8 + 3 * 3 * 16);
    EXPECT_EQ(bytes.substr(0, 4), "HFKS");
    std::uint32_t version;
    std::int32_t nxi, nv;
    double t, first_re, first_im, last_im;
    std::memcpy(&version, bytes.data() + 4, 4);
    std::memcpy(&nxi, bytes.data() + 8, 4);
    std::memcpy(&nv, bytes.data() + 12, 4);
    std::memcpy(&t, bytes.data() + 16, 8);
    std::memcpy(&first_re, bytes.data() + 24, 8);
    std::memcpy(&first_im, bytes.data() + 32, 8);
    std::memcpy(&last_im, bytes.data() + bytes.size() - 8, 8);
    EXPECT_EQ(version, 1u);
    EXPECT_EQ(nxi, 1);
    EXPECT_EQ(nv, 2);
    EXPECT_EQ(t, 3.5);
    EXPECT_EQ(first_re, 1.5);
    EXPECT_EQ(first_im, -2.0);
    EXPECT_EQ(last_im, 4.0);
}

TEST(Snapshot, RoundTripIsExact) {
    const GridSpec g{5, 9};
    const SpectralField f = random_complex_field(g, 99);
    std::stringstream ss;
    write_snapshot(ss, f, 0.125);
    const Snapshot s = read_snapshot(ss);
    EXPECT_EQ(s.time, 0.125);
    ASSERT_EQ(s.field.grid(), g);
    EXPECT_EQ(s.field.coeffs(), f.coeffs());
}

TEST(Snapshot, RejectsCorruptInput) {
    std::stringstream bad("HFKX0000");
    EXPECT_THROW(read_snapshot(bad), std::runtime_error);
    SpectralField f(GridSpec{1, 2});
    std::stringstream ss;
    write_snapshot(ss, f, 0.0);
    std::stringstream truncated(ss.str().substr(0, 40));
    EXPECT_THROW(read_snapshot(truncated), std::runtime_error);
}
