#pragma once

// Hermite–Fourier discretization of perturbations f(x, v) on T × R.
//
// A field is stored as coefficients f̂[ξ][n] of e^{iξx} H_n(v), where H_n are
// the Hermite functions orthonormal in L²(dν) for the unit Gaussian ν and
// x ∈ [0, 2π) carries the normalized measure dx/2π.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hypokinetic {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr cplx I{0.0, 1.0};

struct GridSpec {
    int n_xi = 16;
    int n_v = 48;

    static constexpr double torus_period = 2.0 * std::numbers::pi;
    /// Smallest nonzero eigenvalue of −Δ_x on the 2π-torus.
    static constexpr double poincare_constant = 1.0;

    int modes() const { return 2 * n_xi + 1; }
    int dim() const { return n_v + 1; }

    void validate() const {
        if (n_xi < 1) throw std::invalid_argument("GridSpec: n_xi must be >= 1, got " + std::to_string(n_xi));
        if (n_v < 2) throw std::invalid_argument("GridSpec: n_v must be >= 2, got " + std::to_string(n_v));
    }
    bool operator==(const GridSpec&) const = default;
};

enum class Model { FP, BL };

inline Model parse_model(std::string_view tag) {
    if (tag == "FP") return Model::FP;
    if (tag == "BL") return Model::BL;
    throw std::invalid_argument("unknown model tag '" + std::string(tag) + "' (expected FP or BL)");
}

inline std::string to_string(Model m) { return m == Model::FP ? "FP" : "BL"; }

class SpectralField {
public:
    using Storage = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    SpectralField() = default;
    explicit SpectralField(const GridSpec& g) : grid_(g), c_(Storage::Zero(g.modes(), g.dim())) {}

    const GridSpec& grid() const { return grid_; }
    int n_xi() const { return grid_.n_xi; }
    int n_v() const { return grid_.n_v; }

    cplx& operator()(int xi, int n) { return c_(xi + grid_.n_xi, n); }
    const cplx& operator()(int xi, int n) const { return c_(xi + grid_.n_xi, n); }

    /// Hermite coefficient vector of mode ξ.
    CVector mode(int xi) const { return c_.row(xi + grid_.n_xi).transpose(); }
    void set_mode(int xi, const CVector& u) { c_.row(xi + grid_.n_xi) = u.transpose(); }

    Storage& coeffs() { return c_; }
    const Storage& coeffs() const { return c_; }

    double norm_sq() const { return c_.squaredNorm(); }
    double norm() const { return std::sqrt(norm_sq()); }

    SpectralField& operator+=(const SpectralField& o) { c_ += o.c_; return *this; }
    SpectralField& operator-=(const SpectralField& o) { c_ -= o.c_; return *this; }
    SpectralField& operator*=(cplx a) { c_ *= a; return *this; }
    friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
    friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
    friend SpectralField operator*(cplx a, SpectralField b) { return b *= a; }

    /// Largest |f̂[−ξ][n] − conj(f̂[ξ][n])|, zero for fields representing real f.
    double reality_defect() const {
        double d = 0.0;
        for (int xi = 0; xi <= grid_.n_xi; ++xi)
            for (int n = 0; n <= grid_.n_v; ++n)
                d = std::max(d, std::abs((*this)(-xi, n) - std::conj((*this)(xi, n))));
        return d;
    }

    /// Global mean ⟨f⟩ = f̂[0][0].
    cplx mean() const { return (*this)(0, 0); }

private:
    GridSpec grid_{};
    Storage c_;
};

/// Re⟨f, g⟩ = Re Σ f̂ conj(ĝ).
inline double inner_re(const SpectralField& f, const SpectralField& g) {
    return (f.coeffs().array() * g.coeffs().array().conjugate()).real().sum();
}

// ---------------------------------------------------------------------------
// Ladder operators

struct Ladder {
    RMatrix A;     ///< lowering, realizes ∂_v
    RMatrix Adag;  ///< raising, realizes −∂_v + v
};

/// Ladder matrices of size (n_v+1)² for any n_v ≥ 1.
inline Ladder hermite_ladder(int n_v) {
    if (n_v < 1) throw std::invalid_argument("hermite_ladder: n_v must be >= 1");
    const int d = n_v + 1;
    Ladder L{RMatrix::Zero(d, d), RMatrix::Zero(d, d)};
    for (int n = 1; n < d; ++n) {
        L.A(n - 1, n) = std::sqrt(static_cast<double>(n));
        L.Adag(n, n - 1) = std::sqrt(static_cast<double>(n));
    }
    return L;
}

inline Ladder hermite_ladder(const GridSpec& g) {
    g.validate();
    return hermite_ladder(g.n_v);
}

/// Applies the lowering operator to one Hermite vector.
inline CVector apply_lowering(const CVector& u) {
    const int d = static_cast<int>(u.size());
    CVector out = CVector::Zero(d);
    for (int n = 0; n + 1 < d; ++n) out(n) = std::sqrt(static_cast<double>(n + 1)) * u(n + 1);
    return out;
}

/// Applies the raising operator; the top coefficient is truncated away.
inline CVector apply_raising(const CVector& u) {
    const int d = static_cast<int>(u.size());
    CVector out = CVector::Zero(d);
    for (int n = 1; n < d; ++n) out(n) = std::sqrt(static_cast<double>(n)) * u(n - 1);
    return out;
}

// ---------------------------------------------------------------------------
// Per-mode generator P_ξ = iξ(A + A†) − L

/// Eigenvalues of −L on H_n.
inline double collision_rate(Model m, int n) {
    if (n == 0) return 0.0;
    return m == Model::FP ? static_cast<double>(n) : 1.0;
}

/// Tridiagonal storage of a generator: P u = sub·u[n−1] + diag·u[n] + sup·u[n+1].
struct Tridiagonal {
    CVector sub;   ///< sub(n) = P(n+1, n), size d−1
    CVector diag;  ///< size d
    CVector sup;   ///< sup(n) = P(n, n+1), size d−1

    int dim() const { return static_cast<int>(diag.size()); }

    CVector apply(const CVector& u) const {
        const int d = dim();
        CVector y(d);
        for (int n = 0; n < d; ++n) {
            cplx acc = diag(n) * u(n);
            if (n > 0) acc += sub(n - 1) * u(n - 1);
            if (n + 1 < d) acc += sup(n) * u(n + 1);
            y(n) = acc;
        }
        return y;
    }

    /// Induced 1-norm (largest absolute column sum).
    double norm1() const {
        const int d = dim();
        double best = 0.0;
        for (int n = 0; n < d; ++n) {
            double col = std::abs(diag(n));
            if (n > 0) col += std::abs(sup(n - 1));
            if (n + 1 < d) col += std::abs(sub(n));
            best = std::max(best, col);
        }
        return best;
    }
};

struct ModeGenerator {
    int xi = 0;
    Model model = Model::FP;
    CMatrix transport;  ///< iξ(A + A†)
    RMatrix collision;  ///< L, negative semidefinite and diagonal
    CMatrix generator;  ///< transport − collision
    Tridiagonal tri;    ///< same generator in banded form

    int dim() const { return static_cast<int>(generator.rows()); }
    bool is_diagonal() const { return xi == 0; }
};

/// Generator for mode ξ with Hermite truncation n_v ≥ 1; no GridSpec range checks.
inline ModeGenerator assemble_mode(Model model, int xi, int n_v) {
    const Ladder L = hermite_ladder(n_v);
    const int d = n_v + 1;
    ModeGenerator G;
    G.xi = xi;
    G.model = model;
    G.transport = (I * static_cast<double>(xi)) * (L.A + L.Adag).cast<cplx>();
    G.collision = RMatrix::Zero(d, d);
    for (int n = 0; n < d; ++n) G.collision(n, n) = -collision_rate(model, n);
    G.generator = G.transport - G.collision.cast<cplx>();
    G.tri.sub.resize(d - 1);
    G.tri.sup.resize(d - 1);
    G.tri.diag.resize(d);
    for (int n = 0; n < d; ++n) G.tri.diag(n) = G.generator(n, n);
    for (int n = 0; n + 1 < d; ++n) {
        G.tri.sub(n) = G.generator(n + 1, n);
        G.tri.sup(n) = G.generator(n, n + 1);
    }
    return G;
}

inline ModeGenerator assemble_generator(const GridSpec& grid, Model model, int xi) {
    grid.validate();
    if (std::abs(xi) > grid.n_xi)
        throw std::out_of_range("assemble_generator: |xi| = " + std::to_string(std::abs(xi)) +
                                " exceeds n_xi = " + std::to_string(grid.n_xi));
    return assemble_mode(model, xi, grid.n_v);
}

inline ModeGenerator assemble_generator(const GridSpec& grid, std::string_view model_tag, int xi) {
    return assemble_generator(grid, parse_model(model_tag), xi);
}

/// All generators of a grid, indexed by ξ + n_xi.
inline std::vector<ModeGenerator> assemble_all(const GridSpec& grid, Model model) {
    grid.validate();
    std::vector<ModeGenerator> out;
    out.reserve(grid.modes());
    for (int xi = -grid.n_xi; xi <= grid.n_xi; ++xi) out.push_back(assemble_mode(model, xi, grid.n_v));
    return out;
}

/// Residual of [∂_v, v∂_x] = ∂_x in mode ξ: the spectral norm of
/// [A, iξ(A+A†)] − iξ·Id, over the columns n ≤ n_v−1 when `restricted`.
///
/// Every product entry of a ladder matrix with a tridiagonal ladder sum is a
/// single term √a·√b, evaluated as √(ab) of the integer radicand product, so
/// diagonal terms come out as exact integers and interior cancellation is exact.
inline double commutator_check(int n_v, int xi, bool restricted = true) {
    if (n_v < 1) throw std::invalid_argument("commutator_check: n_v must be >= 1");
    const int d = n_v + 1;
    auto rad = [](long a, long b) { return std::sqrt(static_cast<double>(a) * static_cast<double>(b)); };
    // X = A + A†: X(i, i+1) = √(i+1), X(i+1, i) = √(i+1); A(i, i+1) = √(i+1).
    RMatrix C = RMatrix::Zero(d, d);  // [A, X] with the identity subtracted
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            double ax = 0.0, xa = 0.0;
            // (A X)(i, j) = A(i, i+1) X(i+1, j)
            if (i + 1 < d) {
                if (j == i) ax = rad(i + 1, i + 1);
                else if (j == i + 2) ax = rad(i + 1, i + 2);
            }
            // (X A)(i, j) = X(i, j−1) A(j−1, j)
            if (j >= 1) {
                if (i == j) xa = rad(j, j);
                else if (i == j - 2) xa = rad(i + 1, j);
            }
            C(i, j) = ax - xa - (i == j ? 1.0 : 0.0);
        }
    }
    const int cols = restricted ? d - 1 : d;
    RMatrix block = std::abs(xi) * C.leftCols(cols);
    if (block.cwiseAbs().maxCoeff() == 0.0) return 0.0;
    Eigen::JacobiSVD<RMatrix> svd(block);
    return svd.singularValues()(0);
}

inline double commutator_check(const GridSpec& grid, int xi, bool restricted = true) {
    return commutator_check(grid.n_v, xi, restricted);
}

// ---------------------------------------------------------------------------
// Micro-macro decomposition

struct MacroFields {
    CVector r;  ///< r̂(ξ) = f̂[ξ][0], indexed by ξ + n_xi
    CVector m;  ///< m̂(ξ) = f̂[ξ][1]
    SpectralField h;
};

inline MacroFields micro_macro(const SpectralField& f) {
    const GridSpec& g = f.grid();
    MacroFields out{CVector(g.modes()), CVector(g.modes()), f};
    for (int xi = -g.n_xi; xi <= g.n_xi; ++xi) {
        out.r(xi + g.n_xi) = f(xi, 0);
        out.m(xi + g.n_xi) = g.n_v >= 1 ? f(xi, 1) : cplx{};
        out.h(xi, 0) = 0.0;
    }
    return out;
}

struct MacroResidual {
    double res_r = 0.0;
    double res_m = 0.0;
};

/// Residuals of the macroscopic equations
///   ∂_t r̂ + iξ m̂ = 0,   ∂_t m̂ + iξ r̂ + iξ√2 ĥ₂ + m̂ = 0
/// with forward differences on a fixed-step series. The −m̂ source is the
/// collision rate of H₁, which is 1 for both models.
inline MacroResidual macroscopic_residual(const std::vector<SpectralField>& series, double dt, Model model) {
    if (series.size() < 3) throw std::invalid_argument("macroscopic_residual: need at least 3 samples");
    if (!(dt > 0)) throw std::invalid_argument("macroscopic_residual: dt must be positive");
    const GridSpec& g = series.front().grid();
    if (g.n_v < 2) throw std::invalid_argument("macroscopic_residual: n_v must be >= 2");
    const double rate1 = collision_rate(model, 1);
    MacroResidual out;
    for (std::size_t k = 0; k + 1 < series.size(); ++k) {
        const SpectralField& a = series[k];
        const SpectralField& b = series[k + 1];
        double sr = 0.0, sm = 0.0;
        for (int xi = -g.n_xi; xi <= g.n_xi; ++xi) {
            const cplx ixi = I * static_cast<double>(xi);
            const cplx dr = (b(xi, 0) - a(xi, 0)) / dt + ixi * a(xi, 1);
            const cplx dm = (b(xi, 1) - a(xi, 1)) / dt + ixi * a(xi, 0) + ixi * std::sqrt(2.0) * a(xi, 2) +
                            rate1 * a(xi, 1);
            sr += std::norm(dr);
            sm += std::norm(dm);
        }
        out.res_r = std::max(out.res_r, std::sqrt(sr));
        out.res_m = std::max(out.res_m, std::sqrt(sm));
    }
    return out;
}

/// Σ_{n ≥ n_v−1} |f̂|² / ‖f‖², zero for the zero field.
inline double tail_fraction(const SpectralField& f) {
    const double total = f.norm_sq();
    if (total == 0.0) return 0.0;
    const int n0 = std::max(0, f.n_v() - 1);
    return f.coeffs().rightCols(f.n_v() + 1 - n0).squaredNorm() / total;
}

inline constexpr double kTailLimit = 1e-8;

// ---------------------------------------------------------------------------
// Point evaluation

/// Values H_0(v), …, H_{n_v}(v) of the L²(dν)-orthonormal Hermite functions.
inline void hermite_values(int n_v, double v, double* out) {
    out[0] = 1.0;
    if (n_v >= 1) out[1] = v;
    for (int n = 1; n < n_v; ++n)
        out[n + 1] = (v * out[n] - std::sqrt(static_cast<double>(n)) * out[n - 1]) / std::sqrt(static_cast<double>(n + 1));
}

// ---------------------------------------------------------------------------
// Snapshot format: "HFKS", u32 version, i32 n_xi, i32 n_v, f64 time, then
// (2n_xi+1)(n_v+1) complex128 values, row-major [ξ asc][n asc], little-endian.

namespace detail {
template <class T>
void put_le(std::ostream& os, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}
template <class T>
T get_le(std::istream& is) {
    unsigned char bytes[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw std::runtime_error("snapshot: truncated file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}
}  // namespace detail

inline constexpr std::uint32_t kSnapshotVersion = 1;

inline void write_snapshot(std::ostream& os, const SpectralField& f, double time) {
    os.write("HFKS", 4);
    detail::put_le<std::uint32_t>(os, kSnapshotVersion);
    detail::put_le<std::int32_t>(os, f.n_xi());
    detail::put_le<std::int32_t>(os, f.n_v());
    detail::put_le<double>(os, time);
    for (int xi = -f.n_xi(); xi <= f.n_xi(); ++xi)
        for (int n = 0; n <= f.n_v(); ++n) {
            detail::put_le<double>(os, f(xi, n).real());
            detail::put_le<double>(os, f(xi, n).imag());
        }
}

inline void write_snapshot(const std::string& path, const SpectralField& f, double time) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("snapshot: cannot open " + path);
    write_snapshot(os, f, time);
}

struct Snapshot {
    SpectralField field;
    double time = 0.0;
};

inline Snapshot read_snapshot(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::string_view(magic, 4) != "HFKS") throw std::runtime_error("snapshot: bad magic");
    const auto version = detail::get_le<std::uint32_t>(is);
    if (version != kSnapshotVersion) throw std::runtime_error("snapshot: unsupported version " + std::to_string(version));
    GridSpec g{detail::get_le<std::int32_t>(is), detail::get_le<std::int32_t>(is)};
    if (g.n_xi < 0 || g.n_v < 0) throw std::runtime_error("snapshot: negative grid size");
    Snapshot s{SpectralField(g), detail::get_le<double>(is)};
    for (int xi = -g.n_xi; xi <= g.n_xi; ++xi)
        for (int n = 0; n <= g.n_v; ++n) {
            const double re = detail::get_le<double>(is);
            const double im = detail::get_le<double>(is);
            s.field(xi, n) = {re, im};
        }
    return s;
}

inline Snapshot read_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("snapshot: cannot open " + path);
    return read_snapshot(is);
}

}  // namespace hypokinetic
