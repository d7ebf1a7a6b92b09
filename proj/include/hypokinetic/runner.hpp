#pragma once

// Preset pipelines. Each run builds its data, evolves it, measures, and
// compares against the contract of the corresponding result, writing CSV,
// snapshots, fitted rates and a verdict file into the output directory.

#include "config.hpp"
#include "entropy.hpp"
#include "evolve.hpp"
#include "fk_oracle.hpp"
#include "initial_data.hpp"
#include "mvpfp.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace hypokinetic {

enum class Status { Pass, Fail, Invalid };

inline const char* to_string(Status s) { return s == Status::Pass ? "PASS" : s == Status::Fail ? "FAIL" : "INVALID"; }

struct Criterion {
    std::string name;
    Status status = Status::Pass;
    double measured = 0.0;
    double contract = 0.0;
    double tolerance = 0.0;
    std::string relation;  ///< how measured is compared with contract
    std::string note;
};

struct VerdictReport {
    std::string preset, model;
    std::uint64_t seed = 0;
    std::vector<Criterion> criteria;

    Status overall() const {
        Status s = Status::Pass;
        for (const auto& c : criteria) {
            if (c.status == Status::Invalid) return Status::Invalid;
            if (c.status == Status::Fail) s = Status::Fail;
        }
        return s;
    }
    int exit_code() const {
        switch (overall()) {
            case Status::Pass: return 0;
            case Status::Fail: return 2;
            case Status::Invalid: return 3;
        }
        return 1;
    }

    /// measured ≤ contract + tolerance
    Criterion& at_most(std::string name, double measured, double contract, double tol = 0.0) {
        return push({std::move(name), measured <= contract + tol ? Status::Pass : Status::Fail, measured, contract, tol, "<=", ""});
    }
    /// measured ≥ contract − tolerance
    Criterion& at_least(std::string name, double measured, double contract, double tol = 0.0) {
        return push({std::move(name), measured >= contract - tol ? Status::Pass : Status::Fail, measured, contract, tol, ">=", ""});
    }
    /// measured > contract
    Criterion& above(std::string name, double measured, double contract) {
        return push({std::move(name), measured > contract ? Status::Pass : Status::Fail, measured, contract, 0.0, ">", ""});
    }
    /// |measured − contract| ≤ tolerance
    Criterion& near(std::string name, double measured, double contract, double tol) {
        return push({std::move(name), std::abs(measured - contract) <= tol ? Status::Pass : Status::Fail, measured, contract, tol, "~", ""});
    }
    /// Validity flag: measured < limit or the whole run is INVALID.
    Criterion& valid_below(std::string name, double measured, double limit) {
        return push({std::move(name), measured < limit ? Status::Pass : Status::Invalid, measured, limit, 0.0, "<", ""});
    }
    Criterion& push(Criterion c) {
        criteria.push_back(std::move(c));
        return criteria.back();
    }

    void write(std::ostream& os) const {
        os << std::setprecision(10);
        os << "preset=" << preset << "\nmodel=" << model << "\nseed=" << seed << "\noverall=" << to_string(overall()) << '\n';
        for (const auto& c : criteria) {
            os << to_string(c.status) << ' ' << c.name << " measured=" << c.measured << " contract=" << c.relation << c.contract
               << " tolerance=" << c.tolerance;
            if (!c.note.empty()) os << " note=\"" << c.note << '"';
            os << '\n';
        }
    }
};

namespace detail {

inline std::string run_file(const std::string& stem, int i, const char* ext) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%03d", i);
    return stem + buf + ext;
}

/// Largest relative slope of v after removing the allowed decay e^{−rate·t}:
/// max_i (v_{i+1} − v_i e^{−rate Δ}) / (Δ · v_i). Zero-valued samples are skipped.
inline double decay_defect(const std::vector<double>& t, const std::vector<double>& v, double rate) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        if (v[i] == 0.0) continue;
        const double dt = t[i + 1] - t[i];
        worst = std::max(worst, (v[i + 1] - v[i] * std::exp(-rate * dt)) / (dt * std::abs(v[i])));
    }
    return std::isfinite(worst) ? worst : 0.0;
}

template <class Get>
std::vector<double> column(const Trajectory& tr, Get get) {
    std::vector<double> out;
    for (const auto& r : tr.reports) out.push_back(get(r));
    return out;
}

inline void write_rates(const std::string& dir, const std::string& text) {
    std::ofstream os(dir + "/rates.txt");
    os << text;
}

inline std::string kv(const std::string& key, double value) {
    std::ostringstream os;
    os << std::setprecision(12) << key << '=' << value << '\n';
    return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear trajectories: thm1_1, prop2_2, prop2_9

inline void run_linear_decay(const ExperimentConfig& c, VerdictReport& V) {
    const Model model = c.linear_model();
    const LinearPropagator prop(c.grid, model);
    const int n_steps = static_cast<int>(std::lround(c.t_final / c.dt));

    const EntropyConstants kE = c.preset == "prop2_2" ? c.constants : constants_E();
    const CouplingConstant cop = measure_coupling_constant(c.grid);
    const double eps = c.eps_overridden ? c.constants.eps : eps_from_coupling(cop.value);
    const Admissibility fadm = admissible_F(eps, cop.value);
    if (c.preset != "prop2_2" && !fadm.ok())
        throw ConfigError("constants.eps", "inadmissible for the measured coupling constant C_op = " + std::to_string(cop.value) +
                                               ": " + fadm.describe());

    constexpr double lowest = -std::numeric_limits<double>::infinity();
    double tail = 0.0, F_mono = lowest, F_chain = lowest, E_mono = lowest, E_chain = lowest, norm_mono = lowest;
    double kappa_min = std::numeric_limits<double>::infinity(), r2_min = 1.0, chain_bound = 0.0;
    double lemma28 = 0.0, lemma21 = 0.0;
    std::string rates;
    rates += detail::kv("C_op", cop.value) + detail::kv("eps", eps);
    rates += detail::kv("kappa_chain_F", kappa_chain_F(eps)) + detail::kv("kappa_chain_norm", kappa_chain_norm(eps));
    rates += detail::kv("kappa_chain_E", kappa_chain_E(kE));

    for (int i = 0; i < c.n_runs; ++i) {
        const SpectralField f0 = random_field(c.grid, c.seed + i, c.profile);
        Trajectory tr = record_uniform(prop, f0, c.dt, n_steps);
        attach_reports(tr, kE, eps, constants_G());
        write_trajectory_csv(c.output_dir + "/" + detail::run_file("trajectory", i, ".csv"), tr);
        write_snapshot(c.output_dir + "/" + detail::run_file("initial", i, ".hfks"), tr.states.front(), 0.0);
        write_snapshot(c.output_dir + "/" + detail::run_file("final", i, ".hfks"), tr.states.back(), tr.times.back());

        tail = std::max(tail, tr.max_tail_fraction());
        const auto F = detail::column(tr, [](const EntropyReport& r) { return r.value_F; });
        const auto E = detail::column(tr, [](const EntropyReport& r) { return r.value_E; });
        const auto N = detail::column(tr, [](const EntropyReport& r) { return r.norm_sq; });
        F_mono = std::max(F_mono, detail::decay_defect(tr.times, F, 0.0));
        F_chain = std::max(F_chain, detail::decay_defect(tr.times, F, kappa_chain_F(eps)));
        E_mono = std::max(E_mono, detail::decay_defect(tr.times, E, 0.0));
        E_chain = std::max(E_chain, detail::decay_defect(tr.times, E, kappa_chain_E(kE)));
        norm_mono = std::max(norm_mono, detail::decay_defect(tr.times, N, 0.0));

        Series s;
        const double n0 = std::sqrt(N.front());
        for (std::size_t k = 0; k < tr.times.size(); ++k) {
            const double nk = std::sqrt(N[k]);
            s.emplace_back(tr.times[k], nk);
            chain_bound = std::max(chain_bound, nk / (2.0 * std::exp(-kappa_chain_norm(eps) * tr.times[k]) * n0));
            const auto& r = tr.reports[k];
            const double h1 = r.norm_sq + r.dv_sq + r.dx_sq;
            // Sandwich violations, as positive excess over the bounds.
            lemma28 = std::max({lemma28, 0.5 * r.norm_sq - r.value_F, r.value_F - 2.0 * r.norm_sq});
            lemma21 = std::max({lemma21, 0.5 * h1 - r.value_E, r.value_E - 2.0 * kE.C * h1});
        }
        const RateFit fit = fit_exponential(s, c.fit_t_min, c.fit_t_max);
        kappa_min = std::min(kappa_min, fit.exponent);
        r2_min = std::min(r2_min, fit.r_squared);
        rates += fit.to_keyvalue(detail::run_file("run", i, "_"));
    }
    rates += detail::kv("kappa_measured_min", kappa_min);
    detail::write_rates(c.output_dir, rates);

    V.valid_below("tail_fraction", tail, kTailLimit).note = "max over runs and samples of the Hermite tail n >= n_v-1";
    V.at_most("norm_nonincreasing", norm_mono, 0.0, c.monotone_tol).note = "max relative slope of |f|^2";
    if (c.preset == "thm1_1") {
        V.at_most("F_nonincreasing", F_mono, 0.0, c.monotone_tol).note = "max relative finite-difference slope of F";
        V.above("kappa_positive", kappa_min, 0.0).note = "min fitted decay rate of |f| on the fit window";
        V.at_least("fit_r_squared", r2_min, RateFit::kConclusiveR2);
        V.at_least("kappa_vs_chain", kappa_min, kappa_chain_norm(eps)).note = "measured rate against (eps/8)c_p/(c_p+1)";
        V.at_most("norm_chain_bound", chain_bound, 1.0, 1e-12).note = "max |f(t)| / (2 exp(-kappa_chain t) |f0|)";
    } else if (c.preset == "prop2_9") {
        V.at_most("F_nonincreasing", F_mono, 0.0, c.monotone_tol);
        V.at_most("F_chain_decay", F_chain, 0.0, c.monotone_tol).note = "slope of F after removing exp(-(eps/4)c_p/(c_p+1) t)";
        V.at_most("F_sandwich", lemma28, 0.0, 1e-14).note = "excess over |f|^2/2 <= F <= 2|f|^2";
    } else {
        V.at_most("E_nonincreasing", E_mono, 0.0, c.monotone_tol);
        V.at_most("E_chain_decay", E_chain, 0.0, c.monotone_tol).note = "slope of E after removing exp(-E t/(8C))";
        V.at_most("E_sandwich", lemma21, 0.0, 1e-14).note = "excess over |f|_H1^2/2 <= E <= 2C|f|_H1^2";
    }
}

// ---------------------------------------------------------------------------
// Entropy G on [0, 1] (prop3_1) and the regularization rates (thm1_2)

inline void check_G(const ExperimentConfig& c, VerdictReport& V) {
    const LinearPropagator prop(c.grid, Model::FP);
    const int n_steps = static_cast<int>(std::lround(1.0 / c.g_dt));
    double mono = -std::numeric_limits<double>::infinity(), tail = 0.0, g0 = 0.0;
    for (int i = 0; i < c.n_runs; ++i) {
        const SpectralField f0 = random_field(c.grid, c.seed + i, c.profile);
        Trajectory tr = record_uniform(prop, f0, 1.0 / n_steps, n_steps);
        attach_reports(tr, constants_E(), 0.5, c.constants);
        write_trajectory_csv(c.output_dir + "/" + detail::run_file("entropy_G", i, ".csv"), tr);
        tail = std::max(tail, tr.max_tail_fraction());
        mono = std::max(mono, detail::decay_defect(tr.times, detail::column(tr, [](const EntropyReport& r) { return r.value_G; }), 0.0));
        g0 = std::max(g0, std::abs(tr.reports.front().value_G - c.constants.C * f0.norm_sq()));
    }
    V.valid_below("tail_fraction_G", tail, kTailLimit);
    V.at_most("G_nonincreasing", mono, 0.0, c.monotone_tol).note = "max relative slope of G(t,f(t)) on [0,1]";
    V.at_most("G_at_zero", g0, 0.0).note = "|G(0,f0) - C|f0|^2|";
}

inline void run_regularization(const ExperimentConfig& c, VerdictReport& V) {
    check_G(c, V);
    const LinearPropagator prop(c.rate_grid, Model::FP);
    const SpectralField f0 = rough_in_x_field(c.rate_grid, c.delta);
    const Trajectory tr = record_times(prop, f0, log_spaced(c.rate_t_min, c.rate_t_max, c.per_decade));
    Series sv, sx;
    std::ofstream csv(c.output_dir + "/regularization.csv");
    csv << "t,dv_norm,dx_norm\n" << std::setprecision(17);
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const H1Parts p = h1_parts(tr.states[i]);
        sv.emplace_back(tr.times[i], std::sqrt(p.dv_sq));
        sx.emplace_back(tr.times[i], std::sqrt(p.dx_sq));
        csv << tr.times[i] << ',' << sv.back().second << ',' << sx.back().second << '\n';
    }
    const RateFit fv = fit_powerlaw(sv, c.rate_t_min, c.rate_t_max);
    const RateFit fx = fit_powerlaw(sx, c.rate_t_min, c.rate_t_max);
    detail::write_rates(c.output_dir, fv.to_keyvalue("dv_") + fx.to_keyvalue("dx_"));
    V.valid_below("tail_fraction_rates", tr.max_tail_fraction(), kTailLimit);
    V.near("dv_exponent", fv.exponent, -0.5, 0.1);
    V.near("dx_exponent", fx.exponent, -1.5, 0.1);
    V.at_least("dv_r_squared", fv.r_squared, RateFit::kConclusiveR2);
    V.at_least("dx_r_squared", fx.r_squared, RateFit::kConclusiveR2);
}

// ---------------------------------------------------------------------------
// Fractional Kolmogorov: thm1_3, prop3_4

inline void run_fk(const ExperimentConfig& c, VerdictReport& V) {
    const std::vector<double> orders = c.s ? std::vector<double>{*c.s} : std::vector<double>{0.25, 0.5, 0.75, 1.0};
    const PhaseGrid grid{c.fk_n_xi, c.fk_eta_max, c.fk_n_eta};
    std::vector<double> tk(c.fk_k_samples);
    for (int i = 0; i < c.fk_k_samples; ++i) tk[i] = static_cast<double>(i) / (c.fk_k_samples - 1);
    const double need = fk_required_eta_max(grid.n_xi, kGaussianEtaSupport, tk.back());
    if (need > grid.eta_max)
        throw ConfigError("fk.eta_max", "characteristics leave the grid on [0,1]: need eta_max >= " + std::to_string(need));

    std::ofstream kcsv(c.output_dir + "/k_monotonicity.csv");
    kcsv << "t,s,K,K_lower\n" << std::setprecision(17);
    std::ofstream rcsv;
    if (c.preset == "thm1_3") {
        rcsv.open(c.output_dir + "/fk_rates.csv");
        rcsv << "t,s,norm_v,norm_x\n" << std::setprecision(17);
    }
    std::string rates;
    for (double s : orders) {
        const EntropyConstants k = c.constants_overridden ? c.constants : constants_K(s);
        const PhaseSymbolField f0(grid, s, gaussian_symbol(), kGaussianEtaSupport);
        const KMonotonicity km = k_monotonicity(f0, k, tk);
        double lower = 0.0;
        for (std::size_t i = 0; i < tk.size(); ++i) {
            const PhaseSymbolField ft = tk[i] == 0.0 ? f0 : fk_exact(f0, tk[i]);
            const KParts p = k_parts(ft);
            const double lb = k_lower_bound(tk[i], p, k, s);
            lower = std::max(lower, (lb - km.values[i]) / km.K0);
            kcsv << tk[i] << ',' << s << ',' << km.values[i] << ',' << lb << '\n';
        }
        std::ostringstream tag;
        tag << "s" << s << "_";
        V.at_most(tag.str() + "K_nonincreasing", km.max_increment, 0.0, 1e-8 * km.K0).note = "max increment of K(t,f(t))";
        V.at_most(tag.str() + "K_lower_bound", lower, 0.0, 1e-14).note = "relative excess of the lower bound over K";
        rates += detail::kv(tag.str() + "K0", km.K0);

        if (c.preset != "thm1_3") continue;
        FkRateOptions o;
        o.r = c.fk_r;
        o.delta = c.delta;
        o.t_min = c.fk_t_min;
        o.t_max = c.fk_t_max;
        o.per_decade = c.per_decade;
        const FkRateResult R = fk_rate_experiment(s, o);
        for (std::size_t i = 0; i < R.norm_v.size(); ++i)
            rcsv << R.norm_v[i].first << ',' << s << ',' << R.norm_v[i].second << ',' << R.norm_x[i].second << '\n';
        rates += R.fit_v.to_keyvalue(tag.str() + "v_") + R.fit_x.to_keyvalue(tag.str() + "x_");
        V.near(tag.str() + "v_exponent", R.fit_v.exponent, -0.5, 0.1);
        V.near(tag.str() + "x_exponent", R.fit_x.exponent, -(0.5 + s), 0.1);
        V.at_least(tag.str() + "v_r_squared", R.fit_v.r_squared, RateFit::kConclusiveR2);
        V.at_least(tag.str() + "x_r_squared", R.fit_x.r_squared, RateFit::kConclusiveR2);
    }
    detail::write_rates(c.output_dir, rates);
}

// ---------------------------------------------------------------------------
// H-theorem

inline void run_htheorem(const ExperimentConfig& c, VerdictReport& V) {
    const LinearPropagator prop(c.grid, Model::FP);
    // Density 1 + 2a cos x: positive, and carried by H₀ alone, so the
    // truncated series stays positive at every quadrature node.
    SpectralField f0(c.grid);
    f0(1, 0) = f0(-1, 0) = c.ht_amplitude;
    const int n = static_cast<int>(std::lround(c.ht_t_final / c.ht_dt));
    const Trajectory tr = record_uniform(prop, f0, c.ht_dt, n);
    std::vector<HTheorem> h(tr.states.size());
    try {
        for (std::size_t i = 0; i < h.size(); ++i) h[i] = htheorem_diagnostics(tr.states[i]);
    } catch (const std::domain_error& e) {
        V.push({"density_positive", Status::Invalid, 0.0, 0.0, 0.0, ">", e.what()});
        return;
    }
    double minH = std::numeric_limits<double>::infinity(), minD = minH, maxD = 0.0, maxdH = -minH, mism = 0.0;
    std::ofstream csv(c.output_dir + "/htheorem.csv");
    csv << "t,H,D,dH_dt,half_norm_sq\n" << std::setprecision(17);
    for (std::size_t i = 0; i < h.size(); ++i) {
        minH = std::min(minH, h[i].H);
        minD = std::min(minD, h[i].D);
        maxD = std::max(maxD, h[i].D);
    }
    for (std::size_t i = 0; i < h.size(); ++i) {
        double dH = std::numeric_limits<double>::quiet_NaN();
        if (i > 0 && i + 1 < h.size()) {
            dH = (h[i + 1].H - h[i - 1].H) / (tr.times[i + 1] - tr.times[i - 1]);
            maxdH = std::max(maxdH, dH);
            mism = std::max(mism, std::abs(dH + h[i].D));
        }
        csv << tr.times[i] << ',' << h[i].H << ',' << h[i].D << ',' << dH << ',' << 0.5 * tr.states[i].norm_sq() << '\n';
    }
    const double n0 = f0.norm();
    V.valid_below("tail_fraction", tr.max_tail_fraction(), kTailLimit);
    V.at_least("H_nonnegative", minH, 0.0);
    V.at_least("D_nonnegative", minD, 0.0);
    V.at_most("dH_dt_nonpositive", maxdH, 0.0, 1e-3 * maxD).note = "central differences";
    V.at_most("dH_dt_matches_minus_D", mism, 0.0, 1e-3 * maxD).note = "max |dH/dt + D|";
    V.at_most("H_vs_half_norm_sq", std::abs(h.front().H - 0.5 * n0 * n0), 0.0, n0 * n0 * n0).note = "|H - |f0|^2/2| within |f0|^3";
}

// ---------------------------------------------------------------------------
// Spectral gap

inline void run_gap(const ExperimentConfig& c, VerdictReport& V) {
    const Model model = c.linear_model();
    const SpectralGap sg = spectral_gap(c.grid, model);
    std::ofstream csv(c.output_dir + "/eigenvalues.csv");
    csv << "xi,index,re,im\n" << std::setprecision(17);
    for (int xi = -c.grid.n_xi; xi <= c.grid.n_xi; ++xi) {
        const auto& ev = sg.per_xi[xi + c.grid.n_xi];
        for (std::size_t k = 0; k < ev.size(); ++k) csv << xi << ',' << k << ',' << ev[k].real() << ',' << ev[k].imag() << '\n';
    }
    // ξ = 0 is diagonal, so its spectrum is available exactly.
    const auto& ev0 = sg.per_xi[c.grid.n_xi];
    double defect = 0.0;
    for (std::size_t n = 0; n < ev0.size(); ++n) {
        const double expected = n == 0 ? 0.0 : model == Model::FP ? static_cast<double>(n) : 1.0;
        defect = std::max(defect, std::abs(ev0[n] - expected));
    }
    std::ostringstream zero;
    zero << std::setprecision(17);
    for (std::size_t n = 0; n < ev0.size(); ++n) zero << (n ? " " : "") << ev0[n].real();
    std::string rates = detail::kv("gap", sg.gap) + detail::kv("argmin_xi", sg.argmin_xi);
    for (int xi = 0; xi <= c.grid.n_xi; ++xi) {
        const auto& ev = sg.per_xi[xi + c.grid.n_xi];
        rates += detail::kv("min_re_xi" + std::to_string(xi), ev[xi == 0 ? 1 : 0].real());
    }
    rates += "xi0_eigenvalues=" + zero.str() + '\n';
    detail::write_rates(c.output_dir, rates);
    V.at_most("xi0_spectrum_exact", defect, 0.0).note = model == Model::FP ? "xi=0 eigenvalues {0,1,...,n_v}" : "xi=0 eigenvalues {0,1}";
    V.above("gap_positive", sg.gap, 0.0);
}

// ---------------------------------------------------------------------------
// Mollified VPFP

inline void run_mvpfp(const ExperimentConfig& c, VerdictReport& V) {
    const LinearPropagator prop(c.grid, Model::FP, ExpMethod::AutoVector);
    const Mollifier moll = gaussian_mollifier(c.grid.n_xi, c.sign);
    const KernelConstants kc = measure_kernel_constants(prop, moll);
    SpectralField f0 = random_field(c.grid, c.seed, c.profile);
    f0 *= c.norm_fraction * kc.eps0;

    PicardOptions o;
    o.horizon = c.horizon;
    o.n_samples = c.n_samples;
    o.max_iter = c.max_iter;
    o.tol = c.tol;
    o.kappa = kc.kappa;
    o.eps0 = kc.eps0;
    const PicardResult R = picard_solve(f0, moll, prop, o);
    {
        std::ofstream log(c.output_dir + "/picard.log");
        log << std::setprecision(12) << "eps0 " << kc.eps0 << "\nC_kernel " << kc.C_kernel << "\nkappa " << kc.kappa << "\nc_lin "
            << kc.c_lin << "\nL " << kc.L << "\nI_max " << kc.I_max << "\nC_sq " << kc.C_sq << "\nf0_norm " << f0.norm() << '\n';
        write_picard_log(log, R);
        std::ofstream csv(c.output_dir + "/mvpfp.csv");
        write_mvpfp_csv(csv, R.times, R.f_series, R.E_series);
    }
    write_snapshot(c.output_dir + "/initial.hfks", f0, 0.0);
    write_snapshot(c.output_dir + "/final.hfks", R.f_series.back(), R.times.back());

    const auto S1 = strang_solve(f0, moll, prop, R.times, c.substeps);
    const auto S2 = strang_solve(f0, moll, prop, R.times, 2 * c.substeps);
    std::vector<FieldSample> E1;
    double agree = 0.0, richardson = 0.0, mass = 0.0, reality = 0.0, lemma42 = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < R.times.size(); ++i) {
        E1.push_back(field_from_density(S1[i], moll));
        agree = std::max(agree, (S1[i] - R.f_series[i]).norm());
        richardson = std::max(richardson, (S1[i] - S2[i]).norm());
        mass = std::max({mass, std::abs(R.f_series[i](0, 0)), std::abs(S1[i](0, 0))});
        reality = std::max({reality, R.f_series[i].reality_defect(), S1[i].reality_defect()});
        lemma42 = std::max(lemma42, R.E_series[i].linf_bound - moll.linf_bound * R.f_series[i].norm());
        scale = std::max(scale, R.f_series[i].norm());
    }
    {
        std::ofstream csv(c.output_dir + "/mvpfp_strang.csv");
        write_mvpfp_csv(csv, R.times, S1, E1);
    }

    double max_ratio = 0.0;
    for (double r : R.contraction_ratios) max_ratio = std::max(max_ratio, r);
    V.push({"picard_converged", R.status == PicardStatus::Converged ? Status::Pass : Status::Fail, static_cast<double>(R.iterations),
            static_cast<double>(c.max_iter), 0.0, "<=", R.message});
    V.at_most("contraction_ratio_max", max_ratio, 1.0, 0.0).relation = "<";
    if (max_ratio >= 1.0) V.criteria.back().status = Status::Fail;
    const DecayReport D = decay_report(R.times, R.f_series, R.E_series, c.decay_t_min, c.decay_t_max);
    std::string rates = D.fit_f.to_keyvalue("f_") + D.fit_E.to_keyvalue("E_") + detail::kv("C0", D.C0) + detail::kv("eps0", kc.eps0) +
                        detail::kv("sigma_kappa", kc.sigma * kc.kappa);
    detail::write_rates(c.output_dir, rates);
    V.above("kappa0_f_positive", D.fit_f.exponent, 0.0);
    V.above("kappa0_E_positive", D.fit_E.exponent, 0.0);
    V.at_least("decay_fits_r_squared", std::min(D.fit_f.r_squared, D.fit_E.r_squared), RateFit::kConclusiveR2);
    V.at_least("kappa0_vs_sigma_kappa", D.fit_f.exponent, 0.8 * kc.sigma * kc.kappa).note = "lower bound from the weighted norms";
    V.at_most("picard_vs_strang", agree, std::max(c.tol, 2.0 * richardson)).note = "max_t |S_dt - Picard| against max(tol, 2|S_dt - S_dt/2|)";
    V.at_most("mass_coefficient", mass, 0.0);
    V.at_most("reality_defect", reality, 0.0, 1e-12 * scale);
    V.at_most("field_bound_lemma", lemma42, 0.0, 1e-15 * moll.linf_bound * scale).note = "sum|E_hat| - L|f|";
}

// ---------------------------------------------------------------------------

/// Runs one validated configuration and writes verdict.txt into its output directory.
inline VerdictReport run(const ExperimentConfig& c) {
    std::filesystem::create_directories(c.output_dir);
    VerdictReport V;
    V.preset = c.preset;
    V.model = c.model;
    V.seed = c.seed;
    if (c.preset == "thm1_1" || c.preset == "prop2_2" || c.preset == "prop2_9") run_linear_decay(c, V);
    else if (c.preset == "prop3_1") check_G(c, V);
    else if (c.preset == "thm1_2") run_regularization(c, V);
    else if (c.preset == "thm1_3" || c.preset == "prop3_4") run_fk(c, V);
    else if (c.preset == "htheorem") run_htheorem(c, V);
    else if (c.preset == "gap") run_gap(c, V);
    else if (c.preset == "thm1_4") run_mvpfp(c, V);
    else throw ConfigError("preset", "no pipeline for preset " + c.preset);
    std::ofstream os(c.output_dir + "/verdict.txt");
    V.write(os);
    return V;
}

}  // namespace hypokinetic
