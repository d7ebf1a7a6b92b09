#pragma once

// Experiment configuration: flat `key = value` text with `[section]` headers.
// Keys are addressed as `section.key` (top-level keys have no prefix). Unknown
// keys, malformed values and preset/model mismatches are rejected with the
// offending key in the message.

#include "entropy.hpp"
#include "initial_data.hpp"
#include "spectral_core.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypokinetic {

class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string key, const std::string& what)
        : std::invalid_argument(key.empty() ? what : "config key '" + key + "': " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

struct PresetInfo {
    const char* name;
    std::vector<const char*> models;  ///< first entry is the default
    const char* summary;
};

inline const std::vector<PresetInfo>& presets() {
    static const std::vector<PresetInfo> table = {
        {"thm1_1", {"FP", "BL"}, "exponential L2 decay through the macro-micro entropy F"},
        {"thm1_2", {"FP"}, "short-time regularization rates t^-1/2 (dv) and t^-3/2 (dx) with entropy G"},
        {"thm1_3", {"FK"}, "fractional Kolmogorov rates t^-1/2 and t^-(1/2+s) with entropy K"},
        {"thm1_4", {"MVPFP"}, "mollified VPFP: Picard mild solution, contraction and decay"},
        {"prop2_2", {"FP"}, "H1 entropy E decays at the chain rate"},
        {"prop2_9", {"FP", "BL"}, "L2 entropy F decays at the chain rate"},
        {"prop3_1", {"FP"}, "entropy G is nonincreasing on [0,1]"},
        {"prop3_4", {"FK"}, "entropy K is nonincreasing on [0,1]"},
        {"htheorem", {"FP"}, "relative entropy H and dissipation D along a trajectory"},
        {"gap", {"FP", "BL"}, "spectral gap and per-mode eigenvalues"},
    };
    return table;
}

inline const PresetInfo& find_preset(const std::string& name) {
    for (const auto& p : presets())
        if (name == p.name) return p;
    std::string all;
    for (const auto& p : presets()) all += std::string(all.empty() ? "" : ", ") + p.name;
    throw ConfigError("preset", "unknown preset '" + name + "' (expected one of " + all + ")");
}

/// Which constant family a preset's entropy needs.
inline std::optional<EntropyTarget> preset_target(const std::string& preset) {
    if (preset == "prop2_2") return EntropyTarget::E;
    if (preset == "thm1_1" || preset == "prop2_9") return EntropyTarget::F;
    if (preset == "thm1_2" || preset == "prop3_1") return EntropyTarget::G;
    if (preset == "thm1_3" || preset == "prop3_4") return EntropyTarget::K;
    return std::nullopt;
}

struct ExperimentConfig {
    std::string preset;
    std::string model;
    GridSpec grid;
    std::optional<double> s;
    std::uint64_t seed = 42;
    std::string output_dir = "hypokinetic_out";

    /// Constants after applying [constants] overrides to the preset's defaults.
    EntropyConstants constants;
    bool constants_overridden = false;
    bool eps_overridden = false;

    RandomProfile profile;
    int n_runs = 10;

    // [trajectory] linear runs
    double t_final = 20.0;
    double dt = 0.1;
    double fit_t_min = 5.0;
    double fit_t_max = 20.0;
    double monotone_tol = 1e-8;
    double g_dt = 0.01;  ///< sampling step on [0, 1] for entropy G

    // [rates] regularization experiment of thm1_2
    GridSpec rate_grid{192, 256};
    double rate_t_min = 0.05;
    double rate_t_max = 0.5;
    int per_decade = 16;
    double delta = 0.01;

    // [fk]
    int fk_n_xi = 16;
    double fk_eta_max = 64.0;
    int fk_n_eta = 4097;
    double fk_t_min = 1e-3;
    double fk_t_max = 1e-1;
    int fk_k_samples = 41;
    double fk_r = 0.0;

    // [htheorem]
    double ht_amplitude = 0.05;
    double ht_t_final = 3.0;
    double ht_dt = 0.01;

    // [mvpfp]
    double horizon = 10.0;
    int n_samples = 64;
    int max_iter = 50;
    double tol = 1e-14;
    int sign = -1;
    int substeps = 2;
    double norm_fraction = 0.5;  ///< ‖f₀‖ = norm_fraction · ε₀
    double decay_t_min = 5.0;
    double decay_t_max = 10.0;

    Model linear_model() const { return parse_model(model); }
};

using RawConfig = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text, const char* type_name) {
    T value{};
    const char* first = text.data();
    const char* last = first + text.size();
    auto [p, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || p != last || text.empty())
        throw ConfigError(key, std::string("expected ") + type_name + ", got '" + text + "'");
    return value;
}

}  // namespace detail

/// Splits configuration text into `section.key -> value`. Comments start with
/// `#` or `;`. Duplicate keys are an error.
inline RawConfig parse_config_text(const std::string& text) {
    RawConfig raw;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("", "line " + std::to_string(lineno) + ": unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("", "line " + std::to_string(lineno) + ": expected key = value");
        const std::string name = detail::trim(line.substr(0, eq));
        const std::string key = section.empty() ? name : section + "." + name;
        if (name.empty()) throw ConfigError("", "line " + std::to_string(lineno) + ": empty key");
        if (!raw.emplace(key, detail::trim(line.substr(eq + 1))).second) throw ConfigError(key, "duplicate key");
    }
    return raw;
}

inline RawConfig read_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("", "cannot read config file " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

/// Applies defaults, typed parsing and every precondition. Nothing here runs
/// an experiment.
inline ExperimentConfig validate_config(const RawConfig& raw) {
    ExperimentConfig c;
    std::map<std::string, double> const_over;

    using Setter = std::function<void(const std::string& key, const std::string& value)>;
    auto as_int = [](const std::string& k, const std::string& v) { return detail::parse_number<int>(k, v, "integer"); };
    auto as_double = [](const std::string& k, const std::string& v) { return detail::parse_number<double>(k, v, "number"); };
    auto integer = [&](int& dst) { return Setter([&dst, as_int](const std::string& k, const std::string& v) { dst = as_int(k, v); }); };
    auto real = [&](double& dst) {
        return Setter([&dst, as_double](const std::string& k, const std::string& v) { dst = as_double(k, v); });
    };
    auto constant = [&](const char* name) {
        return Setter([&const_over, name, as_double](const std::string& k, const std::string& v) { const_over[name] = as_double(k, v); });
    };

    const std::map<std::string, Setter> table = {
        {"preset", [&](const std::string&, const std::string& v) { c.preset = v; }},
        {"model", [&](const std::string&, const std::string& v) { c.model = v; }},
        {"seed", [&](const std::string& k, const std::string& v) { c.seed = detail::parse_number<std::uint64_t>(k, v, "nonnegative integer"); }},
        {"output_dir", [&](const std::string&, const std::string& v) { c.output_dir = v; }},
        {"s", [&](const std::string& k, const std::string& v) { c.s = as_double(k, v); }},
        {"grid.n_xi", integer(c.grid.n_xi)},
        {"grid.n_v", integer(c.grid.n_v)},
        {"constants.C", constant("C")},
        {"constants.D", constant("D")},
        {"constants.E", constant("E")},
        {"constants.eps", constant("eps")},
        {"constants.eps_iii", constant("eps_iii")},
        {"constants.eps_iv", constant("eps_iv")},
        {"constants.eps_v", constant("eps_v")},
        {"constants.eps_vii", constant("eps_vii")},
        {"random.p", real(c.profile.p)},
        {"random.q", real(c.profile.q)},
        {"random.n_runs", integer(c.n_runs)},
        {"trajectory.t_final", real(c.t_final)},
        {"trajectory.dt", real(c.dt)},
        {"trajectory.fit_t_min", real(c.fit_t_min)},
        {"trajectory.fit_t_max", real(c.fit_t_max)},
        {"trajectory.monotone_tol", real(c.monotone_tol)},
        {"trajectory.g_dt", real(c.g_dt)},
        {"rates.n_xi", integer(c.rate_grid.n_xi)},
        {"rates.n_v", integer(c.rate_grid.n_v)},
        {"rates.t_min", real(c.rate_t_min)},
        {"rates.t_max", real(c.rate_t_max)},
        {"rates.per_decade", integer(c.per_decade)},
        {"rates.delta", real(c.delta)},
        {"fk.n_xi", integer(c.fk_n_xi)},
        {"fk.eta_max", real(c.fk_eta_max)},
        {"fk.n_eta", integer(c.fk_n_eta)},
        {"fk.t_min", real(c.fk_t_min)},
        {"fk.t_max", real(c.fk_t_max)},
        {"fk.k_samples", integer(c.fk_k_samples)},
        {"fk.r", real(c.fk_r)},
        {"htheorem.amplitude", real(c.ht_amplitude)},
        {"htheorem.t_final", real(c.ht_t_final)},
        {"htheorem.dt", real(c.ht_dt)},
        {"mvpfp.horizon", real(c.horizon)},
        {"mvpfp.n_samples", integer(c.n_samples)},
        {"mvpfp.max_iter", integer(c.max_iter)},
        {"mvpfp.tol", real(c.tol)},
        {"mvpfp.sign", integer(c.sign)},
        {"mvpfp.substeps", integer(c.substeps)},
        {"mvpfp.norm_fraction", real(c.norm_fraction)},
        {"mvpfp.decay_t_min", real(c.decay_t_min)},
        {"mvpfp.decay_t_max", real(c.decay_t_max)},
    };

    for (const auto& [key, value] : raw) {
        const auto it = table.find(key);
        if (it == table.end()) throw ConfigError(key, "unknown key");
        it->second(key, value);
    }

    if (c.preset.empty()) throw ConfigError("preset", "required key is missing");
    const PresetInfo& info = find_preset(c.preset);
    if (c.model.empty()) c.model = info.models.front();
    if (std::find_if(info.models.begin(), info.models.end(), [&](const char* m) { return c.model == m; }) == info.models.end()) {
        std::string allowed;
        for (const char* m : info.models) allowed += std::string(allowed.empty() ? "" : "|") + m;
        throw ConfigError("model", "preset " + c.preset + " requires model " + allowed + ", got '" + c.model + "'");
    }

    auto require = [](bool ok, const char* key, const std::string& what) {
        if (!ok) throw ConfigError(key, what);
    };
    require(c.grid.n_xi >= 1, "grid.n_xi", "must be >= 1");
    require(c.grid.n_v >= 2, "grid.n_v", "must be >= 2");
    require(c.rate_grid.n_xi >= 1, "rates.n_xi", "must be >= 1");
    require(c.rate_grid.n_v >= 2, "rates.n_v", "must be >= 2");
    require(c.n_runs >= 1, "random.n_runs", "must be >= 1");
    require(c.dt > 0, "trajectory.dt", "must be positive");
    require(c.t_final > c.dt, "trajectory.t_final", "must exceed trajectory.dt");
    require(c.fit_t_max > c.fit_t_min && c.fit_t_min >= 0, "trajectory.fit_t_max", "fit window must be nonempty");
    require(c.fit_t_max <= c.t_final + 1e-12, "trajectory.fit_t_max", "fit window must lie inside [0, t_final]");
    require(c.g_dt > 0 && c.g_dt <= 0.5, "trajectory.g_dt", "must lie in (0, 1/2]");
    require(c.rate_t_min > 0 && c.rate_t_max > c.rate_t_min, "rates.t_max", "need 0 < t_min < t_max");
    require(c.per_decade >= 1, "rates.per_decade", "must be >= 1");
    require(c.delta > 0, "rates.delta", "must be positive");
    require(c.fk_t_min > 0 && c.fk_t_max > c.fk_t_min, "fk.t_max", "need 0 < t_min < t_max");
    require(c.fk_k_samples >= 2, "fk.k_samples", "must be >= 2");
    require(c.fk_n_xi >= 1, "fk.n_xi", "must be >= 1");
    require(c.ht_amplitude > 0, "htheorem.amplitude", "must be positive");
    require(c.ht_dt > 0 && c.ht_t_final > 2 * c.ht_dt, "htheorem.t_final", "need at least three samples");
    require(c.sign == 1 || c.sign == -1, "mvpfp.sign", "must be +1 or -1");
    require(c.horizon > 0, "mvpfp.horizon", "must be positive");
    require(c.n_samples >= 8, "mvpfp.n_samples", "must be >= 8");
    require(c.max_iter >= 1, "mvpfp.max_iter", "must be >= 1");
    require(c.tol > 0, "mvpfp.tol", "must be positive");
    require(c.substeps >= 1, "mvpfp.substeps", "must be >= 1");
    require(c.norm_fraction > 0 && c.norm_fraction <= 1, "mvpfp.norm_fraction", "must lie in (0, 1]");
    require(c.decay_t_max > c.decay_t_min && c.decay_t_max <= c.horizon, "mvpfp.decay_t_max", "decay window must lie inside [0, horizon]");

    if (c.s) {
        require(c.model == "FK", "s", "only the FK model takes a fractional order");
        require(*c.s > 0.0 && *c.s <= 1.0, "s", "must lie in (0, 1], got " + raw.at("s"));
    }

    // Constants: defaults of the preset's family, then overrides, then admissibility.
    const auto target = preset_target(c.preset);
    if (!const_over.empty() && !target) throw ConfigError("constants", "preset " + c.preset + " has no entropy constants to override");
    if (target) {
        c.constants = *target == EntropyTarget::F ? EntropyConstants{}
                                                  : select_constants(*target, *target == EntropyTarget::K ? c.s.value_or(1.0) : 1.0);
        for (const auto& [name, v] : const_over) {
            if (*target == EntropyTarget::F && name != "eps")
                throw ConfigError("constants." + name, "preset " + c.preset + " only takes constants.eps");
            if (*target != EntropyTarget::F && name == "eps")
                throw ConfigError("constants.eps", "preset " + c.preset + " does not use eps");
            if (*target != EntropyTarget::K && name.rfind("eps_", 0) == 0)
                throw ConfigError("constants." + name, "only the FK presets use " + name);
            double* slot = name == "C" ? &c.constants.C : name == "D" ? &c.constants.D : name == "E" ? &c.constants.E
                         : name == "eps" ? &c.constants.eps : name == "eps_iii" ? &c.constants.eps_iii
                         : name == "eps_iv" ? &c.constants.eps_iv : name == "eps_v" ? &c.constants.eps_v : &c.constants.eps_vii;
            *slot = v;
        }
        c.constants_overridden = !const_over.empty();
        c.eps_overridden = const_over.count("eps") > 0;
        if (*target == EntropyTarget::F && c.eps_overridden) {
            require(c.constants.eps > 0.0, "constants.eps", "must be positive");
            require(c.constants.eps <= 0.5, "constants.eps", "must satisfy eps <= 1/2, got " + raw.at("constants.eps"));
        }
        Admissibility adm;
        if (*target == EntropyTarget::E) adm = admissible_E(c.constants);
        if (*target == EntropyTarget::G) adm = admissible_G(c.constants);
        if (*target == EntropyTarget::K) {
            const std::vector<double> orders = c.s ? std::vector<double>{*c.s} : std::vector<double>{0.25, 0.5, 0.75, 1.0};
            if (c.constants_overridden && !c.s) throw ConfigError("s", "a constants override for K needs an explicit s");
            for (double s : orders) {
                adm = admissible_K(c.constants_overridden ? c.constants : constants_K(s), s);
                if (!adm.ok()) break;
            }
        }
        if (!adm.ok()) throw ConfigError("constants", "inadmissible constants (" + adm.first_violation() + "): " + adm.describe());
    }
    return c;
}

inline ExperimentConfig validate_config(const std::string& text) { return validate_config(parse_config_text(text)); }

}  // namespace hypokinetic
