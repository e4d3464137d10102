// Command implementations behind the taper CLI. Argument parsing lives in
// tools/taper_cli.cpp; these functions take resolved options and streams.
#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "taper/experiments.hpp"
#include "taper/io.hpp"
#include "taper/suites.hpp"

namespace taper::cli {

namespace fs = std::filesystem;

enum Exit : int { kOk = 0, kDomainFailure = 1, kUsage = 2 };

/// TAPER_SEED if set and numeric, else the built-in default.
[[nodiscard]] inline std::uint64_t default_seed() {
    if (const char* s = std::getenv("TAPER_SEED")) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(s, &used);
            if (used == std::string(s).size())
                return v;
        } catch (const std::exception&) {
        }
        throw ParseError("TAPER_SEED", "expected an unsigned integer, got '" + std::string(s) + "'");
    }
    return experiments::kDefaultSeed;
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw ParseError(dir, "output directory is not writable");
}

// =============================================================================
// certify
// =============================================================================

inline int cmd_certify(const std::string& spec_path, std::ostream& out) {
    const auto g = load_system_spec(spec_path).response();
    const auto cert = certify_lpop(g);
    json j = is_certified(cert) ? to_json(std::get<LpopCertificate>(cert))
                                : to_json(std::get<Violation>(cert));
    j["horizon"] = g.horizon();
    j["g0"] = g(0);
    out << j.dump(2) << '\n';
    return is_certified(cert) ? kOk : kDomainFailure;
}

// =============================================================================
// simulate
// =============================================================================

struct SimulateOptions {
    std::string config_path{};          ///< optional JSON config file
    std::string systems_path = experiments::kDefaultSystemsPath;
    std::optional<std::string> system{}; ///< canonical id or system-spec path
    std::optional<std::string> policy_path{};
    std::optional<std::size_t> taper_steps{};
    std::optional<double> y_min{};
    std::optional<double> warmup_dose{};
    std::optional<std::size_t> warmup_steps{};
    std::optional<double> noise_half_width{};
    std::optional<std::uint64_t> seed{};
    bool check_bounds = false;
    std::string out_dir = "out";
};

struct SimulateConfig {
    SystemSpec system;
    std::string system_label;
    TaperPolicy policy;
    NaturalProgression progression;
    NoiseSpec noise;
    Warmup warmup;
    std::size_t taper_steps = 0;
    ConstraintPath y_min;
    std::uint64_t seed = 0;
};

/// Merge defaults, the config file, and flags (flags win).
[[nodiscard]] inline SimulateConfig resolve_simulate(const SimulateOptions& o) {
    const auto setup = experiments::load_setup(o.systems_path);
    json file = json::object();
    if (!o.config_path.empty())
        file = parse_json(read_file(o.config_path), o.config_path);
    const std::string ctx = o.config_path.empty() ? "config" : o.config_path;

    SimulateConfig c;
    c.seed = o.seed ? *o.seed : file.contains("seed") ? file["seed"].get<std::uint64_t>()
                                                       : default_seed();

    // system: canonical id, spec path, or inline spec
    const experiments::CanonicalSystem* canon = nullptr;
    std::string sys_ref = o.system ? *o.system : "";
    if (sys_ref.empty() && file.contains("system") && file["system"].is_string())
        sys_ref = file["system"].get<std::string>();
    if (sys_ref.empty() && file.contains("system") && file["system"].is_object()) {
        c.system = system_spec_from_json(file["system"], ctx + ".system");
        c.system_label = "inline";
    } else {
        if (sys_ref.empty())
            sys_ref = "A";
        bool is_id = false;
        for (const auto& s : setup.systems)
            if (s.id == sys_ref) {
                canon = &s;
                is_id = true;
            }
        if (is_id) {
            c.system.modes = canon->modes;
            c.system.tail_tol = setup.tail_tol;
        } else {
            c.system = load_system_spec(sys_ref);
        }
        c.system_label = sys_ref;
    }
    const auto g = c.system.response();

    // policy: defaults to the integral law with the (0.5, 1.5) gain factors
    json pol = file.contains("policy") ? file["policy"] : json{{"type", "integral"}};
    std::string pctx = ctx + ".policy";
    if (o.policy_path) {
        pol = parse_json(read_file(*o.policy_path), *o.policy_path);
        pctx = *o.policy_path;
    }
    if (pol.value("type", "") == "integral" && !pol.contains("k_plus") && !pol.contains("k_minus")) {
        const auto k = experiments::default_gains(g(0));
        pol["k_plus"] = k.k_plus;
        pol["k_minus"] = k.k_minus;
    }
    c.policy = policy_from_json(pol, pctx);

    c.progression = file.contains("progression")
                        ? progression_from_json(file["progression"], ctx + ".progression")
                        : NaturalProgression::constant(canon ? canon->nat_base : 0.0);
    c.noise = file.contains("noise") ? noise_from_json(file["noise"], ctx + ".noise")
                                     : NoiseSpec::uniform(setup.noise_half_width, c.seed);
    if (o.noise_half_width)
        c.noise = *o.noise_half_width > 0.0 ? NoiseSpec::uniform(*o.noise_half_width, c.seed)
                                            : NoiseSpec::none();

    c.warmup = setup.warmup;
    if (file.contains("warmup")) {
        c.warmup.dose = detail::number_or(file["warmup"], "dose", c.warmup.dose, ctx + ".warmup");
        c.warmup.steps = static_cast<std::size_t>(detail::number_or(
            file["warmup"], "steps", static_cast<double>(c.warmup.steps), ctx + ".warmup"));
    }
    if (o.warmup_dose)
        c.warmup.dose = *o.warmup_dose;
    if (o.warmup_steps)
        c.warmup.steps = *o.warmup_steps;

    c.taper_steps = canon ? canon->taper_steps : 100;
    if (file.contains("taper_steps"))
        c.taper_steps = file["taper_steps"].get<std::size_t>();
    if (o.taper_steps)
        c.taper_steps = *o.taper_steps;

    c.y_min = ConstraintPath(canon ? 0.5 * (canon->y_min_lo + canon->y_min_hi) : 0.0);
    if (file.contains("y_min")) {
        const auto& ym = file["y_min"];
        c.y_min = ym.is_array() ? ConstraintPath(detail::number_array(ym, ctx + ".y_min"))
                                : ConstraintPath(detail::number(file, "y_min", ctx));
    }
    if (o.y_min)
        c.y_min = ConstraintPath(*o.y_min);
    return c;
}

[[nodiscard]] inline json to_json(const SimulateConfig& c) {
    const auto path = c.y_min.values();
    return {{"system", to_json(c.system)},
            {"system_label", c.system_label},
            {"policy", to_json(c.policy)},
            {"progression", to_json(c.progression)},
            {"noise", to_json(c.noise)},
            {"warmup", {{"dose", c.warmup.dose}, {"steps", c.warmup.steps}}},
            {"taper_steps", c.taper_steps},
            {"y_min", c.y_min.is_constant() ? json(path[0])
                                            : json(std::vector<double>(path.begin(), path.end()))},
            {"seed", c.seed}};
}

inline int cmd_simulate(const SimulateOptions& o, bool print_config, std::ostream& out,
                        std::ostream& err) {
    const auto c = resolve_simulate(o);
    if (print_config) {
        out << to_json(c).dump(2) << '\n';
        return kOk;
    }
    ensure_dir(o.out_dir);
    const auto g = c.system.response();
    SimulationTrace trace;
    try {
        trace = run_closed_loop(g, c.policy, c.progression, c.noise, c.warmup, c.taper_steps,
                                c.y_min);
    } catch (const ProtocolAbort& e) {
        const std::string p = (fs::path(o.out_dir) / "trace_partial.csv").string();
        write_file(p, trace_csv(e.partial_trace()));
        err << "protocol aborted: " << e.what() << "\npartial trace: " << p << '\n';
        return kDomainFailure;
    }
    const auto metrics = compute_metrics(trace);
    json report{{"config", to_json(c)}, {"metrics", to_json(metrics)}};
    int rc = kOk;
    if (o.check_bounds) {
        if (const auto* ip = std::get_if<IntegralPolicy>(&c.policy)) {
            const auto frame = taper_window(trace, g);
            const auto t2 = oracles::check_theorem2(frame, ip->delta, ip->k_plus, ip->k_minus, g(0));
            const auto l1 = oracles::check_lemma1(frame, g, ip->delta);
            report["long_term_bound"] = oracles::to_json(t2);
            report["per_step_bound"] = oracles::to_json(l1);
            if (t2.hypothesis_holds && (!t2.passed || !l1.passed))
                rc = kDomainFailure;
        } else {
            report["long_term_bound"] = "only defined for the integral policy";
        }
    }
    write_file((fs::path(o.out_dir) / "trace.csv").string(), trace_csv(trace));
    write_file((fs::path(o.out_dir) / "metrics.json").string(), report.dump(2) + "\n");
    out << report["metrics"].dump(2) << '\n';
    return rc;
}

// =============================================================================
// sweep
// =============================================================================

struct SweepOptions {
    std::string systems_path = experiments::kDefaultSystemsPath;
    std::vector<std::string> system_ids{}; ///< empty: all systems
    std::vector<std::string> families{"integral", "linear", "exponential", "med"};
    std::optional<std::size_t> population{};
    std::optional<std::uint64_t> seed{};
    std::vector<double> deltas{}; ///< empty: default grid
    std::size_t grid_points = 9;
    std::size_t jobs = 1;
    std::string out_dir = "out";
};

[[nodiscard]] inline json effective_sweep(const SweepOptions& o,
                                          const experiments::ExperimentSetup& setup) {
    std::vector<std::string> ids = o.system_ids;
    if (ids.empty())
        for (const auto& s : setup.systems)
            ids.push_back(s.id);
    return {{"systems_path", o.systems_path},
            {"systems", ids},
            {"families", o.families},
            {"population", o.population.value_or(setup.population)},
            {"seed", o.seed ? *o.seed : default_seed()},
            {"deltas", o.deltas.empty() ? experiments::default_deltas() : o.deltas},
            {"grid_points", o.grid_points},
            {"jobs", o.jobs},
            {"out_dir", o.out_dir}};
}

inline int cmd_sweep(const SweepOptions& o, bool print_config, std::ostream& out) {
    using namespace experiments;
    const auto setup = load_setup(o.systems_path);
    const json eff = effective_sweep(o, setup);
    if (print_config) {
        out << eff.dump(2) << '\n';
        return kOk;
    }
    ensure_dir(o.out_dir);
    const auto seed = eff["seed"].get<std::uint64_t>();
    const auto n = eff["population"].get<std::size_t>();
    const auto deltas = eff["deltas"].get<std::vector<double>>();
    SweepContext ctx{&setup};
    ctx.jobs = o.jobs;

    json report = json::object();
    bool all_ok = true;
    for (const auto& id : eff["systems"].get<std::vector<std::string>>()) {
        const auto& sys = setup.system(id);
        std::map<std::string, std::vector<CurvePoint>> curves;
        for (const auto& fam : o.families) {
            const Family f = family_from_name(fam);
            std::vector<double> values;
            if (f == Family::integral)
                values = deltas;
            else if (f == Family::linear)
                values = default_linear_rates(sys.taper_steps, o.grid_points);
            else if (f == Family::exponential)
                values = default_exponential_rates(sys.taper_steps, o.grid_points);
            curves[fam] = run_sweep(sys, {f, values, n, seed}, ctx);
        }
        std::string long_csv = long_csv_header();
        std::string summary = summary_csv_header();
        for (const auto& fam : o.families) {
            long_csv += long_csv_rows(curves[fam]);
            summary += summary_csv_rows(curves[fam]);
        }
        write_file((fs::path(o.out_dir) / (id + "_long.csv")).string(), long_csv);
        write_file((fs::path(o.out_dir) / (id + "_summary.csv")).string(), summary);

        json sys_rep = json::object();
        if (curves.count("integral")) {
            const auto& integ = curves["integral"];
            for (const char* b : {"linear", "exponential"})
                if (curves.count(b)) {
                    const auto d = baseline_dominated(integ, curves[b]);
                    sys_rep[std::string("integral_dominates_") + b] = d.passed;
                    all_ok = all_ok && d.passed;
                }
            if (curves.count("med")) {
                std::vector<CurvePoint> padded;
                for (const auto& p : integ)
                    if (p.param >= 0.0)
                        padded.push_back(p);
                const auto d = med_dominates(curves["med"].front(), padded);
                sys_rep["med_dominates_nonnegative_padding"] = d.passed;
                all_ok = all_ok && d.passed;
            }
        }
        report[id] = sys_rep;
    }
    write_file((fs::path(o.out_dir) / "dominance.json").string(), report.dump(2) + "\n");
    write_file((fs::path(o.out_dir) / "manifest.json").string(),
               manifest(setup, seed, {{"command", "sweep"}, {"options", eff}}).dump(2) + "\n");
    out << report.dump(2) << '\n';
    return all_ok ? kOk : kDomainFailure;
}

// =============================================================================
// ablate
// =============================================================================

struct AblateOptions {
    std::string systems_path = experiments::kDefaultSystemsPath;
    std::string system_id = "A";
    std::vector<experiments::GainPair> pairs = experiments::default_gain_pairs();
    std::vector<double> deltas{};
    std::optional<std::size_t> population{};
    std::optional<std::uint64_t> seed{};
    std::size_t jobs = 1;
    std::string out_dir = "out";
};

/// Parse "p1:p2" pairs.
[[nodiscard]] inline experiments::GainPair parse_pair(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos)
        throw ParseError("--pairs", "expected p1:p2, got '" + s + "'");
    try {
        return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
    } catch (const std::exception&) {
        throw ParseError("--pairs", "expected numbers in '" + s + "'");
    }
}

inline int cmd_ablate(const AblateOptions& o, bool print_config, std::ostream& out) {
    using namespace experiments;
    const auto setup = load_setup(o.systems_path);
    json pairs = json::array();
    for (const auto& p : o.pairs)
        pairs.push_back({p.p1, p.p2});
    const json eff{{"systems_path", o.systems_path},
                   {"system", o.system_id},
                   {"pairs", pairs},
                   {"deltas", o.deltas.empty() ? default_deltas() : o.deltas},
                   {"population", o.population.value_or(setup.population)},
                   {"seed", o.seed ? *o.seed : default_seed()},
                   {"jobs", o.jobs},
                   {"out_dir", o.out_dir}};
    if (print_config) {
        out << eff.dump(2) << '\n';
        return kOk;
    }
    ensure_dir(o.out_dir);
    SweepContext ctx{&setup};
    ctx.jobs = o.jobs;
    const auto seed = eff["seed"].get<std::uint64_t>();
    const auto curves = run_gain_ablation(setup.system(o.system_id), o.pairs,
                                          eff["deltas"].get<std::vector<double>>(),
                                          eff["population"].get<std::size_t>(), seed, ctx);
    std::string summary = summary_csv_header();
    std::string long_csv = long_csv_header();
    json rep = json::array();
    bool compliant_ok = true;
    for (const auto& c : curves) {
        summary += summary_csv_rows(c.points);
        long_csv += long_csv_rows(c.points);
        std::size_t stated = 0, corrected = 0, lemma = 0;
        for (const auto& p : c.points) {
            stated += p.stated_bound_failures;
            corrected += p.corrected_bound_failures;
            lemma += p.lemma_failures;
        }
        if (c.pair.compliant())
            compliant_ok = compliant_ok && corrected == 0 && lemma == 0;
        rep.push_back({{"pair", c.pair.label()},
                       {"k_plus", c.gains.k_plus},
                       {"k_minus", c.gains.k_minus},
                       {"compliant", c.pair.compliant()},
                       {"simulated", !c.points.empty()},
                       {"long_term_bound_failures", stated},
                       {"corrected_bound_failures", corrected},
                       {"per_step_failures", lemma}});
    }
    write_file((fs::path(o.out_dir) / (o.system_id + "_ablation_summary.csv")).string(), summary);
    write_file((fs::path(o.out_dir) / (o.system_id + "_ablation_long.csv")).string(), long_csv);
    write_file((fs::path(o.out_dir) / "ablation.json").string(), rep.dump(2) + "\n");
    write_file((fs::path(o.out_dir) / "manifest.json").string(),
               manifest(setup, seed, {{"command", "ablate"}, {"options", eff}}).dump(2) + "\n");
    out << rep.dump(2) << '\n';
    return compliant_ok ? kOk : kDomainFailure;
}

// =============================================================================
// verify
// =============================================================================

struct VerifyOptions {
    std::optional<std::uint64_t> seed{};
    std::size_t theorem2_runs = 1000;
    std::size_t prop2_runs = 100;
    std::size_t theorem1_runs = 200;
    std::size_t gmed_runs = 100;
    std::string out_path{}; ///< optional JSON report file
};

struct VerifyResult {
    std::vector<suites::SuiteReport> reports;
    [[nodiscard]] bool all_passed() const {
        for (const auto& r : reports)
            if (!r.passed)
                return false;
        return true;
    }
};

[[nodiscard]] inline VerifyResult run_verify(const VerifyOptions& o) {
    const std::uint64_t seed = o.seed ? *o.seed : default_seed();
    VerifyResult v;
    auto t2 = suites::run_theorem2_suite(o.theorem2_runs, seed);
    v.reports.push_back(std::move(t2.theorem2));
    v.reports.push_back(std::move(t2.lemma1));
    v.reports.push_back(suites::run_prop2_suite(o.prop2_runs, seed + 1));
    v.reports.push_back(suites::run_theorem1_suite(o.theorem1_runs, seed + 2));
    v.reports.push_back(suites::run_generalized_med_suite(o.gmed_runs, seed + 3));
    // informational: the bound with the terminal-dose term kept
    t2.corrected.name += " (informational)";
    v.reports.push_back(std::move(t2.corrected));
    return v;
}

inline int cmd_verify(const VerifyOptions& o, bool print_config, std::ostream& out) {
    const json eff{{"seed", o.seed ? *o.seed : default_seed()},
                   {"theorem2_runs", o.theorem2_runs},
                   {"prop2_runs", o.prop2_runs},
                   {"theorem1_runs", o.theorem1_runs},
                   {"gmed_runs", o.gmed_runs}};
    if (print_config) {
        out << eff.dump(2) << '\n';
        return kOk;
    }
    const auto v = run_verify(o);
    json rep = json::array();
    bool ok = true;
    for (const auto& r : v.reports) {
        rep.push_back(suites::to_json(r));
        if (r.name.find("informational") == std::string::npos)
            ok = ok && r.passed;
        out << (r.passed ? "PASS " : "FAIL ") << r.name << "  runs=" << r.runs
            << " failures=" << r.failures << '\n';
    }
    if (!o.out_path.empty())
        write_file(o.out_path, json{{"effective_config", eff}, {"suites", rep}}.dump(2) + "\n");
    return ok ? kOk : kDomainFailure;
}

} // namespace taper::cli
