// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--seed N] [--work-dir DIR] [--known-failure NAME]...
//
// Exit status is 0 when every criterion passes or fails only under a listed
// --known-failure name; known failures still print FAIL.
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "taper/cli.hpp"
#include "taper/experiments.hpp"
#include "taper/session.hpp"
#include "taper/suites.hpp"

using namespace taper;
namespace fs = std::filesystem;

namespace {

struct Line {
    std::string name;
    bool passed;
    std::string detail;
    double seconds;
    bool informational = false;
};

class Timer {
public:
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string counts(const suites::SuiteReport& r) {
    return "runs=" + std::to_string(r.runs) + " failures=" + std::to_string(r.failures);
}

// -----------------------------------------------------------------------------

std::vector<Line> theorem2_and_lemma(std::uint64_t seed) {
    Timer t;
    const auto r = suites::run_theorem2_suite(1000, seed);
    const double s = t.seconds();
    const bool fast = s < 60.0;
    return {
        {"theorem2_prefix_bound", r.theorem2.passed && fast, counts(r.theorem2), s},
        {"lemma1_per_step", r.lemma1.passed && fast, counts(r.lemma1), s},
        {"theorem2_prefix_bound_with_terminal_dose", r.corrected.passed, counts(r.corrected), s,
         true},
    };
}

Line prop2(std::uint64_t seed) {
    Timer t;
    const auto r = suites::run_prop2_suite(100, seed);
    const double s = t.seconds();
    return {"prop2_monotone_finite_time", r.passed && r.runs >= 100 && s < 30.0, counts(r), s};
}

Line theorem1(std::uint64_t seed) {
    Timer t;
    const auto r = suites::run_theorem1_suite(200, seed);
    const double s = t.seconds();
    return {"theorem1_med_oracle", r.passed && r.runs >= 200 && s < 300.0, counts(r), s};
}

Line generalized_med(std::uint64_t seed) {
    Timer t;
    const auto r = suites::run_generalized_med_suite(100, seed);
    return {"generalized_med_bisection", r.passed && r.runs >= 100, counts(r), t.seconds()};
}

Line reproduction(std::uint64_t seed) {
    using namespace experiments;
    Timer t;
    const auto setup = load_setup();
    SweepContext ctx{&setup};
    std::ostringstream why;
    bool ok = setup.systems.size() == 4;
    for (const auto& sys : setup.systems) {
        const auto head = run_sweep(sys, {Family::integral, reproduction_deltas(), setup.population, seed}, ctx);
        const auto wide = run_sweep(sys, {Family::integral, default_deltas(), setup.population, seed}, ctx);
        const auto lin = run_sweep(
            sys, {Family::linear, default_linear_rates(sys.taper_steps), setup.population, seed}, ctx);
        const auto expo = run_sweep(
            sys, {Family::exponential, default_exponential_rates(sys.taper_steps), setup.population, seed},
            ctx);
        const auto med = run_sweep(sys, {Family::med, {}, setup.population, seed}, ctx);
        const bool a = baseline_dominated(head, lin).passed && baseline_dominated(wide, lin).passed;
        const bool b = baseline_dominated(head, expo).passed && baseline_dominated(wide, expo).passed;
        const bool c = med_dominates(med.front(), head).passed;
        ok = ok && a && b && c;
        auto mark = [](bool v) { return v ? "ok" : "FAIL"; };
        why << ' ' << sys.id << "[linear " << mark(a) << ", exponential " << mark(b) << ", med "
            << mark(c) << ']';
    }
    const double s = t.seconds();
    return {"canonical_reproduction", ok && s < 600.0,
            "N=" + std::to_string(setup.population) + why.str(), s};
}

Line determinism(std::uint64_t seed, const fs::path& work) {
    Timer t;
    auto run = [&](const std::string& sub, std::size_t jobs) {
        cli::SweepOptions o;
        o.seed = seed;
        o.jobs = jobs;
        o.out_dir = (work / sub).string();
        fs::remove_all(o.out_dir);
        std::ostringstream sink;
        (void)cli::cmd_sweep(o, false, sink);
        return o.out_dir;
    };
    const auto a = run("sweep_1", 1);
    const auto b = run("sweep_2", 2);
    bool ok = true;
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        if (e.path().extension() != ".csv")
            continue;
        const auto other = fs::path(b) / e.path().filename();
        ok = ok && fs::exists(other) &&
             read_file(e.path().string()) == read_file(other.string());
        ++compared;
    }
    ok = ok && compared == 8;
    return {"sweep_determinism", ok, "csv_files=" + std::to_string(compared), t.seconds()};
}

Line session_replay(std::uint64_t seed, const fs::path& work) {
    using namespace session;
    Timer t;
    const fs::path root = work / "sessions";
    fs::remove_all(root);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    double now = 0.0;
    auto clock = [&now] { return now; };

    struct Ref {
        std::string id, secret;
        json history;
    };
    std::vector<Ref> refs;
    bool ok = true;
    std::size_t checked = 0;
    {
        SessionStore store(root, clock, 5);
        for (int k = 0; k < 20; ++k) {
            SessionConfig cfg;
            const auto g = gains_from_g0_range(0.2 + 0.3 * (unif(rng) + 3.0) / 6.0, 1.0);
            cfg.k_plus = g.k_plus;
            cfg.k_minus = g.k_minus;
            cfg.y_min = unif(rng) * 0.3;
            cfg.u_init = 1.0 + (unif(rng) + 3.0) / 3.0;
            if (k % 3 == 0)
                cfg.dose_cap = 2.5;
            const auto s = store.create(cfg);
            for (int i = 0; i < 30; ++i) {
                now += 86400.0 * (i % 7 == 6 ? 3.0 : 1.0);
                (void)store.submit(s.id, s.secret, unif(rng), "m" + std::to_string(i));
                if (i % 4 == 0)
                    (void)store.submit(s.id, s.secret,
                                       store.state(s.id, s.secret).measurements.back().y,
                                       "m" + std::to_string(i));
                if (i % 9 == 4)
                    (void)store.update_constraint(s.id, s.secret, unif(rng) * 0.3,
                                                  0.1 * (unif(rng) + 3.0) / 6.0);
            }
            refs.push_back({s.id, s.secret, store.history(s.id, s.secret)});
            const auto rep = verify_replay(store.events(s.id));
            ok = ok && rep.consistent && rep.measurements == 30;
            ++checked;
        }
    }
    // crash: a torn record at the end of one log, then a fresh process
    {
        std::ofstream out(root / refs.front().id / "events.jsonl", std::ios::app);
        out << R"({"type":"measurement","st)";
    }
    SessionStore reopened(root, clock, 5);
    for (const auto& r : refs) {
        ok = ok && reopened.history(r.id, r.secret) == r.history;
        ok = ok && verify_replay(reopened.events(r.id)).consistent;
    }
    const auto next = reopened.submit(refs.front().id, refs.front().secret, 0.0, "after");
    ok = ok && next.measurement.u_prev == refs.front().history["u_prev"].get<double>();
    return {"session_replay_and_restart", ok, "sessions=" + std::to_string(checked), t.seconds()};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::uint64_t seed = experiments::kDefaultSeed;
    std::string work = (fs::temp_directory_path() / "taper_acceptance").string();
    std::vector<std::string> known;
    app.add_option("--seed", seed);
    app.add_option("--work-dir", work);
    app.add_option("--known-failure", known, "Criterion expected to fail");
    CLI11_PARSE(app, argc, argv);
    const std::set<std::string> expected(known.begin(), known.end());
    fs::create_directories(work);

    std::vector<Line> lines = theorem2_and_lemma(seed);
    lines.push_back(prop2(seed + 1));
    lines.push_back(theorem1(seed + 2));
    lines.push_back(reproduction(seed));
    lines.push_back(generalized_med(seed + 3));
    lines.push_back(determinism(seed, work));
    lines.push_back(session_replay(seed, work));

    int unexpected = 0;
    for (const auto& l : lines) {
        std::cout << (l.passed ? "PASS " : "FAIL ") << l.name << "  " << l.detail << "  ("
                  << format_double(std::round(l.seconds * 100.0) / 100.0) << "s)";
        if (l.informational)
            std::cout << "  [informational]";
        else if (expected.count(l.name))
            std::cout << (l.passed ? "  [listed as known failure but passed]" : "  [known failure]");
        std::cout << '\n';
        if (!l.passed && !l.informational && !expected.count(l.name))
            ++unexpected;
    }
    return unexpected == 0 ? 0 : 1;
}
