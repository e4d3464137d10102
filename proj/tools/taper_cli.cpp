// taper: certify kernels, simulate protocols, run sweeps and oracle suites,
// and serve interactive sessions.
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "taper/cli.hpp"
#include "taper/http_service.hpp"

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server)
        g_server->stop();
}

} // namespace

int main(int argc, char** argv) {
    using namespace taper;
    CLI::App app{"Tapering-control toolkit"};
    app.require_subcommand(1);
    bool print_config = false;
    app.add_flag("--print-effective-config", print_config,
                 "Print the merged configuration and exit");

    // certify
    auto* certify = app.add_subcommand("certify", "Certify a system spec as an LPOP");
    std::string spec_path;
    certify->add_option("spec", spec_path, "System spec JSON")->required();

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Closed-loop simulation of one unit");
    cli::SimulateOptions sim;
    simulate->add_option("--config", sim.config_path, "Simulation config JSON");
    simulate->add_option("--systems", sim.systems_path, "Canonical systems file");
    simulate->add_option("--system", sim.system, "Canonical id or system spec path");
    simulate->add_option("--policy", sim.policy_path, "Policy spec JSON");
    simulate->add_option("--taper-steps", sim.taper_steps);
    simulate->add_option("--y-min", sim.y_min);
    simulate->add_option("--warmup-dose", sim.warmup_dose);
    simulate->add_option("--warmup-steps", sim.warmup_steps);
    simulate->add_option("--noise", sim.noise_half_width, "Uniform noise half-width (0 = off)");
    simulate->add_option("--seed", sim.seed);
    simulate->add_flag("--check-bounds", sim.check_bounds,
                       "Check the long-term and per-step bounds (integral policy)");
    simulate->add_option("--out", sim.out_dir, "Output directory");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Population trade-off curves");
    cli::SweepOptions sw;
    sweep->add_option("--systems", sw.systems_path, "Canonical systems file");
    sweep->add_option("--system", sw.system_ids, "System ids (default: all)")->delimiter(',');
    sweep->add_option("--families", sw.families, "Protocol families")->delimiter(',');
    sweep->add_option("--population", sw.population);
    sweep->add_option("--seed", sw.seed);
    sweep->add_option("--deltas", sw.deltas, "Integral padding values")->delimiter(',');
    sweep->add_option("--grid-points", sw.grid_points, "Baseline rate grid size");
    sweep->add_option("--jobs", sw.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sweep->add_option("--out", sw.out_dir, "Output directory");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "Gain-range ablation");
    cli::AblateOptions ab;
    std::vector<std::string> pair_args;
    ablate->add_option("--systems", ab.systems_path, "Canonical systems file");
    ablate->add_option("--system", ab.system_id);
    ablate->add_option("--pairs", pair_args, "p1:p2 pairs")->delimiter(',');
    ablate->add_option("--deltas", ab.deltas)->delimiter(',');
    ablate->add_option("--population", ab.population);
    ablate->add_option("--seed", ab.seed);
    ablate->add_option("--jobs", ab.jobs)->check(CLI::PositiveNumber);
    ablate->add_option("--out", ab.out_dir, "Output directory");

    // verify
    auto* verify = app.add_subcommand("verify", "Randomized oracle suites");
    cli::VerifyOptions ver;
    verify->add_option("--seed", ver.seed);
    verify->add_option("--theorem2-runs", ver.theorem2_runs);
    verify->add_option("--prop2-runs", ver.prop2_runs);
    verify->add_option("--theorem1-runs", ver.theorem1_runs);
    verify->add_option("--gmed-runs", ver.gmed_runs);
    verify->add_option("--out", ver.out_path, "JSON report path");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the session service");
    std::string bind = env_or("TAPER_BIND", "127.0.0.1");
    int port = std::atoi(env_or("TAPER_PORT", "8080").c_str());
    std::string storage = env_or("TAPER_STORAGE", "sessions");
    serve->add_option("--bind", bind);
    serve->add_option("--port", port);
    serve->add_option("--storage", storage, "Session storage directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? cli::kOk : cli::kUsage;
    }

    try {
        if (*certify)
            return cli::cmd_certify(spec_path, std::cout);
        if (*simulate)
            return cli::cmd_simulate(sim, print_config, std::cout, std::cerr);
        if (*sweep)
            return cli::cmd_sweep(sw, print_config, std::cout);
        if (*ablate) {
            if (!pair_args.empty()) {
                ab.pairs.clear();
                for (const auto& p : pair_args)
                    ab.pairs.push_back(cli::parse_pair(p));
            }
            return cli::cmd_ablate(ab, print_config, std::cout);
        }
        if (*verify)
            return cli::cmd_verify(ver, print_config, std::cout);
        if (*serve) {
            if (print_config) {
                std::cout << json{{"bind", bind}, {"port", port}, {"storage", storage}}.dump(2)
                          << '\n';
                return cli::kOk;
            }
            session::SessionStore store(storage);
            httplib::Server srv;
            session::register_routes(srv, store);
            g_server = &srv;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "serving on " << bind << ':' << port << ", storage " << storage << '\n';
            if (!srv.listen(bind, port)) {
                std::cerr << "cannot bind " << bind << ':' << port << '\n';
                return cli::kDomainFailure;
            }
            return cli::kOk;
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kUsage;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kUsage;
    } catch (const ModelError& e) {
        std::cerr << "invalid model: " << e.what() << '\n';
        return cli::kUsage;
    } catch (const PolicyError& e) {
        std::cerr << "invalid policy: " << e.what() << '\n';
        return cli::kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kDomainFailure;
    }
    return cli::kUsage;
}
