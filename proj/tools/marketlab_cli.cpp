// marketlab: scenario runner for the entropy-maximizing market laboratory.
//
// Scenarios wire the library modules to config, write reports and plot data
// under an output directory with a manifest, and use the exit-code contract
//   0 = all checks passed, 1 = execution/config error, 2 = a check failed.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "marketlab/activity.hpp"
#include "marketlab/density.hpp"
#include "marketlab/entropy_max.hpp"
#include "marketlab/general_market.hpp"
#include "marketlab/io.hpp"
#include "marketlab/params.hpp"
#include "marketlab/sde.hpp"
#include "marketlab/stats.hpp"
#include "marketlab/verify.hpp"
#include "marketlab/version.hpp"

namespace {

using namespace marketlab;
using nlohmann::json;

struct RunConfig {
    std::string scenario = "full-verify";
    ModelParams model = ModelParams::entropy_maximizing(3, 0.05);
    std::size_t paths = 0; // 0: scenario default
    std::string output_dir = "marketlab_out";
    bool emit_csv = true;
    bool emit_json = true;
    json raw = json::object();
};

const std::vector<std::string> kScenarios{"simulate",  "theorem1",           "equilibrium",
                                          "theorem3",  "gop",                "reference-transform",
                                          "full-verify"};

int print_results(const std::vector<CriterionResult>& results) {
    bool all = true;
    for (const auto& r : results) {
        std::printf("[%s] criterion %2d %-40s (%6.2fs) %s\n", r.pass ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), r.seconds, r.detail.c_str());
        all = all && r.pass;
    }
    return all ? 0 : 2;
}

json results_json(const std::vector<CriterionResult>& results) {
    json rows = json::array();
    for (const auto& r : results)
        rows.push_back({{"id", r.id},
                        {"name", r.name},
                        {"pass", r.pass},
                        {"detail", r.detail},
                        {"seconds", r.seconds}});
    return rows;
}

int scenario_simulate(const RunConfig& cfg, ArtifactSink& sink) {
    const std::size_t paths = cfg.paths ? cfg.paths : 1000;
    const auto& params = cfg.model;

    if (cfg.emit_csv) {
        const std::size_t csv_paths = std::min<std::size_t>(paths, 200);
        const auto sample = simulate_basis_market(params, csv_paths);
        write_paths_csv(sink.path_for("paths.csv"), sample);
    }

    std::vector<double> times;
    for (double t : {0.25, 0.5, 1.0}) times.push_back(t * params.horizon);
    const auto slices = simulate_slices(params, paths, times);

    json summary;
    summary["seed"] = params.seed;
    summary["paths"] = paths;
    const GammaLaw stationary(2.0, 2.0 / params.y_bar);
    json per_time = json::array();
    std::vector<double> buf(paths);
    for (std::size_t t = 0; t < times.size(); ++t) {
        json row{{"t", times[t]}};
        for (int j = 0; j < params.n; ++j) {
            for (std::size_t p = 0; p < paths; ++p) buf[p] = slices.y[slices.idx(p, t, j)];
            const auto sy = summarize(buf);
            const double ks = ks_statistic(
                buf, [&](double y) { return stationary.cdf(y); });
            std::vector<double> lb(paths), bb(paths);
            for (std::size_t p = 0; p < paths; ++p) {
                lb[p] = std::log(slices.y[slices.idx(p, t, j)]);
                bb[p] = slices.b_hat[slices.idx(p, t, j)];
            }
            row["components"].push_back({{"component", j},
                                         {"mean_y", sy.mean},
                                         {"se_y", sy.se},
                                         {"mean_log_y", summarize(lb).mean},
                                         {"mean_b_hat", summarize(bb).mean},
                                         {"ks_vs_stationary", ks},
                                         {"ks_critical_1pct", ks_critical_value(paths, 0.01)}});
        }
        per_time.push_back(row);
    }
    summary["slices"] = per_time;
    if (cfg.emit_json) write_json(sink.path_for("summary.json"), summary);
    return 0;
}

int scenario_criteria(const RunConfig& cfg, ArtifactSink& sink, const std::vector<int>& ids,
                      const char* summary_name) {
    VerifyConfig vc;
    vc.seed = cfg.model.seed ? cfg.model.seed : vc.seed;
    if (cfg.paths) {
        vc.mc_paths = cfg.paths;
        vc.tfit_samples = cfg.paths;
        vc.ks_samples = cfg.paths;
    }
    std::vector<CriterionResult> results;
    for (int id : ids) results.push_back(run_criterion(id, vc, &sink));
    if (cfg.emit_json) write_json(sink.path_for(summary_name), results_json(results));
    return print_results(results);
}

int scenario_equilibrium(const RunConfig& cfg, ArtifactSink& sink) {
    const double a = cfg.raw.value("market_activity", 0.05);
    const int n = cfg.raw.value("n", cfg.model.n);
    const auto eq = equilibrium_maximize(a, n, 20, cfg.model.seed, /*keep_trace=*/true);
    if (cfg.emit_csv) {
        CsvWriter csv(sink.path_for("equilibrium_trace.csv"),
                      {"restart", "iteration", "objective", "constraint_residual"});
        for (const auto& row : eq.trace)
            csv.row({static_cast<double>(row.restart), static_cast<double>(row.iteration),
                     row.objective, row.constraint_residual});
    }
    if (cfg.emit_json) {
        write_json(sink.path_for("equilibrium_report.json"),
                   json{{"market_activity", a},
                        {"n", n},
                        {"activities", eq.profile.activities},
                        {"objective", eq.objective},
                        {"max_deviation", eq.max_deviation},
                        {"converged", eq.converged}});
    }
    const int code = scenario_criteria(cfg, sink, {5, 6}, "equilibrium_checks.json");
    return eq.max_deviation < 1e-6 ? code : 2;
}

int scenario_gop(const RunConfig& cfg, ArtifactSink& sink) {
    if (!cfg.raw.contains("market"))
        throw std::invalid_argument("gop scenario needs config field 'market' {mu, sigma}");
    const auto spec = GeneralMarketSpec::from_json(cfg.raw.at("market"));
    json report{{"market", spec.to_json()}};
    int code = 0;
    try {
        const auto sol = gop_solve(spec);
        report["solution"] = sol.to_json();
        report["growth_rate"] = growth_rate(spec, sol.weights);
        report["no_gop"] = false;
    } catch (const NoGopError& e) {
        report["no_gop"] = true;
        report["image_residual"] = e.residual;
        code = 2;
    }
    if (cfg.emit_json) write_json(sink.path_for("gop_report.json"), report);
    std::printf("%s\n", report.dump(2).c_str());
    return code;
}

int scenario_full_verify(const RunConfig& cfg, ArtifactSink& sink) {
    VerifyConfig vc;
    vc.seed = cfg.model.seed ? cfg.model.seed : vc.seed;
    if (cfg.paths) {
        vc.mc_paths = cfg.paths;
        vc.tfit_samples = cfg.paths;
        vc.ks_samples = cfg.paths;
        vc.t3_paths = std::max<std::size_t>(40, cfg.paths / 50);
        vc.leverage_paths = std::max<std::size_t>(30, cfg.paths / 500);
    }
    const auto results = run_acceptance(vc, &sink, [](const CriterionResult& r) {
        std::printf("[%s] criterion %2d %-40s (%6.2fs) %s\n", r.pass ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), r.seconds, r.detail.c_str());
        std::fflush(stdout);
    });
    if (cfg.emit_json) write_json(sink.path_for("verify_summary.json"), results_json(results));
    bool all = true;
    for (const auto& r : results) all = all && r.pass;
    return all ? 0 : 2;
}

int dispatch(const RunConfig& cfg) {
    ArtifactSink sink(cfg.output_dir);
    int code = 0;
    if (cfg.scenario == "simulate") {
        code = scenario_simulate(cfg, sink);
    } else if (cfg.scenario == "theorem1") {
        code = scenario_criteria(cfg, sink, {1, 2, 3}, "theorem1_checks.json");
    } else if (cfg.scenario == "equilibrium") {
        code = scenario_equilibrium(cfg, sink);
    } else if (cfg.scenario == "theorem3") {
        code = scenario_criteria(cfg, sink, {10}, "theorem3_checks.json");
    } else if (cfg.scenario == "gop") {
        code = scenario_gop(cfg, sink);
    } else if (cfg.scenario == "reference-transform") {
        code = scenario_criteria(cfg, sink, {12}, "reference_checks.json");
    } else if (cfg.scenario == "full-verify") {
        code = scenario_full_verify(cfg, sink);
    } else {
        throw std::invalid_argument("unknown scenario: " + cfg.scenario);
    }
    json config_echo{{"scenario", cfg.scenario},
                     {"model", cfg.model.to_json()},
                     {"paths", cfg.paths},
                     {"formats", json::array()}};
    if (cfg.emit_csv) config_echo["formats"].push_back("csv");
    if (cfg.emit_json) config_echo["formats"].push_back("json");
    sink.write_manifest(config_echo, cfg.model.seed, version_string());
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"entropy-maximizing market dynamics laboratory"};
    app.set_version_flag("--version", marketlab::version_string());

    std::string config_file, scenario, out_dir, formats;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t paths = 0;

    app.add_option("--config", config_file, "JSON config file");
    app.add_option("--scenario", scenario, "one of simulate|theorem1|equilibrium|theorem3|gop|reference-transform|full-verify");
    app.add_option("--seed", seed, "64-bit seed")->each([&](const std::string&) { seed_set = true; });
    app.add_option("--paths", paths, "Monte Carlo path count");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--format", formats, "comma list from {csv,json}");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg;
        if (!config_file.empty()) {
            std::ifstream in(config_file);
            if (!in) throw std::invalid_argument("cannot open config file " + config_file);
            cfg.raw = json::parse(in);
            if (cfg.raw.contains("scenario")) cfg.scenario = cfg.raw.at("scenario");
            if (cfg.raw.contains("model")) cfg.model = ModelParams::from_json(cfg.raw.at("model"));
            if (cfg.raw.contains("paths")) cfg.paths = cfg.raw.at("paths").get<std::size_t>();
            if (cfg.raw.contains("output_dir")) cfg.output_dir = cfg.raw.at("output_dir");
            if (cfg.raw.contains("formats")) {
                cfg.emit_csv = cfg.emit_json = false;
                for (const auto& f : cfg.raw.at("formats")) {
                    if (f == "csv") cfg.emit_csv = true;
                    if (f == "json") cfg.emit_json = true;
                }
            }
        }
        if (!scenario.empty()) cfg.scenario = scenario;
        if (seed_set) cfg.model.seed = seed;
        if (paths) cfg.paths = paths;
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (!formats.empty()) {
            cfg.emit_csv = formats.find("csv") != std::string::npos;
            cfg.emit_json = formats.find("json") != std::string::npos;
        }

        bool known = false;
        for (const auto& s : kScenarios) known = known || s == cfg.scenario;
        if (!known) throw std::invalid_argument("unknown scenario: " + cfg.scenario);
        cfg.model.validate();

        return dispatch(cfg);
    } catch (const std::exception& e) {
        const json err{{"error", e.what()}};
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 1;
    }
}
