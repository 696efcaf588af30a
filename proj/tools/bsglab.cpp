// Command-line driver: level-equation solves, free-energy estimation, the
// lower-bound sweep, convexity probes, the saddle-formula experiment, and the
// cross-module validation suite. All estimates carry a seed and standard
// error; reruns with the same config and seed are bit-identical.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bsg/harness.hpp"

namespace {

bsg::ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) return bsg::ExperimentConfig{};
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    bsg::json j;
    in >> j;
    return bsg::config_from_json(j);
}

void apply_overrides(bsg::ExperimentConfig& config, const std::optional<std::uint64_t>& seed,
                     const std::optional<std::string>& out,
                     const std::optional<unsigned>& threads) {
    if (seed) config.seed = *seed;
    if (out) config.out_dir = *out;
    if (threads) config.threads = *threads;
    std::filesystem::create_directories(config.out_dir);
}

int report_and_exit(const std::vector<bsg::ResultRecord>& records,
                    const bsg::ExperimentConfig& config, const std::string& name) {
    bsg::emit_report(records, config.out_dir, name);
    bool all_pass = true;
    for (const auto& r : records) {
        std::cout << (r.pass ? "[pass] " : "[FAIL] ") << r.experiment << "  " << r.parameters
                  << "  estimate=" << r.estimate << " stderr=" << r.stderr_
                  << " tolerance=" << r.tolerance << "\n";
        all_pass = all_pass && r.pass;
    }
    std::cout << (all_pass ? "all records pass" : "some records FAILED") << " -> "
              << config.out_dir << "/" << name << ".{csv,json}\n";
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bipartite spin-glass numerical laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<unsigned> threads;
    app.add_option("--config", config_path, "JSON experiment config");
    app.add_option("--seed", seed, "master seed override");
    app.add_option("--out", out_dir, "output directory override");
    app.add_option("--threads", threads, "worker thread count override");

    auto* solve = app.add_subcommand("solve-hj", "march the level equation and dump the field");
    auto* estimate = app.add_subcommand("estimate-free-energy", "quenched estimate at the config model");
    auto* bound = app.add_subcommand("check-bound", "free energy vs solution lower-bound sweep");
    auto* convexity = app.add_subcommand("probe-convexity", "tilt profiles chi, chi', chi''");
    auto* pierro = app.add_subcommand("pierro", "transplanted saddle formula experiment");
    auto* validate = app.add_subcommand("validate", "run every cross-module invariant");
    bool negative_control = false;
    validate->add_flag("--negative-control", negative_control,
                       "append one deliberately failing record");

    double pierro_t = 0.25;
    std::size_t pierro_k = 3;
    double pierro_bias = 0.75;
    pierro->add_option("--t", pierro_t, "time at which to evaluate the formula");
    pierro->add_option("--k-opt", pierro_k, "quantile vector dimension");
    pierro->add_option("--bias", pierro_bias, "P[+1] of the second species");

    CLI11_PARSE(app, argc, argv);

    try {
        bsg::ExperimentConfig config = load_config(config_path);
        apply_overrides(config, seed, out_dir, threads);

        if (solve->parsed()) {
            auto psi = [&](const bsg::MeasurePair& mu) {
                return bsg::initial_condition_psi(mu, config.model.pi1, config.model.pi2);
            };
            const bsg::SolutionField field = bsg::solve_hj(
                bsg::HamiltonianSpec::bipartite(), bsg::InitialCondition::from_pair(psi),
                config.grid);
            {
                std::ofstream csv(config.out_dir + "/field.csv");
                bsg::field_to_csv(field, csv);
            }
            std::ofstream bin(config.out_dir + "/field.bin", std::ios::binary);
            bsg::field_to_binary(field, bin);
            std::cout << "solved to t=" << field.time
                      << ", lipschitz=" << field.lipschitz_seminorm << " -> " << config.out_dir
                      << "/field.{csv,bin}\n";
            return 0;
        }
        if (estimate->parsed()) {
            const bsg::Estimate fe =
                bsg::quenched_free_energy(config.model, config.samples.n_disorder,
                                          config.samples.branching, config.seed, config.threads);
            std::cout << "F_N = " << fe.value << " +- " << fe.stderr_ << " (n=" << fe.n << ")\n";
            std::ofstream csv(config.out_dir + "/free_energy.csv");
            bsg::free_energy_csv_header(csv);
            bsg::free_energy_csv_row(csv, config.model, fe, config.seed);
            std::ofstream js(config.out_dir + "/free_energy.json");
            js << bsg::json{{"model", bsg::model_to_json(config.model)},
                            {"estimate", fe.value},
                            {"stderr", fe.stderr_},
                            {"n_disorder", fe.n},
                            {"seed", config.seed}}
                      .dump(2)
               << "\n";
            return 0;
        }
        if (bound->parsed()) {
            const auto records = bsg::run_lower_bound(config);
            return report_and_exit(records, config, "lower_bound");
        }
        if (convexity->parsed()) {
            std::ofstream csv(config.out_dir + "/chi_profiles.csv");
            csv << "bias,h,chi,dchi,d2chi\n";
            for (double p : {0.5, 0.25 * (2.0 + std::sqrt(2.0))}) {
                const bsg::DiscreteMeasure pi = bsg::two_point_pm1(p);
                for (double h : {0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 50.0}) {
                    const bsg::ChiProfile c = bsg::chi_profile(pi, h);
                    csv << p << "," << h << "," << c.chi << "," << c.d1 << "," << c.d2 << "\n";
                }
                const bsg::ChiProfile at0 = bsg::chi_profile(pi, 0.0);
                std::cout << "bias p=" << p << ": chi''(0)=" << at0.d2
                          << (at0.d2 > 0 ? "  (convex at 0)" : "  (concave at 0)") << "\n";
            }
            std::cout << "profiles -> " << config.out_dir << "/chi_profiles.csv\n";
            return 0;
        }
        if (pierro->parsed()) {
            auto psi = [&](const bsg::MeasurePair& mu) {
                return bsg::initial_condition_psi(mu, bsg::uniform_pm1(),
                                                  bsg::two_point_pm1(pierro_bias), 16);
            };
            const bsg::SaddleResult res =
                bsg::pierro_saddle_value(psi, pierro_t, pierro_k, config.seed);
            bsg::json out{{"t", pierro_t},
                          {"value", res.value},
                          {"slope", res.value / pierro_t},
                          {"optimizer_first", res.optimizer_first},
                          {"optimizer_second", res.optimizer_second}};
            std::ofstream js(config.out_dir + "/pierro.json");
            js << out.dump(2) << "\n";
            std::cout << "saddle value at t=" << pierro_t << ": " << res.value
                      << " (slope " << res.value / pierro_t
                      << "; the equation's slope at the origin is 0)\n";
            return 0;
        }
        if (validate->parsed()) {
            config.negative_control = config.negative_control || negative_control;
            const auto records = bsg::run_validation_suite(config);
            return report_and_exit(records, config, "validation");
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
