#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gcnstab/experiments.hpp"

namespace {

using namespace gcnstab;

EdgePerturbation parse_perturb_arg(const Graph& g, const std::string& text) {
    std::vector<SignedEdge> items;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        int sign = 0;
        std::size_t pos = 0;
        if (tok[0] == '+') {
            sign = +1;
            pos = 1;
        } else if (tok[0] == '-') {
            sign = -1;
            pos = 1;
        }
        const std::size_t dash = tok.find('-', pos);
        if (dash == std::string::npos || dash == pos ||
            dash + 1 >= tok.size())
            throw ConfigError({"bad edge '" + tok +
                               "' (expected u-v, optionally prefixed + or -)"});
        int u = 0, v = 0;
        try {
            u = std::stoi(tok.substr(pos, dash - pos));
            v = std::stoi(tok.substr(dash + 1));
        } catch (const std::exception&) {
            throw ConfigError({"bad edge '" + tok + "': endpoints must be ints"});
        }
        Edge e = make_edge(u, v);
        if (sign == 0) sign = g.has_edge(e) ? -1 : +1;
        items.push_back({e, sign});
    }
    if (items.empty())
        throw ConfigError({"--perturb lists no edges"});
    return EdgePerturbation(std::move(items));
}

nlohmann::json spectrum_json(const SpectralDecomposition& sd) {
    nlohmann::json eigenvalues = nlohmann::json::array();
    nlohmann::json eigenvectors = nlohmann::json::array();
    for (int i = 0; i < sd.size(); ++i) {
        eigenvalues.push_back(sd.eigenvalues(i));
        nlohmann::json col = nlohmann::json::array();
        for (int r = 0; r < sd.size(); ++r)
            col.push_back(sd.eigenvectors(r, i));
        eigenvectors.push_back(std::move(col));
    }
    return {{"eigenvalues", std::move(eigenvalues)},
            {"eigenvectors", std::move(eigenvectors)}};
}

int run_main(int argc, char** argv) {
    CLI::App app{"Spectral stability bounds for single-layer GCNs"};
    app.require_subcommand(1);

    std::string experiment, config_path, scale, out_dir, graph_path,
        model_path, perturb_arg, verify_dir, variant_arg;
    std::uint64_t seed_override = 0;
    bool have_seed = false;

    auto* run = app.add_subcommand(
        "run", "Run an experiment and write results.csv / report.json / "
               "manifest.json");
    run->add_option("experiment", experiment, "One of: fig1, fig2, fig3, edges")
        ->required();
    run->add_option("--config", config_path, "Config file (defaults applied "
                                             "for any key left out)");
    run->add_option("--scale", scale, "desk (default sizes) or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    run->add_option("--seed", seed_override, "Override the base seed")
        ->each([&](const std::string&) { have_seed = true; });
    run->add_option("--out", out_dir,
                    "Output directory (default: <config out_dir>/<experiment>)");

    auto* validate = app.add_subcommand("validate", "Check a config file");
    validate->add_option("--config", config_path, "Config file to check")
        ->required();

    auto* spectrum = app.add_subcommand(
        "spectrum", "Eigendecompose a graph's Laplacian and print eigenpairs");
    spectrum->add_option("graph", graph_path, "Graph JSON file")->required();

    auto* bound = app.add_subcommand(
        "bound", "Deterministic stability bound for one perturbation");
    bound->add_option("graph", graph_path, "Graph JSON file")->required();
    bound->add_option("model", model_path, "Model JSON file")->required();
    bound
        ->add_option("--perturb", perturb_arg,
                     "Comma-separated edges, e.g. 0-2,+1-4 (sign inferred "
                     "from the graph when omitted)")
        ->required();
    bound->add_option("--variant", variant_arg,
                      "as-printed (default) or gap-weighted")
        ->check(CLI::IsMember({"as-printed", "gap-weighted"}));

    auto* verify = app.add_subcommand(
        "verify", "Re-hash a run directory and replay its manifest slice");
    verify->add_option("dir", verify_dir, "Run output directory")->required();

    auto* defaults = app.add_subcommand(
        "defaults", "Print the full default config for an experiment");
    defaults
        ->add_option("experiment", experiment,
                     "One of: fig1, fig2, fig3, edges")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (run->parsed()) {
        const ExperimentId id = experiment_from_name(experiment);
        ExperimentConfig cfg;
        if (!config_path.empty()) {
            cfg = load_config(config_path);
            if (cfg.id != id)
                throw ConfigError({"config file declares experiment '" +
                                   std::string(experiment_name(cfg.id)) +
                                   "' but '" + experiment + "' was requested"});
        } else {
            cfg = default_config(id);
        }
        if (!scale.empty()) apply_scale(cfg, scale);
        if (have_seed) cfg.seed = seed_override;
        const std::string dir =
            out_dir.empty()
                ? (std::filesystem::path(cfg.out_dir) / experiment_name(id))
                      .string()
                : out_dir;
        const RunResult result = run_experiment(cfg);
        write_run_outputs(dir, cfg, result);
        std::cout << "wrote " << dir << "/results.csv (" << result.table.rows.size()
                  << " rows), report.json, manifest.json\n";
        return 0;
    }
    if (validate->parsed()) {
        const ExperimentConfig cfg = load_config(config_path);
        std::cout << "config OK: experiment " << experiment_name(cfg.id)
                  << ", seed " << cfg.seed << "\n";
        return 0;
    }
    if (spectrum->parsed()) {
        const Graph g = load_graph_file(graph_path);
        const SpectralDecomposition sd = eigendecompose(laplacian(g));
        std::cout << spectrum_json(sd).dump(2) << "\n";
        return 0;
    }
    if (bound->parsed()) {
        const Graph g = load_graph_file(graph_path);
        const GcnLayer layer = load_model_file(model_path);
        const EdgePerturbation p = parse_perturb_arg(g, perturb_arg);
        validate_against(g, p);
        const SpectralDecomposition sd = eigendecompose(laplacian(g));
        const double C_L = lipschitz_constant(layer.filter, sd.lambda_max(),
                                              p.insertion_count());
        const BoundVariant variant =
            variant_arg.empty() ? BoundVariant::as_printed
                                : bound_variant_from_name(variant_arg);
        const BoundReport report = deterministic_bound(
            sd, p, C_L, layer.nonlinearity.lipschitz, g.node_count(), variant);
        nlohmann::json j = bound_report_to_json(report);
        j["variant"] = bound_variant_name(variant);
        j["baseline"] = {{"label", kBaselineLabel},
                         {"value", naive_baseline_bound(
                                       delta_laplacian(p, g.node_count()), C_L,
                                       layer.nonlinearity.lipschitz)}};
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    if (verify->parsed()) {
        try {
            const VerifyOutcome outcome = verify_run(verify_dir);
            if (outcome.ok) {
                std::cout << "verify OK: hashes match, slice replay matches\n";
                return 0;
            }
            for (const std::string& m : outcome.mismatches)
                std::cerr << "mismatch: " << m << "\n";
            return 1;
        } catch (const ManifestAbsentError& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    if (defaults->parsed()) {
        std::cout << write_config(default_config(experiment_from_name(experiment)));
        return 0;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_main(argc, argv);
    } catch (const gcnstab::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const gcnstab::DegenerateSpectrumError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
