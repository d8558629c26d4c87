#include "hrma/cli_io.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>

namespace {

const std::map<std::string, std::pair<std::string, std::string>> kCommands{
    {"lifespan",
     {"Convex lifespan of the configured Cauchy data",
      "Outputs:\n"
      "  lifespan.json  {T_cvx (number or \"infinite\"), infinite, argmin, message}\n"}},
    {"ray",
     {"Legendre-transform ray with admissibility flags and the lifted potentials",
      "Outputs:\n"
      "  slice_NNN.csv  GridFn: x_1[,x_2],psi   psi_L(s_NNN, x)\n"
      "  lift_NNN.csv   GridFn: x_1[,x_2],phi   psi_L(s_NNN, x) - psi0(x)\n"
      "  ray.json       {lifespan, s_grid, admissible, min_margin, covers_polytope}\n"
      "GridFn CSV files start with '# {\"dim\",\"box\",\"shape\"}' and list nodes with the last axis fastest.\n"}},
    {"flow",
     {"Leaves, flow map, characteristics, caustic time and conservation",
      "Outputs:\n"
      "  leaves.csv           seed_id,s,x_1[,x_2]\n"
      "  flow_map.csv         s,x_in_1[,x_in_2],x_out_1[,x_out_2],jac_det\n"
      "  characteristics.csv  seed_id,s,x_1[,x_2],z,p_sigma,p_xi_1[,p_xi_2]\n"
      "  caustic.json         {first_crossing_s, infinite, crossing_pair, location, resolution_bound}\n"
      "  conservation.json    {s_grid, sup_error, sup_error_dual, route_gap, worst_s, worst_point, ...}\n"}},
    {"verify",
     {"Monge-Ampere mass, gradient-graph and Hamilton-Jacobi checks on a computed or supplied ray",
      "Outputs:\n"
      "  mass.json    {levels: [{h, total_mass, max_cell}], order_estimate}\n"
      "  verify.json  {graph: {...}, hj: {...}, supplied, s_grid}\n"
      "Supplied slices (verify.slices) use the GridFn CSV layout: x_1[,x_2],value.\n"}},
    {"obstruction",
     {"Toric leaf solutions, Paley-Wiener battery and multiplier identities",
      "Outputs:\n"
      "  leaf_NNN.csv           s,chi\n"
      "  spectrum_kernel.csv    xi,re,im,log_abs\n"
      "  spectrum_gaussian.csv  xi,re,im,log_abs\n"
      "  sweep.csv              T,kernel_pass,kernel_rate,gaussian_pass\n"
      "  obstruction.json       {T, leaves, kernel, gaussian_all_pass}\n"}},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Batch experiments for the Monge-Ampere geodesic ray toolkit"};
    app.set_version_flag("--version", hrma::version_string());
    app.require_subcommand(1);
    app.footer(
        "Every command also writes manifest.json listing all artifacts and checks.\n"
        "Output directory: --out, else $HRMA_OUT_DIR, else out_dir from the config.\n"
        "Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error, 3 numerical failure.");

    std::string config_path, out_dir;
    int seed_count = 0;
    double tol_scale = 1.0;
    for (const auto& [name, text] : kCommands) {
        auto* sub = app.add_subcommand(name, text.first);
        sub->add_option("--config", config_path, "Experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--seed-count", seed_count, "Override seed_count")->check(CLI::Range(2, 1000000));
        sub->add_option("--tol-scale", tol_scale, "Multiply every check tolerance")->check(CLI::PositiveNumber);
        sub->footer(text.second);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : hrma::kExitConfigError;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        auto config = hrma::load_config(config_path);
        if (config.command != command) {
            throw hrma::ConfigError(config_path + ": config is for '" + config.command + "', not '" + command + "'");
        }
        if (!out_dir.empty()) {
            config.out_dir = out_dir;
        } else if (const char* env = std::getenv("HRMA_OUT_DIR"); env && *env) {
            config.out_dir = env;
        }
        if (seed_count > 0) config.seed_count = seed_count;
        if (tol_scale != 1.0) config.tol.scale(tol_scale);

        const auto manifest = hrma::run_command(config);
        for (const auto& c : manifest.checks) {
            std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << "  value=" << hrma::format_number(c.value)
                      << " tol=" << hrma::format_number(c.tolerance) << "\n";
        }
        if (!manifest.error.empty()) std::cerr << "error: " << manifest.error << "\n";
        std::cout << "manifest: " << config.out_dir << "/manifest.json\n";
        return manifest.exit_code;
    } catch (const hrma::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return hrma::kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hrma::kExitConfigError;
    }
}
