#pragma once

#include "hrma/errors.hpp"
#include "hrma/toric_cauchy.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hrma {

/// Schema or file error in an experiment configuration; `line` is 0 when unknown.
class ConfigError : public DomainError {
  public:
    ConfigError(const std::string& what, int line = 0)
        : DomainError(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const noexcept { return line_; }

  private:
    int line_;
};

enum ExitCode : int { kExitPass = 0, kExitCheckFailure = 1, kExitConfigError = 2, kExitNumericalFailure = 3 };

/// Exactly one of `preset`, the dual pair (u0, udot0) or the primal pair (psi0, psidot0) is set.
/// File paths are stored resolved against the directory of the configuration.
struct SourceConfig {
    std::string preset;
    int shape = 0;
    std::string u0, udot0;
    std::string psi0, psidot0;
    int dual_shape = 0;
    std::vector<std::vector<double>> normals;
    std::vector<double> offsets;

    bool operator==(const SourceConfig&) const = default;
};

struct GridConfig {
    /// Nodes per axis of the primal x-box; 0 picks 401 in 1-D and 41 in 2-D.
    int x_shape = 0;
    /// Explicit x-box as [lo, hi] per axis; empty means default_x_box.
    std::vector<std::array<double, 2>> x_box;

    bool operator==(const GridConfig&) const = default;
};

/// Check thresholds. scale() multiplies every one except cvx_rel, mass_ratio and pw_margin.
struct ToleranceConfig {
    double cvx_rel = 1e-9;
    /// sup |psi_L(0, .) - psi0| <= s0 * h_x^2.
    double s0 = 2.0;
    double affine = 1e-12;
    double conservation = 1e-3;
    double caustic = 1e-2;
    double hj = 1e-3;
    double graph = 1e-3;
    /// Each refinement of the Monge-Ampere mass study must shrink the mass at least by this factor.
    double mass_ratio = 0.6;
    double obstruction = 1e-10;
    double multiplier = 1e-3;
    double transition = 0.05;
    double pw_margin = 0.02;

    void scale(double factor);
    bool operator==(const ToleranceConfig&) const = default;
};

struct VerifyConfig {
    /// Refinement levels and base resolution of the Monge-Ampere mass study on a computed ray;
    /// 0 picks (3, 81, 37) in 1-D and (2, 41, 37) in 2-D.
    int levels = 0;
    int mass_x_shape = 0;
    int mass_s_count = 0;
    /// Supplied slices of eta, one GridFn CSV per entry of s_grid; empty means compute the ray.
    std::vector<std::string> slices;

    bool operator==(const VerifyConfig&) const = default;
};

struct ObstructionConfig {
    std::vector<std::vector<double>> points;
    /// Strip width; 0 means the convex lifespan (1 when it is infinite).
    double T = 0.0;
    double L = 40.0;
    int N = 4096;
    int rows = 5;
    /// Decay rate a of the kernel a / (pi (a^2 + t^2)) used for the pass/fail sweep.
    double kernel_rate = 2.0;
    std::vector<double> T_sweep;

    bool operator==(const ObstructionConfig&) const = default;
};

struct ExperimentConfig {
    std::string command;
    SourceConfig source;
    GridConfig grid;
    /// Increasing from 0; empty lets each command choose.
    std::vector<double> s_grid;
    ToleranceConfig tol;
    std::string out_dir = "hrma_out";
    int seed_count = 101;
    std::vector<std::vector<double>> seeds;
    VerifyConfig verify;
    ObstructionConfig obstruction;

    bool operator==(const ExperimentConfig&) const = default;
};

const std::vector<std::string>& command_names();

/// Parses and validates a configuration; relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
std::string emit_config(const ExperimentConfig& config);

struct CheckResult {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct RunManifest {
    std::string tool = "hrma";
    std::string version;
    std::string command;
    nlohmann::ordered_json config;
    double wall_clock_s = 0.0;
    /// Paths relative to the output directory, in emission order; manifest.json is last.
    std::vector<std::string> artifacts;
    std::vector<CheckResult> checks;
    nlohmann::ordered_json summary;
    bool pass = false;
    int exit_code = kExitPass;
    std::string error;

    nlohmann::ordered_json to_json() const;
};

/// Runs the configured command, writes every artifact plus manifest.json into config.out_dir.
/// Schema errors propagate as ConfigError; failures inside a command are reported in the manifest.
RunManifest run_command(const ExperimentConfig& config);

RunManifest cmd_lifespan(const ExperimentConfig& config);
RunManifest cmd_ray(const ExperimentConfig& config);
RunManifest cmd_flow(const ExperimentConfig& config);
RunManifest cmd_verify(const ExperimentConfig& config);
RunManifest cmd_obstruction(const ExperimentConfig& config);

/// Cauchy data named by the source section.
CauchyData load_source(const SourceConfig& source, const ConvexTolerances& tol = {});

/// GridFn as a CSV body (node coordinates x1[,x2] then the value) under a one-line JSON header
/// `# {"dim":..,"box":..,"shape":..}`. Numbers use 17 significant digits.
void write_gridfn_csv(std::ostream& out, const GridFn& f, const std::string& value_name = "value");
void write_gridfn_csv(const std::filesystem::path& path, const GridFn& f, const std::string& value_name = "value");
GridFn read_gridfn_csv(std::istream& in, const std::string& origin = "<stream>");
GridFn read_gridfn_csv(const std::filesystem::path& path);

/// %.17g, with inf, -inf and nan spelled out.
std::string format_number(double v);

std::string version_string();

}  // namespace hrma
