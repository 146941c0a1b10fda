// mftl: synthetic teacher-student tasks with a similarity knob, the
// rate-sweep orchestrator, the verification suite and the CLI entry point.
// SPDX-License-Identifier: MIT
#pragma once

#include <string>

#include <json.hpp>

#include "mftl/analysis.hpp"

namespace mftl {

/// How the target task is perturbed away from the source task.
enum class ShiftMode { shared_teacher, shifted_outer, shifted_input };

const char* shift_mode_name(ShiftMode mode);
ShiftMode shift_mode_from_name(const std::string& name);

/// A synthetic teacher-student task family. The teacher is a particle cloud
/// drawn once per task seed; inputs are standard normal in R^q and labels are
/// teacher predictions plus optional Gaussian noise. `shift` perturbs the
/// target side only: shifted_outer adds it to every teacher outer weight,
/// shifted_input moves the target input mean by shift * e_1, shared_teacher
/// ignores it (identical tasks).
struct TaskSpec {
    int q = 4;
    std::size_t teacher_atoms = 8;
    double teacher_a_scale = 1.0;  // teacher outer-weight standard deviation
    double teacher_w_scale = 1.0;  // teacher hidden-weight standard deviation
    Activation act = Activation::relu;
    double noise_std = 0.0;
    double shift = 0.0;
    ShiftMode mode = ShiftMode::shared_teacher;

    void validate() const;  // throws ConfigError naming the offending field
};

nlohmann::json task_to_json(const TaskSpec& spec);
TaskSpec task_from_json(const nlohmann::json& j);

/// Builds the (source, target) generator pair. Generators are pure in
/// (count, seed): sample i is identical for any count >= i+1.
TaskPair gen_task(const TaskSpec& spec, std::uint64_t seed);

/// Grid rules; each resolves to concrete per-cell numbers that are logged
/// verbatim into every output.
enum class NsRule { fixed, proportional };
enum class AlphaRule { fixed, balanced, one_minus_inv };
enum class BetaRule { fixed, fourth_root, stage_sqrt };

/// One rate-sweep experiment: a task, a scenario list and grid rules.
struct ExperimentConfig {
    TaskSpec task;
    std::vector<Scenario> scenarios = {Scenario::supervised};
    std::vector<std::size_t> n_t_grid = {32, 64, 128, 256};
    NsRule ns_rule = NsRule::fixed;
    double ns_value = 256.0;  // fixed count, or the factor k of n_s = k * n_t
    AlphaRule alpha_rule = AlphaRule::balanced;
    double alpha_value = 1.0;  // fixed rule only
    BetaRule beta_rule = BetaRule::fixed;
    double beta_value = 4.0;  // fixed rule only
    std::size_t replicates = 20;
    std::size_t test_size = 20000;
    std::size_t moment_samples = 100000;  // Monte-Carlo size for bound moments
    TrainConfig train;  // per-cell template; scenario/alpha/betas/seed overwritten
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;  // throws ConfigError naming the offending field
};

nlohmann::json experiment_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_file(const std::string& path);

/// One resolved grid cell: every rule evaluated to a concrete number.
struct CellParams {
    Scenario scenario = Scenario::supervised;
    std::size_t n_t = 0;
    std::size_t n_s = 0;      // 0 for supervised
    double alpha = 1.0;       // 0 for finetune (unused there)
    double beta = 1.0;        // joint temperature; beta_t for finetune
    double beta_s = 1.0;
    double beta_t = 1.0;
    double rate_n = 0.0;      // the x-variable of the rate fit for this cell
    std::uint64_t seed = 0;   // derived cell seed
};
CellParams resolve_cell(const ExperimentConfig& cfg, Scenario scenario, std::size_t n_t);

/// Full sweep output. `csv` is the canonical byte-exact artifact; `report`
/// carries the resolved config, per-cell estimates, bound right-hand sides
/// (poly10 prior only) and the per-scenario rate fits.
struct SweepResult {
    std::string csv;
    nlohmann::json report;
    std::vector<std::pair<std::string, RateReport>> rates;  // scenario -> WTGE fit
};

SweepResult run_rate_sweep(const ExperimentConfig& cfg);
/// As above, and also writes rate_sweep.csv / rate_sweep.json (and
/// rate_<scenario>.svg when plot is set) under out_dir.
SweepResult run_rate_sweep(const ExperimentConfig& cfg, const std::string& out_dir,
                           bool plot);

/// Maximum absolute error of the flat-derivative mixture identity
///   loss(m') - loss(m) = int_0^1 E_{m'-m}[dl/dm(m + t(m'-m))] dt
/// over random (m, m', z) instances with the quadratic loss; the integrand is
/// quadratic in t, so 2-point Gauss quadrature evaluates the integral
/// exactly and the identity must hold to numerical precision.
double flat_derivative_identity_error(std::size_t instances, std::uint64_t seed);

/// One verification check: module, invariant name, outcome and detail.
struct VerifyItem {
    std::string module;
    std::string name;
    bool pass = false;
    std::string detail;
};
struct VerifyReport {
    std::vector<VerifyItem> items;
    bool all_pass() const;
};

/// Runs the cross-module invariant batteries (flat-derivative identity,
/// normalization, assumption battery, Gibbs-residual toy, resampling
/// identity, bound self-audits). suite is "fast" or "full".
VerifyReport run_verify(const std::string& suite, std::uint64_t seed, int threads);

/// CLI entry point (subcommands train / rate-sweep / bounds / similarity /
/// verify). Exit codes: 0 ok, 1 invariant failure, 2 config error,
/// 3 divergence.
int cli(int argc, char** argv);

}  // namespace mftl
