// mftl: synthetic task generation, the rate-sweep orchestrator and the
// verification suite.
// SPDX-License-Identifier: MIT
#include "mftl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mftl/objective.hpp"
#include "mftl/svg.hpp"

namespace mftl {

// ------------------------------------------------------------------- tasks

const char* shift_mode_name(ShiftMode mode) {
    switch (mode) {
        case ShiftMode::shared_teacher: return "shared_teacher";
        case ShiftMode::shifted_outer: return "shifted_outer";
        case ShiftMode::shifted_input: return "shifted_input";
    }
    return "?";
}

ShiftMode shift_mode_from_name(const std::string& name) {
    if (name == "shared_teacher") return ShiftMode::shared_teacher;
    if (name == "shifted_outer") return ShiftMode::shifted_outer;
    if (name == "shifted_input") return ShiftMode::shifted_input;
    throw ConfigError("task.mode", "unknown shift mode '" + name + "'");
}

void TaskSpec::validate() const {
    if (q < 1) throw ConfigError("task.q", "input dimension must be >= 1");
    if (teacher_atoms < 1)
        throw ConfigError("task.teacher_atoms", "teacher needs at least one atom");
    if (!(teacher_a_scale > 0.0))
        throw ConfigError("task.teacher_a_scale", "scale must be positive");
    if (!(teacher_w_scale > 0.0))
        throw ConfigError("task.teacher_w_scale", "scale must be positive");
    if (!(noise_std >= 0.0))
        throw ConfigError("task.noise_std", "noise level must be nonnegative");
    if (!(shift >= 0.0)) throw ConfigError("task.shift", "shift must be nonnegative");
}

TaskPair gen_task(const TaskSpec& spec, std::uint64_t seed) {
    spec.validate();
    const int q = spec.q;
    const int d = q + 1;

    ParticleCloud teacher_s;
    teacher_s.dim = d;
    teacher_s.data.resize(spec.teacher_atoms * static_cast<std::size_t>(d));
    const RngStream teacher_stream{derive_seed(seed, 1), StreamTag::teacher};
    for (std::size_t i = 0; i < spec.teacher_atoms; ++i) {
        SubRng rng(teacher_stream, 0, static_cast<std::uint32_t>(i));
        const auto atom = teacher_s.atom(i);
        rng.normals(atom.data(), atom.size());
        atom[0] *= spec.teacher_a_scale;
        for (int j = 1; j < d; ++j) atom[j] *= spec.teacher_w_scale;
    }

    ParticleCloud teacher_t = teacher_s;
    if (spec.mode == ShiftMode::shifted_outer)
        for (std::size_t i = 0; i < teacher_t.r(); ++i) teacher_t.atom(i)[0] += spec.shift;
    const double target_x_shift =
        spec.mode == ShiftMode::shifted_input ? spec.shift : 0.0;

    const auto make_gen = [spec](ParticleCloud teacher, double mean_shift) {
        return [spec, teacher = std::move(teacher), mean_shift](
                   std::size_t count, std::uint64_t s) {
            const RngStream x_stream{derive_seed(s, 1), StreamTag::data_x};
            const RngStream noise_stream{derive_seed(s, 2), StreamTag::data_noise};
            DataSet out;
            out.q = spec.q;
            out.xs.reserve(count * static_cast<std::size_t>(spec.q));
            out.ys.reserve(count);
            std::vector<double> x(spec.q);
            for (std::size_t i = 0; i < count; ++i) {
                SubRng xr(x_stream, 0, static_cast<std::uint32_t>(i));
                xr.normals(x.data(), x.size());
                x[0] += mean_shift;
                double y = predict(teacher, x, spec.act);
                if (spec.noise_std > 0.0) {
                    SubRng nr(noise_stream, 0, static_cast<std::uint32_t>(i));
                    y += spec.noise_std * nr.normal();
                }
                out.push_back(x, y);
            }
            return out;
        };
    };

    TaskPair task;
    task.q = q;
    task.noiseless = spec.noise_std == 0.0;
    task.draw_source = make_gen(teacher_s, 0.0);
    task.draw_target = make_gen(teacher_t, target_x_shift);
    task.teacher_s = std::move(teacher_s);
    task.teacher_t = std::move(teacher_t);
    return task;
}

// ------------------------------------------------------------- config JSON

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* name,
                              const std::string& ctx) {
    if (!j.is_object() || !j.contains(name))
        throw ConfigError(ctx + name, "missing field");
    return j.at(name);
}

template <typename T>
T field(const nlohmann::json& j, const char* name, const std::string& ctx) {
    try {
        return require(j, name, ctx).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(ctx + name, e.what());
    }
}

template <typename T>
T field_or(const nlohmann::json& j, const char* name, const std::string& ctx,
           T fallback) {
    if (!j.is_object() || !j.contains(name)) return fallback;
    return field<T>(j, name, ctx);
}

const char* ns_rule_name(NsRule r) {
    return r == NsRule::fixed ? "fixed" : "proportional";
}
const char* alpha_rule_name(AlphaRule r) {
    switch (r) {
        case AlphaRule::fixed: return "fixed";
        case AlphaRule::balanced: return "balanced";
        case AlphaRule::one_minus_inv: return "one_minus_inv";
    }
    return "?";
}
const char* beta_rule_name(BetaRule r) {
    switch (r) {
        case BetaRule::fixed: return "fixed";
        case BetaRule::fourth_root: return "fourth_root";
        case BetaRule::stage_sqrt: return "stage_sqrt";
    }
    return "?";
}

NsRule ns_rule_from_name(const std::string& name) {
    if (name == "fixed") return NsRule::fixed;
    if (name == "proportional") return NsRule::proportional;
    throw ConfigError("n_s.rule", "unknown rule '" + name + "'");
}
AlphaRule alpha_rule_from_name(const std::string& name) {
    if (name == "fixed") return AlphaRule::fixed;
    if (name == "balanced") return AlphaRule::balanced;
    if (name == "one_minus_inv") return AlphaRule::one_minus_inv;
    throw ConfigError("alpha.rule", "unknown rule '" + name + "'");
}
BetaRule beta_rule_from_name(const std::string& name) {
    if (name == "fixed") return BetaRule::fixed;
    if (name == "fourth_root") return BetaRule::fourth_root;
    if (name == "stage_sqrt") return BetaRule::stage_sqrt;
    throw ConfigError("beta.rule", "unknown rule '" + name + "'");
}

}  // namespace

nlohmann::json task_to_json(const TaskSpec& spec) {
    return {{"q", spec.q},
            {"teacher_atoms", spec.teacher_atoms},
            {"teacher_a_scale", spec.teacher_a_scale},
            {"teacher_w_scale", spec.teacher_w_scale},
            {"act", activation_name(spec.act)},
            {"noise_std", spec.noise_std},
            {"shift", spec.shift},
            {"mode", shift_mode_name(spec.mode)}};
}

TaskSpec task_from_json(const nlohmann::json& j) {
    TaskSpec spec;
    spec.q = field<int>(j, "q", "task.");
    spec.teacher_atoms = field<std::size_t>(j, "teacher_atoms", "task.");
    spec.teacher_a_scale = field_or<double>(j, "teacher_a_scale", "task.", 1.0);
    spec.teacher_w_scale = field_or<double>(j, "teacher_w_scale", "task.", 1.0);
    try {
        spec.act =
            activation_from_name(field_or<std::string>(j, "act", "task.", "relu"));
    } catch (const ArgumentError& e) {
        throw ConfigError("task.act", e.what());
    }
    spec.noise_std = field_or<double>(j, "noise_std", "task.", 0.0);
    spec.shift = field_or<double>(j, "shift", "task.", 0.0);
    spec.mode = shift_mode_from_name(
        field_or<std::string>(j, "mode", "task.", "shared_teacher"));
    spec.validate();
    return spec;
}

void ExperimentConfig::validate() const {
    task.validate();
    if (scenarios.empty()) throw ConfigError("scenarios", "must list at least one");
    if (n_t_grid.empty()) throw ConfigError("n_t_grid", "must list at least one size");
    for (std::size_t i = 0; i < n_t_grid.size(); ++i) {
        if (n_t_grid[i] < 1) throw ConfigError("n_t_grid", "sizes must be >= 1");
        if (i > 0 && n_t_grid[i] <= n_t_grid[i - 1])
            throw ConfigError("n_t_grid", "sizes must be strictly increasing");
    }
    const bool any_source = std::any_of(scenarios.begin(), scenarios.end(),
                                        [](Scenario s) { return s != Scenario::supervised; });
    if (ns_rule == NsRule::fixed) {
        if (any_source && ns_value < 1.0)
            throw ConfigError("n_s.value", "fixed n_s must be >= 1 for source scenarios");
    } else if (!(ns_value > 0.0)) {
        throw ConfigError("n_s.value", "proportionality factor must be positive");
    }
    if (alpha_rule == AlphaRule::fixed && !(alpha_value >= 0.0 && alpha_value <= 1.0))
        throw ConfigError("alpha.value", "fixed alpha must lie in [0,1]");
    if (beta_rule == BetaRule::fixed && !(beta_value > 0.0))
        throw ConfigError("beta.value", "fixed beta must be positive");
    if (beta_rule == BetaRule::stage_sqrt &&
        std::any_of(scenarios.begin(), scenarios.end(),
                    [](Scenario s) { return s != Scenario::finetune; }))
        throw ConfigError("beta.rule", "stage_sqrt applies to the finetune scenario only");
    if (replicates < 2) throw ConfigError("replicates", "need >= 2");
    if (test_size < 1) throw ConfigError("test_size", "must be >= 1");
    if (moment_samples < 2) throw ConfigError("moment_samples", "must be >= 2");
    if (threads < 1) throw ConfigError("threads", "must be >= 1");
    // Static trainer-template fields (scenario/alpha/betas are overwritten per
    // cell, so validate a neutral copy).
    TrainConfig probe = train;
    probe.scenario = Scenario::supervised;
    probe.alpha = 1.0;
    probe.beta = probe.beta_s = probe.beta_t = 1.0;
    probe.validate();
}

nlohmann::json experiment_to_json(const ExperimentConfig& cfg) {
    auto scen = nlohmann::json::array();
    for (Scenario s : cfg.scenarios) scen.push_back(scenario_name(s));
    return {{"task", task_to_json(cfg.task)},
            {"scenarios", scen},
            {"n_t_grid", cfg.n_t_grid},
            {"n_s", {{"rule", ns_rule_name(cfg.ns_rule)}, {"value", cfg.ns_value}}},
            {"alpha",
             {{"rule", alpha_rule_name(cfg.alpha_rule)}, {"value", cfg.alpha_value}}},
            {"beta",
             {{"rule", beta_rule_name(cfg.beta_rule)}, {"value", cfg.beta_value}}},
            {"replicates", cfg.replicates},
            {"test_size", cfg.test_size},
            {"moment_samples", cfg.moment_samples},
            {"train", train_config_to_json(cfg.train)},
            {"seed", cfg.seed}};
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    cfg.task = task_from_json(require(j, "task", ""));
    cfg.scenarios.clear();
    try {
        for (const auto& name : require(j, "scenarios", ""))
            cfg.scenarios.push_back(scenario_from_name(name.get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("scenarios", e.what());
    }
    cfg.n_t_grid = field<std::vector<std::size_t>>(j, "n_t_grid", "");
    {
        const nlohmann::json& ns = require(j, "n_s", "");
        cfg.ns_rule = ns_rule_from_name(field<std::string>(ns, "rule", "n_s."));
        cfg.ns_value = field<double>(ns, "value", "n_s.");
    }
    {
        const nlohmann::json& al = require(j, "alpha", "");
        cfg.alpha_rule = alpha_rule_from_name(field<std::string>(al, "rule", "alpha."));
        cfg.alpha_value = field_or<double>(al, "value", "alpha.", 1.0);
    }
    {
        const nlohmann::json& be = require(j, "beta", "");
        cfg.beta_rule = beta_rule_from_name(field<std::string>(be, "rule", "beta."));
        cfg.beta_value = field_or<double>(be, "value", "beta.", 1.0);
    }
    cfg.replicates = field<std::size_t>(j, "replicates", "");
    cfg.test_size = field<std::size_t>(j, "test_size", "");
    cfg.moment_samples = field_or<std::size_t>(j, "moment_samples", "", 100000);
    try {
        cfg.train = train_config_from_json(require(j, "train", ""));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("train", e.what());
    } catch (const ArgumentError& e) {
        throw ConfigError("train", e.what());
    }
    cfg.seed = field_or<std::uint64_t>(j, "seed", "", 0);
    cfg.threads = field_or<int>(j, "threads", "", 1);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config", std::string("parse error: ") + e.what());
    }
    return experiment_from_json(j);
}

// ------------------------------------------------------------- rate sweeps

namespace {

std::uint64_t scenario_ordinal(Scenario s) {
    switch (s) {
        case Scenario::supervised: return 1;
        case Scenario::alpha_erm: return 2;
        case Scenario::finetune: return 3;
    }
    return 0;
}

}  // namespace

CellParams resolve_cell(const ExperimentConfig& cfg, Scenario scenario,
                        std::size_t n_t) {
    CellParams cell;
    cell.scenario = scenario;
    cell.n_t = n_t;
    if (scenario != Scenario::supervised) {
        const double raw = cfg.ns_rule == NsRule::fixed
                               ? cfg.ns_value
                               : cfg.ns_value * static_cast<double>(n_t);
        cell.n_s = static_cast<std::size_t>(std::llround(raw));
        if (cell.n_s < 1)
            throw ConfigError("n_s.value", "resolved n_s must be >= 1");
    }
    const double nt = static_cast<double>(cell.n_t);
    const double ns = static_cast<double>(cell.n_s);
    if (scenario == Scenario::alpha_erm) {
        switch (cfg.alpha_rule) {
            case AlphaRule::fixed: cell.alpha = cfg.alpha_value; break;
            case AlphaRule::balanced: cell.alpha = nt / (nt + ns); break;
            case AlphaRule::one_minus_inv: cell.alpha = 1.0 - 1.0 / nt; break;
        }
    } else {
        cell.alpha = scenario == Scenario::supervised ? 1.0 : 0.0;
    }
    switch (cfg.beta_rule) {
        case BetaRule::fixed:
            cell.beta = cell.beta_s = cell.beta_t = cfg.beta_value;
            break;
        case BetaRule::fourth_root:
            cell.beta = std::pow(nt + ns, 0.25);
            cell.beta_s = cell.beta_t = cell.beta;
            break;
        case BetaRule::stage_sqrt:
            cell.beta_s = std::pow(ns, 0.25);
            cell.beta_t = std::pow(nt, 0.25);
            cell.beta = cell.beta_t;
            break;
    }
    cell.rate_n = scenario == Scenario::alpha_erm ? nt + ns : nt;
    cell.seed = derive_seed(cfg.seed, scenario_ordinal(scenario), n_t);
    return cell;
}

SweepResult run_rate_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    const TaskPair task = gen_task(cfg.task, derive_seed(cfg.seed, 100));

    const bool any_source =
        std::any_of(cfg.scenarios.begin(), cfg.scenarios.end(),
                    [](Scenario s) { return s != Scenario::supervised; });
    const bool any_joint =
        std::any_of(cfg.scenarios.begin(), cfg.scenarios.end(),
                    [](Scenario s) { return s != Scenario::finetune; });
    const bool any_ft = std::any_of(cfg.scenarios.begin(), cfg.scenarios.end(),
                                    [](Scenario s) { return s == Scenario::finetune; });

    // Bound ingredients are sweep-level constants: the data moments depend on
    // the task (not on n), the complexity terms only on (sigma, q). Computed
    // once and reused by every cell. Tilted complexities exist for the poly10
    // potential only; bounds are omitted otherwise.
    const bool bounds_on = cfg.train.potential == Potential::poly10;
    const Constants consts = constants_extract(cfg.train.act, cfg.train.ol);
    DataMoments target_moments, source_moments;
    double comp_joint = 0.0;
    double comp_ft = 0.0;
    if (bounds_on) {
        target_moments =
            data_moments_mc(task.draw_target, cfg.moment_samples, derive_seed(cfg.seed, 101));
        source_moments = any_source
                             ? data_moments_mc(task.draw_source, cfg.moment_samples,
                                               derive_seed(cfg.seed, 102))
                             : target_moments;
        if (any_joint)
            comp_joint = comp_alpha(
                TiltedPrior(GibbsPrior{Potential::poly10, cfg.train.sigma, task.q + 1}));
        if (any_ft) comp_ft = comp_finetune(cfg.train.sigma, task.q);
    }

    const nlohmann::json resolved = experiment_to_json(cfg);
    std::ostringstream csv;
    csv << "# config: " << resolved.dump() << "\n";
    csv << "# seed: " << cfg.seed << "\n";
    csv << "scenario,n_t,n_s,alpha,beta,replicate,train_risk,test_risk,gen_gap,seed\n";

    SweepResult result;
    result.report["config"] = resolved;
    result.report["seed"] = cfg.seed;
    auto scenarios_json = nlohmann::json::array();

    for (const Scenario scenario : cfg.scenarios) {
        const std::string name = scenario_name(scenario);
        nlohmann::json scen;
        scen["scenario"] = name;
        auto cells_json = nlohmann::json::array();
        std::vector<RatePoint> wtge_points, wter_points;

        for (const std::size_t n_t : cfg.n_t_grid) {
            const CellParams cell = resolve_cell(cfg, scenario, n_t);
            TrainConfig tc = cfg.train;
            tc.scenario = scenario;
            tc.alpha = cell.alpha;
            tc.beta = cell.beta;
            tc.beta_s = cell.beta_s;
            tc.beta_t = cell.beta_t;
            const std::vector<ReplicateRow> rows =
                run_replicates(task, tc, cell.n_t, cell.n_s, cfg.replicates,
                               cfg.test_size, cell.seed, cfg.threads);

            std::size_t failures = 0;
            for (const ReplicateRow& row : rows) {
                if (row.failed) {
                    ++failures;
                    continue;
                }
                csv << name << ',' << cell.n_t << ',' << cell.n_s << ','
                    << format_g17(cell.alpha) << ',' << format_g17(cell.beta) << ','
                    << row.replicate << ',' << format_g17(row.train_risk) << ','
                    << format_g17(row.test_risk) << ',' << format_g17(row.gen_gap)
                    << ',' << row.seed << '\n';
            }

            const GenEstimate wtge = wtge_from_rows(rows);
            nlohmann::json cj;
            cj["n_t"] = cell.n_t;
            cj["n_s"] = cell.n_s;
            cj["alpha"] = cell.alpha;
            cj["beta"] = cell.beta;
            cj["beta_s"] = cell.beta_s;
            cj["beta_t"] = cell.beta_t;
            cj["rate_n"] = cell.rate_n;
            cj["seed"] = cell.seed;
            cj["replicates"] = cfg.replicates;
            cj["failures"] = failures;
            cj["wtge_mean"] = wtge.mean;
            cj["wtge_se"] = wtge.std_error;
            wtge_points.push_back({cell.rate_n, wtge.mean, wtge.std_error});
            if (task.noiseless) {
                const GenEstimate wter = wter_from_rows(rows);
                cj["wter_mean"] = wter.mean;
                cj["wter_se"] = wter.std_error;
                wter_points.push_back({cell.rate_n, wter.mean, wter.std_error});
            }
            if (bounds_on) {
                const BoundReport bound =
                    scenario == Scenario::finetune
                        ? bound_rhs_wtge_finetune(consts, comp_ft, target_moments,
                                                  source_moments, cell.beta_t,
                                                  cfg.train.sigma,
                                                  static_cast<double>(cell.n_t))
                        : bound_rhs_wtge_alpha(consts, comp_joint, target_moments,
                                               source_moments, cell.alpha, cell.beta,
                                               cfg.train.sigma,
                                               static_cast<double>(cell.n_t));
                cj["bound"] = nlohmann::json::parse(bound_report_json(bound));
            }
            cells_json.push_back(std::move(cj));
        }

        scen["cells"] = std::move(cells_json);
        try {
            const RateReport fit = rate_fit(wtge_points);
            scen["wtge_rates"] = nlohmann::json::parse(rate_report_json(fit));
            result.rates.emplace_back(name, fit);
        } catch (const InsufficientDataError& e) {
            scen["wtge_rate_error"] = e.what();
        }
        if (task.noiseless) {
            try {
                scen["wter_rates"] =
                    nlohmann::json::parse(rate_report_json(rate_fit(wter_points)));
            } catch (const InsufficientDataError& e) {
                scen["wter_rate_error"] = e.what();
            }
        }
        scenarios_json.push_back(std::move(scen));
    }

    result.report["scenarios"] = std::move(scenarios_json);
    result.csv = csv.str();
    return result;
}

SweepResult run_rate_sweep(const ExperimentConfig& cfg, const std::string& out_dir,
                           bool plot) {
    SweepResult result = run_rate_sweep(cfg);
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream out(fs::path(out_dir) / "rate_sweep.csv", std::ios::binary);
        if (!out) throw ArgumentError("rate sweep: cannot write CSV under " + out_dir);
        out << result.csv;
    }
    {
        std::ofstream out(fs::path(out_dir) / "rate_sweep.json", std::ios::binary);
        if (!out) throw ArgumentError("rate sweep: cannot write JSON under " + out_dir);
        out << result.report.dump(2) << '\n';
    }
    if (plot)
        for (const auto& [name, fit] : result.rates)
            save_rate_svg((fs::path(out_dir) / ("rate_" + name + ".svg")).string(), fit,
                          name);
    return result;
}

// ------------------------------------------------------- verification suite

double flat_derivative_identity_error(std::size_t instances, std::uint64_t seed) {
    if (instances == 0)
        throw ArgumentError("identity check: instances must be positive");
    const RngStream stream{seed, StreamTag::generic};
    constexpr int q = 3;
    constexpr int d = q + 1;
    constexpr std::size_t r = 6;
    const OuterLoss ol = OuterLoss::quadratic;

    // 2-point Gauss-Legendre on [0,1] integrates the (quadratic-in-t)
    // integrand of the mixture identity exactly.
    const double off = 0.5 / std::sqrt(3.0);
    const std::array<double, 2> nodes{0.5 - off, 0.5 + off};

    std::vector<double> x(q), fd_new(r), fd_old(r);
    double worst = 0.0;
    for (std::size_t inst = 0; inst < instances; ++inst) {
        SubRng rng(stream, 0, static_cast<std::uint32_t>(inst));
        const auto act = static_cast<Activation>(rng.next_u32() % 4);

        ParticleCloud m, m_new;
        m.dim = m_new.dim = d;
        m.data.resize(r * d);
        m_new.data.resize(r * d);
        rng.normals(m.data.data(), m.data.size());
        rng.normals(m_new.data.data(), m_new.data.size());
        rng.normals(x.data(), x.size());
        const double y = 2.0 * rng.normal();

        const double lhs =
            loss(m_new, x, y, act, ol) - loss(m, x, y, act, ol);

        // The mixture (1-t) m + t m' is represented exactly as a uniform
        // 2r-atom cloud with outer weights rescaled by 2(1-t) / 2t: the
        // activation ignores a, so the cloud's prediction equals the
        // mixture's.
        double rhs = 0.0;
        for (const double t : nodes) {
            ParticleCloud mix;
            mix.dim = d;
            mix.data.reserve(2 * r * d);
            mix.data.insert(mix.data.end(), m.data.begin(), m.data.end());
            mix.data.insert(mix.data.end(), m_new.data.begin(), m_new.data.end());
            for (std::size_t i = 0; i < r; ++i) mix.data[i * d] *= 2.0 * (1.0 - t);
            for (std::size_t i = r; i < 2 * r; ++i) mix.data[i * d] *= 2.0 * t;
            for (std::size_t i = 0; i < r; ++i) {
                fd_old[i] = flat_derivative(mix, x, y, m.atom(i), act, ol);
                fd_new[i] = flat_derivative(mix, x, y, m_new.atom(i), act, ol);
            }
            rhs += 0.5 * (pairwise_mean(fd_new) - pairwise_mean(fd_old));
        }
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

bool VerifyReport::all_pass() const {
    return std::all_of(items.begin(), items.end(),
                       [](const VerifyItem& it) { return it.pass; });
}

namespace {

std::string tol_detail(const std::string& what, double value, double tol) {
    return what + " " + format_g17(value) + " (tol " + format_g17(tol) + ")";
}

/// Max |E_{theta~m} dl/dm| and |E_{a~m_sp} dl/dm_sp| over random instances;
/// both normalizations hold by construction, so the means must vanish.
std::pair<double, double> normalization_error(std::size_t instances,
                                              std::uint64_t seed) {
    const RngStream stream{seed, StreamTag::generic};
    constexpr int q = 3;
    constexpr int d = q + 1;
    std::vector<double> x(q);
    double worst_joint = 0.0;
    double worst_sp = 0.0;
    for (std::size_t inst = 0; inst < instances; ++inst) {
        SubRng rng(stream, 0, static_cast<std::uint32_t>(inst));
        const auto act = static_cast<Activation>(rng.next_u32() % 4);
        const auto ol = rng.next_u32() % 2 == 0 ? OuterLoss::quadratic
                                                : OuterLoss::logcosh;
        const std::size_t r = 2 + rng.next_u32() % 15;

        ParticleCloud cloud;
        cloud.dim = d;
        cloud.data.resize(r * d);
        rng.normals(cloud.data.data(), cloud.data.size());
        rng.normals(x.data(), x.size());
        const double y = 2.0 * rng.normal();

        std::vector<double> vals(r);
        for (std::size_t i = 0; i < r; ++i)
            vals[i] = flat_derivative(cloud, x, y, cloud.atom(i), act, ol);
        worst_joint = std::max(worst_joint, std::abs(pairwise_mean(vals)));

        ParticleCloud w_cloud, a_cloud;
        w_cloud.dim = q;
        w_cloud.data.resize(r * q);
        rng.normals(w_cloud.data.data(), w_cloud.data.size());
        a_cloud.dim = 1;
        a_cloud.data.resize(r);
        rng.normals(a_cloud.data.data(), a_cloud.data.size());
        for (std::size_t i = 0; i < r; ++i)
            vals[i] =
                flat_derivative_sp(w_cloud, a_cloud, x, y, a_cloud.data[i], act, ol);
        worst_sp = std::max(worst_sp, std::abs(pairwise_mean(vals)));
    }
    return {worst_joint, worst_sp};
}

/// Zero-drift dataset for the prior-recovery control: with relu (phi(0)=0)
/// and y=0 every flat-derivative gradient vanishes identically, so MFLD
/// reduces to pure prior Langevin and the stationary law is gamma^sigma.
DataSet zero_drift_data(int q, std::size_t n) {
    DataSet data;
    data.q = q;
    const std::vector<double> x(q, 0.0);
    for (std::size_t i = 0; i < n; ++i) data.push_back(x, 0.0);
    return data;
}

}  // namespace

VerifyReport run_verify(const std::string& suite, std::uint64_t seed, int threads) {
    if (suite != "fast" && suite != "full")
        throw ArgumentError("verify: suite must be 'fast' or 'full'");
    const bool full = suite == "full";
    VerifyReport report;
    const auto add = [&](const char* module, const char* name, bool pass,
                         std::string detail) {
        report.items.push_back({module, name, pass, std::move(detail)});
    };

    {
        const std::size_t n = full ? 200 : 50;
        const double err = flat_derivative_identity_error(n, derive_seed(seed, 1));
        add("mfnet", "flat-derivative mixture identity", err <= 1e-10,
            tol_detail("max abs error over " + std::to_string(n) + " instances:", err,
                       1e-10));
    }
    {
        const std::size_t n = full ? 10000 : 2000;
        const auto [joint, sp] = normalization_error(n, derive_seed(seed, 2));
        add("mfnet", "flat-derivative normalization (joint)", joint <= 1e-10,
            tol_detail("max |mean| over " + std::to_string(n) + " instances:", joint,
                       1e-10));
        add("mfnet", "flat-derivative normalization (product)", sp <= 1e-10,
            tol_detail("max |mean| over " + std::to_string(n) + " instances:", sp,
                       1e-10));
    }
    {
        const std::size_t draws = full ? 1000000 : 10000;
        std::size_t total_violations = 0;
        std::string first;
        for (const Activation act : {Activation::relu, Activation::tanh,
                                     Activation::sigmoid, Activation::heaviside})
            for (const OuterLoss ol : {OuterLoss::quadratic, OuterLoss::logcosh}) {
                const AssumptionReport rep = assumption_battery(
                    act, ol, draws,
                    derive_seed(seed, 3, static_cast<std::uint64_t>(act),
                                static_cast<std::uint64_t>(ol)));
                total_violations += rep.violations;
                if (first.empty() && !rep.first_violation.empty())
                    first = std::string(activation_name(act)) + "/" +
                            outer_loss_name(ol) + ": " + rep.first_violation;
            }
        add("analysis", "assumption battery (8 family pairs)", total_violations == 0,
            total_violations == 0
                ? std::to_string(draws) + " draws per pair, zero violations"
                : std::to_string(total_violations) + " violations; first: " + first);
    }
    {
        // Prior recovery: zero-drift data keeps the Gibbs density equal to
        // the prior; the trained histogram must match it in TV.
        TrainConfig tc;
        tc.scenario = Scenario::supervised;
        tc.act = Activation::relu;
        tc.ol = OuterLoss::quadratic;
        tc.potential = Potential::poly10;
        tc.beta = 2.0;
        tc.sigma = 1.0;
        tc.particles = full ? 10000 : 4000;
        tc.steps = full ? 3000 : 1200;
        tc.step_size = 0.01;
        tc.seed = derive_seed(seed, 4);
        tc.threads = threads;
        const DataSet data = zero_drift_data(1, 4);
        const GibbsPrior prior{tc.potential, tc.sigma, 2};
        const double tol = full ? 0.10 : 0.15;
        try {
            const TrainedModel model =
                train_supervised(data, tc, tc.act, tc.ol, prior);
            const Objective obj{tc.act, tc.ol, prior, tc.beta};
            const GridSpec grid = GridSpec::cover(model.cloud, full ? 16 : 12);
            const double tv = gibbs_residual(model.cloud, data, obj, grid);
            add("objective", "Gibbs residual: prior recovery", tv <= tol,
                tol_detail("TV(histogram, grid prior):", tv, tol));
        } catch (const DivergedError& e) {
            add("objective", "Gibbs residual: prior recovery", false,
                std::string("diverged: ") + e.what());
        }
    }
    if (full) {
        // Trained fixed point: a real 1-d task, long run, self-consistent
        // Gibbs density from the trained cloud itself.
        TaskSpec spec;
        spec.q = 1;
        spec.teacher_atoms = 4;
        spec.act = Activation::tanh;
        const TaskPair task = gen_task(spec, derive_seed(seed, 5));
        const DataSet data = task.draw_target(16, derive_seed(seed, 6));
        TrainConfig tc;
        tc.scenario = Scenario::supervised;
        tc.act = Activation::tanh;
        tc.ol = OuterLoss::quadratic;
        tc.potential = Potential::poly10;
        tc.beta = 2.0;
        tc.sigma = 1.0;
        tc.particles = 10000;
        tc.steps = 4000;
        tc.step_size = 0.01;
        tc.seed = derive_seed(seed, 7);
        tc.threads = threads;
        const GibbsPrior prior{tc.potential, tc.sigma, 2};
        try {
            const TrainedModel model =
                train_supervised(data, tc, tc.act, tc.ol, prior);
            const Objective obj{tc.act, tc.ol, prior, tc.beta};
            const GridSpec grid = GridSpec::cover(model.cloud, 16);
            const double tv = gibbs_residual(model.cloud, data, obj, grid);
            add("objective", "Gibbs residual: trained fixed point", tv <= 0.15,
                tol_detail("TV(histogram, self-consistent density):", tv, 0.15));
        } catch (const DivergedError& e) {
            add("objective", "Gibbs residual: trained fixed point", false,
                std::string("diverged: ") + e.what());
        }
    }
    {
        // Resampling identity at desk scale with common random numbers.
        TaskSpec spec;
        spec.q = 2;
        spec.teacher_atoms = 4;
        spec.act = Activation::relu;
        spec.noise_std = 0.1;
        const TaskPair task = gen_task(spec, derive_seed(seed, 8));
        TrainConfig tc;
        tc.scenario = Scenario::supervised;
        tc.act = Activation::relu;
        tc.ol = OuterLoss::quadratic;
        tc.potential = Potential::poly10;
        tc.beta = 2.0;
        tc.sigma = 1.0;
        tc.particles = 64;
        tc.steps = full ? 400 : 150;
        tc.step_size = 0.05;
        tc.threads = 1;
        try {
            const ResamplingCheck check = resampling_identity_check(
                task, tc, 8, 0, full ? 80 : 50, derive_seed(seed, 9), threads);
            const double gap = std::abs(check.lhs.mean - check.rhs.mean);
            const double limit = 3.0 * check.combined_se();
            add("analysis", "resampling identity (supervised)", gap <= limit,
                tol_detail("|LHS - RHS|:", gap, limit));
        } catch (const DivergedError& e) {
            add("analysis", "resampling identity (supervised)", false,
                std::string("diverged: ") + e.what());
        } catch (const InsufficientDataError& e) {
            add("analysis", "resampling identity (supervised)", false, e.what());
        }
    }
    {
        // Bound self-audits: every report must reproduce its own RHS from the
        // itemized constants, and lower-bound similarities must demote the
        // certificate flag.
        const Constants c = constants_extract(Activation::relu, OuterLoss::quadratic);
        const DataMoments t{6.0, 40.0, 2500.0};
        const DataMoments s{5.0, 30.0, 2000.0};
        const double comp = 30.0;
        const WterCoefficients coeff{1.0, 1.0, 1.0};
        const std::array<BoundReport, 4> reports{
            bound_rhs_wtge_alpha(c, comp, t, s, 0.5, 4.0, 1.0, 64.0),
            bound_rhs_wtge_finetune(c, comp, t, s, 4.0, 1.0, 64.0),
            bound_rhs_wter_alpha(coeff, 0.5, 4.0, 1.0, 64.0, 256.0, 2.0, 0.1, true),
            bound_rhs_wter_finetune(coeff, 4.0, 2.0, 1.0, 64.0, 256.0, 1.0, 2.0, 0.0,
                                    false)};
        double worst = 0.0;
        for (const BoundReport& rep : reports) {
            const double rel = std::abs(rep.recompute() - rep.rhs_value) /
                               std::max(1.0, std::abs(rep.rhs_value));
            worst = std::max(worst, rel);
        }
        const bool flags_ok = !reports[2].certificate && reports[3].certificate;
        add("analysis", "bound self-audit (recompute + certificate flags)",
            worst <= 1e-12 && flags_ok,
            tol_detail("max relative recompute error:", worst, 1e-12) +
                (flags_ok ? "" : "; certificate flags wrong"));
    }
    return report;
}

}  // namespace mftl
