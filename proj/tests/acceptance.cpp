// Acceptance gate: every requested criterion prints one [PASS]/[FAIL] line
// with the measured quantity and its pinned tolerance; the process exits
// nonzero when any requested criterion fails.
//
// Usage: acceptance [criterion ...]   (defaults to all nine)
// SPDX-License-Identifier: MIT
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mftl/harness.hpp"

using namespace mftl;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20260815;  // master seed of the whole gate

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

int run_cli_args(std::vector<std::string> args) {
    args.insert(args.begin(), "mftl");
    std::vector<char*> argv;
    argv.reserve(args.size());
    for (std::string& a : args) argv.push_back(a.data());
    return cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

DataSet zero_drift_data(int q, std::size_t n) {
    DataSet data;
    data.q = q;
    const std::vector<double> x(q, 0.0);
    for (std::size_t i = 0; i < n; ++i) data.push_back(x, 0.0);
    return data;
}

// ---------------------------------------------------------------- criterion 1
// Flat-derivative mixture identity at quadrature exactness.

Outcome criterion_1() {
    const auto t0 = Clock::now();
    const double err = flat_derivative_identity_error(200, derive_seed(kSeed, 1));
    const double secs = seconds_since(t0);
    return {err <= 1e-10 && secs < 5.0,
            "flat-derivative identity, 200 instances: max |lhs-rhs| " + fmt(err) +
                " (tol 1e-10, " + fmt(secs) + " s / 5 s)"};
}

// ---------------------------------------------------------------- criterion 2
// Both flat derivatives integrate to zero against their own measure.

Outcome criterion_2() {
    const auto t0 = Clock::now();
    const RngStream stream{derive_seed(kSeed, 2), StreamTag::generic};
    constexpr int q = 3;
    constexpr int d = q + 1;
    constexpr std::size_t instances = 10000;
    std::vector<double> x(q);
    double worst_joint = 0.0;
    double worst_sp = 0.0;
    for (std::size_t inst = 0; inst < instances; ++inst) {
        SubRng rng(stream, 0, static_cast<std::uint32_t>(inst));
        const auto act = static_cast<Activation>(rng.next_u32() % 4);
        const auto ol =
            rng.next_u32() % 2 == 0 ? OuterLoss::quadratic : OuterLoss::logcosh;
        const std::size_t r = 2 + rng.next_u32() % 15;

        ParticleCloud cloud;
        cloud.dim = d;
        cloud.data.resize(r * d);
        rng.normals(cloud.data.data(), cloud.data.size());
        rng.normals(x.data(), x.size());
        const double y = 2.0 * rng.normal();

        double mean = 0.0;
        for (std::size_t i = 0; i < r; ++i)
            mean += flat_derivative(cloud, x, y, cloud.atom(i), act, ol);
        worst_joint = std::max(worst_joint, std::abs(mean / static_cast<double>(r)));

        ParticleCloud w_cloud, a_cloud;
        w_cloud.dim = q;
        w_cloud.data.resize(r * q);
        rng.normals(w_cloud.data.data(), w_cloud.data.size());
        a_cloud.dim = 1;
        a_cloud.data.resize(r);
        rng.normals(a_cloud.data.data(), a_cloud.data.size());
        double mean_sp = 0.0;
        for (std::size_t i = 0; i < r; ++i)
            mean_sp +=
                flat_derivative_sp(w_cloud, a_cloud, x, y, a_cloud.data[i], act, ol);
        worst_sp = std::max(worst_sp, std::abs(mean_sp / static_cast<double>(r)));
    }
    const double secs = seconds_since(t0);
    return {worst_joint <= 1e-10 && worst_sp <= 1e-10 && secs < 5.0,
            "normalization over 10000 instances: max |E_m[dl/dm]| " + fmt(worst_joint) +
                ", max |E_sp[dl/dm_sp]| " + fmt(worst_sp) + " (tol 1e-10, " +
                fmt(secs) + " s / 5 s)"};
}

// ---------------------------------------------------------------- criterion 3
// Growth-assumption battery across all (activation, loss) pairs.

Outcome criterion_3() {
    const auto t0 = Clock::now();
    constexpr std::size_t draws = 1000000;
    std::size_t violations = 0;
    std::string first;
    for (const Activation act : {Activation::relu, Activation::tanh,
                                 Activation::sigmoid, Activation::heaviside})
        for (const OuterLoss ol : {OuterLoss::quadratic, OuterLoss::logcosh}) {
            const AssumptionReport rep = assumption_battery(
                act, ol, draws,
                derive_seed(kSeed, 3, static_cast<std::uint64_t>(act),
                            static_cast<std::uint64_t>(ol)));
            violations += rep.violations;
            if (first.empty() && !rep.first_violation.empty())
                first = std::string(activation_name(act)) + "/" + outer_loss_name(ol) +
                        ": " + rep.first_violation;
        }
    const double secs = seconds_since(t0);
    std::string detail = "assumption battery, 8 pairs x 1000000 draws: " +
                         std::to_string(violations) + " violations (" + fmt(secs) +
                         " s / 60 s)";
    if (!first.empty()) detail += "; first: " + first;
    return {violations == 0 && secs < 60.0, detail};
}

// ---------------------------------------------------------------- criterion 4
// Gibbs fixed-point certification on the 2-D toy (q = 1), r = 10^4.

Outcome criterion_4() {
    const auto t0 = Clock::now();
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
    tc.seed = derive_seed(kSeed, 43);
    tc.threads = 1;
    const GibbsPrior prior{tc.potential, tc.sigma, 2};

    // Trained fixed point: real 1-d task, self-consistent density.
    TaskSpec spec;
    spec.q = 1;
    spec.teacher_atoms = 4;
    spec.act = Activation::tanh;
    const TaskPair task = gen_task(spec, derive_seed(kSeed, 41));
    const DataSet data = task.draw_target(16, derive_seed(kSeed, 42));
    const TrainedModel model = train_supervised(data, tc, tc.act, tc.ol, prior);
    const Objective obj{tc.act, tc.ol, prior, tc.beta};
    const double tv_trained =
        gibbs_residual(model.cloud, data, obj, GridSpec::cover(model.cloud, 16));

    // Prior-recovery control: zero-risk data keeps the Gibbs density at the
    // prior (relu with x = 0, y = 0 has an identically zero drift).
    const DataSet zero = zero_drift_data(1, 4);
    TrainConfig pc = tc;
    pc.act = Activation::relu;
    pc.steps = 3000;
    pc.seed = derive_seed(kSeed, 44);
    const TrainedModel flat = train_supervised(zero, pc, pc.act, pc.ol, prior);
    const Objective pobj{pc.act, pc.ol, prior, pc.beta};
    const double tv_prior =
        gibbs_residual(flat.cloud, zero, pobj, GridSpec::cover(flat.cloud, 16));

    const double secs = seconds_since(t0);
    return {tv_trained <= 0.15 && tv_prior <= 0.10 && secs < 120.0,
            "Gibbs certification (q=1, r=10000): trained TV " + fmt(tv_trained) +
                " (tol 0.15), prior-recovery TV " + fmt(tv_prior) + " (tol 0.10, " +
                fmt(secs) + " s / 120 s)"};
}

// ---------------------------------------------------------------- criterion 5
// One-point resampling identity under common random numbers.

Outcome criterion_5() {
    const auto t0 = Clock::now();
    TaskSpec spec;
    spec.q = 2;
    spec.teacher_atoms = 4;
    spec.act = Activation::relu;
    spec.noise_std = 0.1;
    const TaskPair task = gen_task(spec, derive_seed(kSeed, 51));

    TrainConfig tc;
    tc.scenario = Scenario::supervised;
    tc.act = Activation::relu;
    tc.ol = OuterLoss::quadratic;
    tc.potential = Potential::poly10;
    tc.beta = 2.0;
    tc.sigma = 1.0;
    tc.particles = 64;
    tc.steps = 300;
    tc.step_size = 0.05;
    tc.threads = 1;
    const ResamplingCheck sup =
        resampling_identity_check(task, tc, 8, 0, 56, derive_seed(kSeed, 52), 1);
    const double gap_sup = std::abs(sup.lhs.mean - sup.rhs.mean);
    const double lim_sup = 3.0 * sup.combined_se();

    TrainConfig ta = tc;
    ta.scenario = Scenario::alpha_erm;
    ta.alpha = 0.5;
    const ResamplingCheck aerm =
        resampling_identity_check(task, ta, 8, 8, 56, derive_seed(kSeed, 53), 1);
    const double gap_aerm = std::abs(aerm.lhs.mean - aerm.rhs.mean);
    const double lim_aerm = 3.0 * aerm.combined_se();

    const double secs = seconds_since(t0);
    return {gap_sup <= lim_sup && gap_aerm <= lim_aerm && secs < 300.0,
            "resampling identity (n_t=8, 56 replicates): supervised |LHS-RHS| " +
                fmt(gap_sup) + " <= " + fmt(lim_sup) + ", alpha-ERM " + fmt(gap_aerm) +
                " <= " + fmt(lim_aerm) + " (" + fmt(secs) + " s / 300 s)"};
}

// ----------------------------------------------------------- criteria 6 and 7
// One shared pair of rate sweeps: joint scenarios and fine-tuning.

struct SweepBundle {
    SweepResult joint;  // supervised + alpha_erm, n_s = n_t, alpha balanced
    SweepResult ft;     // finetune, n_s fixed at 256
    double build_secs = 0.0;
};

ExperimentConfig sweep_template() {
    ExperimentConfig cfg;
    cfg.task.q = 2;
    cfg.task.teacher_atoms = 4;
    cfg.task.act = Activation::relu;  // similar tasks: shared teacher, noiseless
    cfg.n_t_grid = {32, 64, 128, 256};
    cfg.beta_rule = BetaRule::fixed;
    cfg.beta_value = 2.0;
    cfg.replicates = 20;
    cfg.test_size = 4000;
    cfg.moment_samples = 20000;
    cfg.train.scenario = Scenario::supervised;
    cfg.train.act = Activation::relu;
    cfg.train.ol = OuterLoss::quadratic;
    cfg.train.potential = Potential::poly10;
    cfg.train.sigma = 1.0;
    cfg.train.particles = 256;
    cfg.train.steps = 600;
    cfg.train.step_size = 0.05;
    cfg.threads = 1;
    return cfg;
}

const SweepBundle& shared_sweeps() {
    static std::optional<SweepBundle> cache;
    if (!cache) {
        const auto t0 = Clock::now();
        ExperimentConfig joint = sweep_template();
        joint.scenarios = {Scenario::supervised, Scenario::alpha_erm};
        joint.ns_rule = NsRule::proportional;
        joint.ns_value = 1.0;  // n_s = n_t
        joint.alpha_rule = AlphaRule::balanced;
        joint.seed = derive_seed(kSeed, 6);

        ExperimentConfig ft = sweep_template();
        ft.scenarios = {Scenario::finetune};
        ft.ns_rule = NsRule::fixed;
        ft.ns_value = 256.0;
        ft.seed = derive_seed(kSeed, 7);

        SweepBundle bundle;
        bundle.joint = run_rate_sweep(joint);
        bundle.ft = run_rate_sweep(ft);
        bundle.build_secs = seconds_since(t0);
        cache = std::move(bundle);
    }
    return *cache;
}

Outcome criterion_6() {
    const SweepBundle& bundle = shared_sweeps();
    std::ostringstream detail;
    detail << "rate slopes (target -1 +- 0.3):";
    bool pass = true;
    const auto check_scenario = [&](const SweepResult& result, const char* name) {
        for (const auto& [scen, fit] : result.rates)
            if (scen == name) {
                const bool ok = std::abs(fit.slope + 1.0) <= 0.3;
                pass = pass && ok;
                detail << ' ' << name << ' ' << fmt(fit.slope) << " (r2 "
                       << fmt(fit.r2) << ", " << fit.used.size() << "/"
                       << fit.points.size() << " pts)" << (ok ? "" : " OUT");
                return;
            }
        pass = false;
        detail << ' ' << name << " NO-FIT";
    };
    check_scenario(bundle.joint, "supervised");
    check_scenario(bundle.joint, "alpha_erm");
    check_scenario(bundle.ft, "finetune");
    detail << " (" << fmt(bundle.build_secs) << " s / 1200 s)";
    return {pass && bundle.build_secs < 1200.0, detail.str()};
}

Outcome criterion_7() {
    const SweepBundle& bundle = shared_sweeps();

    // Amortized cost audit: redo from scratch everything the bound path adds
    // to a sweep (moment Monte Carlo per sweep, the complexity quadratures,
    // one right-hand-side evaluation per cell) and hold it to the budget.
    const auto t0 = Clock::now();
    const ExperimentConfig proto = sweep_template();
    const Constants c = constants_extract(proto.train.act, proto.train.ol);
    const ComplexityComparison comp =
        complexity_comparison(proto.train.sigma, proto.task.q);
    double audit_sum = 0.0;
    for (const std::uint64_t tag : {61, 71}) {
        const TaskPair task = gen_task(proto.task, derive_seed(kSeed, tag, 1));
        const DataMoments target = data_moments_mc(
            task.draw_target, proto.moment_samples, derive_seed(kSeed, tag, 2));
        const DataMoments source = data_moments_mc(
            task.draw_source, proto.moment_samples, derive_seed(kSeed, tag, 3));
        for (const std::size_t n_t : proto.n_t_grid) {
            const double n = static_cast<double>(n_t);
            if (tag == 61) {
                audit_sum += bound_rhs_wtge_alpha(c, comp.comp_alpha_value, target,
                                                  source, 1.0, proto.beta_value,
                                                  proto.train.sigma, n)
                                 .rhs_value;
                audit_sum += bound_rhs_wtge_alpha(c, comp.comp_alpha_value, target,
                                                  source, 0.5, proto.beta_value,
                                                  proto.train.sigma, n)
                                 .rhs_value;
            } else {
                audit_sum += bound_rhs_wtge_finetune(c, comp.comp_ft_value, target,
                                                     source, proto.beta_value,
                                                     proto.train.sigma, n)
                                 .rhs_value;
            }
        }
    }
    const double bound_secs = seconds_since(t0);

    std::size_t cells = 0;
    double worst_margin = -1e300;  // max of (|mean| + 3 SE) - rhs, must stay < 0
    std::string worst_at;
    bool all_bounded = true;
    const auto scan = [&](const SweepResult& result) {
        for (const auto& scen : result.report.at("scenarios"))
            for (const auto& cell : scen.at("cells")) {
                ++cells;
                const double mean = cell.at("wtge_mean").get<double>();
                const double se = cell.at("wtge_se").get<double>();
                const double rhs = cell.at("bound").at("rhs_value").get<double>();
                const double margin = std::abs(mean) + 3.0 * se - rhs;
                all_bounded = all_bounded && margin <= 0.0;
                if (margin > worst_margin) {
                    worst_margin = margin;
                    worst_at = scen.at("scenario").get<std::string>() + " n_t=" +
                               std::to_string(cell.at("n_t").get<std::size_t>()) +
                               ": |mean|+3se " +
                               fmt(std::abs(mean) + 3.0 * se) + " vs rhs " + fmt(rhs);
                }
            }
    };
    scan(bundle.joint);
    scan(bundle.ft);
    return {all_bounded && cells == 12 && audit_sum > 0.0 && bound_secs < 30.0,
            "bound domination at " + std::to_string(cells) +
                " grid cells; tightest: " + worst_at + "; bound machinery redo " +
                fmt(bound_secs) + " s / 30 s"};
}

// ---------------------------------------------------------------- criterion 8
// Reduction exactness of the alpha-ERM scenario at its endpoints.

Outcome criterion_8() {
    const auto t0 = Clock::now();
    TaskSpec spec;
    spec.q = 2;
    spec.teacher_atoms = 4;
    spec.act = Activation::tanh;
    const TaskPair task = gen_task(spec, derive_seed(kSeed, 81));
    const DataSet data_t = task.draw_target(16, derive_seed(kSeed, 82));
    const DataSet data_s = task.draw_source(16, derive_seed(kSeed, 83));

    TrainConfig tc;
    tc.scenario = Scenario::alpha_erm;
    tc.alpha = 1.0;
    tc.act = Activation::tanh;
    tc.ol = OuterLoss::quadratic;
    tc.potential = Potential::poly10;
    tc.beta = 4.0;
    tc.sigma = 1.0;
    tc.particles = 64;
    tc.steps = 50;
    tc.step_size = 0.05;
    tc.seed = derive_seed(kSeed, 84);
    tc.threads = 1;
    const GibbsPrior prior{tc.potential, tc.sigma, spec.q + 1};

    const TrainedModel erm = train_alpha_erm(data_t, data_s, tc, tc.act, tc.ol, prior);
    TrainConfig ts = tc;
    ts.scenario = Scenario::supervised;
    const TrainedModel sup = train_supervised(data_t, ts, ts.act, ts.ol, prior);
    bool bitwise = erm.cloud.data == sup.cloud.data &&
                   erm.trace.size() == sup.trace.size();
    if (bitwise)
        for (std::size_t i = 0; i < erm.trace.size(); ++i)
            bitwise = bitwise && erm.trace[i].step == sup.trace[i].step &&
                      erm.trace[i].train_risk == sup.trace[i].train_risk &&
                      erm.trace[i].drift_norm == sup.trace[i].drift_norm &&
                      erm.trace[i].noise_scale == sup.trace[i].noise_scale;

    // alpha = 0: the model never sees target training data, so its expected
    // target generalization gap is exactly zero.
    TrainConfig t0cfg = tc;
    t0cfg.alpha = 0.0;
    t0cfg.particles = 32;
    t0cfg.steps = 60;
    const std::vector<ReplicateRow> rows = run_replicates(
        task, t0cfg, 8, 16, 24, 2000, derive_seed(kSeed, 85), 1);
    const GenEstimate wtge = wtge_from_rows(rows);
    const bool centered =
        wtge.std_error > 0.0 && std::abs(wtge.mean) <= 3.0 * wtge.std_error;

    const double secs = seconds_since(t0);
    return {bitwise && centered && secs < 60.0,
            std::string("alpha=1 trajectory ") +
                (bitwise ? "bitwise-equal to supervised" : "DIFFERS from supervised") +
                "; alpha=0 WTGE " + fmt(wtge.mean) + " within 3 SE (" +
                fmt(3.0 * wtge.std_error) + ") of 0 (" + fmt(secs) + " s / 60 s)"};
}

// ---------------------------------------------------------------- criterion 9
// Byte-identical rate-sweep CSV for any --threads value.

Outcome criterion_9() {
    const auto t0 = Clock::now();
    const fs::path dir = fs::temp_directory_path() / "mftl_acceptance_c9";
    fs::remove_all(dir);
    fs::create_directories(dir);

    ExperimentConfig cfg = sweep_template();
    cfg.scenarios = {Scenario::supervised, Scenario::alpha_erm};
    cfg.n_t_grid = {8, 16};
    cfg.ns_rule = NsRule::fixed;
    cfg.ns_value = 32.0;
    cfg.alpha_rule = AlphaRule::balanced;
    cfg.replicates = 4;
    cfg.test_size = 256;
    cfg.moment_samples = 2000;
    cfg.train.particles = 32;
    cfg.train.steps = 40;
    cfg.seed = derive_seed(kSeed, 9);
    {
        std::ofstream out(dir / "sweep.json", std::ios::binary);
        out << experiment_to_json(cfg).dump(2);
    }

    const std::string config = (dir / "sweep.json").string();
    const int rc1 = run_cli_args({"rate-sweep", "--config", config, "--out",
                                  (dir / "a").string(), "--threads", "1"});
    const int rc2 = run_cli_args({"rate-sweep", "--config", config, "--out",
                                  (dir / "b").string(), "--threads", "2"});
    const int rc3 = run_cli_args({"rate-sweep", "--config", config, "--out",
                                  (dir / "c").string(), "--threads", "1"});
    const std::string csv_a = slurp(dir / "a" / "rate_sweep.csv");
    const std::string csv_b = slurp(dir / "b" / "rate_sweep.csv");
    const std::string csv_c = slurp(dir / "c" / "rate_sweep.csv");
    const std::string json_a = slurp(dir / "a" / "rate_sweep.json");
    const std::string json_b = slurp(dir / "b" / "rate_sweep.json");
    fs::remove_all(dir);

    const bool ok = rc1 == 0 && rc2 == 0 && rc3 == 0 && !csv_a.empty() &&
                    csv_a == csv_b && csv_a == csv_c && json_a == json_b;
    const double secs = seconds_since(t0);
    return {ok && secs < 300.0,
            std::string("rate-sweep CSV across --threads 1/2/1: ") +
                (ok ? "byte-identical" : "MISMATCH") + " (" +
                std::to_string(csv_a.size()) + " bytes, " + fmt(secs) +
                " s / 300 s)"};
}

Outcome run_criterion(int n) {
    switch (n) {
        case 1: return criterion_1();
        case 2: return criterion_2();
        case 3: return criterion_3();
        case 4: return criterion_4();
        case 5: return criterion_5();
        case 6: return criterion_6();
        case 7: return criterion_7();
        case 8: return criterion_8();
        case 9: return criterion_9();
    }
    return {false, "unknown criterion"};
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) {
        const int n = std::atoi(argv[i]);
        if (n < 1 || n > 9) {
            std::cerr << "usage: acceptance [1..9 ...]\n";
            return 2;
        }
        wanted.push_back(n);
    }
    if (wanted.empty()) wanted = {1, 2, 3, 4, 5, 6, 7, 8, 9};

    bool all_pass = true;
    for (const int n : wanted) {
        Outcome out;
        try {
            out = run_criterion(n);
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        all_pass = all_pass && out.pass;
        std::cout << (out.pass ? "[PASS]" : "[FAIL]") << " criterion " << n << ": "
                  << out.detail << std::endl;
    }
    return all_pass ? 0 : 1;
}
