// mftl: generalization-gap estimators, the resampling identity, itemized
// bound reports, the dictionary IPM, rate fitting and complexity ceilings.
// SPDX-License-Identifier: MIT
#include "mftl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "mftl/objective.hpp"

namespace mftl {

namespace {

bool needs_source(Scenario s) { return s != Scenario::supervised; }

/// Dispatches to the scenario driver; the prior is rebuilt from cfg on the
/// data dimension so orchestration runs are fully described by (task, cfg).
TrainedModel train_by_scenario(const TrainConfig& cfg, int q, const DataSet& dt,
                               const DataSet& ds) {
    const GibbsPrior prior{cfg.potential, cfg.sigma, q + 1};
    switch (cfg.scenario) {
        case Scenario::supervised:
            return train_supervised(dt, cfg, cfg.act, cfg.ol, prior);
        case Scenario::alpha_erm:
            return train_alpha_erm(dt, ds, cfg, cfg.act, cfg.ol, prior);
        case Scenario::finetune:
            return train_finetune(dt, ds, cfg, cfg.act, cfg.ol, prior);
    }
    throw ArgumentError("train: unknown scenario");
}

GenEstimate estimate_from_values(std::vector<double> values) {
    if (values.size() < 2)
        throw InsufficientDataError("estimate: fewer than 2 usable replicates");
    const MeanSe ms = mean_and_se(values);
    GenEstimate est;
    est.mean = ms.mean;
    est.std_error = ms.se;
    est.replicates = values.size();
    est.values = std::move(values);
    return est;
}

void check_failure_rate(std::size_t failed, std::size_t total) {
    if (failed > 0 && 5 * failed >= total)
        throw InsufficientDataError("replicate runner: " + std::to_string(failed) +
                                    " of " + std::to_string(total) +
                                    " replicates diverged (>= 20%)");
}

void check_task(const TaskPair& task, const TrainConfig& cfg, std::size_t n_t,
                std::size_t n_s) {
    cfg.validate();
    if (!task.draw_target) throw ArgumentError("task: draw_target is not set");
    if (n_t == 0) throw ArgumentError("replicate runner: n_t must be positive");
    if (needs_source(cfg.scenario)) {
        if (!task.draw_source) throw ArgumentError("task: draw_source is not set");
        if (n_s == 0) throw ArgumentError("replicate runner: n_s must be positive");
    }
}

}  // namespace

std::vector<ReplicateRow> run_replicates(const TaskPair& task, const TrainConfig& cfg,
                                         std::size_t n_t, std::size_t n_s,
                                         std::size_t replicates, std::size_t test_size,
                                         std::uint64_t seed, int threads) {
    check_task(task, cfg, n_t, n_s);
    if (replicates < 2) throw ArgumentError("replicate runner: need >= 2 replicates");
    if (test_size == 0) throw ArgumentError("replicate runner: test_size must be positive");

    std::vector<ReplicateRow> rows(replicates);
    parallel_for(replicates, threads, [&](std::size_t k) {
        const std::uint64_t rep = derive_seed(seed, k);
        ReplicateRow& row = rows[k];
        row.replicate = k;
        const DataSet dt = task.draw_target(n_t, derive_seed(rep, 1));
        DataSet ds;
        if (needs_source(cfg.scenario)) ds = task.draw_source(n_s, derive_seed(rep, 2));
        const DataSet test = task.draw_target(test_size, derive_seed(rep, 3));
        TrainConfig c = cfg;
        c.seed = derive_seed(rep, 4);
        c.threads = 1;  // parallelism lives across replicates
        row.seed = c.seed;
        try {
            const TrainedModel model = train_by_scenario(c, task.q, dt, ds);
            row.train_risk = model.risk_on(dt);
            row.test_risk = model.risk_on(test);
            row.gen_gap = row.test_risk - row.train_risk;
        } catch (const DivergedError&) {
            row.failed = true;
        }
    });

    const auto failed = static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const ReplicateRow& r) { return r.failed; }));
    check_failure_rate(failed, replicates);
    return rows;
}

GenEstimate wtge_from_rows(const std::vector<ReplicateRow>& rows) {
    std::vector<double> vals;
    vals.reserve(rows.size());
    for (const ReplicateRow& r : rows)
        if (!r.failed) vals.push_back(r.gen_gap);
    return estimate_from_values(std::move(vals));
}

GenEstimate wter_from_rows(const std::vector<ReplicateRow>& rows) {
    std::vector<double> vals;
    vals.reserve(rows.size());
    for (const ReplicateRow& r : rows)
        if (!r.failed) vals.push_back(r.test_risk);
    return estimate_from_values(std::move(vals));
}

GenEstimate wtge_estimate(const TaskPair& task, const TrainConfig& cfg, std::size_t n_t,
                          std::size_t n_s, std::size_t replicates, std::size_t test_size,
                          std::uint64_t seed, int threads) {
    return wtge_from_rows(
        run_replicates(task, cfg, n_t, n_s, replicates, test_size, seed, threads));
}

GenEstimate wter_estimate(const TaskPair& task, const TrainConfig& cfg, std::size_t n_t,
                          std::size_t n_s, std::size_t replicates, std::size_t test_size,
                          std::uint64_t seed, int threads) {
    if (!task.noiseless)
        throw ArgumentError(
            "excess-risk estimate: the task must be noiseless so the teacher "
            "attains population risk 0");
    return wter_from_rows(
        run_replicates(task, cfg, n_t, n_s, replicates, test_size, seed, threads));
}

double ResamplingCheck::combined_se() const {
    return std::sqrt(lhs.std_error * lhs.std_error + rhs.std_error * rhs.std_error);
}

ResamplingCheck resampling_identity_check(const TaskPair& task, const TrainConfig& cfg,
                                          std::size_t n_t, std::size_t n_s,
                                          std::size_t outer_replicates,
                                          std::uint64_t seed, int threads) {
    check_task(task, cfg, n_t, n_s);
    if (n_t > 16)
        throw ArgumentError(
            "resampling check: n_t must be <= 16 (each replicate trains twice)");
    if (outer_replicates < 50)
        throw ArgumentError("resampling check: need >= 50 outer replicates");

    std::vector<double> lhs(outer_replicates, 0.0);
    std::vector<double> rhs(outer_replicates, 0.0);
    std::vector<char> failed(outer_replicates, 0);

    parallel_for(outer_replicates, threads, [&](std::size_t k) {
        const std::uint64_t rep = derive_seed(seed, k);
        const DataSet dt = task.draw_target(n_t, derive_seed(rep, 1));
        DataSet ds;
        if (needs_source(cfg.scenario)) ds = task.draw_source(n_s, derive_seed(rep, 2));
        const DataSet zbar = task.draw_target(1, derive_seed(rep, 3));
        TrainConfig c = cfg;
        c.seed = derive_seed(rep, 4);
        c.threads = 1;
        try {
            // Common random numbers: both trainings reuse c.seed so the only
            // difference between M and M1 is the replaced sample.
            const TrainedModel m = train_by_scenario(c, task.q, dt, ds);
            const DataSet dt1 = resample_one(dt, 0, zbar.x(0), zbar.ys[0]);
            const TrainedModel m1 = train_by_scenario(c, task.q, dt1, ds);
            const double loss_m = loss_eval(cfg.ol, m.predict_y(zbar.x(0)), zbar.ys[0]);
            const double loss_m1 = loss_eval(cfg.ol, m1.predict_y(zbar.x(0)), zbar.ys[0]);
            lhs[k] = loss_m - m.risk_on(dt);
            rhs[k] = loss_m - loss_m1;
        } catch (const DivergedError&) {
            failed[k] = 1;
        }
    });

    const auto failures = static_cast<std::size_t>(
        std::count(failed.begin(), failed.end(), static_cast<char>(1)));
    check_failure_rate(failures, outer_replicates);

    std::vector<double> lhs_use, rhs_use;
    lhs_use.reserve(outer_replicates);
    rhs_use.reserve(outer_replicates);
    for (std::size_t k = 0; k < outer_replicates; ++k) {
        if (failed[k]) continue;
        lhs_use.push_back(lhs[k]);
        rhs_use.push_back(rhs[k]);
    }
    ResamplingCheck check;
    check.lhs = estimate_from_values(std::move(lhs_use));
    check.rhs = estimate_from_values(std::move(rhs_use));
    return check;
}

// --------------------------------------------------------------- constants

namespace {

/// L_phi with |phi(w.x)| <= L_phi (1+||x||)(1+||w||); all four families
/// satisfy it with 1 (relu: |max(u,0)| <= |u| <= ||w|| ||x||; tanh/sigmoid/
/// heaviside are bounded by 1).
double act_growth_constant(Activation act) {
    switch (act) {
        case Activation::relu:
        case Activation::tanh:
        case Activation::sigmoid:
        case Activation::heaviside: return 1.0;
    }
    throw UnsupportedError("constants: unknown activation family");
}

}  // namespace

Constants constants_extract(Activation act, OuterLoss ol) {
    const LossConstants lc = loss_constants(ol);
    Constants c;
    c.L_l = lc.L_l;
    c.L_l1 = lc.L_l1;
    c.L_l2 = lc.L_l2;
    c.L_phi = act_growth_constant(act);
    c.L_m = 4.0 * c.L_l * c.L_phi * c.L_phi;
    c.L_e = 24.0 * c.L_l1 * c.L_phi * (1.0 + c.L_phi);
    return c;
}

// ------------------------------------------------------- assumption battery

namespace {

std::string violation_message(const char* check, double lhs, double rhs) {
    std::ostringstream out;
    out << std::setprecision(17) << check << ": |value| = " << lhs
        << " exceeds bound " << rhs;
    return out.str();
}

}  // namespace

AssumptionReport assumption_battery(Activation act, OuterLoss ol, std::size_t draws,
                                    std::uint64_t seed) {
    if (draws == 0) throw ArgumentError("assumption battery: draws must be positive");
    const Constants c = constants_extract(act, ol);
    const RngStream stream{seed, StreamTag::generic};
    constexpr int q = 3;
    constexpr int d = q + 1;

    AssumptionReport report;
    report.draws = draws;

    std::vector<double> theta(d), x(q), atoms;
    ParticleCloud cloud;
    cloud.dim = d;

    const auto record = [&](const char* check, double lhs, double rhs) {
        if (lhs <= rhs) return;
        ++report.violations;
        if (report.first_violation.empty())
            report.first_violation = violation_message(check, lhs, rhs);
    };

    for (std::size_t i = 0; i < draws; ++i) {
        SubRng rng(stream, 0, static_cast<std::uint32_t>(i));

        // Wide log-scale draws so the battery probes both the bounded core
        // and the polynomial tails of each inequality.
        const double theta_scale = std::exp(3.0 * rng.uniform() - 1.0);
        rng.normals(theta.data(), theta.size());
        for (double& t : theta) t *= theta_scale;

        const double x_scale = std::exp(2.0 * rng.uniform() - 1.0);
        rng.normals(x.data(), x.size());
        for (double& v : x) v *= x_scale;

        const double y = 2.0 * rng.normal();
        const double yhat = 2.0 * std::exp(2.0 * rng.uniform() - 1.0) * rng.normal();

        const std::size_t n_atoms = 1 + rng.next_u32() % 8;
        const double atom_scale = std::exp(2.0 * rng.uniform() - 1.0);
        atoms.resize(n_atoms * d);
        rng.normals(atoms.data(), atoms.size());
        for (double& a : atoms) a *= atom_scale;
        cloud.data = atoms;

        const double x_norm = std::sqrt(squared_norm(x));
        const double w_norm =
            std::sqrt(squared_norm(std::span<const double>(theta).subspan(1)));
        const double z2 = squared_norm(x) + y * y;

        // Pointwise loss / activation bounds.
        record("loss growth", std::abs(loss_eval(ol, yhat, y)),
               c.L_l * (1.0 + yhat * yhat + y * y));
        record("loss first derivative", std::abs(loss_d1(ol, yhat, y)),
               c.L_l1 * (1.0 + std::abs(yhat) + std::abs(y)));
        record("loss second derivative", std::abs(loss_d2(ol, yhat, y)), c.L_l2);
        record("activation growth",
               std::abs(act_eval(act, dot(std::span<const double>(theta).subspan(1), x))),
               c.L_phi * (1.0 + x_norm) * (1.0 + w_norm));

        // Measure-level growth bounds on the loss and its flat derivative.
        double mean_theta4 = 0.0;
        for (std::size_t j = 0; j < n_atoms; ++j) {
            const double n2 = squared_norm(cloud.atom(j));
            mean_theta4 += n2 * n2;
        }
        mean_theta4 /= static_cast<double>(n_atoms);
        const double theta2 = squared_norm(theta);

        record("measure loss growth", std::abs(loss(cloud, x, y, act, ol)),
               c.L_m * (1.0 + mean_theta4) * (1.0 + z2));
        record("flat-derivative growth",
               std::abs(flat_derivative(cloud, x, y, theta, act, ol)),
               c.L_e * (1.0 + theta2 * theta2 + mean_theta4) * (1.0 + z2));
    }
    return report;
}

// ------------------------------------------------------------ data moments

DataMoments data_moments_mc(const std::function<DataSet(std::size_t, std::uint64_t)>& gen,
                            std::size_t count, std::uint64_t seed) {
    if (!gen) throw ArgumentError("data moments: generator is not set");
    if (count == 0) throw ArgumentError("data moments: count must be positive");
    const DataSet data = gen(count, seed);
    DataMoments m;
    m.m1 = data_moment(data, 1);
    m.m2 = data_moment(data, 2);
    m.m4 = data_moment(data, 4);
    return m;
}

// ------------------------------------------------------------ bound reports

namespace {

double formula_wtge_alpha(double alpha, double beta, double sigma, double n_t,
                          double l_e, double l_m, double comp, double e_t4,
                          double e_t2, double e_s2) {
    const double temp = 2.0 * beta * beta / (sigma * sigma);
    const double lip = 1.0 + alpha * l_m;
    const double burn = 1.0 + 2.0 / n_t;
    const double bracket = 2.0 * (2.0 + alpha) * (2.0 + alpha) * e_t4 +
                           2.0 * (1.0 - alpha) * (1.0 - alpha) * e_t2 * e_s2;
    return (alpha / n_t) * std::sqrt(2.0) * temp * l_e * l_e * lip * lip * burn *
           burn * comp * bracket;
}

double formula_wtge_finetune(double beta_t, double sigma, double n_t, double l_e,
                             double l_m, double comp_ft, double e_s2, double e_t4) {
    const double burn = 1.0 + 2.0 / n_t;
    return (2.0 / n_t) * burn * burn * (16.0 * beta_t * beta_t / (sigma * sigma)) *
           l_e * l_e * (1.0 + l_m) * (1.0 + l_m) * comp_ft * e_s2 * e_t4;
}

double formula_wter_alpha(double c_t, double c_s, double c_d, double alpha,
                          double beta, double sigma, double n_t, double n_s,
                          double kl, double similarity) {
    const double temp = 8.0 * beta * beta / (sigma * sigma);
    const double target_term = c_t * alpha / n_t * temp;
    const double source_term = (alpha == 1.0) ? 0.0 : c_s * (1.0 - alpha) / n_s * temp;
    const double shift_term = (1.0 - alpha) * c_d * similarity;
    const double kl_term = sigma * sigma / (2.0 * beta * beta) * kl;
    return target_term + source_term + shift_term + kl_term;
}

double formula_wter_finetune(double c_t, double c_s, double c_d, double beta_s,
                             double beta_t, double sigma, double n_t, double n_s,
                             double kl_sp, double kl_joint, double similarity) {
    return c_t / n_t * (beta_t * beta_t / (sigma * sigma)) +
           sigma * sigma / (2.0 * beta_t * beta_t) * kl_sp +
           c_s / n_s * (beta_s * beta_s / (sigma * sigma)) +
           sigma * sigma / (2.0 * beta_s * beta_s) * kl_joint + c_d * similarity;
}

void check_bound_args(double beta, double sigma, double n_t) {
    if (beta <= 0.0) throw ArgumentError("bound: beta must be positive");
    if (sigma <= 0.0) throw ArgumentError("bound: sigma must be positive");
    if (n_t < 1.0) throw ArgumentError("bound: n_t must be >= 1");
}

}  // namespace

double BoundReport::item(const std::string& name) const {
    for (const BoundItem& it : items)
        if (it.name == name) return it.value;
    throw ArgumentError("bound report: no item named '" + name + "'");
}

double BoundReport::recompute() const {
    if (scenario == "wtge_alpha")
        return formula_wtge_alpha(item("alpha"), item("beta"), item("sigma"),
                                  item("n_t"), item("L_e"), item("L_m"), item("comp"),
                                  item("E_t4"), item("E_t2"), item("E_s2"));
    if (scenario == "wtge_finetune")
        return formula_wtge_finetune(item("beta_t"), item("sigma"), item("n_t"),
                                     item("L_e"), item("L_m"), item("comp_ft"),
                                     item("E_s2"), item("E_t4"));
    if (scenario == "wter_alpha")
        return formula_wter_alpha(item("C_t"), item("C_s"), item("C_d"), item("alpha"),
                                  item("beta"), item("sigma"), item("n_t"), item("n_s"),
                                  item("kl"), item("similarity"));
    if (scenario == "wter_finetune")
        return formula_wter_finetune(item("C_t"), item("C_s"), item("C_d"),
                                     item("beta_s"), item("beta_t"), item("sigma"),
                                     item("n_t"), item("n_s"), item("kl_sp"),
                                     item("kl_joint"), item("similarity"));
    throw ArgumentError("bound report: unknown scenario '" + scenario + "'");
}

BoundReport bound_rhs_wtge_alpha(const Constants& c, double comp_value,
                                 const DataMoments& target, const DataMoments& source,
                                 double alpha, double beta, double sigma, double n_t) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ArgumentError("bound: alpha must lie in [0,1]");
    check_bound_args(beta, sigma, n_t);
    BoundReport r;
    r.scenario = "wtge_alpha";
    r.items = {{"alpha", alpha, "mixture weight"},
               {"beta", beta, "inverse temperature"},
               {"sigma", sigma, "prior scale"},
               {"n_t", n_t, "target sample count"},
               {"L_e", c.L_e, "flat-derivative growth constant (family table)"},
               {"L_m", c.L_m, "risk growth constant (family table)"},
               {"comp", comp_value, "tilted-prior complexity (radial quadrature)"},
               {"E_t4", target.m4, "target E(1+||Z||^2)^4 (Monte-Carlo)"},
               {"E_t2", target.m2, "target E(1+||Z||^2)^2 (Monte-Carlo)"},
               {"E_s2", source.m2, "source E(1+||Z||^2)^2 (Monte-Carlo)"}};
    r.rhs_value = formula_wtge_alpha(alpha, beta, sigma, n_t, c.L_e, c.L_m, comp_value,
                                     target.m4, target.m2, source.m2);
    r.certificate = true;
    return r;
}

BoundReport bound_rhs_wtge_finetune(const Constants& c, double comp_ft_value,
                                    const DataMoments& target, const DataMoments& source,
                                    double beta_t, double sigma, double n_t) {
    check_bound_args(beta_t, sigma, n_t);
    BoundReport r;
    r.scenario = "wtge_finetune";
    r.items = {{"beta_t", beta_t, "stage-2 inverse temperature"},
               {"sigma", sigma, "prior scale"},
               {"n_t", n_t, "target sample count"},
               {"L_e", c.L_e, "flat-derivative growth constant (family table)"},
               {"L_m", c.L_m, "risk growth constant (family table)"},
               {"comp_ft", comp_ft_value, "block complexity (radial quadrature)"},
               {"E_s2", source.m2, "source E(1+||Z||^2)^2 (Monte-Carlo)"},
               {"E_t4", target.m4, "target E(1+||Z||^2)^4 (Monte-Carlo)"}};
    r.rhs_value = formula_wtge_finetune(beta_t, sigma, n_t, c.L_e, c.L_m, comp_ft_value,
                                        source.m2, target.m4);
    r.certificate = true;
    return r;
}

BoundReport bound_rhs_wter_alpha(const WterCoefficients& coeff, double alpha,
                                 double beta, double sigma, double n_t, double n_s,
                                 double kl, double similarity,
                                 bool similarity_is_lower_bound) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ArgumentError("bound: alpha must lie in [0,1]");
    check_bound_args(beta, sigma, n_t);
    if (alpha < 1.0 && n_s < 1.0)
        throw ArgumentError("bound: n_s must be >= 1 when alpha < 1");
    if (kl < 0.0) throw ArgumentError("bound: kl must be nonnegative");
    BoundReport r;
    r.scenario = "wter_alpha";
    r.items = {{"C_t", coeff.C_t, "target fluctuation coefficient (caller supplied)"},
               {"C_s", coeff.C_s, "source fluctuation coefficient (caller supplied)"},
               {"C_d", coeff.C_d, "task-shift coefficient (caller supplied)"},
               {"alpha", alpha, "mixture weight"},
               {"beta", beta, "inverse temperature"},
               {"sigma", sigma, "prior scale"},
               {"n_t", n_t, "target sample count"},
               {"n_s", n_s, "source sample count"},
               {"kl", kl, "KL(target measure || prior)"},
               {"similarity", similarity,
                similarity_is_lower_bound ? "dictionary IPM estimate (lower bound)"
                                          : "task distance (exact)"},
               {"similarity_is_lower_bound", similarity_is_lower_bound ? 1.0 : 0.0,
                "1 when the similarity entry is a lower-bound estimate"}};
    r.rhs_value = formula_wter_alpha(coeff.C_t, coeff.C_s, coeff.C_d, alpha, beta,
                                     sigma, n_t, n_s, kl, similarity);
    r.certificate = !similarity_is_lower_bound;
    return r;
}

BoundReport bound_rhs_wter_finetune(const WterCoefficients& coeff, double beta_s,
                                    double beta_t, double sigma, double n_t,
                                    double n_s, double kl_sp, double kl_joint,
                                    double similarity, bool similarity_is_lower_bound) {
    check_bound_args(beta_t, sigma, n_t);
    if (beta_s <= 0.0) throw ArgumentError("bound: beta_s must be positive");
    if (n_s < 1.0) throw ArgumentError("bound: n_s must be >= 1");
    if (kl_sp < 0.0 || kl_joint < 0.0)
        throw ArgumentError("bound: kl terms must be nonnegative");
    BoundReport r;
    r.scenario = "wter_finetune";
    r.items = {{"C_t", coeff.C_t, "target fluctuation coefficient (caller supplied)"},
               {"C_s", coeff.C_s, "source fluctuation coefficient (caller supplied)"},
               {"C_d", coeff.C_d, "task-shift coefficient (caller supplied)"},
               {"beta_s", beta_s, "stage-1 inverse temperature"},
               {"beta_t", beta_t, "stage-2 inverse temperature"},
               {"sigma", sigma, "prior scale"},
               {"n_t", n_t, "target sample count"},
               {"n_s", n_s, "source sample count"},
               {"kl_sp", kl_sp, "KL of the outer-weight measure vs its prior"},
               {"kl_joint", kl_joint, "KL of the joint measure vs its prior"},
               {"similarity", similarity,
                similarity_is_lower_bound ? "dictionary IPM estimate (lower bound)"
                                          : "task distance (exact)"},
               {"similarity_is_lower_bound", similarity_is_lower_bound ? 1.0 : 0.0,
                "1 when the similarity entry is a lower-bound estimate"}};
    r.rhs_value = formula_wter_finetune(coeff.C_t, coeff.C_s, coeff.C_d, beta_s, beta_t,
                                        sigma, n_t, n_s, kl_sp, kl_joint, similarity);
    r.certificate = !similarity_is_lower_bound;
    return r;
}

std::string bound_report_json(const BoundReport& report) {
    nlohmann::json j;
    j["scenario"] = report.scenario;
    j["rhs_value"] = report.rhs_value;
    j["recomputed"] = report.recompute();
    j["certificate"] = report.certificate;
    auto items = nlohmann::json::array();
    for (const BoundItem& it : report.items)
        items.push_back({{"name", it.name}, {"value", it.value}, {"note", it.note}});
    j["items"] = std::move(items);
    return j.dump(2);
}

// ------------------------------------------------------------ dictionary IPM

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

/// Per-sample weight (1 + ||z||^p) and unit direction zhat of z = (x, y).
struct IpmPrep {
    std::vector<double> weight;  // n
    std::vector<double> zhat;    // n x d, row-major
};

IpmPrep ipm_prepare(const DataSet& data, int p) {
    const int d = data.q + 1;
    IpmPrep prep;
    prep.weight.resize(data.n());
    prep.zhat.assign(data.n() * static_cast<std::size_t>(d), 0.0);
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto x = data.x(i);
        const double y = data.ys[i];
        const double n2 = squared_norm(x) + y * y;
        prep.weight[i] = 1.0 + (p == 2 ? n2 : n2 * n2);
        const double norm = std::sqrt(n2);
        if (norm > 0.0) {
            double* row = prep.zhat.data() + i * static_cast<std::size_t>(d);
            for (int j = 0; j < data.q; ++j) row[j] = x[j] / norm;
            row[data.q] = y / norm;
        }
    }
    return prep;
}

}  // namespace

double ipm_dictionary(const DataSet& data_a, const DataSet& data_b, int p,
                      std::size_t dictionary_size, std::uint64_t seed) {
    if (p != 2 && p != 4) throw ArgumentError("dictionary IPM: p must be 2 or 4");
    if (dictionary_size < 256)
        throw ArgumentError("dictionary IPM: dictionary_size must be >= 256");
    if (data_a.q != data_b.q)
        throw ArgumentError("dictionary IPM: input dimensions differ");
    if (data_a.n() == 0 || data_b.n() == 0)
        throw InsufficientDataError("dictionary IPM: empty sample set");

    const int d = data_a.q + 1;
    const IpmPrep prep_a = ipm_prepare(data_a, p);
    const IpmPrep prep_b = ipm_prepare(data_b, p);
    const RngStream stream{seed, StreamTag::dictionary};

    std::vector<double> u(d);
    std::vector<double> vals_a(data_a.n()), vals_b(data_b.n());
    const auto set_mean = [&](const IpmPrep& prep, std::vector<double>& vals,
                              double bias) {
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double* row = prep.zhat.data() + i * static_cast<std::size_t>(d);
            const double t = dot(std::span<const double>(row, u.size()), u) + bias;
            vals[i] = prep.weight[i] * logistic(t);
        }
        return pairwise_mean(vals);
    };

    double best = 0.0;
    for (std::size_t k = 0; k < dictionary_size; ++k) {
        SubRng rng(stream, 0, static_cast<std::uint32_t>(k));
        double n2 = 0.0;
        do {
            rng.normals(u.data(), u.size());
            n2 = squared_norm(u);
        } while (n2 == 0.0);
        const double inv = 1.0 / std::sqrt(n2);
        for (double& v : u) v *= inv;
        const double bias = 2.0 * rng.uniform() - 1.0;
        const double gap = std::abs(set_mean(prep_a, vals_a, bias) -
                                    set_mean(prep_b, vals_b, bias));
        best = std::max(best, gap);
    }
    return best;
}

// ---------------------------------------------------------------- rate fits

RateReport rate_fit(const std::vector<RatePoint>& points) {
    if (points.size() < 4)
        throw InsufficientDataError("rate fit: need at least 4 points");
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!(points[i].n > 0.0)) throw ArgumentError("rate fit: n must be positive");
        if (points[i].se < 0.0) throw ArgumentError("rate fit: se must be nonnegative");
        if (i > 0 && points[i].n <= points[i - 1].n)
            throw ArgumentError("rate fit: n must be strictly increasing");
    }

    RateReport report;
    report.points = points;
    for (const RatePoint& pt : points) {
        const bool usable = pt.mean > 0.0 && pt.mean > 2.0 * pt.se;
        (usable ? report.used : report.dropped).push_back(pt);
    }
    if (report.used.size() < 3)
        throw InsufficientDataError("rate fit: fewer than 3 points rise above noise");

    const std::size_t m = report.used.size();
    std::vector<double> xs(m), ys(m);
    for (std::size_t i = 0; i < m; ++i) {
        xs[i] = std::log(report.used[i].n);
        ys[i] = std::log(report.used[i].mean);
    }
    const double xbar = pairwise_mean(xs);
    const double ybar = pairwise_mean(ys);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sxx += (xs[i] - xbar) * (xs[i] - xbar);
        sxy += (xs[i] - xbar) * (ys[i] - ybar);
    }
    report.slope = sxy / sxx;
    report.intercept = ybar - report.slope * xbar;
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double fit = report.intercept + report.slope * xs[i];
        ss_res += (ys[i] - fit) * (ys[i] - fit);
        ss_tot += (ys[i] - ybar) * (ys[i] - ybar);
    }
    report.r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
    return report;
}

std::string rate_report_json(const RateReport& report) {
    const auto point_array = [](const std::vector<RatePoint>& pts) {
        auto arr = nlohmann::json::array();
        for (const RatePoint& pt : pts)
            arr.push_back({{"n", pt.n}, {"mean", pt.mean}, {"se", pt.se}});
        return arr;
    };
    nlohmann::json j;
    j["slope"] = report.slope;
    j["intercept"] = report.intercept;
    j["r2"] = report.r2;
    j["points"] = point_array(report.points);
    j["used"] = point_array(report.used);
    j["dropped"] = point_array(report.dropped);
    return j.dump(2);
}

// ------------------------------------------------------ complexity ceilings

ComplexityComparison complexity_comparison(double sigma, int q) {
    if (sigma <= 0.0)
        throw ArgumentError("complexity comparison: sigma must be positive");
    if (q < 1) throw ArgumentError("complexity comparison: q must be >= 1");

    const TiltedPrior joint(GibbsPrior{Potential::poly10, sigma, q + 1});
    const TiltedPrior block_c(GibbsPrior{Potential::poly10, sigma, q});
    const TiltedPrior block_sp(GibbsPrior{Potential::poly10, sigma, 1});

    ComplexityComparison out;
    out.comp_alpha_value = comp_alpha(joint);
    out.comp_ft_value = comp_finetune(sigma, q);

    // Per-coordinate 8th moment: spherical symmetry factorizes E theta_1^8 =
    // E||theta||^8 * E u_1^8 with E u_1^8 = 105 / (d(d+2)(d+4)(d+6)) on the
    // unit sphere in R^d; take the max over the tilted measures involved.
    const auto coord8 = [](const TiltedPrior& tp) {
        const int dim = tp.base.dim;
        double den = 1.0;
        for (int j = 0; j < 4; ++j) den *= static_cast<double>(dim + 2 * j);
        return tilted_moment(tp, 8) * 105.0 / den;
    };
    out.coord8_bound = std::max({coord8(joint), coord8(block_c), coord8(block_sp)});

    const double b = out.coord8_bound;
    const double root_b = std::sqrt(b);
    const double kd = static_cast<double>(q + 1);
    const double kc = static_cast<double>(q);
    const double kd2 = kd * kd;
    const double kc2 = kc * kc;
    const double joint_lin = 1.0 + kd2 * kd2 * b + kd2 * root_b;
    const double split_lin = 1.0 + (kc2 * kc2 + 2.0) * b + 2.0 * (kc2 + 1.0) * root_b;
    out.ceiling_joint = joint_lin * joint_lin;
    out.ceiling_split = split_lin * split_lin;
    return out;
}

}  // namespace mftl
