// mftl: trainer-module implementation.
// SPDX-License-Identifier: MIT
#include "mftl/trainer.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace mftl {

namespace {

constexpr double kDivergenceGuard = 1e8;
constexpr std::size_t kMinibatchTraceEvery = 10;

/// Per-sample prediction caches for the current cloud.
struct PhiCache {
    std::vector<double> dl;     // d/dyhat loss at (Phi(m, x_z), y_z)
    std::vector<double> lossv;  // loss at (Phi(m, x_z), y_z)
};

void fill_cache(const ParticleCloud& cloud, const DataSet& data, Activation act,
                OuterLoss ol, PhiCache& c) {
    const std::size_t n = data.n();
    c.dl.resize(n);
    c.lossv.resize(n);
    for (std::size_t z = 0; z < n; ++z) {
        const double phi = predict(cloud, data.x(z), act);
        c.dl[z] = loss_d1(ol, phi, data.ys[z]);
        c.lossv[z] = loss_eval(ol, phi, data.ys[z]);
    }
}

double cache_risk(const PhiCache& c) { return pairwise_mean(c.lossv); }

/// Data-term drift at theta given the per-sample dl cache. Arithmetic matches
/// the data-average of flat_derivative_grad term by term (same expressions,
/// same pairwise reduction), so drift_at and the step agree bitwise.
void data_drift(const DataSet& data, const std::vector<double>& dl,
                std::span<const double> theta, Activation act, std::span<double> out,
                std::vector<double>& s_buf, std::vector<double>& t_buf,
                std::vector<double>& v_buf) {
    const std::size_t n = data.n();
    const int q = data.q;
    s_buf.resize(n);
    t_buf.resize(n);
    v_buf.resize(n);
    for (std::size_t z = 0; z < n; ++z) {
        const double u = dot(theta.subspan(1), data.x(z));
        s_buf[z] = dl[z] * act_eval(act, u);
        t_buf[z] = dl[z] * theta[0] * act_deriv(act, u);
    }
    out[0] = pairwise_mean(s_buf);
    for (int j = 0; j < q; ++j) {
        for (std::size_t z = 0; z < n; ++z)
            v_buf[z] = t_buf[z] * data.xs[z * static_cast<std::size_t>(q) + j];
        out[j + 1] = pairwise_mean(v_buf);
    }
}

struct StepOut {
    double drift_norm = 0.0;
    double pre_risk = 0.0;  // training risk of the cloud the step started from
};

void check_guard(std::span<const double> theta, std::uint32_t step) {
    for (double c : theta)
        if (!(std::abs(c) <= kDivergenceGuard))
            throw DivergedError(static_cast<long>(step), 0,
                                "training diverged: particle coordinate exceeded 1e8 "
                                "at step " + std::to_string(step));
}

StepOut step_joint(ParticleCloud& cloud, const DataSet& data, const Objective& obj,
                   double eta, RngStream noise, std::uint32_t step, int threads) {
    obj.validate();
    if (cloud.dim != data.q + 1)
        throw ArgumentError("langevin_step: cloud dim must equal input dim + 1");
    if (!(eta >= 0.0)) throw ArgumentError("langevin_step: step size must be >= 0");

    PhiCache c;
    fill_cache(cloud, data, obj.act, obj.ol, c);
    const double prior_w = 1.0 / (2.0 * obj.beta * obj.beta);
    const double nscale = obj.prior.sigma / obj.beta * std::sqrt(eta);
    const std::size_t r = cloud.r();
    const int d = cloud.dim;
    std::vector<double> drift_sq(r);

    parallel_for(r, threads, [&](std::size_t i) {
        static thread_local std::vector<double> s_buf, t_buf, v_buf, drift, pgrad, xi;
        drift.resize(d);
        pgrad.resize(d);
        xi.resize(d);
        auto theta = cloud.atom(i);
        data_drift(data, c.dl, theta, obj.act, drift, s_buf, t_buf, v_buf);
        potential_grad(obj.prior, theta, pgrad);
        for (int j = 0; j < d; ++j) drift[j] += prior_w * pgrad[j];
        drift_sq[i] = squared_norm(drift);
        if (nscale != 0.0) {
            SubRng sub(noise, step, static_cast<std::uint32_t>(i));
            sub.normals(xi.data(), d);
            for (int j = 0; j < d; ++j) theta[j] += -eta * drift[j] + nscale * xi[j];
        } else {
            for (int j = 0; j < d; ++j) theta[j] -= eta * drift[j];
        }
        check_guard(theta, step);
    });
    return {std::sqrt(pairwise_mean(drift_sq)), cache_risk(c)};
}

StepOut step_mixed(ParticleCloud& cloud, const MixedDataView& view,
                   const Objective& obj, double eta, RngStream noise,
                   std::uint32_t step, int threads) {
    if (view.alpha == 1.0)
        return step_joint(cloud, *view.target, obj, eta, noise, step, threads);
    if (view.alpha == 0.0)
        return step_joint(cloud, *view.source, obj, eta, noise, step, threads);
    obj.validate();
    if (cloud.dim != view.target->q + 1)
        throw ArgumentError("langevin_step: cloud dim must equal input dim + 1");
    if (!(eta >= 0.0)) throw ArgumentError("langevin_step: step size must be >= 0");

    PhiCache ct, cs;
    fill_cache(cloud, *view.target, obj.act, obj.ol, ct);
    fill_cache(cloud, *view.source, obj.act, obj.ol, cs);
    const double alpha = view.alpha;
    const double prior_w = 1.0 / (2.0 * obj.beta * obj.beta);
    const double nscale = obj.prior.sigma / obj.beta * std::sqrt(eta);
    const std::size_t r = cloud.r();
    const int d = cloud.dim;
    std::vector<double> drift_sq(r);

    parallel_for(r, threads, [&](std::size_t i) {
        static thread_local std::vector<double> s_buf, t_buf, v_buf, dt, ds_, drift,
            pgrad, xi;
        dt.resize(d);
        ds_.resize(d);
        drift.resize(d);
        pgrad.resize(d);
        xi.resize(d);
        auto theta = cloud.atom(i);
        data_drift(*view.target, ct.dl, theta, obj.act, dt, s_buf, t_buf, v_buf);
        data_drift(*view.source, cs.dl, theta, obj.act, ds_, s_buf, t_buf, v_buf);
        potential_grad(obj.prior, theta, pgrad);
        for (int j = 0; j < d; ++j)
            drift[j] = alpha * dt[j] + (1.0 - alpha) * ds_[j] + prior_w * pgrad[j];
        drift_sq[i] = squared_norm(drift);
        if (nscale != 0.0) {
            SubRng sub(noise, step, static_cast<std::uint32_t>(i));
            sub.normals(xi.data(), d);
            for (int j = 0; j < d; ++j) theta[j] += -eta * drift[j] + nscale * xi[j];
        } else {
            for (int j = 0; j < d; ++j) theta[j] -= eta * drift[j];
        }
        check_guard(theta, step);
    });
    const double risk_mix = alpha * cache_risk(ct) + (1.0 - alpha) * cache_risk(cs);
    return {std::sqrt(pairwise_mean(drift_sq)), risk_mix};
}

/// mean_i phi(w_i . x_z) per sample, same summation order as predict_product.
std::vector<double> mean_phi_features(const ParticleCloud& w_cloud, const DataSet& data,
                                      Activation act) {
    std::vector<double> meanphi(data.n());
    for (std::size_t z = 0; z < data.n(); ++z) {
        double s = 0.0;
        for (std::size_t i = 0; i < w_cloud.r(); ++i)
            s += act_eval(act, dot(w_cloud.atom(i), data.x(z)));
        meanphi[z] = s / static_cast<double>(w_cloud.r());
    }
    return meanphi;
}

StepOut step_sp(ParticleCloud& a_cloud, const ParticleCloud& w_cloud,
                const DataSet& data, const Objective& obj, double eta, RngStream noise,
                std::uint32_t step, int threads, const std::vector<double>& meanphi) {
    obj.validate();
    if (a_cloud.dim != 1)
        throw ArgumentError("langevin_step_sp: a-cloud must be one-dimensional");
    if (w_cloud.dim != data.q)
        throw ArgumentError("langevin_step_sp: w-cloud dim must equal input dim");
    if (!(eta >= 0.0)) throw ArgumentError("langevin_step_sp: step size must be >= 0");
    if (obj.prior.dim != 1)
        throw ArgumentError("langevin_step_sp: prior must be one-dimensional");

    const std::size_t n = data.n();
    const std::size_t r = a_cloud.r();
    // a-mean with predict_product's summation order, so Y' matches it bitwise.
    double a_mean = 0.0;
    for (std::size_t j = 0; j < r; ++j) a_mean += a_cloud.data[j];
    a_mean /= static_cast<double>(r);

    std::vector<double> dl(n), lossv(n), gvals(n);
    for (std::size_t z = 0; z < n; ++z) {
        const double yprime = meanphi[z] * a_mean;
        dl[z] = loss_d1(obj.ol, yprime, data.ys[z]);
        lossv[z] = loss_eval(obj.ol, yprime, data.ys[z]);
        gvals[z] = dl[z] * meanphi[z];
    }
    // The data drift is atom-independent: d/da of the flat derivative.
    const double gdata = pairwise_mean(gvals);
    const double prior_w = 1.0 / (2.0 * obj.beta * obj.beta);
    const double nscale = obj.prior.sigma / obj.beta * std::sqrt(eta);
    std::vector<double> drift_sq(r);

    parallel_for(r, threads, [&](std::size_t i) {
        double a = a_cloud.data[i];
        const double pg = std::copysign(
            potential_radial_deriv(obj.prior.pot, std::abs(a)), a);
        const double drift = gdata + prior_w * pg;
        drift_sq[i] = drift * drift;
        a -= eta * drift;
        if (nscale != 0.0) {
            SubRng sub(noise, step, static_cast<std::uint32_t>(i));
            a += nscale * sub.normal();
        }
        if (!(std::abs(a) <= kDivergenceGuard))
            throw DivergedError(static_cast<long>(step), 0,
                                "training diverged: outer weight exceeded 1e8 at step " +
                                    std::to_string(step));
        a_cloud.data[i] = a;
    });
    return {std::sqrt(pairwise_mean(drift_sq)), pairwise_mean(lossv)};
}

/// Deterministic minibatch: `size` draws with replacement from one set.
DataSet make_batch(const DataSet& data, std::size_t size, RngStream mb,
                   std::uint32_t step) {
    SubRng sub(mb, step, 0);
    DataSet batch;
    batch.q = data.q;
    for (std::size_t k = 0; k < size; ++k) {
        const std::size_t idx = sub.next_u64() % data.n();
        batch.push_back(data.x(idx), data.ys[idx]);
    }
    return batch;
}

/// Minibatch for the mixture: each draw picks the target set with probability
/// alpha, then a uniform sample within the chosen set (extra variance relative
/// to the exact full-batch mixture; documented trade-off).
DataSet make_batch_mixed(const DataSet& target, const DataSet& source, double alpha,
                         std::size_t size, RngStream mb, std::uint32_t step) {
    SubRng sub(mb, step, 0);
    DataSet batch;
    batch.q = target.q;
    for (std::size_t k = 0; k < size; ++k) {
        const DataSet& pick = sub.uniform() <= alpha ? target : source;
        const std::size_t idx = sub.next_u64() % pick.n();
        batch.push_back(pick.x(idx), pick.ys[idx]);
    }
    return batch;
}

/// Shared driver for the joint-cloud scenarios on a fixed data view.
template <typename StepFn, typename RiskFn>
std::vector<TracePoint> run_steps(std::size_t steps, double nscale, StepFn&& do_step,
                                  RiskFn&& full_risk, bool per_step_trace) {
    std::vector<TracePoint> trace;
    trace.reserve(steps + 1);
    for (std::size_t s = 0; s < steps; ++s) {
        const StepOut o = do_step(static_cast<std::uint32_t>(s));
        if (per_step_trace || s % kMinibatchTraceEvery == 0)
            trace.push_back({s, o.pre_risk, o.drift_norm, nscale});
    }
    trace.push_back({steps, full_risk(), 0.0, 0.0});
    return trace;
}

TrainedModel train_joint_core(Scenario scenario, const DataSet& data_t,
                              const DataSet* data_s, const TrainConfig& cfg,
                              Activation act, OuterLoss ol, const GibbsPrior& prior) {
    cfg.validate();
    data_t.validate();
    if (data_s) data_s->validate();
    const GibbsPrior p{prior.pot, cfg.sigma, data_t.q + 1};
    const Objective obj{act, ol, p, cfg.beta};
    const RngStream noise{cfg.seed, StreamTag::langevin_noise};
    const RngStream mb{cfg.seed, StreamTag::minibatch};
    const double nscale = cfg.sigma / cfg.beta * std::sqrt(cfg.step_size);

    TrainedModel model;
    model.scenario = scenario;
    model.act = act;
    model.ol = ol;
    model.config = cfg;
    model.cloud = sample(p, cfg.particles, {cfg.seed, StreamTag::prior_sample});

    const bool full = cfg.batch == BatchMode::full;
    if (!data_s) {
        auto do_step = [&](std::uint32_t s) {
            if (full)
                return step_joint(model.cloud, data_t, obj, cfg.step_size, noise, s,
                                  cfg.threads);
            const DataSet batch = make_batch(data_t, cfg.batch_size, mb, s);
            return step_joint(model.cloud, batch, obj, cfg.step_size, noise, s,
                              cfg.threads);
        };
        model.trace = run_steps(cfg.steps, nscale, do_step,
                                [&] { return risk(model.cloud, data_t, act, ol); },
                                full);
    } else {
        const MixedDataView view(data_t, *data_s, cfg.alpha);
        auto do_step = [&](std::uint32_t s) {
            if (full)
                return step_mixed(model.cloud, view, obj, cfg.step_size, noise, s,
                                  cfg.threads);
            const DataSet batch =
                make_batch_mixed(data_t, *data_s, cfg.alpha, cfg.batch_size, mb, s);
            return step_joint(model.cloud, batch, obj, cfg.step_size, noise, s,
                              cfg.threads);
        };
        model.trace = run_steps(cfg.steps, nscale, do_step,
                                [&] { return risk(model.cloud, view, act, ol); }, full);
    }
    return model;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(sigma > 0.0)) throw ConfigError("sigma", "must be > 0");
    if (particles < 1) throw ConfigError("particles", "must be >= 1");
    if (!(step_size >= 0.0)) throw ConfigError("step_size", "must be >= 0");
    if (threads < 1) throw ConfigError("threads", "must be >= 1");
    if (batch == BatchMode::minibatch && batch_size < 1)
        throw ConfigError("batch_size", "must be >= 1 in minibatch mode");
    switch (scenario) {
        case Scenario::supervised:
            if (!(beta > 0.0)) throw ConfigError("beta", "must be > 0");
            break;
        case Scenario::alpha_erm:
            if (!(beta > 0.0)) throw ConfigError("beta", "must be > 0");
            if (!(alpha >= 0.0 && alpha <= 1.0))
                throw ConfigError("alpha", "must be in [0,1]");
            break;
        case Scenario::finetune:
            if (!(beta_s > 0.0)) throw ConfigError("beta_s", "must be > 0");
            if (!(beta_t > 0.0)) throw ConfigError("beta_t", "must be > 0");
            break;
    }
}

const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::supervised: return "supervised";
        case Scenario::alpha_erm: return "alpha_erm";
        case Scenario::finetune: return "finetune";
    }
    return "?";
}

Scenario scenario_from_name(const std::string& name) {
    if (name == "supervised") return Scenario::supervised;
    if (name == "alpha_erm") return Scenario::alpha_erm;
    if (name == "finetune") return Scenario::finetune;
    throw ConfigError("scenario", "unknown scenario '" + name + "'");
}

double TrainedModel::predict_y(std::span<const double> x) const {
    if (scenario == Scenario::finetune) return predict_product(w_cloud, a_cloud, x, act);
    return predict(cloud, x, act);
}

double TrainedModel::risk_on(const DataSet& data) const {
    if (scenario == Scenario::finetune) return risk(w_cloud, a_cloud, data, act, ol);
    return risk(cloud, data, act, ol);
}

void drift_at(const ParticleCloud& cloud, const DataSet& data, Activation act,
              OuterLoss ol, std::span<const double> theta, std::span<double> out) {
    if (static_cast<int>(theta.size()) != cloud.dim || out.size() != theta.size())
        throw ArgumentError("drift_at: dimension mismatch");
    if (cloud.dim != data.q + 1)
        throw ArgumentError("drift_at: cloud dim must equal input dim + 1");
    PhiCache c;
    fill_cache(cloud, data, act, ol, c);
    static thread_local std::vector<double> s_buf, t_buf, v_buf;
    data_drift(data, c.dl, theta, act, out, s_buf, t_buf, v_buf);
}

void drift_at(const ParticleCloud& cloud, const MixedDataView& data, Activation act,
              OuterLoss ol, std::span<const double> theta, std::span<double> out) {
    if (data.alpha == 1.0) return drift_at(cloud, *data.target, act, ol, theta, out);
    if (data.alpha == 0.0) return drift_at(cloud, *data.source, act, ol, theta, out);
    std::vector<double> dt(theta.size()), ds_(theta.size());
    drift_at(cloud, *data.target, act, ol, theta, dt);
    drift_at(cloud, *data.source, act, ol, theta, ds_);
    for (std::size_t j = 0; j < theta.size(); ++j)
        out[j] = data.alpha * dt[j] + (1.0 - data.alpha) * ds_[j];
}

double langevin_step(ParticleCloud& cloud, const DataSet& data, const Objective& obj,
                     double eta, RngStream noise, std::uint32_t step, int threads) {
    return step_joint(cloud, data, obj, eta, noise, step, threads).drift_norm;
}

double langevin_step(ParticleCloud& cloud, const MixedDataView& data,
                     const Objective& obj, double eta, RngStream noise,
                     std::uint32_t step, int threads) {
    return step_mixed(cloud, data, obj, eta, noise, step, threads).drift_norm;
}

double langevin_step_sp(ParticleCloud& a_cloud, const ParticleCloud& w_cloud,
                        const DataSet& data, const Objective& obj, double eta,
                        RngStream noise, std::uint32_t step, int threads) {
    const std::vector<double> meanphi = mean_phi_features(w_cloud, data, obj.act);
    return step_sp(a_cloud, w_cloud, data, obj, eta, noise, step, threads, meanphi)
        .drift_norm;
}

TrainedModel train_supervised(const DataSet& data_t, const TrainConfig& cfg,
                              Activation act, OuterLoss ol, const GibbsPrior& prior) {
    return train_joint_core(Scenario::supervised, data_t, nullptr, cfg, act, ol, prior);
}

TrainedModel train_alpha_erm(const DataSet& data_t, const DataSet& data_s,
                             const TrainConfig& cfg, Activation act, OuterLoss ol,
                             const GibbsPrior& prior) {
    cfg.validate();
    // The boundary alphas reduce to single-set training; routing them through
    // the supervised driver keeps the trajectories bitwise equal.
    if (cfg.alpha == 1.0) {
        TrainedModel m =
            train_joint_core(Scenario::alpha_erm, data_t, nullptr, cfg, act, ol, prior);
        return m;
    }
    if (cfg.alpha == 0.0) {
        TrainedModel m =
            train_joint_core(Scenario::alpha_erm, data_s, nullptr, cfg, act, ol, prior);
        return m;
    }
    return train_joint_core(Scenario::alpha_erm, data_t, &data_s, cfg, act, ol, prior);
}

TrainedModel train_finetune(const DataSet& data_t, const DataSet& data_s,
                            const TrainConfig& cfg, Activation act, OuterLoss ol,
                            const GibbsPrior& prior) {
    cfg.validate();
    data_t.validate();
    data_s.validate();
    if (data_t.q != data_s.q)
        throw ArgumentError("train_finetune: source/target input dim mismatch");

    // Stage 1: joint training on the source task at temperature beta_s.
    TrainConfig cfg1 = cfg;
    cfg1.scenario = Scenario::supervised;
    cfg1.beta = cfg.beta_s;
    TrainedModel model;
    try {
        model = train_joint_core(Scenario::finetune, data_s, nullptr, cfg1, act, ol,
                                 prior);
    } catch (const DivergedError& e) {
        throw DivergedError(e.step, 1, std::string(e.what()) + " (fine-tune stage 1)");
    }
    model.config = cfg;
    model.trace_stage1 = std::move(model.trace);
    model.trace.clear();

    // Freeze the hidden weights.
    const std::size_t r = model.cloud.r();
    const int q = data_t.q;
    model.w_cloud.dim = q;
    model.w_cloud.data.resize(r * static_cast<std::size_t>(q));
    for (std::size_t i = 0; i < r; ++i) {
        const auto atom = model.cloud.atom(i);
        for (int j = 0; j < q; ++j) model.w_cloud.atom(i)[j] = atom[j + 1];
    }

    // Stage 2: fresh outer-weight cloud from the prior's a-marginal (sample the
    // joint prior, project the outer coordinate), trained at beta_t against the
    // one-dimensional potential.
    const GibbsPrior p_joint{prior.pot, cfg.sigma, q + 1};
    const ParticleCloud init = sample(p_joint, r, {cfg.seed, StreamTag::stage2_init});
    model.a_cloud.dim = 1;
    model.a_cloud.data.resize(r);
    for (std::size_t i = 0; i < r; ++i) model.a_cloud.data[i] = init.atom(i)[0];

    const GibbsPrior p_sp{prior.pot, cfg.sigma, 1};
    const Objective obj2{act, ol, p_sp, cfg.beta_t};
    const RngStream noise2{derive_seed(cfg.seed, 2, 0, 0), StreamTag::langevin_noise};
    const RngStream mb{derive_seed(cfg.seed, 2, 0, 0), StreamTag::minibatch};
    const double nscale = cfg.sigma / cfg.beta_t * std::sqrt(cfg.step_size);
    const bool full = cfg.batch == BatchMode::full;
    const std::vector<double> meanphi_full =
        full ? mean_phi_features(model.w_cloud, data_t, act) : std::vector<double>{};

    auto do_step = [&](std::uint32_t s) {
        if (full)
            return step_sp(model.a_cloud, model.w_cloud, data_t, obj2, cfg.step_size,
                           noise2, s, cfg.threads, meanphi_full);
        const DataSet batch = make_batch(data_t, cfg.batch_size, mb, s);
        return step_sp(model.a_cloud, model.w_cloud, batch, obj2, cfg.step_size, noise2,
                       s, cfg.threads, mean_phi_features(model.w_cloud, batch, act));
    };
    try {
        model.trace = run_steps(
            cfg.steps, nscale, do_step,
            [&] { return risk(model.w_cloud, model.a_cloud, data_t, act, ol); }, full);
    } catch (const DivergedError& e) {
        throw DivergedError(e.step, 2, std::string(e.what()) + " (fine-tune stage 2)");
    }
    return model;
}

void save_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace) {
    out << "step,train_risk,drift_norm,noise_scale\n";
    for (const TracePoint& t : trace)
        out << t.step << ',' << format_g17(t.train_risk) << ','
            << format_g17(t.drift_norm) << ',' << format_g17(t.noise_scale) << '\n';
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    return {{"scenario", scenario_name(cfg.scenario)},
            {"act", activation_name(cfg.act)},
            {"ol", outer_loss_name(cfg.ol)},
            {"potential", potential_name(cfg.potential)},
            {"alpha", cfg.alpha},
            {"beta", cfg.beta},
            {"beta_s", cfg.beta_s},
            {"beta_t", cfg.beta_t},
            {"sigma", cfg.sigma},
            {"particles", cfg.particles},
            {"steps", cfg.steps},
            {"step_size", cfg.step_size},
            {"batch", cfg.batch == BatchMode::full ? "full" : "minibatch"},
            {"batch_size", cfg.batch_size},
            {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.scenario = scenario_from_name(j.at("scenario").get<std::string>());
    cfg.act = activation_from_name(j.at("act").get<std::string>());
    cfg.ol = outer_loss_from_name(j.at("ol").get<std::string>());
    cfg.potential = potential_from_name(j.at("potential").get<std::string>());
    cfg.alpha = j.at("alpha").get<double>();
    cfg.beta = j.at("beta").get<double>();
    cfg.beta_s = j.at("beta_s").get<double>();
    cfg.beta_t = j.at("beta_t").get<double>();
    cfg.sigma = j.at("sigma").get<double>();
    cfg.particles = j.at("particles").get<std::size_t>();
    cfg.steps = j.at("steps").get<std::size_t>();
    cfg.step_size = j.at("step_size").get<double>();
    cfg.batch = j.at("batch").get<std::string>() == "minibatch" ? BatchMode::minibatch
                                                                : BatchMode::full;
    cfg.batch_size = j.at("batch_size").get<std::size_t>();
    cfg.seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>() : 0;
    // Threads affect speed only, never results, so they are an execution knob:
    // accepted here for convenience, never echoed back by train_config_to_json
    // (embedded configs must not depend on the worker count).
    cfg.threads = j.contains("threads") ? j.at("threads").get<int>() : 1;
    return cfg;
}

void save_model(std::ostream& out, const TrainedModel& model) {
    nlohmann::json header = {{"kind", "model"},
                             {"scenario", scenario_name(model.scenario)},
                             {"act", activation_name(model.act)},
                             {"ol", outer_loss_name(model.ol)},
                             {"config", train_config_to_json(model.config)}};
    out << header.dump() << '\n';
    if (model.scenario == Scenario::finetune) {
        save_cloud(out, model.cloud);
        save_cloud(out, model.w_cloud);
        save_cloud(out, model.a_cloud);
    } else {
        save_cloud(out, model.cloud);
    }
}

TrainedModel load_model(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ArgumentError("load_model: empty input");
    const nlohmann::json header = nlohmann::json::parse(line);
    if (header.at("kind").get<std::string>() != "model")
        throw ArgumentError("load_model: not a model file");
    TrainedModel model;
    model.scenario = scenario_from_name(header.at("scenario").get<std::string>());
    model.act = activation_from_name(header.at("act").get<std::string>());
    model.ol = outer_loss_from_name(header.at("ol").get<std::string>());
    model.config = train_config_from_json(header.at("config"));
    model.cloud = load_cloud(in);
    if (model.scenario == Scenario::finetune) {
        model.w_cloud = load_cloud(in);
        model.a_cloud = load_cloud(in);
    }
    return model;
}

void save_model_file(const std::string& path, const TrainedModel& model) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("save_model_file: cannot open " + path);
    save_model(out, model);
}

TrainedModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("load_model_file: cannot open " + path);
    return load_model(in);
}

}  // namespace mftl
