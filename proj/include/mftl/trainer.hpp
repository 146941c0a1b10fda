// mftl: mean-field Langevin dynamics over particle clouds and the three
// training scenarios built on it (supervised, alpha-ERM, two-stage fine-tune).
// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "mftl/objective.hpp"

namespace mftl {

enum class Scenario { supervised, alpha_erm, finetune };
enum class BatchMode { full, minibatch };

const char* scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

struct TrainConfig {
    Scenario scenario = Scenario::supervised;
    Activation act = Activation::relu;         // model family, used by the
    OuterLoss ol = OuterLoss::quadratic;       // orchestration layers; the
    Potential potential = Potential::poly10;   // train_* drivers take them
                                               // explicitly
    double alpha = 1.0;     // alpha_erm only
    double beta = 1.0;      // supervised / alpha_erm temperature
    double beta_s = 1.0;    // fine-tune stage-1 temperature
    double beta_t = 1.0;    // fine-tune stage-2 temperature
    double sigma = 1.0;     // prior scale (overrides the prior argument's sigma)
    std::size_t particles = 256;
    std::size_t steps = 1000;     // per stage for fine-tuning
    double step_size = 0.05;
    BatchMode batch = BatchMode::full;
    std::size_t batch_size = 32;  // minibatch mode only
    std::uint64_t seed = 0;
    int threads = 1;              // speed only; never changes results

    void validate() const;
};

/// One risk-trace row. In full-batch mode rows are per step and reuse the
/// step's own predictions (no extra passes); in minibatch mode the full risk
/// is sampled every 10 steps.
struct TracePoint {
    std::size_t step = 0;
    double train_risk = 0.0;
    double drift_norm = 0.0;   // sqrt(mean_i ||drift_i||^2) of the step ending here
    double noise_scale = 0.0;  // (sigma/beta) sqrt(eta)
};

struct TrainedModel {
    Scenario scenario = Scenario::supervised;
    Activation act = Activation::relu;
    OuterLoss ol = OuterLoss::quadratic;
    TrainConfig config;

    ParticleCloud cloud;    // joint (a,w) cloud: final for supervised/alpha_erm,
                            // the stage-1 result for finetune
    ParticleCloud w_cloud;  // finetune only: frozen hidden weights (dim q)
    ParticleCloud a_cloud;  // finetune only: fine-tuned outer weights (dim 1)

    std::vector<TracePoint> trace;         // training risk (stage 2 for finetune)
    std::vector<TracePoint> trace_stage1;  // finetune stage-1 source risk

    /// Prediction dispatches on scenario: joint clouds use predict, the
    /// fine-tuned pair uses predict_product.
    double predict_y(std::span<const double> x) const;
    /// Average loss of this model's predictions over a dataset.
    double risk_on(const DataSet& data) const;
};

/// Drift of the data term on one atom: avg_{z~data} of the flat-derivative
/// gradient at theta (prior term excluded). The MixedDataView overload is the
/// exact alpha-combination per coordinate, so drift(nu_alpha) =
/// alpha*drift(nu_t) + (1-alpha)*drift(nu_s) bitwise.
void drift_at(const ParticleCloud& cloud, const DataSet& data, Activation act,
              OuterLoss ol, std::span<const double> theta, std::span<double> out);
void drift_at(const ParticleCloud& cloud, const MixedDataView& data, Activation act,
              OuterLoss ol, std::span<const double> theta, std::span<double> out);

/// One Euler-Maruyama step, in place:
///   theta_i <- theta_i - eta*[drift_at(theta_i) + grad U(theta_i)/(2 beta^2)]
///              + (sigma/beta) sqrt(eta) xi_i,
/// xi_i standard normal from SubRng(noise, step, i). Throws DivergedError when
/// any coordinate magnitude exceeds 1e8. Returns sqrt(mean_i ||drift_i||^2)
/// including the prior term (the traced drift norm).
double langevin_step(ParticleCloud& cloud, const DataSet& data, const Objective& obj,
                     double eta, RngStream noise, std::uint32_t step, int threads = 1);
double langevin_step(ParticleCloud& cloud, const MixedDataView& data,
                     const Objective& obj, double eta, RngStream noise,
                     std::uint32_t step, int threads = 1);

/// Fine-tune stage-2 step on the 1-D outer-weight cloud, hidden weights frozen:
///   a_i <- a_i - eta*[avg_z dl(Y'_z, y_z)*meanphi_z + U_sp'(a_i)/(2 beta^2)]
///          + (sigma/beta) sqrt(eta) xi_i,
/// Y'_z the product-form prediction and meanphi_z = mean_i phi(w_i . x_z).
double langevin_step_sp(ParticleCloud& a_cloud, const ParticleCloud& w_cloud,
                        const DataSet& data, const Objective& obj, double eta,
                        RngStream noise, std::uint32_t step, int threads = 1);

/// Scenario drivers. The prior argument supplies the potential family; its
/// sigma/dim are replaced by cfg.sigma and the data dimension.
TrainedModel train_supervised(const DataSet& data_t, const TrainConfig& cfg,
                              Activation act, OuterLoss ol, const GibbsPrior& prior);
TrainedModel train_alpha_erm(const DataSet& data_t, const DataSet& data_s,
                             const TrainConfig& cfg, Activation act, OuterLoss ol,
                             const GibbsPrior& prior);
TrainedModel train_finetune(const DataSet& data_t, const DataSet& data_s,
                            const TrainConfig& cfg, Activation act, OuterLoss ol,
                            const GibbsPrior& prior);

/// TrainConfig JSON round-trip (used by model persistence and the harness).
nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Risk-trace CSV: header then one row per TracePoint, 17-digit doubles.
void save_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace);

/// Model persistence: JSON-lines with a scenario header followed by the
/// cloud(s) in the measures-module format.
void save_model(std::ostream& out, const TrainedModel& model);
TrainedModel load_model(std::istream& in);
void save_model_file(const std::string& path, const TrainedModel& model);
TrainedModel load_model_file(const std::string& path);

}  // namespace mftl
