// mftl: risk functional, KL estimators, the regularized objective, and the
// Gibbs fixed-point residual used to certify trained clouds.
// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <functional>

#include "mftl/measures.hpp"
#include "mftl/mfnet.hpp"
#include "mftl/priors.hpp"
#include "mftl/rng.hpp"

namespace mftl {

/// V^beta(m, nu) = R(m, nu) + (sigma^2 / 2 beta^2) KL(m || gamma^sigma).
struct Objective {
    Activation act = Activation::relu;
    OuterLoss ol = OuterLoss::quadratic;
    GibbsPrior prior;
    double beta = 1.0;

    /// sigma^2 / (2 beta^2), the KL weight; always > 0 for valid configs.
    double reg_weight() const { return prior.sigma * prior.sigma / (2.0 * beta * beta); }
    void validate() const {
        if (!(beta > 0.0)) throw ArgumentError("objective: beta must be > 0");
        if (!(prior.sigma > 0.0)) throw ArgumentError("objective: sigma must be > 0");
    }
};

/// Average loss over the empirical measure.
double risk(const ParticleCloud& cloud, const DataSet& data, Activation act,
            OuterLoss ol);
/// Exact alpha-weighted combination of the per-set risks.
double risk(const ParticleCloud& cloud, const MixedDataView& data, Activation act,
            OuterLoss ol);
/// Product-form (fine-tuned) risk: prediction is predict_product.
double risk(const ParticleCloud& w_cloud, const ParticleCloud& a_cloud,
            const DataSet& data, Activation act, OuterLoss ol);

/// A measure given by an evaluable, normalized log-density plus a sampler;
/// the form KL estimation is defined for.
struct ParametricDensity {
    int dim = 0;
    std::function<double(std::span<const double>)> log_density;
    std::function<ParticleCloud(std::size_t, RngStream)> sampler;
};

struct KlEstimate {
    double value = 0.0;
    double se = 0.0;
};

/// Monte-Carlo estimate of KL(m || gamma^sigma) = E_{theta~m}[log m - log gamma],
/// with the prior's log-normalizer from radial quadrature. mc_count >= 1000.
KlEstimate kl_parametric(const ParametricDensity& m, const GibbsPrior& prior,
                         std::size_t mc_count, RngStream stream);

struct KnnDiagnostic {
    double value = 0.0;
    bool jittered = false;  // duplicate atoms were perturbed by 1e-12
};

/// Kozachenko-Leonenko-style diagnostic for KL(cloud-law || gamma^sigma):
/// negated k-NN entropy estimate plus the exact cross term
/// (1/r) sum_i U(theta_i)/sigma^2 + log F^sigma. An atom cloud has no density,
/// so this is a smoothed diagnostic with no accuracy contract; requires r >= 50.
KnnDiagnostic kl_knn_diagnostic(const ParticleCloud& cloud, const GibbsPrior& prior,
                                int k = 5);

/// risk + reg_weight * KL. Cloud variants use the k-NN diagnostic (flagged
/// diagnostic-quality); the density variant uses kl_parametric with a cloud of
/// mc_count samples drawn from the density for the risk term.
double v_beta(const Objective& obj, const ParticleCloud& cloud, const DataSet& data);
double v_beta(const Objective& obj, const ParticleCloud& cloud,
              const MixedDataView& data);
double v_beta(const Objective& obj, const ParametricDensity& m, const DataSet& data,
              std::size_t mc_count, RngStream stream);

/// Evaluation lattice for the fixed-point residual; axis-aligned, uniform,
/// outer product of per-dimension bins (dim 1 or 2).
struct GridSpec {
    int dim = 1;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{1.0, 1.0};
    std::array<int, 2> bins{1, 1};

    std::size_t cell_count() const {
        return static_cast<std::size_t>(bins[0]) * (dim == 2 ? bins[1] : 1);
    }
    /// Bounding box of the cloud padded by pad_frac of the range per side.
    static GridSpec cover(const ParticleCloud& cloud, int bins_per_dim,
                          double pad_frac = 0.05);
};

/// Total-variation distance between the cloud's histogram on `grid` and the
/// normalized self-consistent Gibbs density
///   p(theta) proportional to exp{-(2 beta^2/sigma^2) avg_z dR/dm(cloud,z,theta)
///                                - U(theta)/sigma^2}
/// evaluated at cell centers. `offset` adds a constant to dR/dm before
/// normalization (it must cancel; exposed for the invariance check).
/// Parameter dimension must be <= 2; the grid must cover >= 99.9% of atoms.
double gibbs_residual(const ParticleCloud& cloud, const DataSet& data,
                      const Objective& obj, const GridSpec& grid, double offset = 0.0);

}  // namespace mftl
