// mftl: the one-hidden-layer mean-field network. A parameter vector is
// theta = (a, w) with the outer weight a at coordinate 0 and the hidden
// weight w at coordinates 1..q (so cloud dim d = q + 1); the network output
// is the cloud average Phi(m, x) = (1/r) sum_i a_i phi(w_i . x).
// SPDX-License-Identifier: MIT
#pragma once

#include <span>

#include "mftl/common.hpp"
#include "mftl/measures.hpp"

namespace mftl {

enum class Activation { relu, tanh, sigmoid, heaviside };
enum class OuterLoss { quadratic, logcosh };

/// Growth constants of the outer loss: |l_o| <= L_l (1 + yhat^2 + y^2),
/// |dl_o| <= L_l1 (1 + |yhat| + |y|), |d2l_o| <= L_l2.
struct LossConstants {
    double L_l;
    double L_l1;
    double L_l2;
};

double act_eval(Activation act, double u);

/// Pointwise derivative; relu'(0) is fixed to 0. Throws UnsupportedError for
/// heaviside (zero a.e.; heaviside is a sampling-only activation).
double act_deriv(Activation act, double u);

double loss_eval(OuterLoss ol, double yhat, double y);
double loss_d1(OuterLoss ol, double yhat, double y);
double loss_d2(OuterLoss ol, double yhat, double y);
LossConstants loss_constants(OuterLoss ol);

/// Single-neuron feature phi(theta, x) = a * phi(w . x).
double neuron(std::span<const double> theta, std::span<const double> x, Activation act);

/// Network output Phi(m, x) = (1/r) sum_i a_i phi(w_i . x).
double predict(const ParticleCloud& cloud, std::span<const double> x, Activation act);

/// Single-observation loss l(m, z) = l_o(Phi(m, x), y).
double loss(const ParticleCloud& cloud, std::span<const double> x, double y,
            Activation act, OuterLoss ol);

/// Flat (linear functional) derivative of the loss in m, normalized to
/// integrate to zero against m:
///   (dl/dm)(m, z, theta) = dl_o(Phi(m,x), y) * (phi(theta, x) - Phi(m, x)).
double flat_derivative(const ParticleCloud& cloud, std::span<const double> x, double y,
                       std::span<const double> theta, Activation act, OuterLoss ol);

/// Parameter gradient of the flat derivative (the Langevin drift kernel):
///   dl_o(Phi, y) * (phi(w.x), a phi'(w.x) x).
/// Writes into `out` (size d). Throws UnsupportedError for heaviside.
void flat_derivative_grad(const ParticleCloud& cloud, std::span<const double> x, double y,
                          std::span<const double> theta, Activation act, OuterLoss ol,
                          std::span<double> out);

/// Fine-tuning product prediction
///   Y' = (1/r_c sum_i phi(w_i . x)) * (1/r_sp sum_j a_j),
/// with w_cloud over R^q and a_cloud over R^1.
double predict_product(const ParticleCloud& w_cloud, const ParticleCloud& a_cloud,
                       std::span<const double> x, Activation act);

/// Flat derivative of the product-form loss in m_sp at outer weight `a`:
///   dl_o(Y', y) * (a - mean(a_cloud)) * mean_i phi(w_i . x);
/// integrates to zero against a_cloud.
double flat_derivative_sp(const ParticleCloud& w_cloud, const ParticleCloud& a_cloud,
                          std::span<const double> x, double y, double a, Activation act,
                          OuterLoss ol);

const char* activation_name(Activation act);
const char* outer_loss_name(OuterLoss ol);
Activation activation_from_name(const std::string& name);
OuterLoss outer_loss_from_name(const std::string& name);

}  // namespace mftl
