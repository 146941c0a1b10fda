// mftl: the one-hidden-layer mean-field network.
// SPDX-License-Identifier: MIT
#include "mftl/mfnet.hpp"

#include <cmath>

namespace mftl {

double act_eval(Activation act, double u) {
    switch (act) {
        case Activation::relu: return u > 0.0 ? u : 0.0;
        case Activation::tanh: return std::tanh(u);
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-u));
        case Activation::heaviside: return u >= 0.0 ? 1.0 : 0.0;
    }
    throw ArgumentError("act_eval: unknown activation");
}

double act_deriv(Activation act, double u) {
    switch (act) {
        case Activation::relu: return u > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: {
            const double t = std::tanh(u);
            return 1.0 - t * t;
        }
        case Activation::sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-u));
            return s * (1.0 - s);
        }
        case Activation::heaviside:
            throw UnsupportedError(
                "heaviside has zero gradient a.e.; it is a sampling-only activation "
                "and cannot be trained");
    }
    throw ArgumentError("act_deriv: unknown activation");
}

double loss_eval(OuterLoss ol, double yhat, double y) {
    const double e = yhat - y;
    switch (ol) {
        case OuterLoss::quadratic: return e * e;
        case OuterLoss::logcosh:
            // log(cosh(e)) = |e| + log1p(exp(-2|e|)) - log 2, stable for large |e|.
            return std::abs(e) + std::log1p(std::exp(-2.0 * std::abs(e))) - M_LN2;
    }
    throw ArgumentError("loss_eval: unknown loss");
}

double loss_d1(OuterLoss ol, double yhat, double y) {
    const double e = yhat - y;
    switch (ol) {
        case OuterLoss::quadratic: return 2.0 * e;
        case OuterLoss::logcosh: return std::tanh(e);
    }
    throw ArgumentError("loss_d1: unknown loss");
}

double loss_d2(OuterLoss ol, double yhat, double y) {
    const double e = yhat - y;
    switch (ol) {
        case OuterLoss::quadratic: return 2.0;
        case OuterLoss::logcosh: {
            const double t = std::tanh(e);
            return 1.0 - t * t;
        }
    }
    throw ArgumentError("loss_d2: unknown loss");
}

LossConstants loss_constants(OuterLoss ol) {
    switch (ol) {
        case OuterLoss::quadratic: return {2.0, 2.0, 2.0};
        case OuterLoss::logcosh: return {1.0, 1.0, 1.0};
    }
    throw ArgumentError("loss_constants: unknown loss");
}

namespace {

void check_dims(const ParticleCloud& cloud, std::span<const double> x) {
    if (cloud.dim != static_cast<int>(x.size()) + 1)
        throw ArgumentError("cloud dim must equal input dim + 1");
}

}  // namespace

double neuron(std::span<const double> theta, std::span<const double> x, Activation act) {
    const double u = dot(theta.subspan(1), x);
    return theta[0] * act_eval(act, u);
}

double predict(const ParticleCloud& cloud, std::span<const double> x, Activation act) {
    check_dims(cloud, x);
    double s = 0.0;
    for (std::size_t i = 0; i < cloud.r(); ++i) s += neuron(cloud.atom(i), x, act);
    return s / static_cast<double>(cloud.r());
}

double loss(const ParticleCloud& cloud, std::span<const double> x, double y,
            Activation act, OuterLoss ol) {
    return loss_eval(ol, predict(cloud, x, act), y);
}

double flat_derivative(const ParticleCloud& cloud, std::span<const double> x, double y,
                       std::span<const double> theta, Activation act, OuterLoss ol) {
    if (static_cast<int>(theta.size()) != cloud.dim)
        throw ArgumentError("flat_derivative: theta dim mismatch");
    const double phi_m = predict(cloud, x, act);
    return loss_d1(ol, phi_m, y) * (neuron(theta, x, act) - phi_m);
}

void flat_derivative_grad(const ParticleCloud& cloud, std::span<const double> x, double y,
                          std::span<const double> theta, Activation act, OuterLoss ol,
                          std::span<double> out) {
    if (static_cast<int>(theta.size()) != cloud.dim)
        throw ArgumentError("flat_derivative_grad: theta dim mismatch");
    if (out.size() != theta.size())
        throw ArgumentError("flat_derivative_grad: output size mismatch");
    if (act == Activation::heaviside)
        throw UnsupportedError(
            "flat_derivative_grad: heaviside is unsupported for training "
            "(flat gradient; sampling-only activation)");
    const double dl = loss_d1(ol, predict(cloud, x, act), y);
    const double u = dot(theta.subspan(1), x);
    out[0] = dl * act_eval(act, u);
    const double scale = dl * theta[0] * act_deriv(act, u);
    for (std::size_t j = 0; j < x.size(); ++j) out[j + 1] = scale * x[j];
}

double predict_product(const ParticleCloud& w_cloud, const ParticleCloud& a_cloud,
                       std::span<const double> x, Activation act) {
    if (w_cloud.dim != static_cast<int>(x.size()))
        throw ArgumentError("predict_product: w cloud dim must equal input dim");
    if (a_cloud.dim != 1) throw ArgumentError("predict_product: a cloud must be 1-D");
    double phi_mean = 0.0;
    for (std::size_t i = 0; i < w_cloud.r(); ++i)
        phi_mean += act_eval(act, dot(w_cloud.atom(i), x));
    phi_mean /= static_cast<double>(w_cloud.r());
    double a_mean = 0.0;
    for (std::size_t j = 0; j < a_cloud.r(); ++j) a_mean += a_cloud.data[j];
    a_mean /= static_cast<double>(a_cloud.r());
    return phi_mean * a_mean;
}

double flat_derivative_sp(const ParticleCloud& w_cloud, const ParticleCloud& a_cloud,
                          std::span<const double> x, double y, double a, Activation act,
                          OuterLoss ol) {
    if (w_cloud.dim != static_cast<int>(x.size()))
        throw ArgumentError("flat_derivative_sp: w cloud dim must equal input dim");
    if (a_cloud.dim != 1) throw ArgumentError("flat_derivative_sp: a cloud must be 1-D");
    double phi_mean = 0.0;
    for (std::size_t i = 0; i < w_cloud.r(); ++i)
        phi_mean += act_eval(act, dot(w_cloud.atom(i), x));
    phi_mean /= static_cast<double>(w_cloud.r());
    double a_mean = 0.0;
    for (std::size_t j = 0; j < a_cloud.r(); ++j) a_mean += a_cloud.data[j];
    a_mean /= static_cast<double>(a_cloud.r());
    const double yprime = phi_mean * a_mean;
    return loss_d1(ol, yprime, y) * (a - a_mean) * phi_mean;
}

const char* activation_name(Activation act) {
    switch (act) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        case Activation::heaviside: return "heaviside";
    }
    return "?";
}

const char* outer_loss_name(OuterLoss ol) {
    switch (ol) {
        case OuterLoss::quadratic: return "quadratic";
        case OuterLoss::logcosh: return "logcosh";
    }
    return "?";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "heaviside") return Activation::heaviside;
    throw ArgumentError("unknown activation '" + name + "'");
}

OuterLoss outer_loss_from_name(const std::string& name) {
    if (name == "quadratic") return OuterLoss::quadratic;
    if (name == "logcosh") return OuterLoss::logcosh;
    throw ArgumentError("unknown loss '" + name + "'");
}

}  // namespace mftl
