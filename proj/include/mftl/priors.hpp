// mftl: Gibbs regularizing priors gamma^sigma ∝ exp(-U(theta)/sigma^2), their
// ||theta||^8-tilted variants, exact radial samplers, and the moment
// quadratures feeding the bound formulas.
// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <string>

#include "mftl/common.hpp"
#include "mftl/measures.hpp"
#include "mftl/rng.hpp"

namespace mftl {

/// Regularizing potentials. poly10 (U = ||theta||^10) is the default: it
/// dominates every growth assumption in play and keeps the ^8-tilt
/// normalizable. gaussian (U = ||theta||^2 / 2) is offered for training only;
/// tilted-moment machinery rejects it.
enum class Potential { poly10, gaussian };

const char* potential_name(Potential pot);
Potential potential_from_name(const std::string& name);

struct GibbsPrior {
    Potential pot = Potential::poly10;
    double sigma = 1.0;
    int dim = 1;
};

/// U as a function of the radius r = ||theta||.
double potential_radial(Potential pot, double r);
/// dU/dr.
double potential_radial_deriv(Potential pot, double r);
/// grad U(theta), written into out.
void potential_grad(const GibbsPrior& prior, std::span<const double> theta,
                    std::span<double> out);

/// log of the normalizer F^sigma = integral of exp(-U/sigma^2) over R^dim.
double log_normalizer(const GibbsPrior& prior);

/// Evaluates log gamma^sigma(theta); carries the (quadrature-computed)
/// normalizer so repeated evaluations are cheap.
struct PriorLogDensity {
    GibbsPrior prior;
    double log_f;
    double operator()(std::span<const double> theta) const {
        return -potential_radial(prior.pot, std::sqrt(squared_norm(theta))) /
                   (prior.sigma * prior.sigma) -
               log_f;
    }
};
PriorLogDensity make_log_density(const GibbsPrior& prior);

/// gamma_8^sigma ∝ exp(-U/sigma^2 + ||theta||^8). Only normalizable over a
/// poly10 base; the constructor rejects gaussian.
struct TiltedPrior {
    GibbsPrior base;
    explicit TiltedPrior(GibbsPrior base_) : base(base_) {
        if (base.pot != Potential::poly10)
            throw NotNormalizableError(
                "tilted prior requires the poly10 potential: exp(-U/sigma^2 + "
                "||theta||^8) does not integrate over a gaussian base");
    }
};

/// i.i.d. draws from gamma^sigma: uniform sphere direction times a radius
/// drawn by inverse CDF of r^{dim-1} exp(-U(r)/sigma^2) on a 4096-node
/// log-spaced grid with monotone linear interpolation.
ParticleCloud sample(const GibbsPrior& prior, std::size_t count, RngStream stream);

/// M_p = integral of ||theta||^p under the tilted prior, p in {4, 8}, by
/// radial quadrature in log-space (trapezoid + log-sum-exp), node-doubled
/// until successive refinements agree to 1e-8 relative error.
double tilted_moment(const TiltedPrior& tp, int p);

/// Untilted moment E_{gamma^sigma} ||theta||^p (same quadrature, tilt off).
double prior_moment(const GibbsPrior& prior, int p);

/// Comp(theta) = (1 + 2 M_8 + 2 M_4)^2 under the tilted prior.
double comp_alpha(const TiltedPrior& tp);

/// Fine-tuning complexity term. Under the separable potential
/// U(theta) = ||theta_c||^10 + ||theta_sp||^10 the ||theta_c||^8-tilted joint
/// density factorizes exactly, so each bracket integral is a block-radial
/// quadrature:
///   Comp_FT = [1 + (2 M4 + M8)(hat_c)            // tilted, over Theta_c
///                + (M4 + 2 M8)(tilde_sp)          // tilted, over Theta_sp
///                + M4(hat_sp)]^2                  // untilted, over Theta_sp
/// with Theta_sp one-dimensional (the outer weight a).
double comp_finetune(const TiltedPrior& hat_c, const TiltedPrior& tilde_sp,
                     const GibbsPrior& hat_sp);

/// Convenience: builds the three block measures for input dimension q at the
/// given sigma and evaluates comp_finetune.
double comp_finetune(double sigma, int q);

}  // namespace mftl
