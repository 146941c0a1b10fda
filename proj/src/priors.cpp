// mftl: Gibbs priors, tilted variants, radial samplers and moment quadrature.
// SPDX-License-Identifier: MIT
#include "mftl/priors.hpp"

#include <algorithm>
#include <cmath>

namespace mftl {

const char* potential_name(Potential pot) {
    switch (pot) {
        case Potential::poly10: return "poly10";
        case Potential::gaussian: return "gaussian";
    }
    return "?";
}

Potential potential_from_name(const std::string& name) {
    if (name == "poly10") return Potential::poly10;
    if (name == "gaussian") return Potential::gaussian;
    throw ArgumentError("unknown potential '" + name + "'");
}

namespace {

constexpr double kRMin = 1e-6;        // lower grid edge (log-spaced radial grid)
constexpr int kGridNodes = 4096;      // sampler grid / starting quadrature size
constexpr double kLogMargin = 60.0;   // e-folds of density drop kept past the mode
constexpr int kMaxQuadNodes = 1 << 21;
constexpr double kMomentRelTol = 1e-8;

/// g(r) = -U(r)/sigma^2 + tilt * r^8 (the log radial weight, sans r^{d-1}).
double log_weight(Potential pot, double sigma, double tilt, double r) {
    const double base = -potential_radial(pot, r) / (sigma * sigma);
    if (tilt == 0.0) return base;
    const double r2 = r * r;
    const double r4 = r2 * r2;
    return base + tilt * r4 * r4;
}

/// Upper grid edge: the radius where g has dropped kLogMargin below its max.
double find_r_max(Potential pot, double sigma, double tilt) {
    if (tilt == 0.0) {
        // g decreases from g(0) = 0; solve U(r)/sigma^2 = margin.
        if (pot == Potential::poly10)
            return std::pow(kLogMargin * sigma * sigma, 0.1);
        return sigma * std::sqrt(2.0 * kLogMargin);
    }
    // poly10 with the ^8 tilt: g(r) = -r^10/sigma^2 + r^8 peaks at
    // r* = sigma * sqrt(4/5); bisect g(r) = g(r*) - margin to its right.
    const double r_star = sigma * std::sqrt(0.8);
    const double target = log_weight(pot, sigma, tilt, r_star) - kLogMargin;
    double hi = std::max(r_star, 1.0);
    while (log_weight(pot, sigma, tilt, hi) > target) hi *= 2.0;
    double lo = r_star;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (log_weight(pot, sigma, tilt, mid) > target)
            lo = mid;
        else
            hi = mid;
    }
    return hi;
}

/// log of integral_{kRMin}^{r_max} r^k exp(g(r)) dr, trapezoid over s = ln r
/// with n nodes and log-sum-exp stabilization.
double log_radial_integral(Potential pot, double sigma, double tilt, double k,
                           double r_max, int n) {
    const double s_lo = std::log(kRMin);
    const double s_hi = std::log(r_max);
    const double ds = (s_hi - s_lo) / (n - 1);
    std::vector<double> f(n);
    for (int i = 0; i < n; ++i) {
        const double s = s_lo + ds * i;
        f[i] = (k + 1.0) * s + log_weight(pot, sigma, tilt, std::exp(s));
    }
    const double fmax = *std::max_element(f.begin(), f.end());
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        acc += w * std::exp(f[i] - fmax);
    }
    // Analytic [0, kRMin] head, where exp(g) == 1 to machine precision:
    // integral r^k dr = kRMin^{k+1}/(k+1). Without it the k = 0 denominators
    // (dim 1) would carry an O(kRMin) relative truncation error.
    acc += std::exp((k + 1.0) * s_lo - std::log(k + 1.0) - fmax) / ds;
    return fmax + std::log(acc) + std::log(ds);
}

/// Moment ratio with node-doubling until two refinements agree to
/// kMomentRelTol relative error.
double refined_moment(Potential pot, double sigma, double tilt, int dim, int p) {
    const double r_max = find_r_max(pot, sigma, tilt);
    const double k_num = static_cast<double>(p + dim - 1);
    const double k_den = static_cast<double>(dim - 1);
    int n = kGridNodes;
    double prev = std::exp(log_radial_integral(pot, sigma, tilt, k_num, r_max, n) -
                           log_radial_integral(pot, sigma, tilt, k_den, r_max, n));
    while (n < kMaxQuadNodes) {
        n *= 2;
        const double cur =
            std::exp(log_radial_integral(pot, sigma, tilt, k_num, r_max, n) -
                     log_radial_integral(pot, sigma, tilt, k_den, r_max, n));
        if (std::abs(prev / cur - 1.0) <= kMomentRelTol) return cur;
        prev = cur;
    }
    throw UnsupportedError("radial moment quadrature failed to converge");
}

double log_sphere_area(int dim) {
    // |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2).
    return M_LN2 + 0.5 * dim * std::log(M_PI) - std::lgamma(0.5 * dim);
}

}  // namespace

double potential_radial(Potential pot, double r) {
    switch (pot) {
        case Potential::poly10: {
            const double r2 = r * r;
            const double r4 = r2 * r2;
            const double r8 = r4 * r4;
            return r8 * r2;
        }
        case Potential::gaussian: return 0.5 * r * r;
    }
    throw ArgumentError("potential_radial: unknown potential");
}

double potential_radial_deriv(Potential pot, double r) {
    switch (pot) {
        case Potential::poly10: {
            const double r2 = r * r;
            const double r4 = r2 * r2;
            return 10.0 * r4 * r4 * r;
        }
        case Potential::gaussian: return r;
    }
    throw ArgumentError("potential_radial_deriv: unknown potential");
}

void potential_grad(const GibbsPrior& prior, std::span<const double> theta,
                    std::span<double> out) {
    if (theta.size() != out.size() || static_cast<int>(theta.size()) != prior.dim)
        throw ArgumentError("potential_grad: dimension mismatch");
    switch (prior.pot) {
        case Potential::poly10: {
            const double n2 = squared_norm(theta);
            const double n4 = n2 * n2;
            const double scale = 10.0 * n4 * n4;  // 10 ||theta||^8
            for (std::size_t j = 0; j < theta.size(); ++j) out[j] = scale * theta[j];
            return;
        }
        case Potential::gaussian:
            for (std::size_t j = 0; j < theta.size(); ++j) out[j] = theta[j];
            return;
    }
    throw ArgumentError("potential_grad: unknown potential");
}

double log_normalizer(const GibbsPrior& prior) {
    if (prior.dim < 1) throw ArgumentError("log_normalizer: dim must be >= 1");
    const double r_max = find_r_max(prior.pot, prior.sigma, 0.0);
    int n = kGridNodes;
    double prev = log_radial_integral(prior.pot, prior.sigma, 0.0, prior.dim - 1.0,
                                      r_max, n);
    while (n < kMaxQuadNodes) {
        n *= 2;
        const double cur = log_radial_integral(prior.pot, prior.sigma, 0.0,
                                               prior.dim - 1.0, r_max, n);
        if (std::abs(prev - cur) <= 1e-10) return log_sphere_area(prior.dim) + cur;
        prev = cur;
    }
    throw UnsupportedError("log_normalizer quadrature failed to converge");
}

PriorLogDensity make_log_density(const GibbsPrior& prior) {
    return {prior, log_normalizer(prior)};
}

ParticleCloud sample(const GibbsPrior& prior, std::size_t count, RngStream stream) {
    if (count < 1) throw ArgumentError("sample: count must be >= 1");
    const int d = prior.dim;

    // Radial CDF table on a log-spaced grid.
    const double r_max = find_r_max(prior.pot, prior.sigma, 0.0);
    const double s_lo = std::log(kRMin);
    const double ds = (std::log(r_max) - s_lo) / (kGridNodes - 1);
    std::vector<double> r(kGridNodes), logf(kGridNodes);
    for (int i = 0; i < kGridNodes; ++i) {
        r[i] = std::exp(s_lo + ds * i);
        logf[i] = (d - 1.0) * std::log(r[i]) +
                  log_weight(prior.pot, prior.sigma, 0.0, r[i]);
    }
    const double fmax = *std::max_element(logf.begin(), logf.end());
    std::vector<double> rho(kGridNodes), cdf(kGridNodes);
    for (int i = 0; i < kGridNodes; ++i) rho[i] = std::exp(logf[i] - fmax);
    cdf[0] = 0.0;
    for (int i = 1; i < kGridNodes; ++i)
        cdf[i] = cdf[i - 1] + 0.5 * (rho[i] + rho[i - 1]) * (r[i] - r[i - 1]);
    const double total = cdf.back();
    for (double& c : cdf) c /= total;

    ParticleCloud cloud;
    cloud.dim = d;
    cloud.data.resize(count * d);
    for (std::size_t i = 0; i < count; ++i) {
        SubRng sub(stream, 0, static_cast<std::uint32_t>(i));
        // Radius by monotone linear interpolation of the tabulated CDF.
        const double u = sub.uniform();
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        const std::size_t hi = std::min<std::size_t>(
            std::max<std::size_t>(1, it - cdf.begin()), kGridNodes - 1);
        const std::size_t lo = hi - 1;
        const double seg = cdf[hi] - cdf[lo];
        const double t = seg > 0.0 ? (u - cdf[lo]) / seg : 0.0;
        const double radius = r[lo] + t * (r[hi] - r[lo]);
        // Uniform direction from normalized Gaussians.
        auto atom = cloud.atom(i);
        double norm2 = 0.0;
        do {
            sub.normals(atom.data(), d);
            norm2 = squared_norm(atom);
        } while (norm2 == 0.0);
        const double scale = radius / std::sqrt(norm2);
        for (int j = 0; j < d; ++j) atom[j] *= scale;
    }
    return cloud;
}

double tilted_moment(const TiltedPrior& tp, int p) {
    if (p != 4 && p != 8) throw ArgumentError("tilted_moment: p must be 4 or 8");
    return refined_moment(tp.base.pot, tp.base.sigma, 1.0, tp.base.dim, p);
}

double prior_moment(const GibbsPrior& prior, int p) {
    if (p != 2 && p != 4 && p != 8)
        throw ArgumentError("prior_moment: p must be 2, 4 or 8");
    return refined_moment(prior.pot, prior.sigma, 0.0, prior.dim, p);
}

double comp_alpha(const TiltedPrior& tp) {
    const double m8 = tilted_moment(tp, 8);
    const double m4 = tilted_moment(tp, 4);
    const double bracket = 1.0 + 2.0 * m8 + 2.0 * m4;
    return bracket * bracket;
}

double comp_finetune(const TiltedPrior& hat_c, const TiltedPrior& tilde_sp,
                     const GibbsPrior& hat_sp) {
    if (tilde_sp.base.dim != 1 || hat_sp.dim != 1)
        throw ArgumentError("comp_finetune: Theta_sp must be one-dimensional");
    if (hat_sp.pot != Potential::poly10)
        throw NotNormalizableError("comp_finetune requires poly10 bases");
    const double c_term = 2.0 * tilted_moment(hat_c, 4) + tilted_moment(hat_c, 8);
    const double sp_t_term =
        tilted_moment(tilde_sp, 4) + 2.0 * tilted_moment(tilde_sp, 8);
    const double sp_s_term = prior_moment(hat_sp, 4);
    const double bracket = 1.0 + c_term + sp_t_term + sp_s_term;
    return bracket * bracket;
}

double comp_finetune(double sigma, int q) {
    const TiltedPrior hat_c(GibbsPrior{Potential::poly10, sigma, q});
    const TiltedPrior tilde_sp(GibbsPrior{Potential::poly10, sigma, 1});
    const GibbsPrior hat_sp{Potential::poly10, sigma, 1};
    return comp_finetune(hat_c, tilde_sp, hat_sp);
}

}  // namespace mftl
