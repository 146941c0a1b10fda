// mftl: objective-module implementation.
// SPDX-License-Identifier: MIT
#include "mftl/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mftl {

namespace {

/// Digamma via upward recurrence into the asymptotic regime.
double digamma(double x) {
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    return acc + std::log(x) - 0.5 * inv -
           inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0));
}

double log_unit_ball_volume(int d) {
    // V_d = pi^{d/2} / Gamma(d/2 + 1).
    return 0.5 * d * std::log(M_PI) - std::lgamma(0.5 * d + 1.0);
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        s += diff * diff;
    }
    return s;
}

bool has_duplicate_atoms(const ParticleCloud& cloud) {
    std::vector<std::size_t> order(cloud.r());
    std::iota(order.begin(), order.end(), 0);
    const auto less = [&](std::size_t i, std::size_t j) {
        const auto a = cloud.atom(i), b = cloud.atom(j);
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    };
    std::sort(order.begin(), order.end(), less);
    for (std::size_t i = 1; i < order.size(); ++i)
        if (!less(order[i - 1], order[i]) && !less(order[i], order[i - 1])) return true;
    return false;
}

}  // namespace

double risk(const ParticleCloud& cloud, const DataSet& data, Activation act,
            OuterLoss ol) {
    if (cloud.dim != data.q + 1)
        throw ArgumentError("risk: cloud dim must equal input dim + 1");
    return MixedDataView::set_average(data, [&](std::span<const double> x, double y) {
        return loss(cloud, x, y, act, ol);
    });
}

double risk(const ParticleCloud& cloud, const MixedDataView& data, Activation act,
            OuterLoss ol) {
    if (cloud.dim != data.target->q + 1)
        throw ArgumentError("risk: cloud dim must equal input dim + 1");
    return data.average([&](std::span<const double> x, double y) {
        return loss(cloud, x, y, act, ol);
    });
}

double risk(const ParticleCloud& w_cloud, const ParticleCloud& a_cloud,
            const DataSet& data, Activation act, OuterLoss ol) {
    if (w_cloud.dim != data.q)
        throw ArgumentError("risk: w-cloud dim must equal input dim");
    return MixedDataView::set_average(data, [&](std::span<const double> x, double y) {
        return loss_eval(ol, predict_product(w_cloud, a_cloud, x, act), y);
    });
}

KlEstimate kl_parametric(const ParametricDensity& m, const GibbsPrior& prior,
                         std::size_t mc_count, RngStream stream) {
    if (m.dim != prior.dim) throw ArgumentError("kl_parametric: dim mismatch");
    if (mc_count < 1000)
        throw ArgumentError("kl_parametric: mc_count must be >= 1000");
    const PriorLogDensity log_gamma = make_log_density(prior);
    const ParticleCloud draws = m.sampler(mc_count, stream);
    if (draws.dim != m.dim || draws.r() != mc_count)
        throw ArgumentError("kl_parametric: sampler returned wrong shape");
    std::vector<double> vals(mc_count);
    for (std::size_t i = 0; i < mc_count; ++i) {
        const auto theta = draws.atom(i);
        vals[i] = m.log_density(theta) - log_gamma(theta);
    }
    const MeanSe ms = mean_and_se(vals);
    return {ms.mean, ms.se};
}

KnnDiagnostic kl_knn_diagnostic(const ParticleCloud& cloud, const GibbsPrior& prior,
                                int k) {
    cloud.validate();
    const std::size_t r = cloud.r();
    const int d = cloud.dim;
    if (d != prior.dim) throw ArgumentError("kl_knn_diagnostic: dim mismatch");
    if (r < 50)
        throw InsufficientDataError("kl_knn_diagnostic: need at least 50 atoms");
    if (k < 1 || static_cast<std::size_t>(k) >= r)
        throw ArgumentError("kl_knn_diagnostic: need 1 <= k < r");

    KnnDiagnostic result;
    ParticleCloud work = cloud;
    if (has_duplicate_atoms(work)) {
        result.jittered = true;
        const RngStream jitter_stream{0xA11CEu, StreamTag::generic};
        for (std::size_t i = 0; i < r; ++i) {
            SubRng sub(jitter_stream, 0, static_cast<std::uint32_t>(i));
            auto atom = work.atom(i);
            for (int j = 0; j < d; ++j) atom[j] += (sub.uniform() - 0.5) * 1e-12;
        }
    }

    // Entropy: H_hat = psi(r) - psi(k) + log V_d + (d/r) sum_i log eps_i,
    // eps_i the distance to the k-th nearest neighbor.
    std::vector<double> log_eps(r);
    std::vector<double> dists(r);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) dists[j] = sq_dist(work.atom(i), work.atom(j));
        dists[i] = std::numeric_limits<double>::infinity();  // exclude self
        std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
        log_eps[i] = 0.5 * std::log(dists[k - 1]);
    }
    const double entropy = digamma(static_cast<double>(r)) - digamma(k) +
                           log_unit_ball_volume(d) +
                           static_cast<double>(d) * pairwise_mean(log_eps);

    // Cross term: (1/r) sum U(theta_i)/sigma^2 + log F^sigma.
    const double inv_s2 = 1.0 / (prior.sigma * prior.sigma);
    std::vector<double> pots(r);
    for (std::size_t i = 0; i < r; ++i)
        pots[i] = potential_radial(prior.pot, std::sqrt(squared_norm(work.atom(i)))) *
                  inv_s2;
    result.value = -entropy + pairwise_mean(pots) + log_normalizer(prior);
    return result;
}

double v_beta(const Objective& obj, const ParticleCloud& cloud, const DataSet& data) {
    obj.validate();
    return risk(cloud, data, obj.act, obj.ol) +
           obj.reg_weight() * kl_knn_diagnostic(cloud, obj.prior).value;
}

double v_beta(const Objective& obj, const ParticleCloud& cloud,
              const MixedDataView& data) {
    obj.validate();
    return risk(cloud, data, obj.act, obj.ol) +
           obj.reg_weight() * kl_knn_diagnostic(cloud, obj.prior).value;
}

double v_beta(const Objective& obj, const ParametricDensity& m, const DataSet& data,
              std::size_t mc_count, RngStream stream) {
    obj.validate();
    const ParticleCloud draws = m.sampler(mc_count, stream);
    return risk(draws, data, obj.act, obj.ol) +
           obj.reg_weight() * kl_parametric(m, obj.prior, mc_count, stream).value;
}

GridSpec GridSpec::cover(const ParticleCloud& cloud, int bins_per_dim,
                         double pad_frac) {
    cloud.validate();
    if (cloud.dim > 2) throw UnsupportedError("GridSpec: parameter dimension > 2");
    if (bins_per_dim < 1) throw ArgumentError("GridSpec: bins must be >= 1");
    GridSpec g;
    g.dim = cloud.dim;
    for (int j = 0; j < cloud.dim; ++j) {
        double lo = cloud.data[j], hi = cloud.data[j];
        for (std::size_t i = 1; i < cloud.r(); ++i) {
            lo = std::min(lo, cloud.atom(i)[j]);
            hi = std::max(hi, cloud.atom(i)[j]);
        }
        const double pad = std::max((hi - lo) * pad_frac, 1e-12);
        g.lo[j] = lo - pad;
        g.hi[j] = hi + pad;
        g.bins[j] = bins_per_dim;
    }
    return g;
}

double gibbs_residual(const ParticleCloud& cloud, const DataSet& data,
                      const Objective& obj, const GridSpec& grid, double offset) {
    obj.validate();
    cloud.validate();
    const int d = cloud.dim;
    if (d > 2) throw UnsupportedError("gibbs_residual: parameter dimension > 2");
    if (grid.dim != d) throw ArgumentError("gibbs_residual: grid dim mismatch");
    if (d != obj.prior.dim) throw ArgumentError("gibbs_residual: prior dim mismatch");

    const int bx = grid.bins[0];
    const int by = d == 2 ? grid.bins[1] : 1;
    const double wx = (grid.hi[0] - grid.lo[0]) / bx;
    const double wy = d == 2 ? (grid.hi[1] - grid.lo[1]) / by : 1.0;
    const std::size_t cells = grid.cell_count();

    // Cloud histogram; atoms outside the grid are tracked as escaped mass.
    std::vector<double> hist(cells, 0.0);
    std::size_t outside = 0;
    for (std::size_t i = 0; i < cloud.r(); ++i) {
        const auto theta = cloud.atom(i);
        const int ix = static_cast<int>(std::floor((theta[0] - grid.lo[0]) / wx));
        const int iy = d == 2
                           ? static_cast<int>(std::floor((theta[1] - grid.lo[1]) / wy))
                           : 0;
        if (ix < 0 || ix >= bx || iy < 0 || iy >= by) {
            ++outside;
            continue;
        }
        hist[static_cast<std::size_t>(iy) * bx + ix] += 1.0;
    }
    const double outside_frac = static_cast<double>(outside) / cloud.r();
    if (outside_frac > 1e-3)
        throw ArgumentError("gibbs_residual: grid covers less than 99.9% of atoms");
    for (double& h : hist) h /= static_cast<double>(cloud.r());

    // Self-consistent target density at cell centers. dR/dm(cloud, z, theta)
    // only needs the cloud through Phi(cloud, x_z), so precompute those.
    const std::size_t n = data.n();
    std::vector<double> phi_z(n), dl_z(n);
    for (std::size_t z = 0; z < n; ++z) {
        phi_z[z] = predict(cloud, data.x(z), obj.act);
        dl_z[z] = loss_d1(obj.ol, phi_z[z], data.ys[z]);
    }
    const double temp = 2.0 * obj.beta * obj.beta / (obj.prior.sigma * obj.prior.sigma);
    const double inv_s2 = 1.0 / (obj.prior.sigma * obj.prior.sigma);
    std::vector<double> logp(cells);
    std::vector<double> theta(d);
    for (std::size_t c = 0; c < cells; ++c) {
        const int ix = static_cast<int>(c) % bx;
        const int iy = static_cast<int>(c) / bx;
        theta[0] = grid.lo[0] + (ix + 0.5) * wx;
        if (d == 2) theta[1] = grid.lo[1] + (iy + 0.5) * wy;
        // avg_z dl_z * (phi(theta, x_z) - Phi_z): the unnormalized flat
        // derivative; its additive constant cancels below.
        std::vector<double> terms(n);
        for (std::size_t z = 0; z < n; ++z)
            terms[z] = dl_z[z] * (neuron(theta, data.x(z), obj.act) - phi_z[z]);
        const double dr = pairwise_mean(terms) + offset;
        logp[c] = -temp * dr -
                  potential_radial(obj.prior.pot, std::sqrt(squared_norm(theta))) *
                      inv_s2;
    }
    const double lmax = *std::max_element(logp.begin(), logp.end());
    double total = 0.0;
    for (double& lp : logp) {
        lp = std::exp(lp - lmax);
        total += lp;
    }

    double tv = 0.0;
    for (std::size_t c = 0; c < cells; ++c) tv += std::abs(logp[c] / total - hist[c]);
    return 0.5 * (tv + outside_frac);
}

}  // namespace mftl
