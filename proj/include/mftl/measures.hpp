// mftl: particle clouds (uniform-weight atom sets standing in for measures
// over parameters), labeled datasets, and the exact alpha-mixture view.
// SPDX-License-Identifier: MIT
#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mftl/common.hpp"

namespace mftl {

/// Uniform-weight atom set m = (1/r) sum_i delta_{theta_i}, theta_i in R^dim,
/// stored row-major.
struct ParticleCloud {
    int dim = 0;
    std::vector<double> data;  // r * dim coordinates

    std::size_t r() const {
        return dim > 0 ? data.size() / static_cast<std::size_t>(dim) : 0;
    }
    std::span<const double> atom(std::size_t i) const {
        return {data.data() + i * dim, static_cast<std::size_t>(dim)};
    }
    std::span<double> atom(std::size_t i) {
        return {data.data() + i * dim, static_cast<std::size_t>(dim)};
    }

    /// Throws ArgumentError unless dim >= 1, r >= 1, all coordinates finite.
    void validate() const;
};

/// Labeled samples (x in R^q, y in R); the empirical measure nu_n.
struct DataSet {
    int q = 0;
    std::vector<double> xs;  // n * q inputs, row-major
    std::vector<double> ys;  // n labels

    std::size_t n() const { return ys.size(); }
    std::span<const double> x(std::size_t i) const {
        return {xs.data() + i * q, static_cast<std::size_t>(q)};
    }

    void push_back(std::span<const double> x_, double y_) {
        xs.insert(xs.end(), x_.begin(), x_.end());
        ys.push_back(y_);
    }

    void validate() const;
};

/// nu_alpha = alpha * nu_target + (1 - alpha) * nu_source, as a view: any
/// linear functional evaluates to the exact alpha-weighted combination of the
/// per-set averages (never materialized, so alpha enters without sampling
/// noise).
struct MixedDataView {
    const DataSet* target = nullptr;
    const DataSet* source = nullptr;
    double alpha = 1.0;

    MixedDataView(const DataSet& t, const DataSet& s, double a)
        : target(&t), source(&s), alpha(a) {
        if (!(a >= 0.0 && a <= 1.0)) throw ArgumentError("alpha must be in [0,1]");
        if (t.q != s.q) throw ArgumentError("mixed view: q mismatch");
    }

    /// Exact mixture average of a per-sample functional. The alpha = 1 / 0
    /// boundary cases evaluate one branch only, so they are bitwise identical
    /// to the single-set average.
    template <typename F>  // F: (span<const double> x, double y) -> double
    double average(F&& f) const {
        if (alpha == 1.0) return set_average(*target, f);
        if (alpha == 0.0) return set_average(*source, f);
        return alpha * set_average(*target, f) + (1.0 - alpha) * set_average(*source, f);
    }

    template <typename F>
    static double set_average(const DataSet& d, F&& f) {
        std::vector<double> vals(d.n());
        for (std::size_t i = 0; i < d.n(); ++i) vals[i] = f(d.x(i), d.ys[i]);
        return pairwise_mean(vals);
    }
};

/// Returns a copy of `data` with sample `index` replaced; the result equals
/// nu_n + (1/n)(delta_{Z_bar} - delta_{Z_index}).
DataSet resample_one(const DataSet& data, std::size_t index, std::span<const double> x,
                     double y);

/// (1/r) sum_i ||theta_i||_2^p for p in {2, 4, 8}.
double cloud_moment(const ParticleCloud& cloud, int p);

/// (1/n) sum_i (1 + ||x_i||^2 + y_i^2)^k for k in {1, 2, 4}; ||Z|| is the
/// Euclidean norm of the concatenated (x, y) vector.
double data_moment(const DataSet& data, int k);

// JSON-lines persistence: one header line with dim metadata, then one atom or
// sample per line; doubles printed with 17 significant digits so the decimal
// round-trip is bit-exact.
void save_cloud(std::ostream& out, const ParticleCloud& cloud);
ParticleCloud load_cloud(std::istream& in);
void save_dataset(std::ostream& out, const DataSet& data);
DataSet load_dataset(std::istream& in);

void save_cloud_file(const std::string& path, const ParticleCloud& cloud);
ParticleCloud load_cloud_file(const std::string& path);
void save_dataset_file(const std::string& path, const DataSet& data);
DataSet load_dataset_file(const std::string& path);

}  // namespace mftl
