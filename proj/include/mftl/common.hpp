// mftl: shared error types, deterministic aggregation, and small utilities.
// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mftl {

// ---------------------------------------------------------------- error taxonomy

/// Bad argument (dimension mismatch, out-of-range index, empty input).
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Operation is well-formed but intentionally not supported
/// (e.g. training with a heaviside activation, residuals in d > 2).
struct UnsupportedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A tilted prior whose density does not integrate to a finite value.
struct NotNormalizableError : UnsupportedError {
    using UnsupportedError::UnsupportedError;
};

/// Fewer usable data points than a fit requires.
struct InsufficientDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed configuration; carries the offending field name.
struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(std::string field_, const std::string& what_)
        : std::runtime_error("config field '" + field_ + "': " + what_),
          field(std::move(field_)) {}
};

/// A particle coordinate exceeded the divergence guard during training.
struct DivergedError : std::runtime_error {
    long step;
    int stage;  // 0 = single-stage, 1/2 = fine-tune stages
    DivergedError(long step_, int stage_, const std::string& what_)
        : std::runtime_error(what_), step(step_), stage(stage_) {}
};

// ------------------------------------------------------------- deterministic sums

/// Pairwise (cascade) summation: deterministic for a fixed element order and
/// far smaller rounding error than sequential accumulation.
double pairwise_sum(std::span<const double> xs);

/// Pairwise mean; throws ArgumentError on empty input.
double pairwise_mean(std::span<const double> xs);

/// Sample mean and standard error (sample std / sqrt(n)), pairwise-summed.
struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};
MeanSe mean_and_se(std::span<const double> xs);

// ----------------------------------------------------------------- parallel_for

/// Runs fn(i) for i in [0, n) on `threads` worker threads (contiguous chunks).
/// Callers own determinism: fn must write only to slot i of pre-sized storage.
/// threads <= 1 (or n < 2) degrades to a plain loop. Exceptions from workers
/// are rethrown (the first one, by chunk order) after all threads join.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// ------------------------------------------------------------------ formatting

/// Formats a double with 17 significant digits ("%.17g", C locale semantics):
/// enough for bit-exact decimal round-trips.
std::string format_g17(double v);

/// Small vector helpers used across modules.
inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

}  // namespace mftl
