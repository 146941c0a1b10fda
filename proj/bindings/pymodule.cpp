// Python bindings for a practical subset of the library: seed derivation,
// the network primitives, the cheap invariant checks, rate fits and the CLI.
// SPDX-License-Identifier: MIT
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mftl/harness.hpp"

namespace py = pybind11;
using namespace mftl;

namespace {

ParticleCloud make_cloud(const std::vector<double>& flat, int dim) {
    if (dim < 1 || flat.empty() ||
        flat.size() % static_cast<std::size_t>(dim) != 0)
        throw ArgumentError("cloud data must be a nonempty multiple of dim");
    ParticleCloud cloud;
    cloud.dim = dim;
    cloud.data = flat;
    return cloud;
}

}  // namespace

PYBIND11_MODULE(_mftl, m) {
    m.doc() = "mean-field KL-regularized transfer-learning lab (core bindings)";

    m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("a"),
          py::arg("b") = 0, py::arg("c") = 0,
          "Deterministic child-seed derivation (counter-mode hash).");

    m.def(
        "predict",
        [](const std::vector<double>& cloud, int dim, const std::vector<double>& x,
           const std::string& act) {
            return predict(make_cloud(cloud, dim), x, activation_from_name(act));
        },
        py::arg("cloud"), py::arg("dim"), py::arg("x"), py::arg("act") = "relu",
        "Network output of a flat row-major particle cloud at input x.");

    m.def(
        "loss",
        [](const std::vector<double>& cloud, int dim, const std::vector<double>& x,
           double y, const std::string& act, const std::string& ol) {
            return loss(make_cloud(cloud, dim), x, y, activation_from_name(act),
                        outer_loss_from_name(ol));
        },
        py::arg("cloud"), py::arg("dim"), py::arg("x"), py::arg("y"),
        py::arg("act") = "relu", py::arg("ol") = "quadratic",
        "Single-observation outer loss of the cloud prediction.");

    m.def("flat_derivative_identity_error", &flat_derivative_identity_error,
          py::arg("instances"), py::arg("seed"),
          "Max |lhs - rhs| of the flat-derivative mixture identity over random "
          "instances (quadratic loss, exact 2-point quadrature).");

    m.def(
        "assumption_battery",
        [](const std::string& act, const std::string& ol, std::size_t draws,
           std::uint64_t seed) {
            const AssumptionReport rep = assumption_battery(
                activation_from_name(act), outer_loss_from_name(ol), draws, seed);
            py::dict out;
            out["draws"] = rep.draws;
            out["violations"] = rep.violations;
            out["first_violation"] = rep.first_violation;
            return out;
        },
        py::arg("act"), py::arg("ol"), py::arg("draws"), py::arg("seed"),
        "Growth-assumption spot check; returns draw and violation counts.");

    m.def(
        "rate_fit",
        [](const std::vector<std::tuple<double, double, double>>& points) {
            std::vector<RatePoint> pts;
            pts.reserve(points.size());
            for (const auto& [n, mean, se] : points) pts.push_back({n, mean, se});
            const RateReport rep = rate_fit(pts);
            py::dict out;
            out["slope"] = rep.slope;
            out["intercept"] = rep.intercept;
            out["r2"] = rep.r2;
            out["used"] = rep.used.size();
            out["dropped"] = rep.dropped.size();
            return out;
        },
        py::arg("points"),
        "Log-log rate fit over (n, mean, se) tuples; returns slope/intercept/r2 "
        "and the used/dropped point counts.");

    m.def(
        "verify",
        [](const std::string& suite, std::uint64_t seed, int threads) {
            const VerifyReport rep = run_verify(suite, seed, threads);
            std::vector<std::tuple<std::string, std::string, bool, std::string>> out;
            out.reserve(rep.items.size());
            for (const VerifyItem& it : rep.items)
                out.emplace_back(it.module, it.name, it.pass, it.detail);
            return out;
        },
        py::arg("suite") = "fast", py::arg("seed") = 0, py::arg("threads") = 1,
        "Run the invariant batteries; returns (module, name, pass, detail) tuples.");

    m.def(
        "cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "mftl");
            std::vector<char*> argv;
            argv.reserve(args.size());
            for (std::string& a : args) argv.push_back(a.data());
            return cli(static_cast<int>(argv.size()), argv.data());
        },
        py::arg("args"),
        "Run the command-line interface in-process; returns its exit code.");
}
