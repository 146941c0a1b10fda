// mftl: particle clouds, datasets, mixtures, and JSON-lines persistence.
// SPDX-License-Identifier: MIT
#include "mftl/measures.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mftl {

using nlohmann::json;

void ParticleCloud::validate() const {
    if (dim <= 0) throw ArgumentError("cloud dim must be positive");
    if (data.empty() || data.size() % static_cast<std::size_t>(dim) != 0)
        throw ArgumentError("cloud atom count must be >= 1 with uniform dimension");
    for (double v : data)
        if (!std::isfinite(v)) throw ArgumentError("cloud has non-finite coordinate");
}

void DataSet::validate() const {
    if (q <= 0) throw ArgumentError("dataset q must be positive");
    if (ys.empty()) throw ArgumentError("dataset must have n >= 1");
    if (xs.size() != ys.size() * static_cast<std::size_t>(q))
        throw ArgumentError("dataset x storage inconsistent with n*q");
    for (double v : xs)
        if (!std::isfinite(v)) throw ArgumentError("dataset has non-finite x");
    for (double v : ys)
        if (!std::isfinite(v)) throw ArgumentError("dataset has non-finite y");
}

DataSet resample_one(const DataSet& data, std::size_t index, std::span<const double> x,
                     double y) {
    if (index >= data.n()) throw ArgumentError("resample_one: index out of range");
    if (x.size() != static_cast<std::size_t>(data.q))
        throw ArgumentError("resample_one: replacement dimension mismatch");
    if (!std::isfinite(y)) throw ArgumentError("resample_one: non-finite label");
    DataSet out = data;
    for (int j = 0; j < data.q; ++j) out.xs[index * data.q + j] = x[j];
    out.ys[index] = y;
    return out;
}

double cloud_moment(const ParticleCloud& cloud, int p) {
    if (cloud.r() == 0) throw ArgumentError("cloud_moment: empty cloud");
    if (p != 2 && p != 4 && p != 8) throw ArgumentError("cloud_moment: p must be 2, 4 or 8");
    std::vector<double> terms(cloud.r());
    for (std::size_t i = 0; i < cloud.r(); ++i) {
        const double n2 = squared_norm(cloud.atom(i));
        double v = n2;  // p == 2
        if (p >= 4) v = n2 * n2;
        if (p == 8) v = v * v;
        terms[i] = v;
    }
    return pairwise_mean(terms);
}

double data_moment(const DataSet& data, int k) {
    if (data.n() == 0) throw ArgumentError("data_moment: empty dataset");
    if (k != 1 && k != 2 && k != 4) throw ArgumentError("data_moment: k must be 1, 2 or 4");
    std::vector<double> terms(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
        const double z2 = 1.0 + squared_norm(data.x(i)) + data.ys[i] * data.ys[i];
        double v = z2;  // k == 1
        if (k >= 2) v = z2 * z2;
        if (k == 4) v = v * v;
        terms[i] = v;
    }
    return pairwise_mean(terms);
}

// ------------------------------------------------------------------ persistence

namespace {

std::string vector_line(std::span<const double> v) {
    std::string line = "[";
    for (std::size_t j = 0; j < v.size(); ++j) {
        if (j) line += ",";
        line += format_g17(v[j]);
    }
    line += "]";
    return line;
}

json read_json_line(std::istream& in, const char* what) {
    std::string line;
    if (!std::getline(in, line)) throw ArgumentError(std::string(what) + ": truncated file");
    return json::parse(line);
}

}  // namespace

void save_cloud(std::ostream& out, const ParticleCloud& cloud) {
    out << "{\"kind\":\"cloud\",\"dim\":" << cloud.dim << ",\"count\":" << cloud.r()
        << "}\n";
    for (std::size_t i = 0; i < cloud.r(); ++i) out << vector_line(cloud.atom(i)) << "\n";
}

ParticleCloud load_cloud(std::istream& in) {
    const json header = read_json_line(in, "load_cloud");
    if (header.value("kind", "") != "cloud") throw ArgumentError("load_cloud: bad header");
    ParticleCloud cloud;
    cloud.dim = header.at("dim").get<int>();
    const auto count = header.at("count").get<std::size_t>();
    cloud.data.reserve(count * cloud.dim);
    for (std::size_t i = 0; i < count; ++i) {
        const json row = read_json_line(in, "load_cloud");
        if (!row.is_array() || row.size() != static_cast<std::size_t>(cloud.dim))
            throw ArgumentError("load_cloud: bad atom row");
        for (const auto& v : row) cloud.data.push_back(v.get<double>());
    }
    cloud.validate();
    return cloud;
}

void save_dataset(std::ostream& out, const DataSet& data) {
    out << "{\"kind\":\"dataset\",\"q\":" << data.q << ",\"count\":" << data.n() << "}\n";
    std::vector<double> row(data.q + 1);
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto x = data.x(i);
        for (int j = 0; j < data.q; ++j) row[j] = x[j];
        row[data.q] = data.ys[i];
        out << vector_line(row) << "\n";
    }
}

DataSet load_dataset(std::istream& in) {
    const json header = read_json_line(in, "load_dataset");
    if (header.value("kind", "") != "dataset")
        throw ArgumentError("load_dataset: bad header");
    DataSet data;
    data.q = header.at("q").get<int>();
    const auto count = header.at("count").get<std::size_t>();
    data.xs.reserve(count * data.q);
    data.ys.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const json row = read_json_line(in, "load_dataset");
        if (!row.is_array() || row.size() != static_cast<std::size_t>(data.q) + 1)
            throw ArgumentError("load_dataset: bad sample row");
        for (int j = 0; j < data.q; ++j) data.xs.push_back(row[j].get<double>());
        data.ys.push_back(row[data.q].get<double>());
    }
    data.validate();
    return data;
}

void save_cloud_file(const std::string& path, const ParticleCloud& cloud) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("save_cloud_file: cannot open " + path);
    save_cloud(out, cloud);
}

ParticleCloud load_cloud_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("load_cloud_file: cannot open " + path);
    return load_cloud(in);
}

void save_dataset_file(const std::string& path, const DataSet& data) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("save_dataset_file: cannot open " + path);
    save_dataset(out, data);
}

DataSet load_dataset_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("load_dataset_file: cannot open " + path);
    return load_dataset(in);
}

}  // namespace mftl
