#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "flowbone/backbone.hpp"
#include "flowbone/flownet.hpp"

namespace flowbone::test {

struct Flow {
    std::string src;
    std::string dst;
    std::int64_t count;
};

inline FlowNetwork make_net(std::vector<std::string> nodes, std::initializer_list<Flow> flows, int year = 2008) {
    std::sort(nodes.begin(), nodes.end());
    const auto n = static_cast<Eigen::Index>(nodes.size());
    FlowNetwork net{year, nodes, CountMatrix::Zero(n, n)};
    for (const auto& f : flows)
        net.weights(static_cast<Eigen::Index>(net.index_of(f.src)), static_cast<Eigen::Index>(net.index_of(f.dst))) += f.count;
    return net;
}

inline FlowNetwork uniform_net(std::size_t n, std::int64_t c, int year = 2008) {
    std::vector<std::string> nodes;
    for (std::size_t i = 0; i < n; ++i) nodes.push_back("N" + std::to_string(10 + i));
    FlowNetwork net{year, nodes, CountMatrix::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), c)};
    net.weights.diagonal().setZero();
    return net;
}

inline FlowNetwork random_net(std::mt19937_64& rng, std::size_t n, std::int64_t max_count, int year = 2008) {
    std::vector<std::string> nodes;
    for (std::size_t i = 0; i < n; ++i) nodes.push_back("N" + std::to_string(10 + i));
    FlowNetwork net{year, nodes, CountMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
    std::uniform_int_distribution<std::int64_t> pick(0, max_count);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i)
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n); ++j)
            if (i != j) net.weights(i, j) = pick(rng);
    if (net.total() == 0) net.weights(0, 1) = 1;
    return net;
}

/// Fresh empty directory under the system temp path, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("flowbone-" + tag + "-" + std::to_string(rd()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

    std::string write(const std::string& name, const std::string& content) const {
        const auto p = path_ / name;
        std::ofstream(p) << content;
        return p.string();
    }

private:
    std::filesystem::path path_;
};

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
inline Eigen::MatrixXd random_orthogonal(std::mt19937_64& rng, Eigen::Index d) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) a(i, j) = g(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index k = 0; k < d; ++k)
        if (r(k, k) < 0) q.col(k) *= -1;
    return q;
}

inline Eigen::MatrixXd random_unit_rows(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd z(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < d; ++k) z(i, k) = g(rng);
        z.row(i).normalize();
    }
    return z;
}

}  // namespace flowbone::test
