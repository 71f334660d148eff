#include "malytics/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace malytics {
namespace {

double squared_distance(std::span<const double> x, std::span<const double> y) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        d2 += d * d;
    }
    return d2;
}

}  // namespace

void KernelParams::validate() const {
    if (!(gamma > 0.0))
        throw std::invalid_argument("gamma must be > 0");
}

double rbf(std::span<const double> x, std::span<const double> y, KernelParams params) {
    params.validate();
    if (x.size() != y.size())
        throw std::invalid_argument("rbf: dimension mismatch");
    return std::exp(-squared_distance(x, y) / (2.0 * params.gamma * params.gamma));
}

double rbf(const FeatureVector& x, const FeatureVector& y, KernelParams params) {
    return rbf(std::span<const double>{x.values}, std::span<const double>{y.values}, params);
}

GramMatrix gram(const std::vector<FeatureVector>& features, KernelParams params) {
    params.validate();
    const auto n = static_cast<Eigen::Index>(features.size());
    if (n < 1)
        throw std::invalid_argument("gram: need at least one feature vector");
    const std::size_t dim = features[0].values.size();
    for (const auto& f : features)
        if (f.values.size() != dim)
            throw std::invalid_argument("gram: inconsistent vector lengths");

    GramMatrix g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        g(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double k = rbf(features[i], features[j], params);
            g(i, j) = k;
            g(j, i) = k;
        }
    }
    return g;
}

std::vector<double> kernel_row(const FeatureVector& x,
                               const std::vector<FeatureVector>& support,
                               KernelParams params) {
    std::vector<double> row(support.size());
    for (std::size_t i = 0; i < support.size(); ++i)
        row[i] = rbf(x, support[i], params);
    return row;
}

}  // namespace malytics
