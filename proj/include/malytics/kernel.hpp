#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "malytics/featurizer.hpp"

namespace malytics {

struct KernelParams {
    double gamma = 1.0;  // spread parameter, > 0

    void validate() const;
};

/// Symmetric RBF Gram matrix; entries in (0, 1], unit diagonal.
using GramMatrix = Eigen::MatrixXd;

/// exp(-||x - y||^2 / (2 gamma^2)). Squared distance is accumulated by
/// direct subtraction in double precision.
double rbf(std::span<const double> x, std::span<const double> y, KernelParams params);
double rbf(const FeatureVector& x, const FeatureVector& y, KernelParams params);

/// Pairwise kernel over the feature list. Upper triangle computed once and
/// mirrored, diagonal set to exactly 1.
GramMatrix gram(const std::vector<FeatureVector>& features, KernelParams params);

/// [K(x, s_0), ..., K(x, s_{N-1})].
std::vector<double> kernel_row(const FeatureVector& x,
                               const std::vector<FeatureVector>& support,
                               KernelParams params);

}  // namespace malytics
