#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "malytics/featurizer.hpp"
#include "malytics/kernel.hpp"

namespace malytics {

enum class Label { Malware, Benign };

std::string to_string(Label l);
Label label_from_string(const std::string& s);  // case-insensitive; throws on unknown

/// N x 2 target matrix: [+1, -1] per malware row, [-1, +1] per benign row.
/// Column 0 is the malware channel.
Eigen::MatrixXd encode_targets(const std::vector<Label>& labels);

struct TrainingMeta {
    std::size_t total_samples = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> support_indices;
    double solve_residual = 0.0;  // ||(I/C + Omega) beta - T||_inf
};

/// Closed-form kernel ELM: support features plus the solved output weights.
/// Immutable after training.
struct TrainedModel {
    NgramConfig featurizer_config;
    KernelParams kernel_params;
    double c_tradeoff = 200.0;
    std::vector<FeatureVector> support;
    Eigen::MatrixXd beta;  // support.size() x 2
    TrainingMeta meta;
};

struct Scores {
    double malware_score = 0.0;
    double benign_score = 0.0;
    double margin() const { return malware_score - benign_score; }
};

/// Solves (I/C + Omega) B = T by Cholesky (the matrix is SPD for C > 0) and
/// keeps all inputs as support vectors. Enforces the residual contract
/// ||(I/C + Omega) B - T||_inf <= 1e-8 * N.
TrainedModel train(const std::vector<FeatureVector>& features,
                   const std::vector<Label>& labels, KernelParams params, double c,
                   const NgramConfig& config = {});

/// Same solve over l seeded uniformly-drawn distinct samples. l == N takes
/// the identity selection and reproduces train() exactly. Retries up to 16
/// times to find a subset containing both classes.
TrainedModel train_subsampled(const std::vector<FeatureVector>& features,
                              const std::vector<Label>& labels, KernelParams params,
                              double c, std::size_t l, std::uint64_t seed,
                              const NgramConfig& config = {});

/// kernel_row(x, support) * beta.
Scores predict_scores(const TrainedModel& model, const FeatureVector& x);

/// Malware iff margin >= threshold (ties go to malware).
Label classify(const Scores& scores, double threshold = 0.0);

}  // namespace malytics
