#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace malytics {

/// Featurizer configuration: byte n-gram order, output dimension and the
/// seed that fully determines the random projection.
struct NgramConfig {
    int n = 2;                 // n-gram order in bytes, 1..3
    int hash_size = 1024;      // output dimension
    std::uint64_t seed = 0;
    bool sparse = false;
    double density = 0.01;     // nonzero fraction per row, sparse mode only

    std::size_t dictionary_size() const { return std::size_t{1} << (8 * n); }
    int nonzeros_per_row() const;

    // Throws std::invalid_argument on violation.
    void validate() const;
};

/// Term frequencies over the full n-gram dictionary.
/// counts[v] indexes the n-gram bytes read big-endian.
struct TfVector {
    std::vector<std::uint32_t> counts;
    std::uint64_t total_ngrams = 0;
};

/// Immutable +-1 (dense) or +-1/0 (sparse) random projection matrix of shape
/// dictionary_size x hash_size. Regenerating from the same NgramConfig
/// reproduces identical entries.
///
/// Entry generation is pinned for reproducibility: a std::mt19937_64 seeded
/// with config.seed drives hand-rolled Box-Muller standard-normal draws
/// (dense) and Floyd column sampling plus top-bit sign draws (sparse).
/// Dense entries are the sign of the normal draw, consumed in row-major
/// order; sign(0) = +1.
class ProjectionMatrix {
public:
    static ProjectionMatrix build(const NgramConfig& config);

    std::size_t rows() const { return rows_; }
    int cols() const { return cols_; }
    bool is_sparse() const { return sparse_; }
    std::uint64_t seed() const { return seed_; }
    int nonzeros_per_row() const { return row_nnz_; }

    // Dense storage, row-major. Valid only when !is_sparse().
    std::span<const std::int8_t> dense_row(std::size_t r) const {
        return {dense_.data() + r * static_cast<std::size_t>(cols_),
                static_cast<std::size_t>(cols_)};
    }
    // Sparse storage: per-row sorted column indices and matching signs.
    std::span<const std::uint32_t> sparse_cols(std::size_t r) const {
        return {sparse_cols_.data() + r * static_cast<std::size_t>(row_nnz_),
                static_cast<std::size_t>(row_nnz_)};
    }
    std::span<const std::int8_t> sparse_signs(std::size_t r) const {
        return {sparse_signs_.data() + r * static_cast<std::size_t>(row_nnz_),
                static_cast<std::size_t>(row_nnz_)};
    }

    // Entry value in {-1, 0, +1}; O(log nnz) in sparse mode.
    int entry(std::size_t r, int c) const;

private:
    ProjectionMatrix() = default;

    std::size_t rows_ = 0;
    int cols_ = 0;
    bool sparse_ = false;
    int row_nnz_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<std::int8_t> dense_;
    std::vector<std::uint32_t> sparse_cols_;
    std::vector<std::int8_t> sparse_signs_;
};

/// Standardized tf-simhash of one input. Non-degenerate vectors have zero
/// mean and unit population variance; degenerate inputs (constant raw hash,
/// e.g. empty files) come back as flagged all-zero vectors.
struct FeatureVector {
    std::vector<double> values;
    bool degenerate = false;
};

/// Overlapping n-gram term frequencies, stride 1. Inputs shorter than n
/// yield the all-zero TfVector.
TfVector extract_ngram_tf(std::span<const std::uint8_t> data, int n);

/// TF x projection. Exact integer arithmetic; cost is proportional to the
/// number of distinct n-grams present, not the dictionary size.
std::vector<std::int64_t> tf_simhash(const TfVector& tf, const ProjectionMatrix& proj);

/// Zero-mean, unit population-variance transform. sigma < 1e-12 yields the
/// degenerate all-zero vector. Throws on length < 2.
FeatureVector standardize(std::span<const double> raw);
FeatureVector standardize(std::span<const std::int64_t> raw);

/// extract_ngram_tf -> tf_simhash -> standardize.
FeatureVector featurize(std::span<const std::uint8_t> data, const NgramConfig& config,
                        const ProjectionMatrix& proj);

}  // namespace malytics
