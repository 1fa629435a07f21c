#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "nilm/features.hpp"

namespace nilm {

enum class NormKind : std::uint8_t { Variance, MaxAbs };

/// Fitted normalization parameters. VARIANCE stores a per-dimension mean and
/// divides by the population variance (division by the standard deviation is
/// available at fit time via use_std); MAXABS divides by the per-dimension
/// maximum absolute value seen during fitting.
struct NormalizerState {
    NormKind kind = NormKind::Variance;
    Eigen::VectorXd mean;               // zero vector for MAXABS
    Eigen::VectorXd scale;              // > 0; degenerate dims get 1
    std::vector<std::uint8_t> degenerate;  // 1 where the training column was constant

    long dims() const { return scale.size(); }
};

/// Fitted principal-component projection: rows of `components` are the top-k
/// orthonormal eigenvectors of the training covariance, by descending
/// explained variance.
struct PcaState {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;           // k x d, orthonormal rows
    Eigen::VectorXd explained_variances;  // descending, length k

    long dims() const { return components.cols(); }
    long k() const { return components.rows(); }
};

/// Per-dimension mean/variance from the training matrix. Apply computes
/// (x - mean) / var, or (x - mean) / std when use_std is set. Constant
/// columns are flagged and mapped to 0.
NormalizerState fit_variance_norm(const FeatureMatrix& train, bool use_std = false);

/// Per-dimension scale = max |x| over the training matrix; apply computes
/// x / scale. All-zero columns are flagged and left unchanged.
NormalizerState fit_maxabs_norm(const FeatureMatrix& train);

/// Top-k eigendecomposition of the mean-centered covariance (divisor n-1).
/// Component signs are fixed so each row's largest-magnitude entry is
/// positive. Throws KTooLarge unless 1 <= k <= min(rows-1, dims).
PcaState fit_pca(const FeatureMatrix& train, int k);

/// Normalizes every row with the fitted parameters; names and labels pass
/// through. Throws DimMismatch.
FeatureMatrix apply(const NormalizerState& state, const FeatureMatrix& matrix);

/// Projects every row: (x - mean) * components^T; columns renamed pc_00...
/// Throws DimMismatch.
FeatureMatrix apply(const PcaState& state, const FeatureMatrix& matrix);

/// Maps projected rows back to the original space: mean + y * components.
/// Throws DimMismatch on a column count != k.
FeatureMatrix reconstruct(const PcaState& state, const FeatureMatrix& projected);

}  // namespace nilm
