#include "nilm/transform.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>

namespace nilm {
namespace {

void check_dims(long expected, long got, const char* what) {
    if (expected != got) {
        throw DimMismatch(std::string(what) + " fitted on " + std::to_string(expected) +
                          " dimensions, applied to " + std::to_string(got));
    }
}

std::string pc_name(long j, long k) {
    const int width = static_cast<int>(std::to_string(k - 1).size());
    char buf[32];
    std::snprintf(buf, sizeof(buf), "pc_%0*ld", width, j);
    return buf;
}

}  // namespace

NormalizerState fit_variance_norm(const FeatureMatrix& train, bool use_std) {
    train.validate();
    if (train.rows() == 0) throw EmptyTrainSet("cannot fit a normalizer on an empty matrix");
    const long d = train.cols();
    const double n = static_cast<double>(train.rows());

    NormalizerState state;
    state.kind = NormKind::Variance;
    state.mean = train.values.colwise().mean();
    state.scale.resize(d);
    state.degenerate.assign(static_cast<std::size_t>(d), 0);
    for (long j = 0; j < d; ++j) {
        const double var =
            (train.values.col(j).array() - state.mean(j)).square().sum() / n;
        if (var > 0.0) {
            state.scale(j) = use_std ? std::sqrt(var) : var;
        } else {
            state.scale(j) = 1.0;
            state.degenerate[static_cast<std::size_t>(j)] = 1;
        }
    }
    return state;
}

NormalizerState fit_maxabs_norm(const FeatureMatrix& train) {
    train.validate();
    if (train.rows() == 0) throw EmptyTrainSet("cannot fit a normalizer on an empty matrix");
    const long d = train.cols();

    NormalizerState state;
    state.kind = NormKind::MaxAbs;
    state.mean = Eigen::VectorXd::Zero(d);
    state.scale.resize(d);
    state.degenerate.assign(static_cast<std::size_t>(d), 0);
    for (long j = 0; j < d; ++j) {
        const double m = train.values.col(j).cwiseAbs().maxCoeff();
        if (m > 0.0) {
            state.scale(j) = m;
        } else {
            state.scale(j) = 1.0;
            state.degenerate[static_cast<std::size_t>(j)] = 1;
        }
    }
    return state;
}

FeatureMatrix apply(const NormalizerState& state, const FeatureMatrix& matrix) {
    matrix.validate();
    check_dims(state.dims(), matrix.cols(), "normalizer");
    FeatureMatrix out = matrix;
    out.values = (matrix.values.rowwise() - state.mean.transpose()).array().rowwise() /
                 state.scale.transpose().array();
    return out;
}

PcaState fit_pca(const FeatureMatrix& train, int k) {
    train.validate();
    const long n = train.rows();
    const long d = train.cols();
    if (n < 2) throw EmptyTrainSet("PCA needs at least 2 rows");
    const long k_max = std::min(n - 1, d);
    if (k < 1 || k > k_max) {
        throw KTooLarge("k=" + std::to_string(k) + " outside [1, " + std::to_string(k_max) +
                        "] for a " + std::to_string(n) + "x" + std::to_string(d) + " matrix");
    }

    PcaState state;
    state.mean = train.values.colwise().mean();
    const Eigen::MatrixXd centered = train.values.rowwise() - state.mean.transpose();
    const double divisor = static_cast<double>(n - 1);

    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;  // columns, ascending eigenvalue order
    if (d <= n) {
        const Eigen::MatrixXd cov = centered.transpose() * centered / divisor;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
        if (solver.info() != Eigen::Success) throw Error("eigendecomposition failed");
        eigenvalues = solver.eigenvalues();
        eigenvectors = solver.eigenvectors();
    } else {
        // More dimensions than rows: decompose the n x n Gram matrix instead
        // and lift its eigenvectors, which span all nonzero directions.
        const Eigen::MatrixXd gram = centered * centered.transpose() / divisor;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
        if (solver.info() != Eigen::Success) throw Error("eigendecomposition failed");
        eigenvalues = solver.eigenvalues();
        eigenvectors.resize(d, n);
        for (long j = 0; j < n; ++j) {
            Eigen::VectorXd v = centered.transpose() * solver.eigenvectors().col(j);
            const double norm = v.norm();
            eigenvectors.col(j) = norm > 0.0 ? Eigen::VectorXd(v / norm) : v;
        }
    }

    state.components.resize(k, d);
    state.explained_variances.resize(k);
    const long last = eigenvalues.size() - 1;
    for (long j = 0; j < k; ++j) {
        state.explained_variances(j) = std::max(eigenvalues(last - j), 0.0);
        Eigen::RowVectorXd comp = eigenvectors.col(last - j).transpose();
        long arg = 0;
        comp.cwiseAbs().maxCoeff(&arg);
        if (comp(arg) < 0.0) comp = -comp;
        state.components.row(j) = comp;
    }
    return state;
}

FeatureMatrix apply(const PcaState& state, const FeatureMatrix& matrix) {
    matrix.validate();
    check_dims(state.dims(), matrix.cols(), "PCA projection");
    FeatureMatrix out;
    out.labels = matrix.labels;
    out.values =
        (matrix.values.rowwise() - state.mean.transpose()) * state.components.transpose();
    out.names.reserve(static_cast<std::size_t>(state.k()));
    for (long j = 0; j < state.k(); ++j) out.names.push_back(pc_name(j, state.k()));
    return out;
}

FeatureMatrix reconstruct(const PcaState& state, const FeatureMatrix& projected) {
    projected.validate();
    check_dims(state.k(), projected.cols(), "PCA back-projection");
    FeatureMatrix out;
    out.labels = projected.labels;
    out.values =
        (projected.values * state.components).rowwise() + state.mean.transpose();
    const int width = static_cast<int>(std::to_string(state.dims() - 1).size());
    out.names.reserve(static_cast<std::size_t>(state.dims()));
    for (long j = 0; j < state.dims(); ++j) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "dim_%0*ld", width, j);
        out.names.push_back(buf);
    }
    return out;
}

}  // namespace nilm
