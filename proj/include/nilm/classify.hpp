#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "nilm/features.hpp"

namespace nilm {

enum class ClassifierKind : std::uint8_t { Knn, Lda, Svm, Bdt };

/// Canonical lowercase name ("knn", "lda", "svm", "bdt") and its inverse.
std::string classifier_name(ClassifierKind kind);
ClassifierKind parse_classifier(const std::string& name);

struct ClassifierConfig {
    int knn_k = 5;
    double lda_shrinkage = -1.0;  // < 0 selects 1e-6 * trace(cov) / dims
    double svm_cost = 1.0;        // soft-margin penalty C
    int svm_epochs = 500;
    int bdt_max_depth = 16;
    int bdt_min_split = 2;        // nodes smaller than this become leaves

    void validate() const;
};

/// One node of a binary decision tree; dim == -1 marks a leaf.
struct BdtNode {
    int dim = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf_class = -1;
};

/// One one-vs-one hyperplane; decision >= 0 votes for pos (the smaller class
/// index), otherwise neg.
struct SvmPair {
    int pos = 0;
    int neg = 0;
    Eigen::VectorXd w;
    double bias = 0.0;
};

/// A fitted classifier of one of the four kinds, with the per-kind parameter
/// blocks below. Only the block matching `kind` is populated.
struct TrainedClassifier {
    ClassifierKind kind = ClassifierKind::Knn;
    std::vector<std::string> classes;  // sorted; prediction indexes into this
    long dims = 0;

    // KNN: the stored training set
    Eigen::MatrixXd knn_points;
    std::vector<int> knn_labels;
    int knn_k = 5;

    // LDA: linear discriminants from class means and pooled covariance
    Eigen::MatrixXd lda_means;    // classes x dims
    Eigen::MatrixXd lda_cov_inv;  // dims x dims
    Eigen::VectorXd lda_log_priors;

    // SVM: one hyperplane per unordered class pair
    std::vector<SvmPair> svm_pairs;

    // BDT: node 0 is the root
    std::vector<BdtNode> bdt_nodes;
};

/// Fits a classifier of the requested kind. Deterministic, including under
/// permutations of the training rows (accumulations run in a canonical row
/// order and every tie-break is documented). Throws SingleClass,
/// EmptyTrainSet, or Error on bad hyperparameters.
TrainedClassifier train_classifier(ClassifierKind kind, const FeatureMatrix& train,
                                   const ClassifierConfig& config, Rng& rng);

/// One label per row. Ties resolve to the smallest class index: KNN vote
/// ties, LDA discriminant ties, SVM vote ties (after the aggregate-margin
/// tie-break), and BDT leaf majorities. Throws DimMismatch.
std::vector<std::string> predict(const TrainedClassifier& model, const FeatureMatrix& matrix);

/// Internals of the one-vs-one SVM fit, exposed so tests can assert the
/// monotone objective guarantee. y entries are +1/-1.
struct SvmFitResult {
    Eigen::VectorXd w;
    double bias = 0.0;
    std::vector<double> objective_history;  // one entry per epoch, non-increasing
};
SvmFitResult fit_linear_svm(const Eigen::MatrixXd& x, const std::vector<int>& y, double cost,
                            int epochs);

}  // namespace nilm
