#pragma once

#include <string>
#include <vector>

#include "nilm/classify.hpp"
#include "nilm/core.hpp"
#include "nilm/features.hpp"
#include "nilm/nn/network.hpp"
#include "nilm/rng.hpp"

namespace nilm {

struct SplitSpec {
    double test_fraction = 0.2;
    double validation_fraction = 0.2;  // of the training remainder
    bool stratified = true;

    /// Throws Error unless both fractions lie strictly inside (0, 1).
    void validate() const;
};

/// Row indices into the source dataset, each list ascending; validation is
/// empty unless the split was asked for one.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

/// Seeded shuffled split preserving per-class proportions (within one sample
/// per class). Every class needs >= 2 samples, >= 3 when with_validation.
Split stratified_split(const LabeledDataset& dataset, const SplitSpec& spec,
                       bool with_validation, Rng& rng);

/// Dataset restricted to the given rows; class_names keeps only present
/// classes (sorted).
LabeledDataset subset(const LabeledDataset& dataset, const std::vector<std::size_t>& rows);

struct ClassMetrics {
    std::string class_name;
    long tp = 0, fp = 0, fn = 0;
    double precision = 0, recall = 0, f_score = 0;
};

struct MetricsReport {
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0, macro_recall = 0, macro_f = 0;
};

/// One-vs-rest counts per class; precision/recall with a zero denominator
/// are 0, as is F when precision+recall is 0. Macro values are unweighted
/// means over all listed classes, including ones absent from `truth`.
MetricsReport macro_metrics(const std::vector<std::string>& truth,
                            const std::vector<std::string>& predicted,
                            const std::vector<std::string>& classes);

struct ConfusionMatrix {
    std::vector<std::string> classes;
    Eigen::MatrixXi counts;      // rows = true class, cols = predicted
    Eigen::MatrixXi normalized;  // each non-empty row sums to exactly 100
};

ConfusionMatrix confusion(const std::vector<std::string>& truth,
                          const std::vector<std::string>& predicted,
                          const std::vector<std::string>& classes);

enum class ModelKind : std::uint8_t { Handcrafted, Ae, Cae, Cnn, Subsample, Rms25, Pca };

std::string model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

enum class FeatureNorm : std::uint8_t { None, Variance, MaxAbs };

/// Declarative description of one classification model: how features are
/// produced from segments, how they are normalized, and which classifiers
/// consume them. The end-to-end CNN ignores the classifier list.
struct ModelSpec {
    ModelKind kind = ModelKind::Handcrafted;
    std::vector<ClassifierKind> classifiers{ClassifierKind::Knn, ClassifierKind::Lda,
                                            ClassifierKind::Svm, ClassifierKind::Bdt};
    ClassifierConfig classifier_config;

    HandcraftedConfig handcrafted;  // Handcrafted only
    int subsample_dims = 212;       // Subsample only
    int pca_k = 212;                // Pca only; clamped to min(n_train - 1, dims) at fit

    // Feature normalization before the classifiers (networks normalize their
    // raw inputs via net.input_norm instead).
    FeatureNorm feature_norm = FeatureNorm::None;
    bool feature_norm_uses_std = false;

    nn::NetConfig net;  // Ae / Cae / Cnn only

    std::string name() const { return model_kind_name(kind); }

    /// Swaps in the conventional defaults for the given kind (z-scored
    /// handcrafted features, matching network architecture, raw others).
    static ModelSpec for_kind(ModelKind kind);
};

struct PerClassRow {
    std::string class_name;
    long test_count = 0;
    double mean_power = 0;  // mean active power of the class's test segments
};

struct EvalReport {
    std::string model;
    std::string classifier;  // classifier name, or "cnn" for the end-to-end model
    MetricsReport metrics;
    ConfusionMatrix matrix;
    std::vector<PerClassRow> per_class;
    double runtime_seconds = 0;  // console information only; never serialized
};

struct TrainedPipeline;

/// Runs every model on one shared train/test split (the CNN carves a
/// validation set out of the shared training rows for early stopping) and
/// reports macro metrics per model x classifier, in input order. When
/// trained_out is non-null it receives one serializable pipeline per report.
std::vector<EvalReport> run_benchmark(const LabeledDataset& dataset,
                                      const std::vector<ModelSpec>& models, const SplitSpec& spec,
                                      Rng& rng, std::vector<TrainedPipeline>* trained_out = nullptr);

}  // namespace nilm
