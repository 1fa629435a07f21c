#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "nilm/core.hpp"

namespace nilm {

/// One extracted feature vector with a name per dimension.
struct FeatureVector {
    std::vector<double> values;
    std::vector<std::string> names;

    /// Throws LengthMismatch or Error (non-finite values).
    void validate() const;
};

/// Row-per-sample feature matrix with shared column names and per-row labels.
struct FeatureMatrix {
    Eigen::MatrixXd values;          // rows x dims
    std::vector<std::string> names;  // size dims
    std::vector<std::string> labels; // size rows

    long rows() const { return values.rows(); }
    long cols() const { return values.cols(); }

    /// Throws LengthMismatch (name/label counts) or Error (non-finite).
    void validate() const;
};

/// Selects which electrical feature groups extract_handcrafted emits. The
/// default enables all groups; harmonic_count also bounds the spectral
/// flatness band (bins up to harmonic_count * f_0).
struct HandcraftedConfig {
    bool power = true;        // active P, apparent S, reactive Q, admittance Y
    bool shape = true;        // crest factor, form factor
    bool phase = true;        // fundamental phase shift between v and i
    bool harmonics = true;    // odd+even harmonic magnitudes relative to the fundamental
    int harmonic_count = 15;  // harmonics 1..harmonic_count
    bool thd = true;          // total harmonic distortion
    bool spectral_flatness = true;
    bool cycle_rms = true;    // mean/std/max/min of the per-cycle RMS trajectory
    bool inrush = true;       // max-inrush-ratio, inrush-current-ratio

    /// Throws EmptyConfig if every group is disabled, Error on bad counts.
    void validate() const;
};

/// RMS of the current over each mains cycle; length = cycles_per_segment.
std::vector<double> cycle_rms(const EventSegment& segment);

/// Electrical summary features of one segment per the enabled groups.
/// Ratio features whose denominator is zero (silent current) yield 0; an
/// all-zero voltage channel throws DegenerateSignal.
FeatureVector extract_handcrafted(const EventSegment& segment, const HandcraftedConfig& config);

/// The per-cycle RMS trajectory as a feature vector (one value per cycle).
FeatureVector rms25(const EventSegment& segment);

/// `dims` current samples at random distinct indices, sorted by index. The
/// generator is taken by value so every segment sampled with the same seed
/// uses the same index set (one fixed sub-sampling per experiment).
FeatureVector random_subsample(const EventSegment& segment, int dims, Rng rng);

using FeatureExtractor = std::function<FeatureVector(const EventSegment&)>;

/// Applies `extractor` to every segment; row order matches dataset order and
/// labels are copied. Rows are computed in parallel (NILM_THREADS caps the
/// worker count) with deterministic placement.
FeatureMatrix extract_matrix(const LabeledDataset& dataset, const FeatureExtractor& extractor);

/// The flattened raw current channel as a feature matrix (one column per
/// sample index); input representation for the AE/CAE/CNN/PCA models.
FeatureMatrix raw_current_matrix(const LabeledDataset& dataset);

}  // namespace nilm
