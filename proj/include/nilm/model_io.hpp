#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nilm/classify.hpp"
#include "nilm/core.hpp"
#include "nilm/eval.hpp"
#include "nilm/nn/network.hpp"
#include "nilm/transform.hpp"

namespace nilm {

/// Everything needed to classify fresh segments with one trained model: the
/// feature stage (per-kind state), optional normalizers, and either a
/// classical classifier head or an end-to-end network. Serialized in the
/// versioned "NILMMDL1" binary container with exact float round-trips.
struct TrainedPipeline {
    std::string model;
    std::string classifier;  // classifier name, or "cnn" for the end-to-end model
    ModelKind kind = ModelKind::Handcrafted;
    SamplingContext context{2000, 50, 0.5};
    std::vector<std::string> class_names;

    std::optional<HandcraftedConfig> handcrafted;
    std::vector<int> subsample_indices;           // Subsample only
    std::optional<PcaState> pca;                  // Pca only
    std::optional<NormalizerState> input_norm;    // network raw-input normalization
    std::optional<NormalizerState> feature_norm;  // classifier-side normalization
    std::shared_ptr<nn::Network> network;         // Ae/Cae/Cnn only
    std::optional<TrainedClassifier> head;        // absent for the end-to-end cnn
};

void save_pipeline(const TrainedPipeline& pipeline, const std::string& path);
TrainedPipeline load_pipeline(const std::string& path);

/// Runs the pipeline's feature stage and head on fresh segments (labels are
/// ignored) and returns one predicted class name per segment.
std::vector<std::string> predict_pipeline(TrainedPipeline& pipeline,
                                          const std::vector<EventSegment>& segments);

}  // namespace nilm
