#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nilm/core.hpp"
#include "nilm/nn/layers.hpp"
#include "nilm/transform.hpp"

namespace nilm::nn {

/// The per-layer pool factors of the frequency-derived convolution stack:
/// the prime factorization of f_s / f_0, sorted descending. Applying every
/// pool to one segment leaves exactly cycles_per_segment time steps.
struct FactorVector {
    std::vector<int> factors;

    int layer_count() const { return static_cast<int>(factors.size()); }
    long product() const;
};

FactorVector derive_cnn_architecture(const SamplingContext& context);

enum class Arch : std::uint8_t { AE, CAE, CNN };
enum class OptimizerKind : std::uint8_t { SGD, ADAM };
enum class LossKind : std::uint8_t { MSE, CROSS_ENTROPY };

std::string arch_name(Arch a);

/// Hyperparameters of one network: architecture, divisor/pool schedule, and
/// the training knobs (optimizer, loss, rates, noise, early stopping).
struct NetConfig {
    Arch architecture = Arch::CNN;
    std::vector<double> factors;  // AE: encode divisors (rationals allowed);
                                  // CAE/CNN: integral pool factors
    bool batch_norm = true;
    double leaky_slope = 0.01;
    double l2 = 0.0;
    NormKind input_norm = NormKind::Variance;
    double learning_rate = 0.001;
    int batch_size = 30;
    double input_noise_std = 0.0;  // Gaussian, added to training inputs only
    OptimizerKind optimizer = OptimizerKind::SGD;
    LossKind loss = LossKind::CROSS_ENTROPY;
    int epochs = 200;
    int patience = 10;                // early-stopping tolerance, in epochs
    std::vector<int> conv_channels;   // per conv block; empty = 8,16,... capped at 64
    int input_channels = 1;           // CNN only: 1 = current, 2 = current + voltage
    std::uint64_t seed = 1;           // forked into the training stream

    /// Throws Error on non-positive rates/sizes or a loss incompatible with
    /// the architecture (cross-entropy is CNN-only, autoencoders use MSE).
    void validate() const;
};

/// A feedforward stack of layers. Adjacent layers are checked for matching
/// flattened widths when added; an optional coding index marks the layer
/// whose output serves as the learned feature code (AE/CAE).
class Network {
public:
    Network(int in_channels, int in_length);

    void add(std::unique_ptr<Layer> layer);

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training);
    /// Gradient of the last training-mode forward; accumulates into params.
    Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out);
    /// Inference-mode forward through the first `layer_count` layers.
    Eigen::MatrixXd forward_to(const Eigen::MatrixXd& x, std::size_t layer_count);

    std::vector<ParamRef> params();
    std::vector<Eigen::MatrixXd*> state_buffers();
    void zero_grads();

    int in_channels() const { return in_channels_; }
    int in_length() const { return in_length_; }
    long in_width() const { return static_cast<long>(in_channels_) * in_length_; }
    long out_width() const;
    std::size_t size() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }
    const Layer& layer(std::size_t i) const { return *layers_[i]; }

    int coding_index = -1;  // layer whose output is the feature code, or -1

private:
    int in_channels_, in_length_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

/// Fully connected autoencoder over a flat input. Encoder widths follow
/// input_dim / cumprod(encode_factors); rational factors are allowed as long
/// as every stage width stays integral (else NonIntegralWidth). The decoder
/// mirrors the widths in reverse; the final reconstruction layer is linear.
Network build_ae(int input_dim, const std::vector<double>& encode_factors,
                 const NetConfig& config, Rng& rng);

/// Convolutional autoencoder on the single-channel segment waveform: three
/// [conv -> norm -> activation -> pool] encoder blocks, one kernel-1 conv
/// collapsing to a single-channel code, and a mirrored upsampling decoder.
Network build_cae(const SamplingContext& context, const std::vector<int>& pool_factors,
                  const NetConfig& config, Rng& rng);

/// End-to-end classifier: one [conv -> norm -> activation -> pool] block per
/// factor (kernel = 2 * factor + 1), leaving cycles_per_segment time steps,
/// then a dense layer and softmax over n_classes.
Network build_cnn(const SamplingContext& context, const FactorVector& factors, int n_classes,
                  const NetConfig& config, Rng& rng);

/// Named hyperparameter presets for the two reference sampling contexts
/// ("ukdale-ae", "blond-ae", "ukdale-cae", "blond-cae", "ukdale-cnn",
/// "blond-cnn") and the context each preset was tuned for.
NetConfig preset_config(const std::string& name);
SamplingContext preset_context(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace nilm::nn
