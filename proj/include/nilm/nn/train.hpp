#pragma once

#include <memory>
#include <vector>

#include "nilm/features.hpp"
#include "nilm/nn/network.hpp"
#include "nilm/rng.hpp"

namespace nilm::nn {

/// Scalar loss plus its gradient with respect to the network output.
struct LossResult {
    double value;
    Eigen::MatrixXd grad;
};

/// Mean squared error over every entry (batch x width).
LossResult mse_loss(const Eigen::MatrixXd& output, const Eigen::MatrixXd& target);

/// Categorical cross-entropy of probability rows against one-hot targets,
/// averaged over the batch; probabilities are floored at 1e-12.
LossResult cross_entropy_loss(const Eigen::MatrixXd& probabilities,
                              const Eigen::MatrixXd& one_hot_target);

Eigen::MatrixXd one_hot(const std::vector<int>& class_indices, int n_classes);

/// Gradient-descent update rule applied to a fixed parameter list; stateful
/// optimizers key their slots by position, so the list must keep its order.
class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(const std::vector<ParamRef>& params) = 0;
};

class Sgd : public Optimizer {
public:
    explicit Sgd(double learning_rate) : lr_(learning_rate) {}
    void step(const std::vector<ParamRef>& params) override;

private:
    double lr_;
};

class Adam : public Optimizer {
public:
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8);
    void step(const std::vector<ParamRef>& params) override;

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Eigen::MatrixXd> m_, v_;
};

std::unique_ptr<Optimizer> make_optimizer(const NetConfig& config);

struct EpochStats {
    double train_loss;
    double validation_loss;  // NaN when trained without a validation set
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;           // epoch whose parameters the network ends with
    double best_monitor_loss = 0;  // validation loss there (train loss if no val set)
};

/// Mini-batch training with the configured optimizer and loss. Gaussian
/// noise of std input_noise_std is added to inputs (never targets) during
/// training; the L2 penalty is added to weight gradients. Early stopping
/// monitors validation loss (train loss when validation is empty) and the
/// parameters from the best epoch are restored before returning. Pass
/// empty matrices to train without validation. Throws NonFiniteLoss if a
/// loss stops being finite.
TrainHistory train_network(Network& net, const Eigen::MatrixXd& inputs,
                           const Eigen::MatrixXd& targets, const Eigen::MatrixXd& val_inputs,
                           const Eigen::MatrixXd& val_targets, const NetConfig& config, Rng& rng);

/// Coding-layer activations (inference mode) of each row, as features
/// code_000...; requires a network built with a coding layer.
FeatureMatrix encode(Network& net, const FeatureMatrix& segments);

/// Argmax class index of the softmax output per row; ties break toward the
/// smallest index.
std::vector<int> predict_cnn(Network& net, const Eigen::MatrixXd& inputs);

}  // namespace nilm::nn
