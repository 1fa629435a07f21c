#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nilm/errors.hpp"
#include "nilm/rng.hpp"

namespace nilm::nn {

/// Activations flow between layers as batch x (channels * length) matrices
/// in channel-major layout: column c * length + t holds channel c at time t.
/// Dense layers treat their width as channels = width, length = 1, which is
/// also how batch normalization unifies the dense and convolutional cases.

/// A view of one parameter tensor and its gradient accumulator. Gradients
/// are allocated lazily on the first backward pass, so inference-only
/// networks pay for values only; `grad` may therefore be empty until then.
struct ParamRef {
    Eigen::MatrixXd* value;
    Eigen::MatrixXd* grad;
    bool weight_decay;  // L2 regularization applies to weight matrices only
};

class Layer {
public:
    Layer(int in_channels, int in_length, int out_channels, int out_length);
    virtual ~Layer() = default;

    int in_channels() const { return in_channels_; }
    int in_length() const { return in_length_; }
    int out_channels() const { return out_channels_; }
    int out_length() const { return out_length_; }
    long in_width() const { return static_cast<long>(in_channels_) * in_length_; }
    long out_width() const { return static_cast<long>(out_channels_) * out_length_; }

    virtual std::string kind() const = 0;
    /// Computes the layer output; with training=true, caches whatever the
    /// following backward() needs.
    virtual Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training) = 0;
    /// Propagates gradients; accumulates into parameter grads and returns
    /// the gradient with respect to the input of the last training forward.
    virtual Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) = 0;
    virtual std::vector<ParamRef> params() { return {}; }
    /// Non-parameter state kept across training (batch-norm running stats);
    /// included in best-model snapshots and serialization.
    virtual std::vector<Eigen::MatrixXd*> state_buffers() { return {}; }

protected:
    void check_input(const Eigen::MatrixXd& x) const;  // throws DimMismatch

    int in_channels_, in_length_, out_channels_, out_length_;
};

/// Fully connected layer, y = x W^T + b. Glorot-uniform initialized.
class Dense : public Layer {
public:
    Dense(int in_width, int out_width, Rng& rng);

    std::string kind() const override { return "dense"; }
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training) override;
    Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;
    std::vector<ParamRef> params() override;

    Eigen::MatrixXd w;  // out x in
    Eigen::MatrixXd b;  // out x 1

private:
    Eigen::MatrixXd x_cache_, gw_, gb_;
};

/// 1-D convolution with stride 1 and same-length zero padding (odd kernel).
class Conv1d : public Layer {
public:
    Conv1d(int in_channels, int out_channels, int kernel, int length, Rng& rng);

    std::string kind() const override { return "conv1d"; }
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training) override;
    Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;
    std::vector<ParamRef> params() override;

    int kernel() const { return kernel_; }

    Eigen::MatrixXd w;  // out_channels x (in_channels * kernel)
    Eigen::MatrixXd b;  // out_channels x 1

private:
    Eigen::MatrixXd im2col(const Eigen::MatrixXd& x) const;

    int kernel_;
    Eigen::MatrixXd col_cache_, gw_, gb_;
    long batch_cache_ = 0;
};

/// Non-overlapping max pooling along the time axis; ties keep the first
/// maximum so the backward scatter is unambiguous.
class MaxPool1d : public Layer {
public:
    MaxPool1d(int channels, int in_length, int factor);

    std::string kind() const override { return "maxpool1d"; }
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training) override;
    Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;

    int factor() const { return factor_; }

private:
    int factor_;
    Eigen::MatrixXi argmax_;
    long in_width_cache_ = 0;
};

/// Nearest-neighbor upsampling: repeats every element `factor` times; the
/// backward pass sums gradients over each repeated window.
class Upsample1d : public Layer {
public:
    Upsample1d(int channels, int in_length, int factor);

    std::string kind() const override { return "upsample1d"; }
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training) override;
    Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;

    int factor() const { return factor_; }

private:
    int factor_;
};

/// Batch normalization over batch x length per channel, with running
/// statistics (momentum 0.1, epsilon 1e-5) used in inference mode.
class BatchNorm : public Layer {
public:
    BatchNorm(int channels, int length);

    std::string kind() const override { return "batchnorm"; }
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training) override;
    Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;
    std::vector<ParamRef> params() override;
    std::vector<Eigen::MatrixXd*> state_buffers() override;

    static constexpr double kEpsilon = 1e-5;
    static constexpr double kMomentum = 0.1;

    Eigen::MatrixXd gamma, beta;              // channels x 1
    Eigen::MatrixXd running_mean, running_var;  // channels x 1

private:
    Eigen::MatrixXd xhat_cache_;
    Eigen::VectorXd inv_std_cache_;
    Eigen::MatrixXd ggamma_, gbeta_;
};

class LeakyReLU : public Layer {
public:
    LeakyReLU(int channels, int length, double slope);

    std::string kind() const override { return "leakyrelu"; }
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training) override;
    Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;

    double slope() const { return slope_; }

private:
    double slope_;
    Eigen::MatrixXd x_cache_;
};

/// Row-wise softmax over the full layer width.
class Softmax : public Layer {
public:
    explicit Softmax(int width);

    std::string kind() const override { return "softmax"; }
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training) override;
    Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;

private:
    Eigen::MatrixXd y_cache_;
};

}  // namespace nilm::nn
