#include "nilm/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "nilm/errors.hpp"

namespace nilm::nn {

namespace {

constexpr double kProbFloor = 1e-12;
constexpr int kInferenceChunk = 256;

void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimMismatch(std::string(what) + ": output and target shapes differ");
}

}  // namespace

LossResult mse_loss(const Eigen::MatrixXd& output, const Eigen::MatrixXd& target) {
    check_same_shape(output, target, "mse_loss");
    double scale = 1.0 / (static_cast<double>(output.rows()) * output.cols());
    Eigen::MatrixXd diff = output - target;
    LossResult r;
    r.value = diff.squaredNorm() * scale;
    r.grad = 2.0 * scale * diff;
    return r;
}

LossResult cross_entropy_loss(const Eigen::MatrixXd& probabilities,
                              const Eigen::MatrixXd& one_hot_target) {
    check_same_shape(probabilities, one_hot_target, "cross_entropy_loss");
    double inv_batch = 1.0 / static_cast<double>(probabilities.rows());
    Eigen::ArrayXXd floored = probabilities.array().max(kProbFloor);
    LossResult r;
    r.value = -(one_hot_target.array() * floored.log()).sum() * inv_batch;
    r.grad = (-inv_batch * one_hot_target.array() / floored).matrix();
    return r;
}

Eigen::MatrixXd one_hot(const std::vector<int>& class_indices, int n_classes) {
    if (n_classes < 1) throw Error("one_hot needs at least one class");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<long>(class_indices.size()), n_classes);
    for (std::size_t r = 0; r < class_indices.size(); ++r) {
        int c = class_indices[r];
        if (c < 0 || c >= n_classes) throw OutOfRange("class index outside [0, n_classes)");
        out(static_cast<long>(r), c) = 1.0;
    }
    return out;
}

void Sgd::step(const std::vector<ParamRef>& params) {
    for (const ParamRef& p : params) {
        if (p.grad->size() == 0) continue;
        *p.value -= lr_ * *p.grad;
    }
}

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

void Adam::step(const std::vector<ParamRef>& params) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = Eigen::MatrixXd::Zero(params[i].value->rows(), params[i].value->cols());
            v_[i] = Eigen::MatrixXd::Zero(params[i].value->rows(), params[i].value->cols());
        }
    }
    if (m_.size() != params.size())
        throw DimMismatch("optimizer was created for a different parameter list");
    ++t_;
    double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const ParamRef& p = params[i];
        if (p.grad->size() == 0) continue;
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * *p.grad;
        v_[i] = (beta2_ * v_[i].array() + (1.0 - beta2_) * p.grad->array().square()).matrix();
        *p.value -=
            (lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_)).matrix();
    }
}

std::unique_ptr<Optimizer> make_optimizer(const NetConfig& config) {
    if (config.optimizer == OptimizerKind::ADAM) return std::make_unique<Adam>(config.learning_rate);
    return std::make_unique<Sgd>(config.learning_rate);
}

namespace {

LossResult eval_loss(const NetConfig& config, const Eigen::MatrixXd& output,
                     const Eigen::MatrixXd& target) {
    if (config.loss == LossKind::CROSS_ENTROPY) return cross_entropy_loss(output, target);
    return mse_loss(output, target);
}

double loss_over_set(Network& net, const NetConfig& config, const Eigen::MatrixXd& inputs,
                     const Eigen::MatrixXd& targets) {
    double weighted = 0.0;
    for (long start = 0; start < inputs.rows(); start += kInferenceChunk) {
        long rows = std::min<long>(kInferenceChunk, inputs.rows() - start);
        Eigen::MatrixXd out = net.forward(inputs.middleRows(start, rows), false);
        weighted += eval_loss(config, out, targets.middleRows(start, rows)).value * rows;
    }
    return weighted / static_cast<double>(inputs.rows());
}

[[noreturn]] void throw_non_finite(const char* stage, int epoch, double value) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s loss became non-finite (%g) at epoch %d", stage, value,
                  epoch);
    throw NonFiniteLoss(buf);
}

}  // namespace

TrainHistory train_network(Network& net, const Eigen::MatrixXd& inputs,
                           const Eigen::MatrixXd& targets, const Eigen::MatrixXd& val_inputs,
                           const Eigen::MatrixXd& val_targets, const NetConfig& config, Rng& rng) {
    config.validate();
    long n = inputs.rows();
    if (n == 0) throw EmptyTrainSet("train_network needs at least one sample");
    if (inputs.cols() != net.in_width()) throw DimMismatch("input width does not match network");
    if (targets.rows() != n) throw LengthMismatch("inputs and targets row counts differ");
    if (targets.cols() != net.out_width())
        throw DimMismatch("target width does not match network output");
    bool has_val = val_inputs.rows() > 0;
    if (has_val) {
        if (val_inputs.cols() != inputs.cols() || val_targets.cols() != targets.cols())
            throw DimMismatch("validation widths do not match training widths");
        if (val_targets.rows() != val_inputs.rows())
            throw LengthMismatch("validation inputs and targets row counts differ");
    }

    std::vector<ParamRef> params = net.params();
    std::vector<Eigen::MatrixXd*> buffers = net.state_buffers();
    std::unique_ptr<Optimizer> opt = make_optimizer(config);

    std::vector<Eigen::MatrixXd> best_params, best_buffers;
    auto snapshot = [&] {
        best_params.clear();
        best_buffers.clear();
        for (const ParamRef& p : params) best_params.push_back(*p.value);
        for (const Eigen::MatrixXd* b : buffers) best_buffers.push_back(*b);
    };

    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainHistory history;
    double best_monitor = 0.0;
    int bad_epochs = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double weighted_loss = 0.0;
        for (long start = 0; start < n; start += config.batch_size) {
            long rows = std::min<long>(config.batch_size, n - start);
            Eigen::MatrixXd x(rows, inputs.cols());
            Eigen::MatrixXd t(rows, targets.cols());
            for (long r = 0; r < rows; ++r) {
                auto src = static_cast<long>(order[static_cast<std::size_t>(start + r)]);
                x.row(r) = inputs.row(src);
                t.row(r) = targets.row(src);
            }
            if (config.input_noise_std > 0.0)
                for (long r = 0; r < rows; ++r)
                    for (long c = 0; c < x.cols(); ++c)
                        x(r, c) += config.input_noise_std * rng.normal();

            net.zero_grads();
            Eigen::MatrixXd out = net.forward(x, true);
            LossResult loss = eval_loss(config, out, t);
            if (!std::isfinite(loss.value)) throw_non_finite("training batch", epoch, loss.value);
            net.backward(loss.grad);
            if (config.l2 > 0.0)
                for (const ParamRef& p : params)
                    if (p.weight_decay) {
                        if (p.grad->size() == 0)
                            *p.grad = config.l2 * *p.value;
                        else
                            *p.grad += config.l2 * *p.value;
                    }
            opt->step(params);
            weighted_loss += loss.value * rows;
        }
        double train_loss = weighted_loss / static_cast<double>(n);
        double val_loss = std::numeric_limits<double>::quiet_NaN();
        if (has_val) val_loss = loss_over_set(net, config, val_inputs, val_targets);

        double monitor = has_val ? val_loss : train_loss;
        if (!std::isfinite(monitor))
            throw_non_finite(has_val ? "validation" : "training", epoch, monitor);
        history.epochs.push_back({train_loss, val_loss});

        if (history.best_epoch < 0 || monitor < best_monitor) {
            best_monitor = monitor;
            history.best_epoch = epoch;
            bad_epochs = 0;
            snapshot();
        } else {
            ++bad_epochs;
        }
        if (bad_epochs > config.patience) break;
    }

    for (std::size_t i = 0; i < params.size(); ++i) *params[i].value = best_params[i];
    for (std::size_t i = 0; i < buffers.size(); ++i) *buffers[i] = best_buffers[i];
    history.best_monitor_loss = best_monitor;
    return history;
}

FeatureMatrix encode(Network& net, const FeatureMatrix& segments) {
    if (net.coding_index < 0) throw Error("network has no coding layer");
    if (segments.values.cols() != net.in_width())
        throw DimMismatch("segment width does not match network input");
    auto depth = static_cast<std::size_t>(net.coding_index) + 1;
    long code_width = static_cast<long>(net.layer(depth - 1).out_channels()) *
                      net.layer(depth - 1).out_length();

    FeatureMatrix out;
    out.values.resize(segments.values.rows(), code_width);
    for (long start = 0; start < segments.values.rows(); start += kInferenceChunk) {
        long rows = std::min<long>(kInferenceChunk, segments.values.rows() - start);
        out.values.middleRows(start, rows) =
            net.forward_to(segments.values.middleRows(start, rows), depth);
    }
    int width = 1;
    for (long v = std::max<long>(code_width - 1, 1); v >= 10; v /= 10) ++width;
    for (long c = 0; c < code_width; ++c) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "code_%0*d", width, static_cast<int>(c));
        out.names.emplace_back(buf);
    }
    out.labels = segments.labels;
    return out;
}

std::vector<int> predict_cnn(Network& net, const Eigen::MatrixXd& inputs) {
    if (inputs.cols() != net.in_width()) throw DimMismatch("input width does not match network");
    std::vector<int> out(static_cast<std::size_t>(inputs.rows()));
    for (long start = 0; start < inputs.rows(); start += kInferenceChunk) {
        long rows = std::min<long>(kInferenceChunk, inputs.rows() - start);
        Eigen::MatrixXd probs = net.forward(inputs.middleRows(start, rows), false);
        for (long r = 0; r < rows; ++r) {
            long best = 0;
            for (long c = 1; c < probs.cols(); ++c)
                if (probs(r, c) > probs(r, best)) best = c;
            out[static_cast<std::size_t>(start + r)] = static_cast<int>(best);
        }
    }
    return out;
}

}  // namespace nilm::nn
