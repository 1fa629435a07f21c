#include "nilm/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <utility>

#include "nilm/errors.hpp"

namespace nilm::nn {

long FactorVector::product() const {
    long p = 1;
    for (int f : factors) p *= f;
    return p;
}

FactorVector derive_cnn_architecture(const SamplingContext& context) {
    int n = context.samples_per_cycle();
    FactorVector out;
    for (int d = 2; static_cast<long>(d) * d <= n; ++d) {
        while (n % d == 0) {
            out.factors.push_back(d);
            n /= d;
        }
    }
    if (n > 1) out.factors.push_back(n);
    std::sort(out.factors.begin(), out.factors.end(), std::greater<int>());
    return out;
}

std::string arch_name(Arch a) {
    switch (a) {
        case Arch::AE: return "ae";
        case Arch::CAE: return "cae";
        case Arch::CNN: return "cnn";
    }
    throw Error("unknown architecture");
}

void NetConfig::validate() const {
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0))
        throw Error("leaky_slope must lie in [0, 1)");
    if (!(l2 >= 0.0) || !std::isfinite(l2)) throw Error("l2 must be a finite nonnegative value");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw Error("learning_rate must be positive");
    if (batch_size < 1) throw Error("batch_size must be at least 1");
    if (!(input_noise_std >= 0.0) || !std::isfinite(input_noise_std))
        throw Error("input_noise_std must be nonnegative");
    if (epochs < 1) throw Error("epochs must be at least 1");
    if (patience < 0) throw Error("patience must be nonnegative");
    if (input_channels != 1 && input_channels != 2)
        throw Error("input_channels must be 1 or 2");
    for (int c : conv_channels)
        if (c < 1) throw Error("conv_channels entries must be positive");
    if (loss == LossKind::CROSS_ENTROPY && architecture != Arch::CNN)
        throw Error("cross-entropy loss requires the cnn architecture");
}

Network::Network(int in_channels, int in_length)
    : in_channels_(in_channels), in_length_(in_length) {
    if (in_channels < 1 || in_length < 1) throw Error("network input dimensions must be positive");
}

long Network::out_width() const {
    if (layers_.empty()) return in_width();
    const Layer& tail = *layers_.back();
    return static_cast<long>(tail.out_channels()) * tail.out_length();
}

void Network::add(std::unique_ptr<Layer> layer) {
    long expect = out_width();
    long got = static_cast<long>(layer->in_channels()) * layer->in_length();
    if (got != expect) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "layer %zu expects width %ld but receives %ld",
                      layers_.size(), got, expect);
        throw DimMismatch(buf);
    }
    layers_.push_back(std::move(layer));
}

Eigen::MatrixXd Network::forward(const Eigen::MatrixXd& x, bool training) {
    Eigen::MatrixXd h = x;
    for (auto& l : layers_) h = l->forward(h, training);
    return h;
}

Eigen::MatrixXd Network::backward(const Eigen::MatrixXd& grad_out) {
    Eigen::MatrixXd g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

Eigen::MatrixXd Network::forward_to(const Eigen::MatrixXd& x, std::size_t layer_count) {
    if (layer_count > layers_.size()) throw OutOfRange("layer_count exceeds network depth");
    Eigen::MatrixXd h = x;
    for (std::size_t i = 0; i < layer_count; ++i) h = layers_[i]->forward(h, false);
    return h;
}

std::vector<ParamRef> Network::params() {
    std::vector<ParamRef> out;
    for (auto& l : layers_) {
        auto p = l->params();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

std::vector<Eigen::MatrixXd*> Network::state_buffers() {
    std::vector<Eigen::MatrixXd*> out;
    for (auto& l : layers_) {
        auto b = l->state_buffers();
        out.insert(out.end(), b.begin(), b.end());
    }
    return out;
}

void Network::zero_grads() {
    for (auto& ref : params())
        if (ref.grad->size() > 0) ref.grad->setZero();
}

namespace {

std::vector<int> conv_channel_schedule(const NetConfig& config, std::size_t blocks) {
    if (!config.conv_channels.empty()) {
        if (config.conv_channels.size() != blocks)
            throw Error("conv_channels must list one channel count per convolution block");
        return config.conv_channels;
    }
    std::vector<int> out;
    int c = 8;
    for (std::size_t i = 0; i < blocks; ++i) {
        out.push_back(c);
        c = std::min(c * 2, 64);
    }
    return out;
}

std::vector<int> ae_widths(int input_dim, const std::vector<double>& encode_factors) {
    if (input_dim < 1) throw Error("autoencoder input_dim must be positive");
    if (encode_factors.empty()) throw Error("encode_factors must not be empty");
    std::vector<int> widths{input_dim};
    for (double f : encode_factors) {
        if (!(f > 0.0) || !std::isfinite(f)) throw Error("encode factors must be positive");
        double real = widths.back() / f;
        long next = std::llround(real);
        if (next < 1 || std::abs(real - static_cast<double>(next)) > 1e-9) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "width %d / factor %g is not a positive integer",
                          widths.back(), f);
            throw NonIntegralWidth(buf);
        }
        widths.push_back(static_cast<int>(next));
    }
    return widths;
}

void add_dense_block(Network& net, int in_w, int out_w, const NetConfig& config, Rng& rng) {
    net.add(std::make_unique<Dense>(in_w, out_w, rng));
    if (config.batch_norm) net.add(std::make_unique<BatchNorm>(out_w, 1));
    net.add(std::make_unique<LeakyReLU>(out_w, 1, config.leaky_slope));
}

// conv -> [batch norm] -> leaky ReLU at the given geometry; kernel = 2*factor+1.
int add_conv_block(Network& net, int in_ch, int out_ch, int factor, int length,
                   const NetConfig& config, Rng& rng) {
    net.add(std::make_unique<Conv1d>(in_ch, out_ch, 2 * factor + 1, length, rng));
    if (config.batch_norm) net.add(std::make_unique<BatchNorm>(out_ch, length));
    net.add(std::make_unique<LeakyReLU>(out_ch, length, config.leaky_slope));
    return out_ch;
}

int pooled_length(int length, int factor) {
    if (factor < 1 || length % factor != 0) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "length %d is not divisible by pool factor %d", length,
                      factor);
        throw NonIntegralWidth(buf);
    }
    return length / factor;
}

}  // namespace

Network build_ae(int input_dim, const std::vector<double>& encode_factors,
                 const NetConfig& config, Rng& rng) {
    config.validate();
    std::vector<int> widths = ae_widths(input_dim, encode_factors);
    std::size_t n = widths.size() - 1;

    Network net(input_dim, 1);
    for (std::size_t i = 0; i < n; ++i)
        add_dense_block(net, widths[i], widths[i + 1], config, rng);
    net.coding_index = static_cast<int>(net.size()) - 1;

    for (std::size_t j = n - 1; j >= 1; --j)
        add_dense_block(net, widths[j + 1], widths[j], config, rng);
    net.add(std::make_unique<Dense>(widths[1], widths[0], rng));
    return net;
}

Network build_cae(const SamplingContext& context, const std::vector<int>& pool_factors,
                  const NetConfig& config, Rng& rng) {
    config.validate();
    if (pool_factors.empty()) throw Error("pool_factors must not be empty");
    std::size_t n = pool_factors.size();
    std::vector<int> channels = conv_channel_schedule(config, n);

    int length = context.samples_per_segment();
    Network net(1, length);
    int ch = 1;
    for (std::size_t i = 0; i < n; ++i) {
        ch = add_conv_block(net, ch, channels[i], pool_factors[i], length, config, rng);
        int next = pooled_length(length, pool_factors[i]);
        net.add(std::make_unique<MaxPool1d>(ch, length, pool_factors[i]));
        length = next;
    }
    net.add(std::make_unique<Conv1d>(ch, 1, 1, length, rng));
    net.coding_index = static_cast<int>(net.size()) - 1;
    ch = 1;

    for (std::size_t j = n; j-- > 0;) {
        net.add(std::make_unique<Upsample1d>(ch, length, pool_factors[j]));
        length *= pool_factors[j];
        ch = add_conv_block(net, ch, channels[j], pool_factors[j], length, config, rng);
    }
    net.add(std::make_unique<Conv1d>(ch, 1, 1, length, rng));
    return net;
}

Network build_cnn(const SamplingContext& context, const FactorVector& factors, int n_classes,
                  const NetConfig& config, Rng& rng) {
    config.validate();
    if (n_classes < 2) throw SingleClass("a classifier network needs at least two classes");
    if (factors.factors.empty()) throw Error("factor vector must not be empty");
    std::size_t n = factors.factors.size();
    std::vector<int> channels = conv_channel_schedule(config, n);

    int length = context.samples_per_segment();
    Network net(config.input_channels, length);
    int ch = config.input_channels;
    for (std::size_t i = 0; i < n; ++i) {
        int f = factors.factors[i];
        ch = add_conv_block(net, ch, channels[i], f, length, config, rng);
        int next = pooled_length(length, f);
        net.add(std::make_unique<MaxPool1d>(ch, length, f));
        length = next;
    }
    net.add(std::make_unique<Dense>(ch * length, n_classes, rng));
    net.add(std::make_unique<Softmax>(n_classes));
    return net;
}

namespace {

struct Preset {
    NetConfig config;
    std::uint32_t sampling_hz;
};

Preset make_preset(const std::string& name) {
    constexpr std::uint32_t kUkdaleHz = 16000;
    constexpr std::uint32_t kBlondHz = 50000;
    NetConfig c;
    if (name == "ukdale-ae") {
        c.architecture = Arch::AE;
        c.factors = {2.0, 4.0, 5.0};
        c.l2 = 1e-5;
        c.learning_rate = 1e-4;
        c.batch_size = 30;
        c.input_noise_std = 0.005;
        c.optimizer = OptimizerKind::ADAM;
        c.loss = LossKind::MSE;
        return {c, kUkdaleHz};
    }
    if (name == "blond-ae") {
        c.architecture = Arch::AE;
        c.factors = {10.0, 5.0, 2.5};
        c.l2 = 1e-5;
        c.learning_rate = 1e-4;
        c.batch_size = 45;
        c.input_noise_std = 0.005;
        c.optimizer = OptimizerKind::ADAM;
        c.loss = LossKind::MSE;
        return {c, kBlondHz};
    }
    if (name == "ukdale-cae") {
        c.architecture = Arch::CAE;
        c.factors = {5.0, 4.0, 2.0};
        c.learning_rate = 1e-3;
        c.batch_size = 45;
        c.optimizer = OptimizerKind::ADAM;
        c.loss = LossKind::MSE;
        return {c, kUkdaleHz};
    }
    if (name == "blond-cae") {
        c.architecture = Arch::CAE;
        c.factors = {5.0, 5.0, 5.0};
        c.learning_rate = 1e-3;
        c.batch_size = 45;
        c.optimizer = OptimizerKind::SGD;
        c.loss = LossKind::MSE;
        return {c, kBlondHz};
    }
    if (name == "ukdale-cnn") {
        c.architecture = Arch::CNN;
        c.factors = {5.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0};
        c.learning_rate = 1e-3;
        c.batch_size = 30;
        c.optimizer = OptimizerKind::SGD;
        c.loss = LossKind::CROSS_ENTROPY;
        return {c, kUkdaleHz};
    }
    if (name == "blond-cnn") {
        c.architecture = Arch::CNN;
        c.factors = {5.0, 5.0, 5.0, 2.0, 2.0, 2.0};
        c.learning_rate = 1e-3;
        c.batch_size = 30;
        c.optimizer = OptimizerKind::SGD;
        c.loss = LossKind::CROSS_ENTROPY;
        return {c, kBlondHz};
    }
    throw Error("unknown preset: " + name);
}

}  // namespace

NetConfig preset_config(const std::string& name) { return make_preset(name).config; }

SamplingContext preset_context(const std::string& name) {
    return make_context(make_preset(name).sampling_hz, 50, 0.5);
}

std::vector<std::string> preset_names() {
    return {"ukdale-ae", "blond-ae", "ukdale-cae", "blond-cae", "ukdale-cnn", "blond-cnn"};
}

}  // namespace nilm::nn
