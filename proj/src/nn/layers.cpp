#include "nilm/nn/layers.hpp"

#include <cmath>

namespace nilm::nn {
namespace {

void glorot_init(Eigen::MatrixXd& w, long fan_in, long fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (long r = 0; r < w.rows(); ++r) {
        for (long c = 0; c < w.cols(); ++c) {
            w(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
        }
    }
}

void accumulate(Eigen::MatrixXd& grad, const Eigen::MatrixXd& delta) {
    if (grad.size() == 0) {
        grad = delta;
    } else {
        grad += delta;
    }
}

}  // namespace

Layer::Layer(int in_channels, int in_length, int out_channels, int out_length)
    : in_channels_(in_channels),
      in_length_(in_length),
      out_channels_(out_channels),
      out_length_(out_length) {
    if (in_channels < 1 || in_length < 1 || out_channels < 1 || out_length < 1) {
        throw Error("layer dimensions must be positive");
    }
}

void Layer::check_input(const Eigen::MatrixXd& x) const {
    if (x.cols() != in_width()) {
        throw DimMismatch(kind() + " expects width " + std::to_string(in_width()) + ", got " +
                          std::to_string(x.cols()));
    }
}

// ---------------------------------------------------------------- Dense

Dense::Dense(int in_width, int out_width, Rng& rng)
    : Layer(in_width, 1, out_width, 1), w(out_width, in_width), b(out_width, 1) {
    glorot_init(w, in_width, out_width, rng);
    b.setZero();
}

Eigen::MatrixXd Dense::forward(const Eigen::MatrixXd& x, bool training) {
    check_input(x);
    if (training) x_cache_ = x;
    return (x * w.transpose()).rowwise() + b.col(0).transpose();
}

Eigen::MatrixXd Dense::backward(const Eigen::MatrixXd& grad_out) {
    accumulate(gw_, grad_out.transpose() * x_cache_);
    accumulate(gb_, grad_out.colwise().sum().transpose());
    return grad_out * w;
}

std::vector<ParamRef> Dense::params() {
    return {{&w, &gw_, true}, {&b, &gb_, false}};
}

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(int in_channels, int out_channels, int kernel, int length, Rng& rng)
    : Layer(in_channels, length, out_channels, length),
      w(out_channels, static_cast<long>(in_channels) * kernel),
      b(out_channels, 1),
      kernel_(kernel) {
    if (kernel < 1 || kernel % 2 == 0) {
        throw Error("conv kernel must be odd and positive, got " + std::to_string(kernel));
    }
    glorot_init(w, static_cast<long>(in_channels) * kernel,
                static_cast<long>(out_channels) * kernel, rng);
    b.setZero();
}

Eigen::MatrixXd Conv1d::im2col(const Eigen::MatrixXd& x) const {
    const long batch = x.rows();
    const long len = in_length_;
    const int pad = (kernel_ - 1) / 2;
    Eigen::MatrixXd col(static_cast<long>(in_channels_) * kernel_, batch * len);
    col.setZero();
    for (long s = 0; s < batch; ++s) {
        for (int c = 0; c < in_channels_; ++c) {
            const long x_base = static_cast<long>(c) * len;
            for (int u = 0; u < kernel_; ++u) {
                const long row = static_cast<long>(c) * kernel_ + u;
                const long shift = u - pad;
                const long t0 = std::max<long>(0, -shift);
                const long t1 = std::min<long>(len, len - shift);
                for (long t = t0; t < t1; ++t) {
                    col(row, s * len + t) = x(s, x_base + t + shift);
                }
            }
        }
    }
    return col;
}

Eigen::MatrixXd Conv1d::forward(const Eigen::MatrixXd& x, bool training) {
    check_input(x);
    const long batch = x.rows();
    const long len = in_length_;
    Eigen::MatrixXd col = im2col(x);
    Eigen::MatrixXd y_mat = w * col;  // out_channels x (batch * len)
    y_mat.colwise() += b.col(0);
    if (training) {
        col_cache_ = std::move(col);
        batch_cache_ = batch;
    }
    Eigen::MatrixXd y(batch, out_width());
    for (long s = 0; s < batch; ++s) {
        for (int o = 0; o < out_channels_; ++o) {
            y.block(s, static_cast<long>(o) * len, 1, len) =
                y_mat.block(o, s * len, 1, len);
        }
    }
    return y;
}

Eigen::MatrixXd Conv1d::backward(const Eigen::MatrixXd& grad_out) {
    const long batch = batch_cache_;
    const long len = in_length_;
    const int pad = (kernel_ - 1) / 2;

    Eigen::MatrixXd g_mat(out_channels_, batch * len);
    for (long s = 0; s < batch; ++s) {
        for (int o = 0; o < out_channels_; ++o) {
            g_mat.block(o, s * len, 1, len) =
                grad_out.block(s, static_cast<long>(o) * len, 1, len);
        }
    }

    accumulate(gw_, g_mat * col_cache_.transpose());
    accumulate(gb_, g_mat.rowwise().sum());

    const Eigen::MatrixXd g_col = w.transpose() * g_mat;  // (in_ch * k) x (batch * len)
    Eigen::MatrixXd gx = Eigen::MatrixXd::Zero(batch, in_width());
    for (long s = 0; s < batch; ++s) {
        for (int c = 0; c < in_channels_; ++c) {
            const long x_base = static_cast<long>(c) * len;
            for (int u = 0; u < kernel_; ++u) {
                const long row = static_cast<long>(c) * kernel_ + u;
                const long shift = u - pad;
                const long t0 = std::max<long>(0, -shift);
                const long t1 = std::min<long>(len, len - shift);
                for (long t = t0; t < t1; ++t) {
                    gx(s, x_base + t + shift) += g_col(row, s * len + t);
                }
            }
        }
    }
    return gx;
}

std::vector<ParamRef> Conv1d::params() {
    return {{&w, &gw_, true}, {&b, &gb_, false}};
}

// ---------------------------------------------------------------- MaxPool1d

MaxPool1d::MaxPool1d(int channels, int in_length, int factor)
    : Layer(channels, in_length, channels, in_length / std::max(factor, 1)), factor_(factor) {
    if (factor < 1) throw Error("pool factor must be >= 1");
    if (in_length % factor != 0) {
        throw NonIntegralWidth("pool factor " + std::to_string(factor) +
                               " does not divide length " + std::to_string(in_length));
    }
}

Eigen::MatrixXd MaxPool1d::forward(const Eigen::MatrixXd& x, bool training) {
    check_input(x);
    const long batch = x.rows();
    Eigen::MatrixXd y(batch, out_width());
    Eigen::MatrixXi arg(batch, out_width());
    for (long s = 0; s < batch; ++s) {
        for (int c = 0; c < in_channels_; ++c) {
            const long in_base = static_cast<long>(c) * in_length_;
            const long out_base = static_cast<long>(c) * out_length_;
            for (int t = 0; t < out_length_; ++t) {
                long best = in_base + static_cast<long>(t) * factor_;
                double best_v = x(s, best);
                for (int u = 1; u < factor_; ++u) {
                    const long idx = in_base + static_cast<long>(t) * factor_ + u;
                    if (x(s, idx) > best_v) {
                        best_v = x(s, idx);
                        best = idx;
                    }
                }
                y(s, out_base + t) = best_v;
                arg(s, out_base + t) = static_cast<int>(best);
            }
        }
    }
    if (training) {
        argmax_ = std::move(arg);
        in_width_cache_ = in_width();
    }
    return y;
}

Eigen::MatrixXd MaxPool1d::backward(const Eigen::MatrixXd& grad_out) {
    Eigen::MatrixXd gx = Eigen::MatrixXd::Zero(grad_out.rows(), in_width_cache_);
    for (long s = 0; s < grad_out.rows(); ++s) {
        for (long j = 0; j < grad_out.cols(); ++j) {
            gx(s, argmax_(s, j)) += grad_out(s, j);
        }
    }
    return gx;
}

// ---------------------------------------------------------------- Upsample1d

Upsample1d::Upsample1d(int channels, int in_length, int factor)
    : Layer(channels, in_length, channels, in_length * std::max(factor, 1)), factor_(factor) {
    if (factor < 1) throw Error("upsample factor must be >= 1");
}

Eigen::MatrixXd Upsample1d::forward(const Eigen::MatrixXd& x, bool) {
    check_input(x);
    Eigen::MatrixXd y(x.rows(), out_width());
    for (long s = 0; s < x.rows(); ++s) {
        for (int c = 0; c < in_channels_; ++c) {
            const long in_base = static_cast<long>(c) * in_length_;
            const long out_base = static_cast<long>(c) * out_length_;
            for (int t = 0; t < in_length_; ++t) {
                for (int u = 0; u < factor_; ++u) {
                    y(s, out_base + static_cast<long>(t) * factor_ + u) = x(s, in_base + t);
                }
            }
        }
    }
    return y;
}

Eigen::MatrixXd Upsample1d::backward(const Eigen::MatrixXd& grad_out) {
    Eigen::MatrixXd gx(grad_out.rows(), in_width());
    for (long s = 0; s < grad_out.rows(); ++s) {
        for (int c = 0; c < in_channels_; ++c) {
            const long in_base = static_cast<long>(c) * in_length_;
            const long out_base = static_cast<long>(c) * out_length_;
            for (int t = 0; t < in_length_; ++t) {
                double acc = 0.0;
                for (int u = 0; u < factor_; ++u) {
                    acc += grad_out(s, out_base + static_cast<long>(t) * factor_ + u);
                }
                gx(s, in_base + t) = acc;
            }
        }
    }
    return gx;
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(int channels, int length)
    : Layer(channels, length, channels, length),
      gamma(Eigen::MatrixXd::Ones(channels, 1)),
      beta(Eigen::MatrixXd::Zero(channels, 1)),
      running_mean(Eigen::MatrixXd::Zero(channels, 1)),
      running_var(Eigen::MatrixXd::Ones(channels, 1)) {}

Eigen::MatrixXd BatchNorm::forward(const Eigen::MatrixXd& x, bool training) {
    check_input(x);
    const long batch = x.rows();
    const long len = in_length_;
    Eigen::MatrixXd y(batch, in_width());
    if (training) {
        xhat_cache_.resize(batch, in_width());
        inv_std_cache_.resize(in_channels_);
    }
    for (int c = 0; c < in_channels_; ++c) {
        const long base = static_cast<long>(c) * len;
        const auto block = x.middleCols(base, len);
        double mean, var;
        if (training) {
            const double m = static_cast<double>(batch * len);
            mean = block.sum() / m;
            var = (block.array() - mean).square().sum() / m;
            running_mean(c, 0) = (1.0 - kMomentum) * running_mean(c, 0) + kMomentum * mean;
            running_var(c, 0) = (1.0 - kMomentum) * running_var(c, 0) + kMomentum * var;
        } else {
            mean = running_mean(c, 0);
            var = running_var(c, 0);
        }
        const double inv_std = 1.0 / std::sqrt(var + kEpsilon);
        const Eigen::MatrixXd xhat = ((block.array() - mean) * inv_std).matrix();
        y.middleCols(base, len) = (gamma(c, 0) * xhat.array() + beta(c, 0)).matrix();
        if (training) {
            xhat_cache_.middleCols(base, len) = xhat;
            inv_std_cache_(c) = inv_std;
        }
    }
    return y;
}

Eigen::MatrixXd BatchNorm::backward(const Eigen::MatrixXd& grad_out) {
    const long batch = grad_out.rows();
    const long len = in_length_;
    const double m = static_cast<double>(batch * len);

    Eigen::MatrixXd ggamma(in_channels_, 1), gbeta(in_channels_, 1);
    Eigen::MatrixXd gx(batch, in_width());
    for (int c = 0; c < in_channels_; ++c) {
        const long base = static_cast<long>(c) * len;
        const auto g = grad_out.middleCols(base, len);
        const auto xhat = xhat_cache_.middleCols(base, len);
        ggamma(c, 0) = (g.array() * xhat.array()).sum();
        gbeta(c, 0) = g.sum();
        // d/dx of the batch-statistics normalization, folded per channel
        const double scale = gamma(c, 0) * inv_std_cache_(c);
        gx.middleCols(base, len) =
            (scale * (g.array() - gbeta(c, 0) / m - xhat.array() * (ggamma(c, 0) / m)))
                .matrix();
    }
    accumulate(ggamma_, ggamma);
    accumulate(gbeta_, gbeta);
    return gx;
}

std::vector<ParamRef> BatchNorm::params() {
    return {{&gamma, &ggamma_, false}, {&beta, &gbeta_, false}};
}

std::vector<Eigen::MatrixXd*> BatchNorm::state_buffers() {
    return {&running_mean, &running_var};
}

// ---------------------------------------------------------------- LeakyReLU

LeakyReLU::LeakyReLU(int channels, int length, double slope)
    : Layer(channels, length, channels, length), slope_(slope) {
    if (slope < 0.0) throw Error("leaky slope must be >= 0");
}

Eigen::MatrixXd LeakyReLU::forward(const Eigen::MatrixXd& x, bool training) {
    check_input(x);
    if (training) x_cache_ = x;
    return x.unaryExpr([this](double v) { return v >= 0.0 ? v : slope_ * v; });
}

Eigen::MatrixXd LeakyReLU::backward(const Eigen::MatrixXd& grad_out) {
    return (grad_out.array() *
            x_cache_.unaryExpr([this](double v) { return v >= 0.0 ? 1.0 : slope_; }).array())
        .matrix();
}

// ---------------------------------------------------------------- Softmax

Softmax::Softmax(int width) : Layer(width, 1, width, 1) {}

Eigen::MatrixXd Softmax::forward(const Eigen::MatrixXd& x, bool training) {
    check_input(x);
    Eigen::MatrixXd y(x.rows(), x.cols());
    for (long r = 0; r < x.rows(); ++r) {
        const double peak = x.row(r).maxCoeff();
        const Eigen::RowVectorXd e = (x.row(r).array() - peak).exp().matrix();
        y.row(r) = e / e.sum();
    }
    if (training) y_cache_ = y;
    return y;
}

Eigen::MatrixXd Softmax::backward(const Eigen::MatrixXd& grad_out) {
    Eigen::MatrixXd gx(grad_out.rows(), grad_out.cols());
    for (long r = 0; r < grad_out.rows(); ++r) {
        const double dot = grad_out.row(r).dot(y_cache_.row(r));
        gx.row(r) = (y_cache_.row(r).array() * (grad_out.row(r).array() - dot)).matrix();
    }
    return gx;
}

}  // namespace nilm::nn
