#include "nilm/model_io.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <utility>

#include "nilm/binio.hpp"
#include "nilm/errors.hpp"
#include "nilm/nn/train.hpp"
#include "nilm/rng.hpp"

namespace nilm {

namespace {

constexpr char kMagic[8] = {'N', 'I', 'L', 'M', 'M', 'D', 'L', '1'};
constexpr std::uint32_t kVersion = 1;

void write_i32(BinaryWriter& w, int v) { w.write_u32(static_cast<std::uint32_t>(v)); }
int read_i32(BinaryReader& r) { return static_cast<std::int32_t>(r.read_u32()); }

void write_matrix(BinaryWriter& w, const Eigen::MatrixXd& m) {
    w.write_u32(static_cast<std::uint32_t>(m.rows()));
    w.write_u32(static_cast<std::uint32_t>(m.cols()));
    for (long r = 0; r < m.rows(); ++r)
        for (long c = 0; c < m.cols(); ++c) w.write_f64(m(r, c));
}

Eigen::MatrixXd read_matrix(BinaryReader& r) {
    std::uint64_t rows = r.read_u32();
    std::uint64_t cols = r.read_u32();
    if (rows * cols > (1ull << 30)) throw FormatError("implausible matrix size in model file");
    Eigen::MatrixXd m(static_cast<long>(rows), static_cast<long>(cols));
    for (long i = 0; i < m.rows(); ++i)
        for (long j = 0; j < m.cols(); ++j) m(i, j) = r.read_f64();
    return m;
}

void write_vector(BinaryWriter& w, const Eigen::VectorXd& v) {
    w.write_u32(static_cast<std::uint32_t>(v.size()));
    for (long i = 0; i < v.size(); ++i) w.write_f64(v(i));
}

Eigen::VectorXd read_vector(BinaryReader& r) {
    std::uint32_t n = r.read_u32();
    if (n > (1u << 28)) throw FormatError("implausible vector size in model file");
    Eigen::VectorXd v(static_cast<long>(n));
    for (long i = 0; i < v.size(); ++i) v(i) = r.read_f64();
    return v;
}

void write_normalizer(BinaryWriter& w, const NormalizerState& s) {
    w.write_u16(s.kind == NormKind::Variance ? 0 : 1);
    write_vector(w, s.mean);
    write_vector(w, s.scale);
    w.write_u32(static_cast<std::uint32_t>(s.degenerate.size()));
    for (std::uint8_t b : s.degenerate) w.write_bytes(&b, 1);
}

NormalizerState read_normalizer(BinaryReader& r) {
    NormalizerState s;
    s.kind = r.read_u16() == 0 ? NormKind::Variance : NormKind::MaxAbs;
    s.mean = read_vector(r);
    s.scale = read_vector(r);
    std::uint32_t n = r.read_u32();
    if (n > (1u << 28)) throw FormatError("implausible flag count in model file");
    s.degenerate.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) r.read_bytes(&s.degenerate[i], 1);
    return s;
}

void write_pca(BinaryWriter& w, const PcaState& s) {
    write_vector(w, s.mean);
    write_matrix(w, s.components);
    write_vector(w, s.explained_variances);
}

PcaState read_pca(BinaryReader& r) {
    PcaState s;
    s.mean = read_vector(r);
    s.components = read_matrix(r);
    s.explained_variances = read_vector(r);
    return s;
}

void write_handcrafted(BinaryWriter& w, const HandcraftedConfig& c) {
    auto flag = [&w](bool b) {
        std::uint8_t v = b ? 1 : 0;
        w.write_bytes(&v, 1);
    };
    flag(c.power);
    flag(c.shape);
    flag(c.phase);
    flag(c.harmonics);
    flag(c.thd);
    flag(c.spectral_flatness);
    flag(c.cycle_rms);
    flag(c.inrush);
    write_i32(w, c.harmonic_count);
}

HandcraftedConfig read_handcrafted(BinaryReader& r) {
    HandcraftedConfig c;
    auto flag = [&r] {
        std::uint8_t v = 0;
        r.read_bytes(&v, 1);
        return v != 0;
    };
    c.power = flag();
    c.shape = flag();
    c.phase = flag();
    c.harmonics = flag();
    c.thd = flag();
    c.spectral_flatness = flag();
    c.cycle_rms = flag();
    c.inrush = flag();
    c.harmonic_count = read_i32(r);
    return c;
}

void write_classifier(BinaryWriter& w, const TrainedClassifier& m) {
    w.write_string(classifier_name(m.kind));
    w.write_u32(static_cast<std::uint32_t>(m.classes.size()));
    for (const std::string& c : m.classes) w.write_string(c);
    w.write_u64(static_cast<std::uint64_t>(m.dims));
    switch (m.kind) {
        case ClassifierKind::Knn:
            write_i32(w, m.knn_k);
            write_matrix(w, m.knn_points);
            w.write_u32(static_cast<std::uint32_t>(m.knn_labels.size()));
            for (int l : m.knn_labels) write_i32(w, l);
            break;
        case ClassifierKind::Lda:
            write_matrix(w, m.lda_means);
            write_matrix(w, m.lda_cov_inv);
            write_vector(w, m.lda_log_priors);
            break;
        case ClassifierKind::Svm:
            w.write_u32(static_cast<std::uint32_t>(m.svm_pairs.size()));
            for (const SvmPair& p : m.svm_pairs) {
                write_i32(w, p.pos);
                write_i32(w, p.neg);
                write_vector(w, p.w);
                w.write_f64(p.bias);
            }
            break;
        case ClassifierKind::Bdt:
            w.write_u32(static_cast<std::uint32_t>(m.bdt_nodes.size()));
            for (const BdtNode& n : m.bdt_nodes) {
                write_i32(w, n.dim);
                w.write_f64(n.threshold);
                write_i32(w, n.left);
                write_i32(w, n.right);
                write_i32(w, n.leaf_class);
            }
            break;
    }
}

TrainedClassifier read_classifier(BinaryReader& r) {
    TrainedClassifier m;
    m.kind = parse_classifier(r.read_string());
    std::uint32_t n_classes = r.read_u32();
    if (n_classes > (1u << 20)) throw FormatError("implausible class count in model file");
    for (std::uint32_t i = 0; i < n_classes; ++i) m.classes.push_back(r.read_string());
    m.dims = static_cast<long>(r.read_u64());
    switch (m.kind) {
        case ClassifierKind::Knn: {
            m.knn_k = read_i32(r);
            m.knn_points = read_matrix(r);
            std::uint32_t n = r.read_u32();
            if (static_cast<long>(n) != m.knn_points.rows())
                throw FormatError("stored neighbor labels do not match the point count");
            for (std::uint32_t i = 0; i < n; ++i) m.knn_labels.push_back(read_i32(r));
            break;
        }
        case ClassifierKind::Lda:
            m.lda_means = read_matrix(r);
            m.lda_cov_inv = read_matrix(r);
            m.lda_log_priors = read_vector(r);
            break;
        case ClassifierKind::Svm: {
            std::uint32_t n = r.read_u32();
            if (n > (1u << 24)) throw FormatError("implausible pair count in model file");
            for (std::uint32_t i = 0; i < n; ++i) {
                SvmPair p;
                p.pos = read_i32(r);
                p.neg = read_i32(r);
                p.w = read_vector(r);
                p.bias = r.read_f64();
                m.svm_pairs.push_back(std::move(p));
            }
            break;
        }
        case ClassifierKind::Bdt: {
            std::uint32_t n = r.read_u32();
            if (n > (1u << 26)) throw FormatError("implausible node count in model file");
            for (std::uint32_t i = 0; i < n; ++i) {
                BdtNode node;
                node.dim = read_i32(r);
                node.threshold = r.read_f64();
                node.left = read_i32(r);
                node.right = read_i32(r);
                node.leaf_class = read_i32(r);
                m.bdt_nodes.push_back(node);
            }
            break;
        }
    }
    return m;
}

void write_layer(BinaryWriter& w, nn::Layer& layer) {
    const std::string kind = layer.kind();
    w.write_string(kind);
    if (kind == "dense") {
        write_i32(w, layer.in_channels());
        write_i32(w, layer.out_channels());
    } else if (kind == "conv1d") {
        auto& conv = dynamic_cast<nn::Conv1d&>(layer);
        write_i32(w, conv.in_channels());
        write_i32(w, conv.out_channels());
        write_i32(w, conv.kernel());
        write_i32(w, conv.in_length());
    } else if (kind == "maxpool1d") {
        auto& pool = dynamic_cast<nn::MaxPool1d&>(layer);
        write_i32(w, pool.in_channels());
        write_i32(w, pool.in_length());
        write_i32(w, pool.factor());
    } else if (kind == "upsample1d") {
        auto& up = dynamic_cast<nn::Upsample1d&>(layer);
        write_i32(w, up.in_channels());
        write_i32(w, up.in_length());
        write_i32(w, up.factor());
    } else if (kind == "batchnorm") {
        write_i32(w, layer.in_channels());
        write_i32(w, layer.in_length());
    } else if (kind == "leakyrelu") {
        auto& act = dynamic_cast<nn::LeakyReLU&>(layer);
        write_i32(w, act.in_channels());
        write_i32(w, act.in_length());
        w.write_f64(act.slope());
    } else if (kind == "softmax") {
        write_i32(w, layer.in_channels());
    } else {
        throw Error("cannot serialize layer kind '" + kind + "'");
    }
    auto params = layer.params();
    w.write_u32(static_cast<std::uint32_t>(params.size()));
    for (const nn::ParamRef& p : params) write_matrix(w, *p.value);
    auto buffers = layer.state_buffers();
    w.write_u32(static_cast<std::uint32_t>(buffers.size()));
    for (const Eigen::MatrixXd* b : buffers) write_matrix(w, *b);
}

std::unique_ptr<nn::Layer> read_layer(BinaryReader& r, Rng& dummy) {
    const std::string kind = r.read_string();
    std::unique_ptr<nn::Layer> layer;
    if (kind == "dense") {
        int in_w = read_i32(r), out_w = read_i32(r);
        layer = std::make_unique<nn::Dense>(in_w, out_w, dummy);
    } else if (kind == "conv1d") {
        int in_ch = read_i32(r), out_ch = read_i32(r), kernel = read_i32(r), len = read_i32(r);
        layer = std::make_unique<nn::Conv1d>(in_ch, out_ch, kernel, len, dummy);
    } else if (kind == "maxpool1d") {
        int ch = read_i32(r), len = read_i32(r), factor = read_i32(r);
        layer = std::make_unique<nn::MaxPool1d>(ch, len, factor);
    } else if (kind == "upsample1d") {
        int ch = read_i32(r), len = read_i32(r), factor = read_i32(r);
        layer = std::make_unique<nn::Upsample1d>(ch, len, factor);
    } else if (kind == "batchnorm") {
        int ch = read_i32(r), len = read_i32(r);
        layer = std::make_unique<nn::BatchNorm>(ch, len);
    } else if (kind == "leakyrelu") {
        int ch = read_i32(r), len = read_i32(r);
        double slope = r.read_f64();
        layer = std::make_unique<nn::LeakyReLU>(ch, len, slope);
    } else if (kind == "softmax") {
        layer = std::make_unique<nn::Softmax>(read_i32(r));
    } else {
        throw FormatError("unknown layer kind '" + kind + "' in model file");
    }

    auto params = layer->params();
    std::uint32_t n_params = r.read_u32();
    if (n_params != params.size()) throw FormatError("layer parameter count mismatch");
    for (nn::ParamRef& p : params) {
        Eigen::MatrixXd m = read_matrix(r);
        if (m.rows() != p.value->rows() || m.cols() != p.value->cols())
            throw FormatError("layer parameter shape mismatch");
        *p.value = std::move(m);
    }
    auto buffers = layer->state_buffers();
    std::uint32_t n_buffers = r.read_u32();
    if (n_buffers != buffers.size()) throw FormatError("layer state-buffer count mismatch");
    for (Eigen::MatrixXd* b : buffers) {
        Eigen::MatrixXd m = read_matrix(r);
        if (m.rows() != b->rows() || m.cols() != b->cols())
            throw FormatError("layer state-buffer shape mismatch");
        *b = std::move(m);
    }
    return layer;
}

void write_network(BinaryWriter& w, nn::Network& net) {
    write_i32(w, net.in_channels());
    write_i32(w, net.in_length());
    write_i32(w, net.coding_index);
    w.write_u32(static_cast<std::uint32_t>(net.size()));
    for (std::size_t i = 0; i < net.size(); ++i) write_layer(w, net.layer(i));
}

nn::Network read_network(BinaryReader& r) {
    int in_ch = read_i32(r);
    int in_len = read_i32(r);
    int coding = read_i32(r);
    nn::Network net(in_ch, in_len);
    std::uint32_t n_layers = r.read_u32();
    if (n_layers > (1u << 16)) throw FormatError("implausible layer count in model file");
    Rng dummy(0);
    for (std::uint32_t i = 0; i < n_layers; ++i) net.add(read_layer(r, dummy));
    if (coding < -1 || coding >= static_cast<int>(net.size()))
        throw FormatError("coding index out of range in model file");
    net.coding_index = coding;
    return net;
}

}  // namespace

void save_pipeline(const TrainedPipeline& pipeline, const std::string& path) {
    BinaryWriter w(path);
    w.write_bytes(kMagic, sizeof(kMagic));
    w.write_u32(kVersion);
    w.write_string(pipeline.model);
    w.write_string(pipeline.classifier);
    w.write_string(model_kind_name(pipeline.kind));
    w.write_u32(pipeline.context.sampling_hz());
    w.write_u32(pipeline.context.mains_hz());
    w.write_f64(pipeline.context.segment_duration());
    w.write_u32(static_cast<std::uint32_t>(pipeline.class_names.size()));
    for (const std::string& name : pipeline.class_names) w.write_string(name);

    auto presence = [&w](bool present) {
        std::uint8_t v = present ? 1 : 0;
        w.write_bytes(&v, 1);
    };
    presence(pipeline.handcrafted.has_value());
    if (pipeline.handcrafted) write_handcrafted(w, *pipeline.handcrafted);

    w.write_u32(static_cast<std::uint32_t>(pipeline.subsample_indices.size()));
    for (int idx : pipeline.subsample_indices) write_i32(w, idx);

    presence(pipeline.pca.has_value());
    if (pipeline.pca) write_pca(w, *pipeline.pca);
    presence(pipeline.input_norm.has_value());
    if (pipeline.input_norm) write_normalizer(w, *pipeline.input_norm);
    presence(pipeline.feature_norm.has_value());
    if (pipeline.feature_norm) write_normalizer(w, *pipeline.feature_norm);

    presence(pipeline.network != nullptr);
    if (pipeline.network) write_network(w, *pipeline.network);
    presence(pipeline.head.has_value());
    if (pipeline.head) write_classifier(w, *pipeline.head);
    w.finish();
}

TrainedPipeline load_pipeline(const std::string& path) {
    BinaryReader r(path);
    char magic[8];
    r.read_bytes(magic, sizeof(magic));
    if (!std::equal(magic, magic + 8, kMagic))
        throw FormatError("'" + path + "' is not a model file");
    std::uint32_t version = r.read_u32();
    if (version != kVersion)
        throw FormatError("unsupported model file version " + std::to_string(version));

    TrainedPipeline p;
    p.model = r.read_string();
    p.classifier = r.read_string();
    p.kind = parse_model_kind(r.read_string());
    std::uint32_t fs = r.read_u32();
    std::uint32_t f0 = r.read_u32();
    double duration = r.read_f64();
    try {
        p.context = make_context(fs, f0, duration);
    } catch (const Error& e) {
        throw FormatError("invalid sampling context in model file: " + std::string(e.what()));
    }
    std::uint32_t n_classes = r.read_u32();
    if (n_classes > (1u << 20)) throw FormatError("implausible class count in model file");
    for (std::uint32_t i = 0; i < n_classes; ++i) p.class_names.push_back(r.read_string());

    auto present = [&r] {
        std::uint8_t v = 0;
        r.read_bytes(&v, 1);
        return v != 0;
    };
    if (present()) p.handcrafted = read_handcrafted(r);
    std::uint32_t n_idx = r.read_u32();
    if (n_idx > (1u << 26)) throw FormatError("implausible index count in model file");
    for (std::uint32_t i = 0; i < n_idx; ++i) {
        int idx = read_i32(r);
        if (idx < 0 || idx >= p.context.samples_per_segment())
            throw FormatError("subsample index out of range in model file");
        p.subsample_indices.push_back(idx);
    }
    if (present()) p.pca = read_pca(r);
    if (present()) p.input_norm = read_normalizer(r);
    if (present()) p.feature_norm = read_normalizer(r);
    if (present()) p.network = std::make_shared<nn::Network>(read_network(r));
    if (present()) p.head = read_classifier(r);
    if (!r.at_eof()) throw FormatError("'" + path + "' has trailing bytes");
    return p;
}

namespace {

FeatureMatrix subsample_matrix(const std::vector<EventSegment>& segments,
                               const std::vector<int>& indices, int samples) {
    FeatureMatrix out;
    out.values.resize(static_cast<long>(segments.size()), static_cast<long>(indices.size()));
    for (std::size_t r = 0; r < segments.size(); ++r)
        for (std::size_t j = 0; j < indices.size(); ++j) {
            int idx = indices[j];
            if (idx < 0 || idx >= samples) throw OutOfRange("subsample index out of range");
            out.values(static_cast<long>(r), static_cast<long>(j)) =
                segments[r].current[static_cast<std::size_t>(idx)];
        }
    int width = 1;
    for (int v = std::max(samples - 1, 1); v >= 10; v /= 10) ++width;
    for (int idx : indices) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "raw_%0*d", width, idx);
        out.names.emplace_back(buf);
    }
    for (const EventSegment& seg : segments) out.labels.push_back(seg.label);
    return out;
}

}  // namespace

std::vector<std::string> predict_pipeline(TrainedPipeline& pipeline,
                                          const std::vector<EventSegment>& segments) {
    if (segments.empty()) return {};
    for (const EventSegment& seg : segments) {
        if (!(seg.context == pipeline.context))
            throw DimMismatch("segment sampling context does not match the trained pipeline");
        seg.validate();
    }
    LabeledDataset ds = LabeledDataset::from_segments(segments);

    FeatureMatrix features;
    switch (pipeline.kind) {
        case ModelKind::Handcrafted: {
            if (!pipeline.handcrafted) throw Error("pipeline is missing its feature config");
            const HandcraftedConfig& config = *pipeline.handcrafted;
            features = extract_matrix(
                ds, [&config](const EventSegment& seg) { return extract_handcrafted(seg, config); });
            break;
        }
        case ModelKind::Rms25:
            features = extract_matrix(ds, [](const EventSegment& seg) { return rms25(seg); });
            break;
        case ModelKind::Subsample:
            if (pipeline.subsample_indices.empty())
                throw Error("pipeline is missing its subsample indices");
            features = subsample_matrix(segments, pipeline.subsample_indices,
                                        pipeline.context.samples_per_segment());
            break;
        case ModelKind::Pca: {
            if (!pipeline.pca) throw Error("pipeline is missing its projection");
            features = apply(*pipeline.pca, raw_current_matrix(ds));
            break;
        }
        case ModelKind::Ae:
        case ModelKind::Cae:
        case ModelKind::Cnn: {
            if (!pipeline.network) throw Error("pipeline is missing its network");
            FeatureMatrix raw = raw_current_matrix(ds);
            if (pipeline.input_norm) raw = apply(*pipeline.input_norm, raw);
            if (pipeline.kind == ModelKind::Cnn) {
                std::vector<int> idx = nn::predict_cnn(*pipeline.network, raw.values);
                std::vector<std::string> out;
                out.reserve(idx.size());
                for (int i : idx) {
                    if (i < 0 || static_cast<std::size_t>(i) >= pipeline.class_names.size())
                        throw OutOfRange("network emits more classes than the pipeline lists");
                    out.push_back(pipeline.class_names[static_cast<std::size_t>(i)]);
                }
                return out;
            }
            features = nn::encode(*pipeline.network, raw);
            break;
        }
    }
    if (pipeline.feature_norm) features = apply(*pipeline.feature_norm, features);
    if (!pipeline.head) throw Error("pipeline has no classifier head");
    return predict(*pipeline.head, features);
}

}  // namespace nilm
