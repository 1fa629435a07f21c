#include "nilm/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>

#include "nilm/errors.hpp"
#include "nilm/model_io.hpp"
#include "nilm/nn/train.hpp"
#include "nilm/transform.hpp"

namespace nilm {

void SplitSpec::validate() const {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw Error("test_fraction must lie in (0, 1)");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw Error("validation_fraction must lie in (0, 1)");
}

namespace {

// llround(count * fraction), clamped so both sides keep at least one sample.
std::size_t held_out_count(std::size_t n, double fraction) {
    auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
    return std::clamp<std::size_t>(k, 1, n - 1);
}

void split_group(std::vector<std::size_t>& pool, double test_fraction, double validation_fraction,
                 bool with_validation, Rng& rng, Split& out) {
    rng.shuffle(pool);
    std::size_t n_test = held_out_count(pool.size(), test_fraction);
    out.test.insert(out.test.end(), pool.begin(), pool.begin() + static_cast<long>(n_test));
    std::size_t cursor = n_test;
    if (with_validation) {
        std::size_t n_val = held_out_count(pool.size() - n_test, validation_fraction);
        out.validation.insert(out.validation.end(), pool.begin() + static_cast<long>(cursor),
                              pool.begin() + static_cast<long>(cursor + n_val));
        cursor += n_val;
    }
    out.train.insert(out.train.end(), pool.begin() + static_cast<long>(cursor), pool.end());
}

}  // namespace

Split stratified_split(const LabeledDataset& dataset, const SplitSpec& spec, bool with_validation,
                       Rng& rng) {
    spec.validate();
    if (dataset.segments.empty()) throw EmptyTrainSet("cannot split an empty dataset");
    const std::size_t minimum = with_validation ? 3 : 2;

    Split out;
    if (spec.stratified) {
        for (std::size_t c = 0; c < dataset.class_names.size(); ++c) {
            std::vector<std::size_t> pool;
            for (std::size_t i = 0; i < dataset.segments.size(); ++i)
                if (dataset.segments[i].label == dataset.class_names[c]) pool.push_back(i);
            if (pool.size() < minimum)
                throw ClassTooSmall("class '" + dataset.class_names[c] + "' has " +
                                    std::to_string(pool.size()) + " samples, needs >= " +
                                    std::to_string(minimum));
            split_group(pool, spec.test_fraction, spec.validation_fraction, with_validation, rng,
                        out);
        }
    } else {
        if (dataset.segments.size() < minimum)
            throw ClassTooSmall("dataset has fewer than " + std::to_string(minimum) + " samples");
        std::vector<std::size_t> pool(dataset.segments.size());
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        split_group(pool, spec.test_fraction, spec.validation_fraction, with_validation, rng, out);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

LabeledDataset subset(const LabeledDataset& dataset, const std::vector<std::size_t>& rows) {
    std::vector<EventSegment> segments;
    segments.reserve(rows.size());
    for (std::size_t i : rows) {
        if (i >= dataset.segments.size()) throw OutOfRange("subset row index out of range");
        segments.push_back(dataset.segments[i]);
    }
    return LabeledDataset::from_segments(std::move(segments));
}

MetricsReport macro_metrics(const std::vector<std::string>& truth,
                            const std::vector<std::string>& predicted,
                            const std::vector<std::string>& classes) {
    if (truth.size() != predicted.size())
        throw LengthMismatch("truth and predicted lengths differ");
    if (classes.empty()) throw Error("macro_metrics needs at least one class");

    auto index_of = [&classes](const std::string& label) {
        for (std::size_t c = 0; c < classes.size(); ++c)
            if (classes[c] == label) return c;
        throw Error("label '" + label + "' is not in the class list");
    };

    MetricsReport report;
    report.per_class.resize(classes.size());
    for (std::size_t c = 0; c < classes.size(); ++c) report.per_class[c].class_name = classes[c];

    for (std::size_t i = 0; i < truth.size(); ++i) {
        std::size_t t = index_of(truth[i]);
        std::size_t p = index_of(predicted[i]);
        if (t == p) {
            ++report.per_class[t].tp;
        } else {
            ++report.per_class[t].fn;
            ++report.per_class[p].fp;
        }
    }
    for (ClassMetrics& m : report.per_class) {
        m.precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / (m.tp + m.fp) : 0.0;
        m.recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
        double pr = m.precision + m.recall;
        m.f_score = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
        report.macro_precision += m.precision;
        report.macro_recall += m.recall;
        report.macro_f += m.f_score;
    }
    auto n = static_cast<double>(classes.size());
    report.macro_precision /= n;
    report.macro_recall /= n;
    report.macro_f /= n;
    return report;
}

ConfusionMatrix confusion(const std::vector<std::string>& truth,
                          const std::vector<std::string>& predicted,
                          const std::vector<std::string>& classes) {
    if (truth.size() != predicted.size())
        throw LengthMismatch("truth and predicted lengths differ");
    if (classes.empty()) throw Error("confusion needs at least one class");

    auto index_of = [&classes](const std::string& label) {
        for (std::size_t c = 0; c < classes.size(); ++c)
            if (classes[c] == label) return static_cast<long>(c);
        throw Error("label '" + label + "' is not in the class list");
    };

    const auto n = static_cast<long>(classes.size());
    ConfusionMatrix out;
    out.classes = classes;
    out.counts = Eigen::MatrixXi::Zero(n, n);
    out.normalized = Eigen::MatrixXi::Zero(n, n);
    for (std::size_t i = 0; i < truth.size(); ++i)
        out.counts(index_of(truth[i]), index_of(predicted[i])) += 1;

    for (long r = 0; r < n; ++r) {
        long total = 0;
        for (long c = 0; c < n; ++c) total += out.counts(r, c);
        if (total == 0) continue;  // class absent from truth: row stays zero
        // Largest-remainder rounding: floor the exact shares, then hand the
        // missing units to the largest fractional parts (ties: lowest column).
        std::vector<double> remainder(static_cast<std::size_t>(n));
        long assigned = 0;
        for (long c = 0; c < n; ++c) {
            double share = 100.0 * out.counts(r, c) / static_cast<double>(total);
            double fl = std::floor(share);
            out.normalized(r, c) = static_cast<int>(fl);
            remainder[static_cast<std::size_t>(c)] = share - fl;
            assigned += static_cast<long>(fl);
        }
        std::vector<long> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0L);
        std::stable_sort(order.begin(), order.end(), [&remainder](long a, long b) {
            return remainder[static_cast<std::size_t>(a)] > remainder[static_cast<std::size_t>(b)];
        });
        for (long i = 0; i < 100 - assigned; ++i)
            out.normalized(r, order[static_cast<std::size_t>(i)]) += 1;
    }
    return out;
}

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Handcrafted: return "handcrafted";
        case ModelKind::Ae: return "ae";
        case ModelKind::Cae: return "cae";
        case ModelKind::Cnn: return "cnn";
        case ModelKind::Subsample: return "subsample";
        case ModelKind::Rms25: return "rms25";
        case ModelKind::Pca: return "pca";
    }
    throw Error("unknown model kind");
}

ModelKind parse_model_kind(const std::string& name) {
    for (ModelKind k : {ModelKind::Handcrafted, ModelKind::Ae, ModelKind::Cae, ModelKind::Cnn,
                        ModelKind::Subsample, ModelKind::Rms25, ModelKind::Pca})
        if (model_kind_name(k) == name) return k;
    throw Error("unknown model kind: " + name);
}

ModelSpec ModelSpec::for_kind(ModelKind kind) {
    ModelSpec spec;
    spec.kind = kind;
    switch (kind) {
        case ModelKind::Handcrafted:
            spec.feature_norm = FeatureNorm::Variance;
            spec.feature_norm_uses_std = true;
            break;
        case ModelKind::Ae:
            spec.net.architecture = nn::Arch::AE;
            spec.net.loss = nn::LossKind::MSE;
            spec.net.optimizer = nn::OptimizerKind::ADAM;
            spec.net.learning_rate = 1e-4;
            spec.net.l2 = 1e-5;
            spec.net.input_noise_std = 0.005;
            break;
        case ModelKind::Cae:
            spec.net.architecture = nn::Arch::CAE;
            spec.net.loss = nn::LossKind::MSE;
            spec.net.optimizer = nn::OptimizerKind::ADAM;
            spec.net.learning_rate = 1e-3;
            spec.net.batch_size = 45;
            break;
        case ModelKind::Cnn:
            spec.net.architecture = nn::Arch::CNN;
            spec.net.loss = nn::LossKind::CROSS_ENTROPY;
            spec.net.optimizer = nn::OptimizerKind::SGD;
            spec.net.learning_rate = 1e-3;
            break;
        case ModelKind::Subsample:
        case ModelKind::Rms25:
        case ModelKind::Pca:
            break;
    }
    return spec;
}

namespace {

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

double segment_active_power(const EventSegment& seg) {
    double acc = 0.0;
    for (std::size_t i = 0; i < seg.current.size(); ++i) acc += seg.voltage[i] * seg.current[i];
    return seg.current.empty() ? 0.0 : acc / static_cast<double>(seg.current.size());
}

std::vector<PerClassRow> per_class_rows(const LabeledDataset& test_set,
                                        const std::vector<std::string>& classes) {
    std::vector<PerClassRow> rows(classes.size());
    for (std::size_t c = 0; c < classes.size(); ++c) rows[c].class_name = classes[c];
    for (const EventSegment& seg : test_set.segments) {
        for (std::size_t c = 0; c < classes.size(); ++c) {
            if (classes[c] == seg.label) {
                rows[c].test_count += 1;
                rows[c].mean_power += segment_active_power(seg);
                break;
            }
        }
    }
    for (PerClassRow& row : rows)
        if (row.test_count > 0) row.mean_power /= static_cast<double>(row.test_count);
    return rows;
}

// Default layer factors when a model spec leaves them empty: the descending
// prime factorization of segment_length/200 when 200 divides the segment
// (mirroring the reference 200-wide codings), otherwise the frequency-derived
// factor vector (coding length = cycles per segment).
std::vector<int> default_factors(const SamplingContext& context) {
    int samples = context.samples_per_segment();
    if (samples % 200 == 0 && samples > 200) {
        int n = samples / 200;
        std::vector<int> factors;
        for (int d = 2; static_cast<long>(d) * d <= n; ++d)
            while (n % d == 0) {
                factors.push_back(d);
                n /= d;
            }
        if (n > 1) factors.push_back(n);
        std::sort(factors.begin(), factors.end(), std::greater<int>());
        return factors;
    }
    return nn::derive_cnn_architecture(context).factors;
}

NormalizerState fit_input_norm(const nn::NetConfig& config, const FeatureMatrix& raw_train) {
    if (config.input_norm == NormKind::MaxAbs) return fit_maxabs_norm(raw_train);
    return fit_variance_norm(raw_train, false);
}

struct StageOutput {
    FeatureMatrix train;
    FeatureMatrix test;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<EvalReport> run_benchmark(const LabeledDataset& dataset,
                                      const std::vector<ModelSpec>& models, const SplitSpec& spec,
                                      Rng& rng, std::vector<TrainedPipeline>* trained_out) {
    if (models.empty()) throw Error("run_benchmark needs at least one model");
    dataset.validate();
    spec.validate();
    if (dataset.class_names.size() < 2)
        throw SingleClass("benchmarking needs at least two classes");

    Rng split_rng = rng.fork(fnv1a("split"));
    Split outer = stratified_split(dataset, spec, false, split_rng);
    LabeledDataset train_set = subset(dataset, outer.train);
    LabeledDataset test_set = subset(dataset, outer.test);

    std::vector<std::string> truth;
    truth.reserve(test_set.segments.size());
    for (const EventSegment& seg : test_set.segments) truth.push_back(seg.label);
    std::vector<PerClassRow> class_rows = per_class_rows(test_set, dataset.class_names);

    std::optional<StageOutput> raw_cache;
    auto raw_matrices = [&]() -> const StageOutput& {
        if (!raw_cache)
            raw_cache = StageOutput{raw_current_matrix(train_set), raw_current_matrix(test_set)};
        return *raw_cache;
    };

    const SamplingContext& context = dataset.segments.front().context;
    std::vector<EvalReport> reports;

    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const ModelSpec& model = models[mi];
        std::string stream = "model/" + std::to_string(mi) + "/" + model.name();
        auto stage_start = std::chrono::steady_clock::now();

        if (model.kind == ModelKind::Cnn) {
            nn::NetConfig config = model.net;
            config.architecture = nn::Arch::CNN;
            nn::FactorVector factors;
            if (config.factors.empty()) {
                // The end-to-end model always pools down to one step per
                // mains cycle; the 200-wide coding default applies to the
                // autoencoders only.
                factors = nn::derive_cnn_architecture(context);
            } else {
                for (double f : config.factors) {
                    auto rounded = static_cast<int>(std::llround(f));
                    if (std::abs(f - rounded) > 1e-9 || rounded < 1)
                        throw Error("cnn pool factors must be positive integers");
                    factors.factors.push_back(rounded);
                }
            }

            const StageOutput& raw = raw_matrices();
            NormalizerState norm = fit_input_norm(config, raw.train);
            FeatureMatrix net_train = apply(norm, raw.train);
            FeatureMatrix net_test = apply(norm, raw.test);

            Rng inner_rng = rng.fork(fnv1a(stream + "/inner-split"));
            SplitSpec inner_spec = spec;
            inner_spec.test_fraction = spec.validation_fraction;
            Split inner = stratified_split(train_set, inner_spec, false, inner_rng);

            auto gather = [&](const std::vector<std::size_t>& rows) {
                Eigen::MatrixXd x(static_cast<long>(rows.size()), net_train.values.cols());
                std::vector<int> y(rows.size());
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    x.row(static_cast<long>(i)) = net_train.values.row(static_cast<long>(rows[i]));
                    int cls = dataset.class_index(train_set.segments[rows[i]].label);
                    y[i] = cls;
                }
                return std::make_pair(std::move(x), std::move(y));
            };
            auto [x_fit, y_fit] = gather(inner.train);
            auto [x_val, y_val] = gather(inner.test);
            auto n_classes = static_cast<int>(dataset.class_names.size());

            Rng net_rng = rng.fork(fnv1a(stream + "/train") ^ config.seed);
            nn::Network net = nn::build_cnn(context, factors, n_classes, config, net_rng);
            nn::train_network(net, x_fit, nn::one_hot(y_fit, n_classes), x_val,
                              nn::one_hot(y_val, n_classes), config, net_rng);

            std::vector<int> predicted_idx = nn::predict_cnn(net, net_test.values);
            std::vector<std::string> predicted;
            predicted.reserve(predicted_idx.size());
            for (int idx : predicted_idx)
                predicted.push_back(dataset.class_names[static_cast<std::size_t>(idx)]);

            EvalReport report;
            report.model = model.name();
            report.classifier = "cnn";
            report.metrics = macro_metrics(truth, predicted, dataset.class_names);
            report.matrix = confusion(truth, predicted, dataset.class_names);
            report.per_class = class_rows;
            report.runtime_seconds = seconds_since(stage_start);
            reports.push_back(std::move(report));
            if (trained_out) {
                TrainedPipeline pipeline;
                pipeline.model = model.name();
                pipeline.classifier = "cnn";
                pipeline.kind = ModelKind::Cnn;
                pipeline.context = context;
                pipeline.class_names = dataset.class_names;
                pipeline.input_norm = std::move(norm);
                pipeline.network = std::make_shared<nn::Network>(std::move(net));
                trained_out->push_back(std::move(pipeline));
            }
            continue;
        }

        StageOutput features;
        std::optional<HandcraftedConfig> stage_handcrafted;
        std::vector<int> stage_sub_indices;
        std::optional<PcaState> stage_pca;
        std::optional<NormalizerState> stage_input_norm;
        std::optional<NormalizerState> stage_feature_norm;
        std::shared_ptr<nn::Network> stage_net;
        switch (model.kind) {
            case ModelKind::Handcrafted: {
                const HandcraftedConfig& config = model.handcrafted;
                auto extractor = [&config](const EventSegment& seg) {
                    return extract_handcrafted(seg, config);
                };
                features = {extract_matrix(train_set, extractor),
                            extract_matrix(test_set, extractor)};
                stage_handcrafted = config;
                break;
            }
            case ModelKind::Rms25: {
                auto extractor = [](const EventSegment& seg) { return rms25(seg); };
                features = {extract_matrix(train_set, extractor),
                            extract_matrix(test_set, extractor)};
                break;
            }
            case ModelKind::Subsample: {
                Rng sub_rng = rng.fork(fnv1a(stream + "/indices"));
                int dims = model.subsample_dims;
                auto extractor = [dims, sub_rng](const EventSegment& seg) {
                    return random_subsample(seg, dims, sub_rng);
                };
                features = {extract_matrix(train_set, extractor),
                            extract_matrix(test_set, extractor)};
                Rng idx_rng = sub_rng;  // same stream the extractor copies per segment
                for (std::size_t i :
                     idx_rng.sample_indices(static_cast<std::size_t>(context.samples_per_segment()),
                                            static_cast<std::size_t>(dims)))
                    stage_sub_indices.push_back(static_cast<int>(i));
                break;
            }
            case ModelKind::Pca: {
                const StageOutput& raw = raw_matrices();
                long d = raw.train.values.cols();
                long max_k = std::min<long>(raw.train.values.rows() - 1, d);
                int k = static_cast<int>(std::min<long>(model.pca_k, max_k));
                PcaState pca = fit_pca(raw.train, k);
                features = {apply(pca, raw.train), apply(pca, raw.test)};
                stage_pca = std::move(pca);
                break;
            }
            case ModelKind::Ae:
            case ModelKind::Cae: {
                nn::NetConfig config = model.net;
                config.architecture =
                    model.kind == ModelKind::Ae ? nn::Arch::AE : nn::Arch::CAE;
                config.loss = nn::LossKind::MSE;

                const StageOutput& raw = raw_matrices();
                NormalizerState norm = fit_input_norm(config, raw.train);
                FeatureMatrix net_train = apply(norm, raw.train);
                FeatureMatrix net_test = apply(norm, raw.test);

                Rng net_rng = rng.fork(fnv1a(stream + "/train") ^ config.seed);
                nn::Network net = [&] {
                    if (model.kind == ModelKind::Ae) {
                        std::vector<double> factors = config.factors;
                        if (factors.empty())
                            for (int f : default_factors(context))
                                factors.push_back(static_cast<double>(f));
                        return nn::build_ae(static_cast<int>(net_train.values.cols()), factors,
                                            config, net_rng);
                    }
                    std::vector<int> factors;
                    if (config.factors.empty()) {
                        factors = default_factors(context);
                    } else {
                        for (double f : config.factors) {
                            auto rounded = static_cast<int>(std::llround(f));
                            if (std::abs(f - rounded) > 1e-9 || rounded < 1)
                                throw Error("cae pool factors must be positive integers");
                            factors.push_back(rounded);
                        }
                    }
                    return nn::build_cae(context, factors, config, net_rng);
                }();
                Eigen::MatrixXd empty;
                nn::train_network(net, net_train.values, net_train.values, empty, empty, config,
                                  net_rng);
                stage_net = std::make_shared<nn::Network>(std::move(net));
                features = {nn::encode(*stage_net, net_train), nn::encode(*stage_net, net_test)};
                stage_input_norm = std::move(norm);
                break;
            }
            case ModelKind::Cnn:
                break;  // handled above
        }

        if (model.feature_norm != FeatureNorm::None) {
            NormalizerState norm =
                model.feature_norm == FeatureNorm::Variance
                    ? fit_variance_norm(features.train, model.feature_norm_uses_std)
                    : fit_maxabs_norm(features.train);
            features.train = apply(norm, features.train);
            features.test = apply(norm, features.test);
            stage_feature_norm = std::move(norm);
        }
        double stage_seconds = seconds_since(stage_start);

        for (ClassifierKind clf : model.classifiers) {
            auto clf_start = std::chrono::steady_clock::now();
            Rng clf_rng = rng.fork(fnv1a(stream + "/clf/" + classifier_name(clf)));
            TrainedClassifier trained =
                train_classifier(clf, features.train, model.classifier_config, clf_rng);
            std::vector<std::string> predicted = predict(trained, features.test);

            EvalReport report;
            report.model = model.name();
            report.classifier = classifier_name(clf);
            report.metrics = macro_metrics(truth, predicted, dataset.class_names);
            report.matrix = confusion(truth, predicted, dataset.class_names);
            report.per_class = class_rows;
            report.runtime_seconds = stage_seconds + seconds_since(clf_start);
            reports.push_back(std::move(report));
            if (trained_out) {
                TrainedPipeline pipeline;
                pipeline.model = model.name();
                pipeline.classifier = classifier_name(clf);
                pipeline.kind = model.kind;
                pipeline.context = context;
                pipeline.class_names = dataset.class_names;
                pipeline.handcrafted = stage_handcrafted;
                pipeline.subsample_indices = stage_sub_indices;
                pipeline.pca = stage_pca;
                pipeline.input_norm = stage_input_norm;
                pipeline.feature_norm = stage_feature_norm;
                pipeline.network = stage_net;
                pipeline.head = std::move(trained);
                trained_out->push_back(std::move(pipeline));
            }
        }
    }
    return reports;
}

}  // namespace nilm
