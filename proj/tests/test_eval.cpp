#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "nilm/eval.hpp"
#include "nilm/ingest.hpp"
#include "nilm/model_io.hpp"
#include "oracles.hpp"

using namespace nilm;

namespace {

LabeledDataset desk_dataset(int classes, int per_class, std::uint64_t seed) {
    SamplingContext ctx = make_context(2000, 50, 0.5);
    Rng rng(seed);
    return generate_dataset(default_signatures(classes), per_class, ctx, rng);
}

std::map<std::string, int> label_counts(const LabeledDataset& ds,
                                        const std::vector<std::size_t>& rows) {
    std::map<std::string, int> counts;
    for (std::size_t r : rows) counts[ds.segments[r].label]++;
    return counts;
}

}  // namespace

TEST_CASE("split fractions must lie strictly inside the unit interval") {
    SplitSpec spec;
    CHECK_NOTHROW(spec.validate());
    spec.test_fraction = 0.0;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec.test_fraction = 1.0;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = SplitSpec{};
    spec.validation_fraction = -0.1;
    CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("stratified split preserves proportions and partitions the rows") {
    LabeledDataset ds = desk_dataset(4, 20, 3);
    SplitSpec spec;  // 20% test, 20% validation of the remainder
    Rng rng(5);
    Split split = stratified_split(ds, spec, true, rng);

    CHECK(split.train.size() + split.validation.size() + split.test.size() == 80);
    std::set<std::size_t> seen;
    for (const auto* part : {&split.train, &split.validation, &split.test}) {
        CHECK(std::is_sorted(part->begin(), part->end()));
        for (std::size_t r : *part) CHECK(seen.insert(r).second);  // disjoint
    }
    CHECK(seen.size() == 80);

    // per class: 4 test, then 20% of the 16 remaining for validation
    for (const auto& [cls, n] : label_counts(ds, split.test)) CHECK(n == 4);
    for (const auto& [cls, n] : label_counts(ds, split.validation)) {
        CHECK(n >= 3);
        CHECK(n <= 4);
    }

    Rng rng_b(5);
    Split again = stratified_split(ds, spec, true, rng_b);
    CHECK(again.train == split.train);
    CHECK(again.test == split.test);

    Rng rng_c(6);
    Split other = stratified_split(ds, spec, true, rng_c);
    CHECK(other.test != split.test);  // the shuffle really is seeded

    Split no_val = stratified_split(ds, spec, false, rng);
    CHECK(no_val.validation.empty());
    CHECK(no_val.train.size() + no_val.test.size() == 80);
}

TEST_CASE("classes too small to split are rejected") {
    LabeledDataset ds = desk_dataset(2, 2, 7);
    SplitSpec spec;
    Rng rng(8);
    CHECK_NOTHROW(stratified_split(ds, spec, false, rng));
    CHECK_THROWS_AS(stratified_split(ds, spec, true, rng), ClassTooSmall);

    LabeledDataset tiny = desk_dataset(2, 1, 9);
    CHECK_THROWS_AS(stratified_split(tiny, spec, false, rng), ClassTooSmall);
}

TEST_CASE("subset keeps only the selected rows and their classes") {
    LabeledDataset ds = desk_dataset(3, 4, 11);
    // rows 0..3 are class 0, rows 4..7 class 1 (generation order per class)
    std::vector<std::size_t> rows{0, 1, 5};
    LabeledDataset sub = subset(ds, rows);
    REQUIRE(sub.size() == 3);
    CHECK(sub.segments[0].label == ds.segments[0].label);
    CHECK(sub.segments[2].label == ds.segments[5].label);
    std::set<std::string> classes(sub.class_names.begin(), sub.class_names.end());
    CHECK(classes.size() == 2);  // class 2 dropped
    CHECK(std::is_sorted(sub.class_names.begin(), sub.class_names.end()));
}

TEST_CASE("macro metrics match the worked example exactly") {
    std::vector<std::string> truth{"a", "a", "b", "b"};
    std::vector<std::string> pred{"a", "b", "b", "b"};
    MetricsReport report = macro_metrics(truth, pred, {"a", "b"});

    REQUIRE(report.per_class.size() == 2);
    const ClassMetrics& a = report.per_class[0];
    CHECK(a.class_name == "a");
    CHECK(a.tp == 1);
    CHECK(a.fp == 0);
    CHECK(a.fn == 1);
    CHECK(a.precision == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a.recall == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(a.f_score == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    const ClassMetrics& b = report.per_class[1];
    CHECK(b.tp == 2);
    CHECK(b.fp == 1);
    CHECK(b.fn == 0);
    CHECK(b.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(b.recall == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b.f_score == doctest::Approx(0.8).epsilon(1e-12));

    CHECK(report.macro_f == doctest::Approx((2.0 / 3.0 + 0.8) / 2.0).epsilon(1e-12));
    CHECK(report.macro_precision == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
    CHECK(report.macro_recall == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("classes never predicted or never present score zero, not NaN") {
    std::vector<std::string> truth{"a", "a"};
    std::vector<std::string> pred{"a", "a"};
    MetricsReport report = macro_metrics(truth, pred, {"a", "ghost"});
    REQUIRE(report.per_class.size() == 2);
    CHECK(report.per_class[1].precision == 0.0);
    CHECK(report.per_class[1].recall == 0.0);
    CHECK(report.per_class[1].f_score == 0.0);
    CHECK(report.macro_f == doctest::Approx(0.5).epsilon(1e-12));  // (1 + 0) / 2
}

TEST_CASE("macro metrics agree with a naive per-class oracle on random cases") {
    Rng rng(13);
    const std::vector<std::string> classes{"w", "x", "y", "z"};
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 5 + static_cast<int>(rng.uniform() * 60.0);
        std::vector<std::string> truth, pred;
        for (int i = 0; i < n; ++i) {
            truth.push_back(classes[static_cast<std::size_t>(rng.uniform() * 4.0)]);
            pred.push_back(classes[static_cast<std::size_t>(rng.uniform() * 4.0)]);
        }
        MetricsReport report = macro_metrics(truth, pred, classes);
        CHECK(report.macro_f ==
              doctest::Approx(oracles::naive_macro_f(truth, pred, classes)).epsilon(1e-12));
        for (std::size_t c = 0; c < classes.size(); ++c) {
            oracles::NaiveClassMetrics want = oracles::naive_class_metrics(truth, pred, classes[c]);
            CHECK(report.per_class[c].tp == want.tp);
            CHECK(report.per_class[c].fp == want.fp);
            CHECK(report.per_class[c].fn == want.fn);
            CHECK(report.per_class[c].f_score == doctest::Approx(want.f).epsilon(1e-12));
        }
    }
}

TEST_CASE("metric computation rejects mismatched lengths") {
    CHECK_THROWS_AS(macro_metrics({"a"}, {"a", "b"}, {"a", "b"}), LengthMismatch);
    CHECK_THROWS_AS(confusion({"a"}, {"a", "b"}, {"a", "b"}), LengthMismatch);
}

TEST_CASE("confusion rows count pairs and normalize to exactly 100") {
    std::vector<std::string> truth, pred;
    // class a: 2 correct of 3; class b: all 3 correct
    truth = {"a", "a", "a", "b", "b", "b"};
    pred = {"a", "a", "b", "b", "b", "b"};
    ConfusionMatrix cm = confusion(truth, pred, {"a", "b"});
    CHECK(cm.counts(0, 0) == 2);
    CHECK(cm.counts(0, 1) == 1);
    CHECK(cm.counts(1, 0) == 0);
    CHECK(cm.counts(1, 1) == 3);
    CHECK(cm.normalized(0, 0) == 67);  // largest remainder rounding of 66.67/33.33
    CHECK(cm.normalized(0, 1) == 33);
    CHECK(cm.normalized(1, 1) == 100);
    CHECK(cm.normalized.row(0).sum() == 100);

    // a three-way tie rounds without losing a point
    truth.assign(3, "a");
    pred = {"a", "b", "c"};
    ConfusionMatrix three = confusion(truth, pred, {"a", "b", "c"});
    CHECK(three.normalized.row(0).sum() == 100);
    std::vector<int> row{three.normalized(0, 0), three.normalized(0, 1), three.normalized(0, 2)};
    std::sort(row.begin(), row.end());
    CHECK(row == std::vector<int>{33, 33, 34});

    // a class with no test rows keeps an all-zero normalized row
    ConfusionMatrix empty_row = confusion({"a"}, {"a"}, {"a", "b"});
    CHECK(empty_row.normalized.row(1).sum() == 0);
}

TEST_CASE("row normalization matches the naive largest-remainder oracle") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + static_cast<int>(rng.uniform() * 5.0);
        std::vector<long> counts(static_cast<std::size_t>(k));
        long total = 0;
        for (auto& c : counts) {
            c = static_cast<long>(rng.uniform() * 20.0);
            total += c;
        }
        if (total == 0) continue;
        std::vector<std::string> classes, truth, pred;
        for (int i = 0; i < k; ++i) classes.push_back(std::string(1, char('a' + i)));
        for (int i = 0; i < k; ++i)
            for (long j = 0; j < counts[static_cast<std::size_t>(i)]; ++j) {
                truth.push_back("a");
                pred.push_back(classes[static_cast<std::size_t>(i)]);
            }
        ConfusionMatrix cm = confusion(truth, pred, classes);
        std::vector<int> want = oracles::naive_percentages(counts);
        for (int i = 0; i < k; ++i) CHECK(cm.normalized(0, i) == want[static_cast<std::size_t>(i)]);
    }
}

TEST_CASE("model kind names round-trip and defaults are sensible") {
    for (auto kind : {ModelKind::Handcrafted, ModelKind::Ae, ModelKind::Cae, ModelKind::Cnn,
                      ModelKind::Subsample, ModelKind::Rms25, ModelKind::Pca}) {
        CHECK(parse_model_kind(model_kind_name(kind)) == kind);
    }
    CHECK_THROWS_AS(parse_model_kind("transformer"), Error);

    ModelSpec hand = ModelSpec::for_kind(ModelKind::Handcrafted);
    CHECK(hand.feature_norm == FeatureNorm::Variance);
    CHECK(hand.feature_norm_uses_std);

    ModelSpec ae = ModelSpec::for_kind(ModelKind::Ae);
    CHECK(ae.net.architecture == nn::Arch::AE);
    CHECK(ae.net.loss == nn::LossKind::MSE);
    CHECK(ae.net.optimizer == nn::OptimizerKind::ADAM);
    CHECK(ae.net.learning_rate == 1e-4);
    CHECK(ae.net.l2 == 1e-5);
    CHECK(ae.net.input_noise_std == 0.005);

    ModelSpec cnn = ModelSpec::for_kind(ModelKind::Cnn);
    CHECK(cnn.net.architecture == nn::Arch::CNN);
    CHECK(cnn.net.loss == nn::LossKind::CROSS_ENTROPY);
    CHECK(cnn.net.optimizer == nn::OptimizerKind::SGD);

    ModelSpec sub = ModelSpec::for_kind(ModelKind::Subsample);
    CHECK(sub.subsample_dims == 212);
    CHECK(sub.feature_norm == FeatureNorm::None);

    ModelSpec pca = ModelSpec::for_kind(ModelKind::Pca);
    CHECK(pca.pca_k == 212);
}

TEST_CASE("benchmark emits one report per model and classifier in input order") {
    LabeledDataset ds = desk_dataset(3, 12, 19);
    std::vector<ModelSpec> models;
    models.push_back(ModelSpec::for_kind(ModelKind::Rms25));
    models.push_back(ModelSpec::for_kind(ModelKind::Handcrafted));
    models[0].classifiers = {ClassifierKind::Knn, ClassifierKind::Bdt};
    models[1].classifiers = {ClassifierKind::Knn};

    SplitSpec spec;
    Rng rng(21);
    std::vector<TrainedPipeline> trained;
    std::vector<EvalReport> reports = run_benchmark(ds, models, spec, rng, &trained);

    REQUIRE(reports.size() == 3);
    CHECK(reports[0].model == "rms25");
    CHECK(reports[0].classifier == "knn");
    CHECK(reports[1].model == "rms25");
    CHECK(reports[1].classifier == "bdt");
    CHECK(reports[2].model == "handcrafted");
    CHECK(reports[2].classifier == "knn");
    CHECK(trained.size() == 3);

    // the shared test split gives every report identical per-class test counts
    REQUIRE(reports[0].per_class.size() == 3);
    for (const EvalReport& r : reports) {
        REQUIRE(r.per_class.size() == 3);
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(r.per_class[c].class_name == reports[0].per_class[c].class_name);
            CHECK(r.per_class[c].test_count == reports[0].per_class[c].test_count);
            CHECK(r.per_class[c].test_count >= 2);  // 12 samples at 20% test
        }
        CHECK(r.metrics.per_class.size() == 3);
        CHECK(r.metrics.macro_f >= 0.0);
        CHECK(r.metrics.macro_f <= 1.0);
    }

    // same seed, same reports; macro F values land identically
    Rng rng_b(21);
    std::vector<EvalReport> again = run_benchmark(ds, models, spec, rng_b);
    REQUIRE(again.size() == reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i) {
        CHECK(again[i].metrics.macro_f == reports[i].metrics.macro_f);
        CHECK(again[i].matrix.counts == reports[i].matrix.counts);
    }
}

TEST_CASE("the end-to-end model reports a single pseudo classifier row") {
    LabeledDataset ds = desk_dataset(2, 10, 23);
    ModelSpec cnn = ModelSpec::for_kind(ModelKind::Cnn);
    cnn.net.epochs = 2;  // keep the unit test fast; quality is checked elsewhere
    cnn.net.patience = 2;
    SplitSpec spec;
    Rng rng(29);
    std::vector<EvalReport> reports = run_benchmark(ds, {cnn}, spec, rng);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].model == "cnn");
    CHECK(reports[0].classifier == "cnn");
}

TEST_CASE("benchmark validates its inputs") {
    LabeledDataset ds = desk_dataset(2, 6, 31);
    SplitSpec bad;
    bad.test_fraction = 0.0;
    Rng rng(33);
    CHECK_THROWS_AS(run_benchmark(ds, {ModelSpec::for_kind(ModelKind::Rms25)}, bad, rng), Error);
    SplitSpec spec;
    CHECK_THROWS_AS(run_benchmark(ds, {}, spec, rng), Error);
}
