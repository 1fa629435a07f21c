#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nilm/errors.hpp"
#include "nilm/eval.hpp"
#include "nilm/events.hpp"
#include "nilm/ingest.hpp"
#include "nilm/model_io.hpp"
#include "nilm/nn/network.hpp"
#include "nilm/report_io.hpp"
#include "nilm/rng.hpp"

namespace {

using nlohmann::json;

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw nilm::IoError("cannot open config file '" + path + "'");
    json config;
    try {
        in >> config;
    } catch (const json::parse_error& e) {
        throw nilm::FormatError("config file '" + path + "': " + e.what());
    }
    if (!config.is_object()) throw nilm::FormatError("config file must hold a JSON object");
    return config;
}

// CLI flags win over config-file values, which win over built-in defaults.
template <typename T>
void config_default(const json& config, const char* key, const CLI::Option* opt, T& var) {
    if (opt->count() > 0 || !config.contains(key)) return;
    try {
        var = config.at(key).get<T>();
    } catch (const json::exception& e) {
        throw nilm::FormatError(std::string("config key '") + key + "': " + e.what());
    }
}

[[noreturn]] void usage_error(const std::string& message) {
    std::cerr << "usage error: " << message << '\n';
    std::exit(2);
}

struct GenerateArgs {
    int classes = 8;
    int per_class = 100;
    double fs = 2000.0;
    double f0 = 50.0;
    double duration = 0.5;
    std::uint64_t seed = 1;
    std::string out;
};

int cmd_generate(const GenerateArgs& args) {
    if (args.out.empty()) usage_error("generate requires --out");
    if (args.classes < 1 || args.per_class < 1)
        usage_error("--classes and --per-class must be positive");
    nilm::SamplingContext context = nilm::make_context(args.fs, args.f0, args.duration);
    nilm::Rng rng(args.seed);
    nilm::LabeledDataset dataset = nilm::generate_dataset(
        nilm::default_signatures(static_cast<std::size_t>(args.classes)),
        static_cast<std::size_t>(args.per_class), context, rng);
    nilm::write_segments(dataset, args.out);
    std::cout << "wrote " << dataset.size() << " segments (" << args.classes << " classes x "
              << args.per_class << ") to " << args.out << '\n';
    return 0;
}

struct DetectArgs {
    std::string power_csv;
    std::string appliance;
    std::string threshold_file;
    double on_threshold = -1.0;   // < 0: not set
    double off_threshold = -1.0;  // < 0: not set
    std::string out;
};

nilm::PowerSeries read_power_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw nilm::IoError("cannot open power trace '" + path + "'");
    nilm::PowerSeries series;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::string fields = line;
        for (char& c : fields)
            if (c == ',') c = ' ';
        std::istringstream row(fields);
        double timestamp = 0.0, watts = 0.0;
        if (!(row >> timestamp >> watts)) {
            if (line_no == 1) continue;  // header row
            throw nilm::FormatError(path + ":" + std::to_string(line_no) +
                                    ": expected 'timestamp,watts'");
        }
        std::string extra;
        if (row >> extra)
            throw nilm::FormatError(path + ":" + std::to_string(line_no) + ": trailing fields");
        series.timestamps.push_back(timestamp);
        series.power.push_back(watts);
    }
    series.validate();
    return series;
}

int cmd_detect(const DetectArgs& args) {
    if (args.power_csv.empty()) usage_error("detect requires --power");
    if (args.out.empty()) usage_error("detect requires --out");
    bool on_set = args.on_threshold >= 0.0;
    bool off_set = args.off_threshold >= 0.0;
    if (on_set != off_set) usage_error("--on and --off must be given together");

    nilm::EventThresholds thresholds;  // blond_default values
    if (!args.appliance.empty()) {
        nilm::ThresholdTable table = nilm::builtin_thresholds();
        if (!args.threshold_file.empty())
            for (const auto& [name, entry] : nilm::read_threshold_table(args.threshold_file))
                table[name] = entry;
        auto it = table.find(args.appliance);
        if (it == table.end())
            throw nilm::UnknownAppliance("no thresholds for appliance '" + args.appliance + "'");
        thresholds = it->second;
    } else if (!args.threshold_file.empty()) {
        usage_error("--thresholds needs --appliance to pick an entry");
    }
    if (on_set) thresholds = nilm::EventThresholds{args.on_threshold, args.off_threshold};
    thresholds.validate();

    nilm::PowerSeries series = read_power_csv(args.power_csv);
    std::vector<nilm::DetectedEvent> events = nilm::detect_events(series, thresholds);

    std::ofstream out(args.out, std::ios::binary | std::ios::trunc);
    if (!out) throw nilm::IoError("cannot open '" + args.out + "' for writing");
    out << "kind,timestamp\n";
    char buf[48];
    for (const nilm::DetectedEvent& event : events) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g\n",
                      event.kind == nilm::EventKind::On ? "on" : "off", event.timestamp);
        out << buf;
    }
    if (!out.flush()) throw nilm::IoError("write to '" + args.out + "' failed");
    std::cout << "wrote " << events.size() << " events to " << args.out << '\n';
    return 0;
}

struct BenchmarkArgs {
    std::string data;
    int classes = 8;
    int per_class = 100;
    double fs = 2000.0;
    double f0 = 50.0;
    double duration = 0.5;
    std::uint64_t seed = 1;
    std::vector<std::string> models;
    std::vector<std::string> classifiers;
    std::string preset;
    int epochs = -1;  // < 0: keep per-model defaults
    int subsample_dims = 212;
    int pca_k = 212;
    double test_fraction = 0.2;
    double validation_fraction = 0.2;
    bool save_models = false;
    std::string out;
};

int cmd_benchmark(const BenchmarkArgs& args) {
    if (args.out.empty()) usage_error("benchmark requires --out");

    std::vector<std::string> model_names = args.models;
    if (model_names.empty())
        model_names = {"handcrafted", "ae", "cae", "cnn", "subsample", "rms25", "pca"};
    std::vector<std::string> classifier_names = args.classifiers;
    if (classifier_names.empty()) classifier_names = {"knn", "lda", "svm", "bdt"};

    std::vector<nilm::ClassifierKind> classifiers;
    for (const std::string& name : classifier_names)
        classifiers.push_back(nilm::parse_classifier(name));

    std::vector<nilm::ModelSpec> models;
    for (const std::string& name : model_names) {
        nilm::ModelSpec spec = nilm::ModelSpec::for_kind(nilm::parse_model_kind(name));
        spec.classifiers = classifiers;
        spec.subsample_dims = args.subsample_dims;
        spec.pca_k = args.pca_k;
        spec.net.seed = args.seed;
        models.push_back(std::move(spec));
    }
    if (!args.preset.empty()) {
        nilm::nn::NetConfig preset = nilm::nn::preset_config(args.preset);
        bool applied = false;
        for (nilm::ModelSpec& spec : models) {
            bool matches = (spec.kind == nilm::ModelKind::Ae && preset.architecture == nilm::nn::Arch::AE) ||
                           (spec.kind == nilm::ModelKind::Cae && preset.architecture == nilm::nn::Arch::CAE) ||
                           (spec.kind == nilm::ModelKind::Cnn && preset.architecture == nilm::nn::Arch::CNN);
            if (matches) {
                std::uint64_t seed = spec.net.seed;
                spec.net = preset;
                spec.net.seed = seed;
                applied = true;
            }
        }
        if (!applied)
            usage_error("--preset " + args.preset + " matches none of the selected models");
    }
    if (args.epochs > 0)
        for (nilm::ModelSpec& spec : models) spec.net.epochs = args.epochs;

    nilm::Rng rng(args.seed);
    nilm::LabeledDataset dataset;
    if (!args.data.empty()) {
        dataset = nilm::read_segments(args.data);
    } else {
        nilm::SamplingContext context = nilm::make_context(args.fs, args.f0, args.duration);
        nilm::Rng data_rng = rng.fork(0x64617461);  // independent generator stream
        dataset = nilm::generate_dataset(
            nilm::default_signatures(static_cast<std::size_t>(args.classes)),
            static_cast<std::size_t>(args.per_class), context, data_rng);
    }

    nilm::SplitSpec split;
    split.test_fraction = args.test_fraction;
    split.validation_fraction = args.validation_fraction;

    std::vector<nilm::TrainedPipeline> pipelines;
    std::vector<nilm::EvalReport> reports = nilm::run_benchmark(
        dataset, models, split, rng, args.save_models ? &pipelines : nullptr);

    namespace fs = std::filesystem;
    fs::create_directories(args.out);
    nilm::write_report_json(reports, (fs::path(args.out) / "report.json").string());
    nilm::write_report_csv(reports, (fs::path(args.out) / "report.csv").string());
    if (args.save_models) {
        fs::path model_dir = fs::path(args.out) / "models";
        fs::create_directories(model_dir);
        for (nilm::TrainedPipeline& pipeline : pipelines) {
            std::string file = pipeline.model + "-" + pipeline.classifier + ".mdl";
            nilm::save_pipeline(pipeline, (model_dir / file).string());
        }
    }
    nilm::print_console_table(reports, std::cout);
    std::cout << "wrote " << reports.size() << " reports to " << args.out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"event-based electrical appliance recognition toolkit"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON file with defaults for unset flags");

    GenerateArgs gen;
    CLI::App* generate = app.add_subcommand("generate", "write a synthetic labeled segment file");
    auto* g_classes = generate->add_option("--classes", gen.classes, "number of appliance classes");
    auto* g_per = generate->add_option("--per-class", gen.per_class, "segments per class");
    auto* g_fs = generate->add_option("--fs", gen.fs, "sampling rate [Hz]");
    auto* g_f0 = generate->add_option("--f0", gen.f0, "mains frequency [Hz]");
    auto* g_dur = generate->add_option("--duration", gen.duration, "segment length [s]");
    auto* g_seed = generate->add_option("--seed", gen.seed, "generator seed");
    auto* g_out = generate->add_option("--out", gen.out, "output segment file");

    DetectArgs det;
    CLI::App* detect = app.add_subcommand("detect", "detect on/off events in a power trace");
    auto* d_power = detect->add_option("--power", det.power_csv, "CSV of timestamp,watts");
    auto* d_appliance =
        detect->add_option("--appliance", det.appliance, "appliance name for threshold lookup");
    auto* d_table = detect->add_option("--thresholds", det.threshold_file,
                                       "threshold override file (name on off per line)");
    auto* d_on = detect->add_option("--on", det.on_threshold, "ON threshold [W]");
    auto* d_off = detect->add_option("--off", det.off_threshold, "OFF threshold [W]");
    auto* d_out = detect->add_option("--out", det.out, "output events CSV");

    BenchmarkArgs bench;
    CLI::App* benchmark = app.add_subcommand("benchmark", "train and score classification models");
    auto* b_data = benchmark->add_option("--data", bench.data, "segment file (else synthetic)");
    auto* b_classes = benchmark->add_option("--classes", bench.classes, "synthetic classes");
    auto* b_per = benchmark->add_option("--per-class", bench.per_class, "synthetic segments per class");
    auto* b_fs = benchmark->add_option("--fs", bench.fs, "synthetic sampling rate [Hz]");
    auto* b_f0 = benchmark->add_option("--f0", bench.f0, "synthetic mains frequency [Hz]");
    auto* b_dur = benchmark->add_option("--duration", bench.duration, "synthetic segment length [s]");
    auto* b_seed = benchmark->add_option("--seed", bench.seed, "seed for every stochastic choice");
    auto* b_models =
        benchmark->add_option("--models", bench.models, "models to run")->delimiter(',');
    auto* b_clf = benchmark->add_option("--classifiers", bench.classifiers, "classifier heads")
                      ->delimiter(',');
    auto* b_preset = benchmark->add_option("--preset", bench.preset,
                                           "named network preset applied to its architecture");
    auto* b_epochs = benchmark->add_option("--epochs", bench.epochs, "epoch cap for all networks");
    auto* b_sub = benchmark->add_option("--subsample-dims", bench.subsample_dims,
                                        "random-subsample dimensions");
    auto* b_pca = benchmark->add_option("--pca-k", bench.pca_k, "principal components kept");
    auto* b_test = benchmark->add_option("--test-fraction", bench.test_fraction, "test share");
    auto* b_val = benchmark->add_option("--validation-fraction", bench.validation_fraction,
                                        "validation share of the training rows");
    auto* b_save = benchmark->add_flag("--save-models", bench.save_models,
                                       "serialize each trained pipeline under <out>/models");
    auto* b_out = benchmark->add_option("--out", bench.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        json config = load_config(config_path);
        if (generate->parsed()) {
            config_default(config, "classes", g_classes, gen.classes);
            config_default(config, "per_class", g_per, gen.per_class);
            config_default(config, "fs", g_fs, gen.fs);
            config_default(config, "f0", g_f0, gen.f0);
            config_default(config, "duration", g_dur, gen.duration);
            config_default(config, "seed", g_seed, gen.seed);
            config_default(config, "out", g_out, gen.out);
            return cmd_generate(gen);
        }
        if (detect->parsed()) {
            config_default(config, "power", d_power, det.power_csv);
            config_default(config, "appliance", d_appliance, det.appliance);
            config_default(config, "thresholds", d_table, det.threshold_file);
            config_default(config, "on", d_on, det.on_threshold);
            config_default(config, "off", d_off, det.off_threshold);
            config_default(config, "out", d_out, det.out);
            return cmd_detect(det);
        }
        if (benchmark->parsed()) {
            config_default(config, "data", b_data, bench.data);
            config_default(config, "classes", b_classes, bench.classes);
            config_default(config, "per_class", b_per, bench.per_class);
            config_default(config, "fs", b_fs, bench.fs);
            config_default(config, "f0", b_f0, bench.f0);
            config_default(config, "duration", b_dur, bench.duration);
            config_default(config, "seed", b_seed, bench.seed);
            config_default(config, "models", b_models, bench.models);
            config_default(config, "classifiers", b_clf, bench.classifiers);
            config_default(config, "preset", b_preset, bench.preset);
            config_default(config, "epochs", b_epochs, bench.epochs);
            config_default(config, "subsample_dims", b_sub, bench.subsample_dims);
            config_default(config, "pca_k", b_pca, bench.pca_k);
            config_default(config, "test_fraction", b_test, bench.test_fraction);
            config_default(config, "validation_fraction", b_val, bench.validation_fraction);
            config_default(config, "save_models", b_save, bench.save_models);
            config_default(config, "out", b_out, bench.out);
            return cmd_benchmark(bench);
        }
    } catch (const nilm::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
