#include "nilm/report_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "nilm/errors.hpp"

namespace nilm {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

ordered_json report_to_json(const EvalReport& report) {
    ordered_json j;
    j["model"] = report.model;
    j["classifier"] = report.classifier;
    j["macro"] = {{"precision", report.metrics.macro_precision},
                  {"recall", report.metrics.macro_recall},
                  {"f_score", report.metrics.macro_f}};

    ordered_json per_class = ordered_json::array();
    for (std::size_t c = 0; c < report.metrics.per_class.size(); ++c) {
        const ClassMetrics& m = report.metrics.per_class[c];
        ordered_json row;
        row["class"] = m.class_name;
        row["tp"] = m.tp;
        row["fp"] = m.fp;
        row["fn"] = m.fn;
        row["precision"] = m.precision;
        row["recall"] = m.recall;
        row["f_score"] = m.f_score;
        if (c < report.per_class.size()) {
            row["test_count"] = report.per_class[c].test_count;
            row["mean_power"] = report.per_class[c].mean_power;
        }
        per_class.push_back(std::move(row));
    }
    j["per_class"] = std::move(per_class);

    ordered_json confusion;
    confusion["classes"] = report.matrix.classes;
    ordered_json counts = ordered_json::array();
    ordered_json normalized = ordered_json::array();
    for (long r = 0; r < report.matrix.counts.rows(); ++r) {
        ordered_json count_row = ordered_json::array();
        ordered_json norm_row = ordered_json::array();
        for (long c = 0; c < report.matrix.counts.cols(); ++c) {
            count_row.push_back(report.matrix.counts(r, c));
            norm_row.push_back(report.matrix.normalized(r, c));
        }
        counts.push_back(std::move(count_row));
        normalized.push_back(std::move(norm_row));
    }
    confusion["counts"] = std::move(counts);
    confusion["normalized"] = std::move(normalized);
    j["confusion"] = std::move(confusion);
    return j;
}

}  // namespace

void write_report_json(const std::vector<EvalReport>& reports, const std::string& path) {
    ordered_json doc;
    ordered_json list = ordered_json::array();
    for (const EvalReport& report : reports) list.push_back(report_to_json(report));
    doc["reports"] = std::move(list);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << doc.dump(2) << '\n';
    if (!out.flush()) throw IoError("write to '" + path + "' failed");
}

void write_report_csv(const std::vector<EvalReport>& reports, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "model,classifier,macro_precision,macro_recall,macro_f\n";
    for (const EvalReport& report : reports) {
        out << report.model << ',' << report.classifier << ','
            << format_double(report.metrics.macro_precision) << ','
            << format_double(report.metrics.macro_recall) << ','
            << format_double(report.metrics.macro_f) << '\n';
    }
    if (!out.flush()) throw IoError("write to '" + path + "' failed");
}

void print_console_table(const std::vector<EvalReport>& reports, std::ostream& out) {
    std::vector<std::string> models;
    std::vector<std::string> columns;
    for (const EvalReport& report : reports) {
        if (std::find(models.begin(), models.end(), report.model) == models.end())
            models.push_back(report.model);
        if (std::find(columns.begin(), columns.end(), report.classifier) == columns.end())
            columns.push_back(report.classifier);
    }

    auto find_report = [&reports](const std::string& model,
                                  const std::string& classifier) -> const EvalReport* {
        for (const EvalReport& report : reports)
            if (report.model == model && report.classifier == classifier) return &report;
        return nullptr;
    };

    char buf[64];
    out << "macro F-score (rows: models, columns: classifiers)\n";
    std::snprintf(buf, sizeof(buf), "%-12s", "model");
    out << buf;
    for (const std::string& c : columns) {
        std::snprintf(buf, sizeof(buf), " %8s", c.c_str());
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), " %10s", "runtime[s]");
    out << buf << '\n';

    for (const std::string& m : models) {
        std::snprintf(buf, sizeof(buf), "%-12s", m.c_str());
        out << buf;
        double runtime = 0.0;
        for (const std::string& c : columns) {
            const EvalReport* report = find_report(m, c);
            if (report) {
                std::snprintf(buf, sizeof(buf), " %8.3f", report->metrics.macro_f);
                runtime += report->runtime_seconds;
            } else {
                std::snprintf(buf, sizeof(buf), " %8s", "-");
            }
            out << buf;
        }
        std::snprintf(buf, sizeof(buf), " %10.2f", runtime);
        out << buf << '\n';
    }
}

}  // namespace nilm
