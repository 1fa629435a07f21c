#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nilm/eval.hpp"

namespace nilm {

/// Serializes reports (scores, confusion matrices, per-class table) as one
/// JSON document. Runtime is deliberately excluded so identical runs write
/// byte-identical files.
void write_report_json(const std::vector<EvalReport>& reports, const std::string& path);

/// One CSV row per model x classifier with the macro scores; same
/// determinism contract as the JSON writer.
void write_report_csv(const std::vector<EvalReport>& reports, const std::string& path);

/// Macro-F grid (models as rows, classifiers as columns) plus per-row
/// runtimes, for terminal display.
void print_console_table(const std::vector<EvalReport>& reports, std::ostream& out);

}  // namespace nilm
