#pragma once

#include "absa/trainer.hpp"

#include <string>
#include <vector>

namespace absa {

// One evaluation report as read back from disk. `source` is whatever the caller wants
// diagnostics to name (usually the path).
struct LoadedReport {
    std::string source;
    std::string model;
    std::string dataset;
    std::string input_mode;
    bool fine_tune = true;
    double test_accuracy = 0.0;
    std::string fingerprint;
    std::vector<DevPoint> dev_curve;
    std::string model_selection;
    std::uint64_t seed = 0;
};

// Parses a report JSON document. Unsupported schema versions raise ConfigError naming
// the found and supported versions; malformed JSON raises ParseError naming `source`.
LoadedReport parse_report(const std::string& json_text, const std::string& source);

struct ConsolidatedReports {
    std::vector<LoadedReport> unique;  // first occurrence wins, input order kept
    std::vector<std::string> warnings;
    std::string table_text;  // rows = models, columns = datasets
    std::string table_json;
};

// Deduplicates (same fingerprint + model identity) and lays the survivors out as an
// aligned accuracy table, columns in fixed dataset order: hotels, news, haad.
ConsolidatedReports consolidate_reports(const std::vector<LoadedReport>& reports);

// "epoch,accuracy" CSV of one report's dev curve, one row per epoch.
std::string report_curve_csv(const LoadedReport& report);

}  // namespace absa
