#include "absa/report.hpp"

#include "absa/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace absa {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kSupportedSchemaVersion = 1;

// Table 3 column order.
const char* kDatasetOrder[] = {"hotels", "news", "haad"};

// Fixed row order for the known models; anything else sorts after, alphabetically.
int model_rank(const std::string& model) {
    if (model == "baseline-majority") return 0;
    if (model == "bert-single") return 1;
    if (model == "bert-pair") return 2;
    return 3;
}

std::string row_label(const LoadedReport& r) {
    // The frozen marker only makes sense for models that have an encoder to freeze.
    if (r.fine_tune || r.input_mode == "none") {
        return r.model;
    }
    return r.model + " (frozen)";
}

}  // namespace

LoadedReport parse_report(const std::string& json_text, const std::string& source) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("cannot parse report " + source + ": " + e.what());
    }
    const int version = j.value("schema_version", -1);
    if (version != kSupportedSchemaVersion) {
        throw ConfigError("report " + source + " has schema version " +
                          std::to_string(version) + "; this build reads version " +
                          std::to_string(kSupportedSchemaVersion));
    }
    if (j.value("kind", "") != "eval_report") {
        throw ConfigError("report " + source + " is not an eval_report document");
    }
    LoadedReport out;
    out.source = source;
    try {
        out.model = j.at("model").get<std::string>();
        out.dataset = j.at("dataset").get<std::string>();
        out.input_mode = j.value("input_mode", "none");
        out.fine_tune = j.value("fine_tune", true);
        out.test_accuracy = j.at("test_accuracy").get<double>();
        out.fingerprint = j.at("fingerprint").get<std::string>();
        out.model_selection = j.value("model_selection", "last");
        out.seed = j.value("seed", std::uint64_t{0});
        for (const auto& p : j.value("dev_curve", ordered_json::array())) {
            out.dev_curve.push_back(
                {p.at("epoch").get<int>(), p.at("accuracy").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("report " + source + " is missing required fields: " + e.what());
    }
    return out;
}

ConsolidatedReports consolidate_reports(const std::vector<LoadedReport>& reports) {
    ConsolidatedReports out;
    std::set<std::string> seen;
    for (const LoadedReport& r : reports) {
        const std::string key =
            r.fingerprint + '|' + r.model + '|' + r.dataset + '|' + r.input_mode + '|' +
            (r.fine_tune ? "tuned" : "frozen");
        if (!seen.insert(key).second) {
            out.warnings.push_back("duplicate report dropped: " + r.source +
                                   " (fingerprint " + r.fingerprint + ")");
            continue;
        }
        out.unique.push_back(r);
    }

    std::vector<std::string> columns;
    for (const char* d : kDatasetOrder) {
        if (std::any_of(out.unique.begin(), out.unique.end(),
                        [d](const LoadedReport& r) { return r.dataset == d; })) {
            columns.emplace_back(d);
        }
    }
    // Datasets outside the known trio still get columns, appended in input order.
    for (const LoadedReport& r : out.unique) {
        if (std::find(columns.begin(), columns.end(), r.dataset) == columns.end()) {
            columns.push_back(r.dataset);
        }
    }

    std::vector<std::string> rows;
    for (const LoadedReport& r : out.unique) {
        if (std::find(rows.begin(), rows.end(), row_label(r)) == rows.end()) {
            rows.push_back(row_label(r));
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const std::string& a, const std::string& b) {
        const int ra = model_rank(a.substr(0, a.find(' ')));
        const int rb = model_rank(b.substr(0, b.find(' ')));
        return ra != rb ? ra < rb : a < b;
    });

    std::map<std::pair<std::string, std::string>, double> cells;
    for (const LoadedReport& r : out.unique) {
        const auto key = std::make_pair(row_label(r), r.dataset);
        if (cells.count(key)) {
            out.warnings.push_back("conflicting entry for " + key.first + " on " +
                                   key.second + " from " + r.source + "; keeping the first");
            continue;
        }
        cells[key] = r.test_accuracy;
    }

    std::size_t row_width = std::string("model").size();
    for (const std::string& r : rows) {
        row_width = std::max(row_width, r.size());
    }
    std::ostringstream text;
    text << std::left << std::setw(static_cast<int>(row_width) + 2) << "model";
    for (const std::string& c : columns) {
        text << std::right << std::setw(10) << c;
    }
    text << '\n';
    for (const std::string& r : rows) {
        text << std::left << std::setw(static_cast<int>(row_width) + 2) << r;
        for (const std::string& c : columns) {
            auto it = cells.find({r, c});
            if (it == cells.end()) {
                text << std::right << std::setw(10) << "-";
            } else {
                std::ostringstream cell;
                cell << std::fixed << std::setprecision(2) << it->second * 100.0;
                text << std::right << std::setw(10) << cell.str();
            }
        }
        text << '\n';
    }
    out.table_text = text.str();

    ordered_json jt;
    jt["columns"] = columns;
    ordered_json jrows = ordered_json::array();
    for (const std::string& r : rows) {
        ordered_json row;
        row["model"] = r;
        ordered_json cellmap;
        for (const std::string& c : columns) {
            auto it = cells.find({r, c});
            cellmap[c] = it == cells.end() ? ordered_json(nullptr) : ordered_json(it->second);
        }
        row["accuracy"] = cellmap;
        jrows.push_back(row);
    }
    jt["rows"] = jrows;
    out.table_json = jt.dump(2);
    return out;
}

std::string report_curve_csv(const LoadedReport& report) {
    std::ostringstream os;
    os << "epoch,accuracy\n";
    for (const DevPoint& p : report.dev_curve) {
        os << p.epoch << ',' << std::fixed << std::setprecision(6) << p.accuracy << '\n';
    }
    return os.str();
}

}  // namespace absa
