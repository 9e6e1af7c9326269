#include "absa/baseline.hpp"

#include <array>

#include <nlohmann/json.hpp>

#include "absa/errors.hpp"
#include "absa/text.hpp"

namespace absa {

using json = nlohmann::ordered_json;

namespace {

using Counts = std::array<std::size_t, 4>;

// argmax over label counts with the documented tie-break chain. `global_counts` is
// null while computing the global majority itself (fixed order only).
Polarity majority_of(const Counts& counts, const Counts* global_counts,
                     std::vector<Polarity>* tied_out) {
    std::size_t best = 0;
    for (std::size_t c : counts) best = std::max(best, c);
    std::vector<Polarity> tied;
    for (Polarity p : kAllPolarities) {
        if (counts[static_cast<int>(p)] == best) tied.push_back(p);
    }
    if (tied.size() == 1) {
        return tied.front();
    }
    if (tied_out) *tied_out = tied;
    if (global_counts) {
        std::size_t best_global = 0;
        for (Polarity p : tied) {
            best_global = std::max(best_global, (*global_counts)[static_cast<int>(p)]);
        }
        for (Polarity p : kAllPolarities) {  // canonical order settles remaining ties
            if (counts[static_cast<int>(p)] == best &&
                (*global_counts)[static_cast<int>(p)] == best_global) {
                return p;
            }
        }
    }
    return tied.front();  // kAllPolarities order == fixed tie-break order
}

}  // namespace

BaselineModel fit_baseline(std::span<const AspectInstance> train) {
    if (train.empty()) {
        throw ConfigError("baseline fit requires a non-empty training set");
    }
    Counts global{};
    std::map<std::string, Counts> per_aspect;
    for (const AspectInstance& inst : train) {
        global[static_cast<int>(inst.polarity)] += 1;
        per_aspect[nfc(inst.aspect_text)][static_cast<int>(inst.polarity)] += 1;
    }

    BaselineModel model;
    std::vector<Polarity> tied;
    model.global_majority = majority_of(global, nullptr, &tied);
    if (!tied.empty()) {
        model.tie_break_trace.push_back({"<global>", tied, model.global_majority});
    }
    for (const auto& [aspect, counts] : per_aspect) {
        tied.clear();
        Polarity winner = majority_of(counts, &global, &tied);
        model.per_aspect_majorities[aspect] = winner;
        if (!tied.empty()) {
            model.tie_break_trace.push_back({aspect, tied, winner});
        }
    }
    return model;
}

Polarity predict_baseline(const BaselineModel& model, const std::string& aspect_text) {
    auto it = model.per_aspect_majorities.find(nfc(aspect_text));
    return it != model.per_aspect_majorities.end() ? it->second : model.global_majority;
}

BaselineEval evaluate_baseline(const BaselineModel& model,
                               std::span<const AspectInstance> test) {
    if (test.empty()) {
        throw ConfigError("baseline evaluation requires a non-empty test set");
    }
    BaselineEval eval;
    for (const AspectInstance& inst : test) {
        Polarity predicted = predict_baseline(model, inst.aspect_text);
        int label = static_cast<int>(inst.polarity);
        eval.per_class[1][label] += 1;
        if (predicted == inst.polarity) {
            eval.per_class[0][label] += 1;
            eval.correct += 1;
        }
        eval.total += 1;
    }
    eval.accuracy = static_cast<double>(eval.correct) / static_cast<double>(eval.total);
    return eval;
}

std::string BaselineModel::to_json() const {
    json j;
    json aspects = json::object();
    for (const auto& [aspect, label] : per_aspect_majorities) {
        aspects[aspect] = std::string(to_string(label));
    }
    j["aspect_majorities"] = aspects;
    j["global_majority"] = std::string(to_string(global_majority));
    json trace = json::array();
    for (const TieBreakRecord& rec : tie_break_trace) {
        json r;
        r["aspect"] = rec.aspect;
        json tied = json::array();
        for (Polarity p : rec.tied) tied.push_back(std::string(to_string(p)));
        r["tied"] = tied;
        r["chosen"] = std::string(to_string(rec.chosen));
        trace.push_back(r);
    }
    j["tie_break_trace"] = trace;
    return j.dump(2);
}

BaselineModel BaselineModel::from_json(const std::string& text, const std::string& source_name) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError("'" + source_name + "': " + e.what());
    }
    BaselineModel model;
    try {
        for (const auto& [aspect, label] : j.at("aspect_majorities").items()) {
            auto p = polarity_from_string(label.get<std::string>());
            if (!p) throw ParseError("'" + source_name + "': unknown polarity in aspect map");
            model.per_aspect_majorities[aspect] = *p;
        }
        auto g = polarity_from_string(j.at("global_majority").get<std::string>());
        if (!g) throw ParseError("'" + source_name + "': unknown global majority");
        model.global_majority = *g;
        for (const auto& rec : j.at("tie_break_trace")) {
            TieBreakRecord r;
            r.aspect = rec.at("aspect").get<std::string>();
            for (const auto& t : rec.at("tied")) {
                auto p = polarity_from_string(t.get<std::string>());
                if (!p) throw ParseError("'" + source_name + "': unknown polarity in trace");
                r.tied.push_back(*p);
            }
            auto c = polarity_from_string(rec.at("chosen").get<std::string>());
            if (!c) throw ParseError("'" + source_name + "': unknown polarity in trace");
            r.chosen = *c;
            model.tie_break_trace.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw ParseError("'" + source_name + "': " + e.what());
    }
    return model;
}

}  // namespace absa
