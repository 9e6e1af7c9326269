#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "absa/corpus.hpp"

namespace absa {

struct TieBreakRecord {
    std::string aspect;  // "<global>" for the corpus-wide majority
    std::vector<Polarity> tied;
    Polarity chosen = Polarity::positive;
};

// Majority-polarity model: per-aspect majorities with a global-majority fallback for
// unseen aspects. Aspect keys are NFC-normalized strings; matching is exact equality.
struct BaselineModel {
    std::map<std::string, Polarity> per_aspect_majorities;
    Polarity global_majority = Polarity::positive;
    std::vector<TieBreakRecord> tie_break_trace;

    std::string to_json() const;
    static BaselineModel from_json(const std::string& text, const std::string& source_name);
};

// Counts per-aspect and global label frequencies over the training instances.
// Ties break by global training-label frequency, then by fixed label order
// (positive > negative > neutral > conflict); every tie-break lands in the trace.
BaselineModel fit_baseline(std::span<const AspectInstance> train);

Polarity predict_baseline(const BaselineModel& model, const std::string& aspect_text);

struct BaselineEval {
    double accuracy = 0.0;
    std::size_t correct = 0;
    std::size_t total = 0;
    // correct/support per label, indexed by Polarity enum value.
    std::array<std::array<std::size_t, 4>, 2> per_class{};  // [0]=correct, [1]=support
};

BaselineEval evaluate_baseline(const BaselineModel& model,
                               std::span<const AspectInstance> test);

}  // namespace absa
