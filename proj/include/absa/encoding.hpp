#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absa/corpus.hpp"
#include "absa/tokenizer.hpp"

namespace absa {

enum class InputMode : std::uint8_t { single, pair };

std::string_view to_string(InputMode m);
std::optional<InputMode> input_mode_from_string(std::string_view s);

// Identifies the instance an encoding came from.
struct InstanceKey {
    DatasetId dataset_id = DatasetId::haad;
    std::string review_id;
    std::string sentence_id;
    std::size_t char_from = 0;
    std::size_t char_to = 0;

    bool operator==(const InstanceKey&) const = default;
    auto operator<=>(const InstanceKey&) const = default;
};

InstanceKey key_of(const AspectInstance& inst);

// Fixed-length (T) model input. token_ids[0] is always [CLS]; pad positions carry
// pad_id, mask 0, segment 0. Pair mode: segments are 0 through the first [SEP]
// inclusive, 1 through the second.
struct EncodedExample {
    std::vector<int> token_ids;
    std::vector<int> segment_ids;
    std::vector<int> attention_mask;
    int label_id = 0;
    InstanceKey instance_key;

    std::size_t non_pad_length() const;
};

// Aggregates which instances lost review-sentence tokens to the length budget.
struct TruncationReport {
    std::vector<InstanceKey> truncated;
    std::size_t count() const { return truncated.size(); }
    std::string to_json() const;
};

// [CLS] sentence [SEP], padded to T. Overflowing sentences are cut at the tail and
// flagged in the report.
EncodedExample encode_single(const AspectInstance& inst, const TokenizerHandle& tok,
                             const LabelMap& labels, TruncationReport* report = nullptr);

// [CLS] sentence [SEP] aspect [SEP], padded to T. Overflow truncates the review
// sentence only; an aspect longer than T-3 on its own is an encoding error.
EncodedExample encode_pair(const AspectInstance& inst, const TokenizerHandle& tok,
                           const LabelMap& labels, TruncationReport* report = nullptr);

// Index batches over [0, count): document order without a seed, a seeded shuffle with
// one. Every index appears exactly once; the last batch may be short.
std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size,
                                                   std::optional<std::uint64_t> shuffle_seed);

}  // namespace absa
