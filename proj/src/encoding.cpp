#include "absa/encoding.hpp"

#include <algorithm>
#include <random>

#include <nlohmann/json.hpp>

#include "absa/errors.hpp"

namespace absa {

using json = nlohmann::ordered_json;

std::string_view to_string(InputMode m) {
    return m == InputMode::single ? "single" : "pair";
}

std::optional<InputMode> input_mode_from_string(std::string_view s) {
    if (s == "single") return InputMode::single;
    if (s == "pair") return InputMode::pair;
    return std::nullopt;
}

InstanceKey key_of(const AspectInstance& inst) {
    return {inst.dataset_id, inst.review_id, inst.sentence_id, inst.char_from, inst.char_to};
}

std::size_t EncodedExample::non_pad_length() const {
    std::size_t n = 0;
    for (int m : attention_mask) n += static_cast<std::size_t>(m);
    return n;
}

std::string TruncationReport::to_json() const {
    json j;
    j["truncation_count"] = truncated.size();
    json list = json::array();
    for (const InstanceKey& key : truncated) {
        json k;
        k["dataset_id"] = std::string(to_string(key.dataset_id));
        k["review_id"] = key.review_id;
        k["sentence_id"] = key.sentence_id;
        k["char_from"] = key.char_from;
        k["char_to"] = key.char_to;
        list.push_back(k);
    }
    j["truncated"] = list;
    return j.dump(2);
}

namespace {

EncodedExample finalize(std::vector<int> body, std::size_t segment_boundary,
                        const AspectInstance& inst, const TokenizerHandle& tok,
                        const LabelMap& labels) {
    const std::size_t T = static_cast<std::size_t>(tok.max_sequence_length());
    EncodedExample ex;
    ex.instance_key = key_of(inst);
    ex.label_id = labels.id_of(inst.polarity);
    ex.token_ids = std::move(body);
    const std::size_t used = ex.token_ids.size();
    ex.token_ids.resize(T, tok.pad_id());
    ex.segment_ids.assign(T, 0);
    for (std::size_t i = segment_boundary; i < used; ++i) ex.segment_ids[i] = 1;
    ex.attention_mask.assign(T, 0);
    std::fill_n(ex.attention_mask.begin(), used, 1);
    return ex;
}

}  // namespace

EncodedExample encode_single(const AspectInstance& inst, const TokenizerHandle& tok,
                             const LabelMap& labels, TruncationReport* report) {
    const std::size_t T = static_cast<std::size_t>(tok.max_sequence_length());
    std::vector<int> sentence = tok.tokenize(inst.sentence_text);
    if (sentence.empty()) {
        throw EncodingError("sentence '" + inst.sentence_id + "' tokenized to zero subwords");
    }
    if (sentence.size() > T - 2) {
        sentence.resize(T - 2);
        if (report) report->truncated.push_back(key_of(inst));
    }
    std::vector<int> body;
    body.reserve(sentence.size() + 2);
    body.push_back(tok.cls_id());
    body.insert(body.end(), sentence.begin(), sentence.end());
    body.push_back(tok.sep_id());
    const std::size_t boundary = body.size();  // all segment 0 in single mode
    return finalize(std::move(body), boundary, inst, tok, labels);
}

EncodedExample encode_pair(const AspectInstance& inst, const TokenizerHandle& tok,
                           const LabelMap& labels, TruncationReport* report) {
    const std::size_t T = static_cast<std::size_t>(tok.max_sequence_length());
    std::vector<int> sentence = tok.tokenize(inst.sentence_text);
    if (sentence.empty()) {
        throw EncodingError("sentence '" + inst.sentence_id + "' tokenized to zero subwords");
    }
    std::vector<int> aspect = tok.tokenize(inst.aspect_text);
    if (aspect.empty()) {
        throw EncodingError("aspect of sentence '" + inst.sentence_id +
                            "' tokenized to zero subwords");
    }
    if (aspect.size() > T - 3) {
        throw EncodingError("aspect of sentence '" + inst.sentence_id + "' needs " +
                            std::to_string(aspect.size()) + " subwords, budget is " +
                            std::to_string(T - 3));
    }
    // The aspect is the classification anchor: overflow cuts the review sentence only.
    const std::size_t sentence_budget = T - 3 - aspect.size();
    if (sentence.size() > sentence_budget) {
        sentence.resize(sentence_budget);
        if (report) report->truncated.push_back(key_of(inst));
    }
    std::vector<int> body;
    body.reserve(sentence.size() + aspect.size() + 3);
    body.push_back(tok.cls_id());
    body.insert(body.end(), sentence.begin(), sentence.end());
    body.push_back(tok.sep_id());
    const std::size_t boundary = body.size();  // first index of segment 1
    body.insert(body.end(), aspect.begin(), aspect.end());
    body.push_back(tok.sep_id());
    return finalize(std::move(body), boundary, inst, tok, labels);
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size,
                                                   std::optional<std::uint64_t> shuffle_seed) {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    if (shuffle_seed) {
        std::mt19937_64 rng(*shuffle_seed);
        for (std::size_t i = count; i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(rng() % i);
            std::swap(order[i - 1], order[j]);
        }
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t at = 0; at < count; at += batch_size) {
        std::size_t take = std::min(batch_size, count - at);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                             order.begin() + static_cast<std::ptrdiff_t>(at + take));
    }
    return batches;
}

}  // namespace absa
