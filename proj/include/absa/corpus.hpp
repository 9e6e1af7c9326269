#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "absa/labels.hpp"

namespace absa {

// One (sentence, aspect term, gold polarity) classification unit. Text fields are
// NFC-normalized at parse time; no other transformation is ever applied.
struct AspectInstance {
    DatasetId dataset_id = DatasetId::haad;
    std::string review_id;
    std::string sentence_id;
    std::string sentence_text;
    std::string aspect_text;
    std::string aspect_category;  // empty when the source carries none
    std::size_t char_from = 0;
    std::size_t char_to = 0;
    Polarity polarity = Polarity::positive;

    bool operator==(const AspectInstance&) const = default;
};

// An offset whose substring does not reproduce the annotated aspect term. Reported,
// never repaired.
struct OffsetMismatch {
    std::string sentence_id;
    std::size_t char_from = 0;
    std::size_t char_to = 0;
    std::string aspect_text;
    std::string found;  // what the offsets actually select
    std::string issue;  // "substring mismatch" | "offsets out of range"
};

struct ParseReport {
    std::vector<OffsetMismatch> offset_mismatches;
    std::vector<std::string> skipped_comment_ids;   // news T5/T6 elements
    std::size_t skipped_text_level_opinions = 0;    // hotels text-level annotations
    std::size_t sentences_seen = 0;

    void merge(const ParseReport& other);
};

struct LabeledCorpus {
    DatasetId dataset_id = DatasetId::haad;
    std::vector<AspectInstance> instances;
    std::vector<SplitTag> split_tags;  // parallel to instances
    std::vector<Polarity> label_inventory;
    // True when the split tags came from the source's own train/test file identity.
    bool official_split = false;

    std::size_t size() const { return instances.size(); }
    LabelMap label_map() const { return LabelMap(label_inventory); }
    std::vector<const AspectInstance*> split(SplitTag tag) const;
};

struct ParsedCorpus {
    LabeledCorpus corpus;
    ParseReport report;
};

// The three schema parsers. `tag` records which source file the document is (train or
// test); the split operation can retag later.
ParsedCorpus parse_haad(std::string_view xml_bytes, SplitTag tag = SplitTag::train);
ParsedCorpus parse_news(std::string_view xml_bytes, SplitTag tag = SplitTag::train);
ParsedCorpus parse_hotels(std::string_view xml_bytes, SplitTag tag = SplitTag::train);

// Concatenates a train-file parse and a test-file parse into one corpus carrying
// official split identity.
ParsedCorpus merge_official(ParsedCorpus train_part, ParsedCorpus test_part);

enum class SplitMode : std::uint8_t { official, random_70_10_20 };

std::string_view to_string(SplitMode m);

// official: keeps source train/test, carves a stratified dev set (10% of the whole
// corpus) out of train. random_70_10_20: label-stratified 70/10/20 repartition.
// Deterministic for a fixed seed.
LabeledCorpus split(const LabeledCorpus& corpus, SplitMode mode, std::uint64_t seed);

struct CorpusStats {
    DatasetId dataset_id = DatasetId::haad;
    std::vector<Polarity> label_inventory;
    // counts[split][polarity], indexed by the enum values.
    std::array<std::array<std::size_t, 4>, 3> counts{};

    std::size_t split_total(SplitTag t) const;
    std::size_t label_total(Polarity p) const;
    std::size_t grand_total() const;

    std::string render_text() const;  // aligned table, one row per split plus overall
    std::string render_json() const;
};

CorpusStats stats(const LabeledCorpus& corpus);

// One JSON object per instance (AspectInstance fields plus split_tag), UTF-8, LF
// terminated. Returns the number of records written.
std::size_t export_jsonl(const LabeledCorpus& corpus, std::ostream& out,
                         const std::string& destination_name);
LabeledCorpus import_jsonl(std::istream& in, const std::string& source_name);

}  // namespace absa
