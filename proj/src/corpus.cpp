#include "absa/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "absa/errors.hpp"
#include "absa/text.hpp"
#include "absa/xml.hpp"

namespace absa {

using json = nlohmann::ordered_json;

void ParseReport::merge(const ParseReport& other) {
    offset_mismatches.insert(offset_mismatches.end(), other.offset_mismatches.begin(),
                             other.offset_mismatches.end());
    skipped_comment_ids.insert(skipped_comment_ids.end(), other.skipped_comment_ids.begin(),
                               other.skipped_comment_ids.end());
    skipped_text_level_opinions += other.skipped_text_level_opinions;
    sentences_seen += other.sentences_seen;
}

std::vector<const AspectInstance*> LabeledCorpus::split(SplitTag tag) const {
    std::vector<const AspectInstance*> out;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (split_tags[i] == tag) out.push_back(&instances[i]);
    }
    return out;
}

namespace {

std::size_t parse_offset(const std::string& value, const std::string& context) {
    std::size_t result = 0;
    const char* begin = value.data();
    const char* end = begin + value.size();
    auto [ptr, ec] = std::from_chars(begin, end, result);
    if (ec != std::errc() || ptr != end) {
        throw SchemaError("schema error in " + context + ": offset attribute '" + value +
                          "' is not a non-negative integer");
    }
    return result;
}

const std::string& require_attr(const XmlElement& el, std::string_view key,
                                const std::string& context) {
    const std::string* v = el.attribute(key);
    if (v == nullptr) {
        throw SchemaError("schema error in " + context + ": <" + el.name +
                          "> missing required attribute '" + std::string(key) + "'");
    }
    return *v;
}

Polarity parse_polarity(const std::string& raw, const std::vector<Polarity>& inventory,
                        const std::string& context) {
    auto p = polarity_from_string(raw);
    if (!p) {
        throw SchemaError("schema error in " + context + ": unknown polarity '" + raw + "'");
    }
    if (std::find(inventory.begin(), inventory.end(), *p) == inventory.end()) {
        throw SchemaError("schema error in " + context + ": polarity '" + raw +
                          "' is outside this dataset's label inventory");
    }
    return *p;
}

// Offsets are validated against the stored (NFC) text; failures are recorded, the
// instance is kept as annotated.
void check_offsets(const AspectInstance& inst, ParseReport& report) {
    if (inst.char_from == 0 && inst.char_to == 0) return;  // NULL-target or absent offsets
    std::size_t len = codepoint_count(inst.sentence_text);
    if (inst.char_from > inst.char_to || inst.char_to > len) {
        report.offset_mismatches.push_back({inst.sentence_id, inst.char_from, inst.char_to,
                                            inst.aspect_text, "", "offsets out of range"});
        return;
    }
    std::string found = codepoint_substr(inst.sentence_text, inst.char_from, inst.char_to);
    if (found != inst.aspect_text) {
        report.offset_mismatches.push_back({inst.sentence_id, inst.char_from, inst.char_to,
                                            inst.aspect_text, found, "substring mismatch"});
    }
}

std::string sentence_text_of(const XmlElement& sentence, const std::string& context) {
    const XmlElement* text = sentence.first_child_ci("text");
    if (text == nullptr) {
        throw SchemaError("schema error in " + context + ": missing <text> child");
    }
    return nfc(text->text);
}

// Shared by HAAD sentences and news posts: SemEval-2014 style
// <aspectTerms><aspectTerm term polarity from to/></aspectTerms>.
void collect_aspect_terms(const XmlElement& sentence, const std::string& sentence_id,
                          const std::string& sentence_text, DatasetId dataset,
                          const std::vector<Polarity>& inventory,
                          std::vector<AspectInstance>& out, ParseReport& report) {
    const XmlElement* terms = sentence.first_child_ci("aspectTerms");
    if (terms == nullptr) return;  // no aspect terms, nothing to classify
    std::string context = "sentence '" + sentence_id + "'";
    for (const XmlElement& term : terms->children) {
        if (!ascii_iequals(term.name, "aspectTerm")) continue;
        AspectInstance inst;
        inst.dataset_id = dataset;
        inst.sentence_id = sentence_id;
        inst.sentence_text = sentence_text;
        inst.aspect_text = nfc(require_attr(term, "term", context));
        inst.polarity = parse_polarity(require_attr(term, "polarity", context), inventory, context);
        inst.char_from = parse_offset(require_attr(term, "from", context), context);
        inst.char_to = parse_offset(require_attr(term, "to", context), context);
        if (inst.sentence_text.empty()) {
            throw SchemaError("schema error in " + context + ": empty <text> with aspect terms");
        }
        if (inst.aspect_text.empty()) {
            throw SchemaError("schema error in " + context + ": empty aspect term");
        }
        check_offsets(inst, report);
        out.push_back(std::move(inst));
    }
}

}  // namespace

ParsedCorpus parse_haad(std::string_view xml_bytes, SplitTag tag) {
    XmlElement root = xml_parse(xml_bytes);
    if (!ascii_iequals(root.name, "sentences")) {
        throw SchemaError("schema error: expected <sentences> root for the haad schema, found <" +
                          root.name + ">");
    }
    ParsedCorpus result;
    result.corpus.dataset_id = DatasetId::haad;
    result.corpus.label_inventory = label_inventory(DatasetId::haad);
    for (const XmlElement& sentence : root.children) {
        if (!ascii_iequals(sentence.name, "sentence")) continue;
        result.report.sentences_seen += 1;
        const std::string* id = sentence.attribute("id");
        std::string sentence_id = id ? *id : "?";
        std::string text = sentence_text_of(sentence, "sentence '" + sentence_id + "'");
        collect_aspect_terms(sentence, sentence_id, text, DatasetId::haad,
                             result.corpus.label_inventory, result.corpus.instances,
                             result.report);
    }
    result.corpus.split_tags.assign(result.corpus.instances.size(), tag);
    return result;
}

ParsedCorpus parse_news(std::string_view xml_bytes, SplitTag tag) {
    XmlElement root = xml_parse(xml_bytes);
    if (!ascii_iequals(root.name, "posts")) {
        throw SchemaError("schema error: expected <posts> root for the news schema, found <" +
                          root.name + ">");
    }
    ParsedCorpus result;
    result.corpus.dataset_id = DatasetId::news;
    result.corpus.label_inventory = label_inventory(DatasetId::news);
    for (const XmlElement& node : root.children) {
        if (ascii_iequals(node.name, "comment")) {
            // Comment-level annotations (T5/T6) are out of scope; audit every skip.
            const std::string* cid = node.attribute("id");
            result.report.skipped_comment_ids.push_back(cid ? *cid : "?");
            continue;
        }
        if (!ascii_iequals(node.name, "post")) continue;
        result.report.sentences_seen += 1;
        const std::string* id = node.attribute("id");
        std::string post_id = id ? *id : "?";
        std::string text = sentence_text_of(node, "post '" + post_id + "'");
        collect_aspect_terms(node, post_id, text, DatasetId::news,
                             result.corpus.label_inventory, result.corpus.instances,
                             result.report);
        for (const XmlElement& nested : node.children) {
            if (ascii_iequals(nested.name, "comment")) {
                const std::string* cid = nested.attribute("id");
                result.report.skipped_comment_ids.push_back(cid ? *cid : "?");
            }
        }
    }
    result.corpus.split_tags.assign(result.corpus.instances.size(), tag);
    return result;
}

ParsedCorpus parse_hotels(std::string_view xml_bytes, SplitTag tag) {
    XmlElement root = xml_parse(xml_bytes);
    if (!ascii_iequals(root.name, "Reviews")) {
        throw SchemaError("schema error: expected <Reviews> root for the hotels schema, found <" +
                          root.name + ">");
    }
    ParsedCorpus result;
    result.corpus.dataset_id = DatasetId::hotels;
    result.corpus.label_inventory = label_inventory(DatasetId::hotels);
    for (const XmlElement& review : root.children) {
        if (!ascii_iequals(review.name, "Review")) continue;
        const std::string* rid = review.attribute("rid");
        std::string review_id = rid ? *rid : "?";
        // Text-level annotations hang directly off <Review>; excluded from T2.
        if (const XmlElement* text_level = review.first_child_ci("Opinions")) {
            for (const XmlElement& op : text_level->children) {
                if (ascii_iequals(op.name, "Opinion")) {
                    result.report.skipped_text_level_opinions += 1;
                }
            }
        }
        const XmlElement* sentences = review.first_child_ci("sentences");
        if (sentences == nullptr) continue;
        for (const XmlElement& sentence : sentences->children) {
            if (!ascii_iequals(sentence.name, "sentence")) continue;
            result.report.sentences_seen += 1;
            const std::string* sid = sentence.attribute("id");
            std::string sentence_id = sid ? *sid : "?";
            std::string context = "sentence '" + sentence_id + "'";
            std::string text = sentence_text_of(sentence, context);
            const XmlElement* opinions = sentence.first_child_ci("Opinions");
            if (opinions == nullptr) continue;
            for (const XmlElement& opinion : opinions->children) {
                if (!ascii_iequals(opinion.name, "Opinion")) continue;
                AspectInstance inst;
                inst.dataset_id = DatasetId::hotels;
                inst.review_id = review_id;
                inst.sentence_id = sentence_id;
                inst.sentence_text = text;
                inst.aspect_category = nfc(require_attr(opinion, "category", context));
                inst.polarity = parse_polarity(require_attr(opinion, "polarity", context),
                                               result.corpus.label_inventory, context);
                std::string target = nfc(require_attr(opinion, "target", context));
                if (target == "NULL") {
                    // Implicit target: the category string is the only available
                    // description, and the pair model needs a non-empty aspect.
                    inst.aspect_text = inst.aspect_category;
                    inst.char_from = 0;
                    inst.char_to = 0;
                } else {
                    inst.aspect_text = target;
                    inst.char_from =
                        parse_offset(require_attr(opinion, "from", context), context);
                    inst.char_to = parse_offset(require_attr(opinion, "to", context), context);
                }
                if (inst.sentence_text.empty()) {
                    throw SchemaError("schema error in " + context +
                                      ": empty <text> with opinions");
                }
                if (inst.aspect_text.empty()) {
                    throw SchemaError("schema error in " + context +
                                      ": empty opinion target after NULL resolution");
                }
                check_offsets(inst, result.report);
                result.corpus.instances.push_back(std::move(inst));
            }
        }
    }
    result.corpus.split_tags.assign(result.corpus.instances.size(), tag);
    return result;
}

ParsedCorpus merge_official(ParsedCorpus train_part, ParsedCorpus test_part) {
    if (train_part.corpus.dataset_id != test_part.corpus.dataset_id) {
        throw ConfigError("cannot merge corpora from different datasets");
    }
    ParsedCorpus merged = std::move(train_part);
    for (auto& tag : merged.corpus.split_tags) tag = SplitTag::train;
    for (std::size_t i = 0; i < test_part.corpus.instances.size(); ++i) {
        merged.corpus.instances.push_back(std::move(test_part.corpus.instances[i]));
        merged.corpus.split_tags.push_back(SplitTag::test);
    }
    merged.report.merge(test_part.report);
    merged.corpus.official_split = true;
    return merged;
}

std::string_view to_string(SplitMode m) {
    return m == SplitMode::official ? "official" : "random_70_10_20";
}

namespace {

// Hand-rolled Fisher-Yates: std::shuffle's draw sequence is implementation-defined,
// this one is reproducible everywhere. Modulo bias is irrelevant at corpus sizes.
void fisher_yates(std::vector<std::size_t>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

std::vector<std::size_t> label_indices(const LabeledCorpus& corpus, Polarity p) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < corpus.instances.size(); ++i) {
        if (corpus.instances[i].polarity == p) out.push_back(i);
    }
    return out;
}

}  // namespace

LabeledCorpus split(const LabeledCorpus& corpus, SplitMode mode, std::uint64_t seed) {
    LabeledCorpus out = corpus;
    std::mt19937_64 rng(seed);
    if (mode == SplitMode::random_70_10_20) {
        for (Polarity p : kAllPolarities) {
            std::vector<std::size_t> idx = label_indices(out, p);
            if (idx.empty()) continue;
            fisher_yates(idx, rng);
            std::size_t n = idx.size();
            std::size_t n_train = std::min(n, round_half_up(0.7 * static_cast<double>(n)));
            std::size_t n_dev =
                std::min(n - n_train, round_half_up(0.1 * static_cast<double>(n)));
            for (std::size_t k = 0; k < n; ++k) {
                SplitTag tag = k < n_train             ? SplitTag::train
                               : k < n_train + n_dev   ? SplitTag::dev
                                                       : SplitTag::test;
                out.split_tags[idx[k]] = tag;
            }
        }
        out.official_split = false;
        return out;
    }

    // Official mode: test stays as sourced; dev (10% of the whole corpus, stratified)
    // is carved from the train portion. A previously carved dev pools back into train.
    if (!corpus.official_split) {
        throw ConfigError("official split requested but the corpus carries no source "
                          "train/test identity");
    }
    for (std::size_t i = 0; i < out.split_tags.size(); ++i) {
        if (out.split_tags[i] == SplitTag::dev) out.split_tags[i] = SplitTag::train;
    }
    for (Polarity p : kAllPolarities) {
        std::vector<std::size_t> pool;
        std::size_t label_total = 0;
        for (std::size_t i = 0; i < out.instances.size(); ++i) {
            if (out.instances[i].polarity != p) continue;
            ++label_total;
            if (out.split_tags[i] == SplitTag::train) pool.push_back(i);
        }
        if (label_total == 0) continue;
        std::size_t want = round_half_up(0.1 * static_cast<double>(label_total));
        want = std::min(want, pool.size());
        fisher_yates(pool, rng);
        for (std::size_t k = 0; k < want; ++k) out.split_tags[pool[k]] = SplitTag::dev;
    }
    return out;
}

CorpusStats stats(const LabeledCorpus& corpus) {
    CorpusStats s;
    s.dataset_id = corpus.dataset_id;
    s.label_inventory = corpus.label_inventory;
    for (std::size_t i = 0; i < corpus.instances.size(); ++i) {
        s.counts[static_cast<int>(corpus.split_tags[i])]
                [static_cast<int>(corpus.instances[i].polarity)] += 1;
    }
    return s;
}

std::size_t CorpusStats::split_total(SplitTag t) const {
    std::size_t total = 0;
    for (auto c : counts[static_cast<int>(t)]) total += c;
    return total;
}

std::size_t CorpusStats::label_total(Polarity p) const {
    std::size_t total = 0;
    for (const auto& row : counts) total += row[static_cast<int>(p)];
    return total;
}

std::size_t CorpusStats::grand_total() const {
    std::size_t total = 0;
    for (SplitTag t : {SplitTag::train, SplitTag::dev, SplitTag::test}) total += split_total(t);
    return total;
}

namespace {

// Column order used by the published distribution table.
constexpr std::array<Polarity, 4> kTableColumnOrder = {Polarity::positive, Polarity::negative,
                                                       Polarity::conflict, Polarity::neutral};

std::vector<Polarity> table_columns(const std::vector<Polarity>& inventory) {
    std::vector<Polarity> cols;
    for (Polarity p : kTableColumnOrder) {
        if (std::find(inventory.begin(), inventory.end(), p) != inventory.end()) {
            cols.push_back(p);
        }
    }
    return cols;
}

}  // namespace

std::string CorpusStats::render_text() const {
    std::vector<Polarity> cols = table_columns(label_inventory);
    std::ostringstream os;
    os << "dataset: " << to_string(dataset_id) << "\n";
    os << std::left << std::setw(10) << "split";
    for (Polarity p : cols) os << std::right << std::setw(10) << to_string(p);
    os << std::right << std::setw(10) << "total" << "\n";
    auto row = [&](const std::string& name, auto count_of, std::size_t total) {
        os << std::left << std::setw(10) << name;
        for (Polarity p : cols) os << std::right << std::setw(10) << count_of(p);
        os << std::right << std::setw(10) << total << "\n";
    };
    for (SplitTag t : {SplitTag::train, SplitTag::dev, SplitTag::test}) {
        row(std::string(to_string(t)),
            [&](Polarity p) { return counts[static_cast<int>(t)][static_cast<int>(p)]; },
            split_total(t));
    }
    row("overall", [&](Polarity p) { return label_total(p); }, grand_total());
    return os.str();
}

std::string CorpusStats::render_json() const {
    json j;
    j["dataset_id"] = std::string(to_string(dataset_id));
    json splits = json::object();
    for (SplitTag t : {SplitTag::train, SplitTag::dev, SplitTag::test}) {
        json row = json::object();
        for (Polarity p : table_columns(label_inventory)) {
            row[std::string(to_string(p))] = counts[static_cast<int>(t)][static_cast<int>(p)];
        }
        row["total"] = split_total(t);
        splits[std::string(to_string(t))] = row;
    }
    j["splits"] = splits;
    json overall = json::object();
    for (Polarity p : table_columns(label_inventory)) {
        overall[std::string(to_string(p))] = label_total(p);
    }
    overall["total"] = grand_total();
    j["overall"] = overall;
    return j.dump(2);
}

std::size_t export_jsonl(const LabeledCorpus& corpus, std::ostream& out,
                         const std::string& destination_name) {
    std::size_t written = 0;
    for (std::size_t i = 0; i < corpus.instances.size(); ++i) {
        const AspectInstance& inst = corpus.instances[i];
        json j;
        j["dataset_id"] = std::string(to_string(inst.dataset_id));
        j["review_id"] = inst.review_id;
        j["sentence_id"] = inst.sentence_id;
        j["sentence_text"] = inst.sentence_text;
        j["aspect_text"] = inst.aspect_text;
        if (inst.aspect_category.empty()) {
            j["aspect_category"] = nullptr;
        } else {
            j["aspect_category"] = inst.aspect_category;
        }
        j["char_from"] = inst.char_from;
        j["char_to"] = inst.char_to;
        j["polarity"] = std::string(to_string(inst.polarity));
        j["split_tag"] = std::string(to_string(corpus.split_tags[i]));
        out << j.dump() << "\n";
        if (!out.good()) {
            throw IoError("write failure on '" + destination_name + "' at record " +
                          std::to_string(i));
        }
        ++written;
    }
    out.flush();
    if (!out.good()) throw IoError("flush failure on '" + destination_name + "'");
    return written;
}

LabeledCorpus import_jsonl(std::istream& in, const std::string& source_name) {
    LabeledCorpus corpus;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    bool has_train = false, has_test = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("'" + source_name + "' line " + std::to_string(line_no) + ": " +
                             e.what());
        }
        auto field = [&](const char* key) -> const json& {
            if (!j.contains(key)) {
                throw ParseError("'" + source_name + "' line " + std::to_string(line_no) +
                                 ": missing field '" + key + "'");
            }
            return j.at(key);
        };
        AspectInstance inst;
        auto ds = dataset_from_string(field("dataset_id").get<std::string>());
        if (!ds) {
            throw ParseError("'" + source_name + "' line " + std::to_string(line_no) +
                             ": unknown dataset_id");
        }
        inst.dataset_id = *ds;
        if (first) {
            corpus.dataset_id = *ds;
            corpus.label_inventory = label_inventory(*ds);
            first = false;
        } else if (*ds != corpus.dataset_id) {
            throw ParseError("'" + source_name + "' line " + std::to_string(line_no) +
                             ": mixed dataset_id values in one corpus");
        }
        inst.review_id = field("review_id").get<std::string>();
        inst.sentence_id = field("sentence_id").get<std::string>();
        inst.sentence_text = field("sentence_text").get<std::string>();
        inst.aspect_text = field("aspect_text").get<std::string>();
        const json& cat = field("aspect_category");
        inst.aspect_category = cat.is_null() ? std::string() : cat.get<std::string>();
        inst.char_from = field("char_from").get<std::size_t>();
        inst.char_to = field("char_to").get<std::size_t>();
        auto pol = polarity_from_string(field("polarity").get<std::string>());
        if (!pol) {
            throw ParseError("'" + source_name + "' line " + std::to_string(line_no) +
                             ": unknown polarity");
        }
        inst.polarity = *pol;
        auto tag = split_tag_from_string(field("split_tag").get<std::string>());
        if (!tag) {
            throw ParseError("'" + source_name + "' line " + std::to_string(line_no) +
                             ": unknown split_tag");
        }
        has_train = has_train || *tag == SplitTag::train;
        has_test = has_test || *tag == SplitTag::test;
        corpus.instances.push_back(std::move(inst));
        corpus.split_tags.push_back(*tag);
    }
    if (first) {
        // Zero-record corpora keep a usable default inventory.
        corpus.label_inventory = label_inventory(corpus.dataset_id);
    }
    corpus.official_split = has_train && has_test;
    return corpus;
}

}  // namespace absa
