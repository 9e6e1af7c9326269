#include "absa/tokenizer.hpp"

#include <fstream>
#include <istream>

#include "absa/errors.hpp"
#include "absa/text.hpp"

namespace absa {

namespace {

// Words longer than this many code points go straight to [UNK], matching the reference
// WordPiece behavior for pathological inputs.
constexpr std::size_t kMaxWordChars = 100;

}  // namespace

TokenizerHandle TokenizerHandle::load(std::istream& vocab, const std::string& source_name,
                                      int max_sequence_length) {
    if (max_sequence_length < 8) {
        throw ConfigError("max_sequence_length must be at least 8, got " +
                          std::to_string(max_sequence_length));
    }
    TokenizerHandle handle;
    handle.max_sequence_length_ = max_sequence_length;
    std::string line;
    while (std::getline(vocab, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        int id = static_cast<int>(handle.tokens_.size());
        handle.ids_.emplace(line, id);
        handle.tokens_.push_back(std::move(line));
    }
    if (handle.tokens_.empty()) {
        throw ConfigError("vocabulary '" + source_name + "' is empty");
    }
    handle.cls_id_ = handle.id_of("[CLS]");
    handle.sep_id_ = handle.id_of("[SEP]");
    handle.pad_id_ = handle.id_of("[PAD]");
    handle.unk_id_ = handle.id_of("[UNK]");
    for (auto [name, id] : {std::pair{"[CLS]", handle.cls_id_}, {"[SEP]", handle.sep_id_},
                            {"[PAD]", handle.pad_id_}, {"[UNK]", handle.unk_id_}}) {
        if (id < 0) {
            throw ConfigError("vocabulary '" + source_name + "' is missing the " +
                              std::string(name) + " token");
        }
    }
    if (handle.cls_id_ == handle.sep_id_ || handle.cls_id_ == handle.pad_id_ ||
        handle.sep_id_ == handle.pad_id_) {
        throw ConfigError("vocabulary '" + source_name + "' maps special tokens to one id");
    }
    return handle;
}

TokenizerHandle TokenizerHandle::load_file(const std::string& path, int max_sequence_length) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary file '" + path + "'");
    return load(in, path, max_sequence_length);
}

const std::string& TokenizerHandle::token_of(int id) const {
    if (id < 0 || id >= vocab_size()) {
        throw ContractError("token id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

int TokenizerHandle::id_of(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? -1 : it->second;
}

std::vector<int> TokenizerHandle::tokenize(std::string_view text) const {
    std::u32string cps = utf8_decode(text);
    std::vector<std::u32string> words;
    std::u32string current;
    for (char32_t cp : cps) {
        if (is_space_cp(cp)) {
            if (!current.empty()) words.push_back(std::exchange(current, {}));
        } else if (is_punct_cp(cp)) {
            if (!current.empty()) words.push_back(std::exchange(current, {}));
            words.push_back(std::u32string(1, cp));
        } else {
            current.push_back(cp);
        }
    }
    if (!current.empty()) words.push_back(std::move(current));

    std::vector<int> ids;
    ids.reserve(words.size());
    for (const std::u32string& word : words) {
        if (word.size() > kMaxWordChars) {
            ids.push_back(unk_id_);
            continue;
        }
        // Greedy longest-prefix match; continuation pieces carry the "##" marker.
        std::vector<int> pieces;
        std::size_t start = 0;
        bool bad = false;
        while (start < word.size()) {
            std::size_t end = word.size();
            int found = -1;
            while (end > start) {
                std::string candidate = utf8_encode(std::u32string_view(word).substr(start, end - start));
                if (start > 0) candidate.insert(0, "##");
                found = id_of(candidate);
                if (found >= 0) break;
                --end;
            }
            if (found < 0) {
                bad = true;
                break;
            }
            pieces.push_back(found);
            start = end;
        }
        if (bad) {
            ids.push_back(unk_id_);
        } else {
            ids.insert(ids.end(), pieces.begin(), pieces.end());
        }
    }
    return ids;
}

}  // namespace absa
