#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace absa {

// WordPiece vocabulary + special ids, loaded from a BERT-style vocab.txt (one token per
// line, id = line index). Immutable after load.
class TokenizerHandle {
public:
    // Defaults match the published BERT special-token spellings.
    static TokenizerHandle load(std::istream& vocab, const std::string& source_name,
                                int max_sequence_length = 128);
    static TokenizerHandle load_file(const std::string& path, int max_sequence_length = 128);

    int vocab_size() const { return static_cast<int>(tokens_.size()); }
    int cls_id() const { return cls_id_; }
    int sep_id() const { return sep_id_; }
    int pad_id() const { return pad_id_; }
    int unk_id() const { return unk_id_; }
    int max_sequence_length() const { return max_sequence_length_; }

    // Whitespace/punctuation pre-tokenization followed by greedy longest-match-first
    // WordPiece with "##" continuations. Unknown words map to [UNK]. No case folding,
    // no stripping, no normalization: the input is used as-is.
    std::vector<int> tokenize(std::string_view text) const;

    const std::string& token_of(int id) const;
    int id_of(std::string_view token) const;  // -1 when absent

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
    int cls_id_ = -1, sep_id_ = -1, pad_id_ = -1, unk_id_ = -1;
    int max_sequence_length_ = 128;
};

}  // namespace absa
