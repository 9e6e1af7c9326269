#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absa/errors.hpp"

namespace absa {

// The closed polarity label set. Enum values double as the canonical label ids and as
// the fixed tie-break order (positive wins over negative, and so on).
enum class Polarity : std::uint8_t {
    positive = 0,
    negative = 1,
    neutral = 2,
    conflict = 3,
};

inline constexpr std::array<Polarity, 4> kAllPolarities = {
    Polarity::positive, Polarity::negative, Polarity::neutral, Polarity::conflict};

std::string_view to_string(Polarity p);
std::optional<Polarity> polarity_from_string(std::string_view s);

enum class DatasetId : std::uint8_t { haad = 0, news = 1, hotels = 2 };

std::string_view to_string(DatasetId d);
std::optional<DatasetId> dataset_from_string(std::string_view s);

// Which labels a dataset actually uses. HAAD carries all four; news and hotels drop
// "conflict".
std::vector<Polarity> label_inventory(DatasetId d);

enum class SplitTag : std::uint8_t { train = 0, dev = 1, test = 2 };

std::string_view to_string(SplitTag t);
std::optional<SplitTag> split_tag_from_string(std::string_view s);

// Total bidirectional label<->id mapping over one dataset's inventory. Ids are dense,
// assigned in canonical Polarity order, so the mapping is fixed for a given inventory.
class LabelMap {
public:
    LabelMap() = default;
    explicit LabelMap(std::vector<Polarity> inventory);

    int size() const { return static_cast<int>(labels_.size()); }
    Polarity label_of(int id) const;
    // Throws ContractError when the label is outside the inventory.
    int id_of(Polarity p) const;
    bool contains(Polarity p) const { return ids_[static_cast<int>(p)] >= 0; }
    const std::vector<Polarity>& labels() const { return labels_; }

    bool operator==(const LabelMap& other) const { return labels_ == other.labels_; }

private:
    std::vector<Polarity> labels_;
    std::array<int, 4> ids_ = {-1, -1, -1, -1};
};

}  // namespace absa
