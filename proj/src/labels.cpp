#include "absa/labels.hpp"

#include <algorithm>

namespace absa {

std::string_view to_string(Polarity p) {
    switch (p) {
        case Polarity::positive: return "positive";
        case Polarity::negative: return "negative";
        case Polarity::neutral: return "neutral";
        case Polarity::conflict: return "conflict";
    }
    return "?";
}

std::optional<Polarity> polarity_from_string(std::string_view s) {
    for (Polarity p : kAllPolarities) {
        if (s == to_string(p)) return p;
    }
    return std::nullopt;
}

std::string_view to_string(DatasetId d) {
    switch (d) {
        case DatasetId::haad: return "haad";
        case DatasetId::news: return "news";
        case DatasetId::hotels: return "hotels";
    }
    return "?";
}

std::optional<DatasetId> dataset_from_string(std::string_view s) {
    if (s == "haad") return DatasetId::haad;
    if (s == "news") return DatasetId::news;
    if (s == "hotels") return DatasetId::hotels;
    return std::nullopt;
}

std::vector<Polarity> label_inventory(DatasetId d) {
    switch (d) {
        case DatasetId::haad:
            return {Polarity::positive, Polarity::negative, Polarity::neutral,
                    Polarity::conflict};
        case DatasetId::news:
        case DatasetId::hotels:
            return {Polarity::positive, Polarity::negative, Polarity::neutral};
    }
    return {};
}

std::string_view to_string(SplitTag t) {
    switch (t) {
        case SplitTag::train: return "train";
        case SplitTag::dev: return "dev";
        case SplitTag::test: return "test";
    }
    return "?";
}

std::optional<SplitTag> split_tag_from_string(std::string_view s) {
    if (s == "train") return SplitTag::train;
    if (s == "dev") return SplitTag::dev;
    if (s == "test") return SplitTag::test;
    return std::nullopt;
}

LabelMap::LabelMap(std::vector<Polarity> inventory) {
    // Dense ids in canonical Polarity order regardless of the order handed in.
    std::sort(inventory.begin(), inventory.end(),
              [](Polarity a, Polarity b) { return static_cast<int>(a) < static_cast<int>(b); });
    inventory.erase(std::unique(inventory.begin(), inventory.end()), inventory.end());
    labels_ = std::move(inventory);
    for (int i = 0; i < static_cast<int>(labels_.size()); ++i) {
        ids_[static_cast<int>(labels_[i])] = i;
    }
}

Polarity LabelMap::label_of(int id) const {
    if (id < 0 || id >= size()) {
        throw ContractError("label id " + std::to_string(id) + " out of range [0, " +
                            std::to_string(size()) + ")");
    }
    return labels_[static_cast<std::size_t>(id)];
}

int LabelMap::id_of(Polarity p) const {
    int id = ids_[static_cast<int>(p)];
    if (id < 0) {
        throw ContractError("label '" + std::string(to_string(p)) +
                            "' is not in this dataset's label inventory");
    }
    return id;
}

}  // namespace absa
