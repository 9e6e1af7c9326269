#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace absa {

// Minimal ordered DOM for the corpus schemas. Children keep document order; attributes
// keep source order. `text` is the concatenated character data directly under the
// element (not descendants).
struct XmlElement {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::string text;
    std::vector<XmlElement> children;
    int line = 0;
    int column = 0;

    const std::string* attribute(std::string_view key) const;
    const XmlElement* first_child(std::string_view name) const;
    // First child whose name matches case-insensitively (ASCII).
    const XmlElement* first_child_ci(std::string_view name) const;
};

bool ascii_iequals(std::string_view a, std::string_view b);

// Parses a complete document, returning the root element.
// Throws ParseError with "line L, column C" on malformed input.
XmlElement xml_parse(std::string_view bytes);

}  // namespace absa
