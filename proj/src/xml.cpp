#include "absa/xml.hpp"

#include <expat.h>

#include <cctype>
#include <memory>

#include "absa/errors.hpp"

namespace absa {

bool ascii_iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

const std::string* XmlElement::attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes) {
        if (k == key) return &v;
    }
    return nullptr;
}

const XmlElement* XmlElement::first_child(std::string_view child_name) const {
    for (const auto& c : children) {
        if (c.name == child_name) return &c;
    }
    return nullptr;
}

const XmlElement* XmlElement::first_child_ci(std::string_view child_name) const {
    for (const auto& c : children) {
        if (ascii_iequals(c.name, child_name)) return &c;
    }
    return nullptr;
}

namespace {

struct BuildState {
    XmlElement root;
    std::vector<XmlElement*> stack;  // open elements; empty before root
    bool have_root = false;
    XML_Parser parser = nullptr;
};

void start_element(void* user, const XML_Char* name, const XML_Char** attrs) {
    auto* st = static_cast<BuildState*>(user);
    XmlElement el;
    el.name = name;
    el.line = static_cast<int>(XML_GetCurrentLineNumber(st->parser));
    el.column = static_cast<int>(XML_GetCurrentColumnNumber(st->parser)) + 1;
    for (int i = 0; attrs[i] != nullptr; i += 2) {
        el.attributes.emplace_back(attrs[i], attrs[i + 1]);
    }
    if (st->stack.empty()) {
        st->root = std::move(el);
        st->have_root = true;
        st->stack.push_back(&st->root);
    } else {
        XmlElement* parent = st->stack.back();
        parent->children.push_back(std::move(el));
        st->stack.push_back(&parent->children.back());
    }
}

void end_element(void* user, const XML_Char*) {
    auto* st = static_cast<BuildState*>(user);
    st->stack.pop_back();
}

void char_data(void* user, const XML_Char* data, int len) {
    auto* st = static_cast<BuildState*>(user);
    if (!st->stack.empty()) {
        st->stack.back()->text.append(data, static_cast<std::size_t>(len));
    }
}

}  // namespace

XmlElement xml_parse(std::string_view bytes) {
    std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
        XML_ParserCreate(nullptr), &XML_ParserFree);
    if (!parser) throw Error("could not create XML parser");

    BuildState st;
    st.parser = parser.get();
    XML_SetUserData(parser.get(), &st);
    XML_SetElementHandler(parser.get(), start_element, end_element);
    XML_SetCharacterDataHandler(parser.get(), char_data);

    // The corpora fit in memory comfortably; parse in one buffer.
    if (XML_Parse(parser.get(), bytes.data(), static_cast<int>(bytes.size()), /*isFinal=*/1) ==
        XML_STATUS_ERROR) {
        auto line = XML_GetCurrentLineNumber(parser.get());
        auto col = XML_GetCurrentColumnNumber(parser.get()) + 1;
        throw ParseError("XML parse error at line " + std::to_string(line) + ", column " +
                         std::to_string(col) + ": " +
                         XML_ErrorString(XML_GetErrorCode(parser.get())));
    }
    if (!st.have_root) {
        throw ParseError("XML parse error at line 1, column 1: document has no root element");
    }
    return std::move(st.root);
}

}  // namespace absa
