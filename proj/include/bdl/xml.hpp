#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bdl::xml {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Escapes the five standard entities; C0 controls other than tab and
/// newline become numeric references so the output stays byte-stable.
std::string escape(std::string_view s);

struct Element {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<Element> children;
    std::string text;  // concatenated character data directly under this element
    bool has_text = false;

    const std::string* attribute(std::string_view key) const;
    const Element* child(std::string_view child_name) const;
};

/// Parses one document: optional `<?xml ...?>` prolog, optional comments,
/// a single root element. No DTDs, no CDATA, no namespaces processing.
/// Whitespace-only text between child elements is discarded for elements
/// that have element children. Input must be valid UTF-8.
Element parse(std::string_view bytes);

}  // namespace bdl::xml
