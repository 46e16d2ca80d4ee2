#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bdl/datestamp.hpp"
#include "bdl/dc_model.hpp"
#include "bdl/xml.hpp"

namespace bdl {

class CodecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Record XML:
//   <record><header[ status="deleted"]><identifier/><datestamp/></header>
//           <metadata><dc><title qualifier=".." scheme=".." lang="..">..</title>...</dc></metadata></record>
std::string encode_record_xml(const WireRecord& wire);
void append_record_xml(std::string& out, const WireRecord& wire);
/// Just the `<dc>...</dc>` part; the canonical encoding of a record's metadata.
std::string encode_metadata_xml(const MetadataRecord& record);

/// Throws CodecError on malformed XML, unknown element names, missing or
/// malformed header fields, malformed statements, or metadata on a
/// deleted record.
WireRecord decode_record_xml(std::string_view bytes);
WireRecord decode_record_element(const xml::Element& record);
RecordHeader decode_header_element(const xml::Element& header);

struct ParsedRecord {
    MetadataRecord record;
    std::vector<std::string> warnings;
};

/// Qualified DC in HTML `<meta name="DC.element[.qualifier]" ...>` tags.
ParsedRecord extract_dc_from_html(std::string_view bytes);

/// `DC.element[.qualifier]: value` lines, blank-line separated records,
/// leading-space continuation lines.
std::vector<ParsedRecord> parse_tagged_text(std::string_view bytes);

/// Inverse of parse_tagged_text for records whose values are single-line.
std::string format_tagged_text(const MetadataRecord& record);

}  // namespace bdl
