#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bdl/dc_model.hpp"

namespace bdl {

struct CorpusItem {
    DocumentKind kind = DocumentKind::generic;
    MetadataRecord record;
};

/// Relative weights for thesis, journal-article, conference-paper,
/// research-report, generic. All zero is treated as all equal.
using KindMix = std::array<unsigned, 5>;
inline constexpr KindMix kEvenKindMix = {1, 1, 1, 1, 1};

/// Record `index` of the stream `seed`; a pure function of its arguments.
/// The record passes validate_record for its kind.
CorpusItem generate_item(std::uint64_t seed, std::uint64_t index, const KindMix& mix = kEvenKindMix);

/// Items [first, first + n) of the stream.
std::vector<CorpusItem> generate_corpus(std::uint64_t seed, std::size_t n, const KindMix& mix = kEvenKindMix,
                                        std::uint64_t first = 0);

/// The same document with a "Revision <n>" subject replacing any earlier
/// one; the fingerprint is unchanged.
MetadataRecord revise_record(const MetadataRecord& record, std::uint64_t revision);

}  // namespace bdl
