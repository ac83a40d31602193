#pragma once

#include <string>
#include <string_view>

namespace catalog {

// Canonical form for attribute values so that equality between captions and
// figure labels survives glyph-width variants:
//   full-width ASCII (U+FF01..U+FF5E) and U+3000 folded to half-width,
//   Unicode NFC, trimmed, internal whitespace runs collapsed to one space.
// Idempotent. Invalid UTF-8 sequences are replaced by U+FFFD.
std::string normalize_value(std::string_view utf8);

}  // namespace catalog
