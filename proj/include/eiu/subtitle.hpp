#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace eiu {

struct SubtitleEntry {
    std::int64_t index = 0;
    std::int64_t begin_ms = 0;
    std::int64_t end_ms = 0;
    std::string text;  // multi-line blocks joined with single spaces

    bool operator==(const SubtitleEntry&) const = default;
};

// Block-structured subtitle text: integer index line, a
// "HH:MM:SS,mmm --> HH:MM:SS,mmm" line, one or more text lines, blank
// separator. Tolerates BOM, CRLF and trailing whitespace. Entries come back
// sorted by begin time.
std::vector<SubtitleEntry> parse_subtitle_file(const std::string& bytes);

}  // namespace eiu
