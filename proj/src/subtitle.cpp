#include "eiu/subtitle.hpp"

#include <algorithm>
#include <cctype>

#include "eiu/corpus.hpp"
#include "eiu/errors.hpp"

namespace eiu {

namespace {

std::string rtrim(const std::string& s) {
    std::size_t e = s.size();
    while (e > 0 && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(0, e);
}

std::vector<std::string> split_lines(const std::string& bytes) {
    std::vector<std::string> lines;
    std::string cur;
    std::size_t i = 0;
    if (bytes.size() >= 3 && bytes[0] == '\xef' && bytes[1] == '\xbb' && bytes[2] == '\xbf') {
        i = 3;
    }
    for (; i < bytes.size(); ++i) {
        const char c = bytes[i];
        if (c == '\n') {
            lines.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(std::move(cur));
    return lines;
}

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

std::vector<SubtitleEntry> parse_subtitle_file(const std::string& bytes) {
    const std::vector<std::string> lines = split_lines(bytes);
    std::vector<SubtitleEntry> entries;

    std::size_t i = 0;
    while (i < lines.size()) {
        while (i < lines.size() && is_blank(lines[i])) ++i;
        if (i >= lines.size()) break;

        const std::size_t index_lineno = i + 1;
        const std::string index_line = rtrim(lines[i]);
        std::int64_t index = 0;
        try {
            std::size_t pos = 0;
            index = std::stoll(index_line, &pos);
            if (pos != index_line.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError("line " + std::to_string(index_lineno) +
                             ": expected subtitle index, got \"" + index_line + "\"");
        }
        ++i;

        if (i >= lines.size()) {
            throw ParseError("line " + std::to_string(index_lineno) +
                             ": block truncated before its timestamp line");
        }
        const std::size_t ts_lineno = i + 1;
        const std::string ts_line = rtrim(lines[i]);
        const std::string arrow = " --> ";
        const auto sep = ts_line.find(arrow);
        if (sep == std::string::npos) {
            throw ParseError("line " + std::to_string(ts_lineno) + ": malformed timestamp line \"" +
                             ts_line + "\"");
        }
        SubtitleEntry entry;
        entry.index = index;
        try {
            entry.begin_ms = parse_timestamp_ms(rtrim(ts_line.substr(0, sep)));
            entry.end_ms = parse_timestamp_ms(rtrim(ts_line.substr(sep + arrow.size())));
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(ts_lineno) + ": " + e.what());
        }
        if (entry.begin_ms >= entry.end_ms) {
            throw DataError("line " + std::to_string(ts_lineno) + ": begin " +
                            format_timestamp_ms(entry.begin_ms) + " not before end " +
                            format_timestamp_ms(entry.end_ms));
        }
        ++i;

        std::vector<std::string> text_lines;
        while (i < lines.size() && !is_blank(lines[i])) {
            text_lines.push_back(rtrim(lines[i]));
            ++i;
        }
        if (text_lines.empty()) {
            throw ParseError("line " + std::to_string(ts_lineno) + ": block has no text lines");
        }
        for (std::size_t t = 0; t < text_lines.size(); ++t) {
            if (t) entry.text += ' ';
            entry.text += text_lines[t];
        }
        entries.push_back(std::move(entry));
    }

    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.begin_ms < b.begin_ms; });
    return entries;
}

}  // namespace eiu
