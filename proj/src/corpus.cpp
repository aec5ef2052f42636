#include "eiu/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "wire.hpp"

namespace eiu {

// ---------------------------------------------------------------------------
// timestamps

std::int64_t parse_timestamp_ms(const std::string& text) {
    // HH:MM:SS,mmm
    int h = 0, m = 0, s = 0, ms = 0;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream in(text);
    in >> h >> c1 >> m >> c2 >> s >> c3 >> ms;
    if (!in || c1 != ':' || c2 != ':' || c3 != ',' || h < 0 || m < 0 || m > 59 || s < 0 ||
        s > 59 || ms < 0 || ms > 999 || !in.eof()) {
        throw ParseError("malformed timestamp: \"" + text + "\"");
    }
    // reject forms like "1:2:3,4" that lack zero padding of the ms field
    const auto comma = text.find(',');
    if (comma == std::string::npos || text.size() - comma - 1 != 3) {
        throw ParseError("malformed timestamp: \"" + text + "\"");
    }
    return ((static_cast<std::int64_t>(h) * 60 + m) * 60 + s) * 1000 + ms;
}

std::string format_timestamp_ms(std::int64_t ms) {
    if (ms < 0) throw ContractError("negative timestamp");
    const std::int64_t h = ms / 3600000;
    const std::int64_t m = (ms / 60000) % 60;
    const std::int64_t s = (ms / 1000) % 60;
    const std::int64_t rem = ms % 1000;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%02lld:%02lld:%02lld,%03lld", static_cast<long long>(h),
                  static_cast<long long>(m), static_cast<long long>(s),
                  static_cast<long long>(rem));
    return buf;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

const std::vector<std::string>& csv_header() {
    static const std::vector<std::string> cols = {
        "Subtitle",        "Dia_No",        "Utt_No",  "Video_name", "Season", "Episode",
        "Begin_timestamp", "End_timestamp", "Emotion", "Intent",     "Speaker"};
    return cols;
}

// RFC-style CSV reader: quoted fields may contain commas, quotes ("" escape)
// and newlines. Returns rows of fields.
std::vector<std::vector<std::string>> read_csv(const std::string& bytes) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    std::size_t i = 0;
    // tolerate a UTF-8 byte-order mark
    if (bytes.size() >= 3 && bytes[0] == '\xef' && bytes[1] == '\xbb' && bytes[2] == '\xbf') {
        i = 3;
    }
    auto end_field = [&]() {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&]() {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };

    for (; i < bytes.size(); ++i) {
        const char c = bytes[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < bytes.size() && bytes[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (i + 1 < bytes.size() && bytes[i + 1] == '\n') ++i;
                end_row();
                break;
            case '\n':
                end_row();
                break;
            default:
                field.push_back(c);
                field_started = true;
                break;
        }
    }
    if (in_quotes) throw ParseError("csv: unterminated quoted field");
    if (field_started || !row.empty() || !field.empty()) end_row();
    return rows;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::int64_t parse_int(const std::string& s, const char* what, std::size_t row) {
    const std::string t = trim(s);
    if (t.empty()) throw DataError("row " + std::to_string(row) + ": empty " + what);
    std::size_t pos = 0;
    std::int64_t v = 0;
    try {
        v = std::stoll(t, &pos);
    } catch (const std::exception&) {
        throw DataError("row " + std::to_string(row) + ": bad " + what + " \"" + s + "\"");
    }
    if (pos != t.size()) {
        throw DataError("row " + std::to_string(row) + ": bad " + what + " \"" + s + "\"");
    }
    return v;
}

std::string csv_escape(const std::string& s) {
    const bool needs = s.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

}  // namespace

std::vector<AnnotationRecord> parse_annotations_csv(const std::string& bytes) {
    const auto rows = read_csv(bytes);
    if (rows.empty()) throw ParseError("annotations csv: missing header row");
    const auto& header = rows[0];
    const auto& expect = csv_header();
    if (header.size() != expect.size()) {
        throw ParseError("annotations csv: expected " + std::to_string(expect.size()) +
                         " columns, got " + std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < expect.size(); ++c) {
        if (trim(header[c]) != expect[c]) {
            throw ParseError("annotations csv: column " + std::to_string(c + 1) +
                             " must be \"" + expect[c] + "\", got \"" + header[c] + "\"");
        }
    }

    std::vector<AnnotationRecord> records;
    std::set<std::pair<std::int64_t, std::int64_t>> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::size_t rowno = r + 1;  // 1-based, counting the header
        if (row.size() == 1 && trim(row[0]).empty()) continue;
        if (row.size() != expect.size()) {
            throw DataError("row " + std::to_string(rowno) + ": expected " +
                            std::to_string(expect.size()) + " fields, got " +
                            std::to_string(row.size()));
        }
        AnnotationRecord rec;
        rec.subtitle = row[0];
        rec.dia_no = parse_int(row[1], "Dia_No", rowno);
        rec.utt_no = parse_int(row[2], "Utt_No", rowno);
        rec.video_name = row[3];
        const std::string season = trim(row[4]);
        if (season == "-" || season.empty()) {
            rec.season = std::nullopt;
        } else {
            rec.season = parse_int(season, "Season", rowno);
        }
        rec.episode = parse_int(row[5], "Episode", rowno);
        try {
            rec.begin_ms = parse_timestamp_ms(trim(row[6]));
            rec.end_ms = parse_timestamp_ms(trim(row[7]));
        } catch (const ParseError& e) {
            throw DataError("row " + std::to_string(rowno) + ": " + e.what());
        }
        if (rec.begin_ms >= rec.end_ms) {
            throw DataError("row " + std::to_string(rowno) + ": begin timestamp " + row[6] +
                            " not before end " + row[7]);
        }
        const auto emo = emotion_index(row[8]);
        if (!emo) {
            throw DataError("row " + std::to_string(rowno) + ": unknown emotion \"" + row[8] +
                            "\"");
        }
        rec.emotion = *emo;
        const auto intent = intent_index(row[9]);
        if (!intent) {
            throw DataError("row " + std::to_string(rowno) + ": unknown intent \"" + row[9] +
                            "\"");
        }
        rec.intent = *intent;
        const std::int64_t speaker = parse_int(row[10], "Speaker", rowno);
        if (speaker != 0 && speaker != 1) {
            throw DataError("row " + std::to_string(rowno) + ": speaker must be 0 or 1, got " +
                            row[10]);
        }
        rec.speaker = static_cast<int>(speaker);
        if (!seen.emplace(rec.dia_no, rec.utt_no).second) {
            throw DataError("row " + std::to_string(rowno) + ": duplicate (Dia_No, Utt_No) = (" +
                            std::to_string(rec.dia_no) + ", " + std::to_string(rec.utt_no) + ")");
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::string serialize_annotations_csv(const std::vector<AnnotationRecord>& records) {
    std::ostringstream os;
    const auto& cols = csv_header();
    for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
    os << "\n";
    for (const auto& r : records) {
        os << csv_escape(r.subtitle) << "," << r.dia_no << "," << r.utt_no << ","
           << csv_escape(r.video_name) << ","
           << (r.season ? std::to_string(*r.season) : std::string("-")) << "," << r.episode << ","
           << csv_escape(format_timestamp_ms(r.begin_ms)) << ","
           << csv_escape(format_timestamp_ms(r.end_ms)) << ","
           << emotion_labels()[r.emotion] << "," << intent_labels()[r.intent] << "," << r.speaker
           << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// feature container

namespace {
constexpr char kFeatMagic[4] = {'E', 'I', 'U', 'F'};
constexpr std::uint8_t kFeatVersion = 1;
}  // namespace

std::string encode_feature(const Tensor& matrix) {
    std::string out;
    out.append(kFeatMagic, 4);
    wire::put_u8(out, kFeatVersion);
    wire::put_u8(out, 0);  // dtype f32
    wire::put_u32(out, static_cast<std::uint32_t>(matrix.rank()));
    for (auto d : matrix.shape()) wire::put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : matrix.data()) wire::put_f32(out, static_cast<float>(v));
    return out;
}

Tensor decode_feature(const std::string& bytes) {
    wire::Reader r(bytes, "feature file");
    if (r.str(4) != std::string(kFeatMagic, 4)) throw FormatError("feature file: bad magic");
    const std::uint8_t version = r.u8();
    if (version != kFeatVersion) {
        throw FormatError("feature file: unsupported version " + std::to_string(version));
    }
    const std::uint8_t dtype = r.u8();
    if (dtype != 0) throw FormatError("feature file: unknown dtype code " + std::to_string(dtype));
    const std::uint32_t ndim = r.u32();
    Shape shape;
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
        shape.push_back(r.u32());
        n *= shape.back();
    }
    const std::size_t expect = bytes.size() - r.pos();
    if (expect != n * 4) {
        throw FormatError("feature file: payload length " + std::to_string(expect) +
                          " does not match shape " + shape_str(shape));
    }
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        data[i] = static_cast<double>(r.f32());
        if (!std::isfinite(data[i])) {
            throw DataError("feature file: non-finite value at flat index " + std::to_string(i));
        }
    }
    return Tensor(std::move(shape), std::move(data));
}

Tensor read_feature_file(const std::string& path) {
    return decode_feature(wire::read_file(path));
}

void write_feature_file(const std::string& path, const Tensor& matrix) {
    wire::write_file(path, encode_feature(matrix));
}

std::string feature_file_name(std::int64_t dia_no, std::int64_t utt_no) {
    return "dia_" + std::to_string(dia_no) + "_utt_" + std::to_string(utt_no) + ".eiuf";
}

// ---------------------------------------------------------------------------
// conversation assembly

std::vector<Conversation> assemble_conversations(const std::vector<AnnotationRecord>& records,
                                                 const std::string& feature_root,
                                                 const ModalityMask& mask,
                                                 const ModalityFolders& folders) {
    namespace fs = std::filesystem;
    std::map<std::int64_t, std::vector<AnnotationRecord>> by_dia;
    for (const auto& r : records) by_dia[r.dia_no].push_back(r);

    // verify utt_no contiguity and collect every missing file up front
    std::vector<std::string> missing;
    for (auto& [dia, rs] : by_dia) {
        std::sort(rs.begin(), rs.end(),
                  [](const auto& a, const auto& b) { return a.utt_no < b.utt_no; });
        for (std::size_t i = 0; i < rs.size(); ++i) {
            if (rs[i].utt_no != static_cast<std::int64_t>(i)) {
                throw DataError("dialogue " + std::to_string(dia) +
                                ": utterance numbers not contiguous from 0 (found " +
                                std::to_string(rs[i].utt_no) + " at position " +
                                std::to_string(i) + ")");
            }
            const std::string name = feature_file_name(dia, rs[i].utt_no);
            if (mask.textual && !fs::exists(fs::path(feature_root) / folders.textual / name)) {
                missing.push_back((fs::path(feature_root) / folders.textual / name).string());
            }
            if (mask.acoustic && !fs::exists(fs::path(feature_root) / folders.acoustic / name)) {
                missing.push_back((fs::path(feature_root) / folders.acoustic / name).string());
            }
            if (mask.visual && !fs::exists(fs::path(feature_root) / folders.visual / name)) {
                missing.push_back((fs::path(feature_root) / folders.visual / name).string());
            }
        }
    }
    if (!missing.empty()) {
        std::string msg = "missing feature files:";
        for (const auto& m : missing) msg += "\n  " + m;
        throw DataError(msg);
    }

    std::vector<Conversation> out;
    for (auto& [dia, rs] : by_dia) {
        Conversation conv;
        conv.dia_no = dia;
        for (const auto& rec : rs) {
            Utterance utt;
            utt.record = rec;
            const std::string name = feature_file_name(dia, rec.utt_no);
            if (mask.textual) {
                utt.features.textual =
                    read_feature_file((fs::path(feature_root) / folders.textual / name).string());
            }
            if (mask.acoustic) {
                utt.features.acoustic =
                    read_feature_file((fs::path(feature_root) / folders.acoustic / name).string());
            }
            if (mask.visual) {
                utt.features.visual =
                    read_feature_file((fs::path(feature_root) / folders.visual / name).string());
            }
            conv.utterances.push_back(std::move(utt));
        }
        out.push_back(std::move(conv));
    }
    return out;
}

}  // namespace eiu
