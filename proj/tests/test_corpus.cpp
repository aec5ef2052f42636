#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>

#include "eiu/corpus.hpp"
#include "eiu/subtitle.hpp"

using namespace eiu;
namespace fs = std::filesystem;

namespace {

const char* kHeader =
    "Subtitle,Dia_No,Utt_No,Video_name,Season,Episode,Begin_timestamp,End_timestamp,Emotion,"
    "Intent,Speaker\n";

}  // namespace

TEST_CASE("timestamp parsing") {
    CHECK(parse_timestamp_ms("00:24:09,900") == 1449900);
    CHECK(parse_timestamp_ms("00:24:12,530") == 1452530);
    CHECK(parse_timestamp_ms("00:00:01,000") == 1000);
    CHECK(parse_timestamp_ms("01:00:00,001") == 3600001);
    CHECK(format_timestamp_ms(1449900) == "00:24:09,900");
    CHECK(format_timestamp_ms(parse_timestamp_ms("12:34:56,789")) == "12:34:56,789");
    CHECK_THROWS_AS(parse_timestamp_ms("00:24:09.900"), ParseError);
    CHECK_THROWS_AS(parse_timestamp_ms("00:61:09,900"), ParseError);
    CHECK_THROWS_AS(parse_timestamp_ms("junk"), ParseError);
}

TEST_CASE("annotation csv parses the documented sample row") {
    std::string csv = kHeader;
    csv += "Turns out this sweater is made for a woman.,34,0,Friends,10,9,"
           "\"00:24:09,900\",\"00:24:12,530\",neutral,neutral,0\n";
    csv += "So why are you still wearing it?,34,1,Friends,10,9,"
           "\"00:24:14,910\",\"00:24:16,910\",neutral,questioning,1\n";

    auto records = parse_annotations_csv(csv);
    REQUIRE(records.size() == 2);
    const auto& r = records[0];
    CHECK(r.subtitle == "Turns out this sweater is made for a woman.");
    CHECK(r.dia_no == 34);
    CHECK(r.utt_no == 0);
    CHECK(r.video_name == "Friends");
    CHECK(r.season == 10);
    CHECK(r.episode == 9);
    CHECK(r.begin_ms == 1449900);
    CHECK(r.end_ms == 1452530);
    CHECK(emotion_labels()[r.emotion] == "neutral");
    CHECK(intent_labels()[r.intent] == "neutral");
    CHECK(r.speaker == 0);
    CHECK(intent_labels()[records[1].intent] == "questioning");
    CHECK(records[1].speaker == 1);
}

TEST_CASE("annotation csv validation") {
    // unknown emotion names the row
    std::string bad = kHeader;
    bad += "hi,1,0,Show,-,2,\"00:00:01,000\",\"00:00:02,000\",joyful,agreeing,0\n";
    CHECK_THROWS_WITH_AS(parse_annotations_csv(bad), doctest::Contains("row 2"), DataError);
    CHECK_THROWS_WITH_AS(parse_annotations_csv(bad), doctest::Contains("joyful"), DataError);

    // empty file after header
    CHECK(parse_annotations_csv(kHeader).empty());

    // season "-" is absent
    std::string dash = kHeader;
    dash += "\xe6\x80\x8e\xe4\xb9\x88,519,0,Parental Love,-,4,\"00:34:49,034\","
            "\"00:34:50,894\",sad,questioning,0\n";
    auto rs = parse_annotations_csv(dash);
    REQUIRE(rs.size() == 1);
    CHECK(!rs[0].season.has_value());
    CHECK(emotion_labels()[rs[0].emotion] == "sad");

    // malformed timestamp
    std::string badts = kHeader;
    badts += "hi,1,0,Show,-,2,nonsense,\"00:00:02,000\",happy,agreeing,0\n";
    CHECK_THROWS_AS(parse_annotations_csv(badts), DataError);

    // begin >= end
    std::string order = kHeader;
    order += "hi,1,0,Show,-,2,\"00:00:03,000\",\"00:00:02,000\",happy,agreeing,0\n";
    CHECK_THROWS_AS(parse_annotations_csv(order), DataError);

    // duplicate (dia, utt)
    std::string dup = kHeader;
    dup += "a,1,0,Show,-,2,\"00:00:01,000\",\"00:00:02,000\",happy,agreeing,0\n";
    dup += "b,1,0,Show,-,2,\"00:00:03,000\",\"00:00:04,000\",happy,agreeing,1\n";
    CHECK_THROWS_AS(parse_annotations_csv(dup), DataError);

    // labels are matched case-insensitively with whitespace trimmed
    std::string caps = kHeader;
    caps += "a,1,0,Show,-,2,\"00:00:01,000\",\"00:00:02,000\", Happy , AGREEING ,0\n";
    auto recs = parse_annotations_csv(caps);
    CHECK(emotion_labels()[recs[0].emotion] == "happy");
    CHECK(intent_labels()[recs[0].intent] == "agreeing");

    // wrong header
    CHECK_THROWS_AS(parse_annotations_csv("a,b,c\n1,2,3\n"), ParseError);
}

TEST_CASE("annotation csv parse-serialize-parse is a fixed point") {
    std::string csv = kHeader;
    csv += "\"Hello, with comma\",1,0,Show,3,2,\"00:00:01,000\",\"00:00:02,000\",happy,"
           "agreeing,0\n";
    csv += "\"quote \"\"inside\"\"\",1,1,Show,3,2,\"00:00:03,000\",\"00:00:04,500\",sad,"
           "consoling,1\n";
    csv += "plain,2,0,Other,-,7,\"01:02:03,004\",\"01:02:05,006\",fear,wishing,0\n";

    auto r1 = parse_annotations_csv(csv);
    const std::string s1 = serialize_annotations_csv(r1);
    auto r2 = parse_annotations_csv(s1);
    CHECK(r1 == r2);
    CHECK(serialize_annotations_csv(r2) == s1);
}

TEST_CASE("feature file round-trip") {
    Rng rng(7);
    // values come from f32, so the double round-trip is exact
    std::vector<double> vals(5 * 7);
    for (auto& v : vals) v = static_cast<double>(static_cast<float>(rng.uniform(-2, 2)));
    Tensor m(Shape{5, 7}, vals);

    const std::string bytes = encode_feature(m);
    Tensor back = decode_feature(bytes);
    CHECK(back.shape() == m.shape());
    CHECK(back.data() == m.data());
    CHECK(encode_feature(back) == bytes);

    // single-frame visual feature accepted
    Tensor single = Tensor::zeros({1, 342});
    CHECK(decode_feature(encode_feature(single)).shape() == Shape{1, 342});

    // bad magic
    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_feature(bad), FormatError);

    // payload length mismatch
    CHECK_THROWS_AS(decode_feature(bytes.substr(0, bytes.size() - 2)), FormatError);
    CHECK_THROWS_AS(decode_feature(bytes + "xx"), FormatError);

    // non-finite payload values are rejected
    Tensor nan_m(Shape{1, 2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
    CHECK_THROWS_AS(decode_feature(encode_feature(nan_m)), DataError);

    // file io
    const auto dir = fs::temp_directory_path() / "eiu_feat_test";
    fs::create_directories(dir);
    const std::string path = (dir / "dia_0_utt_0.eiuf").string();
    write_feature_file(path, m);
    CHECK(read_feature_file(path).data() == m.data());
    fs::remove_all(dir);
}

TEST_CASE("assemble_conversations") {
    const auto root = fs::temp_directory_path() / "eiu_corpus_test";
    fs::remove_all(root);
    for (const char* folder : {"textual", "acoustic", "visual"}) {
        fs::create_directories(root / folder);
    }

    std::vector<AnnotationRecord> records;
    Rng rng(9);
    for (std::int64_t dia = 0; dia < 2; ++dia) {
        for (std::int64_t utt = 0; utt < 3; ++utt) {
            AnnotationRecord r;
            r.subtitle = "hello there";
            r.dia_no = dia;
            r.utt_no = utt;
            r.video_name = "Show";
            r.episode = 1;
            r.begin_ms = utt * 2000;
            r.end_ms = utt * 2000 + 1500;
            r.emotion = 0;
            r.intent = 1;
            r.speaker = static_cast<int>(utt % 2);
            records.push_back(r);
            write_feature_file((root / "textual" / feature_file_name(dia, utt)).string(),
                               Tensor::uniform({3, 4}, rng, -1, 1));
            write_feature_file((root / "acoustic" / feature_file_name(dia, utt)).string(),
                               Tensor::uniform({2, 5}, rng, -1, 1));
            write_feature_file((root / "visual" / feature_file_name(dia, utt)).string(),
                               Tensor::uniform({1, 6}, rng, -1, 1));
        }
    }

    auto convs = assemble_conversations(records, root.string(), ModalityMask{});
    REQUIRE(convs.size() == 2);
    CHECK(convs[0].utterances.size() == 3);
    CHECK(convs[1].utterances.size() == 3);
    std::size_t total = 0;
    for (const auto& c : convs) total += c.utterances.size();
    CHECK(total == records.size());
    CHECK(convs[0].utterances[1].features.textual->shape() == Shape{3, 4});

    // missing acoustic file with acoustic enabled names the path
    fs::remove(root / "acoustic" / feature_file_name(1, 2));
    CHECK_THROWS_WITH_AS(assemble_conversations(records, root.string(), ModalityMask{}),
                         doctest::Contains("dia_1_utt_2"), DataError);

    // a textual-only mask ignores the missing acoustic file
    ModalityMask text_only{true, false, false};
    auto tconvs = assemble_conversations(records, root.string(), text_only);
    CHECK(tconvs.size() == 2);
    CHECK(!tconvs[0].utterances[0].features.acoustic.has_value());

    // gap in utt_no
    std::vector<AnnotationRecord> gap = {records[0], records[2]};  // utt 0 and 2
    CHECK_THROWS_WITH_AS(assemble_conversations(gap, root.string(), text_only),
                         doctest::Contains("contiguous"), DataError);

    fs::remove_all(root);
}

TEST_CASE("subtitle parsing") {
    // single block
    auto one = parse_subtitle_file("1\n00:00:01,000 --> 00:00:02,500\nHello\n");
    REQUIRE(one.size() == 1);
    CHECK(one[0].index == 1);
    CHECK(one[0].begin_ms == 1000);
    CHECK(one[0].end_ms == 2500);
    CHECK(one[0].text == "Hello");

    // two text lines join with one space; CRLF and BOM tolerated
    std::string crlf = "\xef\xbb\xbf" "1\r\n00:24:09,900 --> 00:24:12,530\r\nTurns out\r\n"
                       "this sweater\r\n\r\n2\r\n00:24:14,910 --> 00:24:16,910\r\nWhy?\r\n";
    auto two = parse_subtitle_file(crlf);
    REQUIRE(two.size() == 2);
    CHECK(two[0].begin_ms == 1449900);
    CHECK(two[0].end_ms == 1452530);
    CHECK(two[0].text == "Turns out this sweater");
    CHECK(two[1].text == "Why?");

    // entries come back sorted by begin time
    std::string unsorted = "2\n00:00:05,000 --> 00:00:06,000\nSecond\n\n"
                           "1\n00:00:01,000 --> 00:00:02,000\nFirst\n";
    auto sorted = parse_subtitle_file(unsorted);
    CHECK(sorted[0].text == "First");
    CHECK(sorted[1].text == "Second");

    // durations non-negative by construction
    for (const auto& e : sorted) CHECK(e.end_ms > e.begin_ms);

    // malformed timestamp line carries its line number
    CHECK_THROWS_WITH_AS(parse_subtitle_file("1\nnot a timestamp\nHello\n"),
                         doctest::Contains("line 2"), ParseError);

    // begin >= end is a data error
    CHECK_THROWS_AS(parse_subtitle_file("1\n00:00:03,000 --> 00:00:02,000\nHi\n"), DataError);

    // empty input
    CHECK(parse_subtitle_file("").empty());
    CHECK(parse_subtitle_file("\n\n").empty());
}
