#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "eiu/annotate.hpp"
#include "eiu/corpus.hpp"
#include "eiu/split.hpp"
#include "eiu/stats.hpp"
#include "eiu/synth.hpp"

using namespace eiu;
namespace fs = std::filesystem;

namespace {

// independent Fleiss formula, computed with plain loops
double brute_force_kappa(const std::vector<std::vector<std::size_t>>& counts) {
    const std::size_t N = counts.size(), K = counts[0].size();
    double r = 0;
    for (auto c : counts[0]) r += double(c);
    double p_bar = 0;
    for (std::size_t i = 0; i < N; ++i) {
        double sq = 0;
        for (std::size_t j = 0; j < K; ++j) sq += double(counts[i][j]) * double(counts[i][j]);
        p_bar += (sq - r) / (r * (r - 1));
    }
    p_bar /= double(N);
    double p_e = 0;
    for (std::size_t j = 0; j < K; ++j) {
        double col = 0;
        for (std::size_t i = 0; i < N; ++i) col += double(counts[i][j]);
        const double pj = col / (double(N) * r);
        p_e += pj * pj;
    }
    return (p_bar - p_e) / (1 - p_e);
}

}  // namespace

TEST_CASE("majority vote rules") {
    const auto& vocab = emotion_labels();

    AnnotationTriple two_agree{0, 0, {"happy", "happy", "sad"}, std::nullopt};
    auto r = majority_vote(two_agree, vocab);
    CHECK(r.label == "happy");
    CHECK(!r.no_majority);

    AnnotationTriple unanimous{0, 1, {"neutral", "neutral", "neutral"}, std::nullopt};
    CHECK(majority_vote(unanimous, vocab).label == "neutral");

    AnnotationTriple all_differ{0, 2, {"happy", "sad", "anger"}, std::nullopt};
    auto nm = majority_vote(all_differ, vocab);
    CHECK(!nm.label.has_value());
    CHECK(nm.no_majority);

    // the expert label resolves a three-way disagreement
    AnnotationTriple expert{0, 3, {"happy", "sad", "anger"}, "fear"};
    auto er = majority_vote(expert, vocab);
    CHECK(er.label == "fear");
    CHECK(er.no_majority);

    // labels are normalized before comparison
    AnnotationTriple caps{0, 4, {"Happy", " HAPPY ", "sad"}, std::nullopt};
    CHECK(majority_vote(caps, vocab).label == "happy");

    AnnotationTriple bad{0, 5, {"happy", "joyful", "sad"}, std::nullopt};
    CHECK_THROWS_AS(majority_vote(bad, vocab), DataError);
}

TEST_CASE("majority vote: all 343 emotion triples, permutation invariant") {
    const auto& vocab = emotion_labels();
    std::size_t finals = 0, no_majority = 0;
    for (std::size_t a = 0; a < 7; ++a) {
        for (std::size_t b = 0; b < 7; ++b) {
            for (std::size_t c = 0; c < 7; ++c) {
                AnnotationTriple t{0, 0, {vocab[a], vocab[b], vocab[c]}, std::nullopt};
                auto base = majority_vote(t, vocab);

                // expected by the rule
                if (a == b || a == c || b == c) {
                    const std::size_t winner = (a == b || a == c) ? a : b;
                    CHECK(base.label == vocab[winner]);
                    ++finals;
                } else {
                    CHECK(!base.label.has_value());
                    CHECK(base.no_majority);
                    ++no_majority;
                }

                // invariance under all annotator permutations
                const std::size_t idx[3] = {a, b, c};
                static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                                {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
                for (const auto& p : perms) {
                    AnnotationTriple q{0, 0,
                                       {vocab[idx[p[0]]], vocab[idx[p[1]]], vocab[idx[p[2]]]},
                                       std::nullopt};
                    auto rr = majority_vote(q, vocab);
                    CHECK(rr.label == base.label);
                    CHECK(rr.no_majority == base.no_majority);
                }
            }
        }
    }
    CHECK(finals + no_majority == 343);
    CHECK(no_majority == 7 * 6 * 5);
}

TEST_CASE("fleiss kappa oracle cases") {
    // perfect agreement on every item
    std::vector<std::vector<std::size_t>> perfect = {{3, 0}, {0, 3}, {3, 0}};
    auto p = fleiss_kappa(perfect);
    CHECK(p.kappa == 1.0);
    CHECK(p.p_bar == 1.0);
    CHECK(!p.degenerate);

    // the (2,1)/(1,2) case evaluates to exactly -1/3
    std::vector<std::vector<std::size_t>> mixed = {{2, 1}, {1, 2}};
    auto m = fleiss_kappa(mixed);
    CHECK(m.kappa == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
    CHECK(m.raters == 3);
    CHECK(m.items == 2);

    // single-category degeneracy
    std::vector<std::vector<std::size_t>> degen = {{3, 0}, {3, 0}};
    auto d = fleiss_kappa(degen);
    CHECK(d.kappa == 1.0);
    CHECK(d.degenerate);

    // contract violations
    CHECK_THROWS_AS(fleiss_kappa({{2, 1}, {1, 1}}), ContractError);  // unequal rows
    CHECK_THROWS_AS(fleiss_kappa({{1, 0}, {0, 1}}), ContractError);  // r < 2
    CHECK_THROWS_AS(fleiss_kappa({}), ContractError);
}

TEST_CASE("fleiss kappa matches the direct formula on random matrices") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t N = 2 + rng.next_below(20);
        const std::size_t K = 2 + rng.next_below(6);
        const std::size_t r = 2 + rng.next_below(5);
        std::vector<std::vector<std::size_t>> counts(N, std::vector<std::size_t>(K, 0));
        bool all_one_column = true;
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t k = 0; k < r; ++k) counts[i][rng.next_below(K)] += 1;
            if (counts[i][0] != r) all_one_column = false;
        }
        if (all_one_column) continue;
        auto res = fleiss_kappa(counts);
        CHECK(std::fabs(res.kappa - brute_force_kappa(counts)) < 1e-9);
        CHECK(res.kappa >= -1.0 - 1e-12);
        CHECK(res.kappa <= 1.0 + 1e-12);

        // invariant under item permutation
        auto shuffled = counts;
        rng.shuffle(shuffled);
        CHECK(fleiss_kappa(shuffled).kappa == doctest::Approx(res.kappa).epsilon(1e-12));

        // invariant under category column permutation (reverse the columns)
        auto reversed = counts;
        for (auto& row : reversed) std::reverse(row.begin(), row.end());
        CHECK(fleiss_kappa(reversed).kappa == doctest::Approx(res.kappa).epsilon(1e-12));
    }
}

TEST_CASE("triples csv and counts") {
    const std::string csv =
        "Dia_No,Utt_No,Label1,Label2,Label3,Expert\n"
        "1,0,happy,happy,happy,\n"
        "1,1,happy,sad,anger,fear\n";
    auto triples = parse_triples_csv(csv);
    REQUIRE(triples.size() == 2);
    CHECK(!triples[0].expert.has_value());
    CHECK(triples[1].expert == "fear");

    auto counts = triples_to_counts(triples, emotion_labels());
    REQUIRE(counts.size() == 2);
    CHECK(counts[0][0] == 3);  // happy x3
    CHECK(counts[1][0] == 1);
    CHECK(counts[1][2] == 1);  // sad
    CHECK(counts[1][4] == 1);  // anger

    // perfect agreement file yields kappa 1
    const std::string perfect =
        "Dia_No,Utt_No,Label1,Label2,Label3\n"
        "1,0,happy,happy,happy\n"
        "1,1,sad,sad,sad\n";
    auto k = fleiss_kappa(triples_to_counts(parse_triples_csv(perfect), emotion_labels()));
    CHECK(k.kappa == 1.0);
}

TEST_CASE("split corpus") {
    // 10 uniform dialogues split exactly 7-1-2
    std::vector<Conversation> convs;
    Rng rng(23);
    for (std::int64_t d = 0; d < 10; ++d) {
        Conversation c;
        c.dia_no = d;
        for (std::int64_t u = 0; u < 4; ++u) {
            Utterance utt;
            utt.record.dia_no = d;
            utt.record.utt_no = u;
            utt.record.emotion = rng.next_below(7);
            utt.record.intent = rng.next_below(9);
            c.utterances.push_back(std::move(utt));
        }
        convs.push_back(std::move(c));
    }

    auto split = split_corpus(convs, SplitRatios{}, 99);
    CHECK(split.train.size() == 7);
    CHECK(split.valid.size() == 1);
    CHECK(split.test.size() == 2);

    // partition: disjoint, union covers everything
    std::set<std::size_t> all;
    for (const auto* part : {&split.train, &split.valid, &split.test}) {
        for (auto i : *part) CHECK(all.insert(i).second);
    }
    CHECK(all.size() == convs.size());

    // single-emotion corpus balances exactly
    std::vector<Conversation> mono = convs;
    for (auto& c : mono) {
        for (auto& u : c.utterances) {
            u.record.emotion = 3;
            u.record.intent = 5;
        }
    }
    auto ms = split_corpus(mono, SplitRatios{}, 99);
    CHECK(split_balance_score(mono, ms) == 0.0);

    CHECK_THROWS_AS(split_corpus(std::vector<Conversation>(9), SplitRatios{}, 1), ContractError);

    // balancing beats or matches the raw shuffle assignment
    SplitIndices raw;
    for (std::size_t i = 0; i < 7; ++i) raw.train.push_back(i);
    raw.valid.push_back(7);
    raw.test = {8, 9};
    CHECK(split_balance_score(convs, split) <= split_balance_score(convs, raw) + 1e-12);
}

TEST_CASE("correlation matrix") {
    CHECK(correlation_matrix({}).size() == 7);
    for (const auto& row : correlation_matrix({})) {
        for (auto v : row) CHECK(v == 0);
    }

    AnnotationRecord r;
    r.emotion = *emotion_index("happy");
    r.intent = *intent_index("agreeing");
    auto one = correlation_matrix({r});
    std::size_t total = 0;
    for (std::size_t e = 0; e < 7; ++e) {
        for (std::size_t i = 0; i < 9; ++i) {
            total += one[e][i];
            if (one[e][i] > 0) {
                CHECK(e == r.emotion);
                CHECK(i == r.intent);
            }
        }
    }
    CHECK(total == 1);

    // sum equals the record count
    Rng rng(31);
    std::vector<AnnotationRecord> many(230);
    for (auto& rec : many) {
        rec.emotion = rng.next_below(7);
        rec.intent = rng.next_below(9);
    }
    auto m = correlation_matrix(many);
    std::size_t sum = 0;
    for (const auto& row : m) {
        for (auto v : row) sum += v;
    }
    CHECK(sum == many.size());

    const std::string csv = correlation_csv(m);
    CHECK(csv.find("questioning") != std::string::npos);
    const std::string map = correlation_heatmap(m);
    CHECK(map.find("happy") != std::string::npos);
}

TEST_CASE("dataset stats") {
    // one dialogue, two 1-second utterances of 3 words each
    Conversation conv;
    conv.dia_no = 0;
    for (int u = 0; u < 2; ++u) {
        Utterance utt;
        utt.record.subtitle = "three word line";
        utt.record.begin_ms = u * 2000;
        utt.record.end_ms = u * 2000 + 1000;
        utt.record.emotion = 6;  // neutral
        utt.record.intent = 8;
        conv.utterances.push_back(std::move(utt));
    }
    auto s = dataset_stats({conv});
    CHECK(s.conversations == 1);
    CHECK(s.utterances == 2);
    CHECK(s.duration_hours == doctest::Approx(2.0 / 3600.0).epsilon(1e-12));
    CHECK(s.avg_words_per_utterance == 3.0);
    CHECK(s.avg_duration_seconds == 1.0);
    CHECK(s.avg_utterances_per_conversation == 2.0);
    CHECK(s.avg_emotions_per_conversation == 1.0);  // all-neutral counts one distinct label
    CHECK(s.avg_intents_per_conversation == 1.0);

    const std::string csv = stats_csv(s);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);  // header + 8 statistics
    CHECK(stats_text(s).find("avg emotions per conversation") != std::string::npos);
}

TEST_CASE("word counting") {
    CHECK(count_words("three word line") == 3);
    CHECK(count_words("Hello") == 1);
    CHECK(count_words("") == 0);
    CHECK(count_words("   ") == 0);
    // unsegmented text counts codepoints
    CHECK(count_words("\xe6\x80\x8e\xe4\xb9\x88\xe4\xba\x86") == 3);
}

TEST_CASE("synthetic corpus determinism and formats") {
    SynthConfig cfg = SynthConfig::defaults();
    cfg.n_conversations = 12;
    cfg.seed = 404;

    SynthCorpus a = synth_corpus(cfg);
    SynthCorpus b = synth_corpus(cfg);
    CHECK(a.records.size() == 12 * 8);
    CHECK(serialize_annotations_csv(a.records) == serialize_annotations_csv(b.records));
    CHECK(a.conversations[3].utterances[2].features.textual->data() ==
          b.conversations[3].utterances[2].features.textual->data());

    // emitted corpus parses cleanly and reloads to identical values
    const auto dir = fs::temp_directory_path() / "eiu_synth_test";
    fs::remove_all(dir);
    write_synth_corpus(a, dir.string());
    const std::string csv_path = (dir / "annotations.csv").string();
    std::ifstream in(csv_path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto records = parse_annotations_csv(bytes);
    CHECK(records.size() == a.records.size());
    CHECK(records == a.records);

    auto convs = assemble_conversations(records, dir.string(), ModalityMask{});
    REQUIRE(convs.size() == a.conversations.size());
    for (std::size_t c = 0; c < convs.size(); ++c) {
        for (std::size_t u = 0; u < convs[c].utterances.size(); ++u) {
            CHECK(convs[c].utterances[u].features.textual->data() ==
                  a.conversations[c].utterances[u].features.textual->data());
            CHECK(convs[c].utterances[u].features.acoustic->data() ==
                  a.conversations[c].utterances[u].features.acoustic->data());
            CHECK(convs[c].utterances[u].features.visual->data() ==
                  a.conversations[c].utterances[u].features.visual->data());
        }
    }
    fs::remove_all(dir);

    // noiseless features equal the prototypes exactly: equal labels mean
    // identical feature rows
    SynthConfig clean = SynthConfig::defaults();
    clean.n_conversations = 8;
    clean.noise = 0.0;
    clean.min_len_text = clean.max_len_text = 1;
    clean.seed = 7;
    SynthCorpus nc = synth_corpus(clean);
    std::map<std::pair<std::size_t, std::size_t>, const Utterance*> seen;
    std::size_t matches = 0;
    for (const auto& conv : nc.conversations) {
        for (const auto& u : conv.utterances) {
            const auto key = std::make_pair(u.record.emotion, u.record.intent);
            auto [it, inserted] = seen.emplace(key, &u);
            if (!inserted) {
                CHECK(u.features.textual->data() == it->second->features.textual->data());
                ++matches;
            }
        }
    }
    CHECK(matches > 0);
}

TEST_CASE("synthetic joint distribution approaches the configured table") {
    SynthConfig cfg = SynthConfig::defaults();
    cfg.n_conversations = 1250;  // 10k utterances
    cfg.min_utterances = cfg.max_utterances = 8;
    cfg.text_dim = 4;
    cfg.audio_dim = 4;
    cfg.visual_dim = 4;
    cfg.min_len_text = cfg.max_len_text = 1;
    cfg.min_len_audio = cfg.max_len_audio = 1;
    cfg.min_len_visual = cfg.max_len_visual = 1;
    cfg.seed = 505;

    SynthCorpus sc = synth_corpus(cfg);
    REQUIRE(sc.records.size() == 10000);

    auto m = correlation_matrix(sc.records);
    double l1 = 0.0;
    for (std::size_t e = 0; e < 7; ++e) {
        for (std::size_t i = 0; i < 9; ++i) {
            const double expected = cfg.emotion_marginal[e] * cfg.intent_given_emotion[e][i];
            const double observed = double(m[e][i]) / 10000.0;
            l1 += std::fabs(expected - observed);
        }
    }
    CHECK(l1 < 0.05);

    // stickiness 0: successive emotions look independent (chi-square over
    // transition counts stays near its degrees of freedom)
    std::vector<std::vector<double>> trans(7, std::vector<double>(7, 0.0));
    double total = 0;
    for (const auto& conv : sc.conversations) {
        for (std::size_t u = 1; u < conv.utterances.size(); ++u) {
            trans[conv.utterances[u - 1].record.emotion][conv.utterances[u].record.emotion] += 1;
            total += 1;
        }
    }
    double chi2 = 0.0;
    for (std::size_t i = 0; i < 7; ++i) {
        double row = 0, col = 0;
        for (std::size_t j = 0; j < 7; ++j) row += trans[i][j];
        for (std::size_t j = 0; j < 7; ++j) col += trans[j][i];
        (void)row;
        (void)col;
    }
    for (std::size_t i = 0; i < 7; ++i) {
        for (std::size_t j = 0; j < 7; ++j) {
            double row = 0, col = 0;
            for (std::size_t k = 0; k < 7; ++k) {
                row += trans[i][k];
                col += trans[k][j];
            }
            const double expected = row * col / total;
            if (expected > 0) {
                chi2 += (trans[i][j] - expected) * (trans[i][j] - expected) / expected;
            }
        }
    }
    INFO("transition chi-square = ", chi2, " (36 dof)");
    CHECK(chi2 < 36 * 2.5);  // far from any sticky structure

    // a sticky chain shows strong diagonal structure instead
    SynthConfig sticky = cfg;
    sticky.n_conversations = 200;
    sticky.stickiness = 0.9;
    SynthCorpus st = synth_corpus(sticky);
    std::size_t repeats = 0, steps = 0;
    for (const auto& conv : st.conversations) {
        for (std::size_t u = 1; u < conv.utterances.size(); ++u) {
            repeats += conv.utterances[u].record.emotion == conv.utterances[u - 1].record.emotion;
            ++steps;
        }
    }
    CHECK(double(repeats) / double(steps) > 0.8);
}

TEST_CASE("synth config validation") {
    SynthConfig cfg = SynthConfig::defaults();
    cfg.emotion_marginal[0] += 0.1;  // no longer sums to 1
    CHECK_THROWS_AS(cfg.validate(), ContractError);

    SynthConfig cfg2 = SynthConfig::defaults();
    cfg2.stickiness = 1.0;
    CHECK_THROWS_AS(cfg2.validate(), ContractError);

    SynthConfig cfg3 = SynthConfig::defaults();
    cfg3.min_utterances = 5;
    cfg3.max_utterances = 3;
    CHECK_THROWS_AS(cfg3.validate(), ContractError);
}
