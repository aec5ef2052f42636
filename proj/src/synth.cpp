#include "eiu/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "eiu/corpus.hpp"
#include "eiu/rng.hpp"
#include "wire.hpp"

namespace eiu {

SynthConfig SynthConfig::defaults() {
    SynthConfig cfg;
    const std::size_t E = emotion_labels().size();
    const std::size_t I = intent_labels().size();
    cfg.emotion_marginal.assign(E, 1.0 / static_cast<double>(E));
    cfg.intent_given_emotion.assign(E, std::vector<double>(I, 0.0));
    // each emotion prefers one intent, with a thin spread over the rest
    for (std::size_t e = 0; e < E; ++e) {
        const std::size_t favored = e % I;
        for (std::size_t i = 0; i < I; ++i) {
            cfg.intent_given_emotion[e][i] = i == favored ? 0.85 : 0.15 / static_cast<double>(I - 1);
        }
    }
    return cfg;
}

void SynthConfig::validate() const {
    const std::size_t E = emotion_labels().size();
    const std::size_t I = intent_labels().size();
    if (n_conversations == 0) throw ContractError("synth: n_conversations must be positive");
    if (min_utterances == 0 || min_utterances > max_utterances) {
        throw ContractError("synth: bad utterances_per_conversation range");
    }
    if (emotion_marginal.size() != E) {
        throw ContractError("synth: emotion_marginal must have length " + std::to_string(E));
    }
    double sum = 0.0;
    for (double p : emotion_marginal) {
        if (p < 0.0) throw ContractError("synth: negative probability in emotion_marginal");
        sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
        throw ContractError("synth: emotion_marginal must sum to 1 within 1e-9");
    }
    if (intent_given_emotion.size() != E) {
        throw ContractError("synth: intent_given_emotion must have " + std::to_string(E) + " rows");
    }
    for (const auto& row : intent_given_emotion) {
        if (row.size() != I) {
            throw ContractError("synth: intent_given_emotion rows must have length " +
                                std::to_string(I));
        }
        double rs = 0.0;
        for (double p : row) {
            if (p < 0.0) throw ContractError("synth: negative probability in conditional table");
            rs += p;
        }
        if (std::fabs(rs - 1.0) > 1e-9) {
            throw ContractError("synth: conditional rows must sum to 1 within 1e-9");
        }
    }
    if (stickiness < 0.0 || stickiness >= 1.0) {
        throw ContractError("synth: stickiness must lie in [0, 1)");
    }
    if (noise < 0.0) throw ContractError("synth: noise must be non-negative");
    if (min_len_text == 0 || min_len_text > max_len_text || min_len_audio == 0 ||
        min_len_audio > max_len_audio || min_len_visual == 0 || min_len_visual > max_len_visual) {
        throw ContractError("synth: bad sequence length range");
    }
}

namespace {

// all stored feature values pass through f32 so the in-memory corpus matches
// a written-then-reloaded one bit for bit
double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<std::vector<double>> draw_prototypes(std::size_t classes, std::size_t dim, Rng& rng) {
    std::vector<std::vector<double>> protos(classes, std::vector<double>(dim));
    for (auto& p : protos) {
        for (auto& v : p) v = rng.uniform(-1, 1);
    }
    return protos;
}

}  // namespace

SynthCorpus synth_corpus(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::size_t E = emotion_labels().size();
    const std::size_t I = intent_labels().size();

    const std::size_t dims[3] = {cfg.text_dim, cfg.audio_dim, cfg.visual_dim};
    std::vector<std::vector<std::vector<double>>> emo_protos, int_protos;
    for (int m = 0; m < 3; ++m) {
        emo_protos.push_back(draw_prototypes(E, dims[m], rng));
        int_protos.push_back(draw_prototypes(I, dims[m], rng));
    }

    SynthCorpus out;
    for (std::size_t c = 0; c < cfg.n_conversations; ++c) {
        Conversation conv;
        conv.dia_no = static_cast<std::int64_t>(c);
        const std::size_t n_utts =
            cfg.min_utterances +
            (cfg.max_utterances > cfg.min_utterances
                 ? rng.next_below(cfg.max_utterances - cfg.min_utterances + 1)
                 : 0);
        std::size_t prev_emotion = 0;
        std::int64_t clock_ms = 1000;
        for (std::size_t u = 0; u < n_utts; ++u) {
            std::size_t emotion;
            if (u > 0 && cfg.stickiness > 0.0 && rng.uniform() < cfg.stickiness) {
                emotion = prev_emotion;
            } else {
                emotion = rng.categorical(cfg.emotion_marginal);
            }
            prev_emotion = emotion;
            const std::size_t intent = rng.categorical(cfg.intent_given_emotion[emotion]);

            Utterance utt;
            utt.record.dia_no = conv.dia_no;
            utt.record.utt_no = static_cast<std::int64_t>(u);
            utt.record.video_name = "Synthetic";
            utt.record.season = std::nullopt;
            utt.record.episode = static_cast<std::int64_t>(c / 10 + 1);
            utt.record.emotion = emotion;
            utt.record.intent = intent;
            utt.record.speaker = static_cast<int>(u % 2);
            utt.record.subtitle = "speaker " + std::to_string(u % 2) + " sounds " +
                                  emotion_labels()[emotion] + " while " +
                                  intent_labels()[intent];
            const std::int64_t dur = 1200 + static_cast<std::int64_t>(rng.next_below(1800));
            utt.record.begin_ms = clock_ms;
            utt.record.end_ms = clock_ms + dur;
            clock_ms += dur + 300 + static_cast<std::int64_t>(rng.next_below(500));

            auto gen = [&](int m, std::size_t min_len, std::size_t max_len) {
                const std::size_t d = dims[m];
                const std::size_t len =
                    min_len + (max_len > min_len ? rng.next_below(max_len - min_len + 1) : 0);
                std::vector<double> data(len * d);
                for (std::size_t t = 0; t < len; ++t) {
                    for (std::size_t j = 0; j < d; ++j) {
                        const double base = j < d / 2
                                                ? cfg.emotion_proto_scale * emo_protos[m][emotion][j]
                                                : cfg.intent_proto_scale * int_protos[m][intent][j];
                        data[t * d + j] = quantize(base + cfg.noise * rng.normal());
                    }
                }
                return Tensor(Shape{len, d}, std::move(data));
            };
            utt.features.textual = gen(0, cfg.min_len_text, cfg.max_len_text);
            utt.features.acoustic = gen(1, cfg.min_len_audio, cfg.max_len_audio);
            utt.features.visual = gen(2, cfg.min_len_visual, cfg.max_len_visual);

            out.records.push_back(utt.record);
            conv.utterances.push_back(std::move(utt));
        }
        out.conversations.push_back(std::move(conv));
    }
    return out;
}

void write_synth_corpus(const SynthCorpus& corpus, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "textual");
    fs::create_directories(fs::path(out_dir) / "acoustic");
    fs::create_directories(fs::path(out_dir) / "visual");

    wire::write_file((fs::path(out_dir) / "annotations.csv").string(),
                     serialize_annotations_csv(corpus.records));
    for (const auto& conv : corpus.conversations) {
        for (const auto& utt : conv.utterances) {
            const std::string name = feature_file_name(conv.dia_no, utt.record.utt_no);
            write_feature_file((fs::path(out_dir) / "textual" / name).string(),
                               *utt.features.textual);
            write_feature_file((fs::path(out_dir) / "acoustic" / name).string(),
                               *utt.features.acoustic);
            write_feature_file((fs::path(out_dir) / "visual" / name).string(),
                               *utt.features.visual);
        }
    }
}

}  // namespace eiu
