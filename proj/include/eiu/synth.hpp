#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eiu/data.hpp"

namespace eiu {

// Synthetic corpus generator. Emotions follow the configured marginal (or a
// sticky Markov chain over it), intents follow the emotion-conditional table,
// and features are class prototypes plus Gaussian noise: the emotion
// prototype fills the first half of each feature vector, the intent prototype
// the second half. Output parses cleanly through the corpus readers.
struct SynthConfig {
    std::size_t n_conversations = 64;
    std::size_t min_utterances = 8, max_utterances = 8;

    std::vector<double> emotion_marginal;              // length 7, sums to 1
    std::vector<std::vector<double>> intent_given_emotion;  // 7 x 9, rows sum to 1

    double emotion_proto_scale = 1.0;
    double intent_proto_scale = 1.0;
    double noise = 0.1;

    std::size_t text_dim = 12, audio_dim = 10, visual_dim = 8;
    std::size_t min_len_text = 2, max_len_text = 5;
    std::size_t min_len_audio = 2, max_len_audio = 4;
    std::size_t min_len_visual = 1, max_len_visual = 3;

    double stickiness = 0.0;  // probability of repeating the previous emotion
    std::uint64_t seed = 0;

    // uniform emotion marginal with a strongly peaked emotion->intent table
    static SynthConfig defaults();
    void validate() const;
};

struct SynthCorpus {
    std::vector<Conversation> conversations;
    std::vector<AnnotationRecord> records;  // flattened, conversation order
};

SynthCorpus synth_corpus(const SynthConfig& config);

// Emits annotations.csv plus {textual,acoustic,visual}/dia_D_utt_U.eiuf
// under out_dir, in the exact reader formats.
void write_synth_corpus(const SynthCorpus& corpus, const std::string& out_dir);

}  // namespace eiu
