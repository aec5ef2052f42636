#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eiu/tensor.hpp"

namespace eiu {

// Closed label vocabularies: Ekman's six basic emotions plus neutral, and the
// nine conversation intents.
const std::vector<std::string>& emotion_labels();  // 7
const std::vector<std::string>& intent_labels();   // 9

// case-insensitive, whitespace-trimmed lookup; nullopt when not in the vocabulary
std::optional<std::size_t> emotion_index(const std::string& label);
std::optional<std::size_t> intent_index(const std::string& label);

struct AnnotationRecord {
    std::string subtitle;
    std::int64_t dia_no = 0;
    std::int64_t utt_no = 0;
    std::string video_name;
    std::optional<std::int64_t> season;  // "-" in the CSV means absent
    std::int64_t episode = 0;
    std::int64_t begin_ms = 0;
    std::int64_t end_ms = 0;
    std::size_t emotion = 0;  // index into emotion_labels()
    std::size_t intent = 0;   // index into intent_labels()
    int speaker = 0;          // 0 or 1

    bool operator==(const AnnotationRecord&) const = default;
};

enum class Modality { textual, acoustic, visual };

struct ModalityMask {
    bool textual = true;
    bool acoustic = true;
    bool visual = true;

    bool enabled(Modality m) const {
        switch (m) {
            case Modality::textual: return textual;
            case Modality::acoustic: return acoustic;
            case Modality::visual: return visual;
        }
        return false;
    }
    bool any() const { return textual || acoustic || visual; }
    std::string tag() const {
        std::string s;
        if (textual) s += 't';
        if (acoustic) s += 'a';
        if (visual) s += 'v';
        return s;
    }
};

// Variable-length per-utterance feature sequences; any subset may be absent
// for masked-modality corpora. Tensors here never require grad.
struct UtteranceFeatures {
    std::optional<Tensor> textual;   // [L_t x text_dim]
    std::optional<Tensor> acoustic;  // [L_a x audio_dim]
    std::optional<Tensor> visual;    // [L_v x visual_dim]
};

struct Utterance {
    AnnotationRecord record;
    UtteranceFeatures features;
};

struct Conversation {
    std::int64_t dia_no = 0;
    std::vector<Utterance> utterances;  // sorted by utt_no
};

}  // namespace eiu
