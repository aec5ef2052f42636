#pragma once

#include <string>
#include <vector>

#include "eiu/data.hpp"

namespace eiu {

// 7 x 9 emotion-by-intent sample counts
using CorrelationMatrix = std::vector<std::vector<std::size_t>>;

CorrelationMatrix correlation_matrix(const std::vector<AnnotationRecord>& records);

std::string correlation_csv(const CorrelationMatrix& m);
// count-scaled glyph rendering, one row per emotion
std::string correlation_heatmap(const CorrelationMatrix& m);

struct DatasetStats {
    std::size_t conversations = 0;
    std::size_t utterances = 0;
    double duration_hours = 0.0;
    double avg_words_per_utterance = 0.0;      // UL
    double avg_duration_seconds = 0.0;         // DU
    double avg_utterances_per_conversation = 0.0;  // UC
    double avg_emotions_per_conversation = 0.0;    // EC, distinct labels
    double avg_intents_per_conversation = 0.0;     // IC
};

DatasetStats dataset_stats(const std::vector<Conversation>& conversations);

// whitespace tokens; text with no spaces and non-ASCII content counts
// codepoints instead (covers unsegmented scripts)
std::size_t count_words(const std::string& text);

std::string stats_csv(const DatasetStats& s);
std::string stats_text(const DatasetStats& s);

}  // namespace eiu
