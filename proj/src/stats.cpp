#include "eiu/stats.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace eiu {

CorrelationMatrix correlation_matrix(const std::vector<AnnotationRecord>& records) {
    CorrelationMatrix m(emotion_labels().size(),
                        std::vector<std::size_t>(intent_labels().size(), 0));
    for (const auto& r : records) {
        if (r.emotion >= m.size() || r.intent >= m[0].size()) {
            throw DataError("correlation_matrix: label index out of range");
        }
        m[r.emotion][r.intent] += 1;
    }
    return m;
}

std::string correlation_csv(const CorrelationMatrix& m) {
    std::ostringstream os;
    os << "emotion";
    for (const auto& label : intent_labels()) os << "," << label;
    os << "\n";
    for (std::size_t e = 0; e < m.size(); ++e) {
        os << emotion_labels()[e];
        for (std::size_t i = 0; i < m[e].size(); ++i) os << "," << m[e][i];
        os << "\n";
    }
    return os.str();
}

std::string correlation_heatmap(const CorrelationMatrix& m) {
    static const char* glyphs = " .:oO@";
    std::size_t max_count = 0;
    for (const auto& row : m) {
        for (auto v : row) max_count = std::max(max_count, v);
    }
    std::ostringstream os;
    os << "          ";
    for (const auto& label : intent_labels()) os << label.substr(0, 3) << " ";
    os << "\n";
    for (std::size_t e = 0; e < m.size(); ++e) {
        std::string name = emotion_labels()[e];
        name.resize(9, ' ');
        os << name << " ";
        for (std::size_t i = 0; i < m[e].size(); ++i) {
            char g = ' ';
            if (max_count > 0 && m[e][i] > 0) {
                const std::size_t level = 1 + m[e][i] * 4 / max_count;
                g = glyphs[std::min<std::size_t>(level, 5)];
            }
            os << ' ' << g << "  ";
        }
        os << "\n";
    }
    if (max_count > 0) {
        os << "scale: ' ' = 0, '@' = " << max_count << " samples\n";
    }
    return os.str();
}

std::size_t count_words(const std::string& text) {
    std::size_t tokens = 0;
    bool in_token = false;
    bool has_non_ascii = false;
    for (unsigned char c : text) {
        if (c > 0x7f) has_non_ascii = true;
        if (std::isspace(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++tokens;
        }
    }
    if (tokens <= 1 && has_non_ascii) {
        // unsegmented script: count codepoints (UTF-8 lead bytes)
        std::size_t cps = 0;
        for (unsigned char c : text) {
            if ((c & 0xc0) != 0x80 && !std::isspace(c)) ++cps;
        }
        return cps;
    }
    return tokens;
}

DatasetStats dataset_stats(const std::vector<Conversation>& conversations) {
    DatasetStats s;
    s.conversations = conversations.size();
    double total_ms = 0.0;
    double total_words = 0.0;
    double total_emotions = 0.0, total_intents = 0.0;
    for (const auto& conv : conversations) {
        s.utterances += conv.utterances.size();
        std::set<std::size_t> emos, intents;
        for (const auto& u : conv.utterances) {
            total_ms += static_cast<double>(u.record.end_ms - u.record.begin_ms);
            total_words += static_cast<double>(count_words(u.record.subtitle));
            emos.insert(u.record.emotion);
            intents.insert(u.record.intent);
        }
        total_emotions += static_cast<double>(emos.size());
        total_intents += static_cast<double>(intents.size());
    }
    if (s.utterances > 0) {
        s.duration_hours = total_ms / 3600000.0;
        s.avg_words_per_utterance = total_words / static_cast<double>(s.utterances);
        s.avg_duration_seconds = total_ms / 1000.0 / static_cast<double>(s.utterances);
    }
    if (s.conversations > 0) {
        s.avg_utterances_per_conversation =
            static_cast<double>(s.utterances) / static_cast<double>(s.conversations);
        s.avg_emotions_per_conversation = total_emotions / static_cast<double>(s.conversations);
        s.avg_intents_per_conversation = total_intents / static_cast<double>(s.conversations);
    }
    return s;
}

std::string stats_csv(const DatasetStats& s) {
    std::ostringstream os;
    os << "statistic,value\n";
    os << "conversations," << s.conversations << "\n";
    os << "utterances," << s.utterances << "\n";
    os << "duration_hours," << s.duration_hours << "\n";
    os << "avg_words_per_utterance," << s.avg_words_per_utterance << "\n";
    os << "avg_duration_seconds," << s.avg_duration_seconds << "\n";
    os << "avg_utterances_per_conversation," << s.avg_utterances_per_conversation << "\n";
    os << "avg_emotions_per_conversation," << s.avg_emotions_per_conversation << "\n";
    os << "avg_intents_per_conversation," << s.avg_intents_per_conversation << "\n";
    return os.str();
}

std::string stats_text(const DatasetStats& s) {
    std::ostringstream os;
    os << "# conversations                    " << s.conversations << "\n";
    os << "# utterances                       " << s.utterances << "\n";
    os << "# duration (hours)                 " << s.duration_hours << "\n";
    os << "avg utterance length (words)       " << s.avg_words_per_utterance << "\n";
    os << "avg duration per utterance (s)     " << s.avg_duration_seconds << "\n";
    os << "avg utterances per conversation    " << s.avg_utterances_per_conversation << "\n";
    os << "avg emotions per conversation      " << s.avg_emotions_per_conversation << "\n";
    os << "avg intents per conversation       " << s.avg_intents_per_conversation << "\n";
    return os.str();
}

}  // namespace eiu
