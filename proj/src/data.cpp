#include "eiu/data.hpp"

#include <algorithm>
#include <cctype>

namespace eiu {

const std::vector<std::string>& emotion_labels() {
    static const std::vector<std::string> labels = {"happy", "surprise", "sad",    "disgust",
                                                    "anger", "fear",     "neutral"};
    return labels;
}

const std::vector<std::string>& intent_labels() {
    static const std::vector<std::string> labels = {
        "questioning", "agreeing",  "acknowledging", "sympathizing", "encouraging",
        "consoling",   "suggesting", "wishing",       "neutral"};
    return labels;
}

namespace {

std::string normalize(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out = s.substr(b, e - b);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::optional<std::size_t> lookup(const std::vector<std::string>& vocab, const std::string& label) {
    const std::string norm = normalize(label);
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        if (vocab[i] == norm) return i;
    }
    return std::nullopt;
}

}  // namespace

std::optional<std::size_t> emotion_index(const std::string& label) {
    return lookup(emotion_labels(), label);
}

std::optional<std::size_t> intent_index(const std::string& label) {
    return lookup(intent_labels(), label);
}

}  // namespace eiu
