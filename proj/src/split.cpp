#include "eiu/split.hpp"

#include <algorithm>
#include <array>

#include "eiu/rng.hpp"

namespace eiu {

namespace {

constexpr std::size_t kEmo = 7;
constexpr std::size_t kInt = 9;

struct LabelCounts {
    std::array<double, kEmo> emo{};
    std::array<double, kInt> intent{};
    double utterances = 0;

    void add(const Conversation& c, double sign) {
        for (const auto& u : c.utterances) {
            if (u.record.emotion < kEmo) emo[u.record.emotion] += sign;
            if (u.record.intent < kInt) intent[u.record.intent] += sign;
            utterances += sign;
        }
    }
};

double l1_distance(const LabelCounts& subset, const LabelCounts& global) {
    double d = 0.0;
    if (subset.utterances <= 0.0 || global.utterances <= 0.0) return 0.0;
    for (std::size_t i = 0; i < kEmo; ++i) {
        d += std::fabs(subset.emo[i] / subset.utterances - global.emo[i] / global.utterances);
    }
    for (std::size_t i = 0; i < kInt; ++i) {
        d += std::fabs(subset.intent[i] / subset.utterances -
                       global.intent[i] / global.utterances);
    }
    return d;
}

}  // namespace

SplitIndices split_corpus(const std::vector<Conversation>& conversations,
                          const SplitRatios& ratios, std::uint64_t seed,
                          double balance_tolerance) {
    const std::size_t n = conversations.size();
    if (n < 10) {
        throw ContractError("split_corpus: need at least 10 conversations, got " +
                            std::to_string(n));
    }
    const double rsum = ratios.train + ratios.valid + ratios.test;
    if (!(rsum > 0.0) || ratios.train < 0 || ratios.valid < 0 || ratios.test < 0) {
        throw ContractError("split_corpus: ratios must be non-negative with positive sum");
    }

    // largest-remainder apportionment; the epsilon keeps exact shares like
    // 7.0 from flooring to 6 under floating-point noise
    const double shares[3] = {ratios.train / rsum * n, ratios.valid / rsum * n,
                              ratios.test / rsum * n};
    std::size_t sizes[3];
    double rem[3];
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        sizes[i] = static_cast<std::size_t>(shares[i] + 1e-9);
        rem[i] = shares[i] - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    while (assigned < n) {
        int best = 0;
        for (int i = 1; i < 3; ++i) {
            if (rem[i] > rem[best]) best = i;
        }
        sizes[best] += 1;
        rem[best] = -1.0;
        ++assigned;
    }
    while (assigned > n) {
        int worst = 0;
        for (int i = 1; i < 3; ++i) {
            if (sizes[i] > 0 && (sizes[worst] == 0 || rem[i] < rem[worst])) worst = i;
        }
        sizes[worst] -= 1;
        --assigned;
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    // membership[conv index] = subset 0/1/2
    std::vector<int> member(n, 0);
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s) {
        for (std::size_t k = 0; k < sizes[s]; ++k) member[order[pos++]] = s;
    }

    LabelCounts global;
    for (const auto& c : conversations) global.add(c, 1.0);
    LabelCounts subset[3];
    for (std::size_t i = 0; i < n; ++i) subset[member[i]].add(conversations[i], 1.0);

    auto total_score = [&]() {
        return l1_distance(subset[0], global) + l1_distance(subset[1], global) +
               l1_distance(subset[2], global);
    };

    // swap passes: sizes stay fixed, dialogues trade places across subsets
    double score = total_score();
    const int max_passes = 10;
    for (int pass = 0; pass < max_passes && score > balance_tolerance; ++pass) {
        bool improved = false;
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = a + 1; b < n; ++b) {
                if (member[a] == member[b]) continue;
                const int sa = member[a], sb = member[b];
                subset[sa].add(conversations[a], -1.0);
                subset[sa].add(conversations[b], 1.0);
                subset[sb].add(conversations[b], -1.0);
                subset[sb].add(conversations[a], 1.0);
                const double candidate = total_score();
                if (candidate + 1e-12 < score) {
                    score = candidate;
                    member[a] = sb;
                    member[b] = sa;
                    improved = true;
                } else {
                    subset[sa].add(conversations[b], -1.0);
                    subset[sa].add(conversations[a], 1.0);
                    subset[sb].add(conversations[a], -1.0);
                    subset[sb].add(conversations[b], 1.0);
                }
            }
        }
        if (!improved) break;
    }

    SplitIndices out;
    for (std::size_t i = 0; i < n; ++i) {
        if (member[i] == 0) out.train.push_back(i);
        else if (member[i] == 1) out.valid.push_back(i);
        else out.test.push_back(i);
    }
    return out;
}

double split_balance_score(const std::vector<Conversation>& conversations,
                           const SplitIndices& split) {
    LabelCounts global;
    for (const auto& c : conversations) global.add(c, 1.0);
    double score = 0.0;
    for (const auto* idx : {&split.train, &split.valid, &split.test}) {
        LabelCounts s;
        for (auto i : *idx) s.add(conversations[i], 1.0);
        score += l1_distance(s, global);
    }
    return score;
}

}  // namespace eiu
