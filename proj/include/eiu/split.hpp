#pragma once

#include <cstdint>
#include <vector>

#include "eiu/data.hpp"

namespace eiu {

struct SplitRatios {
    double train = 0.7, valid = 0.1, test = 0.2;  // normalized internally
};

struct SplitIndices {
    std::vector<std::size_t> train, valid, test;  // indices into the input list
};

// Dialogue-level 7:1:2 partition with greedy label balancing: after a seeded
// shuffle fixes the subset sizes (within one conversation of the exact
// shares), swap passes move dialogues between subsets while the total L1
// distance between subset label distributions and the global distribution
// keeps dropping, stopping early once it is under balance_tolerance.
SplitIndices split_corpus(const std::vector<Conversation>& conversations,
                          const SplitRatios& ratios, std::uint64_t seed,
                          double balance_tolerance = 0.05);

// total L1 balance score of a split (sum over subsets and both label kinds)
double split_balance_score(const std::vector<Conversation>& conversations,
                           const SplitIndices& split);

}  // namespace eiu
