#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace eiu {

// One utterance's three annotator labels, with an optional expert label used
// when all three disagree. The expert is data, not an in-process step.
struct AnnotationTriple {
    std::int64_t dia_no = 0;
    std::int64_t utt_no = 0;
    std::array<std::string, 3> labels;
    std::optional<std::string> expert;
};

struct VoteResult {
    std::optional<std::string> label;  // nullopt: no majority and no expert label
    bool no_majority = false;
};

// Majority rule: a label two annotators agree on is final; otherwise the
// expert label when present, else NoMajority.
VoteResult majority_vote(const AnnotationTriple& triple,
                         const std::vector<std::string>& vocabulary);

struct KappaResult {
    double kappa = 0.0;
    double p_bar = 0.0;  // mean observed agreement
    double p_e = 0.0;    // expected chance agreement
    std::size_t items = 0;
    std::size_t raters = 0;
    bool degenerate = false;  // every rating in one category (p_e == 1)
};

// Fleiss's kappa over an items x categories matrix of rating counts; every
// row must sum to the same rater count r >= 2.
KappaResult fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts);

// Triples CSV: Dia_No,Utt_No,Label1,Label2,Label3[,Expert]
std::vector<AnnotationTriple> parse_triples_csv(const std::string& bytes);

// counts matrix for fleiss_kappa from triples over a label vocabulary
std::vector<std::vector<std::size_t>> triples_to_counts(
    const std::vector<AnnotationTriple>& triples, const std::vector<std::string>& vocabulary);

std::string kappa_report_csv(const KappaResult& r);
std::string kappa_report_text(const KappaResult& r);

}  // namespace eiu
