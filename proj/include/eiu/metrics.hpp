#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace eiu {

// Confusion matrix, per-class precision/recall/F1 and the weighted average
// F-score (per-class F1 weighted by true-class support).
struct MetricsReport {
    std::vector<std::vector<std::size_t>> confusion;  // [true][pred]
    std::vector<std::size_t> support;
    std::vector<double> precision, recall, f1;
    double waf = 0.0;
    std::size_t samples = 0;
};

MetricsReport compute_metrics(const std::vector<std::size_t>& truths,
                              const std::vector<std::size_t>& preds, std::size_t n_classes);

// lowest index wins ties
std::size_t argmax_lowest(const std::vector<double>& values);

}  // namespace eiu
