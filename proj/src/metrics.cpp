#include "eiu/metrics.hpp"

#include "eiu/errors.hpp"

namespace eiu {

std::size_t argmax_lowest(const std::vector<double>& values) {
    if (values.empty()) throw ContractError("argmax of empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

MetricsReport compute_metrics(const std::vector<std::size_t>& truths,
                              const std::vector<std::size_t>& preds, std::size_t n_classes) {
    if (truths.size() != preds.size()) {
        throw ContractError("compute_metrics: truth/prediction length mismatch");
    }
    MetricsReport r;
    r.samples = truths.size();
    r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
    r.support.assign(n_classes, 0);
    r.precision.assign(n_classes, 0.0);
    r.recall.assign(n_classes, 0.0);
    r.f1.assign(n_classes, 0.0);

    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (truths[i] >= n_classes || preds[i] >= n_classes) {
            throw ContractError("compute_metrics: class index out of range");
        }
        r.confusion[truths[i]][preds[i]] += 1;
        r.support[truths[i]] += 1;
    }

    for (std::size_t c = 0; c < n_classes; ++c) {
        const std::size_t tp = r.confusion[c][c];
        std::size_t fp = 0, fn = 0;
        for (std::size_t k = 0; k < n_classes; ++k) {
            if (k == c) continue;
            fp += r.confusion[k][c];
            fn += r.confusion[c][k];
        }
        r.precision[c] = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        r.recall[c] = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        const double pr = r.precision[c] + r.recall[c];
        r.f1[c] = pr == 0.0 ? 0.0 : 2.0 * r.precision[c] * r.recall[c] / pr;
    }

    if (r.samples > 0) {
        double waf = 0.0;
        for (std::size_t c = 0; c < n_classes; ++c) {
            waf += static_cast<double>(r.support[c]) / static_cast<double>(r.samples) * r.f1[c];
        }
        r.waf = waf;
    }
    return r;
}

}  // namespace eiu
