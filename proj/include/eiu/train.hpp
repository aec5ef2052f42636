#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eiu/metrics.hpp"
#include "eiu/model.hpp"

namespace eiu {

struct Corpus {
    std::vector<Conversation> train, valid, test;
};

enum class TaskMode { joint, emotion_only, intent_only };

struct TrainConfig {
    double learning_rate = 0.0002;
    std::size_t batch_size = 32;
    std::size_t epochs_pretrain = 60;
    std::size_t epochs_train = 60;
    double focal_gamma = 2.0;
    std::uint64_t seed = 0;
    std::size_t n_runs = 3;
    bool use_focal = true;
    bool pretrained_init = true;
    TaskMode task_mode = TaskMode::joint;
    bool use_lr_schedule = true;
    // stop once every active task's train-split WAF reaches this value
    std::optional<double> target_train_waf;

    void validate() const;
};

struct LossReport {
    std::vector<double> epoch_total, epoch_emotion, epoch_intent;
};

// -(1 - p_t)^gamma * log(p_t) with p_t the softmax probability of the true
// class; gamma == 0 is exactly cross-entropy. Differentiable through logits.
Tensor focal_loss(const Tensor& logits, std::size_t true_class, double gamma);

struct SampleLogits {
    Tensor logits_e, logits_i;
    std::size_t label_e = 0, label_i = 0;
};

struct BatchLossParts {
    Tensor total, emotion, intent;  // scalars; total = emotion + intent
};

BatchLossParts batch_loss(const std::vector<SampleLogits>& batch, const TrainConfig& cfg);

// Adam with bias correction; moment buffers keyed by parameter position.
class AdamOptimizer {
public:
    explicit AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(NamedTensorList& params, double lr);
    std::size_t steps_taken() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// flat for the first half of training, then linear decay to 0.1 at the last
// epoch (0-indexed epoch argument)
double lr_factor(std::size_t epoch, std::size_t total_epochs);

std::pair<MetricsReport, MetricsReport> evaluate(const ModelState& state, const ModelConfig& cfg,
                                                 const std::vector<Conversation>& split);

struct PretrainResult {
    ModelState state;  // encoder values trained; other parameters untouched
    LossReport losses;
};

// Trains the two task encoders with throwaway classifiers on the fused
// utterance representation (no history, no interaction).
PretrainResult pretrain(const Corpus& corpus, const ModelConfig& cfg, const TrainConfig& tc);

struct TrainResult {
    ModelState state;  // best-validation checkpoint
    LossReport losses;
    std::size_t best_epoch = 0;
    double best_valid_waf_sum = 0.0;
    std::size_t epochs_run = 0;
};

TrainResult train(const Corpus& corpus, const ModelConfig& cfg, const TrainConfig& tc,
                  const ModelState* pretrained = nullptr);

// ---------------------------------------------------------------------------
// ablation suite

struct AblationRow {
    std::string name;
    std::vector<double> waf_e_per_seed, waf_i_per_seed;
    std::vector<double> f1_e_mean, f1_i_mean;  // per class, averaged over seeds
    double waf_e_mean = 0.0, waf_i_mean = 0.0;
    bool reports_emotion = true, reports_intent = true;
    std::string error;  // non-empty when this configuration failed
};

struct AblationReport {
    std::vector<AblationRow> rows;
    std::size_t n_runs = 0;
    std::string to_csv() const;
    std::string to_text() const;
};

struct AblateOptions {
    std::size_t jobs = 1;
    // empty -> all 15 configurations (5 module ablations + full, 2 task
    // modes, 7 modality subsets); otherwise only the named rows
    std::vector<std::string> only;
};

std::vector<std::string> ablation_row_names();

AblationReport ablation_suite(const Corpus& corpus, const ModelConfig& cfg, const TrainConfig& tc,
                              const AblateOptions& opts = {});

std::string loss_curve_csv(const LossReport& report);

}  // namespace eiu
