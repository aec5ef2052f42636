#include "eiu/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

namespace eiu {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw ContractError("train config: learning_rate must be > 0");
    if (batch_size == 0) throw ContractError("train config: batch_size must be >= 1");
    if (focal_gamma < 0.0) throw ContractError("train config: focal_gamma must be >= 0");
    if (n_runs == 0) throw ContractError("train config: n_runs must be >= 1");
}

// ---------------------------------------------------------------------------
// losses

Tensor focal_loss(const Tensor& logits, std::size_t true_class, double gamma) {
    if (logits.rank() != 1) {
        throw ContractError("focal_loss: logits must be a vector, got " +
                            shape_str(logits.shape()));
    }
    const std::size_t n_classes = logits.shape()[0];
    if (true_class >= n_classes) {
        throw ContractError("focal_loss: class " + std::to_string(true_class) +
                            " out of range for " + std::to_string(n_classes) + " classes");
    }
    if (gamma < 0.0) throw ContractError("focal_loss: gamma must be >= 0");

    // log-softmax with a detached max shift; the shift cancels in the gradient
    double mx = logits.at(0);
    for (std::size_t i = 1; i < n_classes; ++i) mx = std::max(mx, logits.at(i));
    Tensor z = ew(Binary::sub, logits, Tensor::scalar(mx));
    Tensor lse = ew(Unary::log, reduce(Reduction::sum, ew(Unary::exp, z), 0));
    Tensor log_pt = ew(Binary::sub, reshape(slice(z, 0, true_class, 1), {}), lse);
    Tensor ce = ew(Unary::neg, log_pt);
    if (gamma == 0.0) return ce;

    Tensor pt = ew(Unary::exp, log_pt);
    Tensor weight = powc(ew(Binary::sub, Tensor::scalar(1.0), pt), gamma);
    return ew(Binary::mul, weight, ce);
}

BatchLossParts batch_loss(const std::vector<SampleLogits>& batch, const TrainConfig& cfg) {
    if (batch.empty()) throw ContractError("batch_loss: empty batch");
    const double gamma = cfg.use_focal ? cfg.focal_gamma : 0.0;
    const Tensor inv_n = Tensor::scalar(1.0 / static_cast<double>(batch.size()));

    const bool want_e = cfg.task_mode != TaskMode::intent_only;
    const bool want_i = cfg.task_mode != TaskMode::emotion_only;

    BatchLossParts parts;
    if (want_e) {
        Tensor sum_e;
        for (const auto& s : batch) {
            if (s.label_e >= s.logits_e.shape()[0]) {
                throw DataError("emotion label " + std::to_string(s.label_e) +
                                " outside the category set");
            }
            Tensor l = focal_loss(s.logits_e, s.label_e, gamma);
            sum_e = sum_e.defined() ? sum_e + l : l;
        }
        parts.emotion = ew(Binary::mul, sum_e, inv_n);
    } else {
        parts.emotion = Tensor::scalar(0.0);
    }
    if (want_i) {
        Tensor sum_i;
        for (const auto& s : batch) {
            if (s.label_i >= s.logits_i.shape()[0]) {
                throw DataError("intent label " + std::to_string(s.label_i) +
                                " outside the category set");
            }
            Tensor l = focal_loss(s.logits_i, s.label_i, gamma);
            sum_i = sum_i.defined() ? sum_i + l : l;
        }
        parts.intent = ew(Binary::mul, sum_i, inv_n);
    } else {
        parts.intent = Tensor::scalar(0.0);
    }

    if (want_e && want_i) {
        parts.total = parts.emotion + parts.intent;
    } else if (want_e) {
        parts.total = parts.emotion;
    } else {
        parts.total = parts.intent;
    }
    return parts;
}

// ---------------------------------------------------------------------------
// optimizer and schedule

void AdamOptimizer::step(NamedTensorList& params, double lr) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i].second.size(), 0.0);
            v_[i].assign(params[i].second.size(), 0.0);
        }
    }
    if (m_.size() != params.size()) {
        throw ContractError("adam: parameter list changed between steps");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& [path, tensor] = params[i];
        auto& values = tensor.data();
        const bool has = tensor.has_grad();
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double g = has ? tensor.grad()[j] : 0.0;
            if (std::isnan(g)) {
                throw NumericError("adam: NaN gradient in parameter " + path);
            }
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            values[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

double lr_factor(std::size_t epoch, std::size_t total_epochs) {
    if (epoch >= total_epochs) {
        throw ContractError("lr_factor: epoch " + std::to_string(epoch) +
                            " out of range for " + std::to_string(total_epochs));
    }
    const std::size_t half = total_epochs / 2;
    const std::size_t k = epoch + 1;
    if (k <= half || total_epochs == half) return 1.0;
    return 1.0 - 0.9 * static_cast<double>(k - half) / static_cast<double>(total_epochs - half);
}

// ---------------------------------------------------------------------------
// evaluation

std::pair<MetricsReport, MetricsReport> evaluate(const ModelState& state, const ModelConfig& cfg,
                                                 const std::vector<Conversation>& split) {
    if (split.empty()) throw ContractError("evaluate: empty split");
    std::vector<std::size_t> truth_e, truth_i, pred_e, pred_i;
    for (const auto& conv : split) {
        for (std::size_t n = 0; n < conv.utterances.size(); ++n) {
            ForwardTrace tr = forward(state, cfg, conv, n);
            truth_e.push_back(conv.utterances[n].record.emotion);
            truth_i.push_back(conv.utterances[n].record.intent);
            pred_e.push_back(argmax_lowest(tr.logits_e.data()));
            pred_i.push_back(argmax_lowest(tr.logits_i.data()));
        }
    }
    return {compute_metrics(truth_e, pred_e, cfg.n_emotions),
            compute_metrics(truth_i, pred_i, cfg.n_intents)};
}

// ---------------------------------------------------------------------------
// training loops

namespace {

struct SampleRef {
    std::size_t conv, utt;
};

std::vector<SampleRef> collect_samples(const std::vector<Conversation>& split) {
    std::vector<SampleRef> out;
    for (std::size_t c = 0; c < split.size(); ++c) {
        for (std::size_t u = 0; u < split[c].utterances.size(); ++u) out.push_back({c, u});
    }
    return out;
}

NamedTensorList filter_prefixes(const NamedTensorList& params,
                                const std::vector<std::string>& prefixes) {
    NamedTensorList out;
    for (const auto& [path, t] : params) {
        for (const auto& p : prefixes) {
            if (path.rfind(p, 0) == 0) {
                out.emplace_back(path, t);
                break;
            }
        }
    }
    return out;
}

}  // namespace

PretrainResult pretrain(const Corpus& corpus, const ModelConfig& cfg, const TrainConfig& tc) {
    cfg.validate();
    tc.validate();
    if (corpus.train.empty()) throw ContractError("pretrain: corpus has no train split");

    ModelState state = init_model(cfg, tc.seed);
    // throwaway classification heads on the mean-pooled fused representation
    Rng head_rng(tc.seed + 0x70726574ull);
    LinearParams cls_pre_e = init_linear(cfg.hidden, cfg.n_emotions, head_rng);
    LinearParams cls_pre_i = init_linear(cfg.hidden, cfg.n_intents, head_rng);

    NamedTensorList trainable = filter_prefixes(state.params, {"enc/"});
    trainable.emplace_back("cls_pre/e/W", cls_pre_e.W);
    trainable.emplace_back("cls_pre/e/b", cls_pre_e.b);
    trainable.emplace_back("cls_pre/i/W", cls_pre_i.W);
    trainable.emplace_back("cls_pre/i/b", cls_pre_i.b);

    AdamOptimizer opt;
    Rng shuffle_rng(tc.seed + 0x73687566ull);
    std::vector<SampleRef> samples = collect_samples(corpus.train);

    PretrainResult result{std::move(state), {}};
    for (std::size_t epoch = 0; epoch < tc.epochs_pretrain; ++epoch) {
        const double lr = tc.learning_rate *
                          (tc.use_lr_schedule ? lr_factor(epoch, tc.epochs_pretrain) : 1.0);
        shuffle_rng.shuffle(samples);
        double sum_total = 0.0, sum_e = 0.0, sum_i = 0.0;
        for (std::size_t off = 0; off < samples.size(); off += tc.batch_size) {
            const std::size_t last = std::min(off + tc.batch_size, samples.size());
            Tape tape;
            std::vector<SampleLogits> batch;
            for (std::size_t k = off; k < last; ++k) {
                const auto& conv = corpus.train[samples[k].conv];
                const auto& utt = conv.utterances[samples[k].utt];
                Tensor fe = encode_task_utterance(result.state, cfg, utt.features, Task::emotion);
                Tensor fi = encode_task_utterance(result.state, cfg, utt.features, Task::intent);
                SampleLogits s;
                s.logits_e = linear(cls_pre_e, reduce(Reduction::mean, fe, 0));
                s.logits_i = linear(cls_pre_i, reduce(Reduction::mean, fi, 0));
                s.label_e = utt.record.emotion;
                s.label_i = utt.record.intent;
                batch.push_back(std::move(s));
            }
            BatchLossParts loss = batch_loss(batch, tc);
            tape.backward(loss.total);
            opt.step(trainable, lr);
            for (auto& [p, t] : trainable) t.zero_grad();
            const double w = static_cast<double>(last - off);
            sum_total += loss.total.item() * w;
            sum_e += loss.emotion.item() * w;
            sum_i += loss.intent.item() * w;
        }
        const double n = static_cast<double>(samples.size());
        result.losses.epoch_total.push_back(sum_total / n);
        result.losses.epoch_emotion.push_back(sum_e / n);
        result.losses.epoch_intent.push_back(sum_i / n);
    }
    return result;
}

TrainResult train(const Corpus& corpus, const ModelConfig& cfg, const TrainConfig& tc,
                  const ModelState* pretrained) {
    cfg.validate();
    tc.validate();
    if (corpus.train.empty()) throw ContractError("train: corpus has no train split");
    const std::vector<Conversation>& valid =
        corpus.valid.empty() ? corpus.train : corpus.valid;

    ModelState state = init_model(cfg, tc.seed);
    if (pretrained) state.load_prefix(*pretrained, "enc/");

    AdamOptimizer opt;
    Rng shuffle_rng(tc.seed + 0x73687566ull);
    std::vector<SampleRef> samples = collect_samples(corpus.train);

    TrainResult result;
    result.best_valid_waf_sum = -1.0;
    NamedTensorList best;  // deep copies of parameter values

    auto snapshot = [&]() {
        best.clear();
        for (const auto& [p, t] : state.params) best.emplace_back(p, t.clone());
    };

    for (std::size_t epoch = 0; epoch < tc.epochs_train; ++epoch) {
        const double lr = tc.learning_rate *
                          (tc.use_lr_schedule ? lr_factor(epoch, tc.epochs_train) : 1.0);
        shuffle_rng.shuffle(samples);
        double sum_total = 0.0, sum_e = 0.0, sum_i = 0.0;
        for (std::size_t off = 0; off < samples.size(); off += tc.batch_size) {
            const std::size_t last = std::min(off + tc.batch_size, samples.size());
            Tape tape;
            std::vector<SampleLogits> batch;
            for (std::size_t k = off; k < last; ++k) {
                const auto& conv = corpus.train[samples[k].conv];
                const auto& utt = conv.utterances[samples[k].utt];
                ForwardTrace tr = forward(state, cfg, conv, samples[k].utt);
                SampleLogits s;
                s.logits_e = tr.logits_e;
                s.logits_i = tr.logits_i;
                s.label_e = utt.record.emotion;
                s.label_i = utt.record.intent;
                batch.push_back(std::move(s));
            }
            BatchLossParts loss = batch_loss(batch, tc);
            tape.backward(loss.total);
            opt.step(state.params, lr);
            state.zero_grads();
            const double w = static_cast<double>(last - off);
            sum_total += loss.total.item() * w;
            sum_e += loss.emotion.item() * w;
            sum_i += loss.intent.item() * w;
        }
        const double n = static_cast<double>(samples.size());
        result.losses.epoch_total.push_back(sum_total / n);
        result.losses.epoch_emotion.push_back(sum_e / n);
        result.losses.epoch_intent.push_back(sum_i / n);
        result.epochs_run = epoch + 1;

        auto [me, mi] = evaluate(state, cfg, valid);
        double waf_sum = 0.0;
        if (tc.task_mode != TaskMode::intent_only) waf_sum += me.waf;
        if (tc.task_mode != TaskMode::emotion_only) waf_sum += mi.waf;
        if (waf_sum > result.best_valid_waf_sum) {
            result.best_valid_waf_sum = waf_sum;
            result.best_epoch = epoch;
            snapshot();
        }

        if (tc.target_train_waf.has_value()) {
            auto [te, ti] = evaluate(state, cfg, corpus.train);
            bool reached = true;
            if (tc.task_mode != TaskMode::intent_only) reached = reached && te.waf >= *tc.target_train_waf;
            if (tc.task_mode != TaskMode::emotion_only) reached = reached && ti.waf >= *tc.target_train_waf;
            if (reached) {
                snapshot();
                result.best_epoch = epoch;
                break;
            }
        }
    }

    state.load_values(best);
    result.state = std::move(state);
    return result;
}

// ---------------------------------------------------------------------------
// ablation suite

std::vector<std::string> ablation_row_names() {
    return {"full",         "wo_history",  "wo_interaction", "wo_gating",  "wo_fl",
            "wo_pretrain",  "emotion_only", "intent_only",    "modality_t", "modality_a",
            "modality_v",   "modality_ta", "modality_tv",    "modality_av", "modality_tav"};
}

namespace {

void apply_row(const std::string& name, ModelConfig& cfg, TrainConfig& tc) {
    if (name == "full") return;
    if (name == "wo_history") { cfg.use_history = false; return; }
    if (name == "wo_interaction") { cfg.use_interaction = false; return; }
    if (name == "wo_gating") { cfg.use_gate = false; return; }
    if (name == "wo_fl") { tc.use_focal = false; return; }
    if (name == "wo_pretrain") { tc.pretrained_init = false; return; }
    if (name == "emotion_only") { tc.task_mode = TaskMode::emotion_only; return; }
    if (name == "intent_only") { tc.task_mode = TaskMode::intent_only; return; }
    if (name.rfind("modality_", 0) == 0) {
        const std::string tag = name.substr(9);
        cfg.modality_mask.textual = tag.find('t') != std::string::npos;
        cfg.modality_mask.acoustic = tag.find('a') != std::string::npos;
        cfg.modality_mask.visual = tag.find('v') != std::string::npos;
        return;
    }
    throw ContractError("unknown ablation row: " + name);
}

AblationRow run_row(const std::string& name, const Corpus& corpus, const ModelConfig& base_cfg,
                    const TrainConfig& base_tc) {
    AblationRow row;
    row.name = name;
    try {
        for (std::size_t k = 0; k < base_tc.n_runs; ++k) {
            ModelConfig cfg = base_cfg;
            TrainConfig tc = base_tc;
            apply_row(name, cfg, tc);
            tc.seed = base_tc.seed + k;

            const ModelState* init_from = nullptr;
            PretrainResult pre;
            if (tc.pretrained_init && tc.epochs_pretrain > 0) {
                pre = pretrain(corpus, cfg, tc);
                init_from = &pre.state;
            }
            TrainResult tr = train(corpus, cfg, tc, init_from);
            const std::vector<Conversation>& eval_split =
                corpus.test.empty() ? corpus.train : corpus.test;
            auto [me, mi] = evaluate(tr.state, cfg, eval_split);

            row.reports_emotion = tc.task_mode != TaskMode::intent_only;
            row.reports_intent = tc.task_mode != TaskMode::emotion_only;
            row.waf_e_per_seed.push_back(me.waf);
            row.waf_i_per_seed.push_back(mi.waf);
            if (row.f1_e_mean.empty()) row.f1_e_mean.assign(me.f1.size(), 0.0);
            if (row.f1_i_mean.empty()) row.f1_i_mean.assign(mi.f1.size(), 0.0);
            for (std::size_t c = 0; c < me.f1.size(); ++c) row.f1_e_mean[c] += me.f1[c];
            for (std::size_t c = 0; c < mi.f1.size(); ++c) row.f1_i_mean[c] += mi.f1[c];
        }
        const double n = static_cast<double>(base_tc.n_runs);
        for (double w : row.waf_e_per_seed) row.waf_e_mean += w / n;
        for (double w : row.waf_i_per_seed) row.waf_i_mean += w / n;
        for (auto& f : row.f1_e_mean) f /= n;
        for (auto& f : row.f1_i_mean) f /= n;
    } catch (const Error& e) {
        row.error = e.what();  // keep partial results from other rows
    }
    return row;
}

}  // namespace

AblationReport ablation_suite(const Corpus& corpus, const ModelConfig& cfg, const TrainConfig& tc,
                              const AblateOptions& opts) {
    std::vector<std::string> names = opts.only.empty() ? ablation_row_names() : opts.only;
    AblationReport report;
    report.n_runs = tc.n_runs;
    report.rows.resize(names.size());

    const std::size_t jobs = std::max<std::size_t>(1, opts.jobs);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= names.size()) break;
            report.rows[i] = run_row(names[i], corpus, cfg, tc);
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < std::min(jobs, names.size()); ++j) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) t.join();
    }
    return report;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string AblationReport::to_csv() const {
    std::ostringstream os;
    os << "# reference full-scale WAF (not reproducible at this scale): "
          "english emotion 42.09 intent 45.53; mandarin emotion 55.08 intent 61.63\n";
    os << "configuration,task,waf_mean";
    for (std::size_t k = 0; k < n_runs; ++k) os << ",waf_seed" << k;
    os << ",per_class_f1\n";
    for (const auto& row : rows) {
        if (!row.error.empty()) {
            os << row.name << ",error,,\"" << row.error << "\"\n";
            continue;
        }
        if (row.reports_emotion) {
            os << row.name << ",emotion," << fmt(row.waf_e_mean);
            for (double w : row.waf_e_per_seed) os << "," << fmt(w);
            os << ",";
            for (std::size_t c = 0; c < row.f1_e_mean.size(); ++c) {
                os << (c ? ";" : "") << fmt(row.f1_e_mean[c]);
            }
            os << "\n";
        }
        if (row.reports_intent) {
            os << row.name << ",intent," << fmt(row.waf_i_mean);
            for (double w : row.waf_i_per_seed) os << "," << fmt(w);
            os << ",";
            for (std::size_t c = 0; c < row.f1_i_mean.size(); ++c) {
                os << (c ? ";" : "") << fmt(row.f1_i_mean[c]);
            }
            os << "\n";
        }
    }
    return os.str();
}

std::string AblationReport::to_text() const {
    std::ostringstream os;
    os << "reference full-scale WAF (not reproducible at this scale):\n"
       << "  english  emotion 42.09  intent 45.53\n"
       << "  mandarin emotion 55.08  intent 61.63\n\n";
    os << "configuration    emo WAF   int WAF   (mean over " << n_runs << " seeds)\n";
    os << "---------------------------------------------\n";
    for (const auto& row : rows) {
        char buf[128];
        if (!row.error.empty()) {
            std::snprintf(buf, sizeof(buf), "%-16s failed: %s\n", row.name.c_str(),
                          row.error.c_str());
        } else {
            const std::string e = row.reports_emotion ? fmt(row.waf_e_mean) : "-";
            const std::string i = row.reports_intent ? fmt(row.waf_i_mean) : "-";
            std::snprintf(buf, sizeof(buf), "%-16s %-9s %-9s\n", row.name.c_str(), e.c_str(),
                          i.c_str());
        }
        os << buf;
    }
    return os.str();
}

std::string loss_curve_csv(const LossReport& report) {
    std::ostringstream os;
    os << "epoch,loss_total,loss_emotion,loss_intent\n";
    for (std::size_t e = 0; e < report.epoch_total.size(); ++e) {
        os << e << "," << report.epoch_total[e] << "," << report.epoch_emotion[e] << ","
           << report.epoch_intent[e] << "\n";
    }
    return os.str();
}

}  // namespace eiu
