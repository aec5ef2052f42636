#include "eiu/model.hpp"

#include <cmath>
#include <map>

#include <json.hpp>

namespace eiu {

void ModelConfig::validate() const {
    if (!modality_mask.any()) throw ContractError("config: modality_mask must be non-empty");
    if (hidden == 0 || heads == 0 || hidden % heads != 0) {
        throw ContractError("config: hidden must be a positive multiple of heads");
    }
    if (n_emotions == 0 || n_intents == 0) {
        throw ContractError("config: category counts must be positive");
    }
    if (kernel_widths.empty()) throw ContractError("config: kernel_widths must be non-empty");
    if (filters_per_width == 0) throw ContractError("config: filters_per_width must be positive");
    if (text_dim == 0 || audio_dim == 0 || visual_dim == 0) {
        throw ContractError("config: feature dimensions must be positive");
    }
}

std::string ModelConfig::to_json() const {
    nlohmann::json j;
    j["hidden"] = hidden;
    j["heads"] = heads;
    j["n_emotions"] = n_emotions;
    j["n_intents"] = n_intents;
    j["text_dim"] = text_dim;
    j["audio_dim"] = audio_dim;
    j["visual_dim"] = visual_dim;
    j["kernel_widths"] = kernel_widths;
    j["filters_per_width"] = filters_per_width;
    j["ff_dim"] = ff_dim;
    j["modalities"] = modality_mask.tag();
    j["use_history"] = use_history;
    j["use_interaction"] = use_interaction;
    j["use_gate"] = use_gate;
    return j.dump(2) + "\n";
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ModelConfig cfg;
    cfg.hidden = j.at("hidden").get<std::size_t>();
    cfg.heads = j.at("heads").get<std::size_t>();
    cfg.n_emotions = j.at("n_emotions").get<std::size_t>();
    cfg.n_intents = j.at("n_intents").get<std::size_t>();
    cfg.text_dim = j.at("text_dim").get<std::size_t>();
    cfg.audio_dim = j.at("audio_dim").get<std::size_t>();
    cfg.visual_dim = j.at("visual_dim").get<std::size_t>();
    cfg.kernel_widths = j.at("kernel_widths").get<std::vector<std::size_t>>();
    cfg.filters_per_width = j.at("filters_per_width").get<std::size_t>();
    cfg.ff_dim = j.at("ff_dim").get<std::size_t>();
    const std::string tag = j.at("modalities").get<std::string>();
    cfg.modality_mask.textual = tag.find('t') != std::string::npos;
    cfg.modality_mask.acoustic = tag.find('a') != std::string::npos;
    cfg.modality_mask.visual = tag.find('v') != std::string::npos;
    cfg.use_history = j.at("use_history").get<bool>();
    cfg.use_interaction = j.at("use_interaction").get<bool>();
    cfg.use_gate = j.at("use_gate").get<bool>();
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// state

namespace {

struct Registrar {
    NamedTensorList& out;
    void operator()(const std::string& path, const Tensor& t) { out.emplace_back(path, t); }
    void linear(const std::string& base, const LinearParams& p) {
        (*this)(base + "/W", p.W);
        (*this)(base + "/b", p.b);
    }
    void lstm(const std::string& base, const LstmParams& p) {
        (*this)(base + "/W", p.W);
        (*this)(base + "/U", p.U);
        (*this)(base + "/b", p.b);
    }
    void gru(const std::string& base, const GruParams& p) {
        (*this)(base + "/W", p.W);
        (*this)(base + "/U", p.U);
        (*this)(base + "/b", p.b);
    }
    void textcnn(const std::string& base, const TextCnnParams& p) {
        for (std::size_t i = 0; i < p.widths.size(); ++i) {
            const std::string w = std::to_string(p.widths[i]);
            (*this)(base + "/conv" + w + "/K", p.K[i]);
            (*this)(base + "/conv" + w + "/b", p.Kb[i]);
        }
        linear(base + "/proj", p.proj);
    }
    void mha(const std::string& base, const MhaParams& p) {
        linear(base + "/q", p.q);
        linear(base + "/k", p.k);
        linear(base + "/v", p.v);
        linear(base + "/o", p.o);
    }
    void transformer(const std::string& base, const TransformerParams& p) {
        mha(base + "/attn", p.attn);
        (*this)(base + "/ln1/g", p.ln1_g);
        (*this)(base + "/ln1/b", p.ln1_b);
        linear(base + "/ff1", p.ff1);
        linear(base + "/ff2", p.ff2);
        (*this)(base + "/ln2/g", p.ln2_g);
        (*this)(base + "/ln2/b", p.ln2_b);
    }
};

TaskEncoderParams init_task_encoder(const ModelConfig& cfg, Rng& rng) {
    TaskEncoderParams p;
    p.text = init_textcnn(cfg.text_dim, cfg.kernel_widths, cfg.filters_per_width, cfg.hidden, rng);
    p.acoustic = init_lstm(cfg.audio_dim, cfg.hidden, rng);
    p.visual = init_lstm(cfg.visual_dim, cfg.hidden, rng);
    p.fusion = init_transformer(cfg.hidden, cfg.heads, cfg.ff_dim ? cfg.ff_dim : 2 * cfg.hidden,
                                rng);
    return p;
}

}  // namespace

ModelState init_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    ModelState s;
    s.emotion_enc = init_task_encoder(cfg, rng);
    s.intent_enc = init_task_encoder(cfg, rng);
    s.history.text = init_gru(cfg.text_dim, cfg.hidden, rng);
    s.history.acoustic = init_gru(cfg.audio_dim, cfg.hidden, rng);
    s.history.visual = init_gru(cfg.visual_dim, cfg.hidden, rng);
    s.history.proj = init_linear(3 * cfg.hidden, cfg.hidden, rng);
    s.inter_e.binary = init_mha(cfg.hidden, cfg.heads, rng);
    s.inter_e.triple = init_mha(cfg.hidden, cfg.heads, rng);
    s.inter_i.binary = init_mha(cfg.hidden, cfg.heads, rng);
    s.inter_i.triple = init_mha(cfg.hidden, cfg.heads, rng);
    s.cls_e = init_linear(cfg.hidden, cfg.n_emotions, rng);
    s.cls_i = init_linear(cfg.hidden, cfg.n_intents, rng);

    Registrar reg{s.params};
    reg.textcnn("enc/e/text", s.emotion_enc.text);
    reg.lstm("enc/e/ac", s.emotion_enc.acoustic);
    reg.lstm("enc/e/vis", s.emotion_enc.visual);
    reg.transformer("enc/e/fuse", s.emotion_enc.fusion);
    reg.textcnn("enc/i/text", s.intent_enc.text);
    reg.lstm("enc/i/ac", s.intent_enc.acoustic);
    reg.lstm("enc/i/vis", s.intent_enc.visual);
    reg.transformer("enc/i/fuse", s.intent_enc.fusion);
    reg.gru("hist/text", s.history.text);
    reg.gru("hist/ac", s.history.acoustic);
    reg.gru("hist/vis", s.history.visual);
    reg.linear("hist/proj", s.history.proj);
    reg.mha("inter/e/bc", s.inter_e.binary);
    reg.mha("inter/e/ti", s.inter_e.triple);
    reg.mha("inter/i/bc", s.inter_i.binary);
    reg.mha("inter/i/ti", s.inter_i.triple);
    reg.linear("cls/e", s.cls_e);
    reg.linear("cls/i", s.cls_i);
    return s;
}

const Tensor& ModelState::at(const std::string& path) const {
    for (const auto& [p, t] : params) {
        if (p == path) return t;
    }
    throw ContractError("no parameter at path: " + path);
}

void ModelState::zero_grads() {
    for (auto& [p, t] : params) t.zero_grad();
}

void ModelState::load_values(const NamedTensorList& values) {
    std::map<std::string, const Tensor*> incoming;
    for (const auto& [p, t] : values) {
        if (!incoming.emplace(p, &t).second) {
            throw DataError("checkpoint: duplicate parameter path " + p);
        }
    }
    for (auto& [p, t] : params) {
        auto it = incoming.find(p);
        if (it == incoming.end()) throw DataError("checkpoint: missing parameter path " + p);
        if (it->second->shape() != t.shape()) {
            throw DataError("checkpoint: shape mismatch at " + p + ": expected " +
                            shape_str(t.shape()) + ", got " + shape_str(it->second->shape()));
        }
        t.data() = it->second->data();
        incoming.erase(it);
    }
    if (!incoming.empty()) {
        throw DataError("checkpoint: unknown parameter path " + incoming.begin()->first);
    }
}

void ModelState::load_prefix(const ModelState& src, const std::string& prefix) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].first.rfind(prefix, 0) != 0) continue;
        const Tensor& from = src.at(params[i].first);
        if (from.shape() != params[i].second.shape()) {
            throw ContractError("load_prefix: shape mismatch at " + params[i].first);
        }
        params[i].second.data() = from.data();
    }
}

// ---------------------------------------------------------------------------
// forward pieces

namespace {

Tensor zero_token(std::size_t hidden) { return Tensor::zeros({1, hidden}); }

Tensor require_feats(const std::optional<Tensor>& f, const char* modality,
                     const std::string& who) {
    if (!f.has_value()) {
        throw DataError("missing " + std::string(modality) + " features" +
                        (who.empty() ? "" : " for " + who));
    }
    return *f;
}

}  // namespace

Tensor encode_task_utterance(const ModelState& state, const ModelConfig& cfg,
                             const UtteranceFeatures& feats, Task task, Tensor* fusion_attn) {
    const TaskEncoderParams& enc = task == Task::emotion ? state.emotion_enc : state.intent_enc;
    const std::size_t h = cfg.hidden;

    // token order mirrors the fusion input: visual, acoustic, textual
    Tensor vis = cfg.modality_mask.visual
                     ? reshape(lstm_encode(enc.visual, require_feats(feats.visual, "visual", "")),
                               {1, h})
                     : zero_token(h);
    Tensor ac = cfg.modality_mask.acoustic
                    ? reshape(lstm_encode(enc.acoustic, require_feats(feats.acoustic, "acoustic", "")),
                              {1, h})
                    : zero_token(h);
    Tensor txt = cfg.modality_mask.textual
                     ? reshape(textcnn_encode(enc.text, require_feats(feats.textual, "textual", "")),
                               {1, h})
                     : zero_token(h);
    Tensor seq = concat({vis, ac, txt}, 0);  // [3 x h]
    return transformer_layer(enc.fusion, seq, fusion_attn);
}

Tensor encode_history(const ModelState& state, const ModelConfig& cfg,
                      const std::vector<const UtteranceFeatures*>& past) {
    const std::size_t h = cfg.hidden;
    if (past.empty()) return Tensor::zeros({h});

    auto run_modality = [&](Modality m, const GruParams& gru) -> Tensor {
        if (!cfg.modality_mask.enabled(m)) return Tensor::zeros({h});
        std::vector<Tensor> pooled;
        pooled.reserve(past.size());
        for (const UtteranceFeatures* uf : past) {
            const std::optional<Tensor>* f = nullptr;
            const char* name = "";
            switch (m) {
                case Modality::textual: f = &uf->textual; name = "textual"; break;
                case Modality::acoustic: f = &uf->acoustic; name = "acoustic"; break;
                case Modality::visual: f = &uf->visual; name = "visual"; break;
            }
            Tensor feats = require_feats(*f, name, "history utterance");
            // pool each utterance to one vector before the recurrence
            Tensor mean = reduce(Reduction::mean, feats, 0);
            pooled.push_back(reshape(mean, {1, feats.shape()[1]}));
        }
        Tensor seq = pooled.size() == 1 ? pooled[0] : concat(pooled, 0);
        return gru_encode(gru, seq);
    };

    Tensor hv = run_modality(Modality::visual, state.history.visual);
    Tensor ha = run_modality(Modality::acoustic, state.history.acoustic);
    Tensor ht = run_modality(Modality::textual, state.history.text);
    Tensor cat = concat({hv, ha, ht}, 0);  // [3h]
    return linear(state.history.proj, cat);
}

Tensor fuse_history(const Tensor& f_star, const Tensor& f_h, bool use_history) {
    if (!use_history) return f_star;
    return rowwise(Binary::add, f_star, f_h);
}

Tensor binary_correlation(const ModelState& state, const Tensor& f_gamma, const Tensor& f_beta,
                          Task branch, Tensor* attn) {
    const MhaParams& p =
        branch == Task::emotion ? state.inter_e.binary : state.inter_i.binary;
    return multi_head_attention(p, f_gamma, f_beta, f_beta, attn);
}

Tensor triple_interaction(const ModelState& state, const Tensor& f_gamma, const Tensor& f_gb,
                          Task branch, Tensor* attn) {
    const MhaParams& p =
        branch == Task::emotion ? state.inter_e.triple : state.inter_i.triple;
    return multi_head_attention(p, f_gamma, f_gb, f_gb, attn);
}

Tensor gate_regulate(const Tensor& f_gbg, const Tensor& f_gb, bool use_gate) {
    if (!use_gate) return f_gbg;
    return ew(Binary::mul, f_gbg, ew(Unary::sigmoid, f_gbg + f_gb));
}

Tensor classify(const ModelState& state, const Tensor& g_star, const Tensor& f, Task task,
                bool use_interaction) {
    Tensor g = use_interaction ? g_star + f : f;
    Tensor pooled = reduce(Reduction::mean, g, 0);  // [hidden]
    const LinearParams& cls = task == Task::emotion ? state.cls_e : state.cls_i;
    return linear(cls, pooled);
}

ForwardTrace forward(const ModelState& state, const ModelConfig& cfg, const Conversation& conv,
                     std::size_t index) {
    if (index >= conv.utterances.size()) {
        throw ContractError("forward: utterance index " + std::to_string(index) +
                            " out of range for conversation of " +
                            std::to_string(conv.utterances.size()));
    }
    const Utterance& utt = conv.utterances[index];
    const std::string who = "dia_" + std::to_string(conv.dia_no) + "_utt_" +
                            std::to_string(utt.record.utt_no);

    ForwardTrace tr;
    Tensor fuse_attn_e, fuse_attn_i;
    try {
        tr.f_star_e = encode_task_utterance(state, cfg, utt.features, Task::emotion, &fuse_attn_e);
        tr.f_star_i = encode_task_utterance(state, cfg, utt.features, Task::intent, &fuse_attn_i);
    } catch (const DataError& e) {
        throw DataError(std::string(e.what()) + " at " + who);
    }

    if (cfg.use_history) {
        std::vector<const UtteranceFeatures*> past;
        past.reserve(index);
        for (std::size_t i = 0; i < index; ++i) past.push_back(&conv.utterances[i].features);
        tr.f_h = encode_history(state, cfg, past);
    } else {
        tr.f_h = Tensor::zeros({cfg.hidden});
    }
    tr.f_e = fuse_history(tr.f_star_e, tr.f_h, cfg.use_history);
    tr.f_i = fuse_history(tr.f_star_i, tr.f_h, cfg.use_history);

    if (cfg.use_interaction) {
        Tensor a1, a2, a3, a4;
        tr.f_ei = binary_correlation(state, tr.f_e, tr.f_i, Task::emotion, &a1);
        tr.f_ie = binary_correlation(state, tr.f_i, tr.f_e, Task::intent, &a2);
        tr.f_eie = triple_interaction(state, tr.f_e, tr.f_ei, Task::emotion, &a3);
        tr.f_iei = triple_interaction(state, tr.f_i, tr.f_ie, Task::intent, &a4);
        tr.attn_rows = concat({fuse_attn_e, fuse_attn_i, a1, a2, a3, a4}, 0);
        tr.g_star_e = gate_regulate(tr.f_eie, tr.f_ei, cfg.use_gate);
        tr.g_star_i = gate_regulate(tr.f_iei, tr.f_ie, cfg.use_gate);
        tr.g_e = tr.g_star_e + tr.f_e;
        tr.g_i = tr.g_star_i + tr.f_i;
        tr.logits_e = classify(state, tr.g_star_e, tr.f_e, Task::emotion, true);
        tr.logits_i = classify(state, tr.g_star_i, tr.f_i, Task::intent, true);
    } else {
        tr.attn_rows = concat({fuse_attn_e, fuse_attn_i}, 0);
        tr.g_e = tr.f_e;
        tr.g_i = tr.f_i;
        tr.logits_e = classify(state, Tensor(), tr.f_e, Task::emotion, false);
        tr.logits_i = classify(state, Tensor(), tr.f_i, Task::intent, false);
    }

    for (const Tensor* t : {&tr.logits_e, &tr.logits_i}) {
        for (double v : t->data()) {
            if (!std::isfinite(v)) throw NumericError("non-finite logits at " + who);
        }
    }
    return tr;
}

}  // namespace eiu
