#include "eiu/gradaudit.hpp"

namespace eiu {

namespace {

ModelConfig audit_config() {
    ModelConfig cfg;
    cfg.hidden = 8;
    cfg.heads = 2;
    cfg.n_emotions = 3;
    cfg.n_intents = 4;
    cfg.text_dim = 5;
    cfg.audio_dim = 4;
    cfg.visual_dim = 3;
    cfg.kernel_widths = {2, 3};
    cfg.filters_per_width = 3;
    cfg.ff_dim = 16;
    return cfg;
}

UtteranceFeatures audit_features(const ModelConfig& cfg, Rng& rng) {
    UtteranceFeatures f;
    f.textual = Tensor::uniform({4, cfg.text_dim}, rng, -1, 1);
    f.acoustic = Tensor::uniform({3, cfg.audio_dim}, rng, -1, 1);
    f.visual = Tensor::uniform({2, cfg.visual_dim}, rng, -1, 1);
    return f;
}

void add(AuditReport& rep, const std::string& name, double err) {
    rep.entries.push_back({name, err});
    if (err > rep.worst) {
        rep.worst = err;
        rep.worst_name = name;
    }
}

void audit_ops(AuditReport& rep, std::uint64_t seed) {
    {
        Rng r(seed);
        Tensor a = Tensor::uniform({3, 4}, r, -1, 1, true);
        Tensor b = Tensor::uniform({4, 2}, r, -1, 1, true);
        auto f = [&] {
            return reduce(Reduction::sum, reshape(ew(Unary::square, matmul(a, b)), {6}), 0);
        };
        add(rep, "op/matmul", grad_check(f, {{"a", a}, {"b", b}}).max_rel_err);
    }
    const char* bin_names[] = {"add", "sub", "mul"};
    for (Binary k : {Binary::add, Binary::sub, Binary::mul}) {
        Rng r(seed);
        Tensor a = Tensor::uniform({5}, r, -1, 1, true);
        Tensor b = Tensor::uniform({5}, r, -1, 1, true);
        Tensor s = Tensor::uniform({}, r, -1, 1, true);
        auto f = [&] {
            return reduce(Reduction::sum, ew(Unary::square, ew(k, ew(k, a, b), s)), 0);
        };
        add(rep, std::string("op/ew_") + bin_names[static_cast<int>(k)],
            grad_check(f, {{"a", a}, {"b", b}, {"s", s}}).max_rel_err);
    }
    const char* un_names[] = {"sigmoid", "tanh", "relu", "exp", "log", "neg", "square", "sqrt",
                              "recip"};
    for (Unary k : {Unary::sigmoid, Unary::tanh, Unary::relu, Unary::exp, Unary::log, Unary::neg,
                    Unary::square, Unary::sqrt, Unary::recip}) {
        Rng r(seed);
        Tensor a = Tensor::uniform({6}, r, 0.3, 2.0, true);
        auto f = [&] { return reduce(Reduction::sum, ew(k, a), 0); };
        add(rep, std::string("op/") + un_names[static_cast<int>(k)],
            grad_check(f, {{"a", a}}).max_rel_err);
    }
    {
        Rng r(seed);
        Tensor a = Tensor::uniform({2, 3}, r, -1, 1, true);
        Tensor b = Tensor::uniform({2, 2}, r, -1, 1, true);
        auto f = [&] {
            Tensor c = concat({a, b}, 1);
            Tensor s = slice(c, 1, 1, 3);
            return reduce(Reduction::sum, reshape(ew(Unary::square, transpose(s)), {6}), 0);
        };
        add(rep, "op/concat_slice_transpose", grad_check(f, {{"a", a}, {"b", b}}).max_rel_err);
    }
    const char* red_names[] = {"sum", "mean", "max"};
    for (Reduction k : {Reduction::sum, Reduction::mean, Reduction::max}) {
        Rng r(seed);
        Tensor a = Tensor::uniform({3, 4}, r, -1, 1, true);
        auto f = [&] { return reduce(Reduction::sum, ew(Unary::square, reduce(k, a, 1)), 0); };
        add(rep, std::string("op/reduce_") + red_names[static_cast<int>(k)],
            grad_check(f, {{"a", a}}).max_rel_err);
    }
    {
        Rng r(seed);
        Tensor a = Tensor::uniform({2, 5}, r, -2, 2, true);
        Tensor w = Tensor::uniform({2, 5}, r, -1, 1);
        auto f = [&] {
            return reduce(Reduction::sum, reshape(ew(Binary::mul, softmax(a, 1), w), {10}), 0);
        };
        add(rep, "op/softmax", grad_check(f, {{"a", a}}).max_rel_err);
    }
    for (Binary k : {Binary::add, Binary::sub, Binary::mul}) {
        Rng r(seed);
        Tensor m = Tensor::uniform({3, 4}, r, -1, 1, true);
        Tensor rv = Tensor::uniform({4}, r, -1, 1, true);
        Tensor cv = Tensor::uniform({3}, r, -1, 1, true);
        auto f = [&] {
            Tensor o = colwise(k, rowwise(k, m, rv), cv);
            return reduce(Reduction::sum, reshape(ew(Unary::square, o), {12}), 0);
        };
        add(rep, std::string("op/broadcast_") + bin_names[static_cast<int>(k)],
            grad_check(f, {{"m", m}, {"rv", rv}, {"cv", cv}}).max_rel_err);
    }
    {
        Rng r(seed);
        Tensor x = Tensor::uniform({5, 3}, r, -1, 1, true);
        auto f = [&] {
            return reduce(Reduction::sum, reshape(ew(Unary::square, im2row(x, 2)), {24}), 0);
        };
        add(rep, "op/im2row", grad_check(f, {{"x", x}}).max_rel_err);
    }
    {
        Rng r(seed);
        Tensor x = Tensor::uniform({4}, r, 0.2, 1.5, true);
        auto f = [&] { return reduce(Reduction::sum, powc(x, 2.7), 0); };
        add(rep, "op/powc", grad_check(f, {{"x", x}}).max_rel_err);
    }
}

void audit_blocks(AuditReport& rep, std::uint64_t seed) {
    {
        Rng r(seed);
        LinearParams p = init_linear(3, 2, r);
        Tensor x = Tensor::uniform({2, 3}, r, -1, 1);
        auto f = [&] {
            return reduce(Reduction::sum, reshape(ew(Unary::square, linear(p, x)), {4}), 0);
        };
        add(rep, "block/linear", grad_check(f, {{"W", p.W}, {"b", p.b}}).max_rel_err);
    }
    {
        Rng r(seed);
        LstmParams p = init_lstm(3, 4, r);
        Tensor x = Tensor::uniform({3, 3}, r, -1, 1);
        auto f = [&] { return reduce(Reduction::sum, ew(Unary::square, lstm_encode(p, x)), 0); };
        add(rep, "block/lstm", grad_check(f, {{"W", p.W}, {"U", p.U}, {"b", p.b}}).max_rel_err);
    }
    {
        Rng r(seed);
        GruParams p = init_gru(3, 4, r);
        Tensor x = Tensor::uniform({3, 3}, r, -1, 1);
        auto f = [&] { return reduce(Reduction::sum, ew(Unary::square, gru_encode(p, x)), 0); };
        add(rep, "block/gru", grad_check(f, {{"W", p.W}, {"U", p.U}, {"b", p.b}}).max_rel_err);
    }
    {
        Rng r(seed);
        TextCnnParams p = init_textcnn(3, {2, 3}, 2, 4, r);
        Tensor x = Tensor::uniform({5, 3}, r, -1, 1);
        auto f = [&] {
            return reduce(Reduction::sum, ew(Unary::square, textcnn_encode(p, x)), 0);
        };
        std::vector<std::pair<std::string, Tensor>> params = {
            {"K0", p.K[0]}, {"K1", p.K[1]}, {"b0", p.Kb[0]}, {"b1", p.Kb[1]},
            {"pW", p.proj.W}, {"pb", p.proj.b}};
        add(rep, "block/textcnn", grad_check(f, params).max_rel_err);
    }
    {
        Rng r(seed);
        MhaParams p = init_mha(4, 2, r);
        Tensor q = Tensor::uniform({2, 4}, r, -1, 1);
        Tensor kv = Tensor::uniform({3, 4}, r, -1, 1);
        auto f = [&] {
            Tensor o = multi_head_attention(p, q, kv, kv);
            return reduce(Reduction::sum, reshape(ew(Unary::square, o), {8}), 0);
        };
        std::vector<std::pair<std::string, Tensor>> params = {
            {"qW", p.q.W}, {"qb", p.q.b}, {"kW", p.k.W}, {"kb", p.k.b},
            {"vW", p.v.W}, {"vb", p.v.b}, {"oW", p.o.W}, {"ob", p.o.b}};
        add(rep, "block/mha", grad_check(f, params).max_rel_err);
    }
    {
        Rng r(seed);
        TransformerParams p = init_transformer(4, 2, 8, r);
        Tensor x = Tensor::uniform({3, 4}, r, -1, 1);
        Tensor probe = Tensor::uniform({3, 4}, r, -1, 1);
        auto f = [&] {
            Tensor o = transformer_layer(p, x);
            return reduce(Reduction::sum, reshape(ew(Binary::mul, o, probe), {12}), 0);
        };
        std::vector<std::pair<std::string, Tensor>> params = {
            {"qW", p.attn.q.W}, {"kW", p.attn.k.W}, {"vW", p.attn.v.W}, {"oW", p.attn.o.W},
            {"ln1g", p.ln1_g},  {"ln1b", p.ln1_b},  {"ff1W", p.ff1.W}, {"ff2W", p.ff2.W},
            {"ln2g", p.ln2_g},  {"ln2b", p.ln2_b}};
        add(rep, "block/transformer_layer", grad_check(f, params).max_rel_err);
    }
}

void audit_full_model(AuditReport& rep, std::uint64_t seed) {
    ModelConfig cfg = audit_config();
    ModelState state = init_model(cfg, seed);
    Rng rng(seed + 1);

    Conversation conv;
    conv.dia_no = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        Utterance u;
        u.record.dia_no = 0;
        u.record.utt_no = static_cast<std::int64_t>(i);
        u.record.emotion = i % cfg.n_emotions;
        u.record.intent = i % cfg.n_intents;
        u.features = audit_features(cfg, rng);
        conv.utterances.push_back(std::move(u));
    }

    const std::size_t label_e = conv.utterances[2].record.emotion;
    const std::size_t label_i = conv.utterances[2].record.intent;
    auto f = [&] {
        ForwardTrace tr = forward(state, cfg, conv, 2);
        return focal_loss(tr.logits_e, label_e, 2.0) + focal_loss(tr.logits_i, label_i, 2.0);
    };
    // the wide primary step keeps cancellation noise below threshold for the
    // deep composition; refinement handles kink crossings
    add(rep, "model/forward_focal", grad_check(f, state.params, 1e-3, true).max_rel_err);
}

}  // namespace

AuditReport gradient_audit(std::uint64_t seed, std::size_t points) {
    AuditReport rep;
    for (std::size_t p = 0; p < points; ++p) {
        const std::uint64_t s = seed + 1000 * p;
        audit_ops(rep, s);
        audit_blocks(rep, s);
        audit_full_model(rep, s);
    }
    return rep;
}

}  // namespace eiu
