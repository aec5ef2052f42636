#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "eiu/model.hpp"

using namespace eiu;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.hidden = 8;
    cfg.heads = 2;
    cfg.n_emotions = 3;
    cfg.n_intents = 4;
    cfg.text_dim = 5;
    cfg.audio_dim = 4;
    cfg.visual_dim = 3;
    cfg.kernel_widths = {2};
    cfg.filters_per_width = 3;
    cfg.ff_dim = 16;
    return cfg;
}

UtteranceFeatures make_features(const ModelConfig& cfg, Rng& rng, std::size_t lt = 4,
                                std::size_t la = 3, std::size_t lv = 2) {
    UtteranceFeatures f;
    f.textual = Tensor::uniform({lt, cfg.text_dim}, rng, -1, 1);
    f.acoustic = Tensor::uniform({la, cfg.audio_dim}, rng, -1, 1);
    f.visual = Tensor::uniform({lv, cfg.visual_dim}, rng, -1, 1);
    return f;
}

Conversation make_conversation(const ModelConfig& cfg, Rng& rng, std::size_t n) {
    Conversation conv;
    conv.dia_no = 1;
    for (std::size_t i = 0; i < n; ++i) {
        Utterance u;
        u.record.dia_no = 1;
        u.record.utt_no = static_cast<std::int64_t>(i);
        u.record.emotion = i % cfg.n_emotions;
        u.record.intent = i % cfg.n_intents;
        u.features = make_features(cfg, rng);
        conv.utterances.push_back(std::move(u));
    }
    return conv;
}

}  // namespace

TEST_CASE("encode_task_utterance shapes and task disjointness") {
    ModelConfig cfg = small_config();
    ModelState state = init_model(cfg, 5);
    Rng rng(10);
    UtteranceFeatures f = make_features(cfg, rng);

    Tensor fe = encode_task_utterance(state, cfg, f, Task::emotion);
    Tensor fi = encode_task_utterance(state, cfg, f, Task::intent);
    CHECK(fe.shape() == Shape{3, cfg.hidden});
    CHECK(fi.shape() == Shape{3, cfg.hidden});
    CHECK(fe.data() != fi.data());  // disjoint parameters

    // full-size feature dims produce the documented token shape
    ModelConfig full;
    full.filters_per_width = 4;  // keep the test light
    ModelState fs = init_model(full, 1);
    Rng rng2(2);
    UtteranceFeatures ff;
    ff.textual = Tensor::uniform({6, 768}, rng2, -1, 1);
    ff.acoustic = Tensor::uniform({4, 512}, rng2, -1, 1);
    ff.visual = Tensor::uniform({2, 342}, rng2, -1, 1);
    CHECK(encode_task_utterance(fs, full, ff, Task::emotion).shape() == Shape{3, 128});
}

TEST_CASE("masked modalities are ignored bitwise") {
    ModelConfig cfg = small_config();
    cfg.modality_mask = {true, false, false};  // textual only
    ModelState state = init_model(cfg, 5);
    Rng rng(11);
    UtteranceFeatures f = make_features(cfg, rng);

    Tensor base = encode_task_utterance(state, cfg, f, Task::emotion);

    // replacing the masked modalities changes nothing
    UtteranceFeatures g = f;
    g.acoustic = Tensor::uniform({7, cfg.audio_dim}, rng, -9, 9);
    g.visual = Tensor::uniform({5, cfg.visual_dim}, rng, -9, 9);
    CHECK(encode_task_utterance(state, cfg, g, Task::emotion).data() == base.data());

    // absent masked modalities are fine
    UtteranceFeatures h;
    h.textual = f.textual;
    CHECK(encode_task_utterance(state, cfg, h, Task::emotion).data() == base.data());

    // missing an enabled modality is a data error naming it
    UtteranceFeatures bad;
    bad.acoustic = f.acoustic;
    CHECK_THROWS_WITH_AS(encode_task_utterance(state, cfg, bad, Task::emotion),
                         doctest::Contains("textual"), DataError);
}

TEST_CASE("encode_history") {
    ModelConfig cfg = small_config();
    ModelState state = init_model(cfg, 6);
    Rng rng(12);

    // defined base case: no history -> exact zero vector
    Tensor none = encode_history(state, cfg, {});
    CHECK(none.shape() == Shape{cfg.hidden});
    for (double v : none.data()) CHECK(v == 0.0);

    // singleton recurrence runs and is deterministic
    UtteranceFeatures one = make_features(cfg, rng);
    Tensor h1 = encode_history(state, cfg, {&one});
    CHECK(h1.shape() == Shape{cfg.hidden});
    CHECK(encode_history(state, cfg, {&one}).data() == h1.data());
}

TEST_CASE("fuse_history") {
    ModelConfig cfg = small_config();
    Rng rng(13);
    Tensor f_star = Tensor::uniform({3, cfg.hidden}, rng, -1, 1);
    Tensor zero = Tensor::zeros({cfg.hidden});
    Tensor v = Tensor::uniform({cfg.hidden}, rng, -1, 1);

    CHECK(fuse_history(f_star, zero, true).data() == f_star.data());
    CHECK(fuse_history(f_star, v, false).data() == f_star.data());

    Tensor broadcast = fuse_history(Tensor::zeros({3, cfg.hidden}), v, true);
    for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t j = 0; j < cfg.hidden; ++j) CHECK(broadcast(t, j) == v.at(j));
    }
}

TEST_CASE("binary correlation and triple interaction") {
    ModelConfig cfg = small_config();
    ModelState state = init_model(cfg, 7);
    Rng rng(14);
    Tensor f_gamma = Tensor::uniform({3, cfg.hidden}, rng, -1, 1);

    // identical key rows: uniform attention 1/3 per head
    Tensor row = Tensor::uniform({1, cfg.hidden}, rng, -1, 1);
    Tensor same = concat({row, row, row}, 0);
    Tensor attn;
    Tensor out = binary_correlation(state, f_gamma, same, Task::emotion, &attn);
    CHECK(out.shape() == Shape{3, cfg.hidden});
    for (double w : attn.data()) CHECK(std::fabs(w - 1.0 / 3.0) < 1e-12);

    Tensor ti = triple_interaction(state, f_gamma, same, Task::emotion, &attn);
    CHECK(ti.shape() == Shape{3, cfg.hidden});
    for (double w : attn.data()) CHECK(std::fabs(w - 1.0 / 3.0) < 1e-12);

    // end-to-end gradient through both attention passes
    Tensor f_beta = Tensor::uniform({3, cfg.hidden}, rng, -1, 1, true);
    Tensor probe = Tensor::uniform({3, cfg.hidden}, rng, -1, 1);
    auto f = [&] {
        Tensor bc = binary_correlation(state, f_gamma, f_beta, Task::emotion);
        Tensor tt = triple_interaction(state, f_gamma, bc, Task::emotion);
        return reduce(Reduction::sum, reshape(ew(Binary::mul, tt, probe), {3 * cfg.hidden}), 0);
    };
    std::vector<std::pair<std::string, Tensor>> params = {
        {"f_beta", f_beta},
        {"bc_q", state.inter_e.binary.q.W},
        {"bc_k", state.inter_e.binary.k.W},
        {"ti_v", state.inter_e.triple.v.W},
        {"ti_o", state.inter_e.triple.o.W}};
    CHECK(grad_check(f, params).max_rel_err < 1e-4);
}

TEST_CASE("gate regulator") {
    Rng rng(15);
    Tensor zeros = Tensor::zeros({3, 4});
    Tensor any = Tensor::uniform({3, 4}, rng, -5, 5);

    // multiplicative annihilator
    Tensor g0 = gate_regulate(zeros, any, true);
    for (double v : g0.data()) CHECK(v == 0.0);

    // scalar probe 1.0 * sigmoid(1.0)
    Tensor probe = gate_regulate(Tensor::full({1, 1}, 1.0), Tensor::zeros({1, 1}), true);
    CHECK(probe.at(0) == doctest::Approx(0.7310585786300049).epsilon(1e-9));

    // |output| <= |input| elementwise, and the ablation switch is identity
    Tensor a = Tensor::uniform({3, 4}, rng, -3, 3);
    Tensor b = Tensor::uniform({3, 4}, rng, -3, 3);
    Tensor g = gate_regulate(a, b, true);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::fabs(g.at(i)) <= std::fabs(a.at(i)));
    CHECK(gate_regulate(a, b, false).data() == a.data());
}

TEST_CASE("classify") {
    ModelConfig cfg = small_config();
    ModelState state = init_model(cfg, 8);
    Rng rng(16);
    Tensor f = Tensor::uniform({3, cfg.hidden}, rng, -1, 1);

    Tensor le = classify(state, Tensor::zeros({3, cfg.hidden}), f, Task::emotion, true);
    Tensor li = classify(state, Tensor(), f, Task::intent, false);
    CHECK(le.shape() == Shape{cfg.n_emotions});
    CHECK(li.shape() == Shape{cfg.n_intents});

    // zero interaction features reduce to the no-interaction classifier
    Tensor le2 = classify(state, Tensor(), f, Task::emotion, false);
    CHECK(le.data() == le2.data());

    // the default task heads have the documented category counts
    ModelConfig def;
    CHECK(def.n_emotions == 7);
    CHECK(def.n_intents == 9);
}

TEST_CASE("forward produces finite logits of the right shapes") {
    ModelConfig cfg = small_config();
    ModelState state = init_model(cfg, 9);
    Rng rng(17);
    Conversation conv = make_conversation(cfg, rng, 4);

    for (std::size_t n = 0; n < 4; ++n) {
        ForwardTrace tr = forward(state, cfg, conv, n);
        CHECK(tr.logits_e.shape() == Shape{cfg.n_emotions});
        CHECK(tr.logits_i.shape() == Shape{cfg.n_intents});
        CHECK(tr.f_star_e.shape() == Shape{3, cfg.hidden});
        CHECK(tr.f_h.shape() == Shape{cfg.hidden});
        for (double v : tr.g_star_e.data()) CHECK(std::isfinite(v));
        // 2 fusion + 4 interaction attention passes, heads*3 rows each
        CHECK(tr.attn_rows.shape() == Shape{6 * cfg.heads * 3, 3});
    }
    CHECK_THROWS_AS(forward(state, cfg, conv, 4), ContractError);
}

TEST_CASE("interaction cut: emotion logits independent of intent branch") {
    ModelConfig cfg = small_config();
    cfg.use_interaction = false;
    ModelState state = init_model(cfg, 21);
    Rng rng(22);
    Conversation conv = make_conversation(cfg, rng, 3);

    const std::vector<double> base_e = forward(state, cfg, conv, 2).logits_e.data();

    for (int trial = 0; trial < 20; ++trial) {
        // perturb every intent-branch parameter
        for (auto& [path, t] : state.params) {
            const bool intent_branch = path.rfind("enc/i/", 0) == 0 ||
                                       path.rfind("inter/", 0) == 0 ||
                                       path.rfind("cls/i", 0) == 0;
            if (intent_branch) {
                for (auto& v : t.data()) v += rng.uniform(-1, 1);
            }
        }
        ForwardTrace tr = forward(state, cfg, conv, 2);
        CHECK(tr.logits_e.data() == base_e);
    }
}

TEST_CASE("history cut: logits independent of history features") {
    ModelConfig cfg = small_config();
    cfg.use_history = false;
    ModelState state = init_model(cfg, 23);
    Rng rng(24);
    Conversation conv = make_conversation(cfg, rng, 4);

    ForwardTrace base = forward(state, cfg, conv, 3);
    for (int trial = 0; trial < 20; ++trial) {
        Conversation noisy = conv;
        for (std::size_t i = 0; i < 3; ++i) {
            noisy.utterances[i].features = make_features(cfg, rng);
        }
        ForwardTrace tr = forward(state, cfg, noisy, 3);
        CHECK(tr.logits_e.data() == base.logits_e.data());
        CHECK(tr.logits_i.data() == base.logits_i.data());
    }
}

TEST_CASE("causality: future utterances never influence logits") {
    ModelConfig cfg = small_config();
    ModelState state = init_model(cfg, 25);
    Rng rng(26);
    Conversation conv = make_conversation(cfg, rng, 5);

    ForwardTrace base = forward(state, cfg, conv, 2);
    for (int trial = 0; trial < 10; ++trial) {
        Conversation noisy = conv;
        for (std::size_t i = 3; i < 5; ++i) {
            noisy.utterances[i].features = make_features(cfg, rng);
        }
        ForwardTrace tr = forward(state, cfg, noisy, 2);
        CHECK(tr.logits_e.data() == base.logits_e.data());
        CHECK(tr.logits_i.data() == base.logits_i.data());
    }
}

TEST_CASE("gate bound holds on random forwards") {
    ModelConfig cfg = small_config();
    ModelState state = init_model(cfg, 27);
    Rng rng(28);
    for (int trial = 0; trial < 10; ++trial) {
        Conversation conv = make_conversation(cfg, rng, 2);
        ForwardTrace tr = forward(state, cfg, conv, 1);
        for (std::size_t i = 0; i < tr.g_star_e.size(); ++i) {
            CHECK(std::fabs(tr.g_star_e.at(i)) <= std::fabs(tr.f_eie.at(i)));
            CHECK(std::fabs(tr.g_star_i.at(i)) <= std::fabs(tr.f_iei.at(i)));
        }
    }
}

TEST_CASE("forward determinism is bitwise") {
    ModelConfig cfg = small_config();
    Rng rng(29);
    Conversation conv = make_conversation(cfg, rng, 3);

    ModelState s1 = init_model(cfg, 31);
    ModelState s2 = init_model(cfg, 31);
    ForwardTrace t1 = forward(s1, cfg, conv, 2);
    ForwardTrace t2 = forward(s2, cfg, conv, 2);
    CHECK(t1.logits_e.data() == t2.logits_e.data());
    CHECK(t1.logits_i.data() == t2.logits_i.data());
}

TEST_CASE("full model gradient vs finite differences") {
    ModelConfig cfg = small_config();
    ModelState state = init_model(cfg, 33);
    Rng rng(34);
    Conversation conv = make_conversation(cfg, rng, 3);
    Tensor probe_e = Tensor::uniform({cfg.n_emotions}, rng, -1, 1);
    Tensor probe_i = Tensor::uniform({cfg.n_intents}, rng, -1, 1);

    auto f = [&] {
        ForwardTrace tr = forward(state, cfg, conv, 2);
        Tensor le = reduce(Reduction::sum, ew(Binary::mul, tr.logits_e, probe_e), 0);
        Tensor li = reduce(Reduction::sum, ew(Binary::mul, tr.logits_i, probe_i), 0);
        return le + li;
    };
    auto gc = grad_check(f, state.params);
    INFO("worst: ", gc.worst_param, "[", gc.worst_index, "]");
    CHECK(gc.max_rel_err < 1e-4);
}

TEST_CASE("model state paths and checkpoint round-trip") {
    ModelConfig cfg = small_config();
    ModelState a = init_model(cfg, 41);

    // every path unique
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        for (std::size_t j = i + 1; j < a.params.size(); ++j) {
            CHECK(a.params[i].first != a.params[j].first);
        }
    }

    const std::string bytes = encode_checkpoint(a.params);
    ModelState b = init_model(cfg, 42);
    b.load_values(decode_checkpoint(bytes));
    CHECK(encode_checkpoint(b.params) == bytes);

    Rng rng(43);
    Conversation conv = make_conversation(cfg, rng, 2);
    CHECK(forward(a, cfg, conv, 1).logits_e.data() == forward(b, cfg, conv, 1).logits_e.data());

    // encoder-prefix transfer copies exactly the encoder parameters
    ModelState c = init_model(cfg, 44);
    c.load_prefix(a, "enc/");
    CHECK(c.at("enc/e/ac/W").data() == a.at("enc/e/ac/W").data());
    CHECK(c.at("cls/e/W").data() != a.at("cls/e/W").data());
}

TEST_CASE("config json sidecar round-trip") {
    ModelConfig cfg = small_config();
    cfg.modality_mask = {true, false, true};
    cfg.use_gate = false;
    ModelConfig back = ModelConfig::from_json(cfg.to_json());
    CHECK(back.hidden == cfg.hidden);
    CHECK(back.modality_mask.tag() == "tv");
    CHECK(back.use_gate == false);
    CHECK(back.kernel_widths == cfg.kernel_widths);

    ModelConfig bad;
    bad.modality_mask = {false, false, false};
    CHECK_THROWS_AS(bad.validate(), ContractError);
}
