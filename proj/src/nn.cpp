#include "eiu/nn.hpp"

#include <cmath>

namespace eiu {

namespace {

Tensor uniform_fan(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::uniform(std::move(shape), rng, -bound, bound, true);
}

Tensor as_matrix(const Tensor& x, std::size_t expect_cols, const char* who) {
    if (x.rank() == 1) {
        if (x.shape()[0] != expect_cols) {
            throw ShapeError(std::string(who) + ": expected last dimension " +
                             std::to_string(expect_cols) + ", got " + shape_str(x.shape()));
        }
        return reshape(x, {1, expect_cols});
    }
    if (x.rank() != 2 || x.shape()[1] != expect_cols) {
        throw ShapeError(std::string(who) + ": expected last dimension " +
                         std::to_string(expect_cols) + ", got " + shape_str(x.shape()));
    }
    return x;
}

}  // namespace

LinearParams init_linear(std::size_t in, std::size_t out, Rng& rng) {
    LinearParams p;
    p.W = uniform_fan({in, out}, in, rng);
    p.b = Tensor::zeros({out}, true);
    return p;
}

LstmParams init_lstm(std::size_t in, std::size_t hidden, Rng& rng) {
    LstmParams p;
    p.W = uniform_fan({in, 4 * hidden}, in, rng);
    p.U = uniform_fan({hidden, 4 * hidden}, hidden, rng);
    p.b = Tensor::zeros({4 * hidden}, true);
    p.hidden = hidden;
    return p;
}

GruParams init_gru(std::size_t in, std::size_t hidden, Rng& rng) {
    GruParams p;
    p.W = uniform_fan({in, 3 * hidden}, in, rng);
    p.U = uniform_fan({hidden, 3 * hidden}, hidden, rng);
    p.b = Tensor::zeros({3 * hidden}, true);
    p.hidden = hidden;
    return p;
}

TextCnnParams init_textcnn(std::size_t emb, const std::vector<std::size_t>& widths,
                           std::size_t filters, std::size_t hidden, Rng& rng) {
    if (widths.empty()) throw ContractError("textcnn: kernel_widths must be non-empty");
    for (auto w : widths) {
        if (w == 0) throw ContractError("textcnn: kernel widths must be >= 1");
    }
    TextCnnParams p;
    p.widths = widths;
    p.filters = filters;
    for (auto w : widths) {
        p.K.push_back(uniform_fan({w * emb, filters}, w * emb, rng));
        p.Kb.push_back(Tensor::zeros({filters}, true));
    }
    p.proj = init_linear(widths.size() * filters, hidden, rng);
    return p;
}

MhaParams init_mha(std::size_t dim, std::size_t heads, Rng& rng) {
    if (heads == 0 || dim % heads != 0) {
        throw ContractError("mha: model dim " + std::to_string(dim) +
                            " not divisible by heads " + std::to_string(heads));
    }
    MhaParams p;
    p.q = init_linear(dim, dim, rng);
    p.k = init_linear(dim, dim, rng);
    p.v = init_linear(dim, dim, rng);
    p.o = init_linear(dim, dim, rng);
    p.heads = heads;
    return p;
}

TransformerParams init_transformer(std::size_t dim, std::size_t heads, std::size_t ff_dim,
                                   Rng& rng) {
    TransformerParams p;
    p.attn = init_mha(dim, heads, rng);
    p.ln1_g = Tensor::full({dim}, 1.0, true);
    p.ln1_b = Tensor::zeros({dim}, true);
    p.ff1 = init_linear(dim, ff_dim, rng);
    p.ff2 = init_linear(ff_dim, dim, rng);
    p.ln2_g = Tensor::full({dim}, 1.0, true);
    p.ln2_b = Tensor::zeros({dim}, true);
    p.heads = heads;
    return p;
}

LayerParams init_params(const LayerSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    switch (spec.kind) {
        case LayerKind::linear:
            return init_linear(spec.input_dim, spec.output_dim, rng);
        case LayerKind::lstm:
            return init_lstm(spec.input_dim, spec.output_dim, rng);
        case LayerKind::gru:
            return init_gru(spec.input_dim, spec.output_dim, rng);
        case LayerKind::textcnn:
            return init_textcnn(spec.input_dim, spec.kernel_widths, spec.filters_per_width,
                                spec.output_dim, rng);
        case LayerKind::mha:
            return init_mha(spec.output_dim, spec.heads, rng);
        case LayerKind::transformer_layer:
            return init_transformer(spec.output_dim, spec.heads,
                                    spec.ff_dim ? spec.ff_dim : 2 * spec.output_dim, rng);
    }
    throw ContractError("init_params: unknown layer kind");
}

Tensor linear(const LinearParams& p, const Tensor& x) {
    const std::size_t in = p.W.shape()[0];
    const bool was_vector = x.rank() == 1;
    Tensor m = as_matrix(x, in, "linear");
    Tensor out = rowwise(Binary::add, matmul(m, p.W), p.b);
    if (was_vector) return reshape(out, {p.W.shape()[1]});
    return out;
}

Tensor lstm_encode(const LstmParams& p, const Tensor& seq, std::optional<std::size_t> length) {
    const std::size_t in = p.W.shape()[0];
    const std::size_t h = p.hidden;
    Tensor m = as_matrix(seq, in, "lstm_encode");
    const std::size_t L = length.value_or(m.shape()[0]);
    if (L == 0 || L > m.shape()[0]) {
        throw ContractError("lstm_encode: sequence length " + std::to_string(L) +
                            " invalid for input of " + std::to_string(m.shape()[0]) + " rows");
    }

    Tensor hprev = Tensor::zeros({1, h});
    Tensor cprev = Tensor::zeros({1, h});
    std::vector<Tensor> states;
    states.reserve(L);
    for (std::size_t t = 0; t < L; ++t) {
        Tensor xt = slice(m, 0, t, 1);                          // [1 x in]
        Tensor a = matmul(xt, p.W) + matmul(hprev, p.U);        // [1 x 4h]
        a = rowwise(Binary::add, a, p.b);
        Tensor ig = ew(Unary::sigmoid, slice(a, 1, 0, h));
        Tensor fg = ew(Unary::sigmoid, slice(a, 1, h, h));
        Tensor gg = ew(Unary::tanh, slice(a, 1, 2 * h, h));
        Tensor og = ew(Unary::sigmoid, slice(a, 1, 3 * h, h));
        cprev = fg * cprev + ig * gg;
        hprev = og * ew(Unary::tanh, cprev);
        states.push_back(hprev);
    }
    Tensor hs = states.size() == 1 ? states[0] : concat(states, 0);  // [L x h]
    return reshape(reduce(Reduction::max, hs, 0), {h});
}

Tensor gru_encode(const GruParams& p, const Tensor& seq, std::optional<std::size_t> length) {
    const std::size_t in = p.W.shape()[0];
    const std::size_t h = p.hidden;
    Tensor m = as_matrix(seq, in, "gru_encode");
    const std::size_t L = length.value_or(m.shape()[0]);
    if (L == 0 || L > m.shape()[0]) {
        throw ContractError("gru_encode: sequence length " + std::to_string(L) +
                            " invalid for input of " + std::to_string(m.shape()[0]) + " rows");
    }

    Tensor one = Tensor::scalar(1.0);
    Tensor hprev = Tensor::zeros({1, h});
    for (std::size_t t = 0; t < L; ++t) {
        Tensor xt = slice(m, 0, t, 1);
        Tensor wx = rowwise(Binary::add, matmul(xt, p.W), p.b);  // [1 x 3h]
        Tensor uh = matmul(hprev, p.U);                          // [1 x 3h]
        Tensor zg = ew(Unary::sigmoid, slice(wx, 1, 0, h) + slice(uh, 1, 0, h));
        Tensor rg = ew(Unary::sigmoid, slice(wx, 1, h, h) + slice(uh, 1, h, h));
        Tensor ng = ew(Unary::tanh, slice(wx, 1, 2 * h, h) + rg * slice(uh, 1, 2 * h, h));
        Tensor keep = ew(Binary::sub, Tensor::full({1, h}, 1.0), zg);
        hprev = keep * ng + zg * hprev;
    }
    return reshape(hprev, {h});
}

Tensor textcnn_encode(const TextCnnParams& p, const Tensor& tokens) {
    const std::size_t emb = p.K[0].shape()[0] / p.widths[0];
    Tensor m = as_matrix(tokens, emb, "textcnn_encode");

    std::size_t max_w = 0;
    for (auto w : p.widths) max_w = std::max(max_w, w);
    if (m.shape()[0] < max_w) {
        // zero-pad short inputs to the widest kernel
        Tensor pad = Tensor::zeros({max_w - m.shape()[0], emb});
        m = concat({m, pad}, 0);
    }

    std::vector<Tensor> pooled;
    for (std::size_t wi = 0; wi < p.widths.size(); ++wi) {
        Tensor win = im2row(m, p.widths[wi]);                     // [L-w+1 x w*emb]
        Tensor conv = rowwise(Binary::add, matmul(win, p.K[wi]), p.Kb[wi]);
        Tensor act = ew(Unary::relu, conv);
        pooled.push_back(reduce(Reduction::max, act, 0));         // [filters]
    }
    Tensor cat = pooled.size() == 1 ? pooled[0] : concat(pooled, 0);
    return linear(p.proj, cat);
}

Tensor multi_head_attention(const MhaParams& p, const Tensor& q_in, const Tensor& k_in,
                            const Tensor& v_in, Tensor* attn_out) {
    const std::size_t d = p.q.W.shape()[0];
    Tensor q = linear(p.q, as_matrix(q_in, d, "mha"));
    Tensor k = linear(p.k, as_matrix(k_in, d, "mha"));
    Tensor v = linear(p.v, as_matrix(v_in, d, "mha"));
    const std::size_t dk = d / p.heads;
    const Tensor scale = Tensor::scalar(1.0 / std::sqrt(static_cast<double>(dk)));

    std::vector<Tensor> head_outs;
    std::vector<Tensor> head_attns;
    for (std::size_t hidx = 0; hidx < p.heads; ++hidx) {
        Tensor qh = slice(q, 1, hidx * dk, dk);
        Tensor kh = slice(k, 1, hidx * dk, dk);
        Tensor vh = slice(v, 1, hidx * dk, dk);
        Tensor scores = ew(Binary::mul, matmul(qh, transpose(kh)), scale);  // [Lq x Lk]
        Tensor attn = softmax(scores, 1);
        if (attn_out) head_attns.push_back(attn);
        head_outs.push_back(matmul(attn, vh));  // [Lq x dk]
    }
    if (attn_out) {
        *attn_out = head_attns.size() == 1 ? head_attns[0] : concat(head_attns, 0);
    }
    Tensor merged = head_outs.size() == 1 ? head_outs[0] : concat(head_outs, 1);
    return linear(p.o, merged);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    constexpr double kEps = 1e-5;
    Tensor mu = reduce(Reduction::mean, x, 1);                        // [L]
    Tensor centered = colwise(Binary::sub, x, mu);
    Tensor var = reduce(Reduction::mean, ew(Unary::square, centered), 1);
    Tensor rstd = ew(Unary::recip, ew(Unary::sqrt, ew(Binary::add, var, Tensor::scalar(kEps))));
    Tensor normed = colwise(Binary::mul, centered, rstd);
    return rowwise(Binary::add, rowwise(Binary::mul, normed, gamma), beta);
}

Tensor transformer_layer(const TransformerParams& p, const Tensor& seq, Tensor* attn_out) {
    const std::size_t d = p.ln1_g.shape()[0];
    Tensor x = as_matrix(seq, d, "transformer_layer");
    Tensor attn = multi_head_attention(p.attn, x, x, x, attn_out);
    Tensor y1 = layer_norm(x + attn, p.ln1_g, p.ln1_b);
    Tensor ff = linear(p.ff2, ew(Unary::relu, linear(p.ff1, y1)));
    return layer_norm(y1 + ff, p.ln2_g, p.ln2_b);
}

}  // namespace eiu
