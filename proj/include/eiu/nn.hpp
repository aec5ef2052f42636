#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "eiu/tensor.hpp"

namespace eiu {

// Building blocks used by the recognition network: linear projections, LSTM
// and GRU recurrences, a TextCNN sentence encoder, multi-head attention and a
// post-norm transformer encoder layer. Parameters are plain tensors with
// requires_grad set; initialization is uniform +-1/sqrt(fan_in), biases zero.

enum class LayerKind { linear, lstm, gru, textcnn, mha, transformer_layer };

struct LayerSpec {
    LayerKind kind;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::size_t heads = 0;                    // mha / transformer_layer
    std::vector<std::size_t> kernel_widths;   // textcnn
    std::size_t filters_per_width = 0;        // textcnn
    std::size_t ff_dim = 0;                   // transformer_layer; 0 -> 2*output_dim
};

struct LinearParams {
    Tensor W;  // [in x out]
    Tensor b;  // [out]
};

struct LstmParams {
    // fused gates, order i|f|g|o
    Tensor W;  // [in x 4h]
    Tensor U;  // [h x 4h]
    Tensor b;  // [4h]
    std::size_t hidden = 0;
};

struct GruParams {
    // fused gates, order z|r|n
    Tensor W;  // [in x 3h]
    Tensor U;  // [h x 3h]
    Tensor b;  // [3h]
    std::size_t hidden = 0;
};

struct TextCnnParams {
    std::vector<std::size_t> widths;
    std::size_t filters = 0;
    std::vector<Tensor> K;  // per width: [w*d_emb x filters]
    std::vector<Tensor> Kb; // per width: [filters]
    LinearParams proj;      // [widths*filters x hidden]
};

struct MhaParams {
    LinearParams q, k, v, o;  // all [d x d]
    std::size_t heads = 0;
};

struct TransformerParams {
    MhaParams attn;
    Tensor ln1_g, ln1_b;  // [d]
    LinearParams ff1;     // [d x ff]
    LinearParams ff2;     // [ff x d]
    Tensor ln2_g, ln2_b;
    std::size_t heads = 0;
};

using LayerParams = std::variant<LinearParams, LstmParams, GruParams, TextCnnParams,
                                 MhaParams, TransformerParams>;

LayerParams init_params(const LayerSpec& spec, std::uint64_t seed);

LinearParams init_linear(std::size_t in, std::size_t out, Rng& rng);
LstmParams init_lstm(std::size_t in, std::size_t hidden, Rng& rng);
GruParams init_gru(std::size_t in, std::size_t hidden, Rng& rng);
TextCnnParams init_textcnn(std::size_t emb, const std::vector<std::size_t>& widths,
                           std::size_t filters, std::size_t hidden, Rng& rng);
MhaParams init_mha(std::size_t dim, std::size_t heads, Rng& rng);
TransformerParams init_transformer(std::size_t dim, std::size_t heads, std::size_t ff_dim,
                                   Rng& rng);

// x may be [in] or [L x in]; output keeps the leading shape
Tensor linear(const LinearParams& p, const Tensor& x);

// LSTM over the first `length` rows (all rows when nullopt), elementwise max
// over the hidden states
Tensor lstm_encode(const LstmParams& p, const Tensor& seq,
                   std::optional<std::size_t> length = std::nullopt);

// GRU over the first `length` rows; returns the final hidden state
Tensor gru_encode(const GruParams& p, const Tensor& seq,
                  std::optional<std::size_t> length = std::nullopt);

// per-width conv + relu + max-over-time, concatenated and projected; inputs
// shorter than the widest kernel are zero-padded first
Tensor textcnn_encode(const TextCnnParams& p, const Tensor& tokens);

// scaled dot-product attention, heads sliced out of the model dimension;
// optional out-parameter receives the per-head attention rows [heads*Lq x Lk]
Tensor multi_head_attention(const MhaParams& p, const Tensor& q_in, const Tensor& k_in,
                            const Tensor& v_in, Tensor* attn_out = nullptr);

// post-norm encoder layer: LN(x + attn(x)) then LN(y + FFN(y))
Tensor transformer_layer(const TransformerParams& p, const Tensor& seq,
                         Tensor* attn_out = nullptr);

// layer normalization over the last dimension, epsilon 1e-5
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta);

}  // namespace eiu
