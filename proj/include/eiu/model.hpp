#pragma once

#include <string>
#include <vector>

#include "eiu/checkpoint.hpp"
#include "eiu/data.hpp"
#include "eiu/nn.hpp"

namespace eiu {

// The joint emotion-intent recognition network: per-task multimodal encoders
// with a transformer fusion stage, a GRU dialogue-history encoder, a
// cross-attention interaction encoder between the two task branches with a
// sigmoid gate, and residual classifiers. Every ablation the experiments
// need is a config switch.

struct ModelConfig {
    std::size_t hidden = 128;
    std::size_t heads = 4;
    std::size_t n_emotions = 7;
    std::size_t n_intents = 9;
    std::size_t text_dim = 768;
    std::size_t audio_dim = 512;
    std::size_t visual_dim = 342;
    std::vector<std::size_t> kernel_widths = {3, 4, 5};
    std::size_t filters_per_width = 64;
    std::size_t ff_dim = 0;  // 0 -> 2*hidden
    ModalityMask modality_mask;
    bool use_history = true;
    bool use_interaction = true;
    bool use_gate = true;

    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

enum class Task { emotion, intent };

struct TaskEncoderParams {
    TextCnnParams text;
    LstmParams acoustic;
    LstmParams visual;
    TransformerParams fusion;
};

struct HistoryEncoderParams {
    GruParams text;
    GruParams acoustic;
    GruParams visual;
    LinearParams proj;  // [3*hidden x hidden]
};

struct InteractionBranchParams {
    MhaParams binary;  // queries from this branch, keys/values from the other
    MhaParams triple;  // queries from this branch, keys/values from the binary output
};

// All learnable parameters, addressable by path for checkpointing and the
// optimizer. The path registry aliases the same tensors as the typed structs.
struct ModelState {
    TaskEncoderParams emotion_enc;
    TaskEncoderParams intent_enc;
    HistoryEncoderParams history;
    InteractionBranchParams inter_e;
    InteractionBranchParams inter_i;
    LinearParams cls_e;
    LinearParams cls_i;

    NamedTensorList params;  // insertion-ordered (path, tensor) registry

    const Tensor& at(const std::string& path) const;
    void zero_grads();

    // overwrite values from a checkpoint; every path must match in shape
    void load_values(const NamedTensorList& values);
    // copy values for paths with the given prefix (encoder transfer)
    void load_prefix(const ModelState& src, const std::string& prefix);
};

ModelState init_model(const ModelConfig& cfg, std::uint64_t seed);

// Every intermediate of a forward pass (the symbols of the architecture).
struct ForwardTrace {
    Tensor f_star_e, f_star_i;  // fused task sequences [3 x hidden]
    Tensor f_h;                 // history vector [hidden]
    Tensor f_e, f_i;            // history-fused sequences [3 x hidden]
    Tensor f_ei, f_ie;          // binary correlation outputs
    Tensor f_eie, f_iei;        // triple interaction outputs
    Tensor g_star_e, g_star_i;  // gated features
    Tensor g_e, g_i;            // residual classifier inputs
    Tensor logits_e, logits_i;  // [n_emotions], [n_intents]
    Tensor attn_rows;           // every attention pass's rows (fusion + interaction)
};

// Pipeline pieces, exposed for direct testing.
Tensor encode_task_utterance(const ModelState& state, const ModelConfig& cfg,
                             const UtteranceFeatures& feats, Task task,
                             Tensor* fusion_attn = nullptr);
Tensor encode_history(const ModelState& state, const ModelConfig& cfg,
                      const std::vector<const UtteranceFeatures*>& past);
Tensor fuse_history(const Tensor& f_star, const Tensor& f_h, bool use_history);
Tensor binary_correlation(const ModelState& state, const Tensor& f_gamma, const Tensor& f_beta,
                          Task branch, Tensor* attn = nullptr);
Tensor triple_interaction(const ModelState& state, const Tensor& f_gamma, const Tensor& f_gb,
                          Task branch, Tensor* attn = nullptr);
Tensor gate_regulate(const Tensor& f_gbg, const Tensor& f_gb, bool use_gate);
Tensor classify(const ModelState& state, const Tensor& g_star, const Tensor& f, Task task,
                bool use_interaction);

// Full pipeline at utterance `index` of a conversation.
ForwardTrace forward(const ModelState& state, const ModelConfig& cfg, const Conversation& conv,
                     std::size_t index);

}  // namespace eiu
