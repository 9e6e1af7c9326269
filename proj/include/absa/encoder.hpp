#pragma once

#include "absa/encoding.hpp"
#include "absa/nn.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace absa {

struct EncoderConfig {
    std::string checkpoint_id;  // provenance label carried into saved manifests
    int num_layers = 12;
    int num_heads = 12;
    int hidden_size = 768;
    int intermediate_size = 3072;
    int vocab_size = 0;
    int max_position = 512;
    double dropout_rate = 0.3;  // hidden dropout inside the encoder
    bool fine_tune = true;
};

struct LayerNormCache {
    Matrix xhat;
    Vector inv_std;
};

struct LayerCache {
    Matrix x;                   // layer input
    Matrix q, k, v;             // [T x H], heads packed along columns
    std::vector<Matrix> probs;  // per-head attention rows
    Matrix ctx;                 // concatenated head outputs
    Matrix drop_attn;           // inverted-dropout multipliers; empty when inactive
    LayerNormCache ln1;
    Matrix x1;  // post-LN1, FFN input
    Matrix u;   // FFN pre-activation
    Matrix act;
    Matrix drop_ffn;
    LayerNormCache ln2;
};

struct EncoderCache {
    std::vector<int> token_ids;
    std::vector<int> segment_ids;
    std::vector<int> attention_mask;
    Matrix emb;  // summed embeddings before LN
    LayerNormCache ln_emb;
    Matrix drop_emb;
    Matrix x0;
    std::vector<LayerCache> layers;
    Matrix out;
};

struct EncoderOutput {
    Matrix hidden_states;  // [T x H]
    Vector cls_state;      // hidden_states row 0
};

// Stack of post-norm transformer layers over word + position + segment embeddings.
// Forward applies H^l = Layer(H^{l-1}); backward replays the cached activations and
// accumulates parameter gradients. Masked key positions contribute nothing in either
// direction.
class TransformerEncoder {
public:
    TransformerEncoder() = default;
    explicit TransformerEncoder(const EncoderConfig& config);

    static TransformerEncoder random_init(const EncoderConfig& config, std::uint64_t seed);

    const EncoderConfig& config() const { return cfg_; }

    // fine_tune toggles the trainable flag on every encoder tensor. Optimizers and
    // backward both honour it, so a frozen encoder is never written to.
    void set_fine_tune(bool fine_tune);
    bool fine_tune() const { return cfg_.fine_tune; }

    // Forward pass over one encoded example. When `dropout_rng` is non-null and the
    // configured rate is positive, inverted dropout is applied at the usual hidden
    // sites (after the embedding LN and after each sublayer projection). A null rng
    // gives the deterministic inference path.
    EncoderOutput forward(const EncodedExample& example, Rng* dropout_rng = nullptr,
                          EncoderCache* cache = nullptr) const;

    // Accumulates gradients for d(loss)/d(hidden_states). Requires fine_tune; callers
    // that freeze the encoder must not route gradients through it.
    void backward(const EncoderCache& cache, const Matrix& d_hidden);

    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
    void zero_grads();
    std::size_t parameter_count() const;
    std::size_t trainable_parameter_count() const;

    // Throws LoadError naming expected vs found when the declared shape disagrees
    // with this instance (used after checkpoint loads).
    void verify_shape(int num_layers, int num_heads, int hidden_size) const;

private:
    struct Layer {
        Tensor wq, bq, wk, bk, wv, bv, wo, bo;
        Tensor ln1_gain, ln1_bias;
        Tensor w1, b1, w2, b2;
        Tensor ln2_gain, ln2_bias;
    };

    void validate_example(const EncodedExample& example) const;

    EncoderConfig cfg_;
    Tensor word_emb_;  // [V x H]
    Tensor pos_emb_;   // [max_position x H]
    Tensor seg_emb_;   // [2 x H]
    Tensor emb_ln_gain_, emb_ln_bias_;
    std::vector<Layer> layers_;
};

}  // namespace absa
