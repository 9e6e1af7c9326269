#pragma once

#include "absa/encoder.hpp"
#include "absa/encoding.hpp"
#include "absa/labels.hpp"
#include "absa/nn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace absa {

// Encoder plus a linear softmax head over the [CLS] state: P = softmax(W^T h + b).
// Head gradients are always computed; encoder gradients only while fine_tune is set,
// so a frozen encoder stays bit-identical through training.
class Classifier {
public:
    Classifier() = default;
    Classifier(TransformerEncoder encoder, LabelMap labels, double head_dropout,
               std::uint64_t head_seed);

    static Classifier init_random(const EncoderConfig& config,
                                  const std::vector<Polarity>& inventory,
                                  double head_dropout, std::uint64_t seed);

    TransformerEncoder& encoder() { return encoder_; }
    const TransformerEncoder& encoder() const { return encoder_; }
    const LabelMap& labels() const { return labels_; }
    int num_classes() const { return labels_.size(); }
    double head_dropout() const { return head_dropout_; }
    void set_head_dropout(double rate);

    // Deterministic inference path: probabilities over the label inventory, entries in
    // (0, 1) summing to 1 within floating tolerance.
    Vector predict_probs(const EncodedExample& example) const;
    Polarity predict_label(const EncodedExample& example) const;

    // Mean cross-entropy over the batch; accumulates gradients into the head and, when
    // the encoder is fine-tuned, into the encoder. Pass an rng to activate dropout.
    double loss_and_grads(const std::vector<EncodedExample>& batch, Rng* dropout_rng);

    std::vector<Tensor*> params();
    void zero_grads();
    std::size_t parameter_count() const;
    std::size_t trainable_parameter_count() const;

    // Checkpoint directory layout: manifest.json (shape, labels, tensor table, digest)
    // next to weights.bin (raw little-endian float64 in manifest order). Load restores
    // the exact bytes; any missing part, shape clash, or digest mismatch raises
    // LoadError and leaves no partial model behind.
    void save_checkpoint(const std::string& dir) const;
    static Classifier load_checkpoint(const std::string& dir);

    // Digest of configuration plus every weight byte; equal fingerprints mean
    // indistinguishable models.
    std::string fingerprint() const;

private:
    Vector head_logits(const Vector& h_cls) const;

    TransformerEncoder encoder_;
    Tensor w_;  // [H x K]
    Tensor b_;  // [1 x K]
    LabelMap labels_;
    double head_dropout_ = 0.1;
};

}  // namespace absa
