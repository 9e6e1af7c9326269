#pragma once

#include "absa/corpus.hpp"
#include "absa/encoding.hpp"
#include "absa/model.hpp"
#include "absa/tokenizer.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace absa {

// Fine-tuning hyperparameters. Zero/negative batch_size or head_dropout mean "use the
// per-dataset default" (hotels 24/0.1, haad 16/0.3, news 64/0.3); resolve() fills them
// in. Learning rate 1e-5, 10 epochs, Adam(0.9, 0.999, 1e-8, no decay), no schedule.
struct TrainConfig {
    DatasetId dataset_id = DatasetId::haad;
    InputMode input_mode = InputMode::pair;
    double learning_rate = 1e-5;
    int epochs = 10;
    int batch_size = 0;
    double head_dropout = -1.0;
    bool fine_tune = true;
    std::uint64_t seed = 0;
    std::string model_selection = "last";  // or "best-dev"

    TrainConfig resolved() const;
    void validate() const;  // requires resolved values
};

struct PerClassCount {
    Polarity label = Polarity::positive;
    long correct = 0;
    long support = 0;
};

struct DevPoint {
    int epoch = 0;  // 1-based
    double accuracy = 0.0;
};

struct EvalReport {
    std::string model_name;  // "baseline-majority", "bert-single", "bert-pair"
    std::string dataset;
    std::string input_mode;
    bool fine_tune = true;
    double test_accuracy = 0.0;
    long correct = 0;
    long total = 0;
    std::vector<PerClassCount> per_class;
    std::vector<DevPoint> dev_curve;  // one entry per epoch, in epoch order
    std::string fingerprint;          // hash of the resolved config minus fine_tune
    std::string split_mode;
    long truncation_count = 0;
    std::string model_selection;
    std::uint64_t seed = 0;

    std::string to_json_string() const;
    std::string dev_curve_csv() const;  // header "epoch,accuracy"
};

struct EvalCounts {
    double accuracy = 0.0;
    long correct = 0;
    long total = 0;
    std::vector<PerClassCount> per_class;
};

struct TrainOutcome {
    EvalReport report;
    std::vector<std::string> warnings;
};

// Hash over every resolved field except fine_tune (plus the fixed Adam constants), so
// the two compare_finetune arms share a fingerprint and differ only in the flag.
std::string config_fingerprint(const TrainConfig& resolved);

// Accuracy per "correct / total" with per-label tallies; dropout stays off. Throws
// ContractError naming any gold label outside the model's inventory. A non-null
// `trunc` collects which instances lost tokens to the length budget.
EvalCounts evaluate(const Classifier& model, const TokenizerHandle& tokenizer,
                    std::span<const AspectInstance> instances, InputMode mode,
                    TruncationReport* trunc = nullptr);

// Runs epochs x shuffled batches of Adam on mean cross-entropy, recording dev accuracy
// after every epoch and evaluating the selected model on test. Mutates `model` in
// place. Deterministic for a fixed seed (single-threaded, fixed reduction order).
// Non-finite loss aborts with NumericError naming epoch and step; labels present in
// dev/test but missing from train produce a warning with a support table.
TrainOutcome train(const LabeledCorpus& corpus, const TrainConfig& config,
                   Classifier& model, const TokenizerHandle& tokenizer);

struct CompareOutcome {
    EvalReport fine_tuned;
    EvalReport frozen;
    bool encoder_bit_identical = false;  // frozen arm vs. the shared initial weights
    std::string table_text;
};

// Two runs from identical initial weights differing only in fine_tune. The frozen arm
// must leave every encoder tensor bit-identical; the flag above reports the check.
CompareOutcome compare_finetune(const LabeledCorpus& corpus, const TrainConfig& config,
                                const Classifier& initial, const TokenizerHandle& tokenizer);

struct PredictCase {
    std::string sentence;
    std::string aspect;
};

struct CasePrediction {
    PredictCase input;
    Polarity label = Polarity::positive;
    std::vector<double> probabilities;  // indexed by the model's label ids
};

// Deterministic per-case argmax labels. Empty sentence or aspect raises EncodingError
// naming the case index.
std::vector<CasePrediction> predict_cases(const Classifier& model,
                                          const TokenizerHandle& tokenizer,
                                          std::span<const PredictCase> cases,
                                          InputMode mode);

// Aligned two-row comparison of the compare_finetune arms.
std::string render_compare_table(const EvalReport& fine_tuned, const EvalReport& frozen);

}  // namespace absa
