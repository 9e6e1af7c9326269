#include "absa/trainer.hpp"

#include "absa/digest.hpp"
#include "absa/errors.hpp"
#include "absa/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>

namespace absa {

using ordered_json = nlohmann::ordered_json;

namespace {

int default_batch_size(DatasetId d) {
    switch (d) {
        case DatasetId::hotels: return 24;
        case DatasetId::haad: return 16;
        case DatasetId::news: return 64;
    }
    return 16;
}

double default_head_dropout(DatasetId d) {
    return d == DatasetId::hotels ? 0.1 : 0.3;
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::vector<EncodedExample> encode_all(std::span<const AspectInstance> instances,
                                       InputMode mode, const TokenizerHandle& tok,
                                       const LabelMap& labels, TruncationReport* trunc) {
    std::vector<EncodedExample> out;
    out.reserve(instances.size());
    for (const AspectInstance& inst : instances) {
        out.push_back(mode == InputMode::single ? encode_single(inst, tok, labels, trunc)
                                                : encode_pair(inst, tok, labels, trunc));
    }
    return out;
}

std::vector<EncodedExample> encode_all(const std::vector<const AspectInstance*>& instances,
                                       InputMode mode, const TokenizerHandle& tok,
                                       const LabelMap& labels, TruncationReport* trunc) {
    std::vector<EncodedExample> out;
    out.reserve(instances.size());
    for (const AspectInstance* inst : instances) {
        out.push_back(mode == InputMode::single ? encode_single(*inst, tok, labels, trunc)
                                                : encode_pair(*inst, tok, labels, trunc));
    }
    return out;
}

EvalCounts eval_encoded(const Classifier& model, const std::vector<EncodedExample>& examples) {
    const LabelMap& lm = model.labels();
    EvalCounts out;
    out.per_class.resize(static_cast<std::size_t>(lm.size()));
    for (int i = 0; i < lm.size(); ++i) {
        out.per_class[static_cast<std::size_t>(i)].label = lm.label_of(i);
    }
    for (const EncodedExample& ex : examples) {
        Vector probs = model.predict_probs(ex);
        Eigen::Index best = 0;
        probs.maxCoeff(&best);
        auto& row = out.per_class[static_cast<std::size_t>(ex.label_id)];
        ++row.support;
        ++out.total;
        if (static_cast<int>(best) == ex.label_id) {
            ++row.correct;
            ++out.correct;
        }
    }
    out.accuracy = out.total > 0 ? static_cast<double>(out.correct) /
                                       static_cast<double>(out.total)
                                 : 0.0;
    return out;
}

std::string model_name_for(InputMode mode) {
    return mode == InputMode::single ? "bert-single" : "bert-pair";
}

ordered_json per_class_json(const std::vector<PerClassCount>& per_class) {
    ordered_json arr = ordered_json::array();
    for (const PerClassCount& row : per_class) {
        arr.push_back({{"label", std::string(to_string(row.label))},
                       {"correct", row.correct},
                       {"support", row.support}});
    }
    return arr;
}

}  // namespace

TrainConfig TrainConfig::resolved() const {
    TrainConfig out = *this;
    if (out.batch_size <= 0) {
        out.batch_size = default_batch_size(out.dataset_id);
    }
    if (out.head_dropout < 0.0) {
        out.head_dropout = default_head_dropout(out.dataset_id);
    }
    return out;
}

void TrainConfig::validate() const {
    if (learning_rate < 0.0) {
        throw ConfigError("learning_rate must be non-negative");
    }
    if (epochs < 1) {
        throw ConfigError("epochs must be at least 1");
    }
    if (batch_size < 1) {
        throw ConfigError("batch_size must be at least 1");
    }
    if (head_dropout < 0.0 || head_dropout >= 1.0) {
        throw ConfigError("head_dropout must lie in [0, 1)");
    }
    if (model_selection != "last" && model_selection != "best-dev") {
        throw ConfigError("model_selection must be 'last' or 'best-dev', got '" +
                          model_selection + "'");
    }
}

std::string config_fingerprint(const TrainConfig& cfg) {
    // fine_tune deliberately excluded: the compare arms share everything else.
    Fnv1a64 h;
    std::ostringstream meta;
    meta << to_string(cfg.dataset_id) << '|' << to_string(cfg.input_mode) << '|'
         << format_double(cfg.learning_rate) << '|' << cfg.epochs << '|' << cfg.batch_size
         << '|' << format_double(cfg.head_dropout) << '|' << cfg.seed << '|'
         << cfg.model_selection << "|adam:0.9,0.999,1e-8,decay=0";
    h.update(meta.str());
    return h.hex();
}

std::string EvalReport::to_json_string() const {
    ordered_json j;
    j["schema_version"] = 1;
    j["kind"] = "eval_report";
    j["model"] = model_name;
    j["dataset"] = dataset;
    j["input_mode"] = input_mode;
    j["fine_tune"] = fine_tune;
    j["test_accuracy"] = test_accuracy;
    j["correct"] = correct;
    j["total"] = total;
    j["per_class"] = per_class_json(per_class);
    ordered_json curve = ordered_json::array();
    for (const DevPoint& p : dev_curve) {
        curve.push_back({{"epoch", p.epoch}, {"accuracy", p.accuracy}});
    }
    j["dev_curve"] = curve;
    j["fingerprint"] = fingerprint;
    j["split_mode"] = split_mode;
    j["truncation_count"] = truncation_count;
    j["model_selection"] = model_selection;
    j["seed"] = seed;
    return j.dump(2);
}

std::string EvalReport::dev_curve_csv() const {
    std::ostringstream os;
    os << "epoch,accuracy\n";
    for (const DevPoint& p : dev_curve) {
        os << p.epoch << ',' << std::fixed << std::setprecision(6) << p.accuracy << '\n';
    }
    return os.str();
}

EvalCounts evaluate(const Classifier& model, const TokenizerHandle& tokenizer,
                    std::span<const AspectInstance> instances, InputMode mode,
                    TruncationReport* trunc) {
    if (instances.empty()) {
        throw ConfigError("evaluate requires at least one instance");
    }
    const LabelMap& lm = model.labels();
    for (const AspectInstance& inst : instances) {
        if (!lm.contains(inst.polarity)) {
            throw ContractError("gold label '" + std::string(to_string(inst.polarity)) +
                                "' is outside the model's label inventory");
        }
    }
    std::vector<EncodedExample> examples = encode_all(instances, mode, tokenizer, lm, trunc);
    return eval_encoded(model, examples);
}

TrainOutcome train(const LabeledCorpus& corpus, const TrainConfig& raw_config,
                   Classifier& model, const TokenizerHandle& tokenizer) {
    const TrainConfig cfg = raw_config.resolved();
    cfg.validate();
    if (corpus.dataset_id != cfg.dataset_id) {
        throw ConfigError("config targets dataset '" +
                          std::string(to_string(cfg.dataset_id)) + "' but the corpus is '" +
                          std::string(to_string(corpus.dataset_id)) + "'");
    }

    auto train_view = corpus.split(SplitTag::train);
    auto dev_view = corpus.split(SplitTag::dev);
    auto test_view = corpus.split(SplitTag::test);
    if (train_view.empty() || dev_view.empty() || test_view.empty()) {
        throw ConfigError("training requires non-empty train, dev, and test splits (got " +
                          std::to_string(train_view.size()) + "/" +
                          std::to_string(dev_view.size()) + "/" +
                          std::to_string(test_view.size()) + ")");
    }

    TrainOutcome outcome;
    const LabelMap lm = model.labels();

    // Coverage audit: a label the model will be scored on but never trained on gets a
    // warning with the full support table, not an error.
    {
        std::array<std::array<long, 4>, 3> support{};
        for (std::size_t i = 0; i < corpus.instances.size(); ++i) {
            support[static_cast<std::size_t>(corpus.split_tags[i])]
                   [static_cast<std::size_t>(corpus.instances[i].polarity)]++;
        }
        std::string missing;
        for (Polarity p : corpus.label_inventory) {
            const auto pi = static_cast<std::size_t>(p);
            if (support[0][pi] == 0 && (support[1][pi] > 0 || support[2][pi] > 0)) {
                if (!missing.empty()) missing += ", ";
                missing += std::string(to_string(p));
            }
        }
        if (!missing.empty()) {
            std::ostringstream os;
            os << "labels present in dev/test but absent from train: " << missing << '\n';
            os << std::left << std::setw(10) << "label" << std::right << std::setw(8)
               << "train" << std::setw(8) << "dev" << std::setw(8) << "test" << '\n';
            for (Polarity p : corpus.label_inventory) {
                const auto pi = static_cast<std::size_t>(p);
                os << std::left << std::setw(10) << to_string(p) << std::right
                   << std::setw(8) << support[0][pi] << std::setw(8) << support[1][pi]
                   << std::setw(8) << support[2][pi] << '\n';
            }
            outcome.warnings.push_back(os.str());
        }
    }

    model.set_head_dropout(cfg.head_dropout);
    model.encoder().set_fine_tune(cfg.fine_tune);

    TruncationReport trunc;
    std::vector<EncodedExample> train_exs =
        encode_all(train_view, cfg.input_mode, tokenizer, lm, &trunc);
    std::vector<EncodedExample> dev_exs =
        encode_all(dev_view, cfg.input_mode, tokenizer, lm, &trunc);
    std::vector<EncodedExample> test_exs =
        encode_all(test_view, cfg.input_mode, tokenizer, lm, &trunc);

    AdamConfig adam_cfg;
    adam_cfg.learning_rate = cfg.learning_rate;
    Adam adam(adam_cfg, model.params());
    Rng rng(cfg.seed);

    EvalReport& report = outcome.report;
    report.dev_curve.reserve(static_cast<std::size_t>(cfg.epochs));

    Classifier best_model;
    double best_dev = -1.0;
    int best_epoch = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto batches = make_batches(train_exs.size(),
                                    static_cast<std::size_t>(cfg.batch_size), rng.next());
        for (std::size_t step = 0; step < batches.size(); ++step) {
            std::vector<EncodedExample> batch;
            batch.reserve(batches[step].size());
            for (std::size_t idx : batches[step]) {
                batch.push_back(train_exs[idx]);
            }
            model.zero_grads();
            try {
                model.loss_and_grads(batch, &rng);
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(step + 1) + ": " + e.what());
            }
            adam.step();
        }
        const EvalCounts dev = eval_encoded(model, dev_exs);
        report.dev_curve.push_back({epoch, dev.accuracy});
        if (cfg.model_selection == "best-dev" && dev.accuracy > best_dev) {
            best_dev = dev.accuracy;
            best_model = model;
            best_epoch = epoch;
        }
    }

    report.model_selection = cfg.model_selection;
    if (cfg.model_selection == "best-dev" && best_epoch > 0) {
        model = best_model;
        report.model_selection = "best-dev:epoch" + std::to_string(best_epoch);
    }

    const EvalCounts test = eval_encoded(model, test_exs);
    report.model_name = model_name_for(cfg.input_mode);
    report.dataset = std::string(to_string(cfg.dataset_id));
    report.input_mode = std::string(to_string(cfg.input_mode));
    report.fine_tune = cfg.fine_tune;
    report.test_accuracy = test.accuracy;
    report.correct = test.correct;
    report.total = test.total;
    report.per_class = test.per_class;
    report.fingerprint = config_fingerprint(cfg);
    report.split_mode = std::string(
        to_string(corpus.official_split ? SplitMode::official : SplitMode::random_70_10_20));
    report.truncation_count = static_cast<long>(trunc.count());
    report.seed = cfg.seed;
    return outcome;
}

CompareOutcome compare_finetune(const LabeledCorpus& corpus, const TrainConfig& config,
                                const Classifier& initial, const TokenizerHandle& tokenizer) {
    TrainConfig tuned_cfg = config;
    tuned_cfg.fine_tune = true;
    TrainConfig frozen_cfg = config;
    frozen_cfg.fine_tune = false;

    Classifier tuned = initial;
    Classifier frozen = initial;
    CompareOutcome out;
    out.fine_tuned = train(corpus, tuned_cfg, tuned, tokenizer).report;
    out.frozen = train(corpus, frozen_cfg, frozen, tokenizer).report;

    out.encoder_bit_identical = true;
    auto before = initial.encoder().params();
    auto after = frozen.encoder().params();
    for (std::size_t i = 0; i < before.size(); ++i) {
        const auto bytes = before[i]->count() * sizeof(double);
        if (std::memcmp(before[i]->value.data(), after[i]->value.data(), bytes) != 0) {
            out.encoder_bit_identical = false;
            break;
        }
    }
    out.table_text = render_compare_table(out.fine_tuned, out.frozen);
    return out;
}

std::vector<CasePrediction> predict_cases(const Classifier& model,
                                          const TokenizerHandle& tokenizer,
                                          std::span<const PredictCase> cases,
                                          InputMode mode) {
    std::vector<CasePrediction> out;
    out.reserve(cases.size());
    const LabelMap& lm = model.labels();
    for (std::size_t i = 0; i < cases.size(); ++i) {
        if (cases[i].sentence.empty()) {
            throw EncodingError("case " + std::to_string(i) + " has an empty sentence");
        }
        if (cases[i].aspect.empty()) {
            throw EncodingError("case " + std::to_string(i) + " has an empty aspect");
        }
        AspectInstance inst;
        inst.review_id = "case";
        inst.sentence_id = std::to_string(i);
        inst.sentence_text = nfc(cases[i].sentence);
        inst.aspect_text = nfc(cases[i].aspect);
        inst.polarity = lm.label_of(0);
        EncodedExample ex = mode == InputMode::single
                                ? encode_single(inst, tokenizer, lm)
                                : encode_pair(inst, tokenizer, lm);
        Vector probs = model.predict_probs(ex);
        Eigen::Index best = 0;
        probs.maxCoeff(&best);
        CasePrediction pred;
        pred.input = cases[i];
        pred.label = lm.label_of(static_cast<int>(best));
        pred.probabilities.assign(probs.data(), probs.data() + probs.size());
        out.push_back(std::move(pred));
    }
    return out;
}

std::string render_compare_table(const EvalReport& fine_tuned, const EvalReport& frozen) {
    std::ostringstream os;
    os << std::left << std::setw(12) << "arm" << std::right << std::setw(14)
       << "test_accuracy" << std::setw(12) << "final_dev" << '\n';
    auto row = [&os](const char* name, const EvalReport& r) {
        const double final_dev = r.dev_curve.empty() ? 0.0 : r.dev_curve.back().accuracy;
        os << std::left << std::setw(12) << name << std::right << std::setw(14)
           << std::fixed << std::setprecision(4) << r.test_accuracy << std::setw(12)
           << final_dev << '\n';
    };
    row("fine-tuned", fine_tuned);
    row("frozen", frozen);
    return os.str();
}

}  // namespace absa
