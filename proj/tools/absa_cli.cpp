// absa: batch pipeline driver. Subcommands cover corpus ingestion, the majority
// baseline, transformer fine-tuning/evaluation, the frozen-vs-fine-tuned comparison,
// case prediction, and report consolidation. Every run writes its artifacts plus a
// run_manifest.json recording the resolved config, input digests, and duration;
// identical inputs and seed reproduce identical primary artifacts.

#include "absa/baseline.hpp"
#include "absa/corpus.hpp"
#include "absa/digest.hpp"
#include "absa/encoding.hpp"
#include "absa/errors.hpp"
#include "absa/model.hpp"
#include "absa/report.hpp"
#include "absa/tokenizer.hpp"
#include "absa/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace absa;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory " + path.parent_path().string() + ": " +
                          ec.message());
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << content;
    if (!out.flush()) {
        throw IoError("failed writing " + path.string());
    }
}

// Accumulates the run record and writes it last, after every artifact landed.
class ManifestBuilder {
public:
    ManifestBuilder(std::string command, fs::path output_dir)
        : command_(std::move(command)),
          output_dir_(std::move(output_dir)),
          start_(std::chrono::steady_clock::now()) {}

    void set_config(ordered_json config) { config_ = std::move(config); }
    void set_seed(std::uint64_t seed) { seed_ = seed; }

    void add_input(const std::string& path) {
        inputs_.push_back({{"path", path}, {"digest", fnv1a64_hex(read_file(path))}});
    }

    void write_artifact(const std::string& name, const std::string& content) {
        write_file(output_dir_ / name, content);
        outputs_.push_back((output_dir_ / name).string());
    }

    void note_artifact(const fs::path& path) { outputs_.push_back(path.string()); }

    const fs::path& output_dir() const { return output_dir_; }

    void finish() {
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start_);
        ordered_json m;
        m["command"] = command_;
        m["config"] = config_;
        m["inputs"] = inputs_;
        m["outputs"] = outputs_;
        m["duration_ms"] = elapsed.count();
        m["seed"] = seed_;
        write_file(output_dir_ / "run_manifest.json", m.dump(2) + "\n");
    }

private:
    std::string command_;
    fs::path output_dir_;
    std::chrono::steady_clock::time_point start_;
    ordered_json config_ = ordered_json::object();
    ordered_json inputs_ = ordered_json::array();
    std::vector<std::string> outputs_;
    std::uint64_t seed_ = 0;
};

LabeledCorpus load_corpus_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    return import_jsonl(in, path);
}

std::string render_eval_text(const EvalReport& r) {
    std::ostringstream os;
    const bool frozen_encoder = !r.fine_tune && r.input_mode != "none";
    os << "model: " << r.model_name << "  dataset: " << r.dataset << "  mode: "
       << r.input_mode << (frozen_encoder ? "  (frozen encoder)" : "") << '\n';
    os << "test accuracy: " << std::fixed << std::setprecision(4) << r.test_accuracy
       << " (" << r.correct << "/" << r.total << ")\n";
    os << std::left << std::setw(10) << "label" << std::right << std::setw(9) << "correct"
       << std::setw(9) << "support" << '\n';
    for (const PerClassCount& row : r.per_class) {
        os << std::left << std::setw(10) << to_string(row.label) << std::right
           << std::setw(9) << row.correct << std::setw(9) << row.support << '\n';
    }
    if (!r.dev_curve.empty()) {
        os << "dev accuracy by epoch:";
        for (const DevPoint& p : r.dev_curve) {
            os << ' ' << p.epoch << ':' << std::fixed << std::setprecision(4) << p.accuracy;
        }
        os << '\n';
    }
    os << "selection: " << r.model_selection << "  split: " << r.split_mode
       << "  truncated: " << r.truncation_count << "  seed: " << r.seed << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Shared config resolution for train/eval/compare/predict: built-in defaults,
// overridden by JSON config file keys, overridden by explicit flags.

struct RunSettings {
    std::string dataset;
    std::string mode = "pair";
    std::string split = "official";
    std::uint64_t seed = 0;
    int epochs = 10;
    int batch_size = -1;      // -1: per-dataset default
    double lr = 1e-5;
    double dropout = -1.0;    // head dropout; -1: per-dataset default
    double hidden_dropout = 0.3;
    bool freeze = false;
    std::string input;
    std::string output;
    std::string vocab;
    std::string checkpoint;
    int max_seq_len = 128;
    int encoder_layers = 12;
    int encoder_heads = 12;
    int encoder_hidden = 768;
    int encoder_ffn = 3072;
    int encoder_max_position = 512;
    std::string model_selection = "last";
    bool dims_declared = false;  // any encoder_* key given explicitly
};

const std::vector<std::string>& valid_config_keys() {
    static const std::vector<std::string> keys = {
        "dataset",        "mode",           "split",
        "seed",           "epochs",         "batch_size",
        "lr",             "dropout",        "hidden_dropout",
        "freeze",         "input",          "output",
        "vocab",          "checkpoint",     "max_seq_len",
        "encoder_layers", "encoder_heads",  "encoder_hidden",
        "encoder_ffn",    "encoder_max_position", "model_selection"};
    return keys;
}

void apply_config_file(RunSettings& s, const std::string& path) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse config file " + path + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw ConfigError("config file " + path + " must hold a flat JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        try {
            if (key == "dataset") s.dataset = value.get<std::string>();
            else if (key == "mode") s.mode = value.get<std::string>();
            else if (key == "split") s.split = value.get<std::string>();
            else if (key == "seed") s.seed = value.get<std::uint64_t>();
            else if (key == "epochs") s.epochs = value.get<int>();
            else if (key == "batch_size") s.batch_size = value.get<int>();
            else if (key == "lr") s.lr = value.get<double>();
            else if (key == "dropout") s.dropout = value.get<double>();
            else if (key == "hidden_dropout") s.hidden_dropout = value.get<double>();
            else if (key == "freeze") s.freeze = value.get<bool>();
            else if (key == "input") s.input = value.get<std::string>();
            else if (key == "output") s.output = value.get<std::string>();
            else if (key == "vocab") s.vocab = value.get<std::string>();
            else if (key == "checkpoint") s.checkpoint = value.get<std::string>();
            else if (key == "max_seq_len") s.max_seq_len = value.get<int>();
            else if (key == "encoder_layers") { s.encoder_layers = value.get<int>(); s.dims_declared = true; }
            else if (key == "encoder_heads") { s.encoder_heads = value.get<int>(); s.dims_declared = true; }
            else if (key == "encoder_hidden") { s.encoder_hidden = value.get<int>(); s.dims_declared = true; }
            else if (key == "encoder_ffn") { s.encoder_ffn = value.get<int>(); s.dims_declared = true; }
            else if (key == "encoder_max_position") { s.encoder_max_position = value.get<int>(); s.dims_declared = true; }
            else if (key == "model_selection") s.model_selection = value.get<std::string>();
            else {
                std::string keys;
                for (const std::string& k : valid_config_keys()) {
                    keys += keys.empty() ? k : ", " + k;
                }
                throw ConfigError("unknown config key '" + key + "' in " + path +
                                  "; valid keys: " + keys);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config key '" + key + "' in " + path +
                              " has the wrong type: " + e.what());
        }
    }
}

// Flags shared by the model-driving subcommands; each is applied only when given.
struct ModelFlags {
    std::string config_path;
    std::string dataset, mode, split, input, output, vocab, checkpoint, model_selection;
    std::uint64_t seed = 0;
    int epochs = 0;
    int batch_size = 0;
    double lr = 0.0;
    double dropout = 0.0;
    bool freeze = false;

    CLI::Option* dataset_opt = nullptr;
    CLI::Option* mode_opt = nullptr;
    CLI::Option* split_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* epochs_opt = nullptr;
    CLI::Option* batch_opt = nullptr;
    CLI::Option* lr_opt = nullptr;
    CLI::Option* dropout_opt = nullptr;
    CLI::Option* freeze_opt = nullptr;
    CLI::Option* input_opt = nullptr;
    CLI::Option* output_opt = nullptr;
    CLI::Option* vocab_opt = nullptr;
    CLI::Option* checkpoint_opt = nullptr;
    CLI::Option* selection_opt = nullptr;
};

void register_model_flags(CLI::App* cmd, ModelFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file (flags override it)");
    f.dataset_opt = cmd->add_option("--dataset", f.dataset, "Dataset: haad, news, hotels");
    f.mode_opt = cmd->add_option("--mode", f.mode, "Input mode: single or pair");
    f.split_opt = cmd->add_option("--split", f.split, "Split: official or random");
    f.seed_opt = cmd->add_option("--seed", f.seed, "Seed for split/shuffle/dropout/init");
    f.epochs_opt = cmd->add_option("--epochs", f.epochs, "Training epochs");
    f.batch_opt = cmd->add_option("--batch-size", f.batch_size, "Batch size");
    f.lr_opt = cmd->add_option("--lr", f.lr, "Learning rate");
    f.dropout_opt = cmd->add_option("--dropout", f.dropout, "Head-input dropout rate");
    f.freeze_opt = cmd->add_flag("--freeze", f.freeze, "Freeze encoder parameters");
    f.input_opt = cmd->add_option("--input", f.input, "Input file");
    f.output_opt = cmd->add_option("--output", f.output, "Output directory");
    f.vocab_opt = cmd->add_option("--vocab", f.vocab, "WordPiece vocab file");
    f.checkpoint_opt = cmd->add_option("--checkpoint", f.checkpoint, "Checkpoint directory");
    f.selection_opt =
        cmd->add_option("--model-selection", f.model_selection, "last or best-dev");
}

RunSettings resolve_settings(const ModelFlags& f) {
    RunSettings s;
    if (!f.config_path.empty()) {
        apply_config_file(s, f.config_path);
    }
    if (f.dataset_opt->count()) s.dataset = f.dataset;
    if (f.mode_opt->count()) s.mode = f.mode;
    if (f.split_opt->count()) s.split = f.split;
    if (f.seed_opt->count()) s.seed = f.seed;
    if (f.epochs_opt->count()) s.epochs = f.epochs;
    if (f.batch_opt->count()) s.batch_size = f.batch_size;
    if (f.lr_opt->count()) s.lr = f.lr;
    if (f.dropout_opt->count()) s.dropout = f.dropout;
    if (f.freeze_opt->count()) s.freeze = true;
    if (f.input_opt->count()) s.input = f.input;
    if (f.output_opt->count()) s.output = f.output;
    if (f.vocab_opt->count()) s.vocab = f.vocab;
    if (f.checkpoint_opt->count()) s.checkpoint = f.checkpoint;
    if (f.selection_opt->count()) s.model_selection = f.model_selection;
    return s;
}

void require(const std::string& value, const std::string& what) {
    if (value.empty()) {
        throw ConfigError("missing required setting: " + what);
    }
}

DatasetId parse_dataset(const std::string& name) {
    auto d = dataset_from_string(name);
    if (!d) {
        throw ConfigError("unknown dataset '" + name + "' (expected haad, news, or hotels)");
    }
    return *d;
}

InputMode parse_mode(const std::string& name) {
    auto m = input_mode_from_string(name);
    if (!m) {
        throw ConfigError("unknown mode '" + name + "' (expected single or pair)");
    }
    return *m;
}

SplitMode parse_split(const std::string& name) {
    if (name == "official") return SplitMode::official;
    if (name == "random" || name == "random_70_10_20") return SplitMode::random_70_10_20;
    throw ConfigError("unknown split '" + name + "' (expected official or random)");
}

TrainConfig to_train_config(const RunSettings& s) {
    TrainConfig tc;
    tc.dataset_id = parse_dataset(s.dataset);
    tc.input_mode = parse_mode(s.mode);
    tc.learning_rate = s.lr;
    tc.epochs = s.epochs;
    tc.batch_size = s.batch_size;
    tc.head_dropout = s.dropout;
    tc.fine_tune = !s.freeze;
    tc.seed = s.seed;
    tc.model_selection = s.model_selection;
    return tc;
}

ordered_json settings_json(const RunSettings& s, const TrainConfig* resolved_tc) {
    ordered_json j;
    j["dataset"] = s.dataset;
    j["mode"] = s.mode;
    j["split"] = s.split;
    j["seed"] = s.seed;
    if (resolved_tc != nullptr) {
        j["epochs"] = resolved_tc->epochs;
        j["batch_size"] = resolved_tc->batch_size;
        j["lr"] = resolved_tc->learning_rate;
        j["dropout"] = resolved_tc->head_dropout;
        j["freeze"] = !resolved_tc->fine_tune;
        j["model_selection"] = resolved_tc->model_selection;
    }
    j["hidden_dropout"] = s.hidden_dropout;
    j["input"] = s.input;
    j["output"] = s.output;
    j["vocab"] = s.vocab;
    j["checkpoint"] = s.checkpoint;
    j["max_seq_len"] = s.max_seq_len;
    j["encoder_layers"] = s.encoder_layers;
    j["encoder_heads"] = s.encoder_heads;
    j["encoder_hidden"] = s.encoder_hidden;
    j["encoder_ffn"] = s.encoder_ffn;
    j["encoder_max_position"] = s.encoder_max_position;
    return j;
}

// Loads a named checkpoint, verifying any explicitly declared dimensions against it.
Classifier load_checkpoint_model(const RunSettings& s) {
    Classifier model = Classifier::load_checkpoint(s.checkpoint);
    if (s.dims_declared) {
        model.encoder().verify_shape(s.encoder_layers, s.encoder_heads, s.encoder_hidden);
    }
    return model;
}

void check_label_match(const Classifier& model, const std::vector<Polarity>& inventory) {
    if (model.labels() == LabelMap(inventory)) {
        return;
    }
    auto join = [](const std::vector<Polarity>& labels) {
        std::string out;
        for (Polarity p : labels) {
            out += out.empty() ? std::string(to_string(p)) : ", " + std::string(to_string(p));
        }
        return out;
    };
    throw ConfigError("checkpoint labels {" + join(model.labels().labels()) +
                      "} do not match the corpus inventory {" +
                      join(LabelMap(inventory).labels()) + "}");
}

// Sequence budget actually usable: the configured max_seq_len, capped by the encoder's
// position table.
int effective_seq_len(const RunSettings& s, const Classifier* loaded) {
    const int max_position =
        loaded != nullptr ? loaded->encoder().config().max_position : s.encoder_max_position;
    return std::min(s.max_seq_len, max_position);
}

Classifier random_model(const RunSettings& s, const TrainConfig& tc,
                        const TokenizerHandle& tokenizer,
                        const std::vector<Polarity>& inventory) {
    EncoderConfig ec;
    ec.checkpoint_id = "random-init";
    ec.num_layers = s.encoder_layers;
    ec.num_heads = s.encoder_heads;
    ec.hidden_size = s.encoder_hidden;
    ec.intermediate_size = s.encoder_ffn;
    ec.vocab_size = tokenizer.vocab_size();
    ec.max_position = s.encoder_max_position;
    ec.dropout_rate = s.hidden_dropout;
    ec.fine_tune = tc.fine_tune;
    return Classifier::init_random(ec, inventory, tc.head_dropout, tc.seed);
}

// ---------------------------------------------------------------------------
// ingest

int cmd_ingest(const std::string& dataset_name, const std::vector<std::string>& inputs,
               const std::string& output, const std::string& split_name,
               std::uint64_t seed) {
    if (inputs.empty() || inputs.size() > 2) {
        throw ConfigError("ingest takes one input file, or two (train file then test file)");
    }
    const DatasetId dataset = parse_dataset(dataset_name);
    ManifestBuilder manifest("ingest", output);
    manifest.set_seed(seed);
    for (const std::string& path : inputs) {
        manifest.add_input(path);
    }

    auto parse_one = [dataset](const std::string& path, SplitTag tag) {
        const std::string bytes = read_file(path);
        switch (dataset) {
            case DatasetId::haad: return parse_haad(bytes, tag);
            case DatasetId::news: return parse_news(bytes, tag);
            case DatasetId::hotels: return parse_hotels(bytes, tag);
        }
        throw ConfigError("unreachable dataset id");
    };

    ParsedCorpus parsed = inputs.size() == 2
                              ? merge_official(parse_one(inputs[0], SplitTag::train),
                                               parse_one(inputs[1], SplitTag::test))
                              : parse_one(inputs[0], SplitTag::train);

    std::string split_used = "as-parsed";
    if (!split_name.empty()) {
        parsed.corpus = split(parsed.corpus, parse_split(split_name), seed);
        split_used = std::string(to_string(parse_split(split_name)));
    }

    ordered_json config;
    config["dataset"] = dataset_name;
    config["split"] = split_used;
    config["inputs"] = inputs;
    manifest.set_config(config);

    {
        std::ostringstream all;
        export_jsonl(parsed.corpus, all, "instances.jsonl");
        manifest.write_artifact("instances.jsonl", all.str());
    }
    for (SplitTag tag : {SplitTag::train, SplitTag::dev, SplitTag::test}) {
        LabeledCorpus part;
        part.dataset_id = parsed.corpus.dataset_id;
        part.label_inventory = parsed.corpus.label_inventory;
        part.official_split = parsed.corpus.official_split;
        for (std::size_t i = 0; i < parsed.corpus.size(); ++i) {
            if (parsed.corpus.split_tags[i] == tag) {
                part.instances.push_back(parsed.corpus.instances[i]);
                part.split_tags.push_back(tag);
            }
        }
        if (part.instances.empty()) {
            continue;
        }
        std::ostringstream os;
        const std::string name = std::string(to_string(tag)) + ".jsonl";
        export_jsonl(part, os, name);
        manifest.write_artifact(name, os.str());
    }

    const CorpusStats st = stats(parsed.corpus);
    manifest.write_artifact("stats.txt", st.render_text());
    manifest.write_artifact("stats.json", st.render_json() + "\n");

    ordered_json pr;
    pr["sentences_seen"] = parsed.report.sentences_seen;
    ordered_json mismatches = ordered_json::array();
    for (const OffsetMismatch& m : parsed.report.offset_mismatches) {
        mismatches.push_back({{"sentence_id", m.sentence_id},
                              {"char_from", m.char_from},
                              {"char_to", m.char_to},
                              {"aspect_text", m.aspect_text},
                              {"found", m.found},
                              {"issue", m.issue}});
    }
    pr["offset_mismatches"] = mismatches;
    pr["skipped_comment_ids"] = parsed.report.skipped_comment_ids;
    pr["skipped_text_level_opinions"] = parsed.report.skipped_text_level_opinions;
    manifest.write_artifact("parse_report.json", pr.dump(2) + "\n");

    manifest.finish();
    std::cout << st.render_text();
    return 0;
}

// ---------------------------------------------------------------------------
// baseline

int cmd_baseline(const std::string& train_path, const std::string& test_path,
                 const std::string& output) {
    ManifestBuilder manifest("baseline", output);
    manifest.add_input(train_path);
    manifest.add_input(test_path);

    LabeledCorpus train_corpus = load_corpus_jsonl(train_path);
    LabeledCorpus test_corpus = load_corpus_jsonl(test_path);
    if (train_corpus.dataset_id != test_corpus.dataset_id) {
        throw ConfigError("train file is dataset '" +
                          std::string(to_string(train_corpus.dataset_id)) +
                          "' but test file is '" +
                          std::string(to_string(test_corpus.dataset_id)) + "'");
    }

    ordered_json config;
    config["train"] = train_path;
    config["test"] = test_path;
    manifest.set_config(config);

    const BaselineModel model = fit_baseline(train_corpus.instances);
    const BaselineEval eval = evaluate_baseline(model, test_corpus.instances);

    EvalReport report;
    report.model_name = "baseline-majority";
    report.dataset = std::string(to_string(train_corpus.dataset_id));
    report.input_mode = "none";
    report.fine_tune = false;
    report.test_accuracy = eval.accuracy;
    report.correct = static_cast<long>(eval.correct);
    report.total = static_cast<long>(eval.total);
    for (Polarity p : train_corpus.label_inventory) {
        const auto pi = static_cast<std::size_t>(p);
        report.per_class.push_back({p, static_cast<long>(eval.per_class[0][pi]),
                                    static_cast<long>(eval.per_class[1][pi])});
    }
    report.fingerprint = fnv1a64_hex(model.to_json() + report.dataset);
    report.split_mode = "file";
    report.model_selection = "majority";

    manifest.write_artifact("baseline_model.json", model.to_json() + "\n");
    manifest.write_artifact("report.json", report.to_json_string() + "\n");
    manifest.write_artifact("report.txt", render_eval_text(report));
    manifest.finish();
    std::cout << render_eval_text(report);
    return 0;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const ModelFlags& flags) {
    RunSettings s = resolve_settings(flags);
    require(s.input, "input (corpus JSONL)");
    require(s.output, "output");
    require(s.vocab, "vocab");
    require(s.dataset, "dataset");

    ManifestBuilder manifest("train", s.output);
    manifest.set_seed(s.seed);
    manifest.add_input(s.input);
    manifest.add_input(s.vocab);

    LabeledCorpus corpus = load_corpus_jsonl(s.input);
    corpus = split(corpus, parse_split(s.split), s.seed);

    TrainConfig tc = to_train_config(s).resolved();
    tc.validate();
    std::optional<Classifier> warm;
    if (!s.checkpoint.empty()) {
        warm = load_checkpoint_model(s);
        check_label_match(*warm, corpus.label_inventory);
        warm->set_head_dropout(tc.head_dropout);
    }
    TokenizerHandle tokenizer =
        TokenizerHandle::load_file(s.vocab, effective_seq_len(s, warm ? &*warm : nullptr));
    Classifier model =
        warm ? std::move(*warm) : random_model(s, tc, tokenizer, corpus.label_inventory);
    manifest.set_config(settings_json(s, &tc));

    TrainOutcome outcome = train(corpus, tc, model, tokenizer);
    for (const std::string& w : outcome.warnings) {
        std::cerr << "warning: " << w;
    }

    const fs::path ckpt_dir = manifest.output_dir() / "checkpoint";
    model.save_checkpoint(ckpt_dir.string());
    manifest.note_artifact(ckpt_dir / "manifest.json");
    manifest.note_artifact(ckpt_dir / "weights.bin");

    manifest.write_artifact("report.json", outcome.report.to_json_string() + "\n");
    manifest.write_artifact("report.txt", render_eval_text(outcome.report));
    manifest.write_artifact("dev_curve.csv", outcome.report.dev_curve_csv());
    if (!outcome.warnings.empty()) {
        std::string all;
        for (const std::string& w : outcome.warnings) {
            all += w;
        }
        manifest.write_artifact("warnings.txt", all);
    }
    manifest.finish();
    std::cout << render_eval_text(outcome.report);
    return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const ModelFlags& flags) {
    RunSettings s = resolve_settings(flags);
    require(s.input, "input (instances JSONL)");
    require(s.output, "output");
    require(s.vocab, "vocab");
    require(s.checkpoint, "checkpoint");

    ManifestBuilder manifest("eval", s.output);
    manifest.set_seed(s.seed);
    manifest.add_input(s.input);
    manifest.add_input(s.vocab);

    LabeledCorpus corpus = load_corpus_jsonl(s.input);
    Classifier model = load_checkpoint_model(s);
    TokenizerHandle tokenizer =
        TokenizerHandle::load_file(s.vocab, effective_seq_len(s, &model));
    const InputMode mode = parse_mode(s.mode);
    manifest.set_config(settings_json(s, nullptr));

    TruncationReport trunc;
    const EvalCounts counts = evaluate(model, tokenizer, corpus.instances, mode, &trunc);

    EvalReport report;
    report.model_name = mode == InputMode::single ? "bert-single" : "bert-pair";
    report.dataset = std::string(to_string(corpus.dataset_id));
    report.input_mode = std::string(to_string(mode));
    report.fine_tune = model.encoder().config().fine_tune;
    report.test_accuracy = counts.accuracy;
    report.correct = counts.correct;
    report.total = counts.total;
    report.per_class = counts.per_class;
    report.fingerprint =
        fnv1a64_hex(model.fingerprint() + '|' + fnv1a64_hex(read_file(s.input)) + '|' +
                    std::string(to_string(mode)));
    report.split_mode = "file";
    report.truncation_count = static_cast<long>(trunc.count());
    report.model_selection = "as-loaded";
    report.seed = s.seed;

    manifest.write_artifact("report.json", report.to_json_string() + "\n");
    manifest.write_artifact("report.txt", render_eval_text(report));
    manifest.finish();
    std::cout << render_eval_text(report);
    return 0;
}

// ---------------------------------------------------------------------------
// compare

int cmd_compare(const ModelFlags& flags) {
    RunSettings s = resolve_settings(flags);
    require(s.input, "input (corpus JSONL)");
    require(s.output, "output");
    require(s.vocab, "vocab");
    require(s.dataset, "dataset");

    ManifestBuilder manifest("compare", s.output);
    manifest.set_seed(s.seed);
    manifest.add_input(s.input);
    manifest.add_input(s.vocab);

    LabeledCorpus corpus = load_corpus_jsonl(s.input);
    corpus = split(corpus, parse_split(s.split), s.seed);
    TrainConfig tc = to_train_config(s).resolved();
    tc.validate();
    std::optional<Classifier> warm;
    if (!s.checkpoint.empty()) {
        warm = load_checkpoint_model(s);
        check_label_match(*warm, corpus.label_inventory);
        warm->set_head_dropout(tc.head_dropout);
    }
    TokenizerHandle tokenizer =
        TokenizerHandle::load_file(s.vocab, effective_seq_len(s, warm ? &*warm : nullptr));
    Classifier initial =
        warm ? std::move(*warm) : random_model(s, tc, tokenizer, corpus.label_inventory);
    manifest.set_config(settings_json(s, &tc));

    CompareOutcome outcome = compare_finetune(corpus, tc, initial, tokenizer);
    if (!outcome.encoder_bit_identical) {
        throw ContractError("frozen arm mutated encoder parameters");
    }

    manifest.write_artifact("report_finetuned.json",
                            outcome.fine_tuned.to_json_string() + "\n");
    manifest.write_artifact("report_frozen.json", outcome.frozen.to_json_string() + "\n");
    manifest.write_artifact("comparison.txt", outcome.table_text);
    manifest.finish();
    std::cout << outcome.table_text;
    return 0;
}

// ---------------------------------------------------------------------------
// predict

int cmd_predict(const ModelFlags& flags) {
    RunSettings s = resolve_settings(flags);
    require(s.input, "input (cases JSON)");
    require(s.output, "output");
    require(s.vocab, "vocab");
    require(s.checkpoint, "checkpoint");

    ManifestBuilder manifest("predict", s.output);
    manifest.set_seed(s.seed);
    manifest.add_input(s.input);
    manifest.add_input(s.vocab);
    manifest.set_config(settings_json(s, nullptr));

    ordered_json doc;
    try {
        doc = ordered_json::parse(read_file(s.input));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("cannot parse cases file " + s.input + ": " + e.what());
    }
    if (!doc.is_array()) {
        throw ConfigError("cases file " + s.input +
                          " must hold a JSON array of {sentence, aspect} objects");
    }
    std::vector<PredictCase> cases;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("sentence") || !item.contains("aspect")) {
            throw ConfigError("each case needs 'sentence' and 'aspect' fields (" + s.input +
                              ")");
        }
        cases.push_back({item["sentence"].get<std::string>(),
                         item["aspect"].get<std::string>()});
    }

    Classifier model = load_checkpoint_model(s);
    TokenizerHandle tokenizer =
        TokenizerHandle::load_file(s.vocab, effective_seq_len(s, &model));
    const InputMode mode = parse_mode(s.mode);
    std::vector<CasePrediction> predictions = predict_cases(model, tokenizer, cases, mode);

    std::ostringstream lines;
    ordered_json out_json = ordered_json::array();
    for (const CasePrediction& p : predictions) {
        lines << to_string(p.label);
        ordered_json probs;
        for (std::size_t i = 0; i < p.probabilities.size(); ++i) {
            const auto label = model.labels().label_of(static_cast<int>(i));
            lines << ' ' << to_string(label) << '=' << std::fixed << std::setprecision(4)
                  << p.probabilities[i];
            probs[std::string(to_string(label))] = p.probabilities[i];
        }
        lines << '\n';
        out_json.push_back({{"sentence", p.input.sentence},
                            {"aspect", p.input.aspect},
                            {"label", std::string(to_string(p.label))},
                            {"probabilities", probs}});
    }

    manifest.write_artifact("predictions.txt", lines.str());
    manifest.write_artifact("predictions.json", out_json.dump(2) + "\n");
    manifest.finish();
    std::cout << lines.str();
    return 0;
}

// ---------------------------------------------------------------------------
// report

int cmd_report(const std::vector<std::string>& paths, const std::string& output,
               bool curves) {
    if (paths.empty()) {
        throw ConfigError("report needs at least one report JSON path");
    }
    ManifestBuilder manifest("report", output);
    ordered_json config;
    config["reports"] = paths;
    config["curves"] = curves;
    manifest.set_config(config);

    std::vector<LoadedReport> loaded;
    for (const std::string& path : paths) {
        manifest.add_input(path);
        loaded.push_back(parse_report(read_file(path), path));
    }
    ConsolidatedReports consolidated = consolidate_reports(loaded);
    for (const std::string& w : consolidated.warnings) {
        std::cerr << "warning: " << w << '\n';
    }

    manifest.write_artifact("summary.txt", consolidated.table_text);
    manifest.write_artifact("summary.json", consolidated.table_json + "\n");
    if (curves) {
        for (std::size_t i = 0; i < consolidated.unique.size(); ++i) {
            const LoadedReport& r = consolidated.unique[i];
            if (r.dev_curve.empty()) {
                continue;
            }
            const std::string name = "curve_" + std::to_string(i) + "_" + r.model + "_" +
                                     r.dataset + ".csv";
            manifest.write_artifact(name, report_curve_csv(r));
        }
    }
    manifest.finish();
    std::cout << consolidated.table_text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Arabic aspect-sentiment pipeline: ingest, baseline, train, evaluate,"
                 " compare, predict, report"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Parse a dataset XML into JSONL + stats");
    std::string ing_dataset, ing_output, ing_split;
    std::vector<std::string> ing_inputs;
    std::uint64_t ing_seed = 0;
    ingest->add_option("--dataset", ing_dataset, "haad, news, or hotels")->required();
    ingest->add_option("--input", ing_inputs,
                       "Input XML; give twice for official train then test")
        ->required();
    ingest->add_option("--output", ing_output, "Output directory")->required();
    ingest->add_option("--split", ing_split,
                       "Optional resplit: official (carves dev) or random");
    ingest->add_option("--seed", ing_seed, "Seed for the dev carve / random split");

    // baseline
    auto* baseline = app.add_subcommand("baseline", "Majority baseline: fit + evaluate");
    std::string bl_train, bl_test, bl_output;
    baseline->add_option("--train", bl_train, "Training JSONL")->required();
    baseline->add_option("--test", bl_test, "Test JSONL")->required();
    baseline->add_option("--output", bl_output, "Output directory")->required();

    auto* train_cmd = app.add_subcommand("train", "Fine-tune a classifier");
    ModelFlags train_flags;
    register_model_flags(train_cmd, train_flags);

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a JSONL file");
    ModelFlags eval_flags;
    register_model_flags(eval_cmd, eval_flags);

    auto* compare_cmd =
        app.add_subcommand("compare", "Fine-tuned vs frozen encoder, same init");
    ModelFlags compare_flags;
    register_model_flags(compare_cmd, compare_flags);

    auto* predict_cmd = app.add_subcommand("predict", "Label (sentence, aspect) cases");
    ModelFlags predict_flags;
    register_model_flags(predict_cmd, predict_flags);

    auto* report_cmd = app.add_subcommand("report", "Consolidate eval reports");
    std::vector<std::string> rep_paths;
    std::string rep_output;
    bool rep_curves = false;
    report_cmd->add_option("reports", rep_paths, "Report JSON paths")->required();
    report_cmd->add_option("--output", rep_output, "Output directory")->required();
    report_cmd->add_flag("--curves", rep_curves, "Also write per-report dev-curve CSVs");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) {
            return cmd_ingest(ing_dataset, ing_inputs, ing_output, ing_split, ing_seed);
        }
        if (baseline->parsed()) {
            return cmd_baseline(bl_train, bl_test, bl_output);
        }
        if (train_cmd->parsed()) {
            return cmd_train(train_flags);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(eval_flags);
        }
        if (compare_cmd->parsed()) {
            return cmd_compare(compare_flags);
        }
        if (predict_cmd->parsed()) {
            return cmd_predict(predict_flags);
        }
        if (report_cmd->parsed()) {
            return cmd_report(rep_paths, rep_output, rep_curves);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
