#include "absa/model.hpp"

#include "absa/digest.hpp"
#include "absa/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace absa {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kCheckpointVersion = 1;
constexpr const char* kCheckpointFormat = "absa-classifier";
constexpr const char* kCheckpointDtype = "float64-le";

Vector softmax_stable(const Vector& logits) {
    const double m = logits.maxCoeff();
    Vector e = (logits.array() - m).exp();
    return e / e.sum();
}

}  // namespace

Classifier::Classifier(TransformerEncoder encoder, LabelMap labels, double head_dropout,
                       std::uint64_t head_seed)
    : encoder_(std::move(encoder)), labels_(std::move(labels)) {
    if (labels_.size() < 2) {
        throw ConfigError("classifier needs at least two labels");
    }
    set_head_dropout(head_dropout);
    const int h = encoder_.config().hidden_size;
    const int k = labels_.size();
    w_ = Tensor("head.w", h, k);
    b_ = Tensor("head.b", 1, k);
    Rng rng(head_seed);
    for (Eigen::Index i = 0; i < w_.value.rows(); ++i) {
        for (Eigen::Index j = 0; j < w_.value.cols(); ++j) {
            w_.value(i, j) = rng.normal(0.0, 0.02);
        }
    }
}

Classifier Classifier::init_random(const EncoderConfig& config,
                                   const std::vector<Polarity>& inventory,
                                   double head_dropout, std::uint64_t seed) {
    // Derive distinct streams so encoder and head draws stay independent of each other.
    TransformerEncoder enc = TransformerEncoder::random_init(config, seed);
    return Classifier(std::move(enc), LabelMap(inventory), head_dropout, seed ^ 0x9e3779b97f4a7c15ULL);
}

void Classifier::set_head_dropout(double rate) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("head dropout rate must lie in [0, 1)");
    }
    head_dropout_ = rate;
}

Vector Classifier::head_logits(const Vector& h_cls) const {
    return w_.value.transpose() * h_cls + b_.value.row(0).transpose();
}

Vector Classifier::predict_probs(const EncodedExample& example) const {
    EncoderOutput out = encoder_.forward(example);
    Vector probs = softmax_stable(head_logits(out.cls_state));
    if (!probs.allFinite()) {
        throw NumericError("non-finite classifier probabilities");
    }
    return probs;
}

Polarity Classifier::predict_label(const EncodedExample& example) const {
    Vector probs = predict_probs(example);
    Eigen::Index best = 0;
    probs.maxCoeff(&best);
    return labels_.label_of(static_cast<int>(best));
}

double Classifier::loss_and_grads(const std::vector<EncodedExample>& batch,
                                  Rng* dropout_rng) {
    if (batch.empty()) {
        throw ConfigError("loss_and_grads requires a non-empty batch");
    }
    const int k = labels_.size();
    const int h = encoder_.config().hidden_size;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const bool head_drop = dropout_rng != nullptr && head_dropout_ > 0.0;
    double total_loss = 0.0;

    for (const EncodedExample& ex : batch) {
        if (ex.label_id < 0 || ex.label_id >= k) {
            throw ContractError("label id " + std::to_string(ex.label_id) +
                                " outside the " + std::to_string(k) + "-class head");
        }
        EncoderCache cache;
        EncoderOutput out = encoder_.forward(ex, dropout_rng, &cache);

        Vector h_cls = out.cls_state;
        Vector keep = Vector::Ones(h);
        if (head_drop) {
            const double keep_scale = 1.0 / (1.0 - head_dropout_);
            for (int i = 0; i < h; ++i) {
                keep(i) = dropout_rng->uniform() >= head_dropout_ ? keep_scale : 0.0;
            }
            h_cls = h_cls.cwiseProduct(keep);
        }

        Vector logits = head_logits(h_cls);
        const double m = logits.maxCoeff();
        const double lse = m + std::log((logits.array() - m).exp().sum());
        const double loss = lse - logits(ex.label_id);
        if (!std::isfinite(loss)) {
            throw NumericError("non-finite loss");
        }
        total_loss += loss;

        Vector dlogits = (logits.array() - lse).exp();  // = P
        dlogits(ex.label_id) -= 1.0;
        dlogits *= inv_b;

        w_.grad += h_cls * dlogits.transpose();
        b_.grad.row(0) += dlogits.transpose();

        if (encoder_.fine_tune()) {
            Vector dh = w_.value * dlogits;
            if (head_drop) {
                dh = dh.cwiseProduct(keep);
            }
            Matrix d_hidden = Matrix::Zero(out.hidden_states.rows(), h);
            d_hidden.row(0) = dh.transpose();
            encoder_.backward(cache, d_hidden);
        }
    }
    return total_loss * inv_b;
}

std::vector<Tensor*> Classifier::params() {
    std::vector<Tensor*> out = encoder_.params();
    out.push_back(&w_);
    out.push_back(&b_);
    return out;
}

void Classifier::zero_grads() {
    for (Tensor* p : params()) {
        p->zero_grad();
    }
}

std::size_t Classifier::parameter_count() const {
    return encoder_.parameter_count() + w_.count() + b_.count();
}

std::size_t Classifier::trainable_parameter_count() const {
    std::size_t n = encoder_.trainable_parameter_count();
    if (w_.trainable) n += w_.count();
    if (b_.trainable) n += b_.count();
    return n;
}

void Classifier::save_checkpoint(const std::string& dir) const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create checkpoint directory " + dir + ": " + ec.message());
    }
    auto* self = const_cast<Classifier*>(this);
    std::vector<Tensor*> tensors = self->params();

    const fs::path weights_path = fs::path(dir) / "weights.bin";
    std::ofstream weights(weights_path, std::ios::binary | std::ios::trunc);
    if (!weights) {
        throw IoError("cannot open " + weights_path.string() + " for writing");
    }
    Fnv1a64 digest;
    ordered_json table = ordered_json::array();
    std::size_t offset = 0;
    for (const Tensor* tsr : tensors) {
        const auto bytes = tsr->count() * sizeof(double);
        weights.write(reinterpret_cast<const char*>(tsr->value.data()),
                      static_cast<std::streamsize>(bytes));
        digest.update(tsr->value.data(), bytes);
        table.push_back({{"name", tsr->name},
                         {"rows", tsr->value.rows()},
                         {"cols", tsr->value.cols()},
                         {"offset", offset}});
        offset += tsr->count();
    }
    weights.flush();
    if (!weights) {
        throw IoError("failed writing " + weights_path.string());
    }

    const EncoderConfig& cfg = encoder_.config();
    ordered_json manifest;
    manifest["format"] = kCheckpointFormat;
    manifest["version"] = kCheckpointVersion;
    manifest["encoder"] = {{"checkpoint_id", cfg.checkpoint_id},
                           {"num_layers", cfg.num_layers},
                           {"num_heads", cfg.num_heads},
                           {"hidden_size", cfg.hidden_size},
                           {"intermediate_size", cfg.intermediate_size},
                           {"vocab_size", cfg.vocab_size},
                           {"max_position", cfg.max_position},
                           {"dropout_rate", cfg.dropout_rate},
                           {"fine_tune", cfg.fine_tune}};
    manifest["head_dropout"] = head_dropout_;
    ordered_json label_names = ordered_json::array();
    for (Polarity p : labels_.labels()) {
        label_names.push_back(std::string(to_string(p)));
    }
    manifest["labels"] = label_names;
    manifest["dtype"] = kCheckpointDtype;
    manifest["tensors"] = table;
    manifest["total_elements"] = offset;
    manifest["weights_digest"] = digest.hex();

    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    std::ofstream mf(manifest_path, std::ios::trunc);
    if (!mf) {
        throw IoError("cannot open " + manifest_path.string() + " for writing");
    }
    mf << manifest.dump(2) << '\n';
    if (!mf.flush()) {
        throw IoError("failed writing " + manifest_path.string());
    }
}

Classifier Classifier::load_checkpoint(const std::string& dir) {
    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    const fs::path weights_path = fs::path(dir) / "weights.bin";
    std::string missing;
    if (!fs::exists(manifest_path)) missing += "manifest.json";
    if (!fs::exists(weights_path)) missing += missing.empty() ? "weights.bin" : ", weights.bin";
    if (!missing.empty()) {
        throw LoadError("checkpoint at " + dir + " is missing: " + missing);
    }

    ordered_json manifest;
    {
        std::ifstream mf(manifest_path);
        try {
            mf >> manifest;
        } catch (const nlohmann::json::exception& e) {
            throw LoadError("cannot parse " + manifest_path.string() + ": " + e.what());
        }
    }

    Classifier model;
    try {
        if (manifest.at("format").get<std::string>() != kCheckpointFormat) {
            throw LoadError("unrecognized checkpoint format in " + manifest_path.string());
        }
        if (manifest.at("version").get<int>() != kCheckpointVersion) {
            throw LoadError("unsupported checkpoint version in " + manifest_path.string());
        }
        if (manifest.at("dtype").get<std::string>() != kCheckpointDtype) {
            throw LoadError("unsupported weight dtype in " + manifest_path.string());
        }
        const ordered_json& enc = manifest.at("encoder");
        EncoderConfig cfg;
        cfg.checkpoint_id = enc.at("checkpoint_id").get<std::string>();
        cfg.num_layers = enc.at("num_layers").get<int>();
        cfg.num_heads = enc.at("num_heads").get<int>();
        cfg.hidden_size = enc.at("hidden_size").get<int>();
        cfg.intermediate_size = enc.at("intermediate_size").get<int>();
        cfg.vocab_size = enc.at("vocab_size").get<int>();
        cfg.max_position = enc.at("max_position").get<int>();
        cfg.dropout_rate = enc.at("dropout_rate").get<double>();
        cfg.fine_tune = enc.at("fine_tune").get<bool>();

        std::vector<Polarity> inventory;
        for (const auto& name : manifest.at("labels")) {
            auto p = polarity_from_string(name.get<std::string>());
            if (!p) {
                throw LoadError("unknown label '" + name.get<std::string>() + "' in " +
                                manifest_path.string());
            }
            inventory.push_back(*p);
        }
        model = Classifier(TransformerEncoder(cfg), LabelMap(std::move(inventory)),
                           manifest.at("head_dropout").get<double>(), 0);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }

    std::vector<Tensor*> tensors = model.params();
    const ordered_json& table = manifest.at("tensors");
    if (table.size() != tensors.size()) {
        throw LoadError("manifest lists " + std::to_string(table.size()) +
                        " tensors, model defines " + std::to_string(tensors.size()));
    }
    std::size_t offset = 0;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const ordered_json& row = table[i];
        const std::string name = row.at("name").get<std::string>();
        const auto rows = row.at("rows").get<Eigen::Index>();
        const auto cols = row.at("cols").get<Eigen::Index>();
        if (name != tensors[i]->name || rows != tensors[i]->value.rows() ||
            cols != tensors[i]->value.cols()) {
            throw LoadError("tensor mismatch at index " + std::to_string(i) +
                            ": expected " + tensors[i]->name + " [" +
                            std::to_string(tensors[i]->value.rows()) + "x" +
                            std::to_string(tensors[i]->value.cols()) + "], found " + name +
                            " [" + std::to_string(rows) + "x" + std::to_string(cols) + "]");
        }
        if (row.at("offset").get<std::size_t>() != offset) {
            throw LoadError("tensor " + name + " has inconsistent offset");
        }
        offset += tensors[i]->count();
    }
    if (manifest.at("total_elements").get<std::size_t>() != offset) {
        throw LoadError("manifest total_elements disagrees with tensor table");
    }

    std::ifstream wf(weights_path, std::ios::binary | std::ios::ate);
    if (!wf) {
        throw LoadError("cannot open " + weights_path.string());
    }
    const auto file_bytes = static_cast<std::size_t>(wf.tellg());
    if (file_bytes != offset * sizeof(double)) {
        throw LoadError("weights file " + weights_path.string() + " holds " +
                        std::to_string(file_bytes) + " bytes, expected " +
                        std::to_string(offset * sizeof(double)));
    }
    wf.seekg(0);
    Fnv1a64 digest;
    for (Tensor* tsr : tensors) {
        const auto bytes = tsr->count() * sizeof(double);
        wf.read(reinterpret_cast<char*>(tsr->value.data()),
                static_cast<std::streamsize>(bytes));
        if (!wf) {
            throw LoadError("weights file " + weights_path.string() + " is truncated");
        }
        digest.update(tsr->value.data(), bytes);
    }
    if (digest.hex() != manifest.at("weights_digest").get<std::string>()) {
        throw LoadError("weights digest mismatch in " + weights_path.string());
    }

    model.encoder_.set_fine_tune(model.encoder_.config().fine_tune);
    return model;
}

std::string Classifier::fingerprint() const {
    Fnv1a64 h;
    const EncoderConfig& cfg = encoder_.config();
    std::ostringstream meta;
    meta << cfg.checkpoint_id << '|' << cfg.num_layers << '|' << cfg.num_heads << '|'
         << cfg.hidden_size << '|' << cfg.intermediate_size << '|' << cfg.vocab_size << '|'
         << cfg.max_position << '|' << cfg.dropout_rate << '|' << cfg.fine_tune << '|'
         << head_dropout_;
    for (Polarity p : labels_.labels()) {
        meta << '|' << to_string(p);
    }
    h.update(meta.str());
    auto* self = const_cast<Classifier*>(this);
    for (const Tensor* tsr : self->params()) {
        h.update(tsr->name);
        h.update(tsr->value.data(), tsr->count() * sizeof(double));
    }
    return h.hex();
}

}  // namespace absa
