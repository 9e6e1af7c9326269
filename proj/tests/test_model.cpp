#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "absa/encoding.hpp"
#include "absa/errors.hpp"
#include "absa/model.hpp"
#include "absa/nn.hpp"
#include "absa/tokenizer.hpp"

using namespace absa;
namespace fs = std::filesystem;

namespace {

TokenizerHandle fixture_tokenizer(int max_len = 12) {
    return TokenizerHandle::load_file(std::string(ABSA_FIXTURE_DIR) + "/vocab_mini.txt",
                                      max_len);
}

EncoderConfig tiny_config(const TokenizerHandle& tok) {
    EncoderConfig cfg;
    cfg.checkpoint_id = "tiny-test";
    cfg.num_layers = 2;
    cfg.num_heads = 2;
    cfg.hidden_size = 8;
    cfg.intermediate_size = 16;
    cfg.vocab_size = tok.vocab_size();
    cfg.max_position = 16;
    cfg.dropout_rate = 0.0;
    cfg.fine_tune = true;
    return cfg;
}

AspectInstance make(const std::string& sentence, const std::string& aspect,
                    Polarity p = Polarity::positive) {
    AspectInstance inst;
    inst.dataset_id = DatasetId::haad;
    inst.review_id = "r";
    inst.sentence_id = "s";
    inst.sentence_text = sentence;
    inst.aspect_text = aspect;
    inst.polarity = p;
    return inst;
}

Tensor* find_param(Classifier& model, const std::string& name) {
    for (Tensor* t : model.params()) {
        if (t->name == name) return t;
    }
    return nullptr;
}

struct Probe {
    TokenizerHandle tok = fixture_tokenizer();
    LabelMap labels{label_inventory(DatasetId::haad)};
    std::vector<EncodedExample> batch;

    Probe() {
        batch.push_back(encode_pair(make("القصة رائعة جدا", "القصة"), tok, labels));
        batch.push_back(
            encode_pair(make("الكتاب ممل جدا", "الكتاب", Polarity::negative), tok, labels));
        batch.push_back(
            encode_pair(make("لا رأي في الكتاب", "الكتاب", Polarity::neutral), tok, labels));
    }
};

fs::path temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("absa_model_test_" + tag);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("random init is seeded and shaped") {
    TokenizerHandle tok = fixture_tokenizer();
    EncoderConfig cfg = tiny_config(tok);
    Classifier a = Classifier::init_random(cfg, label_inventory(DatasetId::haad), 0.3, 7);
    Classifier b = Classifier::init_random(cfg, label_inventory(DatasetId::haad), 0.3, 7);
    Classifier c = Classifier::init_random(cfg, label_inventory(DatasetId::haad), 0.3, 8);
    CHECK(a.num_classes() == 4);
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.fingerprint() != c.fingerprint());
    CHECK(a.parameter_count() ==
          a.encoder().parameter_count() + 8 * 4 + 4);
    CHECK(a.trainable_parameter_count() == a.parameter_count());
}

TEST_CASE("encoder output exposes the cls row and finite activations") {
    Probe p;
    Classifier model =
        Classifier::init_random(tiny_config(p.tok), label_inventory(DatasetId::haad), 0.0, 3);
    EncoderOutput out = model.encoder().forward(p.batch[0]);
    CHECK(out.hidden_states.rows() == 12);
    CHECK(out.hidden_states.cols() == 8);
    CHECK(out.cls_state.size() == 8);
    CHECK((out.cls_state.transpose() - out.hidden_states.row(0)).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK(out.hidden_states.allFinite());
}

TEST_CASE("zeroed head gives the uniform distribution") {
    Probe p;
    Classifier model =
        Classifier::init_random(tiny_config(p.tok), label_inventory(DatasetId::haad), 0.0, 3);
    find_param(model, "head.w")->value.setZero();
    find_param(model, "head.b")->value.setZero();
    Vector probs = model.predict_probs(p.batch[0]);
    REQUIRE(probs.size() == 4);
    for (int i = 0; i < 4; ++i) {
        CHECK(probs(i) == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("dominant bias saturates its class") {
    Probe p;
    Classifier model =
        Classifier::init_random(tiny_config(p.tok), label_inventory(DatasetId::haad), 0.0, 3);
    find_param(model, "head.w")->value.setZero();
    Tensor* b = find_param(model, "head.b");
    b->value.setZero();
    b->value(0, 0) = 10.0;
    Vector probs = model.predict_probs(p.batch[0]);
    CHECK(probs(0) > 0.999);
    CHECK(model.predict_label(p.batch[0]) == Polarity::positive);
}

TEST_CASE("probabilities normalize, stay in (0,1), and are deterministic") {
    Probe p;
    Classifier model =
        Classifier::init_random(tiny_config(p.tok), label_inventory(DatasetId::haad), 0.2, 9);
    for (const EncodedExample& ex : p.batch) {
        Vector probs = model.predict_probs(ex);
        CHECK(std::abs(probs.sum() - 1.0) < 1e-6);
        for (int i = 0; i < probs.size(); ++i) {
            CHECK(probs(i) > 0.0);
            CHECK(probs(i) < 1.0);
        }
        Vector again = model.predict_probs(ex);
        CHECK((probs - again).cwiseAbs().maxCoeff() == 0.0);  // dropout off at inference
    }
}

TEST_CASE("softmax shift invariance in the bias") {
    Probe p;
    Classifier model =
        Classifier::init_random(tiny_config(p.tok), label_inventory(DatasetId::haad), 0.0, 9);
    Vector before = model.predict_probs(p.batch[1]);
    find_param(model, "head.b")->value.array() += 123.0;
    Vector after = model.predict_probs(p.batch[1]);
    CHECK((before - after).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("loss analytics: uniform gives ln K, saturated gives near zero") {
    Probe p;
    Classifier model =
        Classifier::init_random(tiny_config(p.tok), label_inventory(DatasetId::haad), 0.0, 5);
    find_param(model, "head.w")->value.setZero();
    find_param(model, "head.b")->value.setZero();

    std::vector<EncodedExample> one = {p.batch[0]};
    model.zero_grads();
    CHECK(model.loss_and_grads(one, nullptr) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));

    // Saturate the gold class (label id 0): loss collapses towards zero.
    find_param(model, "head.b")->value(0, 0) = 50.0;
    model.zero_grads();
    CHECK(model.loss_and_grads(one, nullptr) == doctest::Approx(0.0).epsilon(1e-9));

    // Gold id outside the head is a caller bug.
    std::vector<EncodedExample> bad = {p.batch[0]};
    bad[0].label_id = 4;
    CHECK_THROWS_AS(model.loss_and_grads(bad, nullptr), ContractError);
}

TEST_CASE("head gradients match central finite differences") {
    Probe p;
    Classifier model =
        Classifier::init_random(tiny_config(p.tok), label_inventory(DatasetId::haad), 0.0, 13);
    model.zero_grads();
    const double base_unused = model.loss_and_grads(p.batch, nullptr);
    (void)base_unused;
    const Matrix w_grad = find_param(model, "head.w")->grad;
    const Matrix b_grad = find_param(model, "head.b")->grad;

    auto loss_at = [&](Classifier& m) {
        m.zero_grads();
        return m.loss_and_grads(p.batch, nullptr);
    };

    const double h = 1e-6;
    double max_rel = 0.0;
    for (const char* name : {"head.w", "head.b"}) {
        const Matrix& analytic = name == std::string("head.w") ? w_grad : b_grad;
        Tensor* t = find_param(model, name);
        for (Eigen::Index r = 0; r < t->value.rows(); ++r) {
            for (Eigen::Index c = 0; c < t->value.cols(); ++c) {
                const double saved = t->value(r, c);
                t->value(r, c) = saved + h;
                const double up = loss_at(model);
                t->value(r, c) = saved - h;
                const double down = loss_at(model);
                t->value(r, c) = saved;
                const double fd = (up - down) / (2.0 * h);
                const double rel = std::abs(fd - analytic(r, c)) /
                                   std::max(1.0, std::abs(analytic(r, c)));
                max_rel = std::max(max_rel, rel);
            }
        }
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("encoder gradients match finite differences at sampled entries") {
    Probe p;
    Classifier model =
        Classifier::init_random(tiny_config(p.tok), label_inventory(DatasetId::haad), 0.0, 17);
    model.zero_grads();
    model.loss_and_grads(p.batch, nullptr);

    auto loss_at = [&](Classifier& m) {
        m.zero_grads();
        return m.loss_and_grads(p.batch, nullptr);
    };

    // A few entries across qualitatively different tensors: embeddings, attention,
    // FFN, layer norm. Index (1,1) exists in all of them.
    const double h = 1e-6;
    for (const char* name : {"embeddings.word", "layer0.attn.wq", "layer0.ffn.w1",
                             "layer1.ln2.gain", "layer1.attn.wo"}) {
        Tensor* t = find_param(model, name);
        REQUIRE(t != nullptr);
        for (auto [r, c] : {std::pair<int, int>{0, 0}, {1, 1}}) {
            // embeddings.word row 0 is [PAD]; use the [CLS] row instead, it is live.
            int row = r;
            if (name == std::string("embeddings.word") && row == 0) row = 2;
            const double analytic = t->grad(row, c);
            const double saved = t->value(row, c);
            t->value(row, c) = saved + h;
            const double up = loss_at(model);
            t->value(row, c) = saved - h;
            const double down = loss_at(model);
            t->value(row, c) = saved;
            const double fd = (up - down) / (2.0 * h);
            CHECK(std::abs(fd - analytic) < 1e-4 * std::max(1.0, std::abs(analytic)));
        }
    }
}

TEST_CASE("padding embedding rows receive no gradient") {
    Probe p;
    Classifier model =
        Classifier::init_random(tiny_config(p.tok), label_inventory(DatasetId::haad), 0.0, 19);
    model.zero_grads();
    model.loss_and_grads(p.batch, nullptr);  // batch examples all carry padding
    Tensor* word = find_param(model, "embeddings.word");
    CHECK(word->grad.row(p.tok.pad_id()).cwiseAbs().maxCoeff() == 0.0);
    // Pad positions sit at the sequence tail; their position rows stay untouched too.
    Tensor* pos = find_param(model, "embeddings.position");
    CHECK(pos->grad.row(11).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("frozen encoder blocks backward and keeps zero encoder grads") {
    Probe p;
    Classifier model =
        Classifier::init_random(tiny_config(p.tok), label_inventory(DatasetId::haad), 0.0, 23);
    model.encoder().set_fine_tune(false);
    CHECK(model.encoder().trainable_parameter_count() == 0);
    CHECK(model.trainable_parameter_count() == 8 * 4 + 4);

    EncoderCache cache;
    model.encoder().forward(p.batch[0], nullptr, &cache);
    Matrix d = Matrix::Zero(12, 8);
    CHECK_THROWS_AS(model.encoder().backward(cache, d), ContractError);

    model.zero_grads();
    model.loss_and_grads(p.batch, nullptr);
    for (const Tensor* t : model.encoder().params()) {
        CHECK(t->grad.isZero(0.0));
    }
    CHECK_FALSE(find_param(model, "head.w")->grad.isZero(0.0));
}

TEST_CASE("head dropout draws from the rng and keeps inference clean") {
    Probe p;
    Classifier model =
        Classifier::init_random(tiny_config(p.tok), label_inventory(DatasetId::haad), 0.5, 29);
    std::vector<EncodedExample> one = {p.batch[0]};

    // Same rng seed, same loss; different seeds, almost surely different dropout masks.
    model.zero_grads();
    Rng r1(100);
    const double l1 = model.loss_and_grads(one, &r1);
    model.zero_grads();
    Rng r2(100);
    const double l2 = model.loss_and_grads(one, &r2);
    CHECK(l1 == l2);
    model.zero_grads();
    Rng r3(101);
    const double l3 = model.loss_and_grads(one, &r3);
    CHECK(l1 != l3);

    // Null rng path is dropout-free and matches -log P[gold] from inference.
    model.zero_grads();
    const double plain = model.loss_and_grads(one, nullptr);
    const Vector probs = model.predict_probs(one[0]);
    CHECK(plain == doctest::Approx(-std::log(probs(one[0].label_id))).epsilon(1e-12));
}

TEST_CASE("checkpoint round-trip preserves outputs and metadata") {
    Probe p;
    Classifier model =
        Classifier::init_random(tiny_config(p.tok), label_inventory(DatasetId::haad), 0.25, 31);
    model.encoder().set_fine_tune(false);
    const fs::path dir = temp_dir("roundtrip");
    model.save_checkpoint(dir.string());

    Classifier back = Classifier::load_checkpoint(dir.string());
    CHECK(back.fingerprint() == model.fingerprint());
    CHECK(back.head_dropout() == 0.25);
    CHECK_FALSE(back.encoder().fine_tune());
    CHECK(back.labels() == model.labels());
    for (const EncodedExample& ex : p.batch) {
        Vector before = model.predict_probs(ex);
        Vector after = back.predict_probs(ex);
        CHECK((before - after).cwiseAbs().maxCoeff() < 1e-6);
    }

    // The manifest records the flags in the clear.
    std::ifstream manifest(dir / "manifest.json");
    std::stringstream buf;
    buf << manifest.rdbuf();
    CHECK(buf.str().find("\"fine_tune\"") != std::string::npos);
    CHECK(buf.str().find("\"dropout_rate\"") != std::string::npos);
    CHECK(buf.str().find("\"head_dropout\"") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("checkpoint load is fail-closed") {
    Probe p;
    Classifier model =
        Classifier::init_random(tiny_config(p.tok), label_inventory(DatasetId::haad), 0.3, 37);

    SUBCASE("missing directory") {
        CHECK_THROWS_AS(Classifier::load_checkpoint("/nonexistent/ckpt"), LoadError);
    }

    SUBCASE("missing weights blob is named") {
        const fs::path dir = temp_dir("missing");
        model.save_checkpoint(dir.string());
        fs::remove(dir / "weights.bin");
        try {
            Classifier::load_checkpoint(dir.string());
            FAIL("expected LoadError");
        } catch (const LoadError& e) {
            CHECK(std::string(e.what()).find("weights.bin") != std::string::npos);
        }
        fs::remove_all(dir);
    }

    SUBCASE("truncated weights blob") {
        const fs::path dir = temp_dir("truncated");
        model.save_checkpoint(dir.string());
        const auto full = fs::file_size(dir / "weights.bin");
        fs::resize_file(dir / "weights.bin", full - 16);
        CHECK_THROWS_AS(Classifier::load_checkpoint(dir.string()), LoadError);
        fs::remove_all(dir);
    }

    SUBCASE("corrupted bytes break the digest") {
        const fs::path dir = temp_dir("corrupt");
        model.save_checkpoint(dir.string());
        std::fstream f(dir / "weights.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(64);
        const char junk[8] = {0x7f, 0x7f, 0x7f, 0x7f, 0x7f, 0x7f, 0x7f, 0x7f};
        f.write(junk, sizeof junk);
        f.close();
        try {
            Classifier::load_checkpoint(dir.string());
            FAIL("expected LoadError");
        } catch (const LoadError& e) {
            CHECK(std::string(e.what()).find("digest") != std::string::npos);
        }
        fs::remove_all(dir);
    }

    SUBCASE("label inventory clashing with the stored head is rejected") {
        const fs::path dir = temp_dir("labels");
        model.save_checkpoint(dir.string());
        std::ifstream in(dir / "manifest.json");
        nlohmann::json manifest = nlohmann::json::parse(in);
        in.close();
        REQUIRE(manifest["labels"].size() == 4);
        manifest["labels"].erase(3);  // K becomes 3; the stored 8x4 head no longer fits
        std::ofstream out(dir / "manifest.json", std::ios::trunc);
        out << manifest.dump(2);
        out.close();
        CHECK_THROWS_AS(Classifier::load_checkpoint(dir.string()), LoadError);
        fs::remove_all(dir);
    }
}

TEST_CASE("verify_shape names expected vs found") {
    Probe p;
    Classifier model =
        Classifier::init_random(tiny_config(p.tok), label_inventory(DatasetId::haad), 0.3, 41);
    model.encoder().verify_shape(2, 2, 8);  // matching shape passes
    try {
        model.encoder().verify_shape(12, 12, 768);
        FAIL("expected LoadError");
    } catch (const LoadError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("12") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
    }
}

TEST_CASE("oversized examples are rejected before any math") {
    TokenizerHandle tok = fixture_tokenizer(32);  // longer than max_position = 16
    LabelMap labels{label_inventory(DatasetId::haad)};
    Classifier model =
        Classifier::init_random(tiny_config(tok), labels.labels(), 0.0, 43);
    std::string sentence;
    for (int i = 0; i < 40; ++i) sentence += "good ";
    EncodedExample ex = encode_pair(make(sentence, "bad"), tok, labels);
    CHECK(ex.token_ids.size() == 32);
    CHECK_THROWS_AS(model.predict_probs(ex), ContractError);
}

TEST_CASE("encoder config validation") {
    TokenizerHandle tok = fixture_tokenizer();
    EncoderConfig cfg = tiny_config(tok);
    cfg.hidden_size = 9;  // not divisible by num_heads = 2
    CHECK_THROWS_AS(TransformerEncoder::random_init(cfg, 1), ConfigError);
    cfg = tiny_config(tok);
    cfg.dropout_rate = 1.0;
    CHECK_THROWS_AS(TransformerEncoder::random_init(cfg, 1), ConfigError);
    cfg = tiny_config(tok);
    cfg.vocab_size = 0;
    CHECK_THROWS_AS(TransformerEncoder::random_init(cfg, 1), ConfigError);
}
