#include "absa/encoder.hpp"

#include "absa/errors.hpp"

#include <cmath>

namespace absa {

namespace {

constexpr double kLnEpsilon = 1e-12;
constexpr double kMaskBias = -1e9;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kInitStddev = 0.02;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return cdf + x * pdf;
}

Matrix layer_norm_forward(const Matrix& x, const Tensor& gain, const Tensor& bias,
                          LayerNormCache& cache) {
    const Eigen::Index rows = x.rows();
    const Eigen::Index cols = x.cols();
    cache.xhat.resize(rows, cols);
    cache.inv_std.resize(rows);
    Matrix y(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double mu = x.row(i).mean();
        const double var = (x.row(i).array() - mu).square().mean();
        const double inv = 1.0 / std::sqrt(var + kLnEpsilon);
        cache.inv_std(i) = inv;
        cache.xhat.row(i) = (x.row(i).array() - mu) * inv;
        y.row(i) =
            cache.xhat.row(i).cwiseProduct(gain.value.row(0)) + bias.value.row(0);
    }
    return y;
}

Matrix layer_norm_backward(const Matrix& dy, Tensor& gain, Tensor& bias,
                           const LayerNormCache& cache) {
    const Eigen::Index rows = dy.rows();
    const Eigen::Index cols = dy.cols();
    gain.grad.row(0) += dy.cwiseProduct(cache.xhat).colwise().sum();
    bias.grad.row(0) += dy.colwise().sum();
    Matrix dx(rows, cols);
    const double n = static_cast<double>(cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        Eigen::RowVectorXd dxhat = dy.row(i).cwiseProduct(gain.value.row(0));
        const double mean_dxhat = dxhat.mean();
        const double mean_dxhat_xhat = dxhat.cwiseProduct(cache.xhat.row(i)).sum() / n;
        dx.row(i) = cache.inv_std(i) *
                    (dxhat.array() - mean_dxhat -
                     cache.xhat.row(i).array() * mean_dxhat_xhat);
    }
    return dx;
}

// Inverted dropout: multiplier 1/(1-p) for kept entries, 0 for dropped. Draw order is
// row-major so runs replay exactly for a fixed seed.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Matrix mask(rows, cols);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            mask(i, j) = rng.uniform() >= rate ? keep_scale : 0.0;
        }
    }
    return mask;
}

Matrix softmax_rows(const Matrix& scores) {
    Matrix probs(scores.rows(), scores.cols());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const double m = scores.row(i).maxCoeff();
        Eigen::RowVectorXd e = (scores.row(i).array() - m).exp();
        probs.row(i) = e / e.sum();
    }
    return probs;
}

Matrix softmax_rows_backward(const Matrix& probs, const Matrix& dprobs) {
    Matrix dscores(probs.rows(), probs.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const double dot = dprobs.row(i).cwiseProduct(probs.row(i)).sum();
        dscores.row(i) = (dprobs.row(i).array() - dot) * probs.row(i).array();
    }
    return dscores;
}

void fill_normal(Matrix& m, Rng& rng) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            m(i, j) = rng.normal(0.0, kInitStddev);
        }
    }
}

}  // namespace

TransformerEncoder::TransformerEncoder(const EncoderConfig& config) : cfg_(config) {
    if (cfg_.num_layers < 1 || cfg_.num_heads < 1 || cfg_.hidden_size < 1 ||
        cfg_.intermediate_size < 1 || cfg_.vocab_size < 1 || cfg_.max_position < 1) {
        throw ConfigError("encoder dimensions must all be positive");
    }
    if (cfg_.hidden_size % cfg_.num_heads != 0) {
        throw ConfigError("hidden size " + std::to_string(cfg_.hidden_size) +
                          " is not divisible by " + std::to_string(cfg_.num_heads) +
                          " heads");
    }
    if (cfg_.dropout_rate < 0.0 || cfg_.dropout_rate >= 1.0) {
        throw ConfigError("encoder dropout rate must lie in [0, 1)");
    }
    const int h = cfg_.hidden_size;
    const int f = cfg_.intermediate_size;
    word_emb_ = Tensor("embeddings.word", cfg_.vocab_size, h);
    pos_emb_ = Tensor("embeddings.position", cfg_.max_position, h);
    seg_emb_ = Tensor("embeddings.segment", 2, h);
    emb_ln_gain_ = Tensor("embeddings.ln.gain", 1, h);
    emb_ln_bias_ = Tensor("embeddings.ln.bias", 1, h);
    emb_ln_gain_.value.setOnes();
    layers_.resize(static_cast<std::size_t>(cfg_.num_layers));
    for (int l = 0; l < cfg_.num_layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        Layer& lay = layers_[static_cast<std::size_t>(l)];
        lay.wq = Tensor(p + "attn.wq", h, h);
        lay.bq = Tensor(p + "attn.bq", 1, h);
        lay.wk = Tensor(p + "attn.wk", h, h);
        lay.bk = Tensor(p + "attn.bk", 1, h);
        lay.wv = Tensor(p + "attn.wv", h, h);
        lay.bv = Tensor(p + "attn.bv", 1, h);
        lay.wo = Tensor(p + "attn.wo", h, h);
        lay.bo = Tensor(p + "attn.bo", 1, h);
        lay.ln1_gain = Tensor(p + "ln1.gain", 1, h);
        lay.ln1_bias = Tensor(p + "ln1.bias", 1, h);
        lay.w1 = Tensor(p + "ffn.w1", h, f);
        lay.b1 = Tensor(p + "ffn.b1", 1, f);
        lay.w2 = Tensor(p + "ffn.w2", f, h);
        lay.b2 = Tensor(p + "ffn.b2", 1, h);
        lay.ln2_gain = Tensor(p + "ln2.gain", 1, h);
        lay.ln2_bias = Tensor(p + "ln2.bias", 1, h);
        lay.ln1_gain.value.setOnes();
        lay.ln2_gain.value.setOnes();
    }
    set_fine_tune(cfg_.fine_tune);
}

TransformerEncoder TransformerEncoder::random_init(const EncoderConfig& config,
                                                   std::uint64_t seed) {
    TransformerEncoder enc(config);
    Rng rng(seed);
    fill_normal(enc.word_emb_.value, rng);
    fill_normal(enc.pos_emb_.value, rng);
    fill_normal(enc.seg_emb_.value, rng);
    for (Layer& lay : enc.layers_) {
        fill_normal(lay.wq.value, rng);
        fill_normal(lay.wk.value, rng);
        fill_normal(lay.wv.value, rng);
        fill_normal(lay.wo.value, rng);
        fill_normal(lay.w1.value, rng);
        fill_normal(lay.w2.value, rng);
    }
    return enc;
}

void TransformerEncoder::set_fine_tune(bool fine_tune) {
    cfg_.fine_tune = fine_tune;
    for (Tensor* t : params()) {
        t->trainable = fine_tune;
    }
}

void TransformerEncoder::validate_example(const EncodedExample& example) const {
    const std::size_t t = example.token_ids.size();
    if (t == 0) {
        throw ContractError("encoder forward requires a non-empty example");
    }
    if (example.segment_ids.size() != t || example.attention_mask.size() != t) {
        throw ContractError("encoded example arrays disagree in length");
    }
    if (static_cast<int>(t) > cfg_.max_position) {
        throw ContractError("example length " + std::to_string(t) +
                            " exceeds encoder maximum position " +
                            std::to_string(cfg_.max_position));
    }
    for (std::size_t i = 0; i < t; ++i) {
        if (example.token_ids[i] < 0 || example.token_ids[i] >= cfg_.vocab_size) {
            throw ContractError("token id " + std::to_string(example.token_ids[i]) +
                                " falls outside vocabulary of size " +
                                std::to_string(cfg_.vocab_size));
        }
        if (example.segment_ids[i] != 0 && example.segment_ids[i] != 1) {
            throw ContractError("segment ids must be 0 or 1");
        }
        if (example.attention_mask[i] != 0 && example.attention_mask[i] != 1) {
            throw ContractError("attention mask entries must be 0 or 1");
        }
    }
    if (example.attention_mask[0] != 1) {
        throw ContractError("the leading token must be unmasked");
    }
}

EncoderOutput TransformerEncoder::forward(const EncodedExample& example, Rng* dropout_rng,
                                          EncoderCache* cache) const {
    validate_example(example);
    EncoderCache scratch;
    EncoderCache& c = cache != nullptr ? *cache : scratch;
    c.token_ids = example.token_ids;
    c.segment_ids = example.segment_ids;
    c.attention_mask = example.attention_mask;
    c.layers.assign(layers_.size(), LayerCache{});

    const Eigen::Index t = static_cast<Eigen::Index>(example.token_ids.size());
    const Eigen::Index h = cfg_.hidden_size;
    const bool drop_active = dropout_rng != nullptr && cfg_.dropout_rate > 0.0;

    c.emb.resize(t, h);
    for (Eigen::Index i = 0; i < t; ++i) {
        c.emb.row(i) = word_emb_.value.row(example.token_ids[static_cast<std::size_t>(i)]) +
                       pos_emb_.value.row(i) +
                       seg_emb_.value.row(example.segment_ids[static_cast<std::size_t>(i)]);
    }
    Matrix x = layer_norm_forward(c.emb, emb_ln_gain_, emb_ln_bias_, c.ln_emb);
    if (drop_active) {
        c.drop_emb = dropout_mask(t, h, cfg_.dropout_rate, *dropout_rng);
        x = x.cwiseProduct(c.drop_emb);
    }
    c.x0 = x;

    const int nh = cfg_.num_heads;
    const Eigen::Index dk = h / nh;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& lay = layers_[l];
        LayerCache& lc = c.layers[l];
        lc.x = x;
        lc.q = (x * lay.wq.value).rowwise() + lay.bq.value.row(0);
        lc.k = (x * lay.wk.value).rowwise() + lay.bk.value.row(0);
        lc.v = (x * lay.wv.value).rowwise() + lay.bv.value.row(0);
        lc.probs.resize(static_cast<std::size_t>(nh));
        lc.ctx.resize(t, h);
        for (int head = 0; head < nh; ++head) {
            const Eigen::Index off = static_cast<Eigen::Index>(head) * dk;
            Matrix scores =
                lc.q.middleCols(off, dk) * lc.k.middleCols(off, dk).transpose() * scale;
            for (Eigen::Index j = 0; j < t; ++j) {
                if (example.attention_mask[static_cast<std::size_t>(j)] == 0) {
                    scores.col(j).array() += kMaskBias;
                }
            }
            lc.probs[static_cast<std::size_t>(head)] = softmax_rows(scores);
            lc.ctx.middleCols(off, dk) =
                lc.probs[static_cast<std::size_t>(head)] * lc.v.middleCols(off, dk);
        }
        Matrix attn_out = (lc.ctx * lay.wo.value).rowwise() + lay.bo.value.row(0);
        if (drop_active) {
            lc.drop_attn = dropout_mask(t, h, cfg_.dropout_rate, *dropout_rng);
            attn_out = attn_out.cwiseProduct(lc.drop_attn);
        }
        lc.x1 = layer_norm_forward(x + attn_out, lay.ln1_gain, lay.ln1_bias, lc.ln1);

        lc.u = (lc.x1 * lay.w1.value).rowwise() + lay.b1.value.row(0);
        lc.act = lc.u.unaryExpr([](double v) { return gelu(v); });
        Matrix ffn_out = (lc.act * lay.w2.value).rowwise() + lay.b2.value.row(0);
        if (drop_active) {
            lc.drop_ffn = dropout_mask(t, h, cfg_.dropout_rate, *dropout_rng);
            ffn_out = ffn_out.cwiseProduct(lc.drop_ffn);
        }
        x = layer_norm_forward(lc.x1 + ffn_out, lay.ln2_gain, lay.ln2_bias, lc.ln2);
        if (!x.allFinite()) {
            throw NumericError("non-finite activations after encoder layer " +
                               std::to_string(l));
        }
    }
    c.out = x;
    EncoderOutput out;
    out.hidden_states = x;
    out.cls_state = x.row(0).transpose();
    return out;
}

void TransformerEncoder::backward(const EncoderCache& cache, const Matrix& d_hidden) {
    if (!cfg_.fine_tune) {
        throw ContractError("encoder backward requires fine_tune");
    }
    if (cache.layers.size() != layers_.size()) {
        throw ContractError("encoder cache does not match this encoder");
    }
    const Eigen::Index t = cache.out.rows();
    const Eigen::Index h = cfg_.hidden_size;
    if (d_hidden.rows() != t || d_hidden.cols() != h) {
        throw ContractError("d_hidden shape does not match cached activations");
    }
    const int nh = cfg_.num_heads;
    const Eigen::Index dk = h / nh;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

    Matrix dx = d_hidden;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        Layer& lay = layers_[li];
        const LayerCache& lc = cache.layers[li];

        Matrix dr2 = layer_norm_backward(dx, lay.ln2_gain, lay.ln2_bias, lc.ln2);
        Matrix dx1 = dr2;
        Matrix dffn = lc.drop_ffn.size() > 0 ? dr2.cwiseProduct(lc.drop_ffn) : dr2;
        lay.w2.grad += lc.act.transpose() * dffn;
        lay.b2.grad.row(0) += dffn.colwise().sum();
        Matrix dact = dffn * lay.w2.value.transpose();
        Matrix du = dact.cwiseProduct(
            lc.u.unaryExpr([](double v) { return gelu_grad(v); }));
        lay.w1.grad += lc.x1.transpose() * du;
        lay.b1.grad.row(0) += du.colwise().sum();
        dx1 += du * lay.w1.value.transpose();

        Matrix dr1 = layer_norm_backward(dx1, lay.ln1_gain, lay.ln1_bias, lc.ln1);
        Matrix dx_in = dr1;
        Matrix dattn = lc.drop_attn.size() > 0 ? dr1.cwiseProduct(lc.drop_attn) : dr1;
        lay.wo.grad += lc.ctx.transpose() * dattn;
        lay.bo.grad.row(0) += dattn.colwise().sum();
        Matrix dctx = dattn * lay.wo.value.transpose();

        Matrix dq = Matrix::Zero(t, h);
        Matrix dkm = Matrix::Zero(t, h);
        Matrix dv = Matrix::Zero(t, h);
        for (int head = 0; head < nh; ++head) {
            const Eigen::Index off = static_cast<Eigen::Index>(head) * dk;
            const Matrix& probs = lc.probs[static_cast<std::size_t>(head)];
            Matrix dprobs = dctx.middleCols(off, dk) * lc.v.middleCols(off, dk).transpose();
            dv.middleCols(off, dk) = probs.transpose() * dctx.middleCols(off, dk);
            Matrix dscores = softmax_rows_backward(probs, dprobs);
            dq.middleCols(off, dk) = dscores * lc.k.middleCols(off, dk) * scale;
            dkm.middleCols(off, dk) = dscores.transpose() * lc.q.middleCols(off, dk) * scale;
        }
        lay.wq.grad += lc.x.transpose() * dq;
        lay.bq.grad.row(0) += dq.colwise().sum();
        lay.wk.grad += lc.x.transpose() * dkm;
        lay.bk.grad.row(0) += dkm.colwise().sum();
        lay.wv.grad += lc.x.transpose() * dv;
        lay.bv.grad.row(0) += dv.colwise().sum();
        dx_in += dq * lay.wq.value.transpose();
        dx_in += dkm * lay.wk.value.transpose();
        dx_in += dv * lay.wv.value.transpose();
        dx = dx_in;
    }

    if (cache.drop_emb.size() > 0) {
        dx = dx.cwiseProduct(cache.drop_emb);
    }
    Matrix demb = layer_norm_backward(dx, emb_ln_gain_, emb_ln_bias_, cache.ln_emb);
    for (Eigen::Index i = 0; i < t; ++i) {
        word_emb_.grad.row(cache.token_ids[static_cast<std::size_t>(i)]) += demb.row(i);
        pos_emb_.grad.row(i) += demb.row(i);
        seg_emb_.grad.row(cache.segment_ids[static_cast<std::size_t>(i)]) += demb.row(i);
    }
}

std::vector<Tensor*> TransformerEncoder::params() {
    std::vector<Tensor*> out;
    out.reserve(5 + layers_.size() * 16);
    out.push_back(&word_emb_);
    out.push_back(&pos_emb_);
    out.push_back(&seg_emb_);
    out.push_back(&emb_ln_gain_);
    out.push_back(&emb_ln_bias_);
    for (Layer& lay : layers_) {
        out.push_back(&lay.wq);
        out.push_back(&lay.bq);
        out.push_back(&lay.wk);
        out.push_back(&lay.bk);
        out.push_back(&lay.wv);
        out.push_back(&lay.bv);
        out.push_back(&lay.wo);
        out.push_back(&lay.bo);
        out.push_back(&lay.ln1_gain);
        out.push_back(&lay.ln1_bias);
        out.push_back(&lay.w1);
        out.push_back(&lay.b1);
        out.push_back(&lay.w2);
        out.push_back(&lay.b2);
        out.push_back(&lay.ln2_gain);
        out.push_back(&lay.ln2_bias);
    }
    return out;
}

std::vector<const Tensor*> TransformerEncoder::params() const {
    auto mutable_params = const_cast<TransformerEncoder*>(this)->params();
    return {mutable_params.begin(), mutable_params.end()};
}

void TransformerEncoder::zero_grads() {
    for (Tensor* p : params()) {
        p->zero_grad();
    }
}

std::size_t TransformerEncoder::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor* p : params()) {
        n += p->count();
    }
    return n;
}

std::size_t TransformerEncoder::trainable_parameter_count() const {
    std::size_t n = 0;
    for (const Tensor* p : params()) {
        if (p->trainable) {
            n += p->count();
        }
    }
    return n;
}

void TransformerEncoder::verify_shape(int num_layers, int num_heads, int hidden_size) const {
    if (num_layers != cfg_.num_layers || num_heads != cfg_.num_heads ||
        hidden_size != cfg_.hidden_size) {
        throw LoadError("encoder shape mismatch: expected layers=" +
                        std::to_string(num_layers) + " heads=" + std::to_string(num_heads) +
                        " hidden=" + std::to_string(hidden_size) + ", found layers=" +
                        std::to_string(cfg_.num_layers) + " heads=" +
                        std::to_string(cfg_.num_heads) + " hidden=" +
                        std::to_string(cfg_.hidden_size));
    }
}

}  // namespace absa
