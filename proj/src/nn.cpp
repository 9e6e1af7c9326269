#include "absa/nn.hpp"

#include "absa/errors.hpp"

namespace absa {

Adam::Adam(AdamConfig config, std::vector<Tensor*> params) : cfg_(config) {
    if (cfg_.learning_rate < 0.0) {
        throw ConfigError("Adam learning rate must be non-negative");
    }
    for (Tensor* p : params) {
        if (p != nullptr && p->trainable) {
            params_.push_back(p);
            m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
            v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        }
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const Matrix& g = params_[i]->grad;
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
        Matrix m_hat = m_[i] / bc1;
        Matrix v_hat = v_[i] / bc2;
        params_[i]->value.array() -=
            cfg_.learning_rate * m_hat.array() / (v_hat.array().sqrt() + cfg_.epsilon);
    }
}

}  // namespace absa
