#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace absa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A named parameter with its gradient accumulator. Biases are [1 x n] rows.
struct Tensor {
    std::string name;
    Matrix value;
    Matrix grad;
    bool trainable = true;

    Tensor() = default;
    Tensor(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

    void zero_grad() { grad.setZero(); }
    std::size_t count() const { return static_cast<std::size_t>(value.size()); }
};

// Deterministic RNG used for init, dropout, and shuffles in model code. Box-Muller on
// explicit 53-bit uniforms so draws are identical on every platform (std
// distributions are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double normal(double mean, double stddev) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        constexpr double kTwoPi = 6.283185307179586476925287;
        double theta = kTwoPi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return mean + stddev * r * std::cos(theta);
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

struct AdamConfig {
    double learning_rate = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam over the trainable subset of the given tensors. Non-trainable tensors are never
// read or written, which is what keeps frozen encoders bit-identical.
class Adam {
public:
    Adam(AdamConfig config, std::vector<Tensor*> params);

    void step();
    long steps_taken() const { return t_; }

private:
    AdamConfig cfg_;
    std::vector<Tensor*> params_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    long t_ = 0;
};

}  // namespace absa
