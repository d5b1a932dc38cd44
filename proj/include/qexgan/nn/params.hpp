#ifndef QEXGAN_NN_PARAMS_HPP
#define QEXGAN_NN_PARAMS_HPP

#include <cmath>
#include <string>
#include <vector>

#include "qexgan/common.hpp"

namespace qexgan {

/// Named dense parameter arrays with paired gradients. Entry order is the
/// insertion order, which pins checkpoint layout and optimizer traversal.
template <typename Scalar>
struct ParamStore {
    using Matrix = MatrixX<Scalar>;

    struct Entry {
        std::string name;
        Matrix value;
        Matrix grad;
        bool trainable = true;
    };

    std::vector<Entry> entries;

    int add(std::string name, Eigen::Index rows, Eigen::Index cols, bool trainable = true) {
        Entry entry;
        entry.name = std::move(name);
        entry.value = Matrix::Zero(rows, cols);
        entry.grad = Matrix::Zero(rows, cols);
        entry.trainable = trainable;
        entries.push_back(std::move(entry));
        return static_cast<int>(entries.size()) - 1;
    }

    Matrix& value(int handle) { return entries[static_cast<std::size_t>(handle)].value; }
    const Matrix& value(int handle) const {
        return entries[static_cast<std::size_t>(handle)].value;
    }
    Matrix& grad(int handle) { return entries[static_cast<std::size_t>(handle)].grad; }

    void zero_grads() {
        for (auto& entry : entries) entry.grad.setZero();
    }

    std::size_t scalar_count(bool trainable_only) const {
        std::size_t n = 0;
        for (const auto& entry : entries) {
            if (!trainable_only || entry.trainable) {
                n += static_cast<std::size_t>(entry.value.size());
            }
        }
        return n;
    }
};

/// Fills every ".weight" entry from U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with
/// fan_in = row count; draw order follows entry insertion order.
template <typename Scalar>
void seed_uniform_weights(ParamStore<Scalar>& store, Rng& rng) {
    for (auto& entry : store.entries) {
        if (!entry.name.ends_with(".weight")) continue;
        const Scalar bound = Scalar(1) / std::sqrt(Scalar(entry.value.rows()));
        for (Eigen::Index r = 0; r < entry.value.rows(); ++r) {
            for (Eigen::Index c = 0; c < entry.value.cols(); ++c) {
                entry.value(r, c) = Scalar(rng.uniform(-double(bound), double(bound)));
            }
        }
    }
}

template <typename Scalar>
struct AdamOptimizer {
    Scalar learning_rate;
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar epsilon = Scalar(1e-8);
    long long step_count = 0;
    std::vector<MatrixX<Scalar>> first_moment;
    std::vector<MatrixX<Scalar>> second_moment;

    AdamOptimizer(const ParamStore<Scalar>& store, Scalar lr) : learning_rate(lr) {
        first_moment.reserve(store.entries.size());
        second_moment.reserve(store.entries.size());
        for (const auto& entry : store.entries) {
            first_moment.push_back(MatrixX<Scalar>::Zero(entry.value.rows(), entry.value.cols()));
            second_moment.push_back(MatrixX<Scalar>::Zero(entry.value.rows(), entry.value.cols()));
        }
    }

    void step(ParamStore<Scalar>& store) {
        ++step_count;
        const Scalar bias1 = Scalar(1) - std::pow(beta1, Scalar(step_count));
        const Scalar bias2 = Scalar(1) - std::pow(beta2, Scalar(step_count));
        for (std::size_t i = 0; i < store.entries.size(); ++i) {
            auto& entry = store.entries[i];
            if (!entry.trainable) continue;
            first_moment[i] = beta1 * first_moment[i] + (Scalar(1) - beta1) * entry.grad;
            second_moment[i] =
                beta2 * second_moment[i] +
                (Scalar(1) - beta2) * entry.grad.cwiseProduct(entry.grad);
            entry.value.array() -=
                learning_rate * (first_moment[i].array() / bias1) /
                ((second_moment[i].array() / bias2).sqrt() + epsilon);
        }
    }
};

}  // namespace qexgan

#endif
