#ifndef QEXGAN_NN_OPS_HPP
#define QEXGAN_NN_OPS_HPP

#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "qexgan/common.hpp"

namespace qexgan {

/// Row-wise softmax with max subtraction.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    MatrixX<Scalar> out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const Scalar row_max = logits.row(i).maxCoeff();
        out.row(i) = (logits.row(i).array() - row_max).exp();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

/// d(loss)/d(logits) given the softmax output and d(loss)/d(softmax).
template <typename Scalar>
MatrixX<Scalar> softmax_rows_backward(const MatrixX<Scalar>& probs,
                                      const MatrixX<Scalar>& dprobs) {
    MatrixX<Scalar> dlogits(probs.rows(), probs.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const Scalar dot = probs.row(i).cwiseProduct(dprobs.row(i)).sum();
        dlogits.row(i) = (probs.row(i).array() * (dprobs.row(i).array() - dot)).matrix();
    }
    return dlogits;
}

template <typename Scalar>
Scalar log_sum_exp(const VectorX<Scalar>& logits) {
    const Scalar m = logits.maxCoeff();
    return m + std::log((logits.array() - m).exp().sum());
}

/// Fixed sinusoidal position table. Even columns carry sin, odd columns cos,
/// both at wavelength 10000^(2i/dim).
template <typename Scalar>
MatrixX<Scalar> sinusoidal_positions(Eigen::Index positions, Eigen::Index dim) {
    MatrixX<Scalar> table(positions, dim);
    for (Eigen::Index pos = 0; pos < positions; ++pos) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            const double exponent = double(2 * (j / 2)) / double(dim);
            const double angle = double(pos) / std::pow(10000.0, exponent);
            table(pos, j) =
                static_cast<Scalar>((j % 2 == 0) ? std::sin(angle) : std::cos(angle));
        }
    }
    return table;
}

/// Inverted dropout mask: entries are 0 with probability p, else 1/(1-p).
template <typename Scalar>
MatrixX<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
    MatrixX<Scalar> mask(rows, cols);
    const Scalar scale = static_cast<Scalar>(1.0 / (1.0 - p));
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            mask(i, j) = rng.uniform() < p ? Scalar(0) : scale;
        }
    }
    return mask;
}

template <typename Scalar>
constexpr Scalar neg_infinity() {
    return -std::numeric_limits<Scalar>::infinity();
}

}  // namespace qexgan

#endif
