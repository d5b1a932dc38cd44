#ifndef QEXGAN_NN_TRANSFORMER_HPP
#define QEXGAN_NN_TRANSFORMER_HPP

#include <cmath>
#include <string>
#include <vector>

#include "qexgan/nn/ops.hpp"
#include "qexgan/nn/params.hpp"

namespace qexgan {

// Hand-rolled transformer blocks (post-norm) with explicit forward caches so
// every backward pass is analytic. Activations are (positions x features).

template <typename Scalar>
struct LinearLayer {
    int weight = -1;  // (in x out)
    int bias = -1;    // (out x 1)

    void create(ParamStore<Scalar>& store, const std::string& name, Eigen::Index in,
                Eigen::Index out) {
        weight = store.add(name + ".weight", in, out);
        bias = store.add(name + ".bias", out, 1);
    }

    MatrixX<Scalar> forward(const ParamStore<Scalar>& store, const MatrixX<Scalar>& x) const {
        return (x * store.value(weight)).rowwise() + store.value(bias).col(0).transpose();
    }

    /// Accumulates parameter gradients and returns d(loss)/d(input).
    MatrixX<Scalar> backward(ParamStore<Scalar>& store, const MatrixX<Scalar>& x,
                             const MatrixX<Scalar>& dy) const {
        store.grad(weight) += x.transpose() * dy;
        store.grad(bias).col(0) += dy.colwise().sum().transpose();
        return dy * store.value(weight).transpose();
    }
};

template <typename Scalar>
struct LayerNormCache {
    MatrixX<Scalar> normalized;   // (x - mean) / std
    VectorX<Scalar> inv_std;      // per row
};

template <typename Scalar>
struct LayerNorm {
    static constexpr Scalar kEpsilon = Scalar(1e-5);
    int gamma = -1;
    int beta = -1;

    void create(ParamStore<Scalar>& store, const std::string& name, Eigen::Index dim) {
        gamma = store.add(name + ".gamma", dim, 1);
        beta = store.add(name + ".beta", dim, 1);
        store.value(gamma).setOnes();
    }

    MatrixX<Scalar> forward(const ParamStore<Scalar>& store, const MatrixX<Scalar>& x,
                            LayerNormCache<Scalar>& cache) const {
        const Eigen::Index n = x.rows();
        const Eigen::Index d = x.cols();
        cache.normalized.resize(n, d);
        cache.inv_std.resize(n);
        MatrixX<Scalar> out(n, d);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Scalar mean = x.row(i).mean();
            const auto centered = x.row(i).array() - mean;
            const Scalar var = centered.square().sum() / Scalar(d);
            const Scalar inv_std = Scalar(1) / std::sqrt(var + kEpsilon);
            cache.inv_std(i) = inv_std;
            cache.normalized.row(i) = (centered * inv_std).matrix();
            out.row(i) = cache.normalized.row(i).cwiseProduct(
                             store.value(gamma).col(0).transpose()) +
                         store.value(beta).col(0).transpose();
        }
        return out;
    }

    MatrixX<Scalar> backward(ParamStore<Scalar>& store, const LayerNormCache<Scalar>& cache,
                             const MatrixX<Scalar>& dy) const {
        const Eigen::Index n = dy.rows();
        const Eigen::Index d = dy.cols();
        MatrixX<Scalar> dx(n, d);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto xhat = cache.normalized.row(i).array();
            const auto dxhat =
                dy.row(i).array() * store.value(gamma).col(0).transpose().array();
            const Scalar mean_dxhat = dxhat.sum() / Scalar(d);
            const Scalar mean_dxhat_xhat = (dxhat * xhat).sum() / Scalar(d);
            dx.row(i) =
                ((dxhat - mean_dxhat - xhat * mean_dxhat_xhat) * cache.inv_std(i)).matrix();
        }
        store.grad(gamma).col(0) +=
            (dy.array() * cache.normalized.array()).colwise().sum().matrix().transpose();
        store.grad(beta).col(0) += dy.colwise().sum().transpose();
        return dx;
    }
};

template <typename Scalar>
struct AttentionCache {
    MatrixX<Scalar> x;   // query-side input (n x d)
    MatrixX<Scalar> kv;  // key/value-side input (m x d)
    MatrixX<Scalar> queries, keys, values;
    std::vector<MatrixX<Scalar>> probs;       // per head, post softmax
    std::vector<MatrixX<Scalar>> probs_used;  // post attention-dropout
    std::vector<MatrixX<Scalar>> drop_masks;  // empty when not training
    MatrixX<Scalar> concat;                   // head outputs side by side
};

template <typename Scalar>
struct MultiHeadAttention {
    LinearLayer<Scalar> proj_q, proj_k, proj_v, proj_out;
    int heads = 1;
    Eigen::Index model_dim = 0;

    void create(ParamStore<Scalar>& store, const std::string& name, Eigen::Index dim,
                int head_count) {
        heads = head_count;
        model_dim = dim;
        proj_q.create(store, name + ".q", dim, dim);
        proj_k.create(store, name + ".k", dim, dim);
        proj_v.create(store, name + ".v", dim, dim);
        proj_out.create(store, name + ".out", dim, dim);
    }

    MatrixX<Scalar> forward(const ParamStore<Scalar>& store, const MatrixX<Scalar>& x,
                            const MatrixX<Scalar>& kv, bool causal, double dropout_p, Rng* rng,
                            AttentionCache<Scalar>& cache) const {
        const Eigen::Index n = x.rows();
        const Eigen::Index m = kv.rows();
        const Eigen::Index head_dim = model_dim / heads;
        const Scalar scale = Scalar(1) / std::sqrt(Scalar(head_dim));

        cache.x = x;
        cache.kv = kv;
        cache.queries = proj_q.forward(store, x);
        cache.keys = proj_k.forward(store, kv);
        cache.values = proj_v.forward(store, kv);
        cache.probs.assign(static_cast<std::size_t>(heads), {});
        cache.probs_used.assign(static_cast<std::size_t>(heads), {});
        cache.drop_masks.clear();
        const bool use_dropout = dropout_p > 0.0 && rng != nullptr;
        if (use_dropout) cache.drop_masks.assign(static_cast<std::size_t>(heads), {});
        cache.concat.resize(n, model_dim);

        for (int h = 0; h < heads; ++h) {
            const auto q_h = cache.queries.middleCols(h * head_dim, head_dim);
            const auto k_h = cache.keys.middleCols(h * head_dim, head_dim);
            const auto v_h = cache.values.middleCols(h * head_dim, head_dim);
            MatrixX<Scalar> scores = q_h * k_h.transpose() * scale;
            if (causal) {
                for (Eigen::Index i = 0; i < n; ++i) {
                    for (Eigen::Index j = i + 1; j < m; ++j) {
                        scores(i, j) = neg_infinity<Scalar>();
                    }
                }
            }
            auto& probs = cache.probs[static_cast<std::size_t>(h)];
            probs = softmax_rows(scores);
            auto& used = cache.probs_used[static_cast<std::size_t>(h)];
            if (use_dropout) {
                auto& mask = cache.drop_masks[static_cast<std::size_t>(h)];
                mask = dropout_mask<Scalar>(n, m, dropout_p, *rng);
                used = probs.cwiseProduct(mask);
            } else {
                used = probs;
            }
            cache.concat.middleCols(h * head_dim, head_dim) = used * v_h;
        }
        return proj_out.forward(store, cache.concat);
    }

    struct Grads {
        MatrixX<Scalar> dx;
        MatrixX<Scalar> dkv;
    };

    Grads backward(ParamStore<Scalar>& store, const AttentionCache<Scalar>& cache,
                   const MatrixX<Scalar>& dout) const {
        const Eigen::Index head_dim = model_dim / heads;
        const Scalar scale = Scalar(1) / std::sqrt(Scalar(head_dim));

        const MatrixX<Scalar> dconcat = proj_out.backward(store, cache.concat, dout);
        MatrixX<Scalar> dq = MatrixX<Scalar>::Zero(cache.queries.rows(), model_dim);
        MatrixX<Scalar> dk = MatrixX<Scalar>::Zero(cache.keys.rows(), model_dim);
        MatrixX<Scalar> dv = MatrixX<Scalar>::Zero(cache.values.rows(), model_dim);

        for (int h = 0; h < heads; ++h) {
            const auto q_h = cache.queries.middleCols(h * head_dim, head_dim);
            const auto k_h = cache.keys.middleCols(h * head_dim, head_dim);
            const auto v_h = cache.values.middleCols(h * head_dim, head_dim);
            const auto& probs = cache.probs[static_cast<std::size_t>(h)];
            const auto& used = cache.probs_used[static_cast<std::size_t>(h)];
            const auto dout_h = dconcat.middleCols(h * head_dim, head_dim);

            MatrixX<Scalar> dused = dout_h * v_h.transpose();
            dv.middleCols(h * head_dim, head_dim) = used.transpose() * dout_h;
            if (!cache.drop_masks.empty()) {
                dused = dused.cwiseProduct(cache.drop_masks[static_cast<std::size_t>(h)]);
            }
            const MatrixX<Scalar> dscores = softmax_rows_backward(probs, dused) * scale;
            dq.middleCols(h * head_dim, head_dim) = dscores * k_h;
            dk.middleCols(h * head_dim, head_dim) = dscores.transpose() * q_h;
        }

        Grads grads;
        grads.dx = proj_q.backward(store, cache.x, dq);
        grads.dkv = proj_k.backward(store, cache.kv, dk) + proj_v.backward(store, cache.kv, dv);
        return grads;
    }
};

template <typename Scalar>
struct FeedForwardCache {
    MatrixX<Scalar> x;
    MatrixX<Scalar> pre_activation;
    MatrixX<Scalar> hidden;
};

template <typename Scalar>
struct FeedForward {
    LinearLayer<Scalar> lin1, lin2;

    void create(ParamStore<Scalar>& store, const std::string& name, Eigen::Index dim,
                Eigen::Index hidden) {
        lin1.create(store, name + ".lin1", dim, hidden);
        lin2.create(store, name + ".lin2", hidden, dim);
    }

    MatrixX<Scalar> forward(const ParamStore<Scalar>& store, const MatrixX<Scalar>& x,
                            FeedForwardCache<Scalar>& cache) const {
        cache.x = x;
        cache.pre_activation = lin1.forward(store, x);
        cache.hidden = cache.pre_activation.cwiseMax(Scalar(0));
        return lin2.forward(store, cache.hidden);
    }

    MatrixX<Scalar> backward(ParamStore<Scalar>& store, const FeedForwardCache<Scalar>& cache,
                             const MatrixX<Scalar>& dy) const {
        MatrixX<Scalar> dhidden = lin2.backward(store, cache.hidden, dy);
        dhidden = ((cache.pre_activation.array() > Scalar(0)).template cast<Scalar>() *
                   dhidden.array())
                      .matrix();
        return lin1.backward(store, cache.x, dhidden);
    }
};

template <typename Scalar>
struct EncoderLayerCache {
    MatrixX<Scalar> x;
    AttentionCache<Scalar> attn;
    MatrixX<Scalar> attn_drop_mask;
    LayerNormCache<Scalar> ln1;
    MatrixX<Scalar> x1;
    FeedForwardCache<Scalar> ffn;
    MatrixX<Scalar> ffn_drop_mask;
    LayerNormCache<Scalar> ln2;
};

template <typename Scalar>
struct EncoderLayer {
    MultiHeadAttention<Scalar> self_attn;
    FeedForward<Scalar> ffn;
    LayerNorm<Scalar> ln1, ln2;

    void create(ParamStore<Scalar>& store, const std::string& name, Eigen::Index dim,
                Eigen::Index hidden, int heads) {
        self_attn.create(store, name + ".self_attn", dim, heads);
        ffn.create(store, name + ".ffn", dim, hidden);
        ln1.create(store, name + ".ln1", dim);
        ln2.create(store, name + ".ln2", dim);
    }

    MatrixX<Scalar> forward(const ParamStore<Scalar>& store, const MatrixX<Scalar>& x,
                            double dropout_p, Rng* rng, EncoderLayerCache<Scalar>& cache) const {
        const bool train = dropout_p > 0.0 && rng != nullptr;
        cache.x = x;
        MatrixX<Scalar> attn_out =
            self_attn.forward(store, x, x, /*causal=*/false, dropout_p, rng, cache.attn);
        if (train) {
            cache.attn_drop_mask =
                dropout_mask<Scalar>(attn_out.rows(), attn_out.cols(), dropout_p, *rng);
            attn_out = attn_out.cwiseProduct(cache.attn_drop_mask);
        }
        cache.x1 = ln1.forward(store, x + attn_out, cache.ln1);
        MatrixX<Scalar> ffn_out = ffn.forward(store, cache.x1, cache.ffn);
        if (train) {
            cache.ffn_drop_mask =
                dropout_mask<Scalar>(ffn_out.rows(), ffn_out.cols(), dropout_p, *rng);
            ffn_out = ffn_out.cwiseProduct(cache.ffn_drop_mask);
        }
        return ln2.forward(store, cache.x1 + ffn_out, cache.ln2);
    }

    MatrixX<Scalar> backward(ParamStore<Scalar>& store, const EncoderLayerCache<Scalar>& cache,
                             const MatrixX<Scalar>& dout) const {
        const MatrixX<Scalar> dr2 = ln2.backward(store, cache.ln2, dout);
        MatrixX<Scalar> dffn_out = dr2;
        if (cache.ffn_drop_mask.size() > 0) {
            dffn_out = dffn_out.cwiseProduct(cache.ffn_drop_mask);
        }
        MatrixX<Scalar> dx1 = dr2 + ffn.backward(store, cache.ffn, dffn_out);
        const MatrixX<Scalar> dr1 = ln1.backward(store, cache.ln1, dx1);
        MatrixX<Scalar> dattn_out = dr1;
        if (cache.attn_drop_mask.size() > 0) {
            dattn_out = dattn_out.cwiseProduct(cache.attn_drop_mask);
        }
        const auto grads = self_attn.backward(store, cache.attn, dattn_out);
        return dr1 + grads.dx + grads.dkv;
    }
};

template <typename Scalar>
struct DecoderLayerCache {
    MatrixX<Scalar> y;
    AttentionCache<Scalar> self_attn;
    MatrixX<Scalar> self_drop_mask;
    LayerNormCache<Scalar> ln1;
    MatrixX<Scalar> y1;
    AttentionCache<Scalar> cross_attn;
    MatrixX<Scalar> cross_drop_mask;
    LayerNormCache<Scalar> ln2;
    MatrixX<Scalar> y2;
    FeedForwardCache<Scalar> ffn;
    MatrixX<Scalar> ffn_drop_mask;
    LayerNormCache<Scalar> ln3;
};

template <typename Scalar>
struct DecoderLayer {
    MultiHeadAttention<Scalar> self_attn, cross_attn;
    FeedForward<Scalar> ffn;
    LayerNorm<Scalar> ln1, ln2, ln3;

    void create(ParamStore<Scalar>& store, const std::string& name, Eigen::Index dim,
                Eigen::Index hidden, int heads) {
        self_attn.create(store, name + ".self_attn", dim, heads);
        cross_attn.create(store, name + ".cross_attn", dim, heads);
        ffn.create(store, name + ".ffn", dim, hidden);
        ln1.create(store, name + ".ln1", dim);
        ln2.create(store, name + ".ln2", dim);
        ln3.create(store, name + ".ln3", dim);
    }

    MatrixX<Scalar> forward(const ParamStore<Scalar>& store, const MatrixX<Scalar>& y,
                            const MatrixX<Scalar>& memory, double dropout_p, Rng* rng,
                            DecoderLayerCache<Scalar>& cache) const {
        const bool train = dropout_p > 0.0 && rng != nullptr;
        cache.y = y;
        MatrixX<Scalar> self_out =
            self_attn.forward(store, y, y, /*causal=*/true, dropout_p, rng, cache.self_attn);
        if (train) {
            cache.self_drop_mask =
                dropout_mask<Scalar>(self_out.rows(), self_out.cols(), dropout_p, *rng);
            self_out = self_out.cwiseProduct(cache.self_drop_mask);
        }
        cache.y1 = ln1.forward(store, y + self_out, cache.ln1);
        MatrixX<Scalar> cross_out = cross_attn.forward(store, cache.y1, memory,
                                                       /*causal=*/false, dropout_p, rng,
                                                       cache.cross_attn);
        if (train) {
            cache.cross_drop_mask =
                dropout_mask<Scalar>(cross_out.rows(), cross_out.cols(), dropout_p, *rng);
            cross_out = cross_out.cwiseProduct(cache.cross_drop_mask);
        }
        cache.y2 = ln2.forward(store, cache.y1 + cross_out, cache.ln2);
        MatrixX<Scalar> ffn_out = ffn.forward(store, cache.y2, cache.ffn);
        if (train) {
            cache.ffn_drop_mask =
                dropout_mask<Scalar>(ffn_out.rows(), ffn_out.cols(), dropout_p, *rng);
            ffn_out = ffn_out.cwiseProduct(cache.ffn_drop_mask);
        }
        return ln3.forward(store, cache.y2 + ffn_out, cache.ln3);
    }

    struct Grads {
        MatrixX<Scalar> dy;
        MatrixX<Scalar> dmemory;
    };

    Grads backward(ParamStore<Scalar>& store, const DecoderLayerCache<Scalar>& cache,
                   const MatrixX<Scalar>& dout) const {
        const MatrixX<Scalar> dr3 = ln3.backward(store, cache.ln3, dout);
        MatrixX<Scalar> dffn_out = dr3;
        if (cache.ffn_drop_mask.size() > 0) {
            dffn_out = dffn_out.cwiseProduct(cache.ffn_drop_mask);
        }
        MatrixX<Scalar> dy2 = dr3 + ffn.backward(store, cache.ffn, dffn_out);

        const MatrixX<Scalar> dr2 = ln2.backward(store, cache.ln2, dy2);
        MatrixX<Scalar> dcross_out = dr2;
        if (cache.cross_drop_mask.size() > 0) {
            dcross_out = dcross_out.cwiseProduct(cache.cross_drop_mask);
        }
        const auto cross_grads = cross_attn.backward(store, cache.cross_attn, dcross_out);
        const MatrixX<Scalar> dy1 = dr2 + cross_grads.dx;

        const MatrixX<Scalar> dr1 = ln1.backward(store, cache.ln1, dy1);
        MatrixX<Scalar> dself_out = dr1;
        if (cache.self_drop_mask.size() > 0) {
            dself_out = dself_out.cwiseProduct(cache.self_drop_mask);
        }
        const auto self_grads = self_attn.backward(store, cache.self_attn, dself_out);

        Grads grads;
        grads.dy = dr1 + self_grads.dx + self_grads.dkv;
        grads.dmemory = cross_grads.dkv;
        return grads;
    }
};

}  // namespace qexgan

#endif
