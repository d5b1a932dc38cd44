#ifndef QEXGAN_DISCRIMINATOR_HPP
#define QEXGAN_DISCRIMINATOR_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "qexgan/corpus.hpp"
#include "qexgan/embedding.hpp"
#include "qexgan/nn/ops.hpp"
#include "qexgan/nn/params.hpp"

namespace qexgan {

struct DiscriminatorConfig {
    int token_dim = 100;
    int lstm_hidden = 128;
    int layers = 1;
    bool allow_custom_layers = false;
    double dropout = 0.1;
    double learning_rate = 1e-2;
    int epochs = 24;
    int batch_size = 256;
    std::uint64_t seed = 1;

    void validate() const {
        if (layers != 1 && !allow_custom_layers) {
            throw ValidationError(
                "discriminator uses a single LSTM layer; set allow_custom_layers to override");
        }
        if (layers < 1 || token_dim < 1 || lstm_hidden < 1) {
            throw ValidationError("discriminator dims must be positive");
        }
        if (dropout < 0.0 || dropout >= 1.0) {
            throw ValidationError("dropout must lie in [0, 1)");
        }
        if (learning_rate <= 0.0) {
            throw ValidationError("learning rate must be positive");
        }
        if (epochs < 1 || batch_size < 2) {
            throw ValidationError("epochs must be positive and batch size at least 2");
        }
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"token_dim", token_dim},
                              {"lstm_hidden", lstm_hidden},
                              {"layers", layers},
                              {"allow_custom_layers", allow_custom_layers},
                              {"dropout", dropout},
                              {"learning_rate", learning_rate},
                              {"epochs", epochs},
                              {"batch_size", batch_size},
                              {"seed", seed}};
    }

    static DiscriminatorConfig from_json(const nlohmann::json& j) {
        DiscriminatorConfig config;
        config.token_dim = j.value("token_dim", config.token_dim);
        config.lstm_hidden = j.value("lstm_hidden", config.lstm_hidden);
        config.layers = j.value("layers", config.layers);
        config.allow_custom_layers = j.value("allow_custom_layers", config.allow_custom_layers);
        config.dropout = j.value("dropout", config.dropout);
        config.learning_rate = j.value("learning_rate", config.learning_rate);
        config.epochs = j.value("epochs", config.epochs);
        config.batch_size = j.value("batch_size", config.batch_size);
        config.seed = j.value("seed", config.seed);
        return config;
    }
};

template <typename Scalar>
struct DiscriminatorModel {
    struct LayerHandles {
        int input_weight = -1;      // (input_dim x 4H)
        int recurrent_weight = -1;  // (H x 4H)
        int bias = -1;              // (4H x 1)
    };

    DiscriminatorConfig config;
    ParamStore<Scalar> params;
    std::vector<LayerHandles> layers;
    int out_weight = -1;  // (H x 1)
    int out_bias = -1;    // (1 x 1)
};

template <typename Scalar>
DiscriminatorModel<Scalar> init_discriminator(const DiscriminatorConfig& config) {
    config.validate();
    DiscriminatorModel<Scalar> model;
    model.config = config;
    auto& store = model.params;
    const Eigen::Index hidden = config.lstm_hidden;
    for (int l = 0; l < config.layers; ++l) {
        const Eigen::Index input_dim = l == 0 ? config.token_dim : hidden;
        typename DiscriminatorModel<Scalar>::LayerHandles handles;
        const std::string prefix = "lstm" + std::to_string(l);
        handles.input_weight = store.add(prefix + ".ih.weight", input_dim, 4 * hidden);
        handles.recurrent_weight = store.add(prefix + ".hh.weight", hidden, 4 * hidden);
        handles.bias = store.add(prefix + ".bias", 4 * hidden, 1);
        model.layers.push_back(handles);
    }
    model.out_weight = store.add("output.weight", hidden, 1);
    model.out_bias = store.add("output.bias", 1, 1);
    Rng rng(derive_seed(config.seed, 0xd15c));
    seed_uniform_weights(store, rng);
    return model;
}

/// Embeds the surface tokens of a sequence, dropping trailing PAD entries.
/// Missing tokens follow the table's OOV policy.
template <typename Scalar>
MatrixX<Scalar> embed_tokens(const TokenSequence& sequence, const EmbeddingTable<Scalar>& table) {
    std::size_t n = sequence.size();
    while (n > 0) {
        const bool pad_id =
            n <= sequence.ids.size() && sequence.ids[n - 1] == Vocabulary::kPad;
        if (!pad_id && sequence.surface[n - 1] != "<pad>") break;
        --n;
    }
    if (n == 0) {
        throw ValidationError("discriminator input is empty after trimming padding");
    }
    MatrixX<Scalar> embeds(static_cast<Eigen::Index>(n), table.dimension);
    for (std::size_t i = 0; i < n; ++i) {
        embeds.row(static_cast<Eigen::Index>(i)) = table.lookup(sequence.surface[i]).transpose();
    }
    return embeds;
}

template <typename Scalar>
struct LstmLayerCache {
    MatrixX<Scalar> x;  // inputs after any inter-layer dropout
    MatrixX<Scalar> gate_i, gate_f, gate_g, gate_o;
    MatrixX<Scalar> cell, hidden, tanh_cell;
};

template <typename Scalar>
struct DiscForwardCache {
    std::vector<LstmLayerCache<Scalar>> layers;
    std::vector<MatrixX<Scalar>> inter_drop_masks;  // between stacked layers
    MatrixX<Scalar> final_drop_mask;                // on the last hidden state (1 x H)
    MatrixX<Scalar> final_hidden;                   // post dropout (1 x H)
    Scalar logit = 0;
    Scalar prob = 0;
};

/// Runs the LSTM stack over embedded rows; `rng` non-null enables dropout.
template <typename Scalar>
Scalar forward_discriminator(const DiscriminatorModel<Scalar>& model,
                             const MatrixX<Scalar>& embeds, Rng* rng = nullptr,
                             DiscForwardCache<Scalar>* cache = nullptr) {
    if (embeds.rows() == 0) {
        throw ValidationError("discriminator input is empty");
    }
    if (embeds.cols() != model.config.token_dim) {
        throw ValidationError("embedding width does not match discriminator token_dim");
    }
    const double p = rng != nullptr ? model.config.dropout : 0.0;
    const Eigen::Index steps = embeds.rows();
    const Eigen::Index hidden = model.config.lstm_hidden;

    DiscForwardCache<Scalar> local;
    DiscForwardCache<Scalar>& out = cache != nullptr ? *cache : local;
    out.layers.resize(model.layers.size());
    out.inter_drop_masks.clear();

    MatrixX<Scalar> x = embeds;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        if (l > 0 && p > 0.0) {
            MatrixX<Scalar> mask = dropout_mask<Scalar>(x.rows(), x.cols(), p, *rng);
            x = x.cwiseProduct(mask);
            out.inter_drop_masks.push_back(std::move(mask));
        } else if (l > 0) {
            out.inter_drop_masks.push_back({});
        }
        auto& layer = out.layers[l];
        layer.x = x;
        layer.gate_i.resize(steps, hidden);
        layer.gate_f.resize(steps, hidden);
        layer.gate_g.resize(steps, hidden);
        layer.gate_o.resize(steps, hidden);
        layer.cell.resize(steps, hidden);
        layer.hidden.resize(steps, hidden);
        layer.tanh_cell.resize(steps, hidden);

        const auto& w_ih = model.params.value(model.layers[l].input_weight);
        const auto& w_hh = model.params.value(model.layers[l].recurrent_weight);
        const auto bias = model.params.value(model.layers[l].bias).col(0).transpose();
        MatrixX<Scalar> h_prev = MatrixX<Scalar>::Zero(1, hidden);
        MatrixX<Scalar> c_prev = MatrixX<Scalar>::Zero(1, hidden);
        for (Eigen::Index t = 0; t < steps; ++t) {
            const MatrixX<Scalar> z = layer.x.row(t) * w_ih + h_prev * w_hh + bias;
            const auto sig = [](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); };
            for (Eigen::Index j = 0; j < hidden; ++j) {
                layer.gate_i(t, j) = sig(z(0, j));
                layer.gate_f(t, j) = sig(z(0, hidden + j));
                layer.gate_g(t, j) = std::tanh(z(0, 2 * hidden + j));
                layer.gate_o(t, j) = sig(z(0, 3 * hidden + j));
            }
            layer.cell.row(t) = layer.gate_f.row(t).cwiseProduct(c_prev.row(0)) +
                                layer.gate_i.row(t).cwiseProduct(layer.gate_g.row(t));
            layer.tanh_cell.row(t) = layer.cell.row(t).array().tanh().matrix();
            layer.hidden.row(t) = layer.gate_o.row(t).cwiseProduct(layer.tanh_cell.row(t));
            h_prev = layer.hidden.row(t);
            c_prev = layer.cell.row(t);
        }
        x = layer.hidden;
    }

    MatrixX<Scalar> h_final = out.layers.back().hidden.bottomRows(1);
    if (p > 0.0) {
        out.final_drop_mask = dropout_mask<Scalar>(1, hidden, p, *rng);
        h_final = h_final.cwiseProduct(out.final_drop_mask);
    } else {
        out.final_drop_mask.resize(0, 0);
    }
    out.final_hidden = h_final;
    out.logit = (h_final * model.params.value(model.out_weight))(0, 0) +
                model.params.value(model.out_bias)(0, 0);
    out.prob = Scalar(1) / (Scalar(1) + std::exp(-out.logit));
    return out.prob;
}

/// BPTT for d(loss)/d(logit); parameter gradients accumulate into the store.
template <typename Scalar>
void backward_discriminator(DiscriminatorModel<Scalar>& model,
                            const DiscForwardCache<Scalar>& cache, Scalar dlogit) {
    auto& store = model.params;
    const Eigen::Index hidden = model.config.lstm_hidden;

    store.grad(model.out_weight) += cache.final_hidden.transpose() * dlogit;
    store.grad(model.out_bias)(0, 0) += dlogit;
    MatrixX<Scalar> dh_last =
        dlogit * store.value(model.out_weight).transpose();  // (1 x H)
    if (cache.final_drop_mask.size() > 0) {
        dh_last = dh_last.cwiseProduct(cache.final_drop_mask);
    }

    const Eigen::Index steps = cache.layers.front().x.rows();
    MatrixX<Scalar> dh_ext = MatrixX<Scalar>::Zero(steps, hidden);
    dh_ext.row(steps - 1) = dh_last;

    for (std::size_t l = cache.layers.size(); l-- > 0;) {
        const auto& layer = cache.layers[l];
        const auto& w_ih = store.value(model.layers[l].input_weight);
        const auto& w_hh = store.value(model.layers[l].recurrent_weight);
        MatrixX<Scalar> dx = MatrixX<Scalar>::Zero(layer.x.rows(), layer.x.cols());
        MatrixX<Scalar> dh_carry = MatrixX<Scalar>::Zero(1, hidden);
        MatrixX<Scalar> dc_carry = MatrixX<Scalar>::Zero(1, hidden);

        for (Eigen::Index t = steps - 1; t >= 0; --t) {
            const MatrixX<Scalar> dh = dh_ext.row(t) + dh_carry;
            const auto i_t = layer.gate_i.row(t).array();
            const auto f_t = layer.gate_f.row(t).array();
            const auto g_t = layer.gate_g.row(t).array();
            const auto o_t = layer.gate_o.row(t).array();
            const auto tanh_c = layer.tanh_cell.row(t).array();

            const Eigen::Array<Scalar, 1, Eigen::Dynamic> dcell =
                dc_carry.row(0).array() +
                dh.row(0).array() * o_t * (Scalar(1) - tanh_c.square());
            MatrixX<Scalar> c_prev = MatrixX<Scalar>::Zero(1, hidden);
            if (t > 0) c_prev = layer.cell.row(t - 1);

            MatrixX<Scalar> dz(1, 4 * hidden);
            dz.row(0).segment(0, hidden) =
                (dcell * g_t * i_t * (Scalar(1) - i_t)).matrix();
            dz.row(0).segment(hidden, hidden) =
                (dcell * c_prev.row(0).array() * f_t * (Scalar(1) - f_t)).matrix();
            dz.row(0).segment(2 * hidden, hidden) =
                (dcell * i_t * (Scalar(1) - g_t.square())).matrix();
            dz.row(0).segment(3 * hidden, hidden) =
                (dh.row(0).array() * tanh_c * o_t * (Scalar(1) - o_t)).matrix();

            store.grad(model.layers[l].input_weight) += layer.x.row(t).transpose() * dz;
            MatrixX<Scalar> h_prev = MatrixX<Scalar>::Zero(1, hidden);
            if (t > 0) h_prev = layer.hidden.row(t - 1);
            store.grad(model.layers[l].recurrent_weight) += h_prev.transpose() * dz;
            store.grad(model.layers[l].bias).col(0) += dz.row(0).transpose();

            dx.row(t) = dz * w_ih.transpose();
            dh_carry = dz * w_hh.transpose();
            dc_carry.row(0) = (dcell * f_t).matrix();
        }

        if (l > 0) {
            if (cache.inter_drop_masks.size() >= l &&
                cache.inter_drop_masks[l - 1].size() > 0) {
                dx = dx.cwiseProduct(cache.inter_drop_masks[l - 1]);
            }
            dh_ext = dx;
        }
    }
}

/// Probability that `sequence` is a real document (eval mode, deterministic).
template <typename Scalar>
Scalar classify(const DiscriminatorModel<Scalar>& model, const TokenSequence& sequence,
                const EmbeddingTable<Scalar>& table) {
    return forward_discriminator(model, embed_tokens(sequence, table));
}

template <typename Scalar>
Scalar binary_cross_entropy(Scalar prob, int label) {
    const Scalar eps = std::numeric_limits<Scalar>::min();
    return label == 1 ? -std::log(std::max(prob, eps))
                      : -std::log(std::max(Scalar(1) - prob, eps));
}

struct DiscriminatorEpochStats {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Balanced binary training: label 1 = real document, 0 = synthetic sequence.
/// Each epoch truncates the larger class, interleaves, and splits into batches
/// holding the two classes in equal counts. Accuracy is measured after the
/// epoch in eval mode over the balanced set, ties predicted synthetic.
template <typename Scalar>
std::vector<DiscriminatorEpochStats> pretrain_discriminator(
    DiscriminatorModel<Scalar>& model, const std::vector<TokenSequence>& real,
    const std::vector<TokenSequence>& synthetic, const EmbeddingTable<Scalar>& table,
    int epochs) {
    if (real.empty() || synthetic.empty()) {
        throw ValidationError("discriminator training needs both real and synthetic examples");
    }
    if (epochs < 1) {
        throw ValidationError("epochs must be positive");
    }
    AdamOptimizer<Scalar> optimizer(model.params, Scalar(model.config.learning_rate));
    const std::size_t per_class = std::min(real.size(), synthetic.size());
    const std::size_t half_batch =
        std::max<std::size_t>(1, static_cast<std::size_t>(model.config.batch_size) / 2);

    std::vector<std::size_t> real_order(real.size());
    std::vector<std::size_t> synth_order(synthetic.size());
    for (std::size_t i = 0; i < real_order.size(); ++i) real_order[i] = i;
    for (std::size_t i = 0; i < synth_order.size(); ++i) synth_order[i] = i;

    std::vector<DiscriminatorEpochStats> history;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(model.config.seed, 0xA000 + std::uint64_t(epoch)));
        Rng dropout_rng(derive_seed(model.config.seed, 0xB000 + std::uint64_t(epoch)));
        shuffle_rng.shuffle(real_order);
        shuffle_rng.shuffle(synth_order);

        Scalar epoch_loss = 0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < per_class; start += half_batch) {
            const std::size_t stop = std::min(per_class, start + half_batch);
            const Scalar batch_n = Scalar(2 * (stop - start));
            model.params.zero_grads();
            for (std::size_t i = start; i < stop; ++i) {
                for (int label = 1; label >= 0; --label) {
                    const TokenSequence& seq =
                        label == 1 ? real[real_order[i]] : synthetic[synth_order[i]];
                    DiscForwardCache<Scalar> cache;
                    Rng* rng = model.config.dropout > 0.0 ? &dropout_rng : nullptr;
                    const Scalar prob = forward_discriminator(model, embed_tokens(seq, table),
                                                              rng, &cache);
                    epoch_loss += binary_cross_entropy(prob, label);
                    backward_discriminator(model, cache, (prob - Scalar(label)) / batch_n);
                    ++seen;
                }
            }
            optimizer.step(model.params);
        }

        std::size_t correct = 0;
        for (std::size_t i = 0; i < per_class; ++i) {
            if (classify(model, real[real_order[i]], table) > Scalar(0.5)) ++correct;
            if (!(classify(model, synthetic[synth_order[i]], table) > Scalar(0.5))) ++correct;
        }
        DiscriminatorEpochStats stats;
        stats.epoch = epoch + 1;
        stats.loss = double(epoch_loss / Scalar(seen));
        stats.accuracy = double(correct) / double(2 * per_class);
        history.push_back(stats);
    }
    return history;
}

}  // namespace qexgan

#endif
