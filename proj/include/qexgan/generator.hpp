#ifndef QEXGAN_GENERATOR_HPP
#define QEXGAN_GENERATOR_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qexgan/corpus.hpp"
#include "qexgan/embedding.hpp"
#include "qexgan/nn/ops.hpp"
#include "qexgan/nn/params.hpp"
#include "qexgan/nn/transformer.hpp"

namespace qexgan {

struct GeneratorConfig {
    int token_dim = 100;
    int condition_dim = 100;
    int hidden_dim = 512;
    int encoder_layers = 2;
    int decoder_layers = 2;
    int attention_heads = 4;
    double dropout = 0.1;
    int max_expansion_len = 64;
    int vocab_size = 0;
    double learning_rate = 1e-3;
    int pretrain_epochs = 16;
    int batch_size = 64;
    std::uint64_t seed = 1;

    int model_input_dim() const { return token_dim + condition_dim; }

    void validate() const {
        if (token_dim < 1 || condition_dim < 1 || hidden_dim < 1) {
            throw ValidationError("generator dims must be positive");
        }
        if (encoder_layers < 1 || decoder_layers < 1) {
            throw ValidationError("generator needs at least one encoder and one decoder layer");
        }
        if (attention_heads < 1 || model_input_dim() % attention_heads != 0) {
            throw ValidationError("attention heads (" + std::to_string(attention_heads) +
                                  ") must divide the model input size (" +
                                  std::to_string(model_input_dim()) + ")");
        }
        if (dropout < 0.0 || dropout >= 1.0) {
            throw ValidationError("dropout must lie in [0, 1)");
        }
        if (max_expansion_len < 1) {
            throw ValidationError("max_expansion_len must be at least 1");
        }
        if (vocab_size < static_cast<int>(Vocabulary::kReservedCount)) {
            throw ValidationError("vocab_size must cover the reserved special tokens");
        }
        if (learning_rate <= 0.0) {
            throw ValidationError("learning rate must be positive");
        }
        if (pretrain_epochs < 1 || batch_size < 1) {
            throw ValidationError("epochs and batch size must be positive");
        }
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"token_dim", token_dim},
                              {"condition_dim", condition_dim},
                              {"hidden_dim", hidden_dim},
                              {"encoder_layers", encoder_layers},
                              {"decoder_layers", decoder_layers},
                              {"attention_heads", attention_heads},
                              {"dropout", dropout},
                              {"max_expansion_len", max_expansion_len},
                              {"vocab_size", vocab_size},
                              {"learning_rate", learning_rate},
                              {"pretrain_epochs", pretrain_epochs},
                              {"batch_size", batch_size},
                              {"seed", seed}};
    }

    static GeneratorConfig from_json(const nlohmann::json& j) {
        GeneratorConfig config;
        config.token_dim = j.value("token_dim", config.token_dim);
        config.condition_dim = j.value("condition_dim", config.condition_dim);
        config.hidden_dim = j.value("hidden_dim", config.hidden_dim);
        config.encoder_layers = j.value("encoder_layers", config.encoder_layers);
        config.decoder_layers = j.value("decoder_layers", config.decoder_layers);
        config.attention_heads = j.value("attention_heads", config.attention_heads);
        config.dropout = j.value("dropout", config.dropout);
        config.max_expansion_len = j.value("max_expansion_len", config.max_expansion_len);
        config.vocab_size = j.value("vocab_size", config.vocab_size);
        config.learning_rate = j.value("learning_rate", config.learning_rate);
        config.pretrain_epochs = j.value("pretrain_epochs", config.pretrain_epochs);
        config.batch_size = j.value("batch_size", config.batch_size);
        config.seed = j.value("seed", config.seed);
        return config;
    }
};

template <typename Scalar>
struct GeneratorModel {
    GeneratorConfig config;
    ParamStore<Scalar> params;
    int token_embedding = -1;  // frozen; rows come from the word-vector table
    int positional = -1;       // frozen sinusoidal table
    std::vector<EncoderLayer<Scalar>> encoder;
    std::vector<DecoderLayer<Scalar>> decoder;
    LinearLayer<Scalar> output_proj;
};

template <typename Scalar>
GeneratorModel<Scalar> init_generator(const GeneratorConfig& config) {
    config.validate();
    GeneratorModel<Scalar> model;
    model.config = config;
    auto& store = model.params;

    const Eigen::Index dim = config.model_input_dim();
    model.token_embedding =
        store.add("token_embedding", config.vocab_size, config.token_dim, /*trainable=*/false);
    const Eigen::Index positions =
        std::max<Eigen::Index>(config.max_expansion_len + 2, 128);
    model.positional = store.add("positional", positions, dim, /*trainable=*/false);

    model.encoder.resize(static_cast<std::size_t>(config.encoder_layers));
    for (int i = 0; i < config.encoder_layers; ++i) {
        model.encoder[static_cast<std::size_t>(i)].create(
            store, "encoder." + std::to_string(i), dim, config.hidden_dim,
            config.attention_heads);
    }
    model.decoder.resize(static_cast<std::size_t>(config.decoder_layers));
    for (int i = 0; i < config.decoder_layers; ++i) {
        model.decoder[static_cast<std::size_t>(i)].create(
            store, "decoder." + std::to_string(i), dim, config.hidden_dim,
            config.attention_heads);
    }
    model.output_proj.create(store, "output", dim, config.vocab_size);

    Rng rng(derive_seed(config.seed, 0x6e17));
    seed_uniform_weights(store, rng);
    auto& embeddings = store.value(model.token_embedding);
    const Scalar bound = Scalar(1) / std::sqrt(Scalar(config.token_dim));
    for (Eigen::Index r = 0; r < embeddings.rows(); ++r) {
        for (Eigen::Index c = 0; c < embeddings.cols(); ++c) {
            embeddings(r, c) = Scalar(rng.uniform(-double(bound), double(bound)));
        }
    }
    embeddings.row(Vocabulary::kPad).setZero();
    store.value(model.positional) = sinusoidal_positions<Scalar>(positions, dim);
    return model;
}

/// Overwrites the frozen token-embedding rows with vectors from the table.
/// Specials keep their seeded rows except PAD, which stays zero.
template <typename Scalar>
void load_token_embeddings(GeneratorModel<Scalar>& model, const EmbeddingTable<Scalar>& table,
                           const Vocabulary& vocab) {
    if (table.dimension != model.config.token_dim) {
        throw ValidationError("embedding table dimension " + std::to_string(table.dimension) +
                              " does not match generator token_dim " +
                              std::to_string(model.config.token_dim));
    }
    if (static_cast<int>(vocab.size()) != model.config.vocab_size) {
        throw ValidationError("vocabulary size does not match generator vocab_size");
    }
    auto& rows = model.params.value(model.token_embedding);
    for (int id = Vocabulary::kReservedCount; id < vocab.size(); ++id) {
        rows.row(id) = table.lookup(vocab.token(id)).transpose();
    }
    rows.row(Vocabulary::kPad).setZero();
}

namespace detail {

template <typename Scalar>
MatrixX<Scalar> positional_rows(const GeneratorModel<Scalar>& model, Eigen::Index n) {
    const auto& table = model.params.value(model.positional);
    if (n <= table.rows()) return table.topRows(n);
    return sinusoidal_positions<Scalar>(n, table.cols());
}

/// Embedding ⊕ condition for each token, plus the positional rows.
template <typename Scalar>
MatrixX<Scalar> input_rows(const GeneratorModel<Scalar>& model, const std::vector<int>& ids,
                           const VectorX<Scalar>& condition) {
    const auto& config = model.config;
    if (condition.size() != config.condition_dim) {
        throw ValidationError("condition vector dimension " + std::to_string(condition.size()) +
                              " does not match condition_dim " +
                              std::to_string(config.condition_dim));
    }
    const Eigen::Index n = static_cast<Eigen::Index>(ids.size());
    MatrixX<Scalar> x(n, config.model_input_dim());
    const auto& embeddings = model.params.value(model.token_embedding);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int id = ids[static_cast<std::size_t>(i)];
        if (id < 0 || id >= config.vocab_size) {
            throw ValidationError("token id " + std::to_string(id) +
                                  " is outside the vocabulary");
        }
        x.row(i).head(config.token_dim) = embeddings.row(id);
        x.row(i).tail(config.condition_dim) = condition.transpose();
    }
    x += positional_rows(model, n);
    return x;
}

inline std::vector<int> strip_trailing_pad(const std::vector<int>& ids) {
    std::size_t n = ids.size();
    while (n > 0 && ids[n - 1] == Vocabulary::kPad) --n;
    return std::vector<int>(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n));
}

}  // namespace detail

template <typename Scalar>
struct EncodeCache {
    std::vector<EncoderLayerCache<Scalar>> layers;
    MatrixX<Scalar> memory;
};

template <typename Scalar>
struct DecodeCache {
    std::vector<DecoderLayerCache<Scalar>> layers;
    MatrixX<Scalar> output;  // final decoder states, input of the vocab projection
};

/// Runs the encoder over embedding⊕condition rows. `rng` non-null enables dropout.
template <typename Scalar>
MatrixX<Scalar> encode(const GeneratorModel<Scalar>& model, const std::vector<int>& query_ids,
                       const VectorX<Scalar>& condition, Rng* rng = nullptr,
                       EncodeCache<Scalar>* cache = nullptr) {
    if (query_ids.empty()) {
        throw ValidationError("generator requires a non-empty query");
    }
    const double p = rng != nullptr ? model.config.dropout : 0.0;
    MatrixX<Scalar> x = detail::input_rows(model, query_ids, condition);
    if (p > 0.0) {
        x = x.cwiseProduct(dropout_mask<Scalar>(x.rows(), x.cols(), p, *rng));
    }
    EncodeCache<Scalar> local;
    EncodeCache<Scalar>& store = cache != nullptr ? *cache : local;
    store.layers.resize(model.encoder.size());
    for (std::size_t i = 0; i < model.encoder.size(); ++i) {
        x = model.encoder[i].forward(model.params, x, p, rng, store.layers[i]);
    }
    store.memory = x;
    return store.memory;
}

/// Teacher-forced decoder pass; rows of the result are vocab logits per input position.
template <typename Scalar>
MatrixX<Scalar> decode_logits(const GeneratorModel<Scalar>& model,
                              const MatrixX<Scalar>& memory,
                              const std::vector<int>& decoder_inputs,
                              const VectorX<Scalar>& condition, Rng* rng = nullptr,
                              DecodeCache<Scalar>* cache = nullptr) {
    const double p = rng != nullptr ? model.config.dropout : 0.0;
    MatrixX<Scalar> y = detail::input_rows(model, decoder_inputs, condition);
    if (p > 0.0) {
        y = y.cwiseProduct(dropout_mask<Scalar>(y.rows(), y.cols(), p, *rng));
    }
    DecodeCache<Scalar> local;
    DecodeCache<Scalar>& store = cache != nullptr ? *cache : local;
    store.layers.resize(model.decoder.size());
    for (std::size_t i = 0; i < model.decoder.size(); ++i) {
        y = model.decoder[i].forward(model.params, y, memory, p, rng, store.layers[i]);
    }
    store.output = y;
    return model.output_proj.forward(model.params, store.output);
}

/// Next-token distribution after `prefix` (trailing PAD ids are ignored).
template <typename Scalar>
VectorX<Scalar> decode_step(const GeneratorModel<Scalar>& model, const MatrixX<Scalar>& memory,
                            const std::vector<int>& prefix, const VectorX<Scalar>& condition) {
    std::vector<int> inputs = detail::strip_trailing_pad(prefix);
    if (static_cast<int>(inputs.size()) >= model.config.max_expansion_len + 1) {
        throw ValidationError("prefix has already reached max_expansion_len");
    }
    inputs.insert(inputs.begin(), Vocabulary::kBos);
    const MatrixX<Scalar> logits = decode_logits(model, memory, inputs, condition);
    const MatrixX<Scalar> probs = softmax_rows(logits.bottomRows(1));
    return probs.row(0).transpose();
}

enum class DecodeMode { greedy, sample };

template <typename Scalar>
struct GenerationResult {
    std::vector<int> expansion_ids;  // prefix plus continuation, EOS excluded
    std::vector<Scalar> stepwise_logprobs;
    bool finished = false;

    TokenSequence to_sequence(const Vocabulary& vocab) const {
        TokenSequence seq;
        seq.ids = expansion_ids;
        seq.surface.reserve(expansion_ids.size());
        for (int id : expansion_ids) seq.surface.push_back(vocab.token(id));
        return seq;
    }
};

/// Extends `prefix` until EOS or the length cap (the model's own cap when
/// `length_cap` <= 0). Logprobs cover only the newly chosen steps (including
/// the EOS step when one is emitted).
template <typename Scalar>
GenerationResult<Scalar> complete(const GeneratorModel<Scalar>& model,
                                  const MatrixX<Scalar>& memory,
                                  const VectorX<Scalar>& condition,
                                  const std::vector<int>& prefix, DecodeMode mode, Rng& rng,
                                  int length_cap = -1) {
    const int cap = length_cap > 0 ? std::min(length_cap, model.config.max_expansion_len)
                                   : model.config.max_expansion_len;
    GenerationResult<Scalar> result;
    result.expansion_ids = detail::strip_trailing_pad(prefix);
    while (static_cast<int>(result.expansion_ids.size()) < cap) {
        const VectorX<Scalar> probs = decode_step(model, memory, result.expansion_ids, condition);
        int chosen = 0;
        if (mode == DecodeMode::greedy) {
            Scalar best = probs(0);
            for (Eigen::Index i = 1; i < probs.size(); ++i) {
                if (probs(i) > best) {
                    best = probs(i);
                    chosen = static_cast<int>(i);
                }
            }
        } else {
            chosen = static_cast<int>(rng.categorical(probs.template cast<double>()));
        }
        result.stepwise_logprobs.push_back(std::log(probs(chosen)));
        if (chosen == Vocabulary::kEos) {
            result.finished = true;
            break;
        }
        result.expansion_ids.push_back(chosen);
    }
    return result;
}

template <typename Scalar>
GenerationResult<Scalar> generate(const GeneratorModel<Scalar>& model,
                                  const std::vector<int>& query_ids,
                                  const VectorX<Scalar>& condition, DecodeMode mode,
                                  std::uint64_t seed) {
    const MatrixX<Scalar> memory = encode(model, query_ids, condition);
    Rng rng(seed);
    return complete(model, memory, condition, {}, mode, rng);
}

template <typename Scalar>
struct PairCache {
    EncodeCache<Scalar> enc;
    DecodeCache<Scalar> dec;
    MatrixX<Scalar> logits;
    std::vector<int> decoder_inputs;
};

/// Teacher-forced forward over one (query, decoder-input) pair with caches kept
/// for the matching backward call.
template <typename Scalar>
PairCache<Scalar> forward_teacher(const GeneratorModel<Scalar>& model,
                                  const std::vector<int>& query_ids,
                                  const VectorX<Scalar>& condition,
                                  const std::vector<int>& decoder_inputs, Rng* rng = nullptr) {
    PairCache<Scalar> cache;
    cache.decoder_inputs = decoder_inputs;
    const MatrixX<Scalar> memory = encode(model, query_ids, condition, rng, &cache.enc);
    cache.logits = decode_logits(model, memory, decoder_inputs, condition, rng, &cache.dec);
    return cache;
}

/// Accumulates parameter gradients for d(loss)/d(logits) produced elsewhere.
template <typename Scalar>
void backward_teacher(GeneratorModel<Scalar>& model, const PairCache<Scalar>& cache,
                      const MatrixX<Scalar>& dlogits) {
    auto& store = model.params;
    MatrixX<Scalar> dy = model.output_proj.backward(store, cache.dec.output, dlogits);
    MatrixX<Scalar> dmemory =
        MatrixX<Scalar>::Zero(cache.enc.memory.rows(), cache.enc.memory.cols());
    for (std::size_t i = model.decoder.size(); i-- > 0;) {
        auto grads = model.decoder[i].backward(store, cache.dec.layers[i], dy);
        dy = std::move(grads.dy);
        dmemory += grads.dmemory;
    }
    MatrixX<Scalar> dx = dmemory;
    for (std::size_t i = model.encoder.size(); i-- > 0;) {
        dx = model.encoder[i].backward(store, cache.enc.layers[i], dx);
    }
    // Inputs are frozen embeddings plus the condition vector; nothing to do with dx.
}

/// Summed negative log-likelihood of `targets` under `logits` plus the gradient
/// scaled by 1/normalizer; PAD targets contribute nothing.
template <typename Scalar>
Scalar nll_and_dlogits(const MatrixX<Scalar>& logits, const std::vector<int>& targets,
                       Scalar normalizer, MatrixX<Scalar>* dlogits) {
    const MatrixX<Scalar> probs = softmax_rows(logits);
    if (dlogits != nullptr) *dlogits = MatrixX<Scalar>::Zero(logits.rows(), logits.cols());
    Scalar total = 0;
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
        const int target = targets[static_cast<std::size_t>(t)];
        if (target == Vocabulary::kPad) continue;
        total -= std::log(std::max(probs(t, target), std::numeric_limits<Scalar>::min()));
        if (dlogits != nullptr) {
            dlogits->row(t) = probs.row(t) / normalizer;
            (*dlogits)(t, target) -= Scalar(1) / normalizer;
        }
    }
    return total;
}

inline std::size_t count_non_pad(const std::vector<int>& targets) {
    std::size_t n = 0;
    for (int id : targets) {
        if (id != Vocabulary::kPad) ++n;
    }
    return n;
}

template <typename Scalar>
using ConditionFn = std::function<VectorX<Scalar>(const TokenSequence&)>;

/// Mean per-token teacher-forced cross entropy over `pairs`, dropout disabled.
template <typename Scalar>
Scalar teacher_forced_ce(const GeneratorModel<Scalar>& model,
                         const std::vector<const QueryDocPair*>& pairs,
                         const ConditionFn<Scalar>& condition_of) {
    if (pairs.empty()) {
        throw ValidationError("cross entropy needs a non-empty evaluation split");
    }
    Scalar total = 0;
    std::size_t tokens = 0;
    for (const QueryDocPair* pair : pairs) {
        std::vector<int> inputs = pair->document.ids;
        inputs.insert(inputs.begin(), Vocabulary::kBos);
        std::vector<int> targets = pair->document.ids;
        targets.push_back(Vocabulary::kEos);
        const VectorX<Scalar> condition = condition_of(pair->query);
        const PairCache<Scalar> cache =
            forward_teacher(model, pair->query.ids, condition, inputs);
        total += nll_and_dlogits<Scalar>(cache.logits, targets, Scalar(1), nullptr);
        tokens += count_non_pad(targets);
    }
    return total / Scalar(tokens);
}

struct GeneratorEpochStats {
    int epoch = 0;
    double train_ce = 0.0;
    std::optional<double> valid_ce;
    std::optional<double> valid_ppl;
};

/// Teacher-forced pre-training with Adam; history has one entry per epoch.
template <typename Scalar>
std::vector<GeneratorEpochStats> pretrain_generator(
    GeneratorModel<Scalar>& model, const std::vector<const QueryDocPair*>& train,
    const std::vector<const QueryDocPair*>& valid, const ConditionFn<Scalar>& condition_of,
    int epochs) {
    if (train.empty()) {
        throw ValidationError("generator pre-training needs a non-empty train split");
    }
    if (epochs < 1) {
        throw ValidationError("epochs must be positive");
    }
    AdamOptimizer<Scalar> optimizer(model.params, Scalar(model.config.learning_rate));
    std::vector<GeneratorEpochStats> history;
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(model.config.seed, 0xE000 + std::uint64_t(epoch)));
        Rng dropout_rng(derive_seed(model.config.seed, 0xD000 + std::uint64_t(epoch)));
        shuffle_rng.shuffle(order);

        Scalar epoch_nll = 0;
        std::size_t epoch_tokens = 0;
        const std::size_t batch_size = static_cast<std::size_t>(model.config.batch_size);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t stop = std::min(order.size(), start + batch_size);
            std::size_t batch_tokens = 0;
            for (std::size_t i = start; i < stop; ++i) {
                batch_tokens += train[order[i]]->document.ids.size() + 1;
            }
            model.params.zero_grads();
            for (std::size_t i = start; i < stop; ++i) {
                const QueryDocPair* pair = train[order[i]];
                std::vector<int> inputs = pair->document.ids;
                inputs.insert(inputs.begin(), Vocabulary::kBos);
                std::vector<int> targets = pair->document.ids;
                targets.push_back(Vocabulary::kEos);
                const VectorX<Scalar> condition = condition_of(pair->query);
                Rng* rng = model.config.dropout > 0.0 ? &dropout_rng : nullptr;
                const PairCache<Scalar> cache =
                    forward_teacher(model, pair->query.ids, condition, inputs, rng);
                MatrixX<Scalar> dlogits;
                epoch_nll += nll_and_dlogits<Scalar>(cache.logits, targets,
                                                     Scalar(batch_tokens), &dlogits);
                backward_teacher(model, cache, dlogits);
                epoch_tokens += count_non_pad(targets);
            }
            optimizer.step(model.params);
        }

        GeneratorEpochStats stats;
        stats.epoch = epoch + 1;
        stats.train_ce = double(epoch_nll / Scalar(epoch_tokens));
        if (!valid.empty()) {
            stats.valid_ce = double(teacher_forced_ce(model, valid, condition_of));
            stats.valid_ppl = std::exp(*stats.valid_ce);
        }
        history.push_back(stats);
    }
    return history;
}

}  // namespace qexgan

#endif
