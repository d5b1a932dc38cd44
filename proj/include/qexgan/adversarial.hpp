#ifndef QEXGAN_ADVERSARIAL_HPP
#define QEXGAN_ADVERSARIAL_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qexgan/discriminator.hpp"
#include "qexgan/generator.hpp"

namespace qexgan {

enum class RewardMode { prob_real, disc_loss };
enum class BaselineMode { none, moving_average };

inline const char* reward_mode_name(RewardMode mode) {
    return mode == RewardMode::prob_real ? "prob_real" : "disc_loss";
}

inline RewardMode reward_mode_from_name(const std::string& name) {
    if (name == "prob_real" || name == "prob-real") return RewardMode::prob_real;
    if (name == "disc_loss" || name == "disc-loss") return RewardMode::disc_loss;
    throw ValidationError("unknown reward mode: " + name);
}

inline const char* baseline_mode_name(BaselineMode mode) {
    return mode == BaselineMode::none ? "none" : "moving_average";
}

inline BaselineMode baseline_mode_from_name(const std::string& name) {
    if (name == "none") return BaselineMode::none;
    if (name == "moving_average" || name == "moving-average") return BaselineMode::moving_average;
    throw ValidationError("unknown baseline mode: " + name);
}

struct AdversarialConfig {
    int rollout_count = 16;
    int max_expansion_len = 64;
    double learning_rate = 1e-4;
    int epochs = 8;
    int patience = 3;
    RewardMode reward_mode = RewardMode::prob_real;
    BaselineMode baseline_mode = BaselineMode::none;
    bool update_discriminator = false;
    std::uint64_t seed = 1;

    void validate() const {
        if (rollout_count < 1) throw ValidationError("rollout_count must be at least 1");
        if (patience < 1) throw ValidationError("patience must be at least 1");
        if (max_expansion_len < 1) throw ValidationError("max_expansion_len must be at least 1");
        if (learning_rate <= 0.0) throw ValidationError("learning rate must be positive");
        if (epochs < 1) throw ValidationError("epochs must be positive");
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"rollout_count", rollout_count},
                              {"max_expansion_len", max_expansion_len},
                              {"learning_rate", learning_rate},
                              {"epochs", epochs},
                              {"patience", patience},
                              {"reward_mode", reward_mode_name(reward_mode)},
                              {"baseline_mode", baseline_mode_name(baseline_mode)},
                              {"update_discriminator", update_discriminator},
                              {"seed", seed}};
    }

    static AdversarialConfig from_json(const nlohmann::json& j) {
        AdversarialConfig config;
        config.rollout_count = j.value("rollout_count", config.rollout_count);
        config.max_expansion_len = j.value("max_expansion_len", config.max_expansion_len);
        config.learning_rate = j.value("learning_rate", config.learning_rate);
        config.epochs = j.value("epochs", config.epochs);
        config.patience = j.value("patience", config.patience);
        if (j.contains("reward_mode")) {
            config.reward_mode = reward_mode_from_name(j.at("reward_mode").get<std::string>());
        }
        if (j.contains("baseline_mode")) {
            config.baseline_mode =
                baseline_mode_from_name(j.at("baseline_mode").get<std::string>());
        }
        config.update_discriminator =
            j.value("update_discriminator", config.update_discriminator);
        config.seed = j.value("seed", config.seed);
        return config;
    }
};

template <typename Scalar>
struct RolloutSet {
    std::vector<int> prefix;
    std::vector<GenerationResult<Scalar>> sequences;
};

/// N independent sampled completions of `prefix`; rollout i draws from the
/// stream derive_seed(seed, i), so the whole set is reproducible.
template <typename Scalar>
RolloutSet<Scalar> rollout(const GeneratorModel<Scalar>& model, const MatrixX<Scalar>& memory,
                           const VectorX<Scalar>& condition, const std::vector<int>& prefix,
                           int count, std::uint64_t seed, int length_cap = -1) {
    if (count < 1) throw ValidationError("rollout count must be at least 1");
    RolloutSet<Scalar> set;
    set.prefix = prefix;
    set.sequences.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, std::uint64_t(i)));
        set.sequences.push_back(
            complete(model, memory, condition, prefix, DecodeMode::sample, rng, length_cap));
    }
    return set;
}

template <typename Scalar>
RolloutSet<Scalar> rollout(const GeneratorModel<Scalar>& model, const std::vector<int>& query_ids,
                           const VectorX<Scalar>& condition, const std::vector<int>& prefix,
                           int count, std::uint64_t seed, int length_cap = -1) {
    const MatrixX<Scalar> memory = encode(model, query_ids, condition);
    return rollout(model, memory, condition, prefix, count, seed, length_cap);
}

/// Scores one candidate expansion (ids without EOS); higher is better.
template <typename Scalar>
using SequenceScorer = std::function<Scalar(const std::vector<int>&)>;

/// Reward = D(query ⊕ expansion) in prob_real mode, or the discriminator's own
/// loss for labelling the sequence synthetic, -ln(1 - p), in disc_loss mode.
template <typename Scalar>
SequenceScorer<Scalar> make_discriminator_scorer(const DiscriminatorModel<Scalar>& disc,
                                                 const EmbeddingTable<Scalar>& table,
                                                 const Vocabulary& vocab,
                                                 const std::vector<int>& query_ids,
                                                 RewardMode mode) {
    return [&disc, &table, &vocab, query_ids, mode](const std::vector<int>& expansion_ids) {
        TokenSequence synthetic;
        synthetic.ids = query_ids;
        synthetic.ids.insert(synthetic.ids.end(), expansion_ids.begin(), expansion_ids.end());
        synthetic.surface.reserve(synthetic.ids.size());
        for (int id : synthetic.ids) synthetic.surface.push_back(vocab.token(id));
        const Scalar p = classify(disc, synthetic, table);
        if (mode == RewardMode::prob_real) return p;
        return -std::log(std::max(Scalar(1) - p, std::numeric_limits<Scalar>::min()));
    };
}

template <typename Scalar>
struct RewardBatch {
    std::vector<Scalar> rewards;
    Scalar mean_reward = 0;
    int step_index = 0;
};

template <typename Scalar>
RewardBatch<Scalar> batch_reward(const SequenceScorer<Scalar>& scorer,
                                 const RolloutSet<Scalar>& rollouts, int step_index = 0) {
    if (rollouts.sequences.empty()) {
        throw ValidationError("reward batch needs at least one rollout");
    }
    RewardBatch<Scalar> batch;
    batch.step_index = step_index;
    batch.rewards.reserve(rollouts.sequences.size());
    Scalar total = 0;
    for (const auto& seq : rollouts.sequences) {
        const Scalar r = scorer(seq.expansion_ids);
        batch.rewards.push_back(r);
        total += r;
    }
    batch.mean_reward = total / Scalar(batch.rewards.size());
    return batch;
}

template <typename Scalar>
RewardBatch<Scalar> batch_reward(const DiscriminatorModel<Scalar>& disc,
                                 const EmbeddingTable<Scalar>& table, const Vocabulary& vocab,
                                 const RolloutSet<Scalar>& rollouts,
                                 const std::vector<int>& query_ids, RewardMode mode,
                                 int step_index = 0) {
    return batch_reward(make_discriminator_scorer(disc, table, vocab, query_ids, mode), rollouts,
                        step_index);
}

template <typename Scalar>
struct SampledSequence {
    std::vector<int> query_ids;
    VectorX<Scalar> condition;
    std::vector<int> actions;  // chosen token ids, EOS included when emitted
    bool finished = false;
};

/// Per-step Monte Carlo reward for one sampled sequence: intermediate steps are
/// scored through rollout completions, the final step through the completed
/// sequence itself; the sequence reward is the mean over steps.
template <typename Scalar>
Scalar sequence_reward(const GeneratorModel<Scalar>& model, const MatrixX<Scalar>& memory,
                       const SampledSequence<Scalar>& sample,
                       const SequenceScorer<Scalar>& scorer, int rollout_count,
                       std::uint64_t seed, int length_cap) {
    const std::size_t steps = sample.actions.size();
    if (steps == 0) throw ValidationError("sampled sequence has no actions");
    std::vector<int> expansion = sample.actions;
    if (sample.finished) expansion.pop_back();

    Scalar total = 0;
    for (std::size_t t = 1; t <= steps; ++t) {
        if (t == steps) {
            total += scorer(expansion);
            continue;
        }
        const std::vector<int> prefix(sample.actions.begin(),
                                      sample.actions.begin() + static_cast<std::ptrdiff_t>(t));
        const RolloutSet<Scalar> set = rollout(model, memory, sample.condition, prefix,
                                               rollout_count, derive_seed(seed, t), length_cap);
        total += batch_reward(scorer, set, static_cast<int>(t)).mean_reward;
    }
    return total / Scalar(steps);
}

/// REINFORCE step over a sampled batch: surrogate loss
/// -(1/M) Σ_i (reward_i - baseline) Σ_t log p(action_t). Log-probabilities are
/// recomputed teacher-forced in eval mode so the gradient matches the returned
/// loss exactly. When every advantage is exactly zero the update is skipped
/// outright, leaving parameters and optimizer state untouched.
template <typename Scalar>
Scalar policy_gradient_update(GeneratorModel<Scalar>& model, AdamOptimizer<Scalar>& optimizer,
                              const std::vector<SampledSequence<Scalar>>& batch,
                              const std::vector<Scalar>& rewards, Scalar baseline) {
    if (batch.empty()) throw ValidationError("policy update needs a non-empty batch");
    if (batch.size() != rewards.size()) {
        throw ValidationError("rewards and sampled sequences differ in length");
    }
    bool any_advantage = false;
    for (const Scalar r : rewards) {
        if (r - baseline != Scalar(0)) {
            any_advantage = true;
            break;
        }
    }
    if (!any_advantage) return Scalar(0);

    const Scalar scale = Scalar(1) / Scalar(batch.size());
    Scalar loss = 0;
    model.params.zero_grads();
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& sample = batch[i];
        const Scalar advantage = (rewards[i] - baseline) * scale;
        std::vector<int> inputs(sample.actions.begin(), sample.actions.end() - 1);
        inputs.insert(inputs.begin(), Vocabulary::kBos);
        const PairCache<Scalar> cache =
            forward_teacher(model, sample.query_ids, sample.condition, inputs);
        const MatrixX<Scalar> probs = softmax_rows(cache.logits);
        MatrixX<Scalar> dlogits = advantage * probs;
        for (Eigen::Index t = 0; t < cache.logits.rows(); ++t) {
            const int action = sample.actions[static_cast<std::size_t>(t)];
            loss -= advantage *
                    std::log(std::max(probs(t, action), std::numeric_limits<Scalar>::min()));
            dlogits(t, action) -= advantage;
        }
        backward_teacher(model, cache, dlogits);
    }
    optimizer.step(model.params);
    return loss;
}

struct AdversarialEpochStats {
    int epoch = 0;
    double mean_reward = 0.0;
    double policy_loss = 0.0;
    std::optional<double> valid_ce;
    std::optional<double> valid_ppl;
};

template <typename Scalar>
struct AdversarialResult {
    std::vector<AdversarialEpochStats> history;
    int best_epoch = 0;  // 0 means the pre-adversarial parameters were kept
    std::vector<std::string> warnings;
    // Parameter values after the last trained epoch; the model itself is left
    // at the best-validation snapshot when a valid split exists.
    std::vector<MatrixX<Scalar>> final_values;
};

template <typename Scalar>
using ScorerFactory = std::function<SequenceScorer<Scalar>(const std::vector<int>&)>;

/// Adversarial fine-tuning driven by an arbitrary per-query scorer. Stops early
/// once validation CE has not improved for `patience` consecutive epochs and
/// restores the best-validation parameters.
template <typename Scalar>
AdversarialResult<Scalar> adversarial_train_with_scorer(
    GeneratorModel<Scalar>& model, const ScorerFactory<Scalar>& scorer_factory,
    const std::vector<const QueryDocPair*>& train, const std::vector<const QueryDocPair*>& valid,
    const ConditionFn<Scalar>& condition_of, const AdversarialConfig& config,
    std::vector<std::vector<SampledSequence<Scalar>>>* epoch_samples = nullptr) {
    config.validate();
    if (train.empty()) throw ValidationError("adversarial training needs train pairs");

    AdversarialResult<Scalar> result;
    AdamOptimizer<Scalar> optimizer(model.params, Scalar(config.learning_rate));
    const int cap = std::min(config.max_expansion_len, model.config.max_expansion_len);
    const std::size_t batch_size = static_cast<std::size_t>(model.config.batch_size);

    double best_ce = std::numeric_limits<double>::infinity();
    std::vector<MatrixX<Scalar>> best_values;
    const auto snapshot = [&]() {
        best_values.clear();
        for (const auto& entry : model.params.entries) best_values.push_back(entry.value);
    };
    if (!valid.empty()) {
        best_ce = double(teacher_forced_ce(model, valid, condition_of));
        snapshot();
    }

    Scalar baseline = 0;
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    int bad_epochs = 0;
    bool first_batch = true;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const std::uint64_t epoch_seed = derive_seed(config.seed, 0xF000 + std::uint64_t(epoch));
        Rng shuffle_rng(derive_seed(epoch_seed, 0));
        Rng sample_rng(derive_seed(epoch_seed, 1));
        std::uint64_t rollout_tag = 2;
        shuffle_rng.shuffle(order);
        if (epoch_samples != nullptr) epoch_samples->emplace_back();

        double reward_sum = 0.0;
        std::size_t reward_count = 0;
        double loss_sum = 0.0;
        std::size_t batch_count = 0;

        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t stop = std::min(order.size(), start + batch_size);
            std::vector<SampledSequence<Scalar>> batch;
            std::vector<Scalar> rewards;
            for (std::size_t i = start; i < stop; ++i) {
                const QueryDocPair* pair = train[order[i]];
                SampledSequence<Scalar> sample;
                sample.query_ids = pair->query.ids;
                sample.condition = condition_of(pair->query);
                const MatrixX<Scalar> memory = encode(model, sample.query_ids, sample.condition);
                const GenerationResult<Scalar> drawn =
                    complete(model, memory, sample.condition, {}, DecodeMode::sample, sample_rng,
                             cap);
                sample.actions = drawn.expansion_ids;
                if (drawn.finished) sample.actions.push_back(Vocabulary::kEos);
                sample.finished = drawn.finished;

                const SequenceScorer<Scalar> scorer = scorer_factory(sample.query_ids);
                const Scalar reward =
                    sequence_reward(model, memory, sample, scorer, config.rollout_count,
                                    derive_seed(epoch_seed, rollout_tag++), cap);
                rewards.push_back(reward);
                reward_sum += double(reward);
                ++reward_count;
                batch.push_back(std::move(sample));
            }
            if (first_batch) {
                first_batch = false;
                const bool all_half = std::all_of(rewards.begin(), rewards.end(),
                                                  [](Scalar r) { return r == Scalar(0.5); });
                if (all_half) {
                    result.warnings.push_back(
                        "every first-batch reward is exactly 0.5; the discriminator looks "
                        "untrained");
                }
            }
            Scalar batch_mean = 0;
            for (const Scalar r : rewards) batch_mean += r;
            batch_mean /= Scalar(rewards.size());
            const Scalar used_baseline =
                config.baseline_mode == BaselineMode::moving_average ? baseline : Scalar(0);
            loss_sum +=
                double(policy_gradient_update(model, optimizer, batch, rewards, used_baseline));
            ++batch_count;
            if (config.baseline_mode == BaselineMode::moving_average) {
                baseline = Scalar(0.9) * baseline + Scalar(0.1) * batch_mean;
            }
            if (epoch_samples != nullptr) {
                auto& sink = epoch_samples->back();
                sink.insert(sink.end(), std::make_move_iterator(batch.begin()),
                            std::make_move_iterator(batch.end()));
            }
        }

        AdversarialEpochStats stats;
        stats.epoch = epoch + 1;
        stats.mean_reward = reward_sum / double(reward_count);
        stats.policy_loss = loss_sum / double(batch_count);
        if (!valid.empty()) {
            stats.valid_ce = double(teacher_forced_ce(model, valid, condition_of));
            stats.valid_ppl = std::exp(*stats.valid_ce);
            if (*stats.valid_ce < best_ce) {
                best_ce = *stats.valid_ce;
                snapshot();
                result.best_epoch = epoch + 1;
                bad_epochs = 0;
            } else {
                ++bad_epochs;
            }
        }
        result.history.push_back(stats);
        if (!valid.empty() && bad_epochs >= config.patience) break;
    }

    for (const auto& entry : model.params.entries) result.final_values.push_back(entry.value);
    if (!best_values.empty()) {
        for (std::size_t i = 0; i < model.params.entries.size(); ++i) {
            model.params.entries[i].value = best_values[i];
        }
    }
    return result;
}

/// Full Algorithm-style loop against a pre-trained discriminator. When
/// `update_discriminator` is set, each epoch ends with one balanced
/// discriminator pass over the real documents and that epoch's samples.
template <typename Scalar>
AdversarialResult<Scalar> adversarial_train(
    GeneratorModel<Scalar>& model, DiscriminatorModel<Scalar>& discriminator,
    const EmbeddingTable<Scalar>& table, const Vocabulary& vocab,
    const std::vector<const QueryDocPair*>& train, const std::vector<const QueryDocPair*>& valid,
    const ConditionFn<Scalar>& condition_of, const AdversarialConfig& config) {
    const ScorerFactory<Scalar> factory = [&](const std::vector<int>& query_ids) {
        return make_discriminator_scorer(discriminator, table, vocab, query_ids,
                                         config.reward_mode);
    };
    if (!config.update_discriminator) {
        return adversarial_train_with_scorer(model, factory, train, valid, condition_of, config);
    }

    // Alternating extension: run generator epochs one at a time so the scorer
    // sees the discriminator refreshed in between. Validation bookkeeping lives
    // out here; the inner single-epoch runs get no valid split so they neither
    // early-stop nor restore parameters on their own.
    AdversarialConfig single = config;
    single.epochs = 1;
    AdversarialResult<Scalar> combined;
    double best_ce = std::numeric_limits<double>::infinity();
    std::vector<MatrixX<Scalar>> best_values;
    const auto snapshot = [&]() {
        best_values.clear();
        for (const auto& entry : model.params.entries) best_values.push_back(entry.value);
    };
    if (!valid.empty()) {
        best_ce = double(teacher_forced_ce(model, valid, condition_of));
        snapshot();
    }
    int bad_epochs = 0;

    std::vector<TokenSequence> real_docs;
    for (const QueryDocPair* pair : train) real_docs.push_back(pair->document);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        single.seed = derive_seed(config.seed, 0x4200 + std::uint64_t(epoch));
        std::vector<std::vector<SampledSequence<Scalar>>> samples;
        AdversarialResult<Scalar> one = adversarial_train_with_scorer(
            model, factory, train, {}, condition_of, single, &samples);
        auto stats = one.history.front();
        stats.epoch = epoch + 1;
        for (auto& w : one.warnings) combined.warnings.push_back(std::move(w));

        bool stop = false;
        if (!valid.empty()) {
            stats.valid_ce = double(teacher_forced_ce(model, valid, condition_of));
            stats.valid_ppl = std::exp(*stats.valid_ce);
            if (*stats.valid_ce < best_ce) {
                best_ce = *stats.valid_ce;
                snapshot();
                combined.best_epoch = epoch + 1;
                bad_epochs = 0;
            } else if (++bad_epochs >= config.patience) {
                stop = true;
            }
        }
        combined.history.push_back(stats);
        if (stop) break;

        std::vector<TokenSequence> synthetic;
        for (const auto& sample : samples.front()) {
            TokenSequence seq;
            seq.ids = sample.query_ids;
            std::vector<int> expansion = sample.actions;
            if (sample.finished) expansion.pop_back();
            seq.ids.insert(seq.ids.end(), expansion.begin(), expansion.end());
            for (int id : seq.ids) seq.surface.push_back(vocab.token(id));
            synthetic.push_back(std::move(seq));
        }
        pretrain_discriminator(discriminator, real_docs, synthetic, table, 1);
    }

    for (const auto& entry : model.params.entries) combined.final_values.push_back(entry.value);
    if (!best_values.empty()) {
        for (std::size_t i = 0; i < model.params.entries.size(); ++i) {
            model.params.entries[i].value = best_values[i];
        }
    }
    return combined;
}

}  // namespace qexgan

#endif
