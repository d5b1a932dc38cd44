// Acceptance checks for the conditional-GAN query expansion pipeline. Each
// check prints one PASS/FAIL line; the process exit code is the number of
// failures. Every check is deterministic and carries its own time budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qexgan/adversarial.hpp"
#include "qexgan/ball_tree.hpp"
#include "qexgan/cli.hpp"
#include "qexgan/conditions.hpp"
#include "qexgan/corpus.hpp"
#include "qexgan/discriminator.hpp"
#include "qexgan/generator.hpp"
#include "qexgan/metrics.hpp"
#include "qexgan/pipeline.hpp"
#include "test_util.hpp"

using namespace qexgan;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = false;
    std::string detail;
};

struct MuteStreams {
    MuteStreams()
        : out_(std::cout.rdbuf(sink_.rdbuf())), err_(std::cerr.rdbuf(sink_.rdbuf())) {}
    ~MuteStreams() {
        std::cout.rdbuf(out_);
        std::cerr.rdbuf(err_);
    }

private:
    std::ostringstream sink_;
    std::streambuf* out_;
    std::streambuf* err_;
};

PairCorpus make_corpus(const std::vector<std::pair<std::string, std::string>>& rows) {
    PairCorpus corpus;
    for (const auto& [query, document] : rows) {
        QueryDocPair pair;
        pair.query = TokenSequence::from_text(query);
        pair.document = TokenSequence::from_text(document);
        corpus.pairs.push_back(std::move(pair));
    }
    index_corpus(corpus, build_vocabulary(corpus));
    return corpus;
}

std::vector<const QueryDocPair*> all_pairs(const PairCorpus& corpus) {
    std::vector<const QueryDocPair*> out;
    for (const auto& pair : corpus.pairs) out.push_back(&pair);
    return out;
}

GeneratorConfig tiny_generator_config(int vocab_size, std::uint64_t seed) {
    GeneratorConfig config;
    config.token_dim = 4;
    config.condition_dim = 4;
    config.hidden_dim = 8;
    config.encoder_layers = 1;
    config.decoder_layers = 1;
    config.attention_heads = 2;
    config.dropout = 0.0;
    config.max_expansion_len = 8;
    config.vocab_size = vocab_size;
    config.seed = seed;
    return config;
}

// --------------------------------------------------------------------------
// 1. Perplexity is exp(cross entropy), and matches the published anchor pair.
// --------------------------------------------------------------------------
Outcome check_perplexity_law() {
    const PairCorpus corpus =
        make_corpus({{"a b", "c d"}, {"c", "a b"}, {"d a", "b"}, {"b c", "d"}});
    GeneratorModel<double> model =
        init_generator<double>(tiny_generator_config(corpus.vocabulary.size(), 3));
    const auto pairs = all_pairs(corpus);
    const std::vector<const QueryDocPair*> train(pairs.begin(), pairs.begin() + 3);
    const std::vector<const QueryDocPair*> valid(pairs.begin() + 3, pairs.end());
    const ConditionFn<double> condition_of = [](const TokenSequence&) {
        return VectorX<double>::Zero(4).eval();
    };

    const auto history = pretrain_generator(model, train, valid, condition_of, 4);
    double worst = 0.0;
    for (const auto& stats : history) {
        if (!stats.valid_ce || !stats.valid_ppl) {
            return {false, "missing validation stats"};
        }
        worst = std::max(worst, std::abs(*stats.valid_ppl - std::exp(*stats.valid_ce)));
    }
    const double anchor = std::abs(std::exp(0.267) - 1.307);

    std::ostringstream detail;
    detail << "max |ppl - exp(ce)| = " << worst << ", anchor gap = " << anchor;
    return {worst < 1e-9 && anchor < 0.002, detail.str()};
}

// --------------------------------------------------------------------------
// 2. Ball-tree nearest neighbours agree exactly with a linear scan.
// --------------------------------------------------------------------------
Outcome check_ball_tree_exactness() {
    struct Config {
        int n, d, k, leaf;
    };
    const std::vector<Config> configs = {
        {1, 2, 1, 1},      {5, 2, 3, 1},      {10, 2, 1, 2},    {50, 2, 5, 4},
        {100, 2, 10, 8},   {500, 2, 7, 16},   {2000, 2, 10, 16}, {10, 10, 2, 1},
        {50, 10, 10, 2},   {100, 10, 10, 4},  {500, 10, 3, 8},  {1000, 10, 10, 16},
        {2000, 10, 5, 32}, {10, 100, 1, 4},   {100, 100, 10, 8}, {250, 100, 2, 4},
        {500, 100, 10, 16}, {750, 100, 8, 8}, {1000, 100, 3, 16}, {2000, 100, 10, 32}};

    Rng rng(2024);
    std::size_t comparisons = 0;
    for (const auto& config : configs) {
        MatrixX<double> points(config.n, config.d);
        for (Eigen::Index r = 0; r < points.rows(); ++r) {
            for (Eigen::Index c = 0; c < points.cols(); ++c) {
                points(r, c) = rng.uniform(-1.0, 1.0);
            }
        }
        const BallTree<double> tree(points, config.leaf);
        for (int q = 0; q < 5; ++q) {
            VectorX<double> query(config.d);
            for (Eigen::Index c = 0; c < query.size(); ++c) query(c) = rng.uniform(-1.0, 1.0);

            std::vector<std::pair<double, Eigen::Index>> scan;
            for (Eigen::Index i = 0; i < points.rows(); ++i) {
                scan.emplace_back((points.row(i).transpose() - query).squaredNorm(), i);
            }
            std::sort(scan.begin(), scan.end());
            const int k = std::min<int>(config.k, config.n);

            const auto result = tree.nearest(query, config.k);
            if (int(result.neighbors.size()) != k) {
                return {false, "wrong neighbour count"};
            }
            for (int i = 0; i < k; ++i) {
                const auto& got = result.neighbors[std::size_t(i)];
                if (got.index != scan[std::size_t(i)].second ||
                    got.distance != std::sqrt(scan[std::size_t(i)].first)) {
                    std::ostringstream detail;
                    detail << "mismatch at config n=" << config.n << " d=" << config.d;
                    return {false, detail.str()};
                }
                ++comparisons;
            }
        }
    }
    std::ostringstream detail;
    detail << comparisons << " neighbours across " << configs.size()
           << " configurations, zero tolerance";
    return {true, detail.str()};
}

// --------------------------------------------------------------------------
// 3. Word coverage and semantic similarity reproduce hand-computed anchors.
// --------------------------------------------------------------------------
Outcome check_metric_anchors() {
    const auto tokens = [](std::vector<std::string> words) {
        return TokenSequence::from_tokens(std::move(words));
    };
    const double half = word_coverage({tokens({"a"})}, {tokens({"a", "b"})});
    const double five_fourths = word_coverage({tokens({"a", "b", "c", "d", "e"})},
                                              {tokens({"a", "b", "c", "d"})});

    EmbeddingTable<double> table;
    table.dimension = 2;
    table.tokens = {"x", "y"};
    table.vectors = MatrixX<double>::Zero(2, 2);
    table.vectors << 1.0, 0.0, 0.0, 1.0;
    table.index = {{"x", 0}, {"y", 1}};
    const auto ss = semantic_similarity<double>({tokens({"x"}), tokens({"x"})},
                                                {tokens({"x"}), tokens({"y"})}, table);

    std::ostringstream detail;
    detail << "wc = {" << half << ", " << five_fourths << "}, ss = (" << ss.mean << ", "
           << ss.std_dev << ")";
    const bool ok = std::abs(half - 0.5) < 1e-12 && std::abs(five_fourths - 1.25) < 1e-12 &&
                    std::abs(ss.mean - 0.5) < 1e-12 && std::abs(ss.std_dev - 0.5) < 1e-12;
    return {ok, detail.str()};
}

// --------------------------------------------------------------------------
// 4. Analytic gradients match central finite differences (generator CE,
//    discriminator BCE, and the REINFORCE surrogate), 100+ coordinates each.
// --------------------------------------------------------------------------
struct GradCheck {
    int checked = 0;
    double worst = 0.0;
};

template <typename LossFn>
GradCheck finite_difference_sweep(ParamStore<double>& params,
                                  const std::vector<MatrixX<double>>& analytic,
                                  const LossFn& loss, std::uint64_t seed) {
    std::vector<int> trainable;
    for (std::size_t i = 0; i < params.entries.size(); ++i) {
        if (params.entries[i].trainable) trainable.push_back(int(i));
    }
    Rng rng(seed);
    const double h = 1e-5;
    GradCheck result;
    int attempts = 0;
    while (result.checked < 120 && attempts < 600) {
        ++attempts;
        const int e = trainable[rng.below(trainable.size())];
        auto& value = params.entries[std::size_t(e)].value;
        const Eigen::Index flat = Eigen::Index(rng.below(std::uint64_t(value.size())));
        const double original = value.data()[flat];

        value.data()[flat] = original + h;
        const double plus = loss();
        value.data()[flat] = original - h;
        const double minus = loss();
        value.data()[flat] = original;

        const double numeric = (plus - minus) / (2.0 * h);
        const double exact = analytic[std::size_t(e)].data()[flat];
        if (std::abs(exact) + std::abs(numeric) < 1e-7) continue;
        result.worst = std::max(result.worst,
                                std::abs(exact - numeric) /
                                    std::max(std::abs(exact) + std::abs(numeric), 1e-8));
        ++result.checked;
    }
    return result;
}

Outcome check_gradients() {
    GradCheck sweeps[3];

    {  // generator teacher-forced cross entropy
        const PairCorpus corpus = make_corpus({{"a b", "c d e"}, {"f", "b a"}});
        GeneratorModel<double> model =
            init_generator<double>(tiny_generator_config(corpus.vocabulary.size(), 11));
        const auto pairs = all_pairs(corpus);
        const VectorX<double> condition = VectorX<double>::Constant(4, 0.3);
        const ConditionFn<double> condition_of = [&condition](const TokenSequence&) {
            return condition;
        };
        const auto loss = [&]() {
            return double(teacher_forced_ce(model, pairs, condition_of));
        };

        std::size_t tokens = 0;
        for (const QueryDocPair* pair : pairs) tokens += pair->document.ids.size() + 1;
        model.params.zero_grads();
        for (const QueryDocPair* pair : pairs) {
            std::vector<int> inputs = pair->document.ids;
            inputs.insert(inputs.begin(), Vocabulary::kBos);
            std::vector<int> targets = pair->document.ids;
            targets.push_back(Vocabulary::kEos);
            const PairCache<double> cache =
                forward_teacher(model, pair->query.ids, condition, inputs);
            MatrixX<double> dlogits;
            nll_and_dlogits<double>(cache.logits, targets, double(tokens), &dlogits);
            backward_teacher(model, cache, dlogits);
        }
        std::vector<MatrixX<double>> analytic;
        for (const auto& entry : model.params.entries) analytic.push_back(entry.grad);
        sweeps[0] = finite_difference_sweep(model.params, analytic, loss, 404);
    }

    {  // discriminator binary cross entropy
        EmbeddingTable<double> table;
        table.dimension = 3;
        table.tokens = {"a", "b", "c", "d"};
        table.vectors = MatrixX<double>::Zero(4, 3);
        table.vectors << 1.0, 0.2, 0.0, 0.8, -0.1, 0.1, -1.0, 0.1, 0.3, -0.7, -0.2, -0.2;
        table.index = {{"a", 0}, {"b", 1}, {"c", 2}, {"d", 3}};

        DiscriminatorConfig config;
        config.token_dim = 3;
        config.lstm_hidden = 4;
        config.dropout = 0.0;
        config.seed = 21;
        DiscriminatorModel<double> model = init_discriminator<double>(config);

        const std::vector<std::pair<TokenSequence, int>> examples = {
            {TokenSequence::from_tokens({"a", "b", "a"}), 1},
            {TokenSequence::from_tokens({"c", "d"}), 0},
            {TokenSequence::from_tokens({"b", "c", "d", "a"}), 1}};
        const auto loss = [&]() {
            double total = 0.0;
            for (const auto& [sequence, label] : examples) {
                total += binary_cross_entropy(classify(model, sequence, table), label);
            }
            return total / double(examples.size());
        };

        model.params.zero_grads();
        for (const auto& [sequence, label] : examples) {
            DiscForwardCache<double> cache;
            const double prob =
                forward_discriminator(model, embed_tokens(sequence, table), nullptr, &cache);
            backward_discriminator(model, cache,
                                   (prob - double(label)) / double(examples.size()));
        }
        std::vector<MatrixX<double>> analytic;
        for (const auto& entry : model.params.entries) analytic.push_back(entry.grad);
        sweeps[1] = finite_difference_sweep(model.params, analytic, loss, 505);
    }

    {  // REINFORCE surrogate at fixed sampled sequences
        const PairCorpus corpus = make_corpus({{"a", "b c"}, {"b", "c a"}});
        GeneratorModel<double> model =
            init_generator<double>(tiny_generator_config(corpus.vocabulary.size(), 11));
        const VectorX<double> condition = VectorX<double>::Zero(4);

        std::vector<SampledSequence<double>> batch(2);
        batch[0].query_ids = {4, 5};
        batch[0].condition = condition;
        batch[0].actions = {6, 5, Vocabulary::kEos};
        batch[0].finished = true;
        batch[1].query_ids = {6};
        batch[1].condition = condition;
        batch[1].actions = {4, 4};
        const std::vector<double> rewards = {0.9, 0.2};
        const double baseline = 0.1;

        const auto loss = [&]() {
            double total = 0.0;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const double advantage = (rewards[i] - baseline) / double(batch.size());
                std::vector<int> inputs(batch[i].actions.begin(), batch[i].actions.end() - 1);
                inputs.insert(inputs.begin(), Vocabulary::kBos);
                const PairCache<double> cache =
                    forward_teacher(model, batch[i].query_ids, batch[i].condition, inputs);
                const MatrixX<double> probs = softmax_rows(cache.logits);
                for (Eigen::Index t = 0; t < cache.logits.rows(); ++t) {
                    total -= advantage * std::log(probs(t, batch[i].actions[std::size_t(t)]));
                }
            }
            return total;
        };

        GeneratorModel<double> probe = model;
        AdamOptimizer<double> optimizer(probe.params, 1e-6);
        policy_gradient_update(probe, optimizer, batch, rewards, baseline);
        std::vector<MatrixX<double>> analytic;
        for (const auto& entry : probe.params.entries) analytic.push_back(entry.grad);
        sweeps[2] = finite_difference_sweep(model.params, analytic, loss, 606);
    }

    std::ostringstream detail;
    detail << "coords = {" << sweeps[0].checked << ", " << sweeps[1].checked << ", "
           << sweeps[2].checked << "}, worst rel err = {" << sweeps[0].worst << ", "
           << sweeps[1].worst << ", " << sweeps[2].worst << "}";
    const bool ok = std::all_of(std::begin(sweeps), std::end(sweeps), [](const GradCheck& s) {
        return s.checked >= 100 && s.worst < 1e-4;
    });
    return {ok, detail.str()};
}

// --------------------------------------------------------------------------
// 5. A single pair is memorised within 200 epochs and reproduced greedily.
// --------------------------------------------------------------------------
Outcome check_single_pair_overfit() {
    const PairCorpus corpus = make_corpus({{"a", "b c"}});
    GeneratorConfig config = tiny_generator_config(corpus.vocabulary.size(), 11);
    config.max_expansion_len = 4;
    config.learning_rate = 0.01;
    GeneratorModel<double> model = init_generator<double>(config);
    const VectorX<double> condition = VectorX<double>::Zero(4);
    const ConditionFn<double> condition_of = [&condition](const TokenSequence&) {
        return condition;
    };

    const auto history = pretrain_generator(model, all_pairs(corpus), {}, condition_of, 200);
    const auto result =
        generate(model, corpus.pairs[0].query.ids, condition, DecodeMode::greedy, 1);
    const auto surface = result.to_sequence(corpus.vocabulary).surface;

    std::ostringstream detail;
    detail << "final CE = " << history.back().train_ce << ", greedy = \"";
    for (std::size_t i = 0; i < surface.size(); ++i) {
        detail << (i > 0 ? " " : "") << surface[i];
    }
    detail << "\"";
    const bool ok = history.back().train_ce < 0.1 && result.finished &&
                    surface == std::vector<std::string>{"b", "c"};
    return {ok, detail.str()};
}

// --------------------------------------------------------------------------
// 6. Document-similarity conditions beat self conditions on a corpus whose
//    queries are nearly silent about their documents.
// --------------------------------------------------------------------------
struct StrategyCorpus {
    PairCorpus corpus;
    EmbeddingTable<double> table;
};

StrategyCorpus build_strategy_corpus() {
    StrategyCorpus out;
    out.table.dimension = 8;
    Rng rng(99);

    const auto add_token = [&](const std::string& name, double e2, bool noisy_e1) {
        VectorX<double> v = VectorX<double>::Zero(8);
        v(1) = e2;
        if (noisy_e1) v(0) = rng.uniform(-0.1, 0.1);
        for (Eigen::Index c = 2; c < 8; ++c) v(c) = rng.uniform(-0.3, 0.3);
        out.table.index[name] = int(out.table.tokens.size());
        out.table.tokens.push_back(name);
        out.table.vectors.conservativeResize(out.table.vectors.rows() + 1, 8);
        out.table.vectors.row(out.table.vectors.rows() - 1) = v.transpose();
    };

    std::vector<std::vector<std::string>> query_words(2), doc_words(2);
    for (int side = 0; side < 2; ++side) {
        const double sign = side == 0 ? 1.0 : -1.0;
        const std::string tag = side == 0 ? "a" : "b";
        for (int i = 0; i < 10; ++i) {
            const std::string q = "q" + tag + std::to_string(i);
            add_token(q, 0.02 * sign, false);
            query_words[std::size_t(side)].push_back(q);
            const std::string d = "d" + tag + std::to_string(i);
            add_token(d, 1.0 * sign, true);
            doc_words[std::size_t(side)].push_back(d);
        }
    }

    std::vector<std::pair<std::string, std::string>> rows;
    for (int i = 0; i < 200; ++i) {
        const std::size_t side = std::size_t(i % 2);
        const auto& qw = query_words[side];
        const auto& dw = doc_words[side];
        const std::string query =
            qw[rng.below(qw.size())] + " " + qw[rng.below(qw.size())];
        const std::string doc = dw[rng.below(dw.size())] + " " + dw[rng.below(dw.size())] +
                                " " + dw[rng.below(dw.size())];
        rows.emplace_back(query, doc);
    }
    out.corpus = make_corpus(rows);
    split_corpus(out.corpus, {0.8, 0.1, 0.1}, 7);
    return out;
}

double strategy_ss_mean(const StrategyCorpus& data, ConditionStrategy strategy,
                        std::uint64_t seed) {
    ConditionContextParams params;
    params.k_docs = 3;
    params.k_words = 3;
    params.leaf_size = 8;
    const ConditionContext<double> ctx =
        build_condition_context(data.corpus, data.table, params);
    const ConditionTable<double> table =
        precompute_condition_table(data.corpus, strategy, ctx);
    const ConditionSource<double> source(&table, &ctx);
    const ConditionFn<double> condition_of = [&source](const TokenSequence& query) {
        return source.get(query);
    };

    GeneratorConfig config;
    config.token_dim = 8;
    config.condition_dim = 8;
    config.hidden_dim = 32;
    config.encoder_layers = 1;
    config.decoder_layers = 1;
    config.attention_heads = 2;
    config.dropout = 0.0;
    config.max_expansion_len = 4;
    config.vocab_size = data.corpus.vocabulary.size();
    config.learning_rate = 0.01;
    config.batch_size = 16;
    config.seed = seed;
    GeneratorModel<double> model = init_generator<double>(config);
    load_token_embeddings(model, data.table, data.corpus.vocabulary);

    pretrain_generator(model, data.corpus.split_pairs(Split::train),
                       data.corpus.split_pairs(Split::valid), condition_of, 8);

    std::vector<TokenSequence> expanded, documents;
    for (const QueryDocPair* pair : data.corpus.split_pairs(Split::test)) {
        const auto result = generate(model, pair->query.ids, condition_of(pair->query),
                                     DecodeMode::greedy, 1);
        const TokenSequence expansion = result.to_sequence(data.corpus.vocabulary);
        TokenSequence joined = pair->query;
        joined.ids.insert(joined.ids.end(), expansion.ids.begin(), expansion.ids.end());
        joined.surface.insert(joined.surface.end(), expansion.surface.begin(),
                              expansion.surface.end());
        expanded.push_back(std::move(joined));
        documents.push_back(pair->document);
    }
    return double(semantic_similarity(expanded, documents, data.table).mean);
}

Outcome check_strategy_contrast() {
    const StrategyCorpus data = build_strategy_corpus();
    int wins = 0;
    std::ostringstream detail;
    detail << "doc_sim vs self SS mean:";
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const double self_ss = strategy_ss_mean(data, ConditionStrategy::self, 100 + seed);
        const double doc_ss = strategy_ss_mean(data, ConditionStrategy::doc_sim, 100 + seed);
        if (doc_ss > self_ss) ++wins;
        detail << " [" << doc_ss << " vs " << self_ss << "]";
    }
    detail << ", wins = " << wins << "/5";
    return {wins >= 4, detail.str()};
}

// --------------------------------------------------------------------------
// 7. Policy-gradient updates follow a reward that favours one marker token.
// --------------------------------------------------------------------------
bool marker_following_run(std::uint64_t seed) {
    const PairCorpus corpus = make_corpus({{"a", "b c"}, {"b", "c a"}});
    GeneratorConfig config = tiny_generator_config(corpus.vocabulary.size(), seed);
    config.max_expansion_len = 6;
    GeneratorModel<double> model = init_generator<double>(config);
    const VectorX<double> condition = VectorX<double>::Zero(4);
    const int marker = 4;

    const auto frequency = [&]() {
        int hits = 0;
        const int draws = 200;
        const MatrixX<double> memory = encode(model, {5}, condition);
        for (int i = 0; i < draws; ++i) {
            Rng rng(derive_seed(0x9e00 + seed, std::uint64_t(i)));
            const auto drawn = complete(model, memory, condition, {}, DecodeMode::sample, rng);
            if (std::find(drawn.expansion_ids.begin(), drawn.expansion_ids.end(), marker) !=
                drawn.expansion_ids.end()) {
                ++hits;
            }
        }
        return double(hits) / double(draws);
    };

    const double before = frequency();
    AdamOptimizer<double> optimizer(model.params, 0.02);
    for (int update = 0; update < 20; ++update) {
        const MatrixX<double> memory = encode(model, {5}, condition);
        std::vector<SampledSequence<double>> batch;
        std::vector<double> rewards;
        for (int i = 0; i < 8; ++i) {
            Rng rng(derive_seed(0x7a00 + seed * 64 + std::uint64_t(update), std::uint64_t(i)));
            const auto drawn = complete(model, memory, condition, {}, DecodeMode::sample, rng);
            SampledSequence<double> sample;
            sample.query_ids = {5};
            sample.condition = condition;
            sample.actions = drawn.expansion_ids;
            if (drawn.finished) sample.actions.push_back(Vocabulary::kEos);
            sample.finished = drawn.finished;
            if (sample.actions.empty()) continue;
            const bool has_marker =
                std::find(drawn.expansion_ids.begin(), drawn.expansion_ids.end(), marker) !=
                drawn.expansion_ids.end();
            rewards.push_back(has_marker ? 1.0 : 0.0);
            batch.push_back(std::move(sample));
        }
        if (batch.empty()) continue;
        policy_gradient_update(model, optimizer, batch, rewards, 0.0);
    }
    return frequency() > before;
}

Outcome check_reward_following() {
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        if (marker_following_run(seed)) ++wins;
    }
    std::ostringstream detail;
    detail << "marker frequency rose in " << wins << "/5 seeds over 20 updates";
    return {wins >= 4, detail.str()};
}

// --------------------------------------------------------------------------
// 8. The discriminator separates a separable corpus within its epoch budget.
// --------------------------------------------------------------------------
Outcome check_discriminator_separation() {
    EmbeddingTable<double> table;
    table.dimension = 3;
    table.tokens = {"a", "b", "c", "d"};
    table.vectors = MatrixX<double>::Zero(4, 3);
    table.vectors << 1.0, 0.2, 0.0, 0.8, -0.1, 0.1, -1.0, 0.1, 0.3, -0.7, -0.2, -0.2;
    table.index = {{"a", 0}, {"b", 1}, {"c", 2}, {"d", 3}};

    Rng rng(7);
    const auto draw = [&](const std::vector<std::string>& alphabet) {
        std::vector<TokenSequence> out;
        for (int i = 0; i < 20; ++i) {
            std::vector<std::string> tokens;
            const std::size_t len = 2 + rng.below(4);
            for (std::size_t t = 0; t < len; ++t) {
                tokens.push_back(alphabet[rng.below(alphabet.size())]);
            }
            out.push_back(TokenSequence::from_tokens(std::move(tokens)));
        }
        return out;
    };
    const auto real = draw({"a", "b"});
    const auto synthetic = draw({"c", "d"});

    DiscriminatorConfig config;
    config.token_dim = 3;
    config.lstm_hidden = 8;
    config.dropout = 0.0;
    config.batch_size = 8;
    config.seed = 21;
    DiscriminatorModel<double> model = init_discriminator<double>(config);
    const auto history = pretrain_discriminator(model, real, synthetic, table, 24);

    std::ostringstream detail;
    detail << "accuracy = " << history.back().accuracy << " after " << history.size()
           << " epochs";
    return {history.back().accuracy >= 0.95, detail.str()};
}

// --------------------------------------------------------------------------
// 9. A zero-advantage policy batch is a bitwise no-op.
// --------------------------------------------------------------------------
Outcome check_zero_advantage_noop() {
    const PairCorpus corpus = make_corpus({{"a", "b c"}});
    GeneratorModel<double> model =
        init_generator<double>(tiny_generator_config(corpus.vocabulary.size(), 11));
    AdamOptimizer<double> optimizer(model.params, 0.01);

    std::vector<SampledSequence<double>> batch(2);
    batch[0].query_ids = {4};
    batch[0].condition = VectorX<double>::Zero(4);
    batch[0].actions = {5, Vocabulary::kEos};
    batch[0].finished = true;
    batch[1].query_ids = {5};
    batch[1].condition = VectorX<double>::Zero(4);
    batch[1].actions = {6};

    // Take one genuine step first so the optimizer moments are non-trivial.
    policy_gradient_update(model, optimizer, batch, {0.9, 0.1}, 0.0);

    std::vector<MatrixX<double>> values, first, second;
    for (const auto& entry : model.params.entries) values.push_back(entry.value);
    for (const auto& m : optimizer.first_moment) first.push_back(m);
    for (const auto& m : optimizer.second_moment) second.push_back(m);
    const long long steps = optimizer.step_count;

    const double loss = policy_gradient_update(model, optimizer, batch, {0.4, 0.4}, 0.4);

    double delta = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        delta = std::max(delta,
                         (model.params.entries[i].value - values[i]).cwiseAbs().maxCoeff());
        delta = std::max(delta, (optimizer.first_moment[i] - first[i]).cwiseAbs().maxCoeff());
        delta = std::max(delta, (optimizer.second_moment[i] - second[i]).cwiseAbs().maxCoeff());
    }
    std::ostringstream detail;
    detail << "loss = " << loss << ", max parameter/moment delta = " << delta
           << ", extra steps = " << optimizer.step_count - steps;
    return {loss == 0.0 && delta == 0.0 && optimizer.step_count == steps, detail.str()};
}

// --------------------------------------------------------------------------
// 10. The whole pipeline is byte-deterministic for a fixed config and seed.
// --------------------------------------------------------------------------
std::map<std::string, std::string> tree_bytes(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) {
            out[fs::relative(entry.path(), root).string()] =
                read_file(entry.path().string());
        }
    }
    return out;
}

Outcome check_end_to_end_determinism() {
    testutil::TempDir dir;
    const std::vector<std::string> words = {"red",  "blue", "long", "short", "dress",
                                            "shirt", "shoe", "silk", "wool",  "warm",
                                            "cheap", "nice"};
    std::ostringstream corpus;
    for (int i = 0; i < 50; ++i) {
        const auto& q1 = words[std::size_t(i % 12)];
        const auto& q2 = words[std::size_t((i * 5 + 3) % 12)];
        const auto& d1 = words[std::size_t((i * 7 + 1) % 12)];
        const auto& d2 = words[std::size_t((i * 3 + 4) % 12)];
        corpus << nlohmann::json{{"query", q1 + " " + q2},
                                 {"document", q1 + " " + d1 + " " + d2}}
                      .dump()
               << "\n";
    }
    dir.file("corpus.jsonl", corpus.str());

    std::ostringstream vectors;
    vectors << words.size() << " 4\n";
    for (std::size_t i = 0; i < words.size(); ++i) {
        vectors << words[i] << " " << 0.1 * double(i + 1) << " " << 0.2 * double(i % 3)
                << " " << 0.1 * double((i * 7) % 5) << " " << (i % 2 == 0 ? 0.4 : -0.3)
                << "\n";
    }
    dir.file("embeddings.vec", vectors.str());

    RunConfig config;
    config.corpus_path = (dir.path / "corpus.jsonl").string();
    config.embeddings_path = (dir.path / "embeddings.vec").string();
    config.strategy = "doc-sim";
    config.seed = 1;
    config.conditions.k_docs = 2;
    config.conditions.k_words = 2;
    config.conditions.leaf_size = 4;
    config.generator.token_dim = 4;
    config.generator.condition_dim = 4;
    config.generator.hidden_dim = 8;
    config.generator.encoder_layers = 1;
    config.generator.decoder_layers = 1;
    config.generator.attention_heads = 2;
    config.generator.dropout = 0.1;
    config.generator.max_expansion_len = 4;
    config.generator.learning_rate = 0.01;
    config.generator.pretrain_epochs = 3;
    config.generator.batch_size = 8;
    config.discriminator.token_dim = 4;
    config.discriminator.lstm_hidden = 4;
    config.discriminator.dropout = 0.1;
    config.discriminator.epochs = 3;
    config.discriminator.batch_size = 8;
    config.adversarial.rollout_count = 2;
    config.adversarial.max_expansion_len = 4;
    config.adversarial.epochs = 2;
    config.adversarial.patience = 3;
    config.adversarial.learning_rate = 1e-4;
    const std::string cfg = dir.file("config.json", config.to_json().dump(2) + "\n");
    const std::string queries = dir.file("queries.txt", "red dress\nwarm wool\n");

    const auto run_into = [&](const std::string& workdir) -> bool {
        MuteStreams mute;
        const std::vector<std::vector<std::string>> commands = {
            {"prepare", "--config", cfg, "--workdir", workdir},
            {"pretrain-gen", "--config", cfg, "--workdir", workdir},
            {"pretrain-disc", "--config", cfg, "--workdir", workdir},
            {"adv-train", "--config", cfg, "--workdir", workdir},
            {"expand", "--config", cfg, "--workdir", workdir, "--queries-file", queries,
             "--output", workdir + "/expansions.jsonl"},
            {"evaluate", "--config", cfg, "--workdir", workdir},
        };
        for (const auto& command : commands) {
            if (cli::run(command) != 0) return false;
        }
        return true;
    };

    const std::string run_a = (dir.path / "run_a").string();
    const std::string run_b = (dir.path / "run_b").string();
    if (!run_into(run_a) || !run_into(run_b)) {
        return {false, "a pipeline command failed"};
    }

    const auto bytes_a = tree_bytes(run_a);
    const auto bytes_b = tree_bytes(run_b);
    if (bytes_a.size() != bytes_b.size()) {
        return {false, "run directories hold different file sets"};
    }
    for (const auto& [name, content] : bytes_a) {
        const auto it = bytes_b.find(name);
        if (it == bytes_b.end() || it->second != content) {
            return {false, "byte mismatch in " + name};
        }
    }
    std::ostringstream detail;
    detail << bytes_a.size() << " files byte-identical across independent runs";
    return {true, detail.str()};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        Outcome (*check)();
        double budget_seconds;
    };
    const std::vector<Criterion> criteria = {
        {"perplexity equals exp(cross entropy) and matches the anchor pair",
         check_perplexity_law, 60.0},
        {"ball-tree neighbours match a linear scan exactly", check_ball_tree_exactness, 30.0},
        {"word coverage and semantic similarity reproduce hand anchors",
         check_metric_anchors, 60.0},
        {"analytic gradients match finite differences on 100+ coordinates",
         check_gradients, 120.0},
        {"a single pair is memorised and reproduced within 200 epochs",
         check_single_pair_overfit, 60.0},
        {"doc-sim conditions beat self conditions on a neighbour-informative corpus",
         check_strategy_contrast, 600.0},
        {"policy updates raise the frequency of a rewarded marker token",
         check_reward_following, 300.0},
        {"the discriminator separates disjoint-alphabet corpora to 95%+",
         check_discriminator_separation, 120.0},
        {"a zero-advantage policy batch is a bitwise no-op", check_zero_advantage_noop, 60.0},
        {"the full pipeline is byte-deterministic end to end",
         check_end_to_end_determinism, 300.0},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = criteria[i].check();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_budget = elapsed < criteria[i].budget_seconds;
        const bool ok = outcome.ok && in_budget;
        if (!ok) ++failures;

        std::ostringstream line;
        line << (ok ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].name << "  ["
             << std::fixed << std::setprecision(2) << elapsed << "s]";
        if (!outcome.detail.empty()) line << "  " << outcome.detail;
        if (!in_budget) line << "  (over the " << criteria[i].budget_seconds << "s budget)";
        std::cout << line.str() << std::endl;
    }
    return failures;
}
