#ifndef QEXGAN_CONDITIONS_HPP
#define QEXGAN_CONDITIONS_HPP

#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "qexgan/ball_tree.hpp"
#include "qexgan/common.hpp"
#include "qexgan/corpus.hpp"
#include "qexgan/embedding.hpp"
#include "qexgan/tfidf.hpp"

namespace qexgan {

enum class ConditionStrategy { self, tfidf, doc_sim, word_sim };

inline const char* strategy_name(ConditionStrategy s) {
    switch (s) {
        case ConditionStrategy::self: return "self";
        case ConditionStrategy::tfidf: return "tfidf";
        case ConditionStrategy::doc_sim: return "doc_sim";
        case ConditionStrategy::word_sim: return "word_sim";
    }
    return "self";
}

inline ConditionStrategy strategy_from_name(const std::string& name) {
    if (name == "self") return ConditionStrategy::self;
    if (name == "tfidf") return ConditionStrategy::tfidf;
    if (name == "doc_sim" || name == "doc-sim") return ConditionStrategy::doc_sim;
    if (name == "word_sim" || name == "word-sim") return ConditionStrategy::word_sim;
    throw ValidationError("unknown condition strategy: " + name);
}

/// Everything a strategy may need, built once from the training-side corpus.
/// Components are optional; make_condition checks for the ones it uses.
template <typename Scalar>
struct ConditionContext {
    using Matrix = MatrixX<Scalar>;
    using Vector = VectorX<Scalar>;

    const EmbeddingTable<Scalar>* table = nullptr;

    std::optional<TfIdfModel<Scalar>> tfidf;

    // Document similarity: documents indexed by their CBOW vectors.
    std::unique_ptr<BallTree<Scalar>> doc_tree;
    Matrix doc_cbows;

    // Word similarity over the document-side vocabulary (in-table words only).
    std::unique_ptr<BallTree<Scalar>> word_tree;
    Matrix word_vectors;
    std::vector<std::string> word_tokens;

    int k_docs = 1;
    int k_words = 5;
};

struct ConditionContextParams {
    int k_docs = 1;
    int k_words = 5;
    int leaf_size = 16;
};

/// Builds the full strategy context from the train+valid portion of the
/// corpus (conditions exist before any training happens).
template <typename Scalar>
ConditionContext<Scalar> build_condition_context(const PairCorpus& corpus,
                                                 const EmbeddingTable<Scalar>& table,
                                                 const ConditionContextParams& params = {}) {
    using Matrix = MatrixX<Scalar>;
    ConditionContext<Scalar> ctx;
    ctx.table = &table;
    ctx.k_docs = params.k_docs;
    ctx.k_words = params.k_words;

    std::vector<const TokenSequence*> documents;
    for (const auto& pair : corpus.pairs) {
        if (!corpus.has_splits || pair.split != Split::test) documents.push_back(&pair.document);
    }
    if (documents.empty()) throw ValidationError("condition context: no training documents");

    ctx.tfidf = fit_tfidf<Scalar>(documents);

    ctx.doc_cbows.resize(static_cast<Eigen::Index>(documents.size()), table.dimension);
    for (std::size_t i = 0; i < documents.size(); ++i) {
        ctx.doc_cbows.row(static_cast<Eigen::Index>(i)) =
            cbow(*documents[i], table).transpose();
    }
    ctx.doc_tree = std::make_unique<BallTree<Scalar>>(ctx.doc_cbows, params.leaf_size);

    std::set<std::string> doc_vocab;
    for (const TokenSequence* doc : documents) {
        doc_vocab.insert(doc->surface.begin(), doc->surface.end());
    }
    for (const auto& tok : doc_vocab) {
        if (table.contains(tok)) ctx.word_tokens.push_back(tok);
    }
    if (!ctx.word_tokens.empty()) {
        ctx.word_vectors.resize(static_cast<Eigen::Index>(ctx.word_tokens.size()),
                                table.dimension);
        for (std::size_t i = 0; i < ctx.word_tokens.size(); ++i) {
            ctx.word_vectors.row(static_cast<Eigen::Index>(i)) =
                table.lookup(ctx.word_tokens[i]).transpose();
        }
        ctx.word_tree = std::make_unique<BallTree<Scalar>>(ctx.word_vectors, params.leaf_size);
    }
    return ctx;
}

template <typename Scalar>
struct ConditionResult {
    VectorX<Scalar> values;
    bool empty_query = false;
};

template <typename Scalar>
ConditionResult<Scalar> make_condition(const TokenSequence& query, ConditionStrategy strategy,
                                       const ConditionContext<Scalar>& ctx) {
    using Vector = VectorX<Scalar>;
    if (ctx.table == nullptr) throw ValidationError("make_condition: missing embedding table");
    if (query.empty()) {
        return {Vector::Zero(ctx.table->dimension), true};
    }

    switch (strategy) {
        case ConditionStrategy::self:
            return {cbow(query, *ctx.table), false};
        case ConditionStrategy::tfidf: {
            if (!ctx.tfidf) throw ValidationError("make_condition: tfidf model missing");
            return {cbow(query, *ctx.table,
                         std::optional<std::vector<Scalar>>(tfidf_weights(query, *ctx.tfidf))),
                    false};
        }
        case ConditionStrategy::doc_sim: {
            if (!ctx.doc_tree) throw ValidationError("make_condition: document index missing");
            const Vector q = cbow(query, *ctx.table);
            const auto hits = ctx.doc_tree->nearest(q, ctx.k_docs);
            Vector acc = Vector::Zero(ctx.table->dimension);
            for (const auto& hit : hits.neighbors) {
                acc += ctx.doc_cbows.row(hit.index).transpose();
            }
            return {acc / static_cast<Scalar>(hits.neighbors.size()), false};
        }
        case ConditionStrategy::word_sim: {
            if (!ctx.word_tree) throw ValidationError("make_condition: word index missing");
            const Vector q = cbow(query, *ctx.table);
            const auto hits = ctx.word_tree->nearest(q, ctx.k_words);
            Vector acc = Vector::Zero(ctx.table->dimension);
            for (const auto& hit : hits.neighbors) {
                acc += ctx.word_vectors.row(hit.index).transpose();
            }
            return {acc / static_cast<Scalar>(hits.neighbors.size()), false};
        }
    }
    throw std::runtime_error("unreachable strategy");
}

/// Precomputed query -> condition cache keyed by the normalized query string.
/// Misses at inference time are computed on the fly with the same context.
template <typename Scalar>
struct ConditionTable {
    using Vector = VectorX<Scalar>;

    ConditionStrategy strategy = ConditionStrategy::self;
    std::vector<std::string> keys;  // first-seen order, for stable persistence
    std::unordered_map<std::string, Vector> entries;
    std::string corpus_hash;
    std::string embedding_hash;

    bool contains(const std::string& key) const { return entries.count(key) > 0; }
    std::size_t size() const { return entries.size(); }

    const Vector* find(const TokenSequence& query) const {
        const auto it = entries.find(query.joined());
        return it == entries.end() ? nullptr : &it->second;
    }
};

/// One entry per distinct train/valid query string.
template <typename Scalar>
ConditionTable<Scalar> precompute_condition_table(const PairCorpus& corpus,
                                                  ConditionStrategy strategy,
                                                  const ConditionContext<Scalar>& ctx) {
    ConditionTable<Scalar> table;
    table.strategy = strategy;
    for (const auto& pair : corpus.pairs) {
        if (corpus.has_splits && pair.split == Split::test) continue;
        const std::string key = pair.query.joined();
        if (table.entries.count(key)) continue;
        table.entries[key] = make_condition(pair.query, strategy, ctx).values;
        table.keys.push_back(key);
    }
    return table;
}

/// Looks a query up in the table, falling back to an on-the-fly computation
/// when a context is available. Used by training (table only, strict) and by
/// inference (table + context).
template <typename Scalar>
class ConditionSource {
public:
    ConditionSource(const ConditionTable<Scalar>* table, const ConditionContext<Scalar>* context)
        : table_(table), context_(context) {}

    VectorX<Scalar> get(const TokenSequence& query) const {
        if (table_ != nullptr) {
            if (const auto* hit = table_->find(query)) return *hit;
        }
        if (context_ != nullptr) {
            const ConditionStrategy strategy =
                table_ != nullptr ? table_->strategy : strategy_;
            return make_condition(query, strategy, *context_).values;
        }
        throw ValidationError("no condition available for query: \"" + query.joined() + "\"");
    }

    void set_strategy(ConditionStrategy s) { strategy_ = s; }

private:
    const ConditionTable<Scalar>* table_;
    const ConditionContext<Scalar>* context_;
    ConditionStrategy strategy_ = ConditionStrategy::self;
};

template <typename Scalar>
std::string condition_table_to_jsonl(const ConditionTable<Scalar>& table) {
    std::ostringstream out;
    for (const auto& key : table.keys) {
        nlohmann::json record;
        record["query"] = key;
        record["strategy"] = strategy_name(table.strategy);
        const auto& vec = table.entries.at(key);
        std::vector<double> values(vec.data(), vec.data() + vec.size());
        record["vector"] = values;
        out << record.dump() << '\n';
    }
    return out.str();
}

template <typename Scalar>
ConditionTable<Scalar> condition_table_from_jsonl(const std::string& content) {
    ConditionTable<Scalar> table;
    std::istringstream in(content);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json record = nlohmann::json::parse(line);
        const std::string key = record.at("query").get<std::string>();
        const auto strategy = strategy_from_name(record.at("strategy").get<std::string>());
        if (first) {
            table.strategy = strategy;
            first = false;
        } else if (strategy != table.strategy) {
            throw ValidationError("condition table mixes strategies");
        }
        const auto values = record.at("vector").get<std::vector<double>>();
        VectorX<Scalar> vec(static_cast<Eigen::Index>(values.size()));
        for (std::size_t i = 0; i < values.size(); ++i) {
            vec(static_cast<Eigen::Index>(i)) = static_cast<Scalar>(values[i]);
        }
        if (!table.entries.count(key)) table.keys.push_back(key);
        table.entries[key] = std::move(vec);
    }
    return table;
}

}  // namespace qexgan

#endif
