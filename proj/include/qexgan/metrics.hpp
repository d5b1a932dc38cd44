#ifndef QEXGAN_METRICS_HPP
#define QEXGAN_METRICS_HPP

#include <cmath>
#include <cstdio>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qexgan/discriminator.hpp"
#include "qexgan/embedding.hpp"
#include "qexgan/generator.hpp"

namespace qexgan {

/// Mean teacher-forced token cross entropy and its perplexity exp(ce).
template <typename Scalar>
std::pair<double, double> cross_entropy_and_perplexity(
    const GeneratorModel<Scalar>& model, const std::vector<const QueryDocPair*>& pairs,
    const ConditionFn<Scalar>& condition_of) {
    const double ce = double(teacher_forced_ce(model, pairs, condition_of));
    return {ce, std::exp(ce)};
}

/// WC = |distinct expansion tokens| / |distinct document-corpus tokens|.
/// Counts expansion terms only, never the original query words; values above 1
/// are legal.
inline double word_coverage(const std::vector<TokenSequence>& expansions,
                            const std::vector<TokenSequence>& documents) {
    if (documents.empty()) {
        throw ValidationError("word coverage needs a non-empty document corpus");
    }
    std::set<std::string> document_words;
    for (const auto& doc : documents) {
        document_words.insert(doc.surface.begin(), doc.surface.end());
    }
    if (document_words.empty()) {
        throw ValidationError("document corpus has no tokens");
    }
    std::set<std::string> expansion_words;
    for (const auto& exp : expansions) {
        expansion_words.insert(exp.surface.begin(), exp.surface.end());
    }
    return double(expansion_words.size()) / double(document_words.size());
}

template <typename Scalar>
struct SemanticSimilarity {
    Scalar mean = 0;
    Scalar std_dev = 0;  // population standard deviation
    std::size_t used_pairs = 0;
    std::size_t skipped_pairs = 0;  // zero-norm CBOW on either side
};

/// Mean and population std of cosine(CBOW(expanded query i), CBOW(document i)).
template <typename Scalar>
SemanticSimilarity<Scalar> semantic_similarity(const std::vector<TokenSequence>& expanded,
                                               const std::vector<TokenSequence>& references,
                                               const EmbeddingTable<Scalar>& table) {
    if (expanded.size() != references.size()) {
        throw ValidationError("semantic similarity needs pairwise-aligned lists");
    }
    if (expanded.empty()) {
        throw ValidationError("semantic similarity needs at least one pair");
    }
    std::vector<Scalar> cosines;
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < expanded.size(); ++i) {
        const VectorX<Scalar> a = cbow(expanded[i], table);
        const VectorX<Scalar> b = cbow(references[i], table);
        const Scalar na = a.norm();
        const Scalar nb = b.norm();
        if (na == Scalar(0) || nb == Scalar(0)) {
            ++skipped;
            continue;
        }
        cosines.push_back(a.dot(b) / (na * nb));
    }
    if (cosines.empty()) {
        throw ValidationError("every pair had a zero-norm CBOW vector");
    }
    SemanticSimilarity<Scalar> result;
    result.used_pairs = cosines.size();
    result.skipped_pairs = skipped;
    Scalar sum = 0;
    for (const Scalar c : cosines) sum += c;
    result.mean = sum / Scalar(cosines.size());
    Scalar sq = 0;
    for (const Scalar c : cosines) sq += (c - result.mean) * (c - result.mean);
    result.std_dev = std::sqrt(sq / Scalar(cosines.size()));
    return result;
}

struct LabeledSequence {
    TokenSequence sequence;
    int label = 0;  // 1 = real document, 0 = synthetic
};

/// Threshold 0.5; a tie (probability exactly 0.5) predicts synthetic.
template <typename Scalar>
double discriminator_accuracy(const DiscriminatorModel<Scalar>& model,
                              const std::vector<LabeledSequence>& labeled,
                              const EmbeddingTable<Scalar>& table) {
    if (labeled.empty()) {
        throw ValidationError("discriminator accuracy needs a non-empty labeled set");
    }
    std::size_t correct = 0;
    for (const auto& example : labeled) {
        const int predicted = classify(model, example.sequence, table) > Scalar(0.5) ? 1 : 0;
        if (predicted == example.label) ++correct;
    }
    return double(correct) / double(labeled.size());
}

struct EvaluationReport {
    double ce = 0.0;
    double perplexity = 0.0;
    double word_coverage = 0.0;
    double ss_mean = 0.0;
    double ss_std = 0.0;
    double discriminator_accuracy = 0.0;
    std::size_t ss_used_pairs = 0;
    std::size_t ss_skipped_pairs = 0;
    std::string strategy;
    std::string dataset;
    std::string reward_mode;
    std::string ss_composition = "query_plus_expansion";
    std::string std_kind = "population";
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        return nlohmann::json{{"ce", ce},
                              {"perplexity", perplexity},
                              {"word_coverage", word_coverage},
                              {"semantic_similarity_mean", ss_mean},
                              {"semantic_similarity_std", ss_std},
                              {"discriminator_accuracy", discriminator_accuracy},
                              {"ss_used_pairs", ss_used_pairs},
                              {"ss_skipped_pairs", ss_skipped_pairs},
                              {"metadata",
                               {{"strategy", strategy},
                                {"dataset", dataset},
                                {"reward_mode", reward_mode},
                                {"ss_composition", ss_composition},
                                {"std_kind", std_kind},
                                {"seed", seed}}}};
    }

    /// Table row "CE | PPL | WC | SS(μ, ε)".
    std::string table_row() const {
        char buffer[128];
        std::snprintf(buffer, sizeof(buffer), "%.3f | %.3f | %.2f | (%.2f, %.2f)", ce,
                      perplexity, word_coverage, ss_mean, ss_std);
        return buffer;
    }
};

struct EvaluateOptions {
    std::string strategy;
    std::string dataset;
    std::string reward_mode;
    std::uint64_t seed = 0;
    bool ss_expansion_only = false;  // score the expansion alone instead of query ⊕ expansion
};

/// Greedy-decodes every test query and composes the four metrics above.
template <typename Scalar>
EvaluationReport evaluate_run(const GeneratorModel<Scalar>& generator,
                              const DiscriminatorModel<Scalar>& discriminator,
                              const std::vector<const QueryDocPair*>& test,
                              const ConditionFn<Scalar>& condition_of,
                              const EmbeddingTable<Scalar>& table, const Vocabulary& vocab,
                              const EvaluateOptions& options) {
    if (test.empty()) {
        throw ValidationError("evaluation needs a non-empty test split");
    }
    EvaluationReport report;
    std::tie(report.ce, report.perplexity) =
        cross_entropy_and_perplexity(generator, test, condition_of);

    std::vector<TokenSequence> expansions;
    std::vector<TokenSequence> scored;  // SS left-hand side
    std::vector<TokenSequence> documents;
    std::vector<LabeledSequence> labeled;
    for (const QueryDocPair* pair : test) {
        const VectorX<Scalar> condition = condition_of(pair->query);
        const GenerationResult<Scalar> generated =
            generate(generator, pair->query.ids, condition, DecodeMode::greedy, options.seed);
        const TokenSequence expansion = generated.to_sequence(vocab);

        TokenSequence expanded;
        expanded.ids = pair->query.ids;
        expanded.ids.insert(expanded.ids.end(), expansion.ids.begin(), expansion.ids.end());
        expanded.surface = pair->query.surface;
        expanded.surface.insert(expanded.surface.end(), expansion.surface.begin(),
                                expansion.surface.end());

        scored.push_back(options.ss_expansion_only ? expansion : expanded);
        labeled.push_back({pair->document, 1});
        labeled.push_back({expanded, 0});
        expansions.push_back(std::move(expansion));
        documents.push_back(pair->document);
    }

    report.word_coverage = word_coverage(expansions, documents);
    const SemanticSimilarity<Scalar> ss = semantic_similarity(scored, documents, table);
    report.ss_mean = double(ss.mean);
    report.ss_std = double(ss.std_dev);
    report.ss_used_pairs = ss.used_pairs;
    report.ss_skipped_pairs = ss.skipped_pairs;
    report.discriminator_accuracy = discriminator_accuracy(discriminator, labeled, table);
    report.strategy = options.strategy;
    report.dataset = options.dataset;
    report.reward_mode = options.reward_mode;
    report.ss_composition =
        options.ss_expansion_only ? "expansion_only" : "query_plus_expansion";
    report.seed = options.seed;
    return report;
}

}  // namespace qexgan

#endif
