#ifndef QEXGAN_CORPUS_HPP
#define QEXGAN_CORPUS_HPP

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace qexgan {

/// A tokenized piece of text. `surface` always holds the token strings;
/// `ids` is filled once a vocabulary exists and stays aligned with `surface`.
struct TokenSequence {
    std::vector<int> ids;
    std::vector<std::string> surface;

    std::size_t size() const { return surface.size(); }
    bool empty() const { return surface.empty(); }
    std::string joined() const;

    static TokenSequence from_text(const std::string& text);
    static TokenSequence from_tokens(std::vector<std::string> tokens);
};

struct Vocabulary {
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;
    static constexpr int kReservedCount = 4;

    std::vector<std::string> id_to_token;
    std::unordered_map<std::string, int> token_to_id;

    int size() const { return static_cast<int>(id_to_token.size()); }
    /// Unknown tokens resolve to kUnk.
    int id_of(const std::string& token) const;
    const std::string& token(int id) const;
    bool contains(const std::string& token) const { return token_to_id.count(token) > 0; }
};

enum class Split { train, valid, test };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct QueryDocPair {
    TokenSequence query;
    TokenSequence document;
    Split split = Split::train;
};

struct PairCorpus {
    std::vector<QueryDocPair> pairs;
    Vocabulary vocabulary;
    std::size_t dropped_records = 0;
    bool has_vocabulary = false;
    bool has_splits = false;

    std::size_t size() const { return pairs.size(); }
    std::vector<const QueryDocPair*> split_pairs(Split s) const;
};

enum class CorpusFormat { jsonl, tsv };

/// Reads (query, document) records. Blank-after-tokenization records are
/// dropped and counted; malformed records raise ValidationError with the
/// line number.
PairCorpus load_pairs(const std::string& path, CorpusFormat format);

/// Joint query+document vocabulary: 4 specials, then tokens with frequency
/// >= min_count ordered by (frequency desc, token asc).
Vocabulary build_vocabulary(const PairCorpus& corpus, int min_count = 1);

/// Resolves every token sequence's ids against `vocab` (UNK for misses) and
/// stores the vocabulary in the corpus.
void index_corpus(PairCorpus& corpus, Vocabulary vocab);

/// Seeded shuffle split. Ratios must be positive and sum to 1 (1e-9 slack);
/// needs at least 3 pairs so every split is non-empty.
void split_corpus(PairCorpus& corpus, const std::array<double, 3>& ratios, std::uint64_t seed);

struct SideStats {
    std::size_t min_words = 0;
    double mean_words = 0.0;
    std::size_t max_words = 0;
    std::size_t unique_words = 0;
};

struct CorpusStats {
    SideStats query;
    SideStats document;
    std::size_t pair_count = 0;
};

CorpusStats corpus_stats(const PairCorpus& corpus);

// Artifact persistence (JSONL corpus with split tags, vocabulary as JSON).
std::string corpus_to_jsonl(const PairCorpus& corpus);
PairCorpus corpus_from_jsonl(const std::string& content);
std::string vocabulary_to_json(const Vocabulary& vocab);
Vocabulary vocabulary_from_json(const std::string& content);
std::string corpus_stats_to_json(const CorpusStats& stats, std::size_t dropped_records);

}  // namespace qexgan

#endif
