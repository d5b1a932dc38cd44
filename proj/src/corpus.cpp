#include "qexgan/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qexgan/common.hpp"
#include "qexgan/text.hpp"

namespace qexgan {

using nlohmann::json;

std::string TokenSequence::joined() const { return join_tokens(surface); }

TokenSequence TokenSequence::from_text(const std::string& text) {
    TokenSequence seq;
    seq.surface = tokenize(text);
    return seq;
}

TokenSequence TokenSequence::from_tokens(std::vector<std::string> tokens) {
    TokenSequence seq;
    seq.surface = std::move(tokens);
    return seq;
}

int Vocabulary::id_of(const std::string& tok) const {
    const auto it = token_to_id.find(tok);
    return it == token_to_id.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
    return id_to_token.at(static_cast<std::size_t>(id));
}

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "valid") return Split::valid;
    if (name == "test") return Split::test;
    throw ValidationError("unknown split tag: " + name);
}

std::vector<const QueryDocPair*> PairCorpus::split_pairs(Split s) const {
    std::vector<const QueryDocPair*> out;
    for (const auto& p : pairs) {
        if (p.split == s) out.push_back(&p);
    }
    return out;
}

namespace {

void append_record(PairCorpus& corpus, const std::string& query_text,
                   const std::string& document_text) {
    QueryDocPair pair;
    pair.query = TokenSequence::from_text(query_text);
    pair.document = TokenSequence::from_text(document_text);
    if (pair.query.empty() || pair.document.empty()) {
        ++corpus.dropped_records;
        return;
    }
    corpus.pairs.push_back(std::move(pair));
}

}  // namespace

PairCorpus load_pairs(const std::string& path, CorpusFormat format) {
    std::ifstream in(path);
    if (!in) throw ValidationError("corpus file not found: " + path);

    PairCorpus corpus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (format == CorpusFormat::jsonl) {
            json record = json::parse(line, nullptr, false);
            if (record.is_discarded() || !record.is_object() ||
                !record.contains("query") || !record.contains("document") ||
                !record["query"].is_string() || !record["document"].is_string()) {
                throw ValidationError(path + ":" + std::to_string(line_no) +
                                      ": malformed JSONL record");
            }
            append_record(corpus, record["query"].get<std::string>(),
                          record["document"].get<std::string>());
        } else {
            const auto tab = line.find('\t');
            if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
                throw ValidationError(path + ":" + std::to_string(line_no) +
                                      ": expected exactly two tab-separated columns");
            }
            append_record(corpus, line.substr(0, tab), line.substr(tab + 1));
        }
    }
    if (corpus.pairs.empty()) {
        throw ValidationError(path + ": no valid (query, document) records");
    }
    return corpus;
}

Vocabulary build_vocabulary(const PairCorpus& corpus, int min_count) {
    if (corpus.pairs.empty()) throw ValidationError("cannot build vocabulary: empty corpus");
    if (min_count < 1) throw ValidationError("min_count must be >= 1");

    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& pair : corpus.pairs) {
        for (const auto& tok : pair.query.surface) ++counts[tok];
        for (const auto& tok : pair.document.surface) ++counts[tok];
    }

    std::vector<std::pair<std::string, std::size_t>> kept;
    kept.reserve(counts.size());
    for (const auto& [tok, count] : counts) {
        if (count >= static_cast<std::size_t>(min_count)) kept.emplace_back(tok, count);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary vocab;
    vocab.id_to_token = {"<pad>", "<bos>", "<eos>", "<unk>"};
    for (auto& [tok, count] : kept) vocab.id_to_token.push_back(std::move(tok));
    for (int id = 0; id < vocab.size(); ++id) vocab.token_to_id[vocab.id_to_token[id]] = id;
    return vocab;
}

void index_corpus(PairCorpus& corpus, Vocabulary vocab) {
    for (auto& pair : corpus.pairs) {
        for (auto* side : {&pair.query, &pair.document}) {
            side->ids.clear();
            side->ids.reserve(side->surface.size());
            for (const auto& tok : side->surface) side->ids.push_back(vocab.id_of(tok));
        }
    }
    corpus.vocabulary = std::move(vocab);
    corpus.has_vocabulary = true;
}

void split_corpus(PairCorpus& corpus, const std::array<double, 3>& ratios, std::uint64_t seed) {
    for (const double r : ratios) {
        if (!(r > 0.0)) throw ValidationError("split ratios must be positive");
    }
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
        throw ValidationError("split ratios must sum to 1");
    }
    const std::size_t n = corpus.pairs.size();
    if (n < 3) throw ValidationError("need at least 3 pairs to split");

    std::size_t n_train = static_cast<std::size_t>(std::llround(ratios[0] * double(n)));
    std::size_t n_valid = static_cast<std::size_t>(std::llround(ratios[1] * double(n)));
    n_train = std::min(n_train, n - 2);
    n_valid = std::min(std::max<std::size_t>(n_valid, 1), n - n_train - 1);
    n_train = std::max<std::size_t>(n_train, 1);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, 0x5714));
    rng.shuffle(order);

    for (std::size_t rank = 0; rank < n; ++rank) {
        Split tag = Split::test;
        if (rank < n_train) {
            tag = Split::train;
        } else if (rank < n_train + n_valid) {
            tag = Split::valid;
        }
        corpus.pairs[order[rank]].split = tag;
    }
    corpus.has_splits = true;
}

namespace {

SideStats side_stats(const PairCorpus& corpus, bool query_side) {
    SideStats stats;
    stats.min_words = std::numeric_limits<std::size_t>::max();
    std::size_t total = 0;
    std::set<std::string> uniq;
    for (const auto& pair : corpus.pairs) {
        const TokenSequence& seq = query_side ? pair.query : pair.document;
        stats.min_words = std::min(stats.min_words, seq.size());
        stats.max_words = std::max(stats.max_words, seq.size());
        total += seq.size();
        uniq.insert(seq.surface.begin(), seq.surface.end());
    }
    stats.mean_words = static_cast<double>(total) / static_cast<double>(corpus.pairs.size());
    stats.unique_words = uniq.size();
    return stats;
}

}  // namespace

CorpusStats corpus_stats(const PairCorpus& corpus) {
    if (corpus.pairs.empty()) throw ValidationError("cannot compute stats: empty corpus");
    CorpusStats stats;
    stats.pair_count = corpus.pairs.size();
    stats.query = side_stats(corpus, true);
    stats.document = side_stats(corpus, false);
    return stats;
}

std::string corpus_to_jsonl(const PairCorpus& corpus) {
    std::ostringstream out;
    for (const auto& pair : corpus.pairs) {
        json record;
        record["query"] = pair.query.surface;
        record["document"] = pair.document.surface;
        record["split"] = split_name(pair.split);
        out << record.dump() << '\n';
    }
    return out.str();
}

PairCorpus corpus_from_jsonl(const std::string& content) {
    PairCorpus corpus;
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded()) {
            throw ValidationError("corpus artifact line " + std::to_string(line_no) +
                                  ": malformed JSON");
        }
        QueryDocPair pair;
        pair.query = TokenSequence::from_tokens(record.at("query").get<std::vector<std::string>>());
        pair.document =
            TokenSequence::from_tokens(record.at("document").get<std::vector<std::string>>());
        pair.split = split_from_name(record.at("split").get<std::string>());
        corpus.pairs.push_back(std::move(pair));
    }
    corpus.has_splits = true;
    return corpus;
}

std::string vocabulary_to_json(const Vocabulary& vocab) {
    json doc;
    doc["tokens"] = vocab.id_to_token;
    return doc.dump(2) + "\n";
}

Vocabulary vocabulary_from_json(const std::string& content) {
    const json doc = json::parse(content);
    Vocabulary vocab;
    vocab.id_to_token = doc.at("tokens").get<std::vector<std::string>>();
    if (vocab.size() < 4) throw ValidationError("vocabulary artifact misses special tokens");
    for (int id = 0; id < vocab.size(); ++id) vocab.token_to_id[vocab.id_to_token[id]] = id;
    return vocab;
}

std::string corpus_stats_to_json(const CorpusStats& stats, std::size_t dropped_records) {
    const auto side = [](const SideStats& s) {
        return json{{"min_words", s.min_words},
                    {"mean_words", s.mean_words},
                    {"max_words", s.max_words},
                    {"unique_words", s.unique_words}};
    };
    json doc{{"pair_count", stats.pair_count},
             {"dropped_records", dropped_records},
             {"query", side(stats.query)},
             {"document", side(stats.document)}};
    return doc.dump(2) + "\n";
}

}  // namespace qexgan
