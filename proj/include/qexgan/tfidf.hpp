#ifndef QEXGAN_TFIDF_HPP
#define QEXGAN_TFIDF_HPP

#include <cmath>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "qexgan/common.hpp"
#include "qexgan/corpus.hpp"

namespace qexgan {

/// Smoothed inverse document frequencies over a document collection:
/// idf(t) = ln((1 + N) / (1 + df(t))) + 1, finite even for unseen tokens.
template <typename Scalar>
struct TfIdfModel {
    std::unordered_map<std::string, std::size_t> document_frequency;
    std::size_t document_count = 0;
    std::unordered_map<std::string, Scalar> idf;

    Scalar idf_of(const std::string& token) const {
        const auto it = idf.find(token);
        if (it != idf.end()) return it->second;
        return smoothed_idf(0);
    }

    Scalar smoothed_idf(std::size_t df) const {
        return static_cast<Scalar>(
            std::log((1.0 + double(document_count)) / (1.0 + double(df))) + 1.0);
    }
};

template <typename Scalar>
TfIdfModel<Scalar> fit_tfidf(const std::vector<const TokenSequence*>& documents) {
    if (documents.empty()) throw ValidationError("fit_tfidf: empty document list");
    TfIdfModel<Scalar> model;
    model.document_count = documents.size();
    for (const TokenSequence* doc : documents) {
        const std::set<std::string> distinct(doc->surface.begin(), doc->surface.end());
        for (const auto& tok : distinct) ++model.document_frequency[tok];
    }
    for (const auto& [tok, df] : model.document_frequency) {
        model.idf[tok] = model.smoothed_idf(df);
    }
    return model;
}

template <typename Scalar>
TfIdfModel<Scalar> fit_tfidf(const std::vector<TokenSequence>& documents) {
    std::vector<const TokenSequence*> ptrs;
    ptrs.reserve(documents.size());
    for (const auto& d : documents) ptrs.push_back(&d);
    return fit_tfidf<Scalar>(ptrs);
}

/// Per-token weights for a query: tf(t in query) * idf(t).
template <typename Scalar>
std::vector<Scalar> tfidf_weights(const TokenSequence& query, const TfIdfModel<Scalar>& model) {
    std::unordered_map<std::string, int> tf;
    for (const auto& tok : query.surface) ++tf[tok];
    std::vector<Scalar> weights;
    weights.reserve(query.size());
    for (const auto& tok : query.surface) {
        weights.push_back(static_cast<Scalar>(tf[tok]) * model.idf_of(tok));
    }
    return weights;
}

}  // namespace qexgan

#endif
