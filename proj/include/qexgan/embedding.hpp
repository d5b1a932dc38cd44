#ifndef QEXGAN_EMBEDDING_HPP
#define QEXGAN_EMBEDDING_HPP

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "qexgan/common.hpp"
#include "qexgan/corpus.hpp"

namespace qexgan {

enum class OovPolicy { zero, unk_vector };

/// Token -> dense vector map of fixed dimension. Lookups never fail: misses
/// resolve through the OOV policy.
template <typename Scalar>
struct EmbeddingTable {
    using Matrix = MatrixX<Scalar>;
    using Vector = VectorX<Scalar>;

    int dimension = 0;
    std::vector<std::string> tokens;           // file order, duplicates dropped
    std::unordered_map<std::string, int> index;
    Matrix vectors;                            // one row per token
    OovPolicy policy = OovPolicy::zero;
    Vector unk_vector;

    int size() const { return static_cast<int>(tokens.size()); }
    bool contains(const std::string& token) const { return index.count(token) > 0; }

    Vector lookup(const std::string& token) const {
        const auto it = index.find(token);
        if (it != index.end()) return vectors.row(it->second).transpose();
        if (policy == OovPolicy::unk_vector && unk_vector.size() == dimension) return unk_vector;
        return Vector::Zero(dimension);
    }
};

/// Parses the text vector format: optional "count dim" header, then one line
/// per token ("token v1 v2 ... vdim"). First occurrence wins on duplicates.
template <typename Scalar>
EmbeddingTable<Scalar> load_embedding_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("embedding file not found: " + path);

    EmbeddingTable<Scalar> table;
    std::vector<std::vector<Scalar>> rows;
    std::string line;
    std::size_t line_no = 0;
    bool first_content_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        if (token.empty()) continue;

        std::vector<Scalar> values;
        double v = 0.0;
        while (ls >> v) values.push_back(static_cast<Scalar>(v));
        if (!ls.eof()) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": unparseable embedding value");
        }

        if (first_content_line) {
            first_content_line = false;
            // A "count dim" header is exactly two bare integers.
            std::istringstream hs(line);
            std::string a, b, rest;
            if (hs >> a >> b && !(hs >> rest) &&
                a.find_first_not_of("0123456789") == std::string::npos &&
                b.find_first_not_of("0123456789") == std::string::npos && !b.empty()) {
                continue;
            }
        }
        if (values.empty()) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": token without vector values");
        }
        if (table.dimension == 0) {
            table.dimension = static_cast<int>(values.size());
        } else if (static_cast<int>(values.size()) != table.dimension) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": inconsistent vector length (expected " +
                                  std::to_string(table.dimension) + ", got " +
                                  std::to_string(values.size()) + ")");
        }
        if (table.index.count(token)) continue;  // keep first occurrence
        table.index[token] = static_cast<int>(table.tokens.size());
        table.tokens.push_back(token);
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw ValidationError(path + ": no embedding vectors");

    table.vectors.resize(static_cast<Eigen::Index>(rows.size()), table.dimension);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < table.dimension; ++j) {
            table.vectors(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
        }
    }
    // A literal <unk> row becomes the fallback under the unk_vector policy.
    if (const auto it = table.index.find("<unk>"); it != table.index.end()) {
        table.unk_vector = table.vectors.row(it->second).transpose();
    }
    return table;
}

template <typename Scalar>
std::string embedding_table_to_text(const EmbeddingTable<Scalar>& table) {
    std::ostringstream out;
    out << table.size() << ' ' << table.dimension << '\n';
    for (int i = 0; i < table.size(); ++i) {
        out << table.tokens[static_cast<std::size_t>(i)];
        for (int j = 0; j < table.dimension; ++j) {
            out << ' ' << fmt_double(static_cast<double>(table.vectors(i, j)));
        }
        out << '\n';
    }
    return out.str();
}

template <typename Scalar>
void save_embedding_table(const EmbeddingTable<Scalar>& table, const std::string& path) {
    write_file(path, embedding_table_to_text(table));
}

/// Principal-component projection of the mean-centered vocabulary matrix onto
/// the top `target_dim` axes. Sign convention: each axis is flipped so its
/// largest-magnitude component is positive, which pins the output across runs.
template <typename Scalar>
EmbeddingTable<Scalar> reduce_dimensions(const EmbeddingTable<Scalar>& table, int target_dim) {
    using Matrix = MatrixX<Scalar>;
    using Vector = VectorX<Scalar>;
    if (target_dim <= 0) throw ValidationError("target_dim must be positive");
    if (target_dim > table.dimension) {
        throw ValidationError("target_dim " + std::to_string(target_dim) +
                              " exceeds embedding dimension " + std::to_string(table.dimension));
    }

    const Eigen::Index n = table.vectors.rows();
    const Vector mean = table.vectors.colwise().mean().transpose();
    const Matrix centered = table.vectors.rowwise() - mean.transpose();
    const Matrix covariance = (centered.transpose() * centered) / static_cast<Scalar>(n);

    Eigen::SelfAdjointEigenSolver<Matrix> solver(covariance);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("eigendecomposition failed in reduce_dimensions");
    }
    const Vector eigenvalues = solver.eigenvalues();  // ascending
    const Matrix eigenvectors = solver.eigenvectors();

    const Scalar max_eig = std::max(eigenvalues(eigenvalues.size() - 1), Scalar(0));
    const Scalar tol = std::max(Scalar(n) * max_eig * Eigen::NumTraits<Scalar>::epsilon(),
                                Scalar(1e-12));
    int rank = 0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        if (eigenvalues(i) > tol) ++rank;
    }
    if (rank < target_dim) {
        throw ValidationError("covariance rank " + std::to_string(rank) +
                              " is below target_dim " + std::to_string(target_dim));
    }

    Matrix projection(table.dimension, target_dim);
    for (int k = 0; k < target_dim; ++k) {
        Vector axis = eigenvectors.col(eigenvalues.size() - 1 - k);
        Eigen::Index arg_max = 0;
        axis.cwiseAbs().maxCoeff(&arg_max);
        if (axis(arg_max) < Scalar(0)) axis = -axis;
        projection.col(k) = axis;
    }

    EmbeddingTable<Scalar> reduced;
    reduced.dimension = target_dim;
    reduced.tokens = table.tokens;
    reduced.index = table.index;
    reduced.policy = table.policy;
    reduced.vectors = centered * projection;
    if (table.policy == OovPolicy::unk_vector && table.unk_vector.size() == table.dimension) {
        reduced.unk_vector = projection.transpose() * (table.unk_vector - mean);
    }
    return reduced;
}

/// Row i is the embedding of token i (OOV resolved by policy).
template <typename Scalar>
MatrixX<Scalar> embed_sequence(const TokenSequence& tokens, const EmbeddingTable<Scalar>& table) {
    MatrixX<Scalar> out(static_cast<Eigen::Index>(tokens.size()), table.dimension);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = table.lookup(tokens.surface[i]).transpose();
    }
    return out;
}

/// Weighted mean of token embeddings, normalized by the weight sum. Empty
/// input or zero total weight yields the zero vector.
template <typename Scalar>
VectorX<Scalar> cbow(const TokenSequence& tokens, const EmbeddingTable<Scalar>& table,
                     const std::optional<std::vector<Scalar>>& weights = std::nullopt) {
    if (weights && weights->size() != tokens.size()) {
        throw ValidationError("cbow: weights length does not match token count");
    }
    VectorX<Scalar> acc = VectorX<Scalar>::Zero(table.dimension);
    Scalar total = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const Scalar w = weights ? (*weights)[i] : Scalar(1);
        acc += w * table.lookup(tokens.surface[i]);
        total += w;
    }
    if (tokens.empty() || total == Scalar(0)) return VectorX<Scalar>::Zero(table.dimension);
    return acc / total;
}

}  // namespace qexgan

#endif
