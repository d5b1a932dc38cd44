#ifndef QEXGAN_CHECKPOINT_HPP
#define QEXGAN_CHECKPOINT_HPP

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "qexgan/common.hpp"
#include "qexgan/nn/params.hpp"

namespace qexgan {

// Versioned binary container: magic, kind string, config JSON, vocabulary and
// embedding-table hashes, then named float32 arrays in row-major order. All
// integers and floats are little-endian.

inline constexpr char kCheckpointMagic[8] = {'Q', 'X', 'G', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void append_scalar(std::string& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
}

inline void append_string(std::string& out, const std::string& value) {
    append_scalar<std::uint64_t>(out, value.size());
    out.append(value);
}

struct ByteReader {
    const std::string& bytes;
    std::size_t pos = 0;

    template <typename T>
    T read_scalar() {
        if (pos + sizeof(T) > bytes.size()) {
            throw ValidationError("checkpoint is truncated");
        }
        T value;
        std::memcpy(&value, bytes.data() + pos, sizeof(T));
        pos += sizeof(T);
        return value;
    }

    std::string read_string() {
        const std::uint64_t n = read_scalar<std::uint64_t>();
        if (pos + n > bytes.size()) {
            throw ValidationError("checkpoint is truncated");
        }
        std::string value = bytes.substr(pos, n);
        pos += n;
        return value;
    }
};

}  // namespace detail

template <typename Scalar>
struct CheckpointArray {
    std::string name;
    bool trainable = true;
    MatrixX<Scalar> value;
};

template <typename Scalar>
struct Checkpoint {
    std::string kind;  // "generator" or "discriminator"
    nlohmann::json config;
    std::string vocab_hash;
    std::string embedding_hash;
    std::vector<CheckpointArray<Scalar>> arrays;
};

template <typename Scalar>
std::string checkpoint_to_bytes(const std::string& kind, const nlohmann::json& config,
                                const ParamStore<Scalar>& params, const std::string& vocab_hash,
                                const std::string& embedding_hash) {
    std::string out;
    out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::append_scalar<std::uint32_t>(out, kCheckpointVersion);
    detail::append_string(out, kind);
    detail::append_string(out, config.dump());
    detail::append_string(out, vocab_hash);
    detail::append_string(out, embedding_hash);
    detail::append_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(params.entries.size()));
    for (const auto& entry : params.entries) {
        detail::append_string(out, entry.name);
        detail::append_scalar<std::uint8_t>(out, entry.trainable ? 1 : 0);
        detail::append_scalar<std::uint64_t>(out, static_cast<std::uint64_t>(entry.value.rows()));
        detail::append_scalar<std::uint64_t>(out, static_cast<std::uint64_t>(entry.value.cols()));
        for (Eigen::Index r = 0; r < entry.value.rows(); ++r) {
            for (Eigen::Index c = 0; c < entry.value.cols(); ++c) {
                detail::append_scalar<float>(out, static_cast<float>(entry.value(r, c)));
            }
        }
    }
    return out;
}

template <typename Scalar>
Checkpoint<Scalar> checkpoint_from_bytes(const std::string& bytes) {
    if (bytes.size() < sizeof(kCheckpointMagic) ||
        std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
        throw ValidationError("not a checkpoint file (bad magic)");
    }
    detail::ByteReader reader{bytes, sizeof(kCheckpointMagic)};
    const std::uint32_t version = reader.read_scalar<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw ValidationError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint<Scalar> ckpt;
    ckpt.kind = reader.read_string();
    ckpt.config = nlohmann::json::parse(reader.read_string());
    ckpt.vocab_hash = reader.read_string();
    ckpt.embedding_hash = reader.read_string();
    const std::uint32_t count = reader.read_scalar<std::uint32_t>();
    ckpt.arrays.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointArray<Scalar> array;
        array.name = reader.read_string();
        array.trainable = reader.read_scalar<std::uint8_t>() != 0;
        const auto rows = static_cast<Eigen::Index>(reader.read_scalar<std::uint64_t>());
        const auto cols = static_cast<Eigen::Index>(reader.read_scalar<std::uint64_t>());
        array.value.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                array.value(r, c) = Scalar(reader.read_scalar<float>());
            }
        }
        ckpt.arrays.push_back(std::move(array));
    }
    return ckpt;
}

/// Copies checkpoint arrays into `store`, matching entries by name. Every store
/// entry must be present with the same shape.
template <typename Scalar>
void restore_params(ParamStore<Scalar>& store, const Checkpoint<Scalar>& ckpt) {
    for (auto& entry : store.entries) {
        const CheckpointArray<Scalar>* found = nullptr;
        for (const auto& array : ckpt.arrays) {
            if (array.name == entry.name) {
                found = &array;
                break;
            }
        }
        if (found == nullptr) {
            throw ValidationError("checkpoint is missing parameter " + entry.name);
        }
        if (found->value.rows() != entry.value.rows() ||
            found->value.cols() != entry.value.cols()) {
            throw ValidationError("checkpoint parameter " + entry.name + " has shape " +
                                  std::to_string(found->value.rows()) + "x" +
                                  std::to_string(found->value.cols()) + ", expected " +
                                  std::to_string(entry.value.rows()) + "x" +
                                  std::to_string(entry.value.cols()));
        }
        entry.value = found->value;
    }
}

}  // namespace qexgan

#endif
