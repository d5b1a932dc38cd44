#ifndef QEXGAN_PIPELINE_HPP
#define QEXGAN_PIPELINE_HPP

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qexgan/adversarial.hpp"
#include "qexgan/conditions.hpp"
#include "qexgan/discriminator.hpp"
#include "qexgan/generator.hpp"
#include "qexgan/metrics.hpp"

namespace qexgan {

/// Whole-run configuration; one strategy per run, one JSON file on disk.
struct RunConfig {
    std::string corpus_path;
    std::string corpus_format = "jsonl";  // or "tsv"
    std::string embeddings_path;
    std::string workdir;
    std::string strategy = "self";
    std::uint64_t seed = 1;
    std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
    int min_count = 1;
    int embedding_target_dim = 0;  // 0 keeps the file's dimension
    std::string oov_policy = "zero";
    ConditionContextParams conditions;
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;
    AdversarialConfig adversarial;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);

    /// Copy with per-module seeds derived from the run seed; the run seed is
    /// the only seed a user controls.
    RunConfig resolved() const;
};

/// Fixed file layout under the working directory.
struct WorkdirLayout {
    std::filesystem::path root;

    explicit WorkdirLayout(const std::string& workdir);

    std::filesystem::path artifacts_dir() const { return root / "artifacts"; }
    std::filesystem::path checkpoints_dir() const { return root / "checkpoints"; }
    std::filesystem::path reports_dir() const { return root / "reports"; }

    std::filesystem::path corpus() const { return artifacts_dir() / "corpus.jsonl"; }
    std::filesystem::path vocabulary() const { return artifacts_dir() / "vocabulary.json"; }
    std::filesystem::path embeddings() const { return artifacts_dir() / "embeddings.vec"; }
    std::filesystem::path conditions() const { return artifacts_dir() / "conditions.jsonl"; }
    std::filesystem::path manifest() const { return artifacts_dir() / "manifest.json"; }

    std::filesystem::path generator_checkpoint() const {
        return checkpoints_dir() / "generator_pretrained.ckpt";
    }
    std::filesystem::path discriminator_checkpoint() const {
        return checkpoints_dir() / "discriminator_pretrained.ckpt";
    }
    std::filesystem::path adversarial_checkpoint() const {
        return checkpoints_dir() / "generator_adversarial.ckpt";
    }
    std::filesystem::path adversarial_best_checkpoint() const {
        return checkpoints_dir() / "generator_adversarial_best.ckpt";
    }

    std::filesystem::path corpus_stats_report() const {
        return reports_dir() / "corpus_stats.json";
    }
    std::filesystem::path generator_history() const {
        return reports_dir() / "generator_pretrain_history.jsonl";
    }
    std::filesystem::path discriminator_history() const {
        return reports_dir() / "discriminator_pretrain_history.jsonl";
    }
    std::filesystem::path discriminator_report() const {
        return reports_dir() / "discriminator_pretrain.json";
    }
    std::filesystem::path adversarial_history() const {
        return reports_dir() / "adversarial_history.jsonl";
    }
    std::filesystem::path evaluation_report() const { return reports_dir() / "evaluation.json"; }
    std::filesystem::path evaluation_row() const { return reports_dir() / "evaluation_row.txt"; }

    std::filesystem::path lock_file() const { return root / ".lock"; }
};

/// Advisory single-writer lock on a workdir; held for the span of a command.
class WorkdirLock {
public:
    explicit WorkdirLock(const WorkdirLayout& layout);
    ~WorkdirLock();
    WorkdirLock(const WorkdirLock&) = delete;
    WorkdirLock& operator=(const WorkdirLock&) = delete;

private:
    std::filesystem::path path_;
};

struct ExpandOutput {
    std::string query;
    std::vector<std::string> expansion_terms;
    std::string expanded_query;
    std::string strategy;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

struct PretrainDiscSummary {
    std::vector<DiscriminatorEpochStats> history;
    std::string synthetic_split;
    std::size_t examples_per_class = 0;
};

void cmd_prepare(const RunConfig& config);
std::vector<GeneratorEpochStats> cmd_pretrain_gen(const RunConfig& config,
                                                  std::optional<int> epochs_override,
                                                  bool half_epochs);
PretrainDiscSummary cmd_pretrain_disc(const RunConfig& config, std::optional<int> epochs_override,
                                      bool half_epochs, const std::string& synthetic_split);
AdversarialResult<double> cmd_adv_train(const RunConfig& config,
                                        std::optional<int> epochs_override);
std::vector<ExpandOutput> cmd_expand(const RunConfig& config,
                                     const std::vector<std::string>& queries);
EvaluationReport cmd_evaluate(const RunConfig& config);

}  // namespace qexgan

#endif
