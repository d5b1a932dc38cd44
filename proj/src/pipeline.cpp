#include "qexgan/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qexgan/checkpoint.hpp"

namespace qexgan {

namespace {

namespace fs = std::filesystem;

OovPolicy oov_policy_from_name(const std::string& name) {
    if (name == "zero") return OovPolicy::zero;
    if (name == "unk_vector" || name == "unk") return OovPolicy::unk_vector;
    throw ValidationError("unknown oov policy: " + name);
}

CorpusFormat corpus_format_from_name(const std::string& name) {
    if (name == "jsonl") return CorpusFormat::jsonl;
    if (name == "tsv") return CorpusFormat::tsv;
    throw ValidationError("unknown corpus format: " + name);
}

std::string hash_of(std::string_view content) { return to_hex(fnv1a64(content)); }

void require_file(const std::string& path, const char* what) {
    if (!fs::exists(path)) {
        throw ValidationError(std::string(what) + " not found: " + path);
    }
}

void write_artifact(const fs::path& path, std::string_view content) {
    fs::create_directories(path.parent_path());
    write_file(path.string(), content);
}

/// Everything the training and evaluation commands read back from `prepare`.
struct Artifacts {
    PairCorpus corpus;
    EmbeddingTable<double> table;
    ConditionTable<double> cond_table;
    nlohmann::json manifest;
    std::string corpus_hash;
    std::string vocabulary_hash;
    std::string embeddings_hash;
    std::string conditions_hash;
};

std::string manifest_hash(const nlohmann::json& manifest, const char* name) {
    return manifest.at("artifacts").at(name).at("hash").get<std::string>();
}

std::string verified_read(const fs::path& path, const nlohmann::json& manifest,
                          const char* name) {
    if (!fs::exists(path)) {
        throw ValidationError(std::string("artifact ") + name +
                              " is missing: " + path.string());
    }
    std::string content = read_file(path.string());
    const std::string expected = manifest_hash(manifest, name);
    const std::string actual = hash_of(content);
    if (expected != actual) {
        throw ValidationError(std::string("artifact ") + name + " hash mismatch: manifest has " +
                              expected + ", file has " + actual);
    }
    return content;
}

Artifacts load_artifacts(const RunConfig& config, const WorkdirLayout& layout) {
    if (!fs::exists(layout.manifest())) {
        throw ValidationError("no manifest in workdir (run prepare first): " +
                              layout.manifest().string());
    }
    Artifacts art;
    art.manifest = nlohmann::json::parse(read_file(layout.manifest().string()));

    const std::string corpus_bytes = verified_read(layout.corpus(), art.manifest, "corpus");
    const std::string vocab_bytes = verified_read(layout.vocabulary(), art.manifest, "vocabulary");
    const std::string emb_bytes = verified_read(layout.embeddings(), art.manifest, "embeddings");
    const std::string cond_bytes = verified_read(layout.conditions(), art.manifest, "conditions");
    art.corpus_hash = hash_of(corpus_bytes);
    art.vocabulary_hash = hash_of(vocab_bytes);
    art.embeddings_hash = hash_of(emb_bytes);
    art.conditions_hash = hash_of(cond_bytes);

    art.corpus = corpus_from_jsonl(corpus_bytes);
    index_corpus(art.corpus, vocabulary_from_json(vocab_bytes));

    const fs::path emb_tmp = layout.embeddings();
    art.table = load_embedding_table<double>(emb_tmp.string());
    art.table.policy = oov_policy_from_name(config.oov_policy);

    art.cond_table = condition_table_from_jsonl<double>(cond_bytes);
    art.cond_table.corpus_hash = art.corpus_hash;
    art.cond_table.embedding_hash = art.embeddings_hash;

    const std::string manifest_strategy = art.manifest.at("strategy").get<std::string>();
    if (strategy_from_name(manifest_strategy) != strategy_from_name(config.strategy)) {
        throw ValidationError("workdir was prepared with strategy " + manifest_strategy +
                              " but the run asks for " + config.strategy +
                              " (re-run prepare)");
    }
    return art;
}

void check_checkpoint_hashes(const Checkpoint<double>& ckpt, const Artifacts& art,
                             const std::string& which) {
    if (ckpt.vocab_hash != art.vocabulary_hash) {
        throw ValidationError(which + " checkpoint vocabulary hash mismatch: checkpoint has " +
                              ckpt.vocab_hash + ", artifacts have " + art.vocabulary_hash);
    }
    if (ckpt.embedding_hash != art.embeddings_hash) {
        throw ValidationError(which + " checkpoint embedding hash mismatch: checkpoint has " +
                              ckpt.embedding_hash + ", artifacts have " + art.embeddings_hash);
    }
}

Checkpoint<double> read_checkpoint(const fs::path& path, const char* what) {
    if (!fs::exists(path)) {
        throw ValidationError(std::string(what) + " checkpoint not found: " + path.string());
    }
    return checkpoint_from_bytes<double>(read_file(path.string()));
}

GeneratorModel<double> generator_from_checkpoint(const Checkpoint<double>& ckpt) {
    if (ckpt.kind != "generator") {
        throw ValidationError("expected a generator checkpoint, found kind " + ckpt.kind);
    }
    GeneratorModel<double> model = init_generator<double>(GeneratorConfig::from_json(ckpt.config));
    restore_params(model.params, ckpt);
    return model;
}

DiscriminatorModel<double> discriminator_from_checkpoint(const Checkpoint<double>& ckpt) {
    if (ckpt.kind != "discriminator") {
        throw ValidationError("expected a discriminator checkpoint, found kind " + ckpt.kind);
    }
    DiscriminatorModel<double> model =
        init_discriminator<double>(DiscriminatorConfig::from_json(ckpt.config));
    restore_params(model.params, ckpt);
    return model;
}

void fill_ids(TokenSequence& seq, const Vocabulary& vocab) {
    seq.ids.clear();
    seq.ids.reserve(seq.surface.size());
    for (const auto& token : seq.surface) seq.ids.push_back(vocab.id_of(token));
}

TokenSequence synthetic_sequence(const QueryDocPair& pair, const std::vector<int>& expansion_ids,
                                 const Vocabulary& vocab) {
    TokenSequence seq;
    seq.ids = pair.query.ids;
    seq.ids.insert(seq.ids.end(), expansion_ids.begin(), expansion_ids.end());
    seq.surface = pair.query.surface;
    for (int id : expansion_ids) seq.surface.push_back(vocab.token(id));
    return seq;
}

int resolve_epochs(int base, std::optional<int> override_epochs, bool half) {
    int epochs = override_epochs.value_or(base);
    if (epochs < 1) throw ValidationError("epochs must be positive");
    if (half) epochs = std::max(1, epochs / 2);
    return epochs;
}

std::string optional_field(const std::optional<double>& value) {
    return value ? fmt_double(*value) : std::string("null");
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
    return nlohmann::json{
        {"corpus", {{"path", corpus_path}, {"format", corpus_format}}},
        {"embeddings",
         {{"path", embeddings_path},
          {"target_dim", embedding_target_dim},
          {"oov_policy", oov_policy}}},
        {"workdir", workdir},
        {"strategy", strategy},
        {"seed", seed},
        {"split_ratios", split_ratios},
        {"min_count", min_count},
        {"conditions",
         {{"k_docs", conditions.k_docs},
          {"k_words", conditions.k_words},
          {"leaf_size", conditions.leaf_size}}},
        {"generator", generator.to_json()},
        {"discriminator", discriminator.to_json()},
        {"adversarial", adversarial.to_json()}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig config;
    if (j.contains("corpus")) {
        config.corpus_path = j.at("corpus").value("path", config.corpus_path);
        config.corpus_format = j.at("corpus").value("format", config.corpus_format);
    }
    if (j.contains("embeddings")) {
        const auto& e = j.at("embeddings");
        config.embeddings_path = e.value("path", config.embeddings_path);
        config.embedding_target_dim = e.value("target_dim", config.embedding_target_dim);
        config.oov_policy = e.value("oov_policy", config.oov_policy);
    }
    config.workdir = j.value("workdir", config.workdir);
    config.strategy = j.value("strategy", config.strategy);
    config.seed = j.value("seed", config.seed);
    if (j.contains("split_ratios")) {
        const auto ratios = j.at("split_ratios").get<std::vector<double>>();
        if (ratios.size() != 3) {
            throw ValidationError("split_ratios needs exactly three values");
        }
        std::copy(ratios.begin(), ratios.end(), config.split_ratios.begin());
    }
    config.min_count = j.value("min_count", config.min_count);
    if (j.contains("conditions")) {
        const auto& c = j.at("conditions");
        config.conditions.k_docs = c.value("k_docs", config.conditions.k_docs);
        config.conditions.k_words = c.value("k_words", config.conditions.k_words);
        config.conditions.leaf_size = c.value("leaf_size", config.conditions.leaf_size);
    }
    if (j.contains("generator")) {
        config.generator = GeneratorConfig::from_json(j.at("generator"));
    }
    if (j.contains("discriminator")) {
        config.discriminator = DiscriminatorConfig::from_json(j.at("discriminator"));
    }
    if (j.contains("adversarial")) {
        config.adversarial = AdversarialConfig::from_json(j.at("adversarial"));
    }
    return config;
}

RunConfig RunConfig::load(const std::string& path) {
    require_file(path, "config file");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config file " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

RunConfig RunConfig::resolved() const {
    RunConfig copy = *this;
    copy.generator.seed = derive_seed(seed, 0x11);
    copy.discriminator.seed = derive_seed(seed, 0x22);
    copy.adversarial.seed = derive_seed(seed, 0x33);
    return copy;
}

WorkdirLayout::WorkdirLayout(const std::string& workdir) : root(workdir) {
    if (workdir.empty()) {
        throw ValidationError("no workdir given (flag --workdir, config, or QEXGAN_WORKDIR)");
    }
}

WorkdirLock::WorkdirLock(const WorkdirLayout& layout) : path_(layout.lock_file()) {
    fs::create_directories(layout.root);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        throw ValidationError("workdir is locked by another command (remove " + path_.string() +
                              " if that command crashed)");
    }
    ::close(fd);
}

WorkdirLock::~WorkdirLock() { ::unlink(path_.c_str()); }

nlohmann::json ExpandOutput::to_json() const {
    return nlohmann::json{{"query", query},
                          {"expansion_terms", expansion_terms},
                          {"expanded_query", expanded_query},
                          {"condition_strategy", strategy}};
}

void cmd_prepare(const RunConfig& config) {
    require_file(config.corpus_path, "corpus file");
    require_file(config.embeddings_path, "embedding file");
    const ConditionStrategy strategy = strategy_from_name(config.strategy);

    const WorkdirLayout layout(config.workdir);
    const WorkdirLock lock(layout);

    PairCorpus corpus = load_pairs(config.corpus_path, corpus_format_from_name(config.corpus_format));
    index_corpus(corpus, build_vocabulary(corpus, config.min_count));
    split_corpus(corpus, config.split_ratios, config.seed);

    EmbeddingTable<double> table = load_embedding_table<double>(config.embeddings_path);
    table.policy = oov_policy_from_name(config.oov_policy);
    if (config.embedding_target_dim > 0 && config.embedding_target_dim != table.dimension) {
        table = reduce_dimensions(table, config.embedding_target_dim);
    }
    if (table.dimension != config.generator.token_dim ||
        table.dimension != config.generator.condition_dim ||
        table.dimension != config.discriminator.token_dim) {
        throw ValidationError(
            "embedding dimension " + std::to_string(table.dimension) +
            " must match generator token_dim/condition_dim and discriminator token_dim");
    }

    const std::string corpus_bytes = corpus_to_jsonl(corpus);
    const std::string vocab_bytes = vocabulary_to_json(corpus.vocabulary);
    const std::string emb_bytes = embedding_table_to_text(table);
    write_artifact(layout.corpus(), corpus_bytes);
    write_artifact(layout.vocabulary(), vocab_bytes);
    write_artifact(layout.embeddings(), emb_bytes);

    const ConditionContext<double> context = build_condition_context(corpus, table, config.conditions);
    ConditionTable<double> cond_table = precompute_condition_table(corpus, strategy, context);
    cond_table.corpus_hash = hash_of(corpus_bytes);
    cond_table.embedding_hash = hash_of(emb_bytes);
    const std::string cond_bytes = condition_table_to_jsonl(cond_table);
    write_artifact(layout.conditions(), cond_bytes);

    nlohmann::json manifest;
    manifest["artifacts"] = {
        {"corpus", {{"path", "artifacts/corpus.jsonl"}, {"hash", hash_of(corpus_bytes)}}},
        {"vocabulary", {{"path", "artifacts/vocabulary.json"}, {"hash", hash_of(vocab_bytes)}}},
        {"embeddings", {{"path", "artifacts/embeddings.vec"}, {"hash", hash_of(emb_bytes)}}},
        {"conditions", {{"path", "artifacts/conditions.jsonl"}, {"hash", hash_of(cond_bytes)}}}};
    manifest["strategy"] = strategy_name(strategy);
    manifest["seed"] = config.seed;
    write_artifact(layout.manifest(), manifest.dump(2) + "\n");

    write_artifact(layout.corpus_stats_report(),
                   corpus_stats_to_json(corpus_stats(corpus), corpus.dropped_records));
}

std::vector<GeneratorEpochStats> cmd_pretrain_gen(const RunConfig& raw_config,
                                                  std::optional<int> epochs_override,
                                                  bool half_epochs) {
    const RunConfig config = raw_config.resolved();
    const WorkdirLayout layout(config.workdir);
    const WorkdirLock lock(layout);
    const Artifacts art = load_artifacts(config, layout);

    GeneratorConfig gen_config = config.generator;
    gen_config.vocab_size = art.corpus.vocabulary.size();
    const int epochs = resolve_epochs(gen_config.pretrain_epochs, epochs_override, half_epochs);

    GeneratorModel<double> model = init_generator<double>(gen_config);
    load_token_embeddings(model, art.table, art.corpus.vocabulary);

    const ConditionSource<double> source(&art.cond_table, nullptr);
    const ConditionFn<double> condition_of = [&source](const TokenSequence& query) {
        return source.get(query);
    };
    const auto train = art.corpus.split_pairs(Split::train);
    const auto valid = art.corpus.split_pairs(Split::valid);
    const auto history = pretrain_generator(model, train, valid, condition_of, epochs);

    std::ostringstream lines;
    for (const auto& stats : history) {
        nlohmann::json record{{"epoch", stats.epoch}, {"train_ce", stats.train_ce}};
        if (stats.valid_ce) record["valid_ce"] = *stats.valid_ce;
        if (stats.valid_ppl) record["valid_ppl"] = *stats.valid_ppl;
        lines << record.dump() << '\n';
    }
    write_artifact(layout.generator_history(), lines.str());
    write_artifact(layout.generator_checkpoint(),
                   checkpoint_to_bytes("generator", gen_config.to_json(), model.params,
                                       art.vocabulary_hash, art.embeddings_hash));
    return history;
}

PretrainDiscSummary cmd_pretrain_disc(const RunConfig& raw_config,
                                      std::optional<int> epochs_override, bool half_epochs,
                                      const std::string& synthetic_split) {
    const RunConfig config = raw_config.resolved();
    const WorkdirLayout layout(config.workdir);
    const WorkdirLock lock(layout);
    const Artifacts art = load_artifacts(config, layout);

    const Split split = split_from_name(synthetic_split);
    if (split == Split::valid) {
        throw ValidationError("synthetic split must be test (default) or train");
    }

    const Checkpoint<double> gen_ckpt = read_checkpoint(layout.generator_checkpoint(), "generator");
    check_checkpoint_hashes(gen_ckpt, art, "generator");
    const GeneratorModel<double> generator = generator_from_checkpoint(gen_ckpt);

    const ConditionContext<double> context =
        build_condition_context(art.corpus, art.table, config.conditions);
    const ConditionSource<double> source(&art.cond_table, &context);

    std::vector<TokenSequence> real;
    std::vector<TokenSequence> synthetic;
    std::size_t index = 0;
    for (const QueryDocPair* pair : art.corpus.split_pairs(split)) {
        real.push_back(pair->document);
        const VectorX<double> condition = source.get(pair->query);
        const MatrixX<double> memory = encode(generator, pair->query.ids, condition);
        Rng rng(derive_seed(config.seed, 0x5d00 + index++));
        const auto drawn =
            complete(generator, memory, condition, {}, DecodeMode::sample, rng);
        synthetic.push_back(synthetic_sequence(*pair, drawn.expansion_ids, art.corpus.vocabulary));
    }

    DiscriminatorConfig disc_config = config.discriminator;
    if (disc_config.token_dim != art.table.dimension) {
        throw ValidationError("discriminator token_dim does not match the embedding artifact");
    }
    const int epochs = resolve_epochs(disc_config.epochs, epochs_override, half_epochs);
    DiscriminatorModel<double> model = init_discriminator<double>(disc_config);
    const auto history = pretrain_discriminator(model, real, synthetic, art.table, epochs);

    std::ostringstream lines;
    for (const auto& stats : history) {
        lines << nlohmann::json{{"epoch", stats.epoch},
                                {"loss", stats.loss},
                                {"accuracy", stats.accuracy}}
                     .dump()
              << '\n';
    }
    write_artifact(layout.discriminator_history(), lines.str());

    PretrainDiscSummary summary;
    summary.history = history;
    summary.synthetic_split = split_name(split);
    summary.examples_per_class = std::min(real.size(), synthetic.size());
    write_artifact(layout.discriminator_report(),
                   nlohmann::json{{"synthetic_split", summary.synthetic_split},
                                  {"epochs", epochs},
                                  {"examples_per_class", summary.examples_per_class}}
                           .dump(2) +
                       "\n");
    write_artifact(layout.discriminator_checkpoint(),
                   checkpoint_to_bytes("discriminator", disc_config.to_json(), model.params,
                                       art.vocabulary_hash, art.embeddings_hash));
    return summary;
}

AdversarialResult<double> cmd_adv_train(const RunConfig& raw_config,
                                        std::optional<int> epochs_override) {
    const RunConfig config = raw_config.resolved();
    const WorkdirLayout layout(config.workdir);
    const WorkdirLock lock(layout);
    const Artifacts art = load_artifacts(config, layout);

    const Checkpoint<double> gen_ckpt = read_checkpoint(layout.generator_checkpoint(), "generator");
    const Checkpoint<double> disc_ckpt =
        read_checkpoint(layout.discriminator_checkpoint(), "discriminator");
    check_checkpoint_hashes(gen_ckpt, art, "generator");
    check_checkpoint_hashes(disc_ckpt, art, "discriminator");
    GeneratorModel<double> generator = generator_from_checkpoint(gen_ckpt);
    DiscriminatorModel<double> discriminator = discriminator_from_checkpoint(disc_ckpt);

    AdversarialConfig adv_config = config.adversarial;
    if (epochs_override) adv_config.epochs = *epochs_override;
    adv_config.validate();

    const ConditionSource<double> source(&art.cond_table, nullptr);
    const ConditionFn<double> condition_of = [&source](const TokenSequence& query) {
        return source.get(query);
    };
    const auto train = art.corpus.split_pairs(Split::train);
    const auto valid = art.corpus.split_pairs(Split::valid);

    AdversarialResult<double> result =
        adversarial_train(generator, discriminator, art.table, art.corpus.vocabulary, train,
                          valid, condition_of, adv_config);

    std::ostringstream lines;
    for (const auto& stats : result.history) {
        nlohmann::json record{{"epoch", stats.epoch},
                              {"mean_reward", stats.mean_reward},
                              {"policy_loss", stats.policy_loss}};
        if (stats.valid_ce) record["valid_ce"] = *stats.valid_ce;
        if (stats.valid_ppl) record["valid_ppl"] = *stats.valid_ppl;
        lines << record.dump() << '\n';
    }
    write_artifact(layout.adversarial_history(), lines.str());

    const GeneratorConfig gen_config = GeneratorConfig::from_json(gen_ckpt.config);
    write_artifact(layout.adversarial_best_checkpoint(),
                   checkpoint_to_bytes("generator", gen_config.to_json(), generator.params,
                                       art.vocabulary_hash, art.embeddings_hash));
    for (std::size_t i = 0; i < generator.params.entries.size(); ++i) {
        generator.params.entries[i].value = result.final_values[i];
    }
    write_artifact(layout.adversarial_checkpoint(),
                   checkpoint_to_bytes("generator", gen_config.to_json(), generator.params,
                                       art.vocabulary_hash, art.embeddings_hash));
    return result;
}

std::vector<ExpandOutput> cmd_expand(const RunConfig& raw_config,
                                     const std::vector<std::string>& queries) {
    const RunConfig config = raw_config.resolved();
    const WorkdirLayout layout(config.workdir);
    const Artifacts art = load_artifacts(config, layout);

    const fs::path ckpt_path = fs::exists(layout.adversarial_best_checkpoint())
                                   ? layout.adversarial_best_checkpoint()
                                   : layout.generator_checkpoint();
    const Checkpoint<double> gen_ckpt = read_checkpoint(ckpt_path, "generator");
    check_checkpoint_hashes(gen_ckpt, art, "generator");
    const GeneratorModel<double> generator = generator_from_checkpoint(gen_ckpt);

    const ConditionContext<double> context =
        build_condition_context(art.corpus, art.table, config.conditions);
    const ConditionSource<double> source(&art.cond_table, &context);
    const std::string strategy = strategy_name(art.cond_table.strategy);

    std::vector<ExpandOutput> outputs;
    for (const std::string& raw_query : queries) {
        TokenSequence query = TokenSequence::from_text(raw_query);
        if (query.empty()) {
            throw ValidationError("query is empty after tokenization: \"" + raw_query + "\"");
        }
        fill_ids(query, art.corpus.vocabulary);

        ExpandOutput output;
        output.query = query.joined();
        output.strategy = strategy;
        bool any_known = false;
        for (const auto& token : query.surface) {
            if (art.table.contains(token)) {
                any_known = true;
                break;
            }
        }
        if (!any_known) {
            output.warnings.push_back("query \"" + output.query +
                                      "\" has no tokens in the embedding table; the condition "
                                      "falls back to a zero vector");
        }

        const VectorX<double> condition = source.get(query);
        const auto generated =
            generate(generator, query.ids, condition, DecodeMode::greedy, config.seed);
        const TokenSequence expansion = generated.to_sequence(art.corpus.vocabulary);
        output.expansion_terms = expansion.surface;
        output.expanded_query =
            expansion.empty() ? output.query : output.query + " " + expansion.joined();
        outputs.push_back(std::move(output));
    }
    return outputs;
}

EvaluationReport cmd_evaluate(const RunConfig& raw_config) {
    const RunConfig config = raw_config.resolved();
    const WorkdirLayout layout(config.workdir);
    const WorkdirLock lock(layout);
    const Artifacts art = load_artifacts(config, layout);

    const fs::path gen_path = fs::exists(layout.adversarial_best_checkpoint())
                                  ? layout.adversarial_best_checkpoint()
                                  : layout.generator_checkpoint();
    const Checkpoint<double> gen_ckpt = read_checkpoint(gen_path, "generator");
    const Checkpoint<double> disc_ckpt =
        read_checkpoint(layout.discriminator_checkpoint(), "discriminator");
    check_checkpoint_hashes(gen_ckpt, art, "generator");
    check_checkpoint_hashes(disc_ckpt, art, "discriminator");
    const GeneratorModel<double> generator = generator_from_checkpoint(gen_ckpt);
    const DiscriminatorModel<double> discriminator = discriminator_from_checkpoint(disc_ckpt);

    const ConditionContext<double> context =
        build_condition_context(art.corpus, art.table, config.conditions);
    const ConditionSource<double> source(&art.cond_table, &context);
    const ConditionFn<double> condition_of = [&source](const TokenSequence& query) {
        return source.get(query);
    };

    EvaluateOptions options;
    options.strategy = strategy_name(art.cond_table.strategy);
    options.dataset = fs::path(config.corpus_path).filename().string();
    options.reward_mode = reward_mode_name(config.adversarial.reward_mode);
    options.seed = config.seed;

    const EvaluationReport report =
        evaluate_run(generator, discriminator, art.corpus.split_pairs(Split::test), condition_of,
                     art.table, art.corpus.vocabulary, options);
    write_artifact(layout.evaluation_report(), report.to_json().dump(2) + "\n");
    write_artifact(layout.evaluation_row(), report.table_row() + "\n");
    return report;
}

}  // namespace qexgan
