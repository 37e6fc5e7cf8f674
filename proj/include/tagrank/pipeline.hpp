#ifndef TAGRANK_PIPELINE_HPP
#define TAGRANK_PIPELINE_HPP

#include "baseline.hpp"
#include "candidates.hpp"
#include "common.hpp"
#include "corpus.hpp"
#include "embeddings.hpp"
#include "eval.hpp"
#include "knn.hpp"
#include "ranker.hpp"
#include "tagstats.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

/**
 * @file pipeline.hpp
 *
 * @brief End-to-end experiment: training statistics, candidate mining, per-user training and evaluation.
 *
 * Everything fitted here reads training sessions only. Test sessions are touched to mine their
 * candidates (neighbors come from the training index) and to score predictions.
 */

namespace tagrank {

enum class Method { ranker, ptrerank, candidates_only, random_user };

inline std::string method_name(Method m) {
    switch (m) {
    case Method::ranker:
        return "ranker";
    case Method::ptrerank:
        return "ptrerank";
    case Method::candidates_only:
        return "candidates_only";
    case Method::random_user:
        return "random_user";
    }
    return "unknown";
}

inline Method parse_method(const std::string& name) {
    for (auto m : {Method::ranker, Method::ptrerank, Method::candidates_only, Method::random_user}) {
        if (method_name(m) == name) {
            return m;
        }
    }
    throw UsageError("unknown method '" + name + "'");
}

inline std::string mode_name(PairMode mode) {
    switch (mode) {
    case PairMode::supervised_only:
        return "supervised_only";
    case PairMode::semi_only:
        return "semi_only";
    case PairMode::combined:
        return "combined";
    }
    return "unknown";
}

inline PairMode parse_mode(const std::string& name) {
    for (auto m : {PairMode::supervised_only, PairMode::semi_only, PairMode::combined}) {
        if (mode_name(m) == name) {
            return m;
        }
    }
    throw UsageError("unknown mode '" + name + "'");
}

/// "inf" for an untruncated order.
inline std::string n_tags_name(std::optional<std::size_t> n) {
    return n ? std::to_string(*n) : std::string("inf");
}

struct PipelineConfig {
    std::uint64_t seed = 1;
    CandidateOptions candidates;
    SolverConfig solver;
    EmbeddingConfig embedding;
    RerankOptions rerank;
    PairMode mode = PairMode::combined;
    bool all_pairs = false;
    bool full_vocabulary_negatives = false;
    std::size_t k = 10;
    bool welch = false;
    unsigned threads = 0;
};

/// One model slot per user; empty when the user had no usable constraints.
struct ModelSet {
    std::optional<std::size_t> n_tags;
    PairMode mode = PairMode::combined;
    std::vector<std::optional<UserModel>> models;
    std::vector<std::string> skipped;

    std::vector<UserIndex> modeled_users() const {
        std::vector<UserIndex> out;
        for (std::size_t u = 0; u < models.size(); ++u) {
            if (models[u]) {
                out.push_back(static_cast<UserIndex>(u));
            }
        }
        return out;
    }
};

class Experiment {
public:
    Experiment(const Corpus& corpus, Split split, PipelineConfig config)
        : corpus_(corpus), split_(std::move(split)), config_(std::move(config)) {
        if (split_.train.empty() || split_.test.empty()) {
            throw DataError("experiment needs non-empty train and test partitions");
        }
        const std::size_t vocab = corpus_.vocabulary.size();
        global_ = compute_global_stats(select_sessions(corpus_, split_.train), vocab);
        stats_ = compute_candidate_stats(corpus_, split_);
        index_ = build_index(corpus_, split_.train);

        train_of_user_.resize(corpus_.users.size());
        for (auto id : split_.train) {
            train_of_user_[corpus_.sessions[id].user].push_back(id);
        }
        strengths_.resize(corpus_.users.size());
        for (std::size_t u = 0; u < corpus_.users.size(); ++u) {
            strengths_[u] = compute_strengths(select_sessions(corpus_, train_of_user_[u]));
        }

        train_candidates_.resize(split_.train.size());
        parallel_for(
            split_.train.size(),
            [&](std::size_t i) {
                const auto id = split_.train[i];
                const auto& session = corpus_.sessions[id];
                train_candidates_[i] = build_candidates(session, session.user, corpus_, index_, stats_, config_.candidates, true, id);
            },
            config_.threads);
        test_candidates_.resize(split_.test.size());
        parallel_for(
            split_.test.size(),
            [&](std::size_t i) {
                const auto& session = corpus_.sessions[split_.test[i]];
                test_candidates_[i] = build_candidates(session, session.user, corpus_, index_, stats_, config_.candidates, false);
            },
            config_.threads);
    }

    const Corpus& corpus() const { return corpus_; }
    const Split& split() const { return split_; }
    const PipelineConfig& config() const { return config_; }
    const GlobalTagStats& global_stats() const { return global_; }
    const CandidateStats& candidate_stats() const { return stats_; }
    const VisualIndex& index() const { return index_; }
    const std::vector<CandidateList>& train_candidates() const { return train_candidates_; }
    const std::vector<CandidateList>& test_candidates() const { return test_candidates_; }

    void train_embeddings() { set_embeddings(tagrank::train_embeddings(select_sessions(corpus_, split_.train), corpus_.vocabulary.size(), config_.embedding)); }

    void set_embeddings(TagEmbeddings embeddings) {
        embeddings_ = std::move(embeddings);
        features_ = FeatureMap(*embeddings_, global_);
    }

    const TagEmbeddings& embeddings() const {
        if (!embeddings_) {
            throw std::logic_error("embeddings not trained");
        }
        return *embeddings_;
    }

    const FeatureMap& features() const {
        if (!embeddings_) {
            throw std::logic_error("embeddings not trained");
        }
        return features_;
    }

    PairOptions pair_options(std::optional<std::size_t> n_tags) const {
        PairOptions options;
        options.mode = config_.mode;
        options.n = n_tags;
        options.all_pairs = config_.all_pairs;
        options.full_vocabulary_negatives = config_.full_vocabulary_negatives;
        options.vocab_size = corpus_.vocabulary.size();
        return options;
    }

    /// Training pairs for one user, in training-session order.
    std::vector<PreferencePair> user_pairs(UserIndex user, const PairOptions& options) const {
        std::vector<PreferencePair> pairs;
        for (std::size_t i = 0; i < split_.train.size(); ++i) {
            const auto id = split_.train[i];
            const auto& session = corpus_.sessions[id];
            if (session.user != user) {
                continue;
            }
            auto more = build_pairs(id, session.tags, train_candidates_[i], options);
            pairs.insert(pairs.end(), more.begin(), more.end());
        }
        return pairs;
    }

    /// Trains every user independently; users without constraints are recorded in `skipped`.
    ModelSet train_models(std::optional<std::size_t> n_tags) const {
        const auto options = pair_options(n_tags);
        const auto& features = this->features();
        ModelSet set;
        set.n_tags = n_tags;
        set.mode = config_.mode;
        set.models.resize(corpus_.users.size());
        parallel_for(
            corpus_.users.size(),
            [&](std::size_t u) {
                const auto pairs = user_pairs(static_cast<UserIndex>(u), options);
                if (pairs.empty()) {
                    return;
                }
                SolverConfig solver = config_.solver;
                solver.seed = derive_seed(config_.solver.seed, u);
                set.models[u] = train_user_model(std::span<const PreferencePair>(pairs), features, solver, corpus_.users[u].id);
            },
            config_.threads);
        for (std::size_t u = 0; u < set.models.size(); ++u) {
            if (!set.models[u]) {
                set.skipped.push_back(corpus_.users[u].id);
            }
        }
        return set;
    }

    /// Predicted order for test query `i` under a method. Users without a model fall back to the candidate order.
    std::vector<TagId> predict(std::size_t i, Method method, const ModelSet* models, std::optional<UserIndex> scorer = std::nullopt) const {
        const auto& session = corpus_.sessions[split_.test[i]];
        const auto candidates = test_candidates_[i].tags();
        switch (method) {
        case Method::candidates_only:
            return candidates;
        case Method::ptrerank:
            return rerank(candidates, strengths_[session.user], config_.rerank);
        case Method::ranker:
        case Method::random_user: {
            if (!models) {
                throw std::invalid_argument("predict: method needs trained models");
            }
            const UserIndex user = scorer.value_or(session.user);
            const auto& model = models->models.at(user);
            if (!model) {
                return candidates;
            }
            return rank_tags(*model, candidates, features());
        }
        }
        throw std::logic_error("predict: unknown method");
    }

    /// Scorer per test query for the random-user ablation.
    std::vector<UserIndex> random_assignment(const ModelSet& models, std::uint64_t seed) const {
        std::vector<UserIndex> owners;
        for (auto id : split_.test) {
            owners.push_back(corpus_.sessions[id].user);
        }
        return ablate_random_user(owners, models.modeled_users(), seed);
    }

    EvalReport evaluate(Method method, const ModelSet* models = nullptr, std::uint64_t ablation_seed = 0) const {
        std::vector<UserIndex> scorers;
        if (method == Method::random_user) {
            if (!models) {
                throw std::invalid_argument("evaluate: random_user needs trained models");
            }
            scorers = random_assignment(*models, ablation_seed);
        }
        std::vector<ImageScore> scores(split_.test.size());
        parallel_for(
            split_.test.size(),
            [&](std::size_t i) {
                const auto id = split_.test[i];
                const auto& session = corpus_.sessions[id];
                std::optional<UserIndex> scorer;
                if (method == Method::random_user) {
                    scorer = scorers[i];
                }
                const auto predicted = predict(i, method, models, scorer);
                scores[i] = {id, session.user, dcg(predicted, session.tags), dcg_at_k(predicted, session.tags, config_.k)};
            },
            config_.threads);

        std::string label = method_name(method);
        if (models && (method == Method::ranker || method == Method::random_user)) {
            label += ":" + mode_name(models->mode) + ":n=" + n_tags_name(models->n_tags);
        }
        return summarize(std::move(label), config_.k, std::move(scores));
    }

    TTestResult compare(const EvalReport& a, const EvalReport& b) const {
        std::vector<double> xa, xb;
        for (const auto& s : a.per_image) {
            xa.push_back(s.dcg_at_k);
        }
        for (const auto& s : b.per_image) {
            xb.push_back(s.dcg_at_k);
        }
        return config_.welch ? welch_ttest(xa, xb) : paired_ttest(xa, xb);
    }

private:
    const Corpus& corpus_;
    Split split_;
    PipelineConfig config_;
    GlobalTagStats global_;
    CandidateStats stats_;
    VisualIndex index_;
    std::vector<std::vector<SessionId>> train_of_user_;
    std::vector<PairStrengths> strengths_;
    std::vector<CandidateList> train_candidates_;
    std::vector<CandidateList> test_candidates_;
    std::optional<TagEmbeddings> embeddings_;
    FeatureMap features_;
};

struct ReportRow {
    EvalReport report;
    std::string n_tags;
    std::optional<TTestResult> versus_reference;
};

/**
 * @brief CSV with one row per configuration.
 *
 * Columns: config, n_tags, dcg_per_image, dcg10_per_image, dcg_per_user, dcg10_per_user, then the
 * number of images and the t statistic / p-value of the per-image DCG@k against the reference
 * method (empty for the reference itself).
 */
inline void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
    out << "config,n_tags,dcg_per_image,dcg10_per_image,dcg_per_user,dcg10_per_user,n_images,t_stat,p_value\n";
    for (const auto& row : rows) {
        const auto& r = row.report;
        out << csv_field(r.label) << ',' << row.n_tags << ',' << format_double(r.dcg.per_image_mean) << ',' << format_double(r.dcg_at_k.per_image_mean)
            << ',' << format_double(r.dcg.per_user_mean) << ',' << format_double(r.dcg_at_k.per_user_mean) << ',' << r.per_image.size() << ',';
        if (row.versus_reference) {
            out << format_double(row.versus_reference->t_statistic) << ',' << format_double(row.versus_reference->p_value);
        } else {
            out << ',';
        }
        out << '\n';
    }
}

}

#endif
