#ifndef TAGRANK_RANKER_HPP
#define TAGRANK_RANKER_HPP

#include "candidates.hpp"
#include "common.hpp"
#include "embeddings.hpp"
#include "tagstats.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

/**
 * @file ranker.hpp
 *
 * @brief Tag features, preference pairs and the per-user pairwise hinge-loss ranker.
 */

namespace tagrank {

/// Anything that maps a tag id to a fixed-length feature row.
template<typename F>
concept TagFeatures = requires(const F& f, TagId t) {
    { f.dim() } -> std::convertible_to<std::size_t>;
    { f.size() } -> std::convertible_to<std::size_t>;
    { f.row(t) } -> std::convertible_to<std::span<const double>>;
};

/// Row-major feature matrix, one row per tag.
class DenseFeatures {
public:
    DenseFeatures() = default;

    DenseFeatures(std::size_t dim, std::vector<double> values) : dim_(dim), values_(std::move(values)) {
        if (dim_ == 0 || values_.size() % dim_ != 0) {
            throw std::invalid_argument("DenseFeatures: value count is not a multiple of dim");
        }
    }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return dim_ == 0 ? 0 : values_.size() / dim_; }

    std::span<const double> row(TagId tag) const {
        if (tag >= size()) {
            throw std::out_of_range("unknown tag id " + std::to_string(tag));
        }
        return {values_.data() + static_cast<std::size_t>(tag) * dim_, dim_};
    }

private:
    std::size_t dim_ = 0;
    std::vector<double> values_;
};

struct Standardization {
    double mean = 0.0;
    double stddev = 1.0;

    double apply(double x) const { return (x - mean) / stddev; }
};

/**
 * @brief Tag feature vector: embedding followed by standardized mean position, position variance and corpus frequency.
 *
 * Scalars are standardized with moments fitted over the vocabulary. Mean position and variance are
 * only defined for tags seen in training, so they are fitted on those tags and unseen tags get 0
 * (the fitted mean) in both coordinates. A zero spread is replaced by 1.
 */
class FeatureMap {
public:
    FeatureMap() = default;

    FeatureMap(const TagEmbeddings& embeddings, const GlobalTagStats& stats) {
        if (embeddings.size() != stats.size()) {
            throw std::invalid_argument("FeatureMap: embeddings and statistics cover different vocabularies");
        }
        const std::size_t vocab = embeddings.size();
        const std::size_t edim = embeddings.dim();
        dim_ = edim + 3;

        auto fit = [&](const std::vector<double>& values, bool observed_only) {
            double sum = 0.0, n = 0.0;
            for (std::size_t t = 0; t < vocab; ++t) {
                if (!observed_only || stats.observations[t] > 0) {
                    sum += values[t];
                    n += 1.0;
                }
            }
            Standardization s;
            if (n == 0.0) {
                return s;
            }
            s.mean = sum / n;
            double ss = 0.0;
            for (std::size_t t = 0; t < vocab; ++t) {
                if (!observed_only || stats.observations[t] > 0) {
                    ss += (values[t] - s.mean) * (values[t] - s.mean);
                }
            }
            const double sd = std::sqrt(ss / n);
            s.stddev = sd > 0.0 ? sd : 1.0;
            return s;
        };
        mp_ = fit(stats.mp, true);
        vp_ = fit(stats.vp, true);
        cb_ = fit(stats.cb, false);

        values_.resize(vocab * dim_);
        for (std::size_t t = 0; t < vocab; ++t) {
            double* out = values_.data() + t * dim_;
            const auto e = embeddings.vector(static_cast<TagId>(t));
            std::copy(e.begin(), e.end(), out);
            const bool seen = stats.observations[t] > 0;
            out[edim] = seen ? mp_.apply(stats.mp[t]) : 0.0;
            out[edim + 1] = seen ? vp_.apply(stats.vp[t]) : 0.0;
            out[edim + 2] = cb_.apply(stats.cb[t]);
        }
    }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return dim_ == 0 ? 0 : values_.size() / dim_; }

    std::span<const double> row(TagId tag) const {
        if (tag >= size()) {
            throw std::out_of_range("phi: unknown tag id " + std::to_string(tag));
        }
        return {values_.data() + static_cast<std::size_t>(tag) * dim_, dim_};
    }

    const Standardization& mp_standardization() const { return mp_; }
    const Standardization& vp_standardization() const { return vp_; }
    const Standardization& cb_standardization() const { return cb_; }

private:
    std::size_t dim_ = 0;
    std::vector<double> values_;
    Standardization mp_, vp_, cb_;
};

inline std::span<const double> phi(const FeatureMap& features, TagId tag) {
    return features.row(tag);
}

enum class PairOrigin { supervised_order, supervised_vs_candidates, semi_supervised };

struct PreferencePair {
    TagId preferred = 0;
    TagId dispreferred = 0;
    SessionId session = 0;
    PairOrigin origin = PairOrigin::supervised_order;

    bool operator==(const PreferencePair&) const = default;
};

enum class PairMode { supervised_only, semi_only, combined };

struct PairOptions {
    PairMode mode = PairMode::combined;
    /// Truncation of the augmented order in combined mode; nullopt keeps all of it.
    std::optional<std::size_t> n;
    /// Raw pairwise constraints instead of relevance levels. Candidate pairs then need a strictly higher score.
    bool all_pairs = false;
    /// Also prefer every ground-truth tag over every vocabulary tag outside the list.
    bool full_vocabulary_negatives = false;
    std::size_t vocab_size = 0;
};

namespace detail {

inline PairOrigin origin_of(std::size_t i, std::size_t j, std::size_t supervised_count) {
    if (j < supervised_count) {
        return PairOrigin::supervised_order;
    }
    return i < supervised_count ? PairOrigin::supervised_vs_candidates : PairOrigin::semi_supervised;
}

}

/**
 * @brief Preference pairs between relevance levels of an augmented order.
 *
 * Every tag is preferred to every tag at a strictly higher level; tags sharing a level are not paired.
 */
inline std::vector<PreferencePair> level_pairs(const AugmentedOrder& order, SessionId session) {
    std::vector<PreferencePair> pairs;
    const std::size_t n = order.tags.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (order.levels[i] < order.levels[j]) {
                pairs.push_back({order.tags[i], order.tags[j], session, detail::origin_of(i, j, order.supervised_count)});
            }
        }
    }
    return pairs;
}

/// The order that pairs are built over for a given mode.
inline AugmentedOrder order_for_mode(std::span<const TagId> ground_truth, const CandidateList& candidates, const PairOptions& options) {
    switch (options.mode) {
    case PairMode::supervised_only:
        return augment_order(ground_truth, CandidateList{}, std::nullopt);
    case PairMode::semi_only: {
        CandidateList filtered = candidates;
        std::erase_if(filtered.entries, [&](const ScoredTag& e) {
            return std::find(ground_truth.begin(), ground_truth.end(), e.tag) != ground_truth.end();
        });
        return augment_order({}, filtered, std::nullopt);
    }
    case PairMode::combined:
        return augment_order(ground_truth, candidates, options.n);
    }
    throw std::logic_error("order_for_mode: unknown mode");
}

/**
 * @brief Preference pairs for one training session.
 *
 * Supervised-only builds levels over the ground truth, semi-only over the candidates,
 * and combined over the ground truth followed by the candidates, truncated to `n`.
 */
inline std::vector<PreferencePair> build_pairs(SessionId session, std::span<const TagId> ground_truth, const CandidateList& candidates,
                                               const PairOptions& options) {
    const AugmentedOrder order = order_for_mode(ground_truth, candidates, options);
    std::vector<PreferencePair> pairs;

    if (!options.all_pairs) {
        pairs = level_pairs(order, session);
    } else {
        const std::size_t n = order.tags.size();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const auto& si = order.scores[i];
                const auto& sj = order.scores[j];
                if (si && sj && !(*si > *sj)) {
                    continue;
                }
                pairs.push_back({order.tags[i], order.tags[j], session, detail::origin_of(i, j, order.supervised_count)});
            }
        }
    }

    if (options.full_vocabulary_negatives && order.supervised_count > 0) {
        std::unordered_set<TagId> listed(order.tags.begin(), order.tags.end());
        for (std::size_t i = 0; i < order.supervised_count; ++i) {
            for (std::size_t v = 0; v < options.vocab_size; ++v) {
                if (!listed.count(static_cast<TagId>(v))) {
                    pairs.push_back({order.tags[i], static_cast<TagId>(v), session, PairOrigin::supervised_vs_candidates});
                }
            }
        }
    }
    return pairs;
}

struct SolverConfig {
    double C = 0.01;
    std::size_t epochs = 20;
    std::uint64_t seed = 1;
};

struct UserModel {
    std::string user_id;
    std::vector<double> w;
    double C = 0.0;
    std::size_t epochs = 0;
    std::uint64_t seed = 0;
    std::size_t pair_count = 0;
};

/// 1/2 |w|^2 + C * sum of hinge losses on score differences.
template<TagFeatures F>
double ranking_objective(std::span<const double> w, std::span<const PreferencePair> pairs, const F& features, double C) {
    double hinge = 0.0;
    for (const auto& p : pairs) {
        const double margin = dot(w, features.row(p.preferred)) - dot(w, features.row(p.dispreferred));
        hinge += std::max(0.0, 1.0 - margin);
    }
    return 0.5 * dot(w, w) + C * hinge;
}

/// A subgradient of `ranking_objective`; exact wherever no margin equals 1.
template<TagFeatures F>
std::vector<double> ranking_subgradient(std::span<const double> w, std::span<const PreferencePair> pairs, const F& features, double C) {
    std::vector<double> g(w.begin(), w.end());
    for (const auto& p : pairs) {
        const auto a = features.row(p.preferred);
        const auto b = features.row(p.dispreferred);
        if (dot(w, a) - dot(w, b) < 1.0) {
            for (std::size_t k = 0; k < g.size(); ++k) {
                g[k] -= C * (a[k] - b[k]);
            }
        }
    }
    return g;
}

/**
 * @brief Minimizes the pairwise hinge objective by stochastic subgradient descent and returns the averaged iterate.
 *
 * Pegasos with lambda = 1/(C P) and step 1/(lambda t) on difference vectors x = phi(a) - phi(b), one pair
 * per step, pairs reshuffled each epoch. With that step size the iterate after step t is
 * (1/(lambda t)) times the sum of the violated x so far, and the average of iterates 2..T+1 is
 * (H_T a - b) / (lambda T) with a = sum x_s, b = sum H_{s-1} x_s over violated steps s
 * (H_k the k-th harmonic number). Both sums are kept incrementally, so only violated steps touch
 * the weight vectors.
 */
template<TagFeatures F>
UserModel train_user_model(std::span<const PreferencePair> pairs, const F& features, const SolverConfig& config, std::string user_id = {}) {
    if (!(config.C > 0.0)) {
        throw std::invalid_argument("train_user_model: C must be > 0");
    }
    if (config.epochs < 1) {
        throw std::invalid_argument("train_user_model: epochs must be >= 1");
    }
    if (pairs.empty()) {
        throw DataError("no constraints for user" + (user_id.empty() ? std::string() : " '" + user_id + "'"));
    }

    const std::size_t dim = features.dim();
    const double pair_count = static_cast<double>(pairs.size());
    const double lambda = 1.0 / (config.C * pair_count);

    std::vector<double> sum(dim, 0.0);
    std::vector<double> weighted(dim, 0.0);
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }

    Rng rng(config.seed);
    std::size_t t = 0;
    double harmonic_prev = 0.0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (auto index : order) {
            ++t;
            const auto& pair = pairs[index];
            const auto a = features.row(pair.preferred);
            const auto b = features.row(pair.dispreferred);

            bool violated = true;
            if (t > 1) {
                const double raw = dot(sum, a) - dot(sum, b);
                violated = raw / (lambda * static_cast<double>(t - 1)) < 1.0;
            }
            if (violated) {
                for (std::size_t k = 0; k < dim; ++k) {
                    const double x = a[k] - b[k];
                    sum[k] += x;
                    weighted[k] += harmonic_prev * x;
                }
            }
            harmonic_prev += 1.0 / static_cast<double>(t);
        }
    }

    const double total_steps = static_cast<double>(t);
    const double harmonic_total = harmonic_prev;
    UserModel model;
    model.user_id = std::move(user_id);
    model.w.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        model.w[k] = (harmonic_total * sum[k] - weighted[k]) / (lambda * total_steps);
    }
    model.C = config.C;
    model.epochs = config.epochs;
    model.seed = config.seed;
    model.pair_count = pairs.size();
    for (double v : model.w) {
        if (!std::isfinite(v)) {
            throw std::runtime_error("train_user_model: non-finite weight");
        }
    }
    return model;
}

template<TagFeatures F>
double model_score(std::span<const double> w, const F& features, TagId tag) {
    return dot(w, features.row(tag));
}

/// Tags by descending score, ties by ascending tag id.
template<TagFeatures F>
std::vector<TagId> rank_tags(std::span<const double> w, std::span<const TagId> tags, const F& features) {
    if (w.size() != features.dim()) {
        throw std::invalid_argument("rank_tags: model dimension " + std::to_string(w.size()) + " does not match features " +
                                    std::to_string(features.dim()));
    }
    std::vector<std::pair<double, TagId>> scored;
    scored.reserve(tags.size());
    for (auto tag : tags) {
        scored.emplace_back(model_score(w, features, tag), tag);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) { return x.first != y.first ? x.first > y.first : x.second < y.second; });
    std::vector<TagId> out;
    out.reserve(scored.size());
    for (const auto& s : scored) {
        out.push_back(s.second);
    }
    return out;
}

template<TagFeatures F>
std::vector<TagId> rank_tags(const UserModel& model, std::span<const TagId> tags, const F& features) {
    return rank_tags(std::span<const double>(model.w), tags, features);
}

/**
 * @brief Model text format: a header line "user_id dim C epochs seed" followed by one line of `dim` numbers.
 *
 * Several models may be concatenated in one archive.
 */
inline void save_model(std::ostream& out, const UserModel& model) {
    out << model.user_id << ' ' << model.w.size() << ' ' << format_double(model.C) << ' ' << model.epochs << ' ' << model.seed << '\n';
    for (std::size_t k = 0; k < model.w.size(); ++k) {
        out << (k ? " " : "") << format_double(model.w[k]);
    }
    out << '\n';
}

inline std::vector<UserModel> load_models(std::istream& in) {
    std::vector<UserModel> models;
    std::string header;
    while (std::getline(in, header)) {
        if (header.empty()) {
            continue;
        }
        std::vector<std::string> tokens;
        std::istringstream fields(header);
        for (std::string token; fields >> token;) {
            tokens.push_back(token);
        }
        if (tokens.size() < 5) {
            throw DataError("model archive: malformed header '" + header + "'");
        }
        UserModel model;
        const std::size_t n = tokens.size();
        model.user_id = tokens[0];
        for (std::size_t i = 1; i + 4 < n; ++i) {
            model.user_id += ' ' + tokens[i];
        }
        std::size_t dim = 0;
        try {
            dim = std::stoul(tokens[n - 4]);
            model.C = parse_double(tokens[n - 3]);
            model.epochs = std::stoul(tokens[n - 2]);
            model.seed = std::stoull(tokens[n - 1]);
        } catch (const std::logic_error&) {
            throw DataError("model archive: malformed header '" + header + "'");
        }

        std::string line;
        if (!std::getline(in, line)) {
            throw DataError("model archive: missing weights for user '" + model.user_id + "'");
        }
        std::istringstream values(line);
        for (std::string token; values >> token;) {
            model.w.push_back(parse_double(token));
        }
        if (model.w.size() != dim) {
            throw DataError("model archive: user '" + model.user_id + "' declares " + std::to_string(dim) + " weights, has " +
                            std::to_string(model.w.size()));
        }
        models.push_back(std::move(model));
    }
    return models;
}

}

#endif
