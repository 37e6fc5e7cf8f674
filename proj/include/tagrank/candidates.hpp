#ifndef TAGRANK_CANDIDATES_HPP
#define TAGRANK_CANDIDATES_HPP

#include "common.hpp"
#include "corpus.hpp"
#include "knn.hpp"
#include "tagstats.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <unordered_set>
#include <vector>

/**
 * @file candidates.hpp
 *
 * @brief Neighbor-mined candidate tags for an (image, user) query and the augmented training order.
 */

namespace tagrank {

/// Candidate score: personal frequency plus neighborhood frequency minus corpus frequency.
inline double score_tag(double pb, double sb, double cb) {
    return pb + sb - cb;
}

struct ScoredTag {
    TagId tag = 0;
    double score = 0.0;

    bool operator==(const ScoredTag&) const = default;
};

/// Tags with non-negative score, by descending score then ascending tag id.
struct CandidateList {
    std::vector<ScoredTag> entries;
    std::string image_id;
    std::string user_id;
    std::size_t m = 0;

    std::vector<TagId> tags() const {
        std::vector<TagId> out;
        out.reserve(entries.size());
        for (const auto& e : entries) {
            out.push_back(e.tag);
        }
        return out;
    }

    std::size_t size() const { return entries.size(); }
};

/**
 * @brief Membership counts the candidate score reads, all taken from the training split.
 *
 * Counts rather than frequencies, so a query's scores share the denominator
 * n_u * m * N and can be compared exactly.
 */
struct CandidateStats {
    /// Training sessions carrying each tag.
    std::vector<std::int64_t> corpus_counts;
    std::int64_t corpus_sessions = 0;
    /// Per user index: the user's training sessions carrying each tag. Empty for users without training sessions.
    std::vector<std::vector<std::int64_t>> user_counts;
    std::vector<std::int64_t> user_sessions;

    double cb(TagId t) const { return static_cast<double>(corpus_counts.at(t)) / static_cast<double>(corpus_sessions); }

    double pb(UserIndex u, TagId t) const { return static_cast<double>(user_counts.at(u).at(t)) / static_cast<double>(user_sessions.at(u)); }

    bool knows(UserIndex u) const { return u < user_sessions.size() && user_sessions[u] > 0; }
};

inline CandidateStats compute_candidate_stats(const Corpus& corpus, const Split& split) {
    const std::size_t vocab = corpus.vocabulary.size();
    CandidateStats stats;
    stats.corpus_counts.assign(vocab, 0);
    stats.user_counts.resize(corpus.users.size());
    stats.user_sessions.assign(corpus.users.size(), 0);
    for (auto id : split.train) {
        const auto& session = corpus.sessions.at(id);
        auto& user = stats.user_counts[session.user];
        if (user.empty()) {
            user.assign(vocab, 0);
        }
        ++stats.corpus_sessions;
        ++stats.user_sessions[session.user];
        for (auto tag : session.tags) {
            ++stats.corpus_counts.at(tag);
            ++user.at(tag);
        }
    }
    if (stats.corpus_sessions == 0) {
        throw std::invalid_argument("compute_candidate_stats: no training sessions");
    }
    return stats;
}

struct CandidateOptions {
    std::size_t m = 50;
    /// Keep the querying user's own images out of the neighborhood.
    bool exclude_same_user = false;
};

/// Sorts by descending score, ties by ascending tag id, dropping negative scores.
inline std::vector<ScoredTag> order_candidates(std::span<const double> scores, std::span<const TagId> skip = {}) {
    std::vector<ScoredTag> out;
    for (std::size_t t = 0; t < scores.size(); ++t) {
        if (scores[t] >= 0.0 && std::find(skip.begin(), skip.end(), static_cast<TagId>(t)) == skip.end()) {
            out.push_back({static_cast<TagId>(t), scores[t]});
        }
    }
    std::sort(out.begin(), out.end(), [](const ScoredTag& a, const ScoredTag& b) {
        return a.score != b.score ? a.score > b.score : a.tag < b.tag;
    });
    return out;
}

/**
 * @brief Scores every vocabulary tag for one image and keeps the non-negative ones.
 *
 * The neighborhood comes from `index`, which should hold training sessions only.
 * With `exclude_ground_truth` the image's own tags are left out (training-time use).
 * `self`, when given, is kept out of its own neighborhood.
 */
inline CandidateList build_candidates(const Session& image, UserIndex user, const Corpus& corpus, const VisualIndex& index,
                                      const CandidateStats& stats, const CandidateOptions& options, bool exclude_ground_truth,
                                      std::optional<SessionId> self = std::nullopt) {
    if (options.m < 1) {
        throw std::invalid_argument("build_candidates: m must be >= 1");
    }
    if (!stats.knows(user)) {
        throw std::out_of_range("build_candidates: unknown user " + std::to_string(user));
    }

    auto neighbors = index.nearest(image.features, options.m, [&](SessionId id) {
        if (self && id == *self) {
            return true;
        }
        return options.exclude_same_user && corpus.sessions[id].user == user;
    });
    const std::size_t vocab = corpus.vocabulary.size();
    std::vector<std::int64_t> near_counts(vocab, 0);
    for (auto id : neighbors) {
        for (auto tag : corpus.sessions[id].tags) {
            ++near_counts.at(tag);
        }
    }

    // v = a/n_u + b/m - c/N = K / (n_u m N) with K an integer, so signs and ties are exact.
    const auto n_u = stats.user_sessions[user];
    const auto m = static_cast<std::int64_t>(options.m);
    const auto n_all = stats.corpus_sessions;
    const double denominator = static_cast<double>(n_u) * static_cast<double>(m) * static_cast<double>(n_all);
    const auto& own = stats.user_counts[user];
    std::vector<std::pair<std::int64_t, TagId>> kept;
    for (std::size_t t = 0; t < vocab; ++t) {
        const std::int64_t k = own[t] * m * n_all + near_counts[t] * n_u * n_all - stats.corpus_counts[t] * n_u * m;
        const auto tag = static_cast<TagId>(t);
        if (k < 0 || (exclude_ground_truth && std::find(image.tags.begin(), image.tags.end(), tag) != image.tags.end())) {
            continue;
        }
        kept.emplace_back(k, tag);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });

    CandidateList list;
    list.entries.reserve(kept.size());
    for (const auto& [k, tag] : kept) {
        list.entries.push_back({tag, static_cast<double>(k) / denominator});
    }
    list.image_id = image.image_id;
    list.user_id = corpus.users.at(user).id;
    list.m = options.m;
    return list;
}

/**
 * @brief Relevance level by 1-based position: 1..5 for the first five, then one level per block of five.
 */
inline std::vector<int> assign_levels(std::size_t count) {
    std::vector<int> levels(count);
    for (std::size_t i = 0; i < count; ++i) {
        levels[i] = i < 5 ? static_cast<int>(i) + 1 : 6 + static_cast<int>((i - 5) / 5);
    }
    return levels;
}

/// Ground truth followed by candidates, truncated, with relevance levels.
struct AugmentedOrder {
    std::vector<TagId> tags;
    std::vector<int> levels;
    /// Candidate score per entry; ground-truth entries carry none.
    std::vector<std::optional<double>> scores;
    /// How many leading entries come from the ground truth.
    std::size_t supervised_count = 0;
    std::optional<std::size_t> n;
};

/// `n == nullopt` keeps everything. Candidates already in the ground truth are skipped.
inline AugmentedOrder augment_order(std::span<const TagId> ground_truth, const CandidateList& candidates, std::optional<std::size_t> n) {
    if (n && *n < 1) {
        throw std::invalid_argument("augment_order: n must be >= 1");
    }
    const std::size_t limit = n.value_or(std::numeric_limits<std::size_t>::max());

    AugmentedOrder order;
    order.n = n;
    std::unordered_set<TagId> present;
    for (auto tag : ground_truth) {
        if (order.tags.size() >= limit) {
            break;
        }
        if (present.insert(tag).second) {
            order.tags.push_back(tag);
            order.scores.push_back(std::nullopt);
        }
    }
    order.supervised_count = order.tags.size();
    for (const auto& entry : candidates.entries) {
        if (order.tags.size() >= limit) {
            break;
        }
        if (present.insert(entry.tag).second) {
            order.tags.push_back(entry.tag);
            order.scores.push_back(entry.score);
        }
    }
    order.levels = assign_levels(order.tags.size());
    return order;
}

/// CSV columns: rank, tag, score.
inline void write_candidates_csv(std::ostream& out, const CandidateList& list, const TagVocabulary& vocabulary) {
    out << "rank,tag,score\n";
    for (std::size_t i = 0; i < list.entries.size(); ++i) {
        out << (i + 1) << ',' << csv_field(vocabulary.name(list.entries[i].tag)) << ',' << format_double(list.entries[i].score) << '\n';
    }
}

}

#endif
