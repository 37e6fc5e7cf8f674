#ifndef TAGRANK_KNN_HPP
#define TAGRANK_KNN_HPP

#include "common.hpp"
#include "corpus.hpp"

#include <algorithm>
#include <concepts>
#include <span>
#include <utility>
#include <vector>

/**
 * @file knn.hpp
 *
 * @brief Exact Euclidean nearest-neighbor search over session feature vectors.
 */

namespace tagrank {

/**
 * @brief Immutable brute-force index. Rows keep the order of the sessions given at build time.
 *
 * Queries are const and may run concurrently.
 */
class VisualIndex {
public:
    VisualIndex() = default;

    VisualIndex(std::span<const Session* const> sessions, std::span<const SessionId> ids) {
        if (sessions.empty()) {
            throw std::invalid_argument("VisualIndex: no sessions to index");
        }
        if (sessions.size() != ids.size()) {
            throw std::invalid_argument("VisualIndex: sessions and ids differ in length");
        }
        dim_ = sessions.front()->features.size();
        if (dim_ == 0) {
            throw std::invalid_argument("VisualIndex: zero-dimensional features");
        }
        data_.reserve(sessions.size() * dim_);
        for (std::size_t i = 0; i < sessions.size(); ++i) {
            const auto& features = sessions[i]->features;
            if (features.size() != dim_) {
                throw std::invalid_argument("VisualIndex: feature dimension " + std::to_string(features.size()) + " does not match " +
                                            std::to_string(dim_));
            }
            data_.insert(data_.end(), features.begin(), features.end());
        }
        ids_.assign(ids.begin(), ids.end());
    }

    std::size_t size() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }
    const std::vector<SessionId>& ids() const { return ids_; }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }

    double squared_distance(std::size_t r, std::span<const double> query) const {
        const double* x = data_.data() + r * dim_;
        double sum = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) {
            const double diff = x[d] - query[d];
            sum += diff * diff;
        }
        return sum;
    }

    /**
     * @brief Up to `m` session ids by ascending distance, ties by ascending id.
     *
     * @param skip Predicate on session id; matching rows are never returned.
     */
    template<std::predicate<SessionId> Skip>
    std::vector<SessionId> nearest(std::span<const double> query, std::size_t m, Skip&& skip) const {
        if (query.size() != dim_) {
            throw std::invalid_argument("nearest: query dimension " + std::to_string(query.size()) + " does not match index dimension " +
                                        std::to_string(dim_));
        }
        if (m < 1) {
            throw std::invalid_argument("nearest: m must be >= 1");
        }

        std::vector<std::pair<double, SessionId>> scored;
        scored.reserve(ids_.size());
        for (std::size_t r = 0; r < ids_.size(); ++r) {
            if (!skip(ids_[r])) {
                scored.emplace_back(squared_distance(r, query), ids_[r]);
            }
        }
        const std::size_t keep = std::min(m, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end());

        std::vector<SessionId> out;
        out.reserve(keep);
        for (std::size_t i = 0; i < keep; ++i) {
            out.push_back(scored[i].second);
        }
        return out;
    }

    std::vector<SessionId> nearest(std::span<const double> query, std::size_t m, std::span<const SessionId> exclude = {}) const {
        return nearest(query, m, [&](SessionId id) { return std::find(exclude.begin(), exclude.end(), id) != exclude.end(); });
    }

private:
    std::size_t dim_ = 0;
    std::vector<double> data_;
    std::vector<SessionId> ids_;
};

/// Index over the listed sessions of a corpus, keyed by their session ids.
inline VisualIndex build_index(const Corpus& corpus, std::span<const SessionId> ids) {
    std::vector<const Session*> rows;
    rows.reserve(ids.size());
    for (auto id : ids) {
        rows.push_back(&corpus.sessions.at(id));
    }
    return VisualIndex(rows, ids);
}

/// Index over all given sessions; row i gets id i.
inline VisualIndex build_index(std::span<const Session> sessions) {
    std::vector<const Session*> rows;
    std::vector<SessionId> ids;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        rows.push_back(&sessions[i]);
        ids.push_back(static_cast<SessionId>(i));
    }
    return VisualIndex(rows, ids);
}

}

#endif
