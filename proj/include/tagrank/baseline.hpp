#ifndef TAGRANK_BASELINE_HPP
#define TAGRANK_BASELINE_HPP

#include "common.hpp"
#include "corpus.hpp"
#include "tagstats.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

/**
 * @file baseline.hpp
 *
 * @brief Pairwise-order re-ranking baseline: per-user tag-order strengths enforced on a default order.
 */

namespace tagrank {

struct PairCounts {
    std::size_t before = 0;
    std::size_t together = 0;
};

/// Per-user counts of how often tag a precedes tag b, and how often they share a list.
class PairStrengths {
public:
    void observe(std::span<const TagId> list) {
        for (std::size_t i = 0; i < list.size(); ++i) {
            for (std::size_t j = i + 1; j < list.size(); ++j) {
                auto& ab = counts_[{list[i], list[j]}];
                auto& ba = counts_[{list[j], list[i]}];
                ++ab.before;
                ++ab.together;
                ++ba.together;
            }
        }
    }

    /// Overwrites one ordered entry; used to craft count tables directly.
    void set(TagId a, TagId b, PairCounts counts) { counts_[{a, b}] = counts; }

    std::optional<PairCounts> counts(TagId a, TagId b) const {
        auto it = counts_.find({a, b});
        if (it == counts_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    /// before(a, b) / together(a, b); nullopt when the tags never co-occur.
    std::optional<double> strength(TagId a, TagId b) const {
        auto c = counts(a, b);
        if (!c || c->together == 0) {
            return std::nullopt;
        }
        return static_cast<double>(c->before) / static_cast<double>(c->together);
    }

    const std::map<std::pair<TagId, TagId>, PairCounts>& entries() const { return counts_; }

private:
    std::map<std::pair<TagId, TagId>, PairCounts> counts_;
};

template<SessionRange R>
PairStrengths compute_strengths(R&& train_sessions_of_user) {
    PairStrengths strengths;
    for (const Session& session : train_sessions_of_user) {
        strengths.observe(session.tags);
    }
    return strengths;
}

struct RerankOptions {
    double threshold = 0.8;
    std::size_t min_cooccur = 2;
};

/// Directed edges a -> b among `tags` with strength(a, b) > threshold and enough co-occurrences.
inline std::vector<std::pair<TagId, TagId>> constraint_edges(std::span<const TagId> tags, const PairStrengths& strengths,
                                                             const RerankOptions& options) {
    std::vector<std::pair<TagId, TagId>> edges;
    for (auto a : tags) {
        for (auto b : tags) {
            if (a == b) {
                continue;
            }
            auto c = strengths.counts(a, b);
            if (!c || c->together == 0 || c->together < options.min_cooccur) {
                continue;
            }
            if (static_cast<double>(c->before) / static_cast<double>(c->together) > options.threshold) {
                edges.emplace_back(a, b);
            }
        }
    }
    return edges;
}

/**
 * @brief Re-ranks `default_order` so strong pairwise preferences hold.
 *
 * Priority topological sort over the constraint graph: the ready node (no remaining
 * predecessors) earliest in the default order goes next. When no node is ready, the earliest
 * member of a cycle goes next and its remaining incoming edges are dropped.
 */
inline std::vector<TagId> rerank(std::span<const TagId> default_order, const PairStrengths& strengths, const RerankOptions& options) {
    if (!(options.threshold > 0.5 && options.threshold <= 1.0)) {
        throw std::invalid_argument("rerank: threshold must be in (0.5, 1]");
    }
    const std::size_t n = default_order.size();
    std::unordered_map<TagId, std::size_t> position;
    for (std::size_t i = 0; i < n; ++i) {
        if (!position.emplace(default_order[i], i).second) {
            throw std::invalid_argument("rerank: duplicate tag in default order");
        }
    }

    // Graph over positions in the default order.
    std::vector<std::vector<std::size_t>> successors(n);
    std::vector<std::size_t> indegree(n, 0);
    for (const auto& [a, b] : constraint_edges(default_order, strengths, options)) {
        successors[position[a]].push_back(position[b]);
        ++indegree[position[b]];
    }

    std::vector<bool> done(n, false);
    std::vector<TagId> out;
    out.reserve(n);

    auto emit = [&](std::size_t v) {
        done[v] = true;
        out.push_back(default_order[v]);
        for (auto s : successors[v]) {
            if (!done[s]) {
                --indegree[s];
            }
        }
    };

    // Earliest remaining node that lies on a directed cycle among remaining nodes.
    auto earliest_cycle_member = [&]() -> std::size_t {
        for (std::size_t v = 0; v < n; ++v) {
            if (done[v]) {
                continue;
            }
            std::vector<bool> seen(n, false);
            std::vector<std::size_t> stack{v};
            while (!stack.empty()) {
                const auto x = stack.back();
                stack.pop_back();
                for (auto s : successors[x]) {
                    if (done[s]) {
                        continue;
                    }
                    if (s == v) {
                        return v;
                    }
                    if (!seen[s]) {
                        seen[s] = true;
                        stack.push_back(s);
                    }
                }
            }
        }
        throw std::logic_error("rerank: no ready node and no cycle");
    };

    while (out.size() < n) {
        std::optional<std::size_t> ready;
        for (std::size_t v = 0; v < n; ++v) {
            if (!done[v] && indegree[v] == 0) {
                ready = v;
                break;
            }
        }
        if (ready) {
            emit(*ready);
            continue;
        }
        const auto v = earliest_cycle_member();
        indegree[v] = 0;
        emit(v);
    }
    return out;
}

}

#endif
