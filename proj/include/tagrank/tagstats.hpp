#ifndef TAGRANK_TAGSTATS_HPP
#define TAGRANK_TAGSTATS_HPP

#include "common.hpp"
#include "corpus.hpp"

#include <concepts>
#include <ostream>
#include <ranges>
#include <span>
#include <vector>

/**
 * @file tagstats.hpp
 *
 * @brief Tag frequency and position statistics.
 *
 * Every function takes the sessions it may read as a range, so callers decide which split is visible.
 * All probabilities are per image: a tag counts once per session whose list contains it.
 */

namespace tagrank {

/// Any input range whose elements bind to `const Session&`.
template<typename R>
concept SessionRange = std::ranges::input_range<R> && std::convertible_to<std::ranges::range_reference_t<R>, const Session&>;

struct GlobalTagStats {
    std::vector<double> cb;
    /// Mean 1-based list position; 0 for tags never observed.
    std::vector<double> mp;
    /// Population variance of the position; 0 for tags never observed.
    std::vector<double> vp;
    /// Number of lists the tag appears on.
    std::vector<std::size_t> observations;

    std::size_t size() const { return cb.size(); }
};

namespace detail {

template<SessionRange R>
std::pair<std::vector<double>, std::size_t> membership_counts(R&& sessions, std::size_t vocab_size) {
    std::vector<double> counts(vocab_size, 0.0);
    std::size_t n = 0;
    for (const Session& session : sessions) {
        ++n;
        for (auto tag : session.tags) {
            counts.at(tag) += 1.0;
        }
    }
    return {std::move(counts), n};
}

}

/// Fraction of the user's sessions carrying each tag. Pass the user's training sessions only.
template<SessionRange R>
std::vector<double> compute_pb(R&& sessions_of_user, std::size_t vocab_size) {
    auto [counts, n] = detail::membership_counts(std::forward<R>(sessions_of_user), vocab_size);
    if (n == 0) {
        throw std::invalid_argument("compute_pb: user has no sessions");
    }
    for (auto& c : counts) {
        c /= static_cast<double>(n);
    }
    return counts;
}

/// Fraction of all given sessions carrying each tag.
template<SessionRange R>
std::vector<double> compute_cb(R&& all_sessions, std::size_t vocab_size) {
    auto [counts, n] = detail::membership_counts(std::forward<R>(all_sessions), vocab_size);
    if (n == 0) {
        throw std::invalid_argument("compute_cb: no sessions");
    }
    for (auto& c : counts) {
        c /= static_cast<double>(n);
    }
    return counts;
}

/**
 * @brief Fraction of the `m` nearest neighbors carrying each tag.
 *
 * The denominator is `m` even when fewer neighbors were found.
 */
inline std::vector<double> compute_sb(std::span<const SessionId> neighbor_ids, std::span<const Session> sessions, std::size_t m,
                                      std::size_t vocab_size) {
    if (m < 1) {
        throw std::invalid_argument("compute_sb: m must be >= 1");
    }
    if (neighbor_ids.size() > m) {
        throw std::invalid_argument("compute_sb: more neighbors than m");
    }
    std::vector<double> sb(vocab_size, 0.0);
    const double share = 1.0 / static_cast<double>(m);
    for (auto id : neighbor_ids) {
        if (id >= sessions.size()) {
            throw std::out_of_range("compute_sb: unknown session id " + std::to_string(id));
        }
        for (auto tag : sessions[id].tags) {
            sb.at(tag) += share;
        }
    }
    return sb;
}

struct PositionStats {
    std::vector<double> mp;
    std::vector<double> vp;
    std::vector<std::size_t> observations;
};

/// Mean and population variance of each tag's 1-based position, over the lists it appears on.
template<SessionRange R>
PositionStats compute_position_stats(R&& sessions, std::size_t vocab_size) {
    PositionStats out;
    out.mp.assign(vocab_size, 0.0);
    out.vp.assign(vocab_size, 0.0);
    out.observations.assign(vocab_size, 0);

    // Welford, so single observations give exactly zero variance.
    std::vector<double> m2(vocab_size, 0.0);
    std::size_t n_sessions = 0;
    for (const Session& session : sessions) {
        ++n_sessions;
        for (std::size_t i = 0; i < session.tags.size(); ++i) {
            const auto tag = session.tags[i];
            const double position = static_cast<double>(i + 1);
            auto& count = out.observations.at(tag);
            ++count;
            const double delta = position - out.mp[tag];
            out.mp[tag] += delta / static_cast<double>(count);
            m2[tag] += delta * (position - out.mp[tag]);
        }
    }
    if (n_sessions == 0) {
        throw std::invalid_argument("compute_position_stats: no sessions");
    }
    for (std::size_t t = 0; t < vocab_size; ++t) {
        if (out.observations[t] > 0) {
            out.vp[t] = std::max(0.0, m2[t] / static_cast<double>(out.observations[t]));
        }
    }
    return out;
}

template<SessionRange R>
GlobalTagStats compute_global_stats(R&& sessions, std::size_t vocab_size) {
    std::vector<const Session*> held;
    for (const Session& session : sessions) {
        held.push_back(&session);
    }
    auto deref = held | std::views::transform([](const Session* s) -> const Session& { return *s; });

    GlobalTagStats stats;
    stats.cb = compute_cb(deref, vocab_size);
    auto positions = compute_position_stats(deref, vocab_size);
    stats.mp = std::move(positions.mp);
    stats.vp = std::move(positions.vp);
    stats.observations = std::move(positions.observations);
    return stats;
}

/// Sessions of `ids` as a range of `const Session&`.
inline auto select_sessions(const Corpus& corpus, std::span<const SessionId> ids) {
    return ids | std::views::transform([&corpus](SessionId id) -> const Session& { return corpus.sessions.at(id); });
}

/// CSV columns: tag, cb, mp, vp.
inline void write_stats_csv(std::ostream& out, const TagVocabulary& vocabulary, const GlobalTagStats& stats) {
    out << "tag,cb,mp,vp\n";
    for (std::size_t t = 0; t < stats.size(); ++t) {
        out << csv_field(vocabulary.name(static_cast<TagId>(t))) << ',' << format_double(stats.cb[t]) << ',' << format_double(stats.mp[t]) << ','
            << format_double(stats.vp[t]) << '\n';
    }
}

}

#endif
