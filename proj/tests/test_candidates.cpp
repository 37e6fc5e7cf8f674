#include <catch_amalgamated.hpp>

#include "fixtures.hpp"

#include <tagrank/candidates.hpp>

#include <algorithm>
#include <set>
#include <sstream>

using namespace tagrank;
using Catch::Approx;
using fixtures::record;

namespace {

Corpus toy_corpus() {
    std::vector<RawRecord> records{
        record("s0", "u", {"a", "b"}, {0.0}),  record("s1", "u", {"a", "c"}, {1.0}),  record("s2", "v", {"c", "d"}, {2.0}),
        record("s3", "v", {"d", "e"}, {3.0}),  record("s4", "v", {"f"}, {10.0}),
    };
    return build_corpus(records, 1, 1);
}

Split everything_train(const Corpus& corpus) {
    Split split;
    for (SessionId i = 0; i < corpus.sessions.size(); ++i) {
        split.train.push_back(i);
    }
    return split;
}

Session query(std::vector<TagId> tags, std::vector<double> features) {
    Session s;
    s.image_id = "q";
    s.tags = std::move(tags);
    s.features = std::move(features);
    return s;
}

/// Straight transcription of pb + sb - cb with a naive neighbor scan.
std::vector<ScoredTag> oracle(const Corpus& corpus, const Split& split, const Session& image, UserIndex user, std::size_t m,
                              bool exclude_ground_truth, std::optional<SessionId> self) {
    const std::size_t vocab = corpus.vocabulary.size();
    std::vector<double> pb(vocab, 0.0), cb(vocab, 0.0), sb(vocab, 0.0);
    double n_user = 0.0;
    for (auto id : split.train) {
        const auto& s = corpus.sessions[id];
        for (auto t : s.tags) {
            cb[t] += 1.0 / static_cast<double>(split.train.size());
        }
        if (s.user == user) {
            n_user += 1.0;
        }
    }
    for (auto id : split.train) {
        const auto& s = corpus.sessions[id];
        if (s.user == user) {
            for (auto t : s.tags) {
                pb[t] += 1.0 / n_user;
            }
        }
    }
    std::vector<std::pair<double, SessionId>> by_distance;
    for (auto id : split.train) {
        if (self && *self == id) {
            continue;
        }
        double d = 0.0;
        for (std::size_t k = 0; k < image.features.size(); ++k) {
            const double diff = corpus.sessions[id].features[k] - image.features[k];
            d += diff * diff;
        }
        by_distance.emplace_back(d, id);
    }
    std::sort(by_distance.begin(), by_distance.end());
    for (std::size_t i = 0; i < std::min(m, by_distance.size()); ++i) {
        for (auto t : corpus.sessions[by_distance[i].second].tags) {
            sb[t] += 1.0 / static_cast<double>(m);
        }
    }
    std::vector<ScoredTag> out;
    for (TagId t = 0; t < vocab; ++t) {
        const double v = pb[t] + sb[t] - cb[t];
        const bool in_truth = std::find(image.tags.begin(), image.tags.end(), t) != image.tags.end();
        if (v >= -1e-12 && !(exclude_ground_truth && in_truth)) {
            out.push_back({t, v});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const ScoredTag& a, const ScoredTag& b) { return a.score > b.score + 1e-12; });
    return out;
}

}

TEST_CASE("candidate score is pb + sb - cb") {
    CHECK(score_tag(0.5, 0.75, 0.25) == 1.0);
    CHECK(score_tag(0.0, 0.0, 0.3) == -0.3);
    CHECK(score_tag(0.0, 0.0, 0.0) == 0.0);
}

TEST_CASE("toy corpus candidates match a hand trace") {
    // Query at 2.4 for user u with m = 2: neighbors s2 and s3.
    // pb_u: a 1, b .5, c .5; cb: a .4, b .2, c .4, d .4, e .2, f .2; sb: c .5, d 1, e .5.
    // Scores: a .6, c .6, d .6, b .3, e .3, f -.2.
    const auto corpus = toy_corpus();
    const auto split = everything_train(corpus);
    const auto stats = compute_candidate_stats(corpus, split);
    const auto index = build_index(corpus, split.train);
    CandidateOptions options;
    options.m = 2;
    const auto& vocab = corpus.vocabulary;

    const auto list = build_candidates(query({}, {2.4}), corpus.user_index("u"), corpus, index, stats, options, false);
    const std::vector<TagId> expected{vocab.id("a"), vocab.id("c"), vocab.id("d"), vocab.id("b"), vocab.id("e")};
    CHECK(list.tags() == expected);
    const std::vector<double> scores{0.6, 0.6, 0.6, 0.3, 0.3};
    for (std::size_t i = 0; i < scores.size(); ++i) {
        CHECK(list.entries[i].score == Approx(scores[i]).margin(1e-12));
    }
    CHECK(list.user_id == "u");
    CHECK(list.m == 2);

    const auto training = build_candidates(query({vocab.id("a")}, {2.4}), corpus.user_index("u"), corpus, index, stats, options, true);
    CHECK(training.tags() == std::vector<TagId>{vocab.id("c"), vocab.id("d"), vocab.id("b"), vocab.id("e")});

    std::ostringstream csv;
    write_candidates_csv(csv, training, vocab);
    CHECK(csv.str() == "rank,tag,score\n1,c,0.6\n2,d,0.6\n3,b,0.3\n4,e,0.3\n");
}

TEST_CASE("all-negative scores give an empty list") {
    const auto corpus = toy_corpus();
    const auto split = everything_train(corpus);
    // Every tag on every training image and never used by user 0: cb = 1, pb = 0, sb <= 2/10.
    auto stats = compute_candidate_stats(corpus, split);
    std::fill(stats.corpus_counts.begin(), stats.corpus_counts.end(), stats.corpus_sessions);
    std::fill(stats.user_counts[0].begin(), stats.user_counts[0].end(), 0);
    const auto index = build_index(corpus, std::vector<SessionId>{0, 1});
    CandidateOptions options;
    options.m = 10;
    const auto list = build_candidates(query({}, {0.0}), 0, corpus, index, stats, options, false);
    CHECK(list.entries.empty());
    CHECK(order_candidates(std::vector<double>{-0.1, -0.2}).empty());
}

TEST_CASE("equal scores are ordered by tag id and zero scores are kept") {
    const auto out = order_candidates(std::vector<double>{0.2, 0.5, 0.2, 0.0, -1e-9, 0.5});
    std::vector<TagId> tags;
    for (const auto& e : out) {
        tags.push_back(e.tag);
    }
    CHECK(tags == std::vector<TagId>{1, 5, 0, 2, 3});
}

TEST_CASE("statistics come from training sessions only") {
    const auto corpus = toy_corpus();
    Split split;
    split.train = {0, 2, 3};
    split.test = {1, 4};
    const auto stats = compute_candidate_stats(corpus, split);
    const auto& vocab = corpus.vocabulary;
    CHECK(stats.corpus_sessions == 3);
    CHECK(stats.cb(vocab.id("d")) == Approx(2.0 / 3.0));
    CHECK(stats.cb(vocab.id("f")) == 0.0);
    CHECK(stats.pb(corpus.user_index("u"), vocab.id("a")) == 1.0);
    CHECK(stats.pb(corpus.user_index("u"), vocab.id("c")) == 0.0);
}

TEST_CASE("an unknown user is an error") {
    const auto corpus = toy_corpus();
    const auto split = everything_train(corpus);
    const auto stats = compute_candidate_stats(corpus, split);
    const auto index = build_index(corpus, split.train);
    CHECK_THROWS_AS(build_candidates(query({}, {0.0}), 7, corpus, index, stats, CandidateOptions{}, false), std::out_of_range);
    CandidateOptions zero;
    zero.m = 0;
    CHECK_THROWS_AS(build_candidates(query({}, {0.0}), 0, corpus, index, stats, zero, false), std::invalid_argument);
}

TEST_CASE("self and same-user neighbors can be excluded") {
    const auto corpus = toy_corpus();
    const auto split = everything_train(corpus);
    const auto stats = compute_candidate_stats(corpus, split);
    const auto index = build_index(corpus, split.train);
    const auto u = corpus.user_index("u");
    const auto& vocab = corpus.vocabulary;
    CandidateOptions options;
    options.m = 1;

    // s1's own neighborhood without itself is s0 (distance 1, lower id than s2).
    const auto& s1 = corpus.sessions[1];
    const auto with_self = build_candidates(s1, u, corpus, index, stats, options, false);
    const auto without_self = build_candidates(s1, u, corpus, index, stats, options, false, SessionId{1});
    auto score_of = [](const CandidateList& list, TagId t) {
        for (const auto& e : list.entries) {
            if (e.tag == t) {
                return e.score;
            }
        }
        return -1.0;
    };
    CHECK(score_of(with_self, vocab.id("c")) == Approx(0.5 + 1.0 - 0.4));
    CHECK(score_of(without_self, vocab.id("b")) == Approx(0.5 + 1.0 - 0.2));

    options.exclude_same_user = true;
    const auto other_users = build_candidates(s1, u, corpus, index, stats, options, false);
    CHECK(score_of(other_users, vocab.id("d")) == Approx(0.0 + 1.0 - 0.4));
}

TEST_CASE("candidates match an exhaustive oracle on random small corpora") {
    Rng rng(17);
    for (int trial = 0; trial < 150; ++trial) {
        const auto records = fixtures::random_records(rng, 1 + rng.index(4), 2 + rng.index(4), 8, 2, 4);
        const auto corpus = build_corpus(records, 1, 1);
        Split split;
        for (SessionId i = 0; i < corpus.sessions.size(); ++i) {
            (rng.uniform() < 0.7 || i == 0 ? split.train : split.test).push_back(i);
        }
        const auto stats = compute_candidate_stats(corpus, split);
        const auto index = build_index(corpus, split.train);
        CandidateOptions options;
        options.m = 1 + rng.index(6);
        for (SessionId id = 0; id < corpus.sessions.size(); ++id) {
            const auto& s = corpus.sessions[id];
            if (!stats.knows(s.user)) {
                continue;
            }
            const bool exclude = rng.uniform() < 0.5;
            const std::optional<SessionId> self = rng.uniform() < 0.5 ? std::optional<SessionId>(id) : std::nullopt;
            const auto got = build_candidates(s, s.user, corpus, index, stats, options, exclude, self);
            const auto want = oracle(corpus, split, s, s.user, options.m, exclude, self);
            REQUIRE(got.entries.size() == want.size());
            std::set<TagId> seen;
            for (std::size_t i = 0; i < want.size(); ++i) {
                CHECK(got.entries[i].score == Approx(want[i].score).margin(1e-9));
                CHECK(got.entries[i].score >= 0.0);
                if (i > 0) {
                    CHECK(got.entries[i - 1].score >= got.entries[i].score);
                }
                CHECK(seen.insert(got.entries[i].tag).second);
                if (exclude) {
                    CHECK(std::find(s.tags.begin(), s.tags.end(), got.entries[i].tag) == s.tags.end());
                }
            }
        }
    }
}

TEST_CASE("relevance levels") {
    CHECK(assign_levels(12) == std::vector<int>{1, 2, 3, 4, 5, 6, 6, 6, 6, 6, 7, 7});
    CHECK(assign_levels(3) == std::vector<int>{1, 2, 3});
    CHECK(assign_levels(5) == std::vector<int>{1, 2, 3, 4, 5});
    CHECK(assign_levels(0).empty());

    const auto levels = assign_levels(200);
    for (std::size_t i = 1; i < levels.size(); ++i) {
        const bool changes = levels[i] != levels[i - 1];
        CHECK(levels[i] >= levels[i - 1]);
        CHECK(changes == (i < 5 || (i - 5) % 5 == 0));
    }
}

namespace {

CandidateList list_of(std::vector<TagId> tags) {
    CandidateList list;
    double score = 1.0;
    for (auto t : tags) {
        list.entries.push_back({t, score});
        score -= 0.1;
    }
    return list;
}

}

TEST_CASE("augmented order concatenates, deduplicates and truncates") {
    const std::vector<TagId> truth{0, 1};
    CHECK(augment_order(truth, list_of({2, 3}), 3).tags == std::vector<TagId>{0, 1, 2});
    CHECK(augment_order(truth, list_of({2, 3}), std::nullopt).tags == std::vector<TagId>{0, 1, 2, 3});
    CHECK(augment_order(truth, list_of({2, 3}), 50).tags == std::vector<TagId>{0, 1, 2, 3});
    CHECK(augment_order(std::vector<TagId>{0}, list_of({0, 1}), std::nullopt).tags == std::vector<TagId>{0, 1});
    CHECK(augment_order(truth, list_of({2}), 1).tags == std::vector<TagId>{0});
    CHECK_THROWS_AS(augment_order(truth, list_of({2}), 0), std::invalid_argument);

    const auto order = augment_order(truth, list_of({4, 1, 3}), std::nullopt);
    CHECK(order.supervised_count == 2);
    CHECK(order.levels == std::vector<int>{1, 2, 3, 4});
    CHECK_FALSE(order.scores[1].has_value());
    CHECK(order.scores[2] == 1.0);
}

TEST_CASE("augmented order keeps the ground truth as its prefix") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<TagId> pool(30);
        for (TagId t = 0; t < 30; ++t) {
            pool[t] = t;
        }
        rng.shuffle(std::span<TagId>(pool));
        const std::vector<TagId> truth(pool.begin(), pool.begin() + 1 + static_cast<std::ptrdiff_t>(rng.index(10)));
        rng.shuffle(std::span<TagId>(pool));
        const auto list = list_of(std::vector<TagId>(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(rng.index(20))));
        const std::optional<std::size_t> n = rng.uniform() < 0.3 ? std::nullopt : std::optional<std::size_t>(1 + rng.index(40));
        const auto order = augment_order(truth, list, n);

        const std::size_t prefix = std::min(truth.size(), n.value_or(truth.size()));
        CHECK(std::equal(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(prefix), order.tags.begin()));
        CHECK(std::set<TagId>(order.tags.begin(), order.tags.end()).size() == order.tags.size());
        if (n) {
            CHECK(order.tags.size() <= *n);
        }
        CHECK(order.levels == assign_levels(order.tags.size()));
    }
}
