#include <catch_amalgamated.hpp>

#include "fixtures.hpp"

#include <tagrank/embeddings.hpp>

#include <cmath>
#include <sstream>

using namespace tagrank;

namespace {

Session with_tags(std::vector<TagId> tags) {
    Session s;
    s.tags = std::move(tags);
    return s;
}

/// `docs` documents alternating between the cliques, each listing its clique in a random order.
std::vector<Session> clique_corpus(const std::vector<std::vector<TagId>>& cliques, std::size_t docs, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Session> out;
    for (std::size_t i = 0; i < docs; ++i) {
        auto tags = cliques[i % cliques.size()];
        rng.shuffle(std::span<TagId>(tags));
        out.push_back(with_tags(tags));
    }
    return out;
}

std::pair<double, double> within_and_across(const TagEmbeddings& e, const std::vector<std::vector<TagId>>& cliques) {
    double within = 0.0, across = 0.0;
    int nw = 0, na = 0;
    for (std::size_t a = 0; a < cliques.size(); ++a) {
        for (std::size_t b = a; b < cliques.size(); ++b) {
            for (auto x : cliques[a]) {
                for (auto y : cliques[b]) {
                    if (x == y) {
                        continue;
                    }
                    const double c = cosine(e.vector(x), e.vector(y));
                    if (a == b) {
                        within += c;
                        ++nw;
                    } else {
                        across += c;
                        ++na;
                    }
                }
            }
        }
    }
    return {within / nw, across / na};
}

}

TEST_CASE("one vector of the configured length per tag") {
    std::vector<Session> docs{with_tags({0, 1}), with_tags({2, 1})};
    EmbeddingConfig config;
    const auto e = train_embeddings(docs, 3, config);
    CHECK(e.dim() == 100);
    CHECK(e.size() == 3);
    for (TagId t = 0; t < 3; ++t) {
        CHECK(embedding_of(e, t).size() == 100);
    }
    CHECK(embedding_of(e, 0).data() != embedding_of(e, 1).data());
    CHECK(embedding_of(e, 0)[0] != embedding_of(e, 1)[0]);
    CHECK_THROWS_AS(embedding_of(e, 3), std::out_of_range);
}

TEST_CASE("training is bitwise reproducible from the seed") {
    const auto docs = clique_corpus({{0, 1, 2}, {3, 4}}, 60, 2);
    EmbeddingConfig config;
    config.dim = 16;
    const auto a = train_embeddings(docs, 6, config);
    const auto b = train_embeddings(docs, 6, config);
    CHECK(a.values() == b.values());
    config.seed = 2;
    CHECK(train_embeddings(docs, 6, config).values() != a.values());
}

TEST_CASE("two cliques separate") {
    // Three tags per clique: a pair that only ever co-occurs shares no context, so skip-gram input vectors cannot pull it together.
    const std::vector<std::vector<TagId>> cliques{{0, 1, 4}, {2, 3, 5}};
    const auto docs = clique_corpus(cliques, 200, 4);
    const auto e = train_embeddings(docs, 6, EmbeddingConfig{});
    CHECK(cosine(e.vector(0), e.vector(1)) > cosine(e.vector(0), e.vector(2)));
    const auto [within, across] = within_and_across(e, cliques);
    CHECK(within - across >= 0.2);
}

TEST_CASE("several larger cliques separate") {
    const std::vector<std::vector<TagId>> cliques{{0, 1, 2, 3}, {4, 5, 6, 7}, {8, 9, 10, 11}, {12, 13, 14, 15}};
    const auto docs = clique_corpus(cliques, 400, 5);
    EmbeddingConfig config;
    config.dim = 50;
    const auto e = train_embeddings(docs, 16, config);
    const auto [within, across] = within_and_across(e, cliques);
    CHECK(within - across >= 0.2);
}

TEST_CASE("vectors stay finite under aggressive settings") {
    const auto docs = clique_corpus({{0, 1, 2}, {2, 3}, {4}}, 100, 6);
    EmbeddingConfig config;
    config.dim = 8;
    config.epochs = 40;
    config.initial_lr = 1.0;
    const auto e = train_embeddings(docs, 5, config);
    for (double v : e.values()) {
        CHECK(std::isfinite(v));
    }
}

TEST_CASE("tags absent from training keep their initialization") {
    std::vector<Session> docs{with_tags({0, 1}), with_tags({1, 0})};
    EmbeddingConfig config;
    config.dim = 10;
    const auto e = train_embeddings(docs, 4, config);
    for (TagId t : {2u, 3u}) {
        for (double v : e.vector(t)) {
            CHECK(std::fabs(v) <= 0.5 / 10.0);
        }
    }
}

TEST_CASE("invalid training input is rejected") {
    EmbeddingConfig config;
    CHECK_THROWS_AS(train_embeddings(std::vector<Session>{}, 3, config), DataError);
    config.dim = 0;
    CHECK_THROWS_AS(train_embeddings(std::vector<Session>{with_tags({0})}, 1, config), std::invalid_argument);
}

TEST_CASE("negative sampler follows the smoothed unigram distribution") {
    const std::vector<double> counts{1.0, 16.0, 0.0, 81.0};
    const detail::NegativeSampler sampler(counts);
    Rng rng(7);
    std::vector<double> hits(4, 0.0);
    const int draws = 200000;
    for (int i = 0; i < draws; ++i) {
        hits[sampler.draw(rng)] += 1.0;
    }
    const double z = 1.0 + 8.0 + 27.0;
    CHECK(hits[0] / draws == Catch::Approx(1.0 / z).margin(0.005));
    CHECK(hits[1] / draws == Catch::Approx(8.0 / z).margin(0.005));
    CHECK(hits[2] == 0.0);
    CHECK(hits[3] / draws == Catch::Approx(27.0 / z).margin(0.005));
}

TEST_CASE("embeddings round-trip through text, including tags with spaces") {
    std::vector<RawRecord> records{fixtures::record("1", "a", {"blue sky", "sea"}), fixtures::record("2", "a", {"sea", "sun"})};
    const auto corpus = build_corpus(records, 1, 1);
    EmbeddingConfig config;
    config.dim = 5;
    const auto e = train_embeddings(corpus.sessions, corpus.vocabulary.size(), config);
    std::ostringstream out;
    save_embeddings(out, e, corpus.vocabulary);
    CHECK(out.str().rfind("5 3\nblue sky ", 0) == 0);
    std::istringstream in(out.str());
    const auto back = load_embeddings(in, corpus.vocabulary);
    CHECK(back.values() == e.values());
}

TEST_CASE("malformed embedding files are rejected") {
    std::vector<RawRecord> records{fixtures::record("1", "a", {"x", "y"})};
    const auto corpus = build_corpus(records, 1, 1);
    auto load = [&](const std::string& text) {
        std::istringstream in(text);
        return load_embeddings(in, corpus.vocabulary);
    };
    CHECK_THROWS_AS(load(""), DataError);
    CHECK_THROWS_AS(load("2 3\n"), DataError);
    CHECK_THROWS_AS(load("2 2\nx 1 2\nz 3 4\n"), DataError);
    CHECK_THROWS_AS(load("2 2\nx 1 2\nx 3 4\n"), DataError);
    CHECK_THROWS_AS(load("2 2\nx 1 2\n"), DataError);
    CHECK_THROWS_AS(load("2 2\nx 1 2\ny 3\n"), DataError);
    CHECK(load("2 2\ny 3 4\nx 1 2\n").vector(1)[0] == 3.0);
}
