#ifndef TAGRANK_TESTS_FIXTURES_HPP
#define TAGRANK_TESTS_FIXTURES_HPP

#include <tagrank/corpus.hpp>

#include <sstream>
#include <string>
#include <vector>

namespace fixtures {

inline tagrank::RawRecord record(std::string image, std::string user, std::vector<std::string> tags, std::vector<double> features = {0.0}) {
    return {std::move(image), std::move(user), std::move(tags), std::move(features)};
}

inline std::string to_jsonl(const std::vector<tagrank::RawRecord>& records) {
    std::ostringstream out;
    for (const auto& r : records) {
        out << "{\"image_id\":\"" << r.image_id << "\",\"user_id\":\"" << r.user_id << "\",\"tags\":[";
        for (std::size_t i = 0; i < r.tags.size(); ++i) {
            out << (i ? "," : "") << '"' << r.tags[i] << '"';
        }
        out << "],\"features\":[";
        for (std::size_t i = 0; i < r.features.size(); ++i) {
            out << (i ? "," : "") << tagrank::format_double(r.features[i]);
        }
        out << "]}\n";
    }
    return out.str();
}

/// Tag names of a session, in list order.
inline std::vector<std::string> names(const tagrank::Corpus& corpus, const tagrank::Session& session) {
    std::vector<std::string> out;
    for (auto t : session.tags) {
        out.push_back(corpus.vocabulary.name(t));
    }
    return out;
}

/// Random corpus with `users` users, `images` images each, tags drawn from `vocab` names.
inline std::vector<tagrank::RawRecord> random_records(tagrank::Rng& rng, std::size_t users, std::size_t images, std::size_t vocab, std::size_t dim,
                                                      std::size_t max_tags) {
    std::vector<tagrank::RawRecord> records;
    for (std::size_t u = 0; u < users; ++u) {
        for (std::size_t i = 0; i < images; ++i) {
            tagrank::RawRecord r;
            r.user_id = "u" + std::to_string(u);
            r.image_id = r.user_id + "_" + std::to_string(i);
            const auto n = 1 + rng.index(max_tags);
            for (std::size_t k = 0; k < n; ++k) {
                r.tags.push_back("t" + std::to_string(rng.index(vocab)));
            }
            r.tags = tagrank::normalize_tags(r.tags);
            for (std::size_t d = 0; d < dim; ++d) {
                r.features.push_back(rng.uniform(-1.0, 1.0));
            }
            records.push_back(std::move(r));
        }
    }
    return records;
}

}

#endif
