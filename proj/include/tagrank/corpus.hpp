#ifndef TAGRANK_CORPUS_HPP
#define TAGRANK_CORPUS_HPP

#include "common.hpp"

#include <json.hpp>

#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

/**
 * @file corpus.hpp
 *
 * @brief Record ingestion, vocabulary/user filtering and per-user train/test splitting.
 *
 * Input is newline-delimited JSON, one tagging event per line:
 *
 *     {"image_id": "...", "user_id": "...", "tags": ["sky", "blue"], "features": [0.1, 0.2]}
 *
 * Tag order within `tags` is the user's order and is preserved everywhere.
 */

namespace tagrank {

struct RawRecord {
    std::string image_id;
    std::string user_id;
    std::vector<std::string> tags;
    std::vector<double> features;
};

/// One tagging event after filtering: tags are vocabulary ids in user order.
struct Session {
    std::string image_id;
    std::string user_id;
    UserIndex user = 0;
    std::vector<TagId> tags;
    std::vector<double> features;
};

class TagVocabulary {
public:
    TagVocabulary() = default;

    /// `tags` must be unique; ids follow the given order.
    TagVocabulary(std::vector<std::string> tags, std::vector<std::size_t> counts) : names_(std::move(tags)), counts_(std::move(counts)) {
        if (names_.size() != counts_.size()) {
            throw std::invalid_argument("TagVocabulary: names and counts differ in length");
        }
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (!ids_.emplace(names_[i], static_cast<TagId>(i)).second) {
                throw std::invalid_argument("TagVocabulary: duplicate tag '" + names_[i] + "'");
            }
        }
    }

    std::size_t size() const { return names_.size(); }

    const std::string& name(TagId id) const { return names_.at(id); }

    /// Number of retained sessions whose tag list contains the tag.
    std::size_t occurrences(TagId id) const { return counts_.at(id); }

    bool contains(const std::string& tag) const { return ids_.count(tag) != 0; }

    TagId id(const std::string& tag) const {
        auto it = ids_.find(tag);
        if (it == ids_.end()) {
            throw std::out_of_range("unknown tag '" + tag + "'");
        }
        return it->second;
    }

    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::vector<std::size_t> counts_;
    std::unordered_map<std::string, TagId> ids_;
};

struct UserEntry {
    std::string id;
    std::vector<SessionId> sessions;
};

struct Corpus {
    std::vector<Session> sessions;
    TagVocabulary vocabulary;
    std::vector<UserEntry> users;
    std::size_t feature_dim = 0;

    UserIndex user_index(const std::string& user_id) const {
        for (std::size_t u = 0; u < users.size(); ++u) {
            if (users[u].id == user_id) {
                return static_cast<UserIndex>(u);
            }
        }
        throw std::out_of_range("unknown user '" + user_id + "'");
    }
};

struct Split {
    std::vector<SessionId> train;
    std::vector<SessionId> test;
    std::uint64_t seed = 0;

    /// Per-session flag, indexed by session id.
    std::vector<bool> train_mask(std::size_t n_sessions) const {
        std::vector<bool> mask(n_sessions, false);
        for (auto id : train) {
            mask.at(id) = true;
        }
        return mask;
    }
};

/// Lowercases, trims and collapses internal whitespace runs to one space.
inline std::string normalize_tag(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char c : raw) {
        const auto uc = static_cast<unsigned char>(c);
        if (std::isspace(uc)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(uc)));
    }
    return out;
}

/// Normalizes each tag, drops empties and later duplicates.
inline std::vector<std::string> normalize_tags(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& tag : raw) {
        auto norm = normalize_tag(tag);
        if (!norm.empty() && seen.insert(norm).second) {
            out.push_back(std::move(norm));
        }
    }
    return out;
}

/// Parses one JSON line. Errors are reported with the 1-based line number.
inline RawRecord parse_record(const std::string& line, std::size_t line_number) {
    const std::string where = "line " + std::to_string(line_number) + ": ";
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(where + "malformed record (" + e.what() + ")");
    }
    if (!doc.is_object()) {
        throw DataError(where + "record is not an object");
    }

    auto require = [&](const char* key) -> const nlohmann::json& {
        auto it = doc.find(key);
        if (it == doc.end()) {
            throw DataError(where + "missing field '" + key + "'");
        }
        return *it;
    };

    RawRecord record;
    const auto& image = require("image_id");
    const auto& user = require("user_id");
    const auto& tags = require("tags");
    const auto& features = require("features");
    if (!image.is_string() || !user.is_string()) {
        throw DataError(where + "image_id and user_id must be strings");
    }
    record.image_id = image.get<std::string>();
    record.user_id = user.get<std::string>();

    if (!tags.is_array()) {
        throw DataError(where + "tags must be an array");
    }
    std::vector<std::string> raw_tags;
    for (const auto& tag : tags) {
        if (!tag.is_string()) {
            throw DataError(where + "tags must be strings");
        }
        raw_tags.push_back(tag.get<std::string>());
    }
    record.tags = normalize_tags(raw_tags);
    if (record.tags.empty()) {
        throw DataError(where + "record has no tags");
    }

    if (!features.is_array() || features.empty()) {
        throw DataError(where + "features must be a non-empty array");
    }
    record.features.reserve(features.size());
    for (const auto& value : features) {
        if (!value.is_number()) {
            throw DataError(where + "features must be numbers");
        }
        record.features.push_back(value.get<double>());
    }
    return record;
}

inline std::vector<RawRecord> read_records(std::istream& in) {
    std::vector<RawRecord> records;
    std::string line;
    std::size_t line_number = 0;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        auto record = parse_record(line, line_number);
        if (records.empty()) {
            dim = record.features.size();
        } else if (record.features.size() != dim) {
            throw DataError("line " + std::to_string(line_number) + ": feature dimensionality " + std::to_string(record.features.size()) +
                            " does not match corpus dimensionality " + std::to_string(dim));
        }
        records.push_back(std::move(record));
    }
    return records;
}

/**
 * @brief Filters records to a fixed point and assigns dense ids.
 *
 * One round counts each tag over the surviving records, removes tags below `min_occurrences`,
 * drops records left without tags, then drops users with fewer than `min_user_images` records.
 * Rounds repeat until nothing changes. Tag ids follow lexicographic order of the tag strings,
 * users are ordered by id string and sessions keep their input order.
 */
inline Corpus build_corpus(std::vector<RawRecord> records, std::size_t min_occurrences, std::size_t min_user_images) {
    if (min_occurrences < 1 || min_user_images < 1) {
        throw std::invalid_argument("build_corpus: thresholds must be >= 1");
    }

    bool changed = true;
    while (changed) {
        changed = false;

        std::unordered_map<std::string, std::size_t> counts;
        for (const auto& record : records) {
            for (const auto& tag : record.tags) {
                ++counts[tag];
            }
        }
        for (auto& record : records) {
            const auto before = record.tags.size();
            std::erase_if(record.tags, [&](const std::string& tag) { return counts[tag] < min_occurrences; });
            changed |= record.tags.size() != before;
        }
        changed |= std::erase_if(records, [](const RawRecord& r) { return r.tags.empty(); }) != 0;

        std::unordered_map<std::string, std::size_t> per_user;
        for (const auto& record : records) {
            ++per_user[record.user_id];
        }
        changed |= std::erase_if(records, [&](const RawRecord& r) { return per_user[r.user_id] < min_user_images; }) != 0;
    }

    if (records.empty()) {
        throw DataError("empty corpus: no sessions survive filtering");
    }

    std::map<std::string, std::size_t> tag_counts;
    std::set<std::string> user_ids;
    for (const auto& record : records) {
        for (const auto& tag : record.tags) {
            ++tag_counts[tag];
        }
        user_ids.insert(record.user_id);
    }

    Corpus corpus;
    std::vector<std::string> names;
    std::vector<std::size_t> counts;
    for (const auto& [tag, count] : tag_counts) {
        names.push_back(tag);
        counts.push_back(count);
    }
    corpus.vocabulary = TagVocabulary(std::move(names), std::move(counts));

    std::unordered_map<std::string, UserIndex> user_lookup;
    for (const auto& id : user_ids) {
        user_lookup.emplace(id, static_cast<UserIndex>(corpus.users.size()));
        corpus.users.push_back(UserEntry{id, {}});
    }

    corpus.feature_dim = records.front().features.size();
    corpus.sessions.reserve(records.size());
    for (auto& record : records) {
        Session session;
        session.image_id = std::move(record.image_id);
        session.user_id = std::move(record.user_id);
        session.user = user_lookup.at(session.user_id);
        for (const auto& tag : record.tags) {
            session.tags.push_back(corpus.vocabulary.id(tag));
        }
        session.features = std::move(record.features);
        corpus.users[session.user].sessions.push_back(static_cast<SessionId>(corpus.sessions.size()));
        corpus.sessions.push_back(std::move(session));
    }
    return corpus;
}

inline Corpus load_corpus(std::istream& in, std::size_t min_occurrences, std::size_t min_user_images) {
    return build_corpus(read_records(in), min_occurrences, min_user_images);
}

inline Corpus load_corpus(const std::string& path, std::size_t min_occurrences, std::size_t min_user_images) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open corpus file '" + path + "'");
    }
    return load_corpus(in, min_occurrences, min_user_images);
}

/// Writes the corpus back in the input record format.
inline void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const auto& session : corpus.sessions) {
        nlohmann::json doc;
        doc["image_id"] = session.image_id;
        doc["user_id"] = session.user_id;
        auto tags = nlohmann::json::array();
        for (auto tag : session.tags) {
            tags.push_back(corpus.vocabulary.name(tag));
        }
        doc["tags"] = std::move(tags);
        doc["features"] = session.features;
        out << doc.dump() << '\n';
    }
}

/**
 * @brief Halves each user's sessions after a seeded shuffle; an odd extra session goes to train.
 *
 * Users are visited in index order from one generator, so the split depends only on the corpus and the seed.
 */
inline Split split_corpus(const Corpus& corpus, std::uint64_t seed) {
    Split split;
    split.seed = seed;
    Rng rng(seed);
    for (const auto& user : corpus.users) {
        if (user.sessions.size() < 2) {
            throw DataError("cannot split user '" + user.id + "' with " + std::to_string(user.sessions.size()) + " session");
        }
        std::vector<SessionId> order = user.sessions;
        rng.shuffle(std::span<SessionId>(order));
        const std::size_t n_train = (order.size() + 1) / 2;
        split.train.insert(split.train.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.test.insert(split.test.end(), order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

/// Two columns per line: session id and `train` or `test`, ordered by session id.
inline void write_split(std::ostream& out, const Split& split, std::size_t n_sessions) {
    const auto mask = split.train_mask(n_sessions);
    std::vector<bool> in_test(n_sessions, false);
    for (auto id : split.test) {
        in_test.at(id) = true;
    }
    out << "# seed " << split.seed << '\n';
    for (std::size_t id = 0; id < n_sessions; ++id) {
        if (mask[id]) {
            out << id << " train\n";
        } else if (in_test[id]) {
            out << id << " test\n";
        }
    }
}

inline Split read_split(std::istream& in, std::size_t n_sessions) {
    Split split;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) {
            continue;
        }
        std::istringstream fields(line);
        if (line.front() == '#') {
            std::string hash, key;
            fields >> hash >> key >> split.seed;
            continue;
        }
        std::size_t id = 0;
        std::string part;
        if (!(fields >> id >> part) || id >= n_sessions || (part != "train" && part != "test")) {
            throw DataError("split line " + std::to_string(line_number) + ": expected '<session id> train|test'");
        }
        (part == "train" ? split.train : split.test).push_back(static_cast<SessionId>(id));
    }
    return split;
}

}

#endif
