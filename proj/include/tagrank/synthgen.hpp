#ifndef TAGRANK_SYNTHGEN_HPP
#define TAGRANK_SYNTHGEN_HPP

#include "common.hpp"
#include "corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

/**
 * @file synthgen.hpp
 *
 * @brief Synthetic corpora with planted per-user tag preferences.
 *
 * Every tag has a latent vector and every user a latent weight vector. The user lists the
 * `tags_per_image` tags with the highest w_u . latent(t) + N(0, sigma^2), best first. By default
 * every tag is eligible; a smaller `pool_size` restricts each image to the tags most aligned
 * with a random content vector.
 * The image's visual features are a fixed random projection of the mean latent of its listed
 * tags plus a little noise, so visually close images share tags.
 */

namespace tagrank {

struct SynthSpec {
    std::size_t n_users = 20;
    std::size_t images_per_user = 40;
    std::size_t vocab_size = 300;
    std::size_t feature_dim = 32;
    std::size_t tags_per_image = 8;
    std::size_t latent_dim = 8;
    double sigma = 0.0;
    std::uint64_t seed = 1;
    /// Visible tags per image, chosen by alignment with a random content vector; 0 means the whole vocabulary.
    std::size_t pool_size = 0;
    double feature_noise = 0.05;
};

struct SynthData {
    std::vector<RawRecord> records;
    std::vector<std::string> user_ids;
    std::vector<std::vector<double>> user_weights;
    std::vector<std::string> tag_names;
    std::vector<std::vector<double>> tag_latents;
};

namespace detail {

inline std::string padded(const char* prefix, std::size_t value, std::size_t count) {
    const int width = static_cast<int>(std::to_string(count > 0 ? count - 1 : 0).size());
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%s%0*zu", prefix, width, value);
    return buffer;
}

}

inline SynthData generate(const SynthSpec& spec) {
    const std::size_t pool_size = spec.pool_size == 0 ? spec.vocab_size : spec.pool_size;
    if (spec.n_users < 1 || spec.images_per_user < 1 || spec.vocab_size < 1 || spec.feature_dim < 1 || spec.tags_per_image < 1 ||
        spec.latent_dim < 1) {
        throw std::invalid_argument("generate: all counts must be >= 1");
    }
    if (!(spec.sigma >= 0.0) || !(spec.feature_noise >= 0.0)) {
        throw std::invalid_argument("generate: noise levels must be >= 0");
    }
    if (spec.vocab_size < spec.tags_per_image || spec.vocab_size < pool_size || pool_size < spec.tags_per_image) {
        throw std::invalid_argument("generate: vocabulary of " + std::to_string(spec.vocab_size) + " is too small for " +
                                    std::to_string(spec.tags_per_image) + " tags per image from a pool of " + std::to_string(pool_size));
    }

    Rng rng(spec.seed);
    SynthData data;

    auto gaussian_vector = [&](std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) {
            x = rng.normal();
        }
        return v;
    };

    for (std::size_t t = 0; t < spec.vocab_size; ++t) {
        data.tag_names.push_back(detail::padded("tag", t, spec.vocab_size));
        data.tag_latents.push_back(gaussian_vector(spec.latent_dim));
    }
    for (std::size_t u = 0; u < spec.n_users; ++u) {
        data.user_ids.push_back(detail::padded("user", u, spec.n_users));
        data.user_weights.push_back(gaussian_vector(spec.latent_dim));
    }
    std::vector<double> projection = gaussian_vector(spec.feature_dim * spec.latent_dim);
    const double projection_scale = 1.0 / std::sqrt(static_cast<double>(spec.latent_dim));

    std::vector<std::size_t> order(spec.vocab_size);
    std::vector<double> key(spec.vocab_size);
    for (std::size_t u = 0; u < spec.n_users; ++u) {
        const auto& w = data.user_weights[u];
        for (std::size_t i = 0; i < spec.images_per_user; ++i) {
            const auto content = gaussian_vector(spec.latent_dim);
            for (std::size_t t = 0; t < spec.vocab_size; ++t) {
                key[t] = dot(data.tag_latents[t], content);
            }
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(pool_size), order.end(),
                              [&](std::size_t a, std::size_t b) { return key[a] != key[b] ? key[a] > key[b] : a < b; });

            std::vector<std::pair<double, std::size_t>> pool;
            for (std::size_t p = 0; p < pool_size; ++p) {
                const auto t = order[p];
                const double noise = spec.sigma > 0.0 ? spec.sigma * rng.normal() : 0.0;
                pool.emplace_back(dot(w, data.tag_latents[t]) + noise, t);
            }
            std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });

            RawRecord record;
            record.user_id = data.user_ids[u];
            record.image_id = data.user_ids[u] + "_" + detail::padded("img", i, spec.images_per_user);
            std::vector<double> mean_latent(spec.latent_dim, 0.0);
            for (std::size_t p = 0; p < spec.tags_per_image; ++p) {
                const auto t = pool[p].second;
                record.tags.push_back(data.tag_names[t]);
                for (std::size_t d = 0; d < spec.latent_dim; ++d) {
                    mean_latent[d] += data.tag_latents[t][d] / static_cast<double>(spec.tags_per_image);
                }
            }
            record.features.resize(spec.feature_dim);
            for (std::size_t f = 0; f < spec.feature_dim; ++f) {
                double value = 0.0;
                for (std::size_t d = 0; d < spec.latent_dim; ++d) {
                    value += projection[f * spec.latent_dim + d] * mean_latent[d];
                }
                value *= projection_scale;
                if (spec.feature_noise > 0.0) {
                    value += spec.feature_noise * rng.normal();
                }
                record.features[f] = value;
            }
            data.records.push_back(std::move(record));
        }
    }
    return data;
}

/// Writes records in the corpus input format.
inline void write_records(std::ostream& out, const std::vector<RawRecord>& records) {
    for (const auto& record : records) {
        nlohmann::json doc;
        doc["image_id"] = record.image_id;
        doc["user_id"] = record.user_id;
        doc["tags"] = record.tags;
        doc["features"] = record.features;
        out << doc.dump() << '\n';
    }
}

/// CSV: user_id followed by the latent weight components.
inline void write_latent_truth(std::ostream& out, const SynthData& data) {
    for (std::size_t u = 0; u < data.user_ids.size(); ++u) {
        out << csv_field(data.user_ids[u]);
        for (double v : data.user_weights[u]) {
            out << ',' << format_double(v);
        }
        out << '\n';
    }
}

/// CSV: tag followed by its latent components.
inline void write_tag_latents(std::ostream& out, const SynthData& data) {
    for (std::size_t t = 0; t < data.tag_names.size(); ++t) {
        out << csv_field(data.tag_names[t]);
        for (double v : data.tag_latents[t]) {
            out << ',' << format_double(v);
        }
        out << '\n';
    }
}

}

#endif
