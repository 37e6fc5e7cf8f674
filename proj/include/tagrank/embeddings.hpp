#ifndef TAGRANK_EMBEDDINGS_HPP
#define TAGRANK_EMBEDDINGS_HPP

#include "common.hpp"
#include "corpus.hpp"
#include "tagstats.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <vector>

/**
 * @file embeddings.hpp
 *
 * @brief Skip-gram with negative sampling over tag lists, one list per document.
 */

namespace tagrank {

struct EmbeddingConfig {
    std::size_t dim = 100;
    std::size_t window = 5;
    std::size_t negatives = 5;
    std::size_t epochs = 5;
    double initial_lr = 0.025;
    double min_lr = 1e-4;
    std::uint64_t seed = 1;
};

class TagEmbeddings {
public:
    TagEmbeddings() = default;

    TagEmbeddings(std::size_t dim, std::size_t vocab_size, std::vector<double> values, std::uint64_t seed = 0)
        : dim_(dim), size_(vocab_size), values_(std::move(values)), seed_(seed) {
        if (values_.size() != dim_ * size_) {
            throw std::invalid_argument("TagEmbeddings: value count does not match dim * vocab_size");
        }
    }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return size_; }
    std::uint64_t seed() const { return seed_; }

    std::span<const double> vector(TagId tag) const {
        if (tag >= size_) {
            throw std::out_of_range("embedding_of: unknown tag id " + std::to_string(tag));
        }
        return {values_.data() + static_cast<std::size_t>(tag) * dim_, dim_};
    }

    const std::vector<double>& values() const { return values_; }

private:
    std::size_t dim_ = 0;
    std::size_t size_ = 0;
    std::vector<double> values_;
    std::uint64_t seed_ = 0;
};

inline std::span<const double> embedding_of(const TagEmbeddings& embeddings, TagId tag) {
    return embeddings.vector(tag);
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return dot(a, b) / (na * nb);
}

namespace detail {

inline double sigmoid(double x) {
    x = std::clamp(x, -30.0, 30.0);
    return 1.0 / (1.0 + std::exp(-x));
}

/// Draws tags with probability proportional to count^0.75.
class NegativeSampler {
public:
    explicit NegativeSampler(const std::vector<double>& counts) {
        cumulative_.reserve(counts.size());
        double total = 0.0;
        for (double c : counts) {
            total += std::pow(c, 0.75);
            cumulative_.push_back(total);
        }
        if (total <= 0.0) {
            throw std::invalid_argument("NegativeSampler: no tag has a positive count");
        }
    }

    TagId draw(Rng& rng) const {
        const double u = rng.uniform() * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        if (it == cumulative_.end()) {
            --it;
        }
        return static_cast<TagId>(it - cumulative_.begin());
    }

private:
    std::vector<double> cumulative_;
};

}

/**
 * @brief Trains one vector per vocabulary tag from the given tag lists.
 *
 * Single-threaded and fully determined by `config.seed`. For each center tag a window shrink
 * is drawn in [0, window), every other tag inside the shrunk window predicts the center, and
 * `negatives` tags drawn from the smoothed unigram distribution serve as negatives. The learning
 * rate decays linearly with processed centers and never drops below `min_lr`. Tags that never
 * appear keep their random initialization.
 */
template<SessionRange R>
TagEmbeddings train_embeddings(R&& train_sessions, std::size_t vocab_size, const EmbeddingConfig& config) {
    if (config.dim < 1 || config.epochs < 1) {
        throw std::invalid_argument("train_embeddings: dim and epochs must be >= 1");
    }
    if (vocab_size == 0) {
        throw std::invalid_argument("train_embeddings: empty vocabulary");
    }

    std::vector<std::vector<TagId>> documents;
    std::vector<double> counts(vocab_size, 0.0);
    std::size_t total_words = 0;
    for (const Session& session : train_sessions) {
        documents.push_back(session.tags);
        for (auto tag : session.tags) {
            counts.at(tag) += 1.0;
        }
        total_words += session.tags.size();
    }
    if (documents.empty()) {
        throw DataError("train_embeddings: empty corpus");
    }

    const std::size_t dim = config.dim;
    Rng rng(config.seed);
    std::vector<double> input(vocab_size * dim);
    for (auto& v : input) {
        v = (rng.uniform() - 0.5) / static_cast<double>(dim);
    }
    std::vector<double> output(vocab_size * dim, 0.0);
    std::vector<double> grad(dim);

    const detail::NegativeSampler sampler(counts);
    const double schedule = static_cast<double>(config.epochs * total_words) + 1.0;
    std::size_t processed = 0;

    std::vector<std::size_t> order(documents.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (auto doc_index : order) {
            const auto& doc = documents[doc_index];
            for (std::size_t center = 0; center < doc.size(); ++center) {
                const double lr = std::max(config.min_lr, config.initial_lr * (1.0 - static_cast<double>(processed) / schedule));
                ++processed;

                const std::size_t shrink = config.window > 0 ? static_cast<std::size_t>(rng.index(config.window)) : 0;
                const std::size_t reach = config.window - shrink;
                const std::size_t lo = center >= reach ? center - reach : 0;
                const std::size_t hi = std::min(doc.size() - 1, center + reach);

                for (std::size_t c = lo; c <= hi; ++c) {
                    if (c == center) {
                        continue;
                    }
                    double* in = input.data() + static_cast<std::size_t>(doc[c]) * dim;
                    std::fill(grad.begin(), grad.end(), 0.0);

                    for (std::size_t d = 0; d <= config.negatives; ++d) {
                        TagId target;
                        double label;
                        if (d == 0) {
                            target = doc[center];
                            label = 1.0;
                        } else {
                            target = sampler.draw(rng);
                            if (target == doc[center]) {
                                continue;
                            }
                            label = 0.0;
                        }
                        double* out = output.data() + static_cast<std::size_t>(target) * dim;
                        double f = 0.0;
                        for (std::size_t k = 0; k < dim; ++k) {
                            f += in[k] * out[k];
                        }
                        const double g = (label - detail::sigmoid(f)) * lr;
                        for (std::size_t k = 0; k < dim; ++k) {
                            grad[k] += g * out[k];
                            out[k] += g * in[k];
                        }
                    }
                    for (std::size_t k = 0; k < dim; ++k) {
                        in[k] += grad[k];
                    }
                }
            }
        }
    }

    return TagEmbeddings(dim, vocab_size, std::move(input), config.seed);
}

/// Header "dim vocab_size", then per tag: the tag followed by `dim` numbers, space-separated.
inline void save_embeddings(std::ostream& out, const TagEmbeddings& embeddings, const TagVocabulary& vocabulary) {
    if (vocabulary.size() != embeddings.size()) {
        throw std::invalid_argument("save_embeddings: vocabulary size does not match embeddings");
    }
    out << embeddings.dim() << ' ' << embeddings.size() << '\n';
    for (std::size_t t = 0; t < embeddings.size(); ++t) {
        out << vocabulary.name(static_cast<TagId>(t));
        for (double v : embeddings.vector(static_cast<TagId>(t))) {
            out << ' ' << format_double(v);
        }
        out << '\n';
    }
}

/**
 * @brief Reads the format written by `save_embeddings`, placing rows by vocabulary id.
 *
 * Tags may contain single spaces, so the trailing `dim` tokens are the numbers and the rest is the tag.
 */
inline TagEmbeddings load_embeddings(std::istream& in, const TagVocabulary& vocabulary) {
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("embeddings: missing header");
    }
    std::size_t dim = 0, size = 0;
    {
        std::istringstream header(line);
        if (!(header >> dim >> size) || dim == 0) {
            throw DataError("embeddings: malformed header '" + line + "'");
        }
    }
    if (size != vocabulary.size()) {
        throw DataError("embeddings: file has " + std::to_string(size) + " tags, vocabulary has " + std::to_string(vocabulary.size()));
    }

    std::vector<double> values(dim * size, 0.0);
    std::vector<bool> seen(size, false);
    for (std::size_t row = 0; row < size; ++row) {
        if (!std::getline(in, line)) {
            throw DataError("embeddings: expected " + std::to_string(size) + " rows, got " + std::to_string(row));
        }
        std::vector<std::string> tokens;
        std::istringstream fields(line);
        for (std::string token; fields >> token;) {
            tokens.push_back(token);
        }
        if (tokens.size() < dim + 1) {
            throw DataError("embeddings: row " + std::to_string(row + 1) + " is too short");
        }
        std::string tag = tokens[0];
        for (std::size_t i = 1; i + dim < tokens.size(); ++i) {
            tag += ' ' + tokens[i];
        }
        if (!vocabulary.contains(tag)) {
            throw DataError("embeddings: unknown tag '" + tag + "'");
        }
        const TagId id = vocabulary.id(tag);
        seen[id] = true;
        for (std::size_t k = 0; k < dim; ++k) {
            values[static_cast<std::size_t>(id) * dim + k] = parse_double(tokens[tokens.size() - dim + k]);
        }
    }
    for (std::size_t t = 0; t < size; ++t) {
        if (!seen[t]) {
            throw DataError("embeddings: no vector for tag '" + vocabulary.name(static_cast<TagId>(t)) + "'");
        }
    }
    return TagEmbeddings(dim, size, std::move(values));
}

}

#endif
