#ifndef TAGRANK_EVAL_HPP
#define TAGRANK_EVAL_HPP

#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

/**
 * @file eval.hpp
 *
 * @brief Reciprocal-rank DCG, per-image/per-user aggregation, t-tests and the random-user reassignment.
 */

namespace tagrank {

/// 1 / (1-based position in the ground truth), or 0 when absent.
inline double relevance(TagId tag, std::span<const TagId> ground_truth) {
    auto it = std::find(ground_truth.begin(), ground_truth.end(), tag);
    if (it == ground_truth.end()) {
        return 0.0;
    }
    return 1.0 / static_cast<double>(it - ground_truth.begin() + 1);
}

/// rel(t_1) + sum_{i >= 2} rel(t_i) / log2(i). Positions 1 and 2 carry the same weight.
inline double dcg(std::span<const TagId> predicted, std::span<const TagId> ground_truth) {
    double total = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double rel = relevance(predicted[i], ground_truth);
        if (rel == 0.0) {
            continue;
        }
        total += i == 0 ? rel : rel / std::log2(static_cast<double>(i + 1));
    }
    return total;
}

inline double dcg_at_k(std::span<const TagId> predicted, std::span<const TagId> ground_truth, std::size_t k) {
    if (k < 1) {
        throw std::invalid_argument("dcg_at_k: k must be >= 1");
    }
    return dcg(predicted.first(std::min(k, predicted.size())), ground_truth);
}

struct Aggregate {
    double per_image_mean = 0.0;
    /// Mean over users of each user's mean, every user weighted equally.
    double per_user_mean = 0.0;
};

/// `scores` holds (user, score) per image.
template<typename User>
Aggregate aggregate(std::span<const std::pair<User, double>> scores) {
    if (scores.empty()) {
        throw std::invalid_argument("aggregate: no scores");
    }
    std::map<User, std::pair<double, std::size_t>> by_user;
    double total = 0.0;
    for (const auto& [user, score] : scores) {
        total += score;
        auto& slot = by_user[user];
        slot.first += score;
        ++slot.second;
    }
    double user_total = 0.0;
    for (const auto& [user, slot] : by_user) {
        user_total += slot.first / static_cast<double>(slot.second);
    }
    return {total / static_cast<double>(scores.size()), user_total / static_cast<double>(by_user.size())};
}

struct ImageScore {
    SessionId session = 0;
    UserIndex user = 0;
    double dcg = 0.0;
    double dcg_at_k = 0.0;
};

struct EvalReport {
    std::string label;
    std::size_t k = 10;
    std::vector<ImageScore> per_image;
    Aggregate dcg;
    Aggregate dcg_at_k;
};

inline EvalReport summarize(std::string label, std::size_t k, std::vector<ImageScore> per_image) {
    EvalReport report;
    report.label = std::move(label);
    report.k = k;
    std::vector<std::pair<UserIndex, double>> full, truncated;
    for (const auto& s : per_image) {
        full.emplace_back(s.user, s.dcg);
        truncated.emplace_back(s.user, s.dcg_at_k);
    }
    report.dcg = aggregate<UserIndex>(full);
    report.dcg_at_k = aggregate<UserIndex>(truncated);
    report.per_image = std::move(per_image);
    return report;
}

/**
 * @brief Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
 *
 * The fraction converges quickly for x < (a + 1) / (a + b + 2); otherwise the symmetry
 * I_x(a, b) = 1 - I_{1-x}(b, a) is used.
 */
inline double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw std::invalid_argument("incomplete_beta: a and b must be positive");
    }
    if (x <= 0.0) {
        return 0.0;
    }
    if (x >= 1.0) {
        return 1.0;
    }
    if (x > (a + 1.0) / (a + b + 2.0)) {
        return 1.0 - incomplete_beta(b, a, 1.0 - x);
    }

    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;

    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::fabs(d) < tiny) {
        d = tiny;
    }
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 1000; ++m) {
        const double m2 = 2.0 * m;
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        d = std::fabs(d) < tiny ? tiny : d;
        c = 1.0 + num / c;
        c = std::fabs(c) < tiny ? tiny : c;
        d = 1.0 / d;
        h *= d * c;

        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        d = std::fabs(d) < tiny ? tiny : d;
        c = 1.0 + num / c;
        c = std::fabs(c) < tiny ? tiny : c;
        d = 1.0 / d;
        const double step = d * c;
        h *= step;
        if (std::fabs(step - 1.0) < eps) {
            break;
        }
    }
    return std::exp(log_front) * h / a;
}

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
inline double student_t_two_sided(double t, double df) {
    if (!(df > 0.0)) {
        throw std::invalid_argument("student_t_two_sided: df must be positive");
    }
    if (std::isinf(t)) {
        return 0.0;
    }
    const double t2 = t * t;
    // Small |t| would lose t2 in 1 - df / (df + t2); take the complement directly.
    if (t2 < df) {
        return 1.0 - incomplete_beta(0.5, 0.5 * df, t2 / (df + t2));
    }
    return incomplete_beta(0.5 * df, 0.5, df / (df + t2));
}

enum class TTestKind { paired, welch };

struct TTestResult {
    double t_statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    double df = 0.0;
    TTestKind kind = TTestKind::paired;
    /// Zero-variance differences with a nonzero mean: t is infinite and p is reported as 0.
    bool degenerate = false;
};

namespace detail {

inline std::pair<double, double> mean_and_variance(std::span<const double> values) {
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return {mean, ss / static_cast<double>(values.size() - 1)};
}

}

/// Two-sided paired t-test on a[i] - b[i] with n - 1 degrees of freedom.
inline TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("paired_ttest: samples differ in length");
    }
    if (a.size() < 2) {
        throw std::invalid_argument("paired_ttest: need at least 2 pairs");
    }
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff[i] = a[i] - b[i];
    }
    const auto [mean, variance] = detail::mean_and_variance(diff);

    TTestResult result;
    result.n = a.size();
    result.df = static_cast<double>(a.size() - 1);
    if (variance == 0.0) {
        if (mean == 0.0) {
            return result;
        }
        result.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), mean);
        result.p_value = 0.0;
        result.degenerate = true;
        return result;
    }
    result.t_statistic = mean / std::sqrt(variance / static_cast<double>(a.size()));
    result.p_value = student_t_two_sided(result.t_statistic, result.df);
    return result;
}

/// Two-sided unequal-variance t-test with Welch-Satterthwaite degrees of freedom.
inline TTestResult welch_ttest(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) {
        throw std::invalid_argument("welch_ttest: need at least 2 values per sample");
    }
    const auto [ma, va] = detail::mean_and_variance(a);
    const auto [mb, vb] = detail::mean_and_variance(b);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double se2 = va / na + vb / nb;

    TTestResult result;
    result.kind = TTestKind::welch;
    result.n = a.size() + b.size();
    if (se2 == 0.0) {
        result.df = na + nb - 2.0;
        if (ma != mb) {
            result.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), ma - mb);
            result.p_value = 0.0;
            result.degenerate = true;
        }
        return result;
    }
    result.df = se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    result.t_statistic = (ma - mb) / std::sqrt(se2);
    result.p_value = student_t_two_sided(result.t_statistic, result.df);
    return result;
}

/**
 * @brief For each query owner, a uniformly drawn other user from `modeled`.
 *
 * @param owners Owner of each query.
 * @param modeled Users that have a model, ascending and unique.
 */
inline std::vector<UserIndex> ablate_random_user(std::span<const UserIndex> owners, std::span<const UserIndex> modeled, std::uint64_t seed) {
    if (modeled.size() < 2) {
        throw std::invalid_argument("ablate_random_user: need at least 2 users with models");
    }
    Rng rng(seed);
    std::vector<UserIndex> out;
    out.reserve(owners.size());
    for (auto owner : owners) {
        const bool owner_modeled = std::binary_search(modeled.begin(), modeled.end(), owner);
        const std::size_t choices = modeled.size() - (owner_modeled ? 1 : 0);
        auto pick = static_cast<std::size_t>(rng.index(choices));
        if (owner_modeled) {
            const auto owner_pos = static_cast<std::size_t>(std::lower_bound(modeled.begin(), modeled.end(), owner) - modeled.begin());
            if (pick >= owner_pos) {
                ++pick;
            }
        }
        out.push_back(modeled[pick]);
    }
    return out;
}

/// Kendall's tau-b between two score vectors over the same items.
inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("kendall_tau: lengths differ");
    }
    double concordant = 0.0, discordant = 0.0, ties_x = 0.0, ties_y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx == 0.0 && dy == 0.0) {
                continue;
            }
            if (dx == 0.0) {
                ties_x += 1.0;
            } else if (dy == 0.0) {
                ties_y += 1.0;
            } else if ((dx > 0.0) == (dy > 0.0)) {
                concordant += 1.0;
            } else {
                discordant += 1.0;
            }
        }
    }
    const double denom = std::sqrt((concordant + discordant + ties_x) * (concordant + discordant + ties_y));
    return denom == 0.0 ? 0.0 : (concordant - discordant) / denom;
}

}

#endif
