#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rdgd/errors.hpp"
#include "rdgd/linalg.hpp"

namespace rdgd {

/// One received message: the sender and its vector.
struct Message {
    AgentId agent = 0;
    Vector vector;
};

enum class FilterVariant { Sum, CGE, CWTM };

struct FilterKind {
    FilterVariant variant = FilterVariant::Sum;
    std::size_t f = 0;

    bool operator==(const FilterKind&) const = default;
};

inline std::string_view to_string(FilterVariant v) {
    switch (v) {
        case FilterVariant::Sum: return "sum";
        case FilterVariant::CGE: return "cge";
        case FilterVariant::CWTM: return "cwtm";
    }
    return "?";
}

inline FilterVariant parse_filter(std::string_view s) {
    if (s == "sum") return FilterVariant::Sum;
    if (s == "cge") return FilterVariant::CGE;
    if (s == "cwtm") return FilterVariant::CWTM;
    throw ConfigError("unknown filter '" + std::string(s) + "' (expected sum | cge | cwtm)");
}

namespace detail {

inline Eigen::Index common_dimension(const std::vector<Message>& msgs, const char* who) {
    if (msgs.empty()) throw PreconditionError(std::string(who) + ": no input vectors");
    const Eigen::Index d = msgs.front().vector.size();
    for (const auto& m : msgs) require_same_dim(m.vector, d, who);
    return d;
}

// Indices into msgs ordered by ascending agent id.
inline std::vector<std::size_t> by_agent(const std::vector<Message>& msgs) {
    std::vector<std::size_t> idx(msgs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return msgs[a].agent < msgs[b].agent; });
    for (std::size_t k = 1; k < idx.size(); ++k) {
        if (msgs[idx[k]].agent == msgs[idx[k - 1]].agent) {
            throw PreconditionError("aggregate: duplicate agent id in input");
        }
    }
    return idx;
}

// Left-to-right sum in the given order; every filter funnels through this
// so identical selections give identical bits.
inline Vector ordered_sum(const std::vector<Message>& msgs, const std::vector<std::size_t>& order,
                          Eigen::Index d) {
    Vector acc = Vector::Zero(d);
    for (auto k : order) acc += msgs[k].vector;
    return acc;
}

}  // namespace detail

inline Vector aggregate_sum(const std::vector<Message>& msgs) {
    const auto d = detail::common_dimension(msgs, "aggregate_sum");
    return detail::ordered_sum(msgs, detail::by_agent(msgs), d);
}

inline Vector aggregate_sum(const std::vector<Vector>& vectors) {
    std::vector<Message> msgs;
    msgs.reserve(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) msgs.push_back({i, vectors[i]});
    return aggregate_sum(msgs);
}

/// Agents whose vectors CGE keeps: the m - f smallest Euclidean norms, ties
/// broken by ascending agent id. Returned in ascending agent-id order.
inline std::vector<AgentId> cge_selection(const std::vector<Message>& msgs, std::size_t f) {
    detail::common_dimension(msgs, "aggregate_cge");
    if (f >= msgs.size()) throw PreconditionError("aggregate_cge: need f < m");
    auto idx = detail::by_agent(msgs);
    std::vector<double> norms(msgs.size());
    for (std::size_t k = 0; k < msgs.size(); ++k) norms[k] = msgs[k].vector.norm();
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return norms[a] < norms[b]; });
    std::vector<AgentId> keep;
    for (std::size_t k = 0; k < msgs.size() - f; ++k) keep.push_back(msgs[idx[k]].agent);
    std::sort(keep.begin(), keep.end());
    return keep;
}

/// Comparative gradient elimination: sum of the m - f smallest-norm vectors.
inline Vector aggregate_cge(const std::vector<Message>& msgs, std::size_t f) {
    const auto keep = cge_selection(msgs, f);
    const auto d = msgs.front().vector.size();
    auto order = detail::by_agent(msgs);
    std::erase_if(order, [&](std::size_t k) {
        return !std::binary_search(keep.begin(), keep.end(), msgs[k].agent);
    });
    return detail::ordered_sum(msgs, order, d);
}

/// Coordinate-wise trimmed mean, rescaled by (m - f): per coordinate drop the
/// f largest and f smallest values (ties by agent id), average the m - 2f
/// survivors, multiply by m - f. At f = 0 this is exactly aggregate_sum.
inline Vector aggregate_cwtm(const std::vector<Message>& msgs, std::size_t f) {
    const auto d = detail::common_dimension(msgs, "aggregate_cwtm");
    const std::size_t m = msgs.size();
    if (2 * f >= m) throw PreconditionError("aggregate_cwtm: need 2f < m");
    const auto order = detail::by_agent(msgs);
    if (f == 0) return detail::ordered_sum(msgs, order, d);

    const double scale = static_cast<double>(m - f) / static_cast<double>(m - 2 * f);
    Vector out(d);
    std::vector<std::size_t> ranked(m);
    std::vector<char> trimmed(m);
    for (Eigen::Index j = 0; j < d; ++j) {
        ranked = order;
        std::stable_sort(ranked.begin(), ranked.end(),
                         [&](auto a, auto b) { return msgs[a].vector[j] < msgs[b].vector[j]; });
        std::fill(trimmed.begin(), trimmed.end(), 0);
        for (std::size_t k = 0; k < f; ++k) {
            trimmed[ranked[k]] = 1;
            trimmed[ranked[m - 1 - k]] = 1;
        }
        double acc = 0.0;
        for (auto k : order) {
            if (!trimmed[k]) acc += msgs[k].vector[j];
        }
        out[j] = acc * scale;
    }
    return out;
}

inline Vector apply_filter(const FilterKind& kind, const std::vector<Message>& msgs) {
    switch (kind.variant) {
        case FilterVariant::Sum: return aggregate_sum(msgs);
        case FilterVariant::CGE: return aggregate_cge(msgs, kind.f);
        case FilterVariant::CWTM: return aggregate_cwtm(msgs, kind.f);
    }
    throw PreconditionError("apply_filter: unknown filter");
}

}  // namespace rdgd
