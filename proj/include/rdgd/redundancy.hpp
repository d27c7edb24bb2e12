#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rdgd/box.hpp"
#include "rdgd/costs.hpp"
#include "rdgd/errors.hpp"
#include "rdgd/linalg.hpp"

namespace rdgd {

using AgentSet = std::vector<AgentId>;  // sorted ascending

inline std::uint64_t to_mask(const AgentSet& s) {
    std::uint64_t m = 0;
    for (auto i : s) m |= std::uint64_t{1} << i;
    return m;
}

inline AgentSet from_mask(std::uint64_t m) {
    AgentSet s;
    for (AgentId i = 0; m != 0; ++i, m >>= 1) {
        if (m & 1U) s.push_back(i);
    }
    return s;
}

inline AgentSet all_agents(std::size_t n) {
    AgentSet s(n);
    for (AgentId i = 0; i < n; ++i) s[i] = i;
    return s;
}

struct SubsetMinimizer {
    AgentSet subset;
    Vector minimizer;
    double aggregate_condition = 0.0;  // lambda_min of sum_{i in S} A_i
};

/// Closed-form minimizer of sum_{i in S} Q_i: (sum A_i)^{-1} (sum b_i).
inline SubsetMinimizer subset_minimizer(const CostFamily& family, AgentSet subset) {
    if (subset.empty()) throw PreconditionError("subset_minimizer: empty subset");
    std::sort(subset.begin(), subset.end());
    if (std::adjacent_find(subset.begin(), subset.end()) != subset.end()) {
        throw PreconditionError("subset_minimizer: duplicate agent id");
    }
    const Eigen::Index d = family.dimension();
    Matrix A = Matrix::Zero(d, d);
    Vector b = Vector::Zero(d);
    for (auto i : subset) {
        if (i >= family.size()) throw PreconditionError("subset_minimizer: agent id out of range");
        A += family[i].A();
        b += family[i].b();
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(A);
    const double lo = eig.eigenvalues()(0);
    const double scale = std::max(1.0, eig.eigenvalues()(d - 1));
    if (!(lo > 1e-12 * scale)) {
        throw SingularAggregateError("subset_minimizer: aggregate is singular (lambda_min = " +
                                     std::to_string(lo) + "), minimizer is not unique");
    }
    Vector x = A.ldlt().solve(b);
    // One refinement step keeps the residual at rounding level for mildly
    // conditioned aggregates.
    x += A.ldlt().solve(b - A * x);
    const double residual = (A * x - b).norm();
    if (residual > 1e-9 * std::max(1.0, b.norm())) {
        throw SingularAggregateError("subset_minimizer: residual " + std::to_string(residual) +
                                     " too large, aggregate is ill-conditioned");
    }
    return {std::move(subset), std::move(x), lo};
}

struct RedundancyReport {
    std::size_t f = 0;
    std::size_t r = 0;
    double epsilon = 0.0;
    std::optional<std::pair<AgentSet, AgentSet>> witness_pair;  // empty when no pair exists
    std::size_t pairs_examined = 0;
};

namespace detail {

inline void check_redundancy_budget(std::size_t n, std::size_t f, std::size_t r, std::size_t cap) {
    if (r >= n) throw PreconditionError("compute_epsilon: need r < n");
    if (2 * f >= n - r) throw PreconditionError("compute_epsilon: need f < (n - r) / 2");
    if (n > cap || n >= 63) {
        throw EnumerationCapError("compute_epsilon: n = " + std::to_string(n) +
                                  " exceeds the enumeration cap " + std::to_string(cap));
    }
}

// Calls visit(submask) for every nonempty proper submask of `mask` with
// popcount >= min_size.
template <class Visit>
void for_each_proper_submask(std::uint64_t mask, std::size_t min_size, Visit&& visit) {
    for (std::uint64_t sub = (mask - 1) & mask; sub != 0; sub = (sub - 1) & mask) {
        if (static_cast<std::size_t>(std::popcount(sub)) >= min_size) visit(sub);
    }
}

template <class Visit>
void for_each_mask_of_size(std::size_t n, std::size_t k, Visit&& visit) {
    if (k > n) return;
    if (k == 0) {
        visit(std::uint64_t{0});
        return;
    }
    std::uint64_t m = (std::uint64_t{1} << k) - 1;
    const std::uint64_t limit = std::uint64_t{1} << n;
    while (m < limit) {
        visit(m);
        // Gosper's hack: next mask with the same popcount.
        const std::uint64_t c = m & (~m + 1);
        const std::uint64_t r = m + c;
        m = (((r ^ m) >> 2) / c) | r;
    }
}

}  // namespace detail

/// Exact (f, r; epsilon)-redundancy: the largest ||x_S - x_Shat|| over all
/// |S| = n - f, Shat a proper subset of S with |Shat| >= n - r - 2f.
/// Ties in the maximum resolve to the lexicographically smallest (S, Shat).
inline RedundancyReport compute_epsilon(const CostFamily& family, std::size_t f, std::size_t r,
                                        std::size_t enumeration_cap = kDefaultEnumerationCap) {
    const std::size_t n = family.size();
    detail::check_redundancy_budget(n, f, r, enumeration_cap);

    std::unordered_map<std::uint64_t, Vector> memo;
    const auto minimizer_of = [&](std::uint64_t mask) -> const Vector& {
        auto it = memo.find(mask);
        if (it == memo.end()) {
            it = memo.emplace(mask, subset_minimizer(family, from_mask(mask)).minimizer).first;
        }
        return it->second;
    };

    RedundancyReport report{f, r, 0.0, std::nullopt, 0};
    std::pair<AgentSet, AgentSet> best_pair;
    bool have_best = false;
    const std::size_t min_hat = n - r - 2 * f;  // >= 1 by the budget check

    detail::for_each_mask_of_size(n, n - f, [&](std::uint64_t s_mask) {
        const Vector& xs = minimizer_of(s_mask);
        detail::for_each_proper_submask(s_mask, min_hat, [&](std::uint64_t hat_mask) {
            ++report.pairs_examined;
            const double dist = (xs - minimizer_of(hat_mask)).norm();
            if (!have_best || dist > report.epsilon) {
                report.epsilon = dist;
                best_pair = {from_mask(s_mask), from_mask(hat_mask)};
                have_best = true;
            } else if (dist == report.epsilon) {
                std::pair<AgentSet, AgentSet> cand{from_mask(s_mask), from_mask(hat_mask)};
                if (cand < best_pair) best_pair = std::move(cand);
            }
        });
    });
    if (have_best) report.witness_pair = std::move(best_pair);
    return report;
}

/// x_H: unique minimizer of the honest agents' aggregate, required to lie in W.
inline Vector target_minimizer(const CostFamily& family, const AgentSet& honest, const FeasibleBox& box) {
    if (honest.empty()) throw PreconditionError("target_minimizer: honest set is empty");
    Vector x = subset_minimizer(family, honest).minimizer;
    if (!box.contains(x)) {
        throw BoxViolationError("target_minimizer: honest minimizer lies outside the feasible box");
    }
    return x;
}

}  // namespace rdgd
