#include <gtest/gtest.h>

#include "generators.hpp"
#include "oracle.hpp"
#include "rdgd/box.hpp"
#include "rdgd/redundancy.hpp"

using namespace rdgd;


TEST(SubsetMinimizer, Line3Examples) {
    const auto fam = gen::unit_centers({0, 1, 2});
    EXPECT_DOUBLE_EQ(subset_minimizer(fam, {0, 1, 2}).minimizer[0], 1.0);
    EXPECT_DOUBLE_EQ(subset_minimizer(fam, {0}).minimizer[0], 0.0);
    EXPECT_DOUBLE_EQ(subset_minimizer(fam, {1, 2}).minimizer[0], 1.5);
    EXPECT_DOUBLE_EQ(subset_minimizer(fam, {2, 1}).minimizer[0], 1.5);
}

TEST(SubsetMinimizer, GradientVanishesAtMinimizer) {
    Rng rng(21);
    for (int k = 0; k < 30; ++k) {
        const auto fam = gen::family(rng, 5, 3);
        const auto sm = subset_minimizer(fam, {0, 2, 4});
        Vector g = Vector::Zero(3);
        for (auto i : sm.subset) g += gradient(fam[i], sm.minimizer);
        EXPECT_LE(g.norm(), 1e-9);
        EXPECT_GT(sm.aggregate_condition, 0.0);
    }
}

TEST(SubsetMinimizer, SingularAggregateRefused) {
    CostFamily fam({QuadraticCost(Matrix::Zero(2, 2), Vector::Zero(2)),
                    QuadraticCost(Matrix::Identity(2, 2), Vector::Zero(2))});
    EXPECT_THROW(subset_minimizer(fam, {0}), SingularAggregateError);
    EXPECT_NO_THROW(subset_minimizer(fam, {0, 1}));
    EXPECT_THROW(subset_minimizer(fam, {}), PreconditionError);
}

TEST(Epsilon, Line3ByzantineBudget) {
    const auto rep = compute_epsilon(gen::unit_centers({0, 1, 2}), 1, 0);
    EXPECT_NEAR(rep.epsilon, 1.0, 1e-12);
    ASSERT_TRUE(rep.witness_pair);
    EXPECT_EQ(rep.witness_pair->first, (AgentSet{0, 2}));
    EXPECT_EQ(rep.witness_pair->second, (AgentSet{0}));
}

TEST(Epsilon, Line3StragglerBudget) {
    const auto rep = compute_epsilon(gen::unit_centers({0, 1, 2}), 0, 1);
    EXPECT_NEAR(rep.epsilon, 0.5, 1e-12);
    ASSERT_TRUE(rep.witness_pair);
    EXPECT_EQ(rep.witness_pair->first, (AgentSet{0, 1, 2}));
    EXPECT_EQ(rep.witness_pair->second, (AgentSet{0, 1}));
    EXPECT_EQ(rep.pairs_examined, 3U);
}

TEST(Epsilon, NoBudgetsNoPairs) {
    const auto rep = compute_epsilon(gen::unit_centers({0, 1, 2}), 0, 0);
    EXPECT_EQ(rep.epsilon, 0.0);
    EXPECT_FALSE(rep.witness_pair);
    EXPECT_EQ(rep.pairs_examined, 0U);
}

TEST(Epsilon, IdenticalCostsGiveZero) {
    Rng rng(4);
    const Matrix A = gen::spd(rng, 2);
    const Vector b = gen::vec(rng, 2);
    const CostFamily fam(std::vector<QuadraticCost>(6, QuadraticCost(A, b)));
    for (std::size_t r = 0; r < 6; ++r) {
        for (std::size_t f = 0; 2 * f < 6 - r; ++f) EXPECT_NEAR(compute_epsilon(fam, f, r).epsilon, 0.0, 1e-12);
    }
}

TEST(Epsilon, InfeasibleBudgetsRejected) {
    const auto fam = gen::unit_centers({0, 1, 2});
    EXPECT_THROW(compute_epsilon(fam, 2, 0), PreconditionError);
    EXPECT_THROW(compute_epsilon(fam, 1, 1), PreconditionError);
    EXPECT_THROW(compute_epsilon(fam, 0, 3), PreconditionError);
    EXPECT_THROW(compute_epsilon(fam, 0, 1, 2), EnumerationCapError);
}

TEST(EpsilonProperty, MatchesBruteForceOracle) {
    Rng rng(31);
    for (int k = 0; k < 50; ++k) {
        const std::size_t n = gen::index(rng, 2, 8);
        const auto d = static_cast<Eigen::Index>(gen::index(rng, 1, 3));
        const auto fam = gen::family(rng, n, d);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t f = 0; 2 * f < n - r; ++f) {
                const auto rep = compute_epsilon(fam, f, r);
                EXPECT_NEAR(rep.epsilon, oracle::epsilon(fam, f, r), 1e-9) << "family " << k << " f=" << f << " r=" << r;
                if (rep.witness_pair) {
                    const auto& [S, hat] = *rep.witness_pair;
                    EXPECT_EQ(S.size(), n - f);
                    EXPECT_LT(hat.size(), S.size());
                    EXPECT_GE(hat.size(), n - r - 2 * f);
                    EXPECT_TRUE(std::includes(S.begin(), S.end(), hat.begin(), hat.end()));
                    const double dist =
                        (subset_minimizer(fam, S).minimizer - subset_minimizer(fam, hat).minimizer).norm();
                    EXPECT_EQ(dist, rep.epsilon);
                }
            }
        }
    }
}

TEST(EpsilonProperty, NondecreasingInBothBudgets) {
    Rng rng(32);
    for (int k = 0; k < 40; ++k) {
        const std::size_t n = gen::index(rng, 3, 8);
        const auto fam = gen::family(rng, n, static_cast<Eigen::Index>(gen::index(rng, 1, 3)));
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t f = 0; 2 * f < n - r; ++f) {
                const double e = compute_epsilon(fam, f, r).epsilon;
                if (2 * f < n - r - 1) {
                    EXPECT_GE(compute_epsilon(fam, f, r + 1).epsilon, e - 1e-12);
                }
                if (2 * (f + 1) < n - r) {
                    EXPECT_GE(compute_epsilon(fam, f + 1, r).epsilon, e - 1e-12);
                }
            }
        }
    }
}

TEST(TargetMinimizer, Examples) {
    const auto fam = gen::unit_centers({0, 1, 2});
    const auto box = FeasibleBox::cube(1, 10);
    EXPECT_DOUBLE_EQ(target_minimizer(fam, {0, 1, 2}, box)[0], 1.0);
    EXPECT_DOUBLE_EQ(target_minimizer(fam, {0, 1}, box)[0], 0.5);
    EXPECT_THROW(target_minimizer(fam, {0, 1, 2}, FeasibleBox::cube(1, 0.1)), BoxViolationError);
    EXPECT_THROW(target_minimizer(fam, {}, box), PreconditionError);
}
