#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "rdgd/bounds.hpp"

using namespace rdgd;

namespace {

struct Instance {
    std::size_t n, f, r;
    double mu, gamma, sigma, eps, Gamma;
};

// Rejection-samples (n, f, r, mu, gamma) until the variant is feasible.
Instance feasible_instance(Rng& rng, StochasticProblem p) {
    for (;;) {
        Instance in{};
        in.n = gen::index(rng, 2, 20);
        in.f = p == StochasticProblem::CS ? 0 : gen::index(rng, 0, in.n / 3);
        in.r = p == StochasticProblem::BS ? 0 : gen::index(rng, 0, in.n / 3);
        if (in.r >= in.n || 2 * in.f >= in.n - in.r) continue;
        in.gamma = rng.uniform(0.1, 2.0);
        in.mu = in.gamma * (1.0 + rng.uniform(0.0, 1.0) * rng.uniform(0.0, 1.0));
        in.sigma = rng.uniform(0.0, 2.0);
        in.eps = rng.uniform(0.0, 1.0);
        in.Gamma = rng.uniform(0.1, 10.0);
        const auto b = bounds_stochastic(p, in.n, in.f, in.r, in.mu, in.gamma, in.sigma, in.eps, 1.0, in.Gamma);
        if (b.feasible) return in;
    }
}

TheoremBounds at(StochasticProblem p, const Instance& in, double eta) {
    return bounds_stochastic(p, in.n, in.f, in.r, in.mu, in.gamma, in.sigma, in.eps, eta, in.Gamma);
}

// The rate parameters written out term by term.
double expanded_rho(StochasticProblem p, const Instance& in, double eta) {
    const double n = double(in.n), f = double(in.f), r = double(in.r), mu = in.mu, g = in.gamma;
    switch (p) {
        case StochasticProblem::BS:
            return 1 - 2 * (n - f) * eta * g + 4 * f * eta * mu + (n - f) * (n - f) * eta * eta * mu * mu;
        case StochasticProblem::CS:
            return 1 - 2 * (n * g - r * mu) * eta + (n - r) * (n - r) * eta * eta * mu * mu;
        case StochasticProblem::DS:
            return 1 - 2 * (n - f) * eta * g + 4 * (f + r) * eta * mu +
                   (n - r - f) * (n - r - f) * eta * eta * mu * mu;
    }
    return NAN;
}

double expanded_eta_bar(StochasticProblem p, const Instance& in) {
    const double n = double(in.n), f = double(in.f), r = double(in.r), mu = in.mu, g = in.gamma;
    switch (p) {
        case StochasticProblem::BS: {
            const double alpha = 1 - (f / n) * (g + 2 * mu) / g;
            return 2 * n * g * alpha / ((n - f) * (n - f) * mu * mu);
        }
        case StochasticProblem::CS: {
            const double alpha = 1 - (r / n) * (mu / g);
            return 2 * n * g * alpha / ((n - r) * (n - r) * mu * mu);
        }
        case StochasticProblem::DS: {
            const double m = n - r;
            const double alpha = 1 - (f - r) / m - (2 * mu / g) * (f + r) / m;
            return 2 * m * g * alpha / ((m - f) * (m - f) * mu * mu);
        }
    }
    return NAN;
}

const StochasticProblem kAll[] = {StochasticProblem::BS, StochasticProblem::CS, StochasticProblem::DS};

}  // namespace

TEST(FreshBounds, Examples) {
    auto b = bounds_fresh(5, 0, 2.0, 1.0, 0.7);
    EXPECT_EQ(b.alpha, 1.0);
    EXPECT_EQ(*b.radius, 0.0);
    b = bounds_fresh(3, 1, 1.0, 1.0, 0.5);
    EXPECT_NEAR(b.alpha, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(*b.radius, 1.5, 1e-12);
    EXPECT_TRUE(b.feasible);
    b = bounds_fresh(3, 3, 1.0, 1.0, 0.5);
    EXPECT_FALSE(b.feasible);
    EXPECT_TRUE(std::isinf(*b.radius));
    EXPECT_THROW(bounds_fresh(3, 1, 0.0, 1.0, 0.5), PreconditionError);
}

TEST(FreshBounds, RadiusLinearInEpsilon) {
    Rng rng(61);
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = gen::index(rng, 2, 20), r = gen::index(rng, 0, n - 1);
        const double g = rng.uniform(0.5, 1.0), mu = g * rng.uniform(1.0, 1.2), eps = rng.uniform(0, 3);
        const auto one = bounds_fresh(n, r, mu, g, eps), two = bounds_fresh(n, r, mu, g, 2 * eps);
        if (one.feasible) {
            EXPECT_EQ(*two.radius, 2 * *one.radius);
        }
    }
}

TEST(StaleBounds, SameConstantsAsFresh) {
    const auto a = bounds_fresh(7, 2, 1.3, 1.1, 0.4), b = bounds_stale(7, 2, 1.3, 1.1, 0.4);
    EXPECT_EQ(b.variant, BoundVariant::Stale);
    EXPECT_EQ(a.alpha, b.alpha);
    EXPECT_EQ(*a.radius, *b.radius);
}

TEST(Cge, Examples) {
    auto b = bounds_cge(4, 0, 0, 1.0, 0.5, 0.3, 0.01);
    EXPECT_DOUBLE_EQ(b.alpha, 1.0);
    EXPECT_DOUBLE_EQ(*b.radius, 0.01);
    EXPECT_DOUBLE_EQ(*b.xi, 4 * 0.5 * 0.01 * 0.01);
    b = bounds_cge(6, 1, 1, 1.0, 1.0, 0.25, 0.001);
    EXPECT_NEAR(b.alpha, 0.2, 1e-15);
    EXPECT_NEAR(*b.radius, 40 * 0.25 + 0.001, 1e-12);
    EXPECT_DOUBLE_EQ(*bounds_cge(6, 1, 1, 1.0, 1.0, 0.0, 0.001).radius, 0.001);
    EXPECT_FALSE(bounds_cge(5, 1, 1, 1.0, 1.0, 0.25, 0.001).feasible);
    EXPECT_THROW(bounds_cge(6, 1, 1, 1.0, 1.0, 0.25, 0.0), PreconditionError);
}

TEST(Cge, AlphaMarginShrinksWithFaults) {
    for (std::size_t f = 0; f < 4; ++f) EXPECT_GT(cge_alpha(10, f, 1, 1.2, 1.0), cge_alpha(10, f + 1, 1, 1.2, 1.0));
}

TEST(Cge, AlphaAtZeroStragglersIsTheBsAlpha) {
    Rng rng(62);
    for (int k = 0; k < 200; ++k) {
        const std::size_t n = gen::index(rng, 2, 20), f = gen::index(rng, 0, (n - 1) / 2);
        const double g = rng.uniform(0.1, 2), mu = g * rng.uniform(1, 3);
        const double bs = 1.0 - (double(f) / double(n)) * (g + 2 * mu) / g;
        EXPECT_NEAR(cge_alpha(n, f, 0, mu, g), bs, 1e-12);
        const auto ds = bounds_stochastic(StochasticProblem::DS, n, f, 0, mu, g, 0.1, 0.1, 0.01, 1.0);
        EXPECT_NEAR(ds.alpha, bs, 1e-12);
    }
}

TEST(StochasticBounds, NoiselessExactRedundancyHasNoFloor) {
    const auto b = bounds_stochastic(StochasticProblem::CS, 5, 0, 1, 1.0, 1.0, 0.0, 0.0, 0.01, 3.0);
    EXPECT_EQ(*b.M, 0.0);
    EXPECT_DOUBLE_EQ(b.expected_sq_distance_bound(10, 4.0), std::pow(*b.rho, 10) * 4.0);
}

TEST(StochasticBounds, BsWithoutFaultsIsCsWithoutStragglers) {
    Rng rng(63);
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = gen::index(rng, 1, 20);
        const double g = rng.uniform(0.1, 2), mu = g * rng.uniform(1, 3), s = rng.uniform(0, 1),
                     e = rng.uniform(0, 1), G = rng.uniform(0, 5), eta = rng.uniform(0.001, 0.1);
        const auto bs = bounds_stochastic(StochasticProblem::BS, n, 0, 0, mu, g, s, e, eta, G);
        const auto cs = bounds_stochastic(StochasticProblem::CS, n, 0, 0, mu, g, s, e, eta, G);
        EXPECT_DOUBLE_EQ(bs.alpha, cs.alpha);
        EXPECT_DOUBLE_EQ(*bs.eta_bar, *cs.eta_bar);
        EXPECT_DOUBLE_EQ(*bs.rho, *cs.rho);
        EXPECT_DOUBLE_EQ(*bs.M, *cs.M);
    }
}

TEST(StochasticBounds, DsWithoutStragglersIsBs) {
    Rng rng(64);
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = gen::index(rng, 2, 20), f = gen::index(rng, 0, (n - 1) / 2);
        const double g = rng.uniform(0.1, 2), mu = g * rng.uniform(1, 3), s = rng.uniform(0, 1),
                     e = rng.uniform(0, 1), G = rng.uniform(0, 5), eta = rng.uniform(0.001, 0.1);
        const auto bs = bounds_stochastic(StochasticProblem::BS, n, f, 0, mu, g, s, e, eta, G);
        const auto ds = bounds_stochastic(StochasticProblem::DS, n, f, 0, mu, g, s, e, eta, G);
        EXPECT_NEAR(ds.alpha, bs.alpha, 1e-12);
        EXPECT_NEAR(*ds.rho, *bs.rho, 1e-12);
        EXPECT_NEAR(*ds.M, *bs.M, 1e-12 * std::max(1.0, *bs.M));
    }
}

TEST(StochasticBounds, FactoredRateMatchesExpandedFormulas) {
    Rng rng(65);
    for (auto p : kAll) {
        for (int k = 0; k < 200; ++k) {
            const auto in = feasible_instance(rng, p);
            const double eta_bar = expanded_eta_bar(p, in);
            const double eta = rng.uniform(0.0, 1.5) * eta_bar;
            const auto b = at(p, in, eta);
            EXPECT_NEAR(*b.eta_bar, eta_bar, 1e-12 * eta_bar);
            EXPECT_NEAR(*b.rho, expanded_rho(p, in, eta), 1e-12);
        }
    }
}

TEST(StochasticBounds, RateAtEndpoints) {
    Rng rng(66);
    for (auto p : kAll) {
        const auto in = feasible_instance(rng, p);
        const double eta_bar = *at(p, in, 1.0).eta_bar;
        const auto half = at(p, in, eta_bar / 2);
        EXPECT_TRUE(check_rho_range(half));
        // eta_bar / 2 minimizes the rate.
        EXPECT_LE(*half.rho, *at(p, in, 0.4 * eta_bar).rho);
        EXPECT_LE(*half.rho, *at(p, in, 0.6 * eta_bar).rho);
        const auto tiny = at(p, in, 1e-9 * eta_bar);
        EXPECT_LT(*tiny.rho, 1.0);
        EXPECT_GT(*tiny.rho, 1.0 - 1e-6);
        const auto edge = at(p, in, eta_bar);
        EXPECT_EQ(*edge.rho, 1.0);
        EXPECT_FALSE(check_rho_range(edge));
        EXPECT_FALSE(check_rho_range(bounds_fresh(3, 1, 1, 1, 0.5)));
    }
}

TEST(StochasticBounds, DsNeedsEnoughAgents) {
    // With mu >= gamma, alpha > 0 already forces n > 3f + 2r, so the agent
    // count condition never decides feasibility on its own.
    const auto b = bounds_stochastic(StochasticProblem::DS, 7, 1, 1, 1.0, 1.0, 0.1, 0.1, 0.01, 1.0);
    EXPECT_TRUE(b.feasible);
    EXPECT_FALSE(bounds_stochastic(StochasticProblem::DS, 5, 1, 1, 1.0, 1.0, 0.1, 0.1, 0.01, 1.0).feasible);
}

TEST(StochasticProperty, RateInUnitIntervalForStableSteps) {
    Rng rng(67);
    for (auto p : kAll) {
        for (int k = 0; k < 500; ++k) {
            const auto in = feasible_instance(rng, p);
            const double eta_bar = *at(p, in, 1.0).eta_bar;
            double eta = 0.0;
            while (eta == 0.0) eta = rng.uniform() * eta_bar;
            const auto b = at(p, in, eta);
            EXPECT_TRUE(check_rho_range(b)) << to_string(p) << " rho = " << *b.rho;
        }
    }
}

TEST(StochasticProperty, FloorMonotoneInNoiseRedundancyAndDiameter) {
    Rng rng(68);
    for (auto p : kAll) {
        for (int k = 0; k < 100; ++k) {
            const auto in = feasible_instance(rng, p);
            const double eta = rng.uniform(0.01, 0.99) * *at(p, in, 1.0).eta_bar;
            const double base = *at(p, in, eta).M;
            const double h = 1e-3;
            Instance e = in, s = in, G = in;
            e.eps += h;
            s.sigma += h;
            G.Gamma += h;
            EXPECT_GE(*at(p, e, eta).M, base);
            EXPECT_GE(*at(p, s, eta).M, base);
            EXPECT_GE(*at(p, G, eta).M, base);
        }
    }
}

TEST(StochasticBounds, AsymptoticRadius) {
    const auto b = bounds_stochastic(StochasticProblem::CS, 5, 0, 1, 1.0, 1.0, 0.2, 0.1, 0.05, 3.0);
    ASSERT_TRUE(b.asymptotic_radius);
    EXPECT_DOUBLE_EQ(*b.asymptotic_radius, *b.M / (1 - *b.rho));
    EXPECT_NEAR(b.expected_sq_distance_bound(100000, 9.0), *b.asymptotic_radius, 1e-9);
}
