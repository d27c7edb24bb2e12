#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "rdgd/errors.hpp"
#include "rdgd/linalg.hpp"
#include "rdgd/rng.hpp"

namespace rdgd {

/// Agent cost Q(x) = 1/2 x'Ax - b'x with symmetric positive-semidefinite A,
/// so grad Q(x) = Ax - b. A is symmetrized on construction.
class QuadraticCost {
public:
    QuadraticCost(Matrix A, Vector b) : A_(std::move(A)), b_(std::move(b)) {
        if (A_.rows() != A_.cols()) throw DimensionError("QuadraticCost: A must be square");
        if (A_.rows() != b_.size()) throw DimensionError("QuadraticCost: A and b disagree on dimension");
        if (!A_.allFinite() || !b_.allFinite()) throw PreconditionError("QuadraticCost: non-finite entries");
        Matrix sym = 0.5 * (A_ + A_.transpose());
        A_ = std::move(sym);
        if (A_.size() > 0) {
            const double scale = std::max(1.0, A_.cwiseAbs().maxCoeff());
            const double lo = Eigen::SelfAdjointEigenSolver<Matrix>(A_, Eigen::EigenvaluesOnly).eigenvalues()(0);
            if (lo < -1e-12 * scale) {
                throw PreconditionError("QuadraticCost: A has negative eigenvalue " + std::to_string(lo));
            }
        }
    }

    /// Unit-curvature cost 1/2 ||x - center||^2 (up to a constant).
    static QuadraticCost centered(const Vector& center) {
        return {Matrix::Identity(center.size(), center.size()), center};
    }

    const Matrix& A() const { return A_; }
    const Vector& b() const { return b_; }
    Eigen::Index dimension() const { return b_.size(); }

    double value(const Vector& x) const {
        require_same_dim(x, dimension(), "QuadraticCost::value");
        return 0.5 * x.dot(A_ * x) - b_.dot(x);
    }

    bool operator==(const QuadraticCost& o) const {
        return A_.rows() == o.A_.rows() && bitwise_equal(A_.reshaped(), o.A_.reshaped()) &&
               bitwise_equal(b_, o.b_);
    }

private:
    Matrix A_;
    Vector b_;
};

class CostFamily {
public:
    CostFamily(std::vector<QuadraticCost> costs) : costs_(std::move(costs)) {
        if (costs_.empty()) throw PreconditionError("CostFamily: need at least one agent");
        dimension_ = costs_.front().dimension();
        if (dimension_ < 1) throw PreconditionError("CostFamily: dimension must be positive");
        for (const auto& c : costs_) {
            if (c.dimension() != dimension_) throw DimensionError("CostFamily: agents disagree on dimension");
        }
    }

    std::size_t size() const { return costs_.size(); }
    Eigen::Index dimension() const { return dimension_; }
    const QuadraticCost& operator[](AgentId i) const { return costs_.at(i); }
    const std::vector<QuadraticCost>& costs() const { return costs_; }

    bool operator==(const CostFamily&) const = default;

private:
    std::vector<QuadraticCost> costs_;
    Eigen::Index dimension_ = 0;
};

struct SmoothnessCertificate {
    double mu = 0.0;
    double gamma = 0.0;
    std::size_t subset_floor = 1;
};

enum class NoiseModel { GaussianTruncated, UniformSphere };

struct StochasticGradConfig {
    double sigma = 0.0;
    int batch_size = 1;
    NoiseModel noise_model = NoiseModel::GaussianTruncated;

    bool operator==(const StochasticGradConfig&) const = default;
};

inline Vector gradient(const QuadraticCost& cost, const Vector& x) {
    require_same_dim(x, cost.dimension(), "gradient");
    return cost.A() * x - cost.b();
}

namespace detail {

// One zero-mean draw with E||v||^2 <= sigma^2 and ||v|| <= 6 sigma.
inline Vector noise_draw(Eigen::Index d, double sigma, NoiseModel model, Rng& rng) {
    Vector v(d);
    if (model == NoiseModel::UniformSphere) {
        double norm = 0.0;
        do {
            for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.normal();
            norm = v.norm();
        } while (norm == 0.0);
        return v * (sigma / norm);
    }
    const double coord_sd = sigma / std::sqrt(static_cast<double>(d));
    const double radius = 6.0 * sigma;
    for (;;) {
        for (Eigen::Index i = 0; i < d; ++i) v[i] = coord_sd * rng.normal();
        if (v.norm() <= radius) return v;
    }
}

}  // namespace detail

/// Exact gradient plus zero-mean noise. A batch of k draws is averaged, so the
/// variance bound sigma^2 holds for every k (it tightens to sigma^2 / k).
inline Vector stochastic_gradient(const QuadraticCost& cost, const Vector& x,
                                  const StochasticGradConfig& cfg, Rng& rng) {
    if (cfg.sigma < 0.0) throw PreconditionError("stochastic_gradient: sigma must be nonnegative");
    if (cfg.batch_size < 1) throw PreconditionError("stochastic_gradient: batch size must be positive");
    Vector g = gradient(cost, x);
    if (cfg.sigma == 0.0) return g;
    Vector noise = Vector::Zero(g.size());
    for (int k = 0; k < cfg.batch_size; ++k) {
        noise += detail::noise_draw(g.size(), cfg.sigma, cfg.noise_model, rng);
    }
    if (cfg.batch_size > 1) noise /= static_cast<double>(cfg.batch_size);
    return g + noise;
}

inline double lambda_min(const Matrix& m) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

inline double lambda_max(const Matrix& m) {
    const auto ev = Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues();
    return ev(ev.size() - 1);
}

inline constexpr std::size_t kDefaultEnumerationCap = 20;

/// mu = max_i lambda_max(A_i); gamma = min over subsets S with
/// |S| >= subset_floor of lambda_min(mean of A_i over S). Exact enumeration.
inline SmoothnessCertificate certify_constants(const CostFamily& family, std::size_t subset_floor,
                                               std::size_t enumeration_cap = kDefaultEnumerationCap) {
    const std::size_t n = family.size();
    if (subset_floor < 1 || subset_floor > n) {
        throw PreconditionError("certify_constants: subset floor must lie in [1, n]");
    }
    if (n > enumeration_cap || n >= 63) {
        throw EnumerationCapError("certify_constants: n = " + std::to_string(n) +
                                  " exceeds the enumeration cap " + std::to_string(enumeration_cap));
    }
    SmoothnessCertificate cert;
    cert.subset_floor = subset_floor;
    for (const auto& c : family.costs()) cert.mu = std::max(cert.mu, lambda_max(c.A()));

    const Eigen::Index d = family.dimension();
    double gamma = std::numeric_limits<double>::infinity();
    Matrix sum(d, d);
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
        const auto size = static_cast<std::size_t>(std::popcount(mask));
        if (size < subset_floor) continue;
        sum.setZero();
        for (std::size_t i = 0; i < n; ++i) {
            if (mask >> i & 1U) sum += family[i].A();
        }
        gamma = std::min(gamma, lambda_min(sum / static_cast<double>(size)));
    }
    // Rounding in the subset mean can land an ulp above mu for identical
    // curvatures; anything larger is a real violation and is left visible.
    if (gamma > cert.mu && gamma - cert.mu <= 1e-12 * std::max(1.0, cert.mu)) gamma = cert.mu;
    cert.gamma = std::max(0.0, gamma);
    return cert;
}

}  // namespace rdgd
