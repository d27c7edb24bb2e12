#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "rdgd/errors.hpp"
#include "rdgd/linalg.hpp"

namespace rdgd {

/// Axis-aligned box W = prod_j [lower_j, upper_j]; the feasible set every
/// iterate is projected onto.
class FeasibleBox {
public:
    FeasibleBox(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
        if (lower_.size() != upper_.size()) throw DimensionError("FeasibleBox: bound dimensions differ");
        if (lower_.size() < 1) throw PreconditionError("FeasibleBox: empty dimension");
        for (Eigen::Index j = 0; j < lower_.size(); ++j) {
            if (!(lower_[j] <= upper_[j]) || !std::isfinite(lower_[j]) || !std::isfinite(upper_[j])) {
                throw PreconditionError("FeasibleBox: need finite lower <= upper in every coordinate");
            }
        }
    }

    static FeasibleBox cube(Eigen::Index d, double half_width) {
        return {Vector::Constant(d, -half_width), Vector::Constant(d, half_width)};
    }

    const Vector& lower() const { return lower_; }
    const Vector& upper() const { return upper_; }
    Eigen::Index dimension() const { return lower_.size(); }

    Vector center() const { return 0.5 * (lower_ + upper_); }

    bool contains(const Vector& x) const {
        require_same_dim(x, dimension(), "FeasibleBox::contains");
        return (x.array() >= lower_.array()).all() && (x.array() <= upper_.array()).all();
    }

    /// Euclidean projection: a coordinatewise clamp.
    Vector project(const Vector& x) const {
        require_same_dim(x, dimension(), "FeasibleBox::project");
        return x.cwiseMax(lower_).cwiseMin(upper_);
    }

    /// max_{x in W} ||x - target||, attained at a corner.
    double max_distance_from(const Vector& target) const {
        require_same_dim(target, dimension(), "FeasibleBox::max_distance_from");
        double sq = 0.0;
        for (Eigen::Index j = 0; j < dimension(); ++j) {
            const double a = std::abs(lower_[j] - target[j]);
            const double b = std::abs(upper_[j] - target[j]);
            const double m = std::max(a, b);
            sq += m * m;
        }
        return std::sqrt(sq);
    }

    bool operator==(const FeasibleBox& o) const {
        return bitwise_equal(lower_, o.lower_) && bitwise_equal(upper_, o.upper_);
    }

private:
    Vector lower_;
    Vector upper_;
};

inline Vector project(const FeasibleBox& box, const Vector& x) { return box.project(x); }

}  // namespace rdgd
