#pragma once

#include "hrma/grid.hpp"

#include <array>
#include <vector>

namespace hrma {

struct ConvexTolerances {
    /// Relative convexity tolerance; a floating-point allowance of order eps/h^2 is added on top.
    double cvx_rel = 1e-9;
    double newton = 1e-10;
    int newton_max_iter = 100;
};

struct LegendreOptions {
    /// Polish each discrete maximiser with a local quadratic model of the objective.
    bool refine = false;
    /// Raise "dual domain too small" when the hull slopes escape the dual box.
    bool check_coverage = true;
};

/// g(y) = max over grid nodes x of <x, y> - f(x), evaluated on the nodes of `dual`.
///
/// Each axis is handled by a 1-D pass of the linear-time slope-merge algorithm:
/// the lower convex hull of the samples is built once, and its increasing edge
/// slopes are merged against the sorted dual nodes. Ties go to the smallest x index.
GridFn legendre_transform(const GridFn& f, const Axes& dual, const LegendreOptions& opt = {});

/// Same as legendre_transform and also returns, per dual node, the flat index of the maximising node.
GridFn legendre_transform(const GridFn& f, const Axes& dual, const LegendreOptions& opt,
                          std::vector<std::size_t>& argmax);

/// Closed convex envelope of the samples (f** with a continuous dual variable in 1-D,
/// a doubled dual grid in 2-D).
GridFn biconjugate(const GridFn& f);

/// Per-axis range of one-sided difference quotients, i.e. the slopes of the lower hull
/// in 1-D. Used to size dual boxes.
std::vector<std::array<double, 2>> slope_range(const GridFn& f);

/// Central-difference gradient of the cubic interpolant; `x` must be at least one cell inside.
Vec gradient(const GridFn& f, const Vec& x);
/// Central second differences (with a diagonal cross term in 2-D).
Mat hessian(const GridFn& f, const Vec& x);

/// Gradient and Hessian from node stencils, without interpolation. The node must be interior.
Vec node_gradient(const GridFn& f, std::size_t flat);
Mat node_hessian(const GridFn& f, std::size_t flat);

struct ConvexityReport {
    double min_margin = 0.0;
    std::array<int, 2> argmin_node{0, 0};
    bool is_convex = false;
    double tolerance = 0.0;
};

/// Smallest Hessian eigenvalue over all interior nodes.
ConvexityReport convexity_report(const GridFn& f, const ConvexTolerances& tol = {});

/// Convexity tolerance used by convexity_report for this grid.
double convexity_tolerance(const GridFn& f, const ConvexTolerances& tol = {});

/// Solves gradient(f, x) = y by damped Newton started from the best node of <x, y> - f(x).
Vec invert_gradient(const GridFn& f, const Vec& y, const ConvexTolerances& tol = {});

}  // namespace hrma
