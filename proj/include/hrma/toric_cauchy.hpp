#pragma once

#include "hrma/convex_core.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hrma {

using ScalarFn = std::function<double(const Vec&)>;
using VectorFn = std::function<Vec(const Vec&)>;

/// Toric Cauchy data in the symplectic (dual) picture: u0 and its velocity udot0,
/// sampled on a common grid whose box lies inside the polytope.
struct CauchyData {
    std::string label = "custom";
    Polytope polytope;
    GridFn u0;
    GridFn udot0;
    /// Optional primal pair on an x-box.
    std::optional<GridFn> psi0;
    std::optional<GridFn> psidot0;

    int dim() const { return u0.dim(); }
    /// u0 + s * udot0.
    GridFn potential_at(double s) const { return axpy(u0, s, udot0); }
};

/// Checks the CauchyData invariants; throws DomainError.
void validate(const CauchyData& data, const ConvexTolerances& tol = {});

/// Samples u0 and udot0 on `grid` and validates.
CauchyData make_cauchy(const ScalarFn& u0, const ScalarFn& udot0, const Polytope& P, const Axes& grid,
                       std::string label = "custom");

/// Closed-form description of a shipped data set. `u0_grad_inverse` maps a primal
/// point x to the y solving grad u0(y) = x (before clamping to the grid box).
struct PresetSpec {
    std::string id;
    Polytope polytope;
    Axes grid;
    ScalarFn u0;
    ScalarFn udot0;
    VectorFn udot0_grad;
    VectorFn u0_grad_inverse;
    double lifespan = std::numeric_limits<double>::infinity();
    /// Exact primal quantities of the sampled box data: the maximiser y*(x) of <x,y> - u0(y)
    /// over the grid box, psi0(x) = <x,y*> - u0(y*), psidot0(x) = -udot0(y*).
    Vec dual_point(const Vec& x) const;
    double psi0(const Vec& x) const;
    double psidot0(const Vec& x) const;
};

const std::vector<std::string>& preset_ids();
/// Throws DomainError for an unknown id.
const PresetSpec& preset_spec(const std::string& id);
/// Samples a preset; `shape` <= 0 keeps the default resolution.
CauchyData make_preset(const std::string& id, int shape = 0);

/// u0 = psi0* on a grid spanning the discrete gradient range of psi0, udot0 = -psidot0 o grad u0.
CauchyData to_symplectic(const GridFn& psi0, const GridFn& psidot0, const Polytope& P, int dual_shape = 0,
                         const ConvexTolerances& tol = {});

struct LifespanReport {
    /// +inf when udot0 is convex everywhere.
    double lifespan = std::numeric_limits<double>::infinity();
    bool infinite = true;
    /// Node realising the infimum (meaningful when finite).
    Vec argmin;
};

/// inf over interior nodes of sup{s >= 0 : Hess u0 + s Hess udot0 >= 0}.
LifespanReport lifespan_report(const CauchyData& data, const ConvexTolerances& tol = {});
double convex_lifespan(const CauchyData& data, const ConvexTolerances& tol = {});

struct AdmissibilityOptions {
    /// Coverage margin in dual units; <= 0 means two cells of `dual_step`.
    double delta_P = 0.0;
    /// Dual grid spacing used for the default margin.
    double dual_step = 0.0;
    /// Optional dual box the coverage target is clipped to (the data grid box).
    std::optional<Axes> dual_box;
    /// A slope jump counts as a coverage gap when it exceeds this multiple of its neighbours.
    double kink_ratio = 3.0;
    ConvexTolerances tol;
};

struct Span {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
};

struct AdmissibilityReport {
    bool admissible = false;
    bool strictly_convex = false;
    bool covers_polytope = false;
    /// Smallest Hessian eigenvalue over active nodes (gradients inside P shrunk by delta_P).
    double min_margin = std::numeric_limits<double>::infinity();
    double flat_tolerance = 0.0;
    std::size_t active_nodes = 0;
    double delta_P = 0.0;
    /// Radius of the largest uncovered ball in P, and the dual interval / axis where it sits.
    double largest_gap_radius = 0.0;
    Span largest_gap;
    int gap_axis = -1;
    /// Largest run of zero slope jumps anywhere in the x-box.
    Span largest_flat;
    int flat_axis = -1;
};

/// Strict convexity on the active region plus coverage of P by the discrete gradient range.
AdmissibilityReport admissibility_check(const GridFn& slice, const Polytope& P, const AdmissibilityOptions& opt = {});

struct RayOptions {
    /// Quadratic polish of each discrete maximiser; keeps slices smooth at O(h^3).
    bool refine = true;
    AdmissibilityOptions admissibility;
};

struct RaySolution {
    CauchyData data;
    std::vector<double> s_grid;
    std::vector<GridFn> slices;
    double lifespan = std::numeric_limits<double>::infinity();
    std::vector<bool> admissible;
    std::vector<AdmissibilityReport> reports;
};

/// An x-box covering the hull slopes of u_s for every s in `s_grid`, padded by 10%.
Axes default_x_box(const CauchyData& data, const std::vector<double>& s_grid, int shape);

/// One slice of legendre_ray with its admissibility report; `x_axes` need only cover this slice.
std::pair<GridFn, AdmissibilityReport> ray_slice(const CauchyData& data, double s, const Axes& x_axes,
                                                 const RayOptions& opt = {});

/// psi_L(s, .) = (u0 + s udot0)* on `x_axes` for each s; past the lifespan the convex
/// envelope of u_s is conjugated instead.
RaySolution legendre_ray(const CauchyData& data, const std::vector<double>& s_grid, const Axes& x_axes,
                         const RayOptions& opt = {});

/// phi_L(s, x) = psi_L(s, x) - psi0(x) on psi0's grid (the s = 0 slice when no primal data is stored).
std::vector<GridFn> hcma_lift(const RaySolution& ray);

/// s_0 = 0, ..., uniformly spaced with `count` points up to `s_max`.
std::vector<double> uniform_s_grid(double s_max, int count);

}  // namespace hrma
