#pragma once

#include "hrma/errors.hpp"
#include "hrma/moser_flow.hpp"
#include "hrma/toric_cauchy.hpp"

#include <vector>

namespace hrma {

/// eta(s, x) on a uniform (s, x) grid of total dimension 2 or 3. Values are row-major
/// with s varying slowest.
struct SpacetimeFn {
    /// axes[0] is the s axis, then the x axes.
    Axes axes;
    std::vector<double> values;
    /// Set by check_joint_convexity.
    bool convex = false;

    int dim() const { return static_cast<int>(axes.size()); }
    std::size_t size() const { return values.size(); }
    std::size_t stride(int k) const;
    std::size_t flat_index(const std::vector<int>& idx) const;
    std::vector<int> multi_index(std::size_t flat) const;
    std::size_t cell_count() const;
    double cell_volume() const;
    double domain_volume() const;

    static SpacetimeFn sample(Axes axes, const std::function<double(const Vec&)>& f);
};

/// Stacks the slices of a ray with a uniform s grid.
SpacetimeFn spacetime_from_ray(const RaySolution& ray);

/// Raised when joint convexity fails; names the node and lattice direction that witness it.
class ConvexityError : public DomainError {
  public:
    ConvexityError(const std::string& what, std::vector<int> node, std::vector<int> direction, double second_difference)
        : DomainError(what), node_(std::move(node)), direction_(std::move(direction)), value_(second_difference) {}
    const std::vector<int>& node() const noexcept { return node_; }
    const std::vector<int>& direction() const noexcept { return direction_; }
    double second_difference() const noexcept { return value_; }

  private:
    std::vector<int> node_;
    std::vector<int> direction_;
    double value_;
};

/// Second differences along every lattice direction e_i and e_i +- e_j must be >= -tolerance.
/// Sets eta.convex on success, throws ConvexityError otherwise.
void check_joint_convexity(SpacetimeFn& eta, const ConvexTolerances& tol = {});

struct MAMassReport {
    std::vector<double> cell_mass;
    double total_mass = 0.0;
    double max_cell = 0.0;
    int level = 0;
};

/// Per cell, the volume of the convex hull of the (s, x)-gradients at its corners.
/// Gradients are second-order differences, one-sided on the boundary.
MAMassReport alexandrov_mass(SpacetimeFn eta, const ConvexTolerances& tol = {});

/// Lebesgue measure of the convex hull of points in dimension 1, 2 or 3.
double hull_volume(const std::vector<Vec>& points);

struct MassLevel {
    double h = 0.0;
    double ds = 0.0;
    double total_mass = 0.0;
    double max_cell = 0.0;
};

struct WeakSolutionReport {
    std::vector<MassLevel> levels;
    /// Smallest log2 ratio of consecutive masses.
    double order_estimate = 0.0;
    bool decreasing = false;
};

/// Recomputes the ray with x and s steps divided by 1, 2, 4, ... and tracks the Alexandrov mass.
WeakSolutionReport weak_solution_check(const RaySolution& ray, int levels = 3, const RayOptions& opt = {},
                                       const ConvexTolerances& tol = {});

/// Every `factor`-th node along each axis, endpoints kept.
SpacetimeFn coarsen(const SpacetimeFn& eta, int factor);
/// Largest L such that coarsen(eta, 2^(L-1)) keeps at least three nodes per axis.
int max_coarsening_levels(const SpacetimeFn& eta);
/// The refinement study on fixed data: masses of eta coarsened by 2^(levels-1), ..., 2, 1, coarsest first.
WeakSolutionReport mass_refinement(const SpacetimeFn& eta, int levels, const ConvexTolerances& tol = {});

struct GraphReport {
    double sup_deviation = 0.0;
    double worst_s = 0.0;
    Vec worst_x;
    std::size_t samples_used = 0;
    std::size_t samples_skipped = 0;
};

/// sup |d_s psi_L + udot0(grad_x psi_L)| at the flowed samples f_s(x0), with both derivatives taken
/// from the interpolated slices. Samples within three x-cells of the affine zone are skipped.
GraphReport gradient_graph_check(const RaySolution& ray, const std::vector<Vec>& points,
                                 const FlowOptions& opt = {});
GraphReport gradient_graph_check(const RaySolution& ray, const FlowOptions& opt = {});

}  // namespace hrma
