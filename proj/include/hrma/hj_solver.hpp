#pragma once

#include "hrma/toric_cauchy.hpp"

#include <array>
#include <limits>
#include <vector>

namespace hrma {

/// F(sigma, xi) = sigma + udot0(xi). Throws DomainError when xi leaves the data grid.
double hamiltonian(const CauchyData& data, double sigma, const Vec& xi);

/// Characteristics of F with constant momenta: x(s) = x0 + s w, z(s) = z0 + s (p_sigma + <w, p_xi>),
/// where p_xi = grad psi0(x0), p_sigma = psidot0(x0) = -udot0(p_xi) and w = grad udot0(p_xi).
struct CharStrip {
    std::vector<Vec> seeds;
    std::vector<double> s_grid;
    std::vector<double> p_sigma;
    std::vector<Vec> p_xi;
    std::vector<Vec> velocity;
    std::vector<double> z0;
    /// 2-D seed meshes are row-major with this shape; {n, 1} in 1-D.
    std::array<int, 2> mesh_shape{0, 0};
    /// Velocity differences at or below this are round-off and never close a gap.
    double velocity_noise = 0.0;

    std::size_t size() const { return seeds.size(); }
    Vec position(std::size_t i, double s) const { return seeds[i] + s * velocity[i]; }
    double value(std::size_t i, double s) const { return z0[i] + s * (p_sigma[i] + velocity[i].dot(p_xi[i])); }
};

/// 1-D: any seed list. 2-D: a row-major seed mesh of shape `mesh_shape`.
CharStrip trace_characteristics(const CauchyData& data, const std::vector<Vec>& seeds,
                                const std::vector<double>& s_grid, std::array<int, 2> mesh_shape = {0, 0},
                                const ConvexTolerances& tol = {});

/// A mesh of seeds n x n (2-D) or n (1-D) over grad u0 of the data grid, `margin_fraction` inside.
std::vector<Vec> seed_mesh(const CauchyData& data, int n, double margin_fraction = 0.02);

struct CausticReport {
    double first_crossing_s = std::numeric_limits<double>::infinity();
    bool infinite = true;
    std::array<std::size_t, 2> crossing_pair{0, 0};
    Vec location;
    /// |first crossing of all seeds - first crossing of every other seed|.
    double resolution_bound = 0.0;
};

/// First time the seed -> position map folds: adjacent crossings in 1-D, first sign change
/// of the mesh Jacobian on either triangle of a cell in 2-D.
CausticReport caustic_time(const CharStrip& strip);

/// max over dual nodes y of <y, x> - u0(y) - s udot0(y).
double hopf_lax_value(const CauchyData& data, double s, const Vec& x);

struct HJOptions {
    ConvexTolerances tol;
    /// Stencil gradients must stay this far inside P; <= 0 means two dual cells.
    double delta_P = 0.0;
    /// Nodes this many cells from a flat node (Hessian margin < 10 tol_cvx) are excluded.
    int flat_halo = 2;
};

struct HJReport {
    double sup_residual = 0.0;
    double worst_s = 0.0;
    Vec worst_x;
    std::size_t evaluated = 0;
    std::size_t flat_nodes = 0;
    std::size_t excluded = 0;
};

/// sup |d_s eta + udot0(grad_x eta)| over interior (s, x) nodes by central differences.
HJReport hj_residual(const std::vector<double>& s_grid, const std::vector<GridFn>& eta, const CauchyData& data,
                     const HJOptions& opt = {});
HJReport hj_residual(const RaySolution& ray, const HJOptions& opt = {});

}  // namespace hrma
