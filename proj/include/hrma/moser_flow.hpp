#pragma once

#include "hrma/toric_cauchy.hpp"

#include <vector>

namespace hrma {

struct FlowOptions {
    ConvexTolerances tol;
    /// Jacobian determinants at or below this count as degenerate.
    double tol_det = 1e-6;
};

/// Samples of f_s with their Jacobian determinants.
struct FlowMap {
    double s = 0.0;
    std::vector<Vec> points;
    std::vector<Vec> images;
    std::vector<double> jac_det;
};

/// Straight leaf s -> base + s * direction of the Monge-Ampere foliation.
struct Leaf {
    Vec base;
    Vec direction;
    double s_max = 0.0;
    /// grad u0^{-1}(base): the conserved momentum of the leaf.
    Vec momentum;

    Vec position(double s) const { return base + s * direction; }
    bool trivial(double tol = 1e-12) const { return direction.norm() <= tol; }
};

/// grad u0 at lattice points of the data grid, kept `margin_fraction` of the box away from its edges.
/// 1-D: `count` points; 2-D: roughly sqrt(count) per axis.
std::vector<Vec> primal_samples(const CauchyData& data, int count, double margin_fraction = 0.05);

/// f_s(x) = grad u_s(y) with y = (grad u0)^{-1}(x); defined for every s >= 0.
Vec moser_map(const CauchyData& data, double s, const Vec& x, const FlowOptions& opt = {});

/// det of grad_x f_s by central differences of f_s, one dual cell wide in the image of grad u0.
double jacobian_det(const CauchyData& data, double s, const Vec& x, const FlowOptions& opt = {});

FlowMap flow_map(const CauchyData& data, double s, const std::vector<Vec>& points, const FlowOptions& opt = {});

/// True iff min over `points` of jacobian_det exceeds tol_det.
bool invertibility_check(const CauchyData& data, double s, const std::vector<Vec>& points,
                         const FlowOptions& opt = {});
bool invertibility_check(const CauchyData& data, double s, const FlowOptions& opt = {});

/// grad u0 o (grad u_s)^{-1}(target); throws "Moser map not invertible" when s >= lifespan.
Vec moser_inverse(const CauchyData& data, double s, const Vec& target, const FlowOptions& opt = {});

struct ConservationReport {
    /// sup |d_s psi_L(s, f_s(x)) - psidot0(x)| with d_s by differences in s.
    double sup_error = 0.0;
    /// Same with d_s psi_L replaced by -udot0(grad_x psi_L).
    double sup_error_dual = 0.0;
    /// sup over samples of the gap between the two routes.
    double route_gap = 0.0;
    double worst_s = 0.0;
    Vec worst_point;
    std::size_t samples_used = 0;
    /// (sample, s) pairs whose image lies within three x-cells of the edge of grad u_s(box).
    std::size_t samples_skipped = 0;
};

/// Checks psidot_s o f_s = psidot_0 on samples at every s of the ray.
ConservationReport conservation_check(const RaySolution& ray, const std::vector<Vec>& points,
                                      const FlowOptions& opt = {});
ConservationReport conservation_check(const RaySolution& ray, const FlowOptions& opt = {});

std::vector<Leaf> leaves(const CauchyData& data, const std::vector<Vec>& seeds, double s_max,
                         const FlowOptions& opt = {});

/// max over points of |f_{s1+s2}(x) - f_{s1}(f_{s2}(x))|.
double group_law_defect(const CauchyData& data, double s1, double s2, const std::vector<Vec>& points,
                        const FlowOptions& opt = {});

}  // namespace hrma
