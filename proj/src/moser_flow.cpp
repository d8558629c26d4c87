#include "hrma/moser_flow.hpp"

#include "hrma/errors.hpp"
#include "detail.hpp"

#include <algorithm>
#include <cmath>

namespace hrma {

namespace {

std::vector<double> lattice(const Axis& ax, int count, double margin_fraction) {
    const double m = std::max(margin_fraction * (ax.hi - ax.lo), 2.0 * ax.step());
    const double lo = ax.lo + m, hi = ax.hi - m;
    if (!(hi > lo) || count < 1) throw DomainError("primal_samples: margin leaves no room for samples");
    std::vector<double> out(count);
    for (int i = 0; i < count; ++i) out[i] = count == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (count - 1);
    return out;
}

}  // namespace

std::vector<Vec> primal_samples(const CauchyData& data, int count, double margin_fraction) {
    const GridFn& u0 = data.u0;
    std::vector<Vec> out;
    if (u0.dim() == 1) {
        for (double y : lattice(u0.axis(0), count, margin_fraction)) out.push_back(gradient(u0, Vec::Constant(1, y)));
        return out;
    }
    const int per_axis = std::max(2, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count)))));
    const auto a = lattice(u0.axis(0), per_axis, margin_fraction);
    const auto b = lattice(u0.axis(1), per_axis, margin_fraction);
    Vec y(2);
    for (double y0 : a) {
        for (double y1 : b) {
            y << y0, y1;
            out.push_back(gradient(u0, y));
        }
    }
    return out;
}

Vec moser_map(const CauchyData& data, double s, const Vec& x, const FlowOptions& opt) {
    if (x.size() != data.dim()) throw DomainError("moser_map: dimension mismatch");
    const Vec y = invert_gradient(data.u0, x, opt.tol);
    return x + s * gradient(data.udot0, y);
}

double jacobian_det(const CauchyData& data, double s, const Vec& x, const FlowOptions& opt) {
    const int d = data.dim();
    const Vec y = invert_gradient(data.u0, x, opt.tol);
    const Mat H = hessian(data.u0, y);
    Mat J(d, d);
    for (int k = 0; k < d; ++k) {
        const double delta = data.u0.step(k) * std::max(H(k, k), 1e-8);
        Vec xp = x, xm = x;
        xp[k] += delta;
        xm[k] -= delta;
        J.col(k) = (moser_map(data, s, xp, opt) - moser_map(data, s, xm, opt)) / (2 * delta);
    }
    return J.determinant();
}

FlowMap flow_map(const CauchyData& data, double s, const std::vector<Vec>& points, const FlowOptions& opt) {
    FlowMap fm;
    fm.s = s;
    fm.points = points;
    for (const Vec& x : points) {
        fm.images.push_back(moser_map(data, s, x, opt));
        fm.jac_det.push_back(jacobian_det(data, s, x, opt));
    }
    return fm;
}

bool invertibility_check(const CauchyData& data, double s, const std::vector<Vec>& points, const FlowOptions& opt) {
    double m = std::numeric_limits<double>::infinity();
    for (const Vec& x : points) m = std::min(m, jacobian_det(data, s, x, opt));
    return m > opt.tol_det;
}

bool invertibility_check(const CauchyData& data, double s, const FlowOptions& opt) {
    return invertibility_check(data, s, primal_samples(data, 201, 0.02), opt);
}

Vec moser_inverse(const CauchyData& data, double s, const Vec& target, const FlowOptions& opt) {
    if (s >= convex_lifespan(data, opt.tol)) throw DomainError("Moser map not invertible");
    const Vec y = invert_gradient(data.potential_at(s), target, opt.tol);
    return gradient(data.u0, y);
}

ConservationReport conservation_check(const RaySolution& ray, const std::vector<Vec>& points,
                                      const FlowOptions& opt) {
    const auto& s = ray.s_grid;
    if (s.size() < 3) throw DomainError("conservation_check: need at least 3 slices");
    if (!(s.back() < ray.lifespan)) throw DomainError("conservation_check: s_max must be below the lifespan");
    const CauchyData& data = ray.data;
    const std::size_t n = s.size();
    ConservationReport rep;
    for (const Vec& x0 : points) {
        const Vec y0 = invert_gradient(data.u0, x0, opt.tol);
        const Vec w = gradient(data.udot0, y0);
        const double target = -data.udot0.value(y0);
        const Mat h0 = hessian(data.u0, y0), h1 = hessian(data.udot0, y0);
        double box_dist = std::numeric_limits<double>::infinity();
        for (int a = 0; a < data.dim(); ++a) {
            box_dist = std::min({box_dist, y0[a] - data.u0.axis(a).lo, data.u0.axis(a).hi - y0[a]});
        }
        for (std::size_t k = 0; k < n; ++k) {
            // f_s(x0) must sit three x-cells inside grad u_s(box); past that edge the slice is affine.
            const double lam = detail::min_eigenvalue(h0 + s[k] * h1);
            if (box_dist * lam < 3.0 * ray.slices[k].min_step()) {
                ++rep.samples_skipped;
                continue;
            }
            ++rep.samples_used;
            const Vec p = x0 + s[k] * w;
            // Second-order three-point stencil in s, one-sided at the ends.
            const std::size_t first = detail::stencil_start(k, n);
            const std::array<double, 3> t{s[first], s[first + 1], s[first + 2]};
            const auto wts = detail::derivative_weights(t, static_cast<int>(k - first));
            double ds_psi = 0.0;
            for (int a = 0; a < 3; ++a) {
                const GridFn& slice = ray.slices[first + a];
                if (!slice.contains(p, 1.0)) throw DomainError("conservation_check: flow leaves the slice box");
                ds_psi += wts[a] * slice.value(p);
            }
            const Vec xi = gradient(ray.slices[k], p);
            if (!data.udot0.contains(xi)) throw DomainError("conservation_check: slice gradient escapes the dual grid");
            const double dual_route = -data.udot0.value(xi);
            const double e = std::abs(ds_psi - target);
            if (e > rep.sup_error) {
                rep.sup_error = e;
                rep.worst_s = s[k];
                rep.worst_point = x0;
            }
            rep.sup_error_dual = std::max(rep.sup_error_dual, std::abs(dual_route - target));
            rep.route_gap = std::max(rep.route_gap, std::abs(ds_psi - dual_route));
        }
    }
    return rep;
}

ConservationReport conservation_check(const RaySolution& ray, const FlowOptions& opt) {
    return conservation_check(ray, primal_samples(ray.data, 101), opt);
}

std::vector<Leaf> leaves(const CauchyData& data, const std::vector<Vec>& seeds, double s_max, const FlowOptions& opt) {
    std::vector<Leaf> out;
    out.reserve(seeds.size());
    for (const Vec& x0 : seeds) {
        const Vec y0 = invert_gradient(data.u0, x0, opt.tol);
        out.push_back({x0, gradient(data.udot0, y0), s_max, y0});
    }
    return out;
}

double group_law_defect(const CauchyData& data, double s1, double s2, const std::vector<Vec>& points,
                        const FlowOptions& opt) {
    double m = 0.0;
    for (const Vec& x : points) {
        const Vec direct = moser_map(data, s1 + s2, x, opt);
        const Vec composed = moser_map(data, s1, moser_map(data, s2, x, opt), opt);
        m = std::max(m, (direct - composed).norm());
    }
    return m;
}

}  // namespace hrma
