#include "hrma/ma_measure.hpp"

#include "detail.hpp"
#include "hrma/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace hrma {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

// Area of the convex hull of planar points (monotone chain).
double hull_area_2d(std::vector<std::array<double, 2>> p) {
    if (p.size() < 3) return 0.0;
    std::sort(p.begin(), p.end());
    std::vector<std::array<double, 2>> h(2 * p.size());
    std::size_t k = 0;
    auto turn = [&](const auto& o, const auto& a, const auto& b) {
        return cross2(a[0] - o[0], a[1] - o[1], b[0] - o[0], b[1] - o[1]);
    };
    for (std::size_t i = 0; i < p.size(); ++i) {
        while (k >= 2 && turn(h[k - 2], h[k - 1], p[i]) <= 0) --k;
        h[k++] = p[i];
    }
    for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && turn(h[k - 2], h[k - 1], p[i]) <= 0) --k;
        h[k++] = p[i];
    }
    // Shoelace relative to the first vertex keeps the sum free of cancellation.
    double area = 0.0;
    for (std::size_t i = 1; i + 1 < k; ++i) {
        area += cross2(h[i][0] - h[0][0], h[i][1] - h[0][1], h[i + 1][0] - h[0][0], h[i + 1][1] - h[0][1]);
    }
    return 0.5 * std::abs(area);
}

// Volume of the convex hull of a few points in R^3: every supporting plane through three points
// contributes (area of its coplanar hull) * (distance from the centroid) / 3.
double hull_volume_3d(const std::vector<Vec>& p) {
    const std::size_t n = p.size();
    if (n < 4) return 0.0;
    if (n > 63) throw DomainError("hull_volume: at most 63 points in 3-D");
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    double diam = 0.0;
    for (const Vec& q : p) c += q.head<3>();
    c /= static_cast<double>(n);
    for (const Vec& q : p) diam = std::max(diam, (q.head<3>() - c).norm());
    if (diam == 0.0) return 0.0;
    const double tol = 64 * kEps * diam;
    std::set<unsigned long long> seen;
    double vol = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            for (std::size_t k = j + 1; k < n; ++k) {
                const Eigen::Vector3d a = p[i].head<3>(), b = p[j].head<3>(), d = p[k].head<3>();
                Eigen::Vector3d nrm = (b - a).cross(d - a);
                const double len = nrm.norm();
                if (len <= tol * diam) continue;
                nrm /= len;
                unsigned long long mask = 0;
                bool above = false, below = false;
                for (std::size_t m = 0; m < n; ++m) {
                    const double dist = nrm.dot(p[m].head<3>() - a);
                    if (dist > tol) above = true;
                    else if (dist < -tol) below = true;
                    else mask |= 1ULL << m;
                }
                if (above && below) continue;
                if (!seen.insert(mask).second) continue;
                // Coplanar points in an orthonormal basis of the plane.
                const Eigen::Vector3d e1 = (b - a).normalized(), e2 = nrm.cross(e1);
                std::vector<std::array<double, 2>> flat;
                for (std::size_t m = 0; m < n; ++m) {
                    if (mask >> m & 1ULL) {
                        const Eigen::Vector3d q = p[m].head<3>() - a;
                        flat.push_back({q.dot(e1), q.dot(e2)});
                    }
                }
                vol += hull_area_2d(flat) * std::abs(nrm.dot(c - a)) / 3.0;
            }
        }
    }
    return vol;
}

// Second-order gradient at every node; one-sided three-point stencils on the boundary.
std::vector<Vec> node_gradients(const SpacetimeFn& eta) {
    const int D = eta.dim();
    std::vector<Vec> g(eta.size(), Vec::Zero(D));
    for (std::size_t f = 0; f < eta.size(); ++f) {
        const auto idx = eta.multi_index(f);
        for (int k = 0; k < D; ++k) {
            const int n = eta.axes[k].n, i = idx[k];
            const double h = eta.axes[k].step();
            const std::size_t st = eta.stride(k);
            const double* v = eta.values.data();
            if (i == 0) {
                g[f][k] = (-3 * v[f] + 4 * v[f + st] - v[f + 2 * st]) / (2 * h);
            } else if (i == n - 1) {
                g[f][k] = (3 * v[f] - 4 * v[f - st] + v[f - 2 * st]) / (2 * h);
            } else {
                g[f][k] = (v[f + st] - v[f - st]) / (2 * h);
            }
        }
    }
    return g;
}

double value_scale(const SpacetimeFn& eta) {
    double m = 0.0;
    for (double v : eta.values) m = std::max(m, std::abs(v));
    return std::max(m, 1.0);
}

Axis refined(const Axis& a, int factor) { return {a.lo, a.hi, (a.n - 1) * factor + 1}; }

}  // namespace

std::size_t SpacetimeFn::stride(int k) const {
    std::size_t s = 1;
    for (int j = dim() - 1; j > k; --j) s *= axes[j].n;
    return s;
}

std::size_t SpacetimeFn::flat_index(const std::vector<int>& idx) const {
    std::size_t f = 0;
    for (int k = 0; k < dim(); ++k) f = f * axes[k].n + idx[k];
    return f;
}

std::vector<int> SpacetimeFn::multi_index(std::size_t flat) const {
    std::vector<int> idx(dim());
    for (int k = dim() - 1; k >= 0; --k) {
        idx[k] = static_cast<int>(flat % axes[k].n);
        flat /= axes[k].n;
    }
    return idx;
}

std::size_t SpacetimeFn::cell_count() const {
    std::size_t c = 1;
    for (const Axis& a : axes) c *= a.n - 1;
    return c;
}

double SpacetimeFn::cell_volume() const {
    double v = 1.0;
    for (const Axis& a : axes) v *= a.step();
    return v;
}

double SpacetimeFn::domain_volume() const {
    double v = 1.0;
    for (const Axis& a : axes) v *= a.hi - a.lo;
    return v;
}

SpacetimeFn SpacetimeFn::sample(Axes axes, const std::function<double(const Vec&)>& f) {
    SpacetimeFn eta;
    eta.axes = std::move(axes);
    if (eta.dim() < 2 || eta.dim() > 3) throw DomainError("SpacetimeFn: total dimension must be 2 or 3");
    std::size_t total = 1;
    for (const Axis& a : eta.axes) {
        if (a.n < 3 || !(a.hi > a.lo)) throw DomainError("SpacetimeFn: each axis needs at least 3 nodes");
        total *= a.n;
    }
    eta.values.resize(total);
    Vec z(eta.dim());
    for (std::size_t flat = 0; flat < total; ++flat) {
        const auto idx = eta.multi_index(flat);
        for (int k = 0; k < eta.dim(); ++k) z[k] = eta.axes[k].node(idx[k]);
        eta.values[flat] = f(z);
    }
    return eta;
}

SpacetimeFn spacetime_from_ray(const RaySolution& ray) {
    const auto& s = ray.s_grid;
    if (s.size() < 3) throw DomainError("spacetime_from_ray: need at least 3 slices");
    const Axis s_axis{s.front(), s.back(), static_cast<int>(s.size())};
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (std::abs(s[k] - s_axis.node(static_cast<int>(k))) > 1e-9 * (s.back() - s.front())) {
            throw DomainError("spacetime_from_ray: s grid must be uniform");
        }
        if (!ray.slices[k].same_geometry(ray.slices.front())) throw DomainError("spacetime_from_ray: slices must share one grid");
    }
    SpacetimeFn eta;
    eta.axes.push_back(s_axis);
    for (const Axis& a : ray.slices.front().axes()) eta.axes.push_back(a);
    for (const Axis& a : eta.axes) {
        if (a.n < 3) throw DomainError("spacetime_from_ray: each axis needs at least 3 nodes");
    }
    eta.values.reserve(s.size() * ray.slices.front().size());
    for (const GridFn& slice : ray.slices) eta.values.insert(eta.values.end(), slice.values().begin(), slice.values().end());
    return eta;
}

void check_joint_convexity(SpacetimeFn& eta, const ConvexTolerances& tol) {
    const int D = eta.dim();
    // Lattice directions e_i and e_i + e_j, e_i - e_j.
    std::vector<std::vector<int>> dirs;
    for (int i = 0; i < D; ++i) {
        std::vector<int> e(D, 0);
        e[i] = 1;
        dirs.push_back(e);
        for (int j = i + 1; j < D; ++j) {
            std::vector<int> a = e, b = e;
            a[j] = 1;
            b[j] = -1;
            dirs.push_back(a);
            dirs.push_back(b);
        }
    }
    double h_min = INFINITY;
    for (const Axis& a : eta.axes) h_min = std::min(h_min, a.step());
    const double scale = value_scale(eta);
    const double allowance = tol.cvx_rel * scale + 64 * kEps * scale / (h_min * h_min);
    for (const auto& dir : dirs) {
        double len2 = 0.0;
        std::ptrdiff_t offset = 0;
        for (int k = 0; k < D; ++k) {
            len2 += dir[k] * dir[k] * eta.axes[k].step() * eta.axes[k].step();
            offset += dir[k] * static_cast<std::ptrdiff_t>(eta.stride(k));
        }
        for (std::size_t f = 0; f < eta.size(); ++f) {
            const auto idx = eta.multi_index(f);
            bool inside = true;
            for (int k = 0; k < D && inside; ++k) {
                inside = idx[k] - std::abs(dir[k]) >= 0 && idx[k] + std::abs(dir[k]) <= eta.axes[k].n - 1;
            }
            if (!inside) continue;
            const double d2 = (eta.values[f + offset] - 2 * eta.values[f] + eta.values[f - offset]) / len2;
            if (d2 < -allowance) {
                std::ostringstream msg;
                msg << "joint convexity fails at node (";
                for (int k = 0; k < D; ++k) msg << (k ? ", " : "") << idx[k];
                msg << ") along (";
                for (int k = 0; k < D; ++k) msg << (k ? ", " : "") << dir[k];
                msg << "): second difference " << d2;
                eta.convex = false;
                throw ConvexityError(msg.str(), idx, dir, d2);
            }
        }
    }
    eta.convex = true;
}

double hull_volume(const std::vector<Vec>& points) {
    if (points.empty()) return 0.0;
    const int d = static_cast<int>(points.front().size());
    if (d == 1) {
        double lo = INFINITY, hi = -INFINITY;
        for (const Vec& p : points) lo = std::min(lo, p[0]), hi = std::max(hi, p[0]);
        return hi - lo;
    }
    if (d == 2) {
        std::vector<std::array<double, 2>> flat;
        for (const Vec& p : points) flat.push_back({p[0], p[1]});
        return hull_area_2d(flat);
    }
    if (d == 3) return hull_volume_3d(points);
    throw DomainError("hull_volume: dimension must be 1, 2 or 3");
}

MAMassReport alexandrov_mass(SpacetimeFn eta, const ConvexTolerances& tol) {
    if (!eta.convex) check_joint_convexity(eta, tol);
    const int D = eta.dim();
    const auto grads = node_gradients(eta);
    double h_min = INFINITY;
    for (const Axis& a : eta.axes) h_min = std::min(h_min, a.step());
    const double noise = 64 * kEps * value_scale(eta) / h_min;
    MAMassReport rep;
    rep.cell_mass.reserve(eta.cell_count());
    std::vector<int> lower(D, 0);
    std::vector<Vec> corners(std::size_t{1} << D);
    for (std::size_t c = 0; c < eta.cell_count(); ++c) {
        // Cell multi-index, last axis fastest.
        std::size_t rest = c;
        for (int k = D - 1; k >= 0; --k) {
            lower[k] = static_cast<int>(rest % (eta.axes[k].n - 1));
            rest /= eta.axes[k].n - 1;
        }
        const std::size_t base = eta.flat_index(lower);
        for (std::size_t m = 0; m < corners.size(); ++m) {
            std::size_t f = base;
            for (int k = 0; k < D; ++k) {
                if (m >> k & 1U) f += eta.stride(k);
            }
            corners[m] = grads[f];
        }
        double mass = hull_volume(corners);
        // Hulls thinner than the round-off of the gradients are degenerate.
        double diam = 0.0;
        for (const Vec& g : corners) diam = std::max(diam, (g - corners.front()).norm());
        if (mass <= noise * std::pow(diam, D - 1)) mass = 0.0;
        rep.cell_mass.push_back(mass);
        rep.total_mass += mass;
        rep.max_cell = std::max(rep.max_cell, mass);
    }
    return rep;
}

namespace {

void summarize_levels(WeakSolutionReport& rep) {
    rep.decreasing = true;
    rep.order_estimate = INFINITY;
    for (std::size_t k = 1; k < rep.levels.size(); ++k) {
        const double prev = rep.levels[k - 1].total_mass, cur = rep.levels[k].total_mass;
        rep.decreasing = rep.decreasing && cur < prev;
        rep.order_estimate = std::min(rep.order_estimate, cur > 0 ? std::log2(prev / cur) : INFINITY);
    }
}

}  // namespace

WeakSolutionReport weak_solution_check(const RaySolution& ray, int levels, const RayOptions& opt,
                                       const ConvexTolerances& tol) {
    if (levels < 2) throw DomainError("weak_solution_check: need at least 2 refinement levels");
    if (ray.slices.empty()) throw DomainError("weak_solution_check: empty ray");
    const Axes base_x = ray.slices.front().axes();
    const int base_s = static_cast<int>(ray.s_grid.size());
    WeakSolutionReport rep;
    for (int level = 0; level < levels; ++level) {
        const int factor = 1 << level;
        Axes x_axes;
        for (const Axis& a : base_x) x_axes.push_back(refined(a, factor));
        const auto s = uniform_s_grid(ray.s_grid.back(), (base_s - 1) * factor + 1);
        const RaySolution fine = level == 0 ? ray : legendre_ray(ray.data, s, x_axes, opt);
        SpacetimeFn eta = spacetime_from_ray(fine);
        check_joint_convexity(eta, tol);
        const auto mass = alexandrov_mass(std::move(eta), tol);
        double h = 0.0;
        for (const Axis& a : x_axes) h = std::max(h, a.step());
        rep.levels.push_back({h, s[1] - s[0], mass.total_mass, mass.max_cell});
    }
    summarize_levels(rep);
    return rep;
}

SpacetimeFn coarsen(const SpacetimeFn& eta, int factor) {
    if (factor < 1) throw DomainError("coarsen: factor must be positive");
    SpacetimeFn out;
    for (const Axis& a : eta.axes) {
        if ((a.n - 1) % factor != 0) throw DomainError("coarsen: factor must divide every axis");
        out.axes.push_back({a.lo, a.hi, (a.n - 1) / factor + 1});
    }
    std::vector<int> idx(out.axes.size());
    out.values.resize(out.axes.size() == 2 ? static_cast<std::size_t>(out.axes[0].n) * out.axes[1].n
                                           : static_cast<std::size_t>(out.axes[0].n) * out.axes[1].n * out.axes[2].n);
    for (std::size_t flat = 0; flat < out.values.size(); ++flat) {
        idx = out.multi_index(flat);
        for (int& i : idx) i *= factor;
        out.values[flat] = eta.values[eta.flat_index(idx)];
    }
    return out;
}

int max_coarsening_levels(const SpacetimeFn& eta) {
    int levels = 1;
    while (true) {
        const int factor = 1 << levels;
        for (const Axis& a : eta.axes) {
            if ((a.n - 1) % factor != 0 || (a.n - 1) / factor < 2) return levels;
        }
        ++levels;
    }
}

WeakSolutionReport mass_refinement(const SpacetimeFn& eta, int levels, const ConvexTolerances& tol) {
    if (levels < 2) throw DomainError("mass_refinement: need at least 2 levels");
    if (levels > max_coarsening_levels(eta)) throw DomainError("mass_refinement: grid does not coarsen that many times");
    WeakSolutionReport rep;
    for (int level = levels - 1; level >= 0; --level) {
        SpacetimeFn level_fn = coarsen(eta, 1 << level);
        check_joint_convexity(level_fn, tol);
        double h = 0.0;
        for (std::size_t k = 1; k < level_fn.axes.size(); ++k) h = std::max(h, level_fn.axes[k].step());
        const double ds = level_fn.axes[0].step();
        const auto mass = alexandrov_mass(std::move(level_fn), tol);
        rep.levels.push_back({h, ds, mass.total_mass, mass.max_cell});
    }
    summarize_levels(rep);
    return rep;
}

GraphReport gradient_graph_check(const RaySolution& ray, const std::vector<Vec>& points, const FlowOptions& opt) {
    const auto& s = ray.s_grid;
    const std::size_t n = s.size();
    if (n < 3) throw DomainError("gradient_graph_check: need at least 3 slices");
    if (!(s.back() < ray.lifespan)) throw DomainError("gradient_graph_check: s_max must be below the lifespan");
    const CauchyData& data = ray.data;
    GraphReport rep;
    rep.worst_x = Vec::Zero(data.dim());
    for (const Vec& x0 : points) {
        const Vec y0 = invert_gradient(data.u0, x0, opt.tol);
        const Vec w = gradient(data.udot0, y0);
        const Mat h0 = hessian(data.u0, y0), h1 = hessian(data.udot0, y0);
        double box_dist = INFINITY;
        for (int a = 0; a < data.dim(); ++a) {
            box_dist = std::min({box_dist, y0[a] - data.u0.axis(a).lo, data.u0.axis(a).hi - y0[a]});
        }
        for (std::size_t k = 0; k < n; ++k) {
            // Same resolution rule as conservation_check: stay three x-cells inside the active region.
            if (box_dist * detail::min_eigenvalue(h0 + s[k] * h1) < 3.0 * ray.slices[k].min_step()) {
                ++rep.samples_skipped;
                continue;
            }
            const Vec x = x0 + s[k] * w;
            const std::size_t first = detail::stencil_start(k, n);
            const auto wts = detail::derivative_weights({s[first], s[first + 1], s[first + 2]}, static_cast<int>(k - first));
            double sigma = 0.0;
            for (int a = 0; a < 3; ++a) {
                const GridFn& slice = ray.slices[first + a];
                if (!slice.contains(x, 1.0)) throw DomainError("gradient_graph_check: sample leaves the slice box");
                sigma += wts[a] * slice.value(x);
            }
            const Vec xi = gradient(ray.slices[k], x);
            if (!data.udot0.contains(xi)) throw DomainError("gradient_graph_check: gradient escapes the dual grid");
            ++rep.samples_used;
            const double dev = std::abs(sigma + data.udot0.value(xi));
            if (dev > rep.sup_deviation) {
                rep.sup_deviation = dev;
                rep.worst_s = s[k];
                rep.worst_x = x;
            }
        }
    }
    return rep;
}

GraphReport gradient_graph_check(const RaySolution& ray, const FlowOptions& opt) {
    return gradient_graph_check(ray, primal_samples(ray.data, 101), opt);
}

}  // namespace hrma
