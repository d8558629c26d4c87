#include "hrma/toric_cauchy.hpp"

#include "hrma/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>

namespace hrma {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec scalar(double v) { return Vec::Constant(1, v); }

std::map<std::string, PresetSpec> build_presets() {
    std::map<std::string, PresetSpec> m;

    PresetSpec q;
    q.id = "quadratic";
    q.polytope = Polytope::interval(0.0, 1.0);
    q.grid = {{0.0, 1.0, 401}};
    q.u0 = [](const Vec& y) { return y[0] * y[0]; };
    q.udot0 = [](const Vec& y) { return -y[0] * y[0]; };
    q.udot0_grad = [](const Vec& y) { return scalar(-2 * y[0]); };
    q.u0_grad_inverse = [](const Vec& x) { return scalar(x[0] / 2); };
    q.lifespan = 1.0;
    m[q.id] = q;

    PresetSpec d;
    d.id = "drift";
    d.polytope = Polytope::interval(-1.0, 1.0);
    d.grid = {{-1.0, 1.0, 401}};
    d.u0 = [](const Vec& y) { return y[0] * y[0] / 2; };
    d.udot0 = [](const Vec&) { return -1.0; };
    d.udot0_grad = [](const Vec&) { return scalar(0.0); };
    d.u0_grad_inverse = [](const Vec& x) { return scalar(x[0]); };
    m[d.id] = d;

    PresetSpec k;
    k.id = "quartic";
    k.polytope = Polytope::interval(-1.0, 1.0);
    k.grid = {{-1.0, 1.0, 401}};
    k.u0 = [](const Vec& y) { return y[0] * y[0] / 2 + std::pow(y[0], 4) / 12; };
    k.udot0 = [](const Vec& y) { return -y[0] * y[0] / 2; };
    k.udot0_grad = [](const Vec& y) { return scalar(-y[0]); };
    // Real root of y^3 + 3y - 3x = 0 (Cardano; the discriminant is always positive).
    k.u0_grad_inverse = [](const Vec& x) {
        const double r = std::sqrt(2.25 * x[0] * x[0] + 1.0);
        return scalar(std::cbrt(1.5 * x[0] + r) + std::cbrt(1.5 * x[0] - r));
    };
    k.lifespan = 1.0;
    m[k.id] = k;

    PresetSpec l;
    l.id = "logistic";
    l.polytope = Polytope::interval(0.0, 1.0);
    l.grid = {{sigmoid(-6.0), sigmoid(6.0), 801}};
    l.u0 = [](const Vec& y) { return y[0] * std::log(y[0]) + (1 - y[0]) * std::log1p(-y[0]); };
    l.udot0 = [](const Vec& y) { return -(y[0] - 0.5) * (y[0] - 0.5); };
    l.udot0_grad = [](const Vec& y) { return scalar(-2 * (y[0] - 0.5)); };
    l.u0_grad_inverse = [](const Vec& x) { return scalar(sigmoid(x[0])); };
    l.lifespan = 2.0;
    m[l.id] = l;

    PresetSpec q2;
    q2.id = "quadratic_2d";
    q2.polytope = Polytope::box({{0.0, 1.0}, {0.0, 1.0}});
    q2.grid = {{0.0, 1.0, 101}, {0.0, 1.0, 101}};
    q2.u0 = [](const Vec& y) { return y.squaredNorm(); };
    q2.udot0 = [](const Vec& y) { return -(y[0] * y[0] + y[1] * y[1] / 2); };
    q2.udot0_grad = [](const Vec& y) {
        Vec g(2);
        g << -2 * y[0], -y[1];
        return g;
    };
    q2.u0_grad_inverse = [](const Vec& x) { return Vec(x / 2); };
    q2.lifespan = 1.0;
    m[q2.id] = q2;
    return m;
}

const std::map<std::string, PresetSpec>& registry() {
    static const std::map<std::string, PresetSpec> m = build_presets();
    return m;
}

}  // namespace

Vec PresetSpec::dual_point(const Vec& x) const {
    Vec y = u0_grad_inverse(x);
    for (int k = 0; k < y.size(); ++k) y[k] = std::clamp(y[k], grid[k].lo, grid[k].hi);
    return y;
}

double PresetSpec::psi0(const Vec& x) const {
    const Vec y = dual_point(x);
    return x.dot(y) - u0(y);
}

double PresetSpec::psidot0(const Vec& x) const { return -udot0(dual_point(x)); }

const std::vector<std::string>& preset_ids() {
    static const std::vector<std::string> ids = [] {
        std::vector<std::string> v;
        for (const auto& [id, spec] : registry()) v.push_back(id);
        return v;
    }();
    return ids;
}

const PresetSpec& preset_spec(const std::string& id) {
    const auto it = registry().find(id);
    if (it == registry().end()) throw DomainError("unknown preset '" + id + "'");
    return it->second;
}

CauchyData make_preset(const std::string& id, int shape) {
    const PresetSpec& spec = preset_spec(id);
    Axes grid = spec.grid;
    if (shape > 0) {
        for (auto& ax : grid) ax.n = shape;
    }
    return make_cauchy(spec.u0, spec.udot0, spec.polytope, grid, id);
}

void validate(const CauchyData& data, const ConvexTolerances& tol) {
    data.polytope.validate();
    if (!data.u0.same_geometry(data.udot0)) throw DomainError("u0 and udot0 must share grid geometry");
    if (data.u0.dim() != data.polytope.dim()) throw DomainError("grid and polytope dimensions differ");
    const double slack = 1e-12;
    for (const auto& corner : {0, 1, 2, 3}) {
        Vec y(data.dim());
        for (int k = 0; k < data.dim(); ++k) {
            const Axis& ax = data.u0.axis(k);
            y[k] = (corner >> k) & 1 ? ax.hi : ax.lo;
        }
        if (!data.polytope.contains(y, -slack)) throw DomainError("data grid box leaves the polytope");
    }
    const auto rep = convexity_report(data.u0, tol);
    if (!(rep.min_margin > 0)) throw DomainError("u0 is not strictly convex");
    if (data.psi0.has_value() != data.psidot0.has_value()) throw DomainError("primal pair must be given together");
    if (data.psi0 && !data.psi0->same_geometry(*data.psidot0)) {
        throw DomainError("psi0 and psidot0 must share grid geometry");
    }
}

CauchyData make_cauchy(const ScalarFn& u0, const ScalarFn& udot0, const Polytope& P, const Axes& grid,
                       std::string label) {
    CauchyData d{std::move(label), P, GridFn::sample(grid, u0), GridFn::sample(grid, udot0), std::nullopt,
                 std::nullopt};
    validate(d);
    return d;
}

CauchyData to_symplectic(const GridFn& psi0, const GridFn& psidot0, const Polytope& P, int dual_shape,
                         const ConvexTolerances& tol) {
    if (!psi0.same_geometry(psidot0)) throw DomainError("psi0 and psidot0 must share grid geometry");
    if (psi0.dim() != P.dim()) throw DomainError("psi0 and polytope dimensions differ");
    P.validate();
    if (!(convexity_report(psi0, tol).min_margin > 0)) throw DomainError("psi0 is not strictly convex");

    const int d = psi0.dim();
    // Dual box: the gradient range of the nodes one cell inside, shrunk to a box that
    // every grid line attains.
    std::vector<std::array<double, 2>> box(d, {-std::numeric_limits<double>::infinity(),
                                                std::numeric_limits<double>::infinity()});
    for (std::size_t flat = 0; flat < psi0.size(); ++flat) {
        const auto idx = psi0.multi_index(flat);
        bool interior = true;
        for (int k = 0; k < d; ++k) interior &= idx[k] >= 1 && idx[k] <= psi0.shape(k) - 2;
        if (!interior) continue;
        const Vec g = node_gradient(psi0, flat);
        if (!(P.depth(g) > 0)) throw DomainError("moment image violates polytope");
        for (int k = 0; k < d; ++k) {
            if (idx[k] == 1) box[k][0] = std::max(box[k][0], g[k]);
            if (idx[k] == psi0.shape(k) - 2) box[k][1] = std::min(box[k][1], g[k]);
        }
    }
    Axes dual;
    for (int k = 0; k < d; ++k) {
        if (!(box[k][1] > box[k][0])) throw DomainError("psi0 gradient range is degenerate");
        dual.push_back({box[k][0], box[k][1], dual_shape > 0 ? dual_shape : psi0.shape(k)});
    }

    // The box sits inside the gradient range on purpose, so every maximiser is an interior node.
    GridFn u0 = legendre_transform(psi0, dual, {.refine = true, .check_coverage = false});
    std::vector<double> udot(u0.size());
    for (std::size_t j = 0; j < u0.size(); ++j) {
        const Vec x = invert_gradient(psi0, u0.node(j), tol);
        udot[j] = -psidot0.value(x);
    }
    CauchyData out{"custom", P, std::move(u0), GridFn(dual, std::move(udot)), psi0, psidot0};
    validate(out, tol);
    return out;
}

LifespanReport lifespan_report(const CauchyData& data, const ConvexTolerances& tol) {
    validate(data, tol);
    const GridFn& u0 = data.u0;
    const GridFn& ud = data.udot0;
    const double tol_b = convexity_tolerance(ud, tol);
    LifespanReport rep;
    for (std::size_t flat = 0; flat < u0.size(); ++flat) {
        const auto idx = u0.multi_index(flat);
        bool interior = true;
        for (int k = 0; k < u0.dim(); ++k) interior &= idx[k] >= 1 && idx[k] <= u0.shape(k) - 2;
        if (!interior) continue;
        const Mat A = node_hessian(u0, flat);
        const Mat B = node_hessian(ud, flat);
        double s_crit = std::numeric_limits<double>::infinity();
        if (u0.dim() == 1) {
            if (B(0, 0) < -tol_b) s_crit = A(0, 0) / -B(0, 0);
        } else {
            Eigen::SelfAdjointEigenSolver<Mat> eb(B);
            if (eb.eigenvalues().minCoeff() < -tol_b) {
                // A + s B >= 0 fails first at s = 1 / max eig of (-B) relative to A.
                Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ge(-B, A);
                const double mu = ge.eigenvalues().maxCoeff();
                if (mu > 0) s_crit = 1.0 / mu;
            }
        }
        if (s_crit < rep.lifespan) {
            rep.lifespan = s_crit;
            rep.argmin = u0.node(flat);
        }
    }
    rep.infinite = !std::isfinite(rep.lifespan);
    return rep;
}

double convex_lifespan(const CauchyData& data, const ConvexTolerances& tol) {
    return lifespan_report(data, tol).lifespan;
}

Axes default_x_box(const CauchyData& data, const std::vector<double>& s_grid, int shape) {
    const int d = data.dim();
    std::vector<std::array<double, 2>> r(d, {std::numeric_limits<double>::infinity(),
                                             -std::numeric_limits<double>::infinity()});
    for (double s : s_grid) {
        const auto sr = slope_range(data.potential_at(s));
        for (int k = 0; k < d; ++k) {
            r[k][0] = std::min(r[k][0], sr[k][0]);
            r[k][1] = std::max(r[k][1], sr[k][1]);
        }
    }
    Axes out;
    for (int k = 0; k < d; ++k) {
        double pad = 0.1 * (r[k][1] - r[k][0]);
        if (!(pad > 0)) pad = 1.0;
        out.push_back({r[k][0] - pad, r[k][1] + pad, shape});
    }
    return out;
}

std::vector<double> uniform_s_grid(double s_max, int count) {
    if (count < 2 || !(s_max > 0)) throw DomainError("s-grid needs s_max > 0 and at least 2 points");
    std::vector<double> s(count);
    for (int i = 0; i < count; ++i) s[i] = s_max * i / (count - 1);
    s.back() = s_max;
    return s;
}

namespace {

std::pair<GridFn, AdmissibilityReport> slice_at(const CauchyData& data, double s, double lifespan, const Axes& x_axes,
                                                const RayOptions& opt) {
    AdmissibilityOptions adm = opt.admissibility;
    if (adm.dual_step <= 0) adm.dual_step = data.u0.min_step();
    if (!adm.dual_box) adm.dual_box = data.u0.axes();
    const LegendreOptions lo{.refine = opt.refine, .check_coverage = true};
    GridFn us = data.potential_at(s);
    GridFn slice = s > lifespan ? legendre_transform(biconjugate(us), x_axes, lo) : legendre_transform(us, x_axes, lo);
    auto report = admissibility_check(slice, data.polytope, adm);
    return {std::move(slice), std::move(report)};
}

}  // namespace

std::pair<GridFn, AdmissibilityReport> ray_slice(const CauchyData& data, double s, const Axes& x_axes, const RayOptions& opt) {
    if (!(s >= 0)) throw DomainError("ray_slice: s must be non-negative");
    return slice_at(data, s, convex_lifespan(data, opt.admissibility.tol), x_axes, opt);
}

RaySolution legendre_ray(const CauchyData& data, const std::vector<double>& s_grid, const Axes& x_axes,
                         const RayOptions& opt) {
    if (s_grid.empty() || s_grid.front() != 0.0) throw DomainError("s-grid must start at 0");
    for (std::size_t i = 1; i < s_grid.size(); ++i) {
        if (!(s_grid[i] > s_grid[i - 1])) throw DomainError("s-grid must be increasing");
    }
    RaySolution ray;
    ray.data = data;
    ray.s_grid = s_grid;
    ray.lifespan = convex_lifespan(data, opt.admissibility.tol);
    for (double s : s_grid) {
        auto [slice, report] = slice_at(data, s, ray.lifespan, x_axes, opt);
        ray.reports.push_back(std::move(report));
        ray.admissible.push_back(ray.reports.back().admissible);
        ray.slices.push_back(std::move(slice));
    }
    return ray;
}

std::vector<GridFn> hcma_lift(const RaySolution& ray) {
    if (ray.slices.empty()) throw DomainError("hcma_lift: empty ray");
    const GridFn& base = ray.data.psi0 ? *ray.data.psi0 : ray.slices.front();
    std::vector<GridFn> out;
    for (const GridFn& slice : ray.slices) {
        if (slice.dim() != base.dim()) throw DomainError("hcma_lift: dimension mismatch");
        if (slice.same_geometry(base)) {
            out.push_back(axpy(slice, -1.0, base));
            continue;
        }
        for (int k = 0; k < base.dim(); ++k) {
            if (base.axis(k).lo < slice.axis(k).lo || base.axis(k).hi > slice.axis(k).hi) {
                throw DomainError("hcma_lift: slice box does not contain the psi0 box");
            }
        }
        std::vector<double> v(base.size());
        for (std::size_t j = 0; j < base.size(); ++j) v[j] = slice.value(base.node(j)) - base[j];
        out.emplace_back(base.axes(), std::move(v));
    }
    return out;
}

}  // namespace hrma
