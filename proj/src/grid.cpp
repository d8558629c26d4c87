#include "hrma/grid.hpp"

#include "hrma/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace hrma {

namespace {

struct Stencil {
    int start;
    std::array<double, 4> w;
};

// 4-point Lagrange weights on the nodes start..start+3 of `ax`.
Stencil cubic_stencil(const Axis& ax, double x) {
    const double h = ax.step();
    const double t = (x - ax.lo) / h;
    int cell = static_cast<int>(std::floor(t));
    cell = std::clamp(cell, 0, ax.n - 2);
    const int start = std::clamp(cell - 1, 0, ax.n - 4);
    Stencil st{start, {}};
    for (int a = 0; a < 4; ++a) {
        double w = 1.0;
        for (int b = 0; b < 4; ++b) {
            if (b != a) w *= (t - (start + b)) / static_cast<double>(a - b);
        }
        st.w[a] = w;
    }
    return st;
}

}  // namespace

GridFn::GridFn(Axes axes, std::vector<double> values, bool convex_hint)
    : axes_(std::move(axes)), values_(std::move(values)), convex_hint_(convex_hint) {
    if (axes_.empty() || axes_.size() > 2) throw DomainError("GridFn: dimension must be 1 or 2");
    std::size_t count = 1;
    for (const auto& ax : axes_) {
        if (ax.n < 4) throw DomainError("GridFn: every axis needs at least 4 samples");
        if (!(ax.hi > ax.lo)) throw DomainError("GridFn: axis must satisfy hi > lo");
        count *= static_cast<std::size_t>(ax.n);
    }
    if (values_.size() != count) {
        throw DomainError("GridFn: expected " + std::to_string(count) + " values, got " +
                          std::to_string(values_.size()));
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw DomainError("GridFn: non-finite sample value");
    }
}

GridFn GridFn::sample(Axes axes, const std::function<double(const Vec&)>& f) {
    std::size_t count = 1;
    for (const auto& ax : axes) count *= static_cast<std::size_t>(std::max(ax.n, 0));
    std::vector<double> values(count);
    Vec x(static_cast<Eigen::Index>(axes.size()));
    if (axes.size() == 1) {
        for (int i = 0; i < axes[0].n; ++i) {
            x[0] = axes[0].node(i);
            values[i] = f(x);
        }
    } else if (axes.size() == 2) {
        for (int i = 0; i < axes[0].n; ++i) {
            for (int j = 0; j < axes[1].n; ++j) {
                x << axes[0].node(i), axes[1].node(j);
                values[static_cast<std::size_t>(i) * axes[1].n + j] = f(x);
            }
        }
    }
    return GridFn(std::move(axes), std::move(values));
}

double GridFn::min_step() const {
    double h = axes_[0].step();
    for (const auto& ax : axes_) h = std::min(h, ax.step());
    return h;
}

std::array<int, 2> GridFn::multi_index(std::size_t flat) const {
    if (dim() == 1) return {static_cast<int>(flat), 0};
    const auto n1 = static_cast<std::size_t>(axes_[1].n);
    return {static_cast<int>(flat / n1), static_cast<int>(flat % n1)};
}

Vec GridFn::node(std::size_t flat) const {
    const auto idx = multi_index(flat);
    Vec x(dim());
    for (int k = 0; k < dim(); ++k) x[k] = axes_[k].node(idx[k]);
    return x;
}

bool GridFn::contains(const Vec& x, double margin_cells) const {
    if (x.size() != dim()) return false;
    for (int k = 0; k < dim(); ++k) {
        const double m = margin_cells * axes_[k].step();
        const double slack = 1e-12 * (axes_[k].hi - axes_[k].lo);
        if (x[k] < axes_[k].lo + m - slack || x[k] > axes_[k].hi - m + slack) return false;
    }
    return true;
}

double GridFn::value(const Vec& x) const {
    if (!contains(x)) throw DomainError("GridFn::value: point outside grid box");
    const Stencil s0 = cubic_stencil(axes_[0], x[0]);
    if (dim() == 1) {
        double v = 0.0;
        for (int a = 0; a < 4; ++a) v += s0.w[a] * values_[s0.start + a];
        return v;
    }
    const Stencil s1 = cubic_stencil(axes_[1], x[1]);
    double v = 0.0;
    for (int a = 0; a < 4; ++a) {
        double row = 0.0;
        for (int b = 0; b < 4; ++b) row += s1.w[b] * at(s0.start + a, s1.start + b);
        v += s0.w[a] * row;
    }
    return v;
}

double GridFn::value_scale() const {
    double m = 1.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

GridFn operator+(const GridFn& a, const GridFn& b) { return axpy(a, 1.0, b); }

GridFn operator*(double c, const GridFn& a) {
    std::vector<double> v(a.values().begin(), a.values().end());
    for (double& x : v) x *= c;
    return GridFn(a.axes(), std::move(v));
}

GridFn axpy(const GridFn& a, double c, const GridFn& b) {
    if (!a.same_geometry(b)) throw DomainError("grid geometry mismatch");
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + c * b[i];
    return GridFn(a.axes(), std::move(v));
}

Polytope Polytope::interval(double lo, double hi) {
    Polytope p;
    p.normals = {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
    p.offsets = {hi, -lo};
    return p;
}

Polytope Polytope::box(const std::vector<std::array<double, 2>>& bounds) {
    Polytope p;
    const int d = static_cast<int>(bounds.size());
    for (int k = 0; k < d; ++k) {
        Vec e = Vec::Zero(d);
        e[k] = 1.0;
        p.normals.push_back(e);
        p.offsets.push_back(bounds[k][1]);
        p.normals.push_back(-e);
        p.offsets.push_back(-bounds[k][0]);
    }
    return p;
}

double Polytope::depth(const Vec& y) const {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < normals.size(); ++j) {
        const double nrm = normals[j].norm();
        d = std::min(d, (offsets[j] - normals[j].dot(y)) / nrm);
    }
    return d;
}

std::vector<Vec> Polytope::vertices() const {
    const int d = dim();
    std::vector<Vec> out;
    const double tol = 1e-10;
    if (d == 1) {
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < normals.size(); ++j) {
            const double v = normals[j][0];
            if (v > 0) hi = std::min(hi, offsets[j] / v);
            if (v < 0) lo = std::max(lo, offsets[j] / v);
        }
        if (std::isfinite(lo)) out.push_back(Vec::Constant(1, lo));
        if (std::isfinite(hi)) out.push_back(Vec::Constant(1, hi));
        return out;
    }
    for (std::size_t a = 0; a < normals.size(); ++a) {
        for (std::size_t b = a + 1; b < normals.size(); ++b) {
            Eigen::Matrix2d m;
            m << normals[a][0], normals[a][1], normals[b][0], normals[b][1];
            if (std::abs(m.determinant()) < 1e-14) continue;
            Vec v = m.inverse() * Eigen::Vector2d(offsets[a], offsets[b]);
            if (depth(v) >= -tol) out.push_back(v);
        }
    }
    return out;
}

std::vector<std::array<double, 2>> Polytope::bounding_box() const {
    const int d = dim();
    std::vector<std::array<double, 2>> bb(d, {std::numeric_limits<double>::infinity(),
                                              -std::numeric_limits<double>::infinity()});
    for (const auto& v : vertices()) {
        for (int k = 0; k < d; ++k) {
            bb[k][0] = std::min(bb[k][0], v[k]);
            bb[k][1] = std::max(bb[k][1], v[k]);
        }
    }
    return bb;
}

void Polytope::validate() const {
    const int d = dim();
    if (d < 1 || d > 2) throw DomainError("Polytope: dimension must be 1 or 2");
    if (normals.size() != offsets.size()) throw DomainError("Polytope: normals/offsets size mismatch");
    for (const auto& v : normals) {
        if (v.size() != d || v.norm() == 0.0) throw DomainError("Polytope: bad normal vector");
    }
    // Bounded iff the normals positively span R^d.
    if (d == 1) {
        bool pos = false, neg = false;
        for (const auto& v : normals) {
            pos |= v[0] > 0;
            neg |= v[0] < 0;
        }
        if (!(pos && neg)) throw DomainError("Polytope: unbounded");
    } else {
        std::vector<double> angles;
        for (const auto& v : normals) angles.push_back(std::atan2(v[1], v[0]));
        std::sort(angles.begin(), angles.end());
        double gap = angles.front() + 2 * std::numbers::pi - angles.back();
        for (std::size_t i = 1; i < angles.size(); ++i) gap = std::max(gap, angles[i] - angles[i - 1]);
        if (gap >= std::numbers::pi - 1e-12) throw DomainError("Polytope: unbounded");
    }
    const auto bb = bounding_box();
    for (int k = 0; k < d; ++k) {
        if (!(bb[k][1] > bb[k][0])) throw DomainError("Polytope: empty interior");
    }
    if (!(depth(interior_point()) > 0)) throw DomainError("Polytope: empty interior");
}

Vec Polytope::interior_point() const {
    const auto vs = vertices();
    Vec c = Vec::Zero(dim());
    for (const auto& v : vs) c += v;
    return vs.empty() ? c : Vec(c / static_cast<double>(vs.size()));
}

}  // namespace hrma
