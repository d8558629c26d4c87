#include "hrma/convex_core.hpp"

#include "hrma/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hrma {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// One 1-D discrete conjugation: out[j] = max_i x_i * y_j - f[i].
void conjugate_1d(const Axis& xs, std::span<const double> f, const Axis& ys, bool check_coverage,
                  std::span<double> out, std::span<int> arg) {
    const int n = xs.n;
    const double h = xs.step();
    std::vector<int> hull;
    hull.reserve(n);
    auto slope = [&](int a, int b) { return (f[b] - f[a]) / ((b - a) * h); };
    for (int i = 0; i < n; ++i) {
        while (hull.size() >= 2 && slope(hull[hull.size() - 2], hull.back()) >= slope(hull.back(), i)) {
            hull.pop_back();
        }
        hull.push_back(i);
    }
    const int m = static_cast<int>(hull.size());
    std::vector<double> c(m - 1);
    for (int k = 0; k + 1 < m; ++k) c[k] = slope(hull[k], hull[k + 1]);

    if (check_coverage && m > 1) {
        const double tol = 1e-9 * std::max({1.0, std::abs(ys.lo), std::abs(ys.hi)});
        const double offending = c.front() < ys.lo - tol ? c.front() : (c.back() > ys.hi + tol ? c.back() : NAN);
        if (!std::isnan(offending)) {
            std::ostringstream os;
            os.precision(17);
            os << "dual domain too small: gradient value " << offending << " outside [" << ys.lo << ", " << ys.hi
               << "]";
            throw DomainError(os.str());
        }
    }

    int k = 0;
    for (int j = 0; j < ys.n; ++j) {
        const double y = ys.node(j);
        while (k < m - 1 && y > c[k]) ++k;
        const int i = hull[k];
        out[j] = xs.node(i) * y - f[i];
        arg[j] = i;
    }
}

// Polish of max_i x_i*y - f_i: maximise the cubic through four nodes around the discrete
// maximiser i (taken towards the larger neighbour) over [x_{i-1}, x_{i+1}].
double refine_1d(const Axis& xs, std::span<const double> f, double y, int i, double discrete) {
    const int n = xs.n;
    auto phi = [&](int k) { return xs.node(k) * y - f[k]; };
    const bool right = i + 1 < n && (i == 0 || phi(i + 1) >= phi(i - 1));
    const int start = std::clamp(right ? i - 1 : i - 2, 0, n - 4);
    const double v0 = phi(start), v1 = phi(start + 1), v2 = phi(start + 2), v3 = phi(start + 3);
    const double d1 = v1 - v0, d2 = v2 - 2 * v1 + v0, d3 = v3 - 3 * v2 + 3 * v1 - v0;
    const double c3 = d3 / 6, c2 = d2 / 2 - d3 / 2, c1 = d1 - d2 / 2 + d3 / 3;
    auto p = [&](double t) { return v0 + t * (c1 + t * (c2 + t * c3)); };
    const double lo = std::max(0, i - 1 - start), hi = std::min(3, i + 1 - start);
    double best = discrete;
    auto consider = [&](double t) {
        if (std::isfinite(t) && t > lo && t < hi) best = std::max(best, p(t));
    };
    // Roots of p'(t) = 3 c3 t^2 + 2 c2 t + c1.
    const double A = 3 * c3, B = 2 * c2, C = c1;
    if (std::abs(A) < 1e-14 * (std::abs(B) + std::abs(C))) {
        if (B != 0) consider(-C / B);
    } else {
        const double disc = B * B - 4 * A * C;
        if (disc >= 0) {
            const double q = -0.5 * (B + std::copysign(std::sqrt(disc), B));
            consider(q / A);
            if (q != 0) consider(C / q);
        }
    }
    return best;
}

double refine_2d(const GridFn& f, const Vec& y, std::size_t flat, double discrete) {
    const auto idx = f.multi_index(flat);
    const int i = std::clamp(idx[0], 1, f.shape(0) - 2);
    const int j = std::clamp(idx[1], 1, f.shape(1) - 2);
    auto phi = [&](int a, int b) { return f.axis(0).node(a) * y[0] + f.axis(1).node(b) * y[1] - f.at(a, b); };
    const double p = phi(i, j);
    Eigen::Vector2d g((phi(i + 1, j) - phi(i - 1, j)) / 2, (phi(i, j + 1) - phi(i, j - 1)) / 2);
    Eigen::Matrix2d H;
    H(0, 0) = phi(i + 1, j) - 2 * p + phi(i - 1, j);
    H(1, 1) = phi(i, j + 1) - 2 * p + phi(i, j - 1);
    H(0, 1) = H(1, 0) = (phi(i + 1, j + 1) - phi(i + 1, j - 1) - phi(i - 1, j + 1) + phi(i - 1, j - 1)) / 4;
    if (!(H(0, 0) < 0 && H.determinant() > 0)) return discrete;
    Eigen::Vector2d d = -H.ldlt().solve(g);
    d[0] = std::clamp(d[0], -1.0, 1.0);
    d[1] = std::clamp(d[1], -1.0, 1.0);
    const double val = p + g.dot(d) + 0.5 * d.dot(H * d);
    return std::max(val, discrete);
}

}  // namespace

GridFn legendre_transform(const GridFn& f, const Axes& dual, const LegendreOptions& opt,
                          std::vector<std::size_t>& argmax) {
    if (static_cast<int>(dual.size()) != f.dim()) throw DomainError("legendre_transform: dual dimension mismatch");
    std::size_t count = 1;
    for (const auto& ax : dual) {
        if (ax.n < 4 || !(ax.hi > ax.lo)) throw DomainError("legendre_transform: bad dual axis");
        count *= static_cast<std::size_t>(ax.n);
    }
    std::vector<double> out(count);
    argmax.assign(count, 0);

    if (f.dim() == 1) {
        std::vector<int> arg(count);
        conjugate_1d(f.axis(0), f.values(), dual[0], opt.check_coverage, out, arg);
        for (std::size_t j = 0; j < count; ++j) {
            argmax[j] = static_cast<std::size_t>(arg[j]);
            if (opt.refine) out[j] = refine_1d(f.axis(0), f.values(), dual[0].node(static_cast<int>(j)), arg[j], out[j]);
        }
        return GridFn(dual, std::move(out), true);
    }

    const int n0 = f.shape(0), n1 = f.shape(1);
    const int m0 = dual[0].n, m1 = dual[1].n;
    // Pass 1 along axis 0 for every x1 column: partial(a, j).
    std::vector<double> partial(static_cast<std::size_t>(m0) * n1);
    std::vector<int> arg0(static_cast<std::size_t>(m0) * n1);
    std::vector<double> col(n0), col_out(m0);
    std::vector<int> col_arg(m0);
    for (int j = 0; j < n1; ++j) {
        for (int i = 0; i < n0; ++i) col[i] = f.at(i, j);
        conjugate_1d(f.axis(0), col, dual[0], opt.check_coverage, col_out, col_arg);
        for (int a = 0; a < m0; ++a) {
            partial[static_cast<std::size_t>(a) * n1 + j] = col_out[a];
            arg0[static_cast<std::size_t>(a) * n1 + j] = col_arg[a];
        }
    }
    // Pass 2 along axis 1 on -partial(a, .).
    std::vector<double> row(n1), row_out(m1);
    std::vector<int> row_arg(m1);
    for (int a = 0; a < m0; ++a) {
        for (int j = 0; j < n1; ++j) row[j] = -partial[static_cast<std::size_t>(a) * n1 + j];
        conjugate_1d(f.axis(1), row, dual[1], opt.check_coverage, row_out, row_arg);
        for (int b = 0; b < m1; ++b) {
            const std::size_t o = static_cast<std::size_t>(a) * m1 + b;
            const int j = row_arg[b];
            out[o] = row_out[b];
            argmax[o] = f.flat_index(arg0[static_cast<std::size_t>(a) * n1 + j], j);
        }
    }
    if (opt.refine) {
        Vec y(2);
        for (int a = 0; a < m0; ++a) {
            for (int b = 0; b < m1; ++b) {
                const std::size_t o = static_cast<std::size_t>(a) * m1 + b;
                y << dual[0].node(a), dual[1].node(b);
                out[o] = refine_2d(f, y, argmax[o], out[o]);
            }
        }
    }
    return GridFn(dual, std::move(out), true);
}

GridFn legendre_transform(const GridFn& f, const Axes& dual, const LegendreOptions& opt) {
    std::vector<std::size_t> argmax;
    return legendre_transform(f, dual, opt, argmax);
}

std::vector<std::array<double, 2>> slope_range(const GridFn& f) {
    std::vector<std::array<double, 2>> r(f.dim(), {std::numeric_limits<double>::infinity(),
                                                   -std::numeric_limits<double>::infinity()});
    if (f.dim() == 1) {
        const double h = f.step(0);
        for (int i = 0; i + 1 < f.shape(0); ++i) {
            const double s = (f.at(i + 1) - f.at(i)) / h;
            r[0][0] = std::min(r[0][0], s);
            r[0][1] = std::max(r[0][1], s);
        }
        return r;
    }
    for (int i = 0; i < f.shape(0); ++i) {
        for (int j = 0; j < f.shape(1); ++j) {
            if (i + 1 < f.shape(0)) {
                const double s = (f.at(i + 1, j) - f.at(i, j)) / f.step(0);
                r[0][0] = std::min(r[0][0], s);
                r[0][1] = std::max(r[0][1], s);
            }
            if (j + 1 < f.shape(1)) {
                const double s = (f.at(i, j + 1) - f.at(i, j)) / f.step(1);
                r[1][0] = std::min(r[1][0], s);
                r[1][1] = std::max(r[1][1], s);
            }
        }
    }
    return r;
}

GridFn biconjugate(const GridFn& f) {
    if (f.dim() == 1) {
        // Lower hull of the samples, read back at the nodes.
        const Axis& ax = f.axis(0);
        const int n = ax.n;
        const double h = ax.step();
        std::vector<int> hull;
        auto slope = [&](int a, int b) { return (f.at(b) - f.at(a)) / ((b - a) * h); };
        for (int i = 0; i < n; ++i) {
            while (hull.size() >= 2 && slope(hull[hull.size() - 2], hull.back()) >= slope(hull.back(), i)) {
                hull.pop_back();
            }
            hull.push_back(i);
        }
        std::vector<double> out(n);
        std::size_t k = 0;
        for (int i = 0; i < n; ++i) {
            while (k + 1 < hull.size() && hull[k + 1] <= i) ++k;
            if (hull[k] == i || k + 1 == hull.size()) {
                out[i] = f.at(hull[k]);
            } else {
                const int a = hull[k], b = hull[k + 1];
                const double t = static_cast<double>(i - a) / (b - a);
                out[i] = (1 - t) * f.at(a) + t * f.at(b);
            }
        }
        return GridFn(f.axes(), std::move(out), true);
    }
    auto range = slope_range(f);
    Axes dual;
    for (int k = 0; k < f.dim(); ++k) {
        double lo = range[k][0], hi = range[k][1];
        if (!(hi > lo)) lo -= 1.0, hi += 1.0;
        dual.push_back({lo, hi, 2 * f.shape(k) - 1});
    }
    GridFn g = legendre_transform(f, dual);
    GridFn ff = legendre_transform(g, f.axes(), {.refine = false, .check_coverage = false});
    // The gridded dual can only under-estimate the envelope; never exceed f.
    for (std::size_t i = 0; i < ff.size(); ++i) ff[i] = std::min(ff[i], f[i]);
    ff.set_convex_hint(true);
    return ff;
}

Vec gradient(const GridFn& f, const Vec& x) {
    if (!f.contains(x, 1.0)) throw DomainError("gradient: point closer than one cell to the grid boundary");
    Vec g(f.dim());
    for (int k = 0; k < f.dim(); ++k) {
        const double h = f.step(k);
        Vec xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        xp[k] = std::min(xp[k], f.axis(k).hi);
        xm[k] = std::max(xm[k], f.axis(k).lo);
        g[k] = (f.value(xp) - f.value(xm)) / (xp[k] - xm[k]);
    }
    return g;
}

Mat hessian(const GridFn& f, const Vec& x) {
    for (int k = 0; k < f.dim(); ++k) {
        if (f.shape(k) < 5) throw DomainError("hessian: grid too coarse (need at least 5 samples per axis)");
    }
    if (!f.contains(x, 1.0)) throw DomainError("hessian: point closer than one cell to the grid boundary");
    const int d = f.dim();
    Mat H(d, d);
    const double f0 = f.value(x);
    auto shifted = [&](double d0, double d1) {
        Vec z = x;
        z[0] = std::clamp(z[0] + d0 * f.step(0), f.axis(0).lo, f.axis(0).hi);
        if (d == 2) z[1] = std::clamp(z[1] + d1 * f.step(1), f.axis(1).lo, f.axis(1).hi);
        return f.value(z);
    };
    const double h0 = f.step(0);
    H(0, 0) = (shifted(1, 0) - 2 * f0 + shifted(-1, 0)) / (h0 * h0);
    if (d == 2) {
        const double h1 = f.step(1);
        H(1, 1) = (shifted(0, 1) - 2 * f0 + shifted(0, -1)) / (h1 * h1);
        H(0, 1) = H(1, 0) = (shifted(1, 1) - shifted(1, -1) - shifted(-1, 1) + shifted(-1, -1)) / (4 * h0 * h1);
    }
    return H;
}

Vec node_gradient(const GridFn& f, std::size_t flat) {
    const auto idx = f.multi_index(flat);
    Vec g(f.dim());
    if (f.dim() == 1) {
        const int i = idx[0];
        if (i < 1 || i > f.shape(0) - 2) throw DomainError("node_gradient: boundary node");
        g[0] = (f.at(i + 1) - f.at(i - 1)) / (2 * f.step(0));
        return g;
    }
    const int i = idx[0], j = idx[1];
    if (i < 1 || j < 1 || i > f.shape(0) - 2 || j > f.shape(1) - 2) throw DomainError("node_gradient: boundary node");
    g[0] = (f.at(i + 1, j) - f.at(i - 1, j)) / (2 * f.step(0));
    g[1] = (f.at(i, j + 1) - f.at(i, j - 1)) / (2 * f.step(1));
    return g;
}

Mat node_hessian(const GridFn& f, std::size_t flat) {
    const auto idx = f.multi_index(flat);
    if (f.dim() == 1) {
        const int i = idx[0];
        if (i < 1 || i > f.shape(0) - 2) throw DomainError("node_hessian: boundary node");
        const double h = f.step(0);
        Mat H(1, 1);
        H(0, 0) = (f.at(i + 1) - 2 * f.at(i) + f.at(i - 1)) / (h * h);
        return H;
    }
    const int i = idx[0], j = idx[1];
    if (i < 1 || j < 1 || i > f.shape(0) - 2 || j > f.shape(1) - 2) throw DomainError("node_hessian: boundary node");
    const double h0 = f.step(0), h1 = f.step(1);
    Mat H(2, 2);
    H(0, 0) = (f.at(i + 1, j) - 2 * f.at(i, j) + f.at(i - 1, j)) / (h0 * h0);
    H(1, 1) = (f.at(i, j + 1) - 2 * f.at(i, j) + f.at(i, j - 1)) / (h1 * h1);
    H(0, 1) = H(1, 0) =
        (f.at(i + 1, j + 1) - f.at(i + 1, j - 1) - f.at(i - 1, j + 1) + f.at(i - 1, j - 1)) / (4 * h0 * h1);
    return H;
}

double convexity_tolerance(const GridFn& f, const ConvexTolerances& tol) {
    const double scale = f.value_scale();
    const double h = f.min_step();
    return tol.cvx_rel * scale + 64 * kEps * scale / (h * h);
}

ConvexityReport convexity_report(const GridFn& f, const ConvexTolerances& tol) {
    for (int k = 0; k < f.dim(); ++k) {
        if (f.shape(k) < 5) throw DomainError("convexity_report: grid too coarse (need at least 5 samples per axis)");
    }
    ConvexityReport r;
    r.tolerance = convexity_tolerance(f, tol);
    r.min_margin = std::numeric_limits<double>::infinity();
    if (f.dim() == 1) {
        for (int i = 1; i + 1 < f.shape(0); ++i) {
            const double m = node_hessian(f, i)(0, 0);
            if (m < r.min_margin) r.min_margin = m, r.argmin_node = {i, 0};
        }
    } else {
        for (int i = 1; i + 1 < f.shape(0); ++i) {
            for (int j = 1; j + 1 < f.shape(1); ++j) {
                const Mat H = node_hessian(f, f.flat_index(i, j));
                const double tr = H(0, 0) + H(1, 1);
                const double det = H(0, 0) * H(1, 1) - H(0, 1) * H(1, 0);
                const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
                const double m = 0.5 * tr - disc;
                if (m < r.min_margin) r.min_margin = m, r.argmin_node = {i, j};
            }
        }
    }
    r.is_convex = r.min_margin >= -r.tolerance;
    return r;
}

Vec invert_gradient(const GridFn& f, const Vec& y, const ConvexTolerances& tol) {
    const int d = f.dim();
    if (y.size() != d) throw DomainError("invert_gradient: dimension mismatch");
    // Start from the best node of <x, y> - f(x).
    std::size_t best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    const int n0 = f.shape(0), n1 = d == 2 ? f.shape(1) : 1;
    for (int i = 0; i < n0; ++i) {
        const double a = f.axis(0).node(i) * y[0];
        for (int j = 0; j < n1; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * n1 + j;
            const double v = (d == 2 ? a + f.axis(1).node(j) * y[1] : a) - f[k];
            if (v > best_val) best_val = v, best = k;
        }
    }
    const auto idx = f.multi_index(best);
    for (int k = 0; k < d; ++k) {
        if (idx[k] == 0 || idx[k] == f.shape(k) - 1) {
            std::ostringstream os;
            os.precision(17);
            os << "invert_gradient: target gradient (" << y.transpose() << ") outside the gradient range";
            throw DomainError(os.str());
        }
    }
    Vec x = f.node(best);
    auto clamp_inside = [&](Vec z) {
        for (int k = 0; k < d; ++k) {
            z[k] = std::clamp(z[k], f.axis(k).lo + f.step(k), f.axis(k).hi - f.step(k));
        }
        return z;
    };
    const double target = tol.newton * std::max(1.0, y.norm());
    Vec r = gradient(f, x) - y;
    for (int it = 0; it < tol.newton_max_iter; ++it) {
        if (r.norm() <= target) return x;
        const Mat H = hessian(f, x);
        Vec step = H.ldlt().solve(r);
        if (!step.allFinite()) step = r;
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls) {
            Vec cand = clamp_inside(x - alpha * step);
            Vec rc = gradient(f, cand) - y;
            if (rc.norm() < r.norm()) {
                x = cand;
                r = rc;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
    }
    if (r.norm() <= target) return x;
    // Gradient residuals at the 1e-13 level are rounding of the interpolant; accept them.
    if (r.norm() <= 1e3 * kEps * f.value_scale() / f.min_step()) return x;
    for (int k = 0; k < d; ++k) {
        const double h = f.step(k);
        if (x[k] <= f.axis(k).lo + h * (1 + 1e-9) || x[k] >= f.axis(k).hi - h * (1 + 1e-9)) {
            throw DomainError("invert_gradient: target gradient outside the gradient range");
        }
    }
    throw NumericalError("invert_gradient: Newton did not converge", r.norm());
}

}  // namespace hrma
