#include "hrma/errors.hpp"
#include "hrma/toric_cauchy.hpp"

#include <algorithm>
#include <cmath>

namespace hrma {

namespace {

struct LineScan {
    Span gap;
    Span flat;
};

// One grid line of the slice. Cell slopes d_k must cover [a, b]; a slope jump is a gap when
// the pair sum d_{i+1} - d_{i-1} exceeds delta and `ratio` times the pair sums two nodes away
// (pair sums catch kinks that fall between nodes).
LineScan scan_line(const std::vector<double>& v, const Axis& ax, double a, double b, double delta, double ratio,
                   double flat_jump) {
    const int n = static_cast<int>(v.size());
    const double h = ax.step();
    std::vector<double> d(n - 1);
    for (int k = 0; k + 1 < n; ++k) d[k] = (v[k + 1] - v[k]) / h;

    LineScan out;
    auto widen_gap = [&](double lo, double hi) {
        lo = std::max(lo, a);
        hi = std::min(hi, b);
        if (hi - lo > delta && hi - lo > out.gap.width()) out.gap = {lo, hi};
    };
    const auto [dmin, dmax] = std::minmax_element(d.begin(), d.end());
    if (*dmin > a + delta) widen_gap(a, *dmin);
    if (*dmax < b - delta) widen_gap(*dmax, b);

    const int m = n - 2;  // pair sums p_i for i = 1..n-2 over cells i-1 and i (+1)
    std::vector<double> p(m + 1, 0.0);
    for (int i = 1; i + 1 < n - 1; ++i) p[i] = d[i + 1] - d[i - 1];
    for (int i = 1; i + 1 < n - 1; ++i) {
        double nb = 0.0;
        if (i - 2 >= 1) nb = std::max(nb, p[i - 2]);
        if (i + 2 <= n - 3) nb = std::max(nb, p[i + 2]);
        if (p[i] > delta && p[i] > ratio * nb) widen_gap(d[i - 1], d[i + 1]);
    }

    // Runs of nodes with a vanishing slope jump: the slice is affine across them.
    int run_start = -1;
    for (int i = 1; i <= n - 1; ++i) {
        const bool flat = i <= n - 2 && std::abs(d[i] - d[i - 1]) <= flat_jump;
        if (flat && run_start < 0) run_start = i;
        if (!flat && run_start >= 0) {
            const Span s{ax.node(run_start - 1), ax.node(i)};
            if (s.width() > out.flat.width()) out.flat = s;
            run_start = -1;
        }
    }
    return out;
}

double min_eigenvalue(const Mat& H) {
    if (H.rows() == 1) return H(0, 0);
    const double tr = H(0, 0) + H(1, 1);
    const double det = H(0, 0) * H(1, 1) - H(0, 1) * H(1, 0);
    return 0.5 * tr - std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
}

}  // namespace

AdmissibilityReport admissibility_check(const GridFn& slice, const Polytope& P, const AdmissibilityOptions& opt) {
    if (slice.dim() != P.dim()) throw DomainError("admissibility_check: dimension mismatch");
    const int d = slice.dim();
    AdmissibilityReport rep;

    auto target = P.bounding_box();
    if (opt.dual_box) {
        for (int k = 0; k < d; ++k) {
            target[k][0] = std::max(target[k][0], (*opt.dual_box)[k].lo);
            target[k][1] = std::min(target[k][1], (*opt.dual_box)[k].hi);
        }
    }
    double step = opt.dual_step;
    if (step <= 0) {
        step = std::numeric_limits<double>::infinity();
        for (int k = 0; k < d; ++k) step = std::min(step, (target[k][1] - target[k][0]) / 400.0);
    }
    rep.delta_P = opt.delta_P > 0 ? opt.delta_P : 2.0 * step;
    rep.flat_tolerance = 10.0 * convexity_tolerance(slice, opt.tol);

    // Coverage and flat runs, line by line along each axis.
    for (int k = 0; k < d; ++k) {
        const int lines = d == 1 ? 1 : slice.shape(1 - k);
        const double flat_jump = rep.flat_tolerance * slice.step(k);
        for (int line = 0; line < lines; ++line) {
            std::vector<double> v(slice.shape(k));
            for (int i = 0; i < slice.shape(k); ++i) {
                v[i] = d == 1 ? slice.at(i) : (k == 0 ? slice.at(i, line) : slice.at(line, i));
            }
            const LineScan sc = scan_line(v, slice.axis(k), target[k][0], target[k][1], rep.delta_P, opt.kink_ratio,
                                          flat_jump);
            if (sc.gap.width() / 2 > rep.largest_gap_radius) {
                rep.largest_gap_radius = sc.gap.width() / 2;
                rep.largest_gap = sc.gap;
                rep.gap_axis = k;
            }
            if (sc.flat.width() > rep.largest_flat.width()) {
                rep.largest_flat = sc.flat;
                rep.flat_axis = k;
            }
        }
    }
    rep.covers_polytope = rep.gap_axis < 0;

    // Strict convexity on active nodes: every adjacent cell slope lies inside the target
    // shrunk by delta_P. Outside that region the slice is affine by construction.
    auto inside = [&](int k, double slope) {
        return slope > target[k][0] + rep.delta_P && slope < target[k][1] - rep.delta_P;
    };
    for (std::size_t flat = 0; flat < slice.size(); ++flat) {
        const auto idx = slice.multi_index(flat);
        bool active = true;
        for (int k = 0; k < d && active; ++k) {
            if (idx[k] < 1 || idx[k] > slice.shape(k) - 2) {
                active = false;
                break;
            }
            std::array<int, 2> lo = idx, hi = idx;
            lo[k] -= 1;
            hi[k] += 1;
            auto val = [&](const std::array<int, 2>& q) { return d == 1 ? slice.at(q[0]) : slice.at(q[0], q[1]); };
            const double h = slice.step(k);
            active = inside(k, (val(idx) - val(lo)) / h) && inside(k, (val(hi) - val(idx)) / h);
        }
        if (!active) continue;
        ++rep.active_nodes;
        rep.min_margin = std::min(rep.min_margin, min_eigenvalue(node_hessian(slice, flat)));
    }
    rep.strictly_convex = rep.active_nodes > 0 && rep.min_margin > rep.flat_tolerance;
    rep.admissible = rep.strictly_convex && rep.covers_polytope;
    return rep;
}

}  // namespace hrma
