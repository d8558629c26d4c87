#include "hrma/hj_solver.hpp"

#include "hrma/errors.hpp"
#include "detail.hpp"
#include "hrma/moser_flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hrma {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cross2(const Vec& a, const Vec& b) { return a[0] * b[1] - a[1] * b[0]; }

// Smallest s > 0 where c0 + c1 s + c2 s^2 changes sign; +inf if none.
double first_sign_change(double c0, double c1, double c2) {
    const double scale = std::abs(c0) + std::abs(c1) + std::abs(c2);
    if (scale == 0.0) return kInf;
    std::vector<double> roots;
    if (std::abs(c2) <= 1e-14 * scale) {
        if (std::abs(c1) > 1e-14 * scale) roots.push_back(-c0 / c1);
    } else {
        const double disc = c1 * c1 - 4 * c0 * c2;
        if (disc <= 0.0) return kInf;
        // Cancellation-free pair of roots.
        const double q = -0.5 * (c1 + std::copysign(std::sqrt(disc), c1));
        roots.push_back(q / c2);
        if (q != 0.0) roots.push_back(c0 / q);
    }
    double best = kInf;
    for (double r : roots) {
        if (r > 0.0) best = std::min(best, r);
    }
    return best;
}

struct Crossing {
    double s = kInf;
    std::size_t a = 0, b = 0;
};

Crossing crossing_1d(const CharStrip& strip, const std::vector<std::size_t>& order) {
    Crossing c;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const std::size_t i = order[k], j = order[k + 1];
        const double gap = strip.seeds[j][0] - strip.seeds[i][0];
        const double closing = strip.velocity[i][0] - strip.velocity[j][0];
        if (closing <= strip.velocity_noise) continue;
        const double s = gap / closing;
        if (s < c.s) c = {s, i, j};
    }
    return c;
}

// Mesh cells split into two triangles each; a fold is a sign change of a triangle's area.
Crossing crossing_2d(const CharStrip& strip, int n0, int n1, int stride) {
    Crossing c;
    auto id = [&](int i, int j) { return static_cast<std::size_t>(i) * n1 + j; };
    auto tri = [&](std::size_t p, std::size_t q, std::size_t r) {
        const Vec a1 = strip.seeds[q] - strip.seeds[p], a2 = strip.seeds[r] - strip.seeds[p];
        const Vec b1 = strip.velocity[q] - strip.velocity[p], b2 = strip.velocity[r] - strip.velocity[p];
        if (std::max(b1.norm(), b2.norm()) <= strip.velocity_noise) return;
        const double s = first_sign_change(cross2(a1, a2), cross2(a1, b2) + cross2(b1, a2), cross2(b1, b2));
        if (s < c.s) c = {s, p, q};
    };
    for (int i = 0; i + stride < n0; i += stride) {
        for (int j = 0; j + stride < n1; j += stride) {
            tri(id(i, j), id(i + stride, j), id(i, j + stride));
            tri(id(i + stride, j + stride), id(i, j + stride), id(i + stride, j));
        }
    }
    return c;
}

}  // namespace

double hamiltonian(const CauchyData& data, double sigma, const Vec& xi) {
    if (!data.udot0.contains(xi)) throw DomainError("hamiltonian: xi outside the data grid");
    return sigma + data.udot0.value(xi);
}

CharStrip trace_characteristics(const CauchyData& data, const std::vector<Vec>& seeds,
                                const std::vector<double>& s_grid, std::array<int, 2> mesh_shape,
                                const ConvexTolerances& tol) {
    const int d = data.dim();
    CharStrip strip;
    strip.seeds = seeds;
    strip.s_grid = s_grid;
    if (d == 1) {
        mesh_shape = {static_cast<int>(seeds.size()), 1};
    } else if (mesh_shape[0] == 0) {
        const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(seeds.size()))));
        mesh_shape = {n, n};
    }
    if (static_cast<std::size_t>(mesh_shape[0]) * mesh_shape[1] != seeds.size()) {
        throw DomainError("trace_characteristics: seeds do not form the given mesh");
    }
    strip.mesh_shape = mesh_shape;
    strip.velocity_noise = 64.0 * std::numeric_limits<double>::epsilon() * data.udot0.value_scale() / data.udot0.min_step();
    for (const Vec& x0 : seeds) {
        if (x0.size() != d) throw DomainError("trace_characteristics: dimension mismatch");
        const Vec y0 = invert_gradient(data.u0, x0, tol);
        strip.p_xi.push_back(y0);
        strip.p_sigma.push_back(-data.udot0.value(y0));
        strip.velocity.push_back(gradient(data.udot0, y0));
        strip.z0.push_back(x0.dot(y0) - data.u0.value(y0));
    }
    return strip;
}

std::vector<Vec> seed_mesh(const CauchyData& data, int n, double margin_fraction) {
    return primal_samples(data, data.dim() == 1 ? n : n * n, margin_fraction);
}

CausticReport caustic_time(const CharStrip& strip) {
    if (strip.size() < 2) throw DomainError("caustic_time: need at least 2 seeds");
    const int d = static_cast<int>(strip.seeds.front().size());
    CausticReport rep;
    Crossing full, coarse;
    if (d == 1) {
        std::vector<std::size_t> order(strip.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return strip.seeds[a][0] < strip.seeds[b][0]; });
        for (std::size_t k = 0; k + 1 < order.size(); ++k) {
            if (strip.seeds[order[k]][0] == strip.seeds[order[k + 1]][0]) throw DomainError("caustic_time: duplicate seeds");
        }
        full = crossing_1d(strip, order);
        std::vector<std::size_t> half;
        for (std::size_t k = 0; k < order.size(); k += 2) half.push_back(order[k]);
        coarse = crossing_1d(strip, half);
    } else {
        const auto [n0, n1] = strip.mesh_shape;
        if (n0 < 2 || n1 < 2) throw DomainError("caustic_time: 2-D seeds must form a mesh");
        full = crossing_2d(strip, n0, n1, 1);
        coarse = crossing_2d(strip, n0, n1, 2);
    }
    rep.first_crossing_s = full.s;
    rep.infinite = !std::isfinite(full.s);
    rep.crossing_pair = {full.a, full.b};
    rep.location = rep.infinite ? strip.seeds[full.a] : strip.position(full.a, full.s);
    if (rep.infinite && !std::isfinite(coarse.s)) {
        rep.resolution_bound = 0.0;
    } else {
        rep.resolution_bound = std::isfinite(coarse.s) ? std::abs(coarse.s - full.s) : kInf;
    }
    return rep;
}

double hopf_lax_value(const CauchyData& data, double s, const Vec& x) {
    if (x.size() != data.dim()) throw DomainError("hopf_lax_value: dimension mismatch");
    double best = -kInf;
    for (std::size_t k = 0; k < data.u0.size(); ++k) {
        best = std::max(best, data.u0.node(k).dot(x) - data.u0[k] - s * data.udot0[k]);
    }
    return best;
}

HJReport hj_residual(const std::vector<double>& s_grid, const std::vector<GridFn>& eta, const CauchyData& data,
                     const HJOptions& opt) {
    const std::size_t n = s_grid.size();
    if (eta.size() != n) throw DomainError("hj_residual: one slice per s value required");
    if (n < 3) throw DomainError("hj_residual: need at least 3 slices");
    for (std::size_t k = 1; k < n; ++k) {
        if (!(s_grid[k] > s_grid[k - 1])) throw DomainError("hj_residual: s grid must be increasing");
        if (!eta[k].same_geometry(eta[0])) throw DomainError("hj_residual: slices must share one grid");
    }
    const GridFn& g0 = eta[0];
    const int d = g0.dim();
    if (d != data.dim()) throw DomainError("hj_residual: dimension mismatch");
    for (int a = 0; a < d; ++a) {
        if (g0.shape(a) < 3) throw DomainError("hj_residual: grid too coarse");
    }
    const double delta_P = opt.delta_P > 0 ? opt.delta_P : 2.0 * data.u0.min_step();

    auto interior = [&](std::size_t flat) {
        const auto idx = g0.multi_index(flat);
        for (int a = 0; a < d; ++a) {
            if (idx[a] < 1 || idx[a] > g0.shape(a) - 2) return false;
        }
        return true;
    };
    // Flat-node masks per slice.
    std::vector<std::vector<char>> flat(n, std::vector<char>(g0.size(), 0));
    for (std::size_t k = 0; k < n; ++k) {
        const double tol = 10.0 * convexity_tolerance(eta[k], opt.tol);
        for (std::size_t f = 0; f < g0.size(); ++f) {
            if (interior(f) && detail::min_eigenvalue(node_hessian(eta[k], f)) < tol) flat[k][f] = 1;
        }
    }
    const int halo = std::max(0, opt.flat_halo);
    auto near_flat = [&](std::size_t k, std::size_t f) {
        const auto idx = g0.multi_index(f);
        const int i_lo = std::max(0, idx[0] - halo), i_hi = std::min(g0.shape(0) - 1, idx[0] + halo);
        if (d == 1) {
            for (int i = i_lo; i <= i_hi; ++i) {
                if (flat[k][i]) return true;
            }
            return false;
        }
        const int j_lo = std::max(0, idx[1] - halo), j_hi = std::min(g0.shape(1) - 1, idx[1] + halo);
        for (int i = i_lo; i <= i_hi; ++i) {
            for (int j = j_lo; j <= j_hi; ++j) {
                if (flat[k][g0.flat_index(i, j)]) return true;
            }
        }
        return false;
    };

    HJReport rep;
    rep.worst_x = Vec::Zero(d);
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double hm = s_grid[k] - s_grid[k - 1], hp = s_grid[k + 1] - s_grid[k];
        const double wm = -hp / (hm * (hm + hp)), w0 = (hp - hm) / (hm * hp), wp = hm / (hp * (hm + hp));
        for (std::size_t f = 0; f < g0.size(); ++f) {
            if (!interior(f)) continue;
            const Vec xi = node_gradient(eta[k], f);
            if (!data.udot0.contains(xi)) throw DomainError("hj_residual: gradient escapes the dual grid");
            if (flat[k][f]) ++rep.flat_nodes;
            if (near_flat(k - 1, f) || near_flat(k, f) || near_flat(k + 1, f) ||
                data.polytope.depth(xi) < delta_P) {
                ++rep.excluded;
                continue;
            }
            ++rep.evaluated;
            const double ds = wm * eta[k - 1][f] + w0 * eta[k][f] + wp * eta[k + 1][f];
            const double r = std::abs(ds + data.udot0.value(xi));
            if (r > rep.sup_residual) {
                rep.sup_residual = r;
                rep.worst_s = s_grid[k];
                rep.worst_x = g0.node(f);
            }
        }
    }
    return rep;
}

HJReport hj_residual(const RaySolution& ray, const HJOptions& opt) {
    return hj_residual(ray.s_grid, ray.slices, ray.data, opt);
}

}  // namespace hrma
