#include "hrma/strip_harmonic.hpp"

#include "detail.hpp"
#include "hrma/errors.hpp"
#include "hrma/moser_flow.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>

namespace hrma {

namespace {

constexpr double kPi = 3.14159265358979323846;
using cplx = std::complex<double>;

bool power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Unnormalised r2c / c2r transforms: F_k = sum_j f_j e^{-2 pi i jk/N}, k = 0..N/2.
std::vector<cplx> forward(const std::vector<double>& f) {
    const int n = static_cast<int>(f.size());
    std::vector<double> in(f);
    std::vector<cplx> out(f.size() / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    return out;
}

std::vector<double> backward(std::vector<cplx> c, std::size_t n) {
    std::vector<double> out(n);
    fftw_plan plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(c.data()), out.data(),
                                          FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    for (double& v : out) v /= static_cast<double>(n);
    return out;
}

double frequency(std::size_t k, double L) { return kPi * static_cast<double>(k) / L; }

// sinh(a x) / sinh(b x) for 0 <= a <= b, x >= 0, without overflow; a / b at x = 0.
double sinh_ratio(double a, double b, double x) {
    if (x == 0.0) return a / b;
    if (b * x < 1e-3) return std::sinh(a * x) / std::sinh(b * x);
    return std::exp(-(b - a) * x) * (-std::expm1(-2 * a * x)) / (-std::expm1(-2 * b * x));
}

LineFn with_values(const LineFn& like, std::vector<double> v) {
    LineFn out = like;
    out.values = std::move(v);
    return out;
}

}  // namespace

void LineFn::validate() const {
    if (values.size() < 64 || !power_of_two(values.size())) {
        throw DomainError("LineFn: sample count must be a power of two, at least 64");
    }
    if (!(L > 0)) throw DomainError("LineFn: window half-width must be positive");
    if (!(taper >= 0 && taper < 0.5)) throw DomainError("LineFn: taper fraction must lie in [0, 0.5)");
    for (double v : values) {
        if (!std::isfinite(v)) throw DomainError("LineFn: values must be finite");
    }
}

LineFn LineFn::sample(const std::function<double(double)>& f, double L, std::size_t N, bool taper_now, double taper) {
    LineFn out;
    out.L = L;
    out.taper = taper;
    out.values.resize(N);
    for (std::size_t j = 0; j < N; ++j) out.values[j] = f(out.t(j));
    out.validate();
    return taper_now ? apply_taper(std::move(out)) : out;
}

double tukey(double t, double L, double taper) {
    const double ramp = taper * 2 * L;
    const double d = L - std::abs(t);
    if (ramp <= 0 || d >= ramp) return 1.0;
    if (d <= 0) return 0.0;
    return 0.5 * (1 - std::cos(kPi * d / ramp));
}

LineFn apply_taper(LineFn f) {
    if (f.tapered) return f;
    for (std::size_t j = 0; j < f.size(); ++j) f.values[j] *= tukey(f.t(j), f.L, f.taper);
    f.tapered = true;
    return f;
}

SpectralFn spectrum(const LineFn& f) {
    f.validate();
    const auto F = forward(f.values);
    SpectralFn out;
    const double dt = f.dt();
    for (std::size_t k = 0; k < F.size(); ++k) {
        // t_0 = -L shifts the phase by e^{i L xi_k} = (-1)^k.
        out.xi.push_back(frequency(k, f.L));
        out.coeffs.push_back(F[k] * dt * (k % 2 ? -1.0 : 1.0));
    }
    return out;
}

LineFn apply_even_symbol(const LineFn& f, const std::function<double(double)>& symbol) {
    f.validate();
    auto F = forward(f.values);
    for (std::size_t k = 0; k < F.size(); ++k) F[k] *= symbol(frequency(k, f.L));
    return with_values(f, backward(std::move(F), f.size()));
}

double symbol_AT(double xi, double T) {
    const double a = std::abs(xi);
    if (a * T < 1e-8) return 1.0 / T;
    return a / std::tanh(T * a);
}

double symbol_DsinhTD(double xi, double T) {
    const double a = std::abs(xi);
    if (a * T < 1e-8) return 1.0 / T;
    if (a * T > 700) return 0.0;
    return a / std::sinh(T * a);
}

LineFn multiplier_AT(const LineFn& f, double T) {
    if (!(T > 0)) throw DomainError("multiplier_AT: T must be positive");
    return apply_even_symbol(f, [T](double xi) { return symbol_AT(xi, T); });
}

LineFn multiplier_DsinhTD(const LineFn& f, double T) {
    if (!(T > 0)) throw DomainError("multiplier_DsinhTD: T must be positive");
    return apply_even_symbol(f, [T](double xi) { return symbol_DsinhTD(xi, T); });
}

LineFn hilbert(const LineFn& f) {
    f.validate();
    auto F = forward(f.values);
    const std::size_t nyquist = f.size() / 2;
    for (std::size_t k = 0; k < F.size(); ++k) {
        F[k] = (k == 0 || k == nyquist) ? cplx(0.0) : F[k] * cplx(0.0, -1.0);
    }
    return with_values(f, backward(std::move(F), f.size()));
}

double poisson_kernel(double s, double t, double width) {
    if (!(width > 0)) throw DomainError("poisson_kernel: width must be positive");
    if (!(s > 0 && s < width)) throw DomainError("poisson_kernel: s must lie strictly inside the strip");
    const double c = kPi / width;
    // Rescaled so that the boundary masses still split as (width - s) / width and s / width.
    return c * std::sin(c * s) / (std::cosh(c * t) - std::cos(c * s));
}

LineFn StripField::row(std::size_t k) const {
    LineFn out;
    out.L = L;
    out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(k * N),
                      values.begin() + static_cast<std::ptrdiff_t>((k + 1) * N));
    return out;
}

StripField widder_extend(const LineFn& a, const LineFn& b, double T, const std::vector<double>& s_grid) {
    a.validate();
    b.validate();
    if (a.size() != b.size() || a.L != b.L) throw DomainError("widder_extend: boundary windows differ");
    if (!(T > 0)) throw DomainError("widder_extend: T must be positive");
    for (double s : s_grid) {
        if (s < 0 || s > T) throw DomainError("widder_extend: s grid must lie in [0, T]");
    }
    const auto A = forward(a.values), B = forward(b.values);
    StripField u;
    u.s_grid = s_grid;
    u.L = a.L;
    u.N = a.size();
    u.values.reserve(s_grid.size() * u.N);
    std::vector<cplx> row(A.size());
    for (double s : s_grid) {
        for (std::size_t k = 0; k < A.size(); ++k) {
            const double xi = frequency(k, a.L);
            row[k] = sinh_ratio(T - s, T, xi) * A[k] + sinh_ratio(s, T, xi) * B[k];
        }
        const auto v = backward(row, u.N);
        u.values.insert(u.values.end(), v.begin(), v.end());
    }
    return u;
}

double laplacian_residual(const StripField& u, double central_fraction) {
    const std::size_t m = u.s_grid.size();
    if (m < 3) throw DomainError("laplacian_residual: need at least 3 rows");
    const double ds = u.s_grid[1] - u.s_grid[0];
    for (std::size_t k = 1; k < m; ++k) {
        if (std::abs(u.s_grid[k] - u.s_grid[k - 1] - ds) > 1e-9 * ds) throw DomainError("laplacian_residual: s grid must be uniform");
    }
    const double dt = 2 * u.L / static_cast<double>(u.N);
    double r = 0.0;
    for (std::size_t k = 1; k + 1 < m; ++k) {
        for (std::size_t j = 1; j + 1 < u.N; ++j) {
            if (std::abs(u.t(j)) > central_fraction * u.L) continue;
            const double lap = (u.at(k + 1, j) - 2 * u.at(k, j) + u.at(k - 1, j)) / (ds * ds) +
                               (u.at(k, j + 1) - 2 * u.at(k, j) + u.at(k, j - 1)) / (dt * dt);
            r = std::max(r, std::abs(lap));
        }
    }
    return r;
}

PWResult pw_test(const LineFn& f, double T, const PWOptions& opt) {
    if (!(T > 0)) throw DomainError("pw_test: T must be positive");
    if (!(0 <= opt.band_lo && opt.band_lo < opt.band_hi && opt.band_hi <= 1)) throw DomainError("pw_test: bad band");
    const auto sp = spectrum(apply_taper(f));
    PWResult res;
    res.margin = opt.margin;
    double peak = 0.0;
    for (const auto& c : sp.coeffs) peak = std::max(peak, std::abs(c));
    const double floor = std::max(opt.abs_floor, opt.rel_floor * peak);
    if (peak < opt.abs_floor) {
        res.vanishing = true;
        res.pass = true;
        res.fitted_rate = std::numeric_limits<double>::infinity();
        return res;
    }
    // Resolved band: up to the first coefficient under the floor.
    std::size_t k_res = 0;
    while (k_res + 1 < sp.coeffs.size() && std::abs(sp.coeffs[k_res + 1]) >= floor) ++k_res;
    const double xi_res = sp.xi[k_res];
    res.band_lo = opt.band_lo * xi_res;
    res.band_hi = opt.band_hi * xi_res;

    auto fit = [&](double lo, double hi) {
        double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t k = 1; k <= k_res; ++k) {
            const double x = sp.xi[k];
            if (x < lo || x > hi) continue;
            const double y = std::log(std::abs(sp.coeffs[k]));
            n += 1, sx += x, sy += y, sxx += x * x, sxy += x * y;
        }
        if (n < 3) throw DomainError("pw_test: insufficient resolution");
        return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    res.fitted_rate = fit(res.band_lo, res.band_hi);
    const double mid = 0.5 * (res.band_lo + res.band_hi);
    const double lower = fit(res.band_lo, mid), upper = fit(mid, res.band_hi);
    res.super_exponential = lower > 0 && upper > opt.superexp_ratio * lower;
    res.pass = res.super_exponential || res.fitted_rate >= T * (1 + opt.margin);
    return res;
}

ToricLeaf toric_leaf_solution(const CauchyData& data, const Vec& z, double T, const std::vector<double>& s_grid,
                              double L, std::size_t N) {
    if (s_grid.size() < 3 || s_grid.front() != 0.0) throw DomainError("toric_leaf_solution: s grid must start at 0 with 3 or more rows");
    for (std::size_t k = 1; k < s_grid.size(); ++k) {
        if (!(s_grid[k] > s_grid[k - 1])) throw DomainError("toric_leaf_solution: s grid must be increasing");
    }
    if (!(T > 0) || s_grid.back() > T) throw DomainError("toric_leaf_solution: s grid must lie in [0, T]");
    ToricLeaf leaf;
    const Vec y = invert_gradient(data.u0, z);
    if (!data.u0.contains(y, 1.0)) throw DomainError("toric_leaf_solution: dual point too close to the grid edge");
    leaf.dual_point = y;
    const Vec w = gradient(data.udot0, y);
    leaf.trivial = w.norm() <= 1e-12 * std::max(1.0, z.norm());

    const double chi0 = y.dot(z) - data.u0.value(y);
    leaf.slope = y.dot(w) - data.udot0.value(y);
    leaf.chi.s_grid = s_grid;
    leaf.chi.L = L;
    leaf.chi.N = N;
    for (double s : s_grid) leaf.chi.values.insert(leaf.chi.values.end(), N, chi0 + s * leaf.slope);

    // Phi(s, t) = psi0(f_s(z)): the torus rotation in t leaves every potential unchanged.
    auto psi0_at = [&](const Vec& x) {
        const Vec yx = invert_gradient(data.u0, x);
        return yx.dot(x) - data.u0.value(yx);
    };
    const auto wts = detail::derivative_weights({s_grid[0], s_grid[1], s_grid[2]}, 0);
    double ds_phi = 0.0, ds_chi = 0.0;
    for (int a = 0; a < 3; ++a) {
        ds_phi += wts[a] * psi0_at(moser_map(data, s_grid[a], z));
        ds_chi += wts[a] * leaf.chi.at(a, 0);
    }
    std::vector<double> q(N), p(N);
    for (std::size_t j = 0; j < N; ++j) {
        q[j] = ds_chi - ds_phi;
        p[j] = -ds_phi;
    }
    leaf.q = LineFn{L, q};
    leaf.p = LineFn{L, p};
    double mean = 0.0;
    for (std::size_t j = 0; j < N; ++j) mean += q[j] - p[j];
    mean /= static_cast<double>(N);
    leaf.obstruction = mean;
    for (std::size_t j = 0; j < N; ++j) leaf.obstruction_variation = std::max(leaf.obstruction_variation, std::abs(q[j] - p[j] - mean));
    return leaf;
}

}  // namespace hrma
