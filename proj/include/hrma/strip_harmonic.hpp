#pragma once

#include "hrma/toric_cauchy.hpp"

#include <complex>
#include <functional>
#include <vector>

namespace hrma {

/// Samples of a function of t on the periodic window [-L, L): t_j = -L + j * 2L / N.
struct LineFn {
    double L = 40.0;
    std::vector<double> values;
    /// Fraction of the window on each side covered by the Tukey ramp.
    double taper = 0.1;
    bool tapered = false;

    std::size_t size() const { return values.size(); }
    double dt() const { return 2.0 * L / static_cast<double>(values.size()); }
    double t(std::size_t j) const { return -L + static_cast<double>(j) * dt(); }

    /// Throws DomainError unless N is a power of two >= 64, L > 0 and values are finite.
    void validate() const;

    static LineFn sample(const std::function<double(double)>& f, double L = 40.0, std::size_t N = 4096,
                         bool apply_taper = true, double taper = 0.1);
};

/// Tukey window value at t for a window [-L, L) whose outer `taper` fraction on each side ramps to zero.
double tukey(double t, double L, double taper);
LineFn apply_taper(LineFn f);

/// f^(xi) = int e^{-i t xi} f(t) dt at xi_k = pi k / L, k = 0..N/2; negative frequencies are the conjugates.
struct SpectralFn {
    std::vector<double> xi;
    std::vector<std::complex<double>> coeffs;
};

SpectralFn spectrum(const LineFn& f);

/// Multiplies the discrete spectrum of f by a real even symbol m(|xi|).
LineFn apply_even_symbol(const LineFn& f, const std::function<double(double)>& symbol);

/// xi coth(T xi), equal to 1/T at xi = 0.
double symbol_AT(double xi, double T);
/// xi / sinh(T xi), equal to 1/T at xi = 0.
double symbol_DsinhTD(double xi, double T);

LineFn multiplier_AT(const LineFn& f, double T);
LineFn multiplier_DsinhTD(const LineFn& f, double T);
/// Symbol -i sign(xi); zero at xi = 0 and at the Nyquist frequency.
LineFn hilbert(const LineFn& f);

/// P(s, t) for the strip of the given width: the width-pi kernel sin s / (cosh t - cos s) after rescaling by pi / width.
double poisson_kernel(double s, double t, double width = 3.14159265358979323846);

/// u(s, t) on rows s_grid[k] over the t-window of the boundary data.
struct StripField {
    std::vector<double> s_grid;
    double L = 40.0;
    std::size_t N = 0;
    std::vector<double> values;

    double at(std::size_t k, std::size_t j) const { return values[k * N + j]; }
    LineFn row(std::size_t k) const;
    double t(std::size_t j) const { return -L + static_cast<double>(j) * 2.0 * L / static_cast<double>(N); }
};

/// Harmonic extension with u(0, .) = a and u(T, .) = b, row by row in Fourier space.
StripField widder_extend(const LineFn& a, const LineFn& b, double T, const std::vector<double>& s_grid);

/// sup of the five-point Laplacian over interior rows (uniform s grid) and |t| <= central_fraction * L.
double laplacian_residual(const StripField& u, double central_fraction = 0.5);

struct PWOptions {
    /// Fit band as fractions of the resolved band [0, xi_res].
    double band_lo = 0.1;
    double band_hi = 0.6;
    /// pass iff fitted_rate >= T (1 + margin).
    double margin = 0.02;
    /// Coefficients below max(abs_floor, rel_floor * max |f^|) are unresolved.
    double abs_floor = 1e-13;
    double rel_floor = 1e-6;
    /// Upper-half rate over lower-half rate above this flags super-exponential decay.
    double superexp_ratio = 1.25;
};

struct PWResult {
    bool pass = false;
    double fitted_rate = 0.0;
    double band_lo = 0.0;
    double band_hi = 0.0;
    double margin = 0.0;
    bool super_exponential = false;
    /// Every coefficient is below the floor: the zero function.
    bool vanishing = false;
};

/// Least-squares fit of log |f^(xi)| = c - rate * xi over the band. Throws "insufficient resolution"
/// when fewer than three resolved frequencies fall in the band.
PWResult pw_test(const LineFn& f, double T, const PWOptions& opt = {});

struct ToricLeaf {
    StripField chi;
    Vec dual_point;
    /// d chi / ds, constant along the leaf.
    double slope = 0.0;
    LineFn q;
    LineFn p;
    /// mean of q - p and sup |q - p - mean| over the window.
    double obstruction = 0.0;
    double obstruction_variation = 0.0;
    /// grad udot0 vanishes at the dual point.
    bool trivial = false;
};

/// chi_z(s, t) = <y, grad u_s(y)> - u_s(y) with y = grad psi0(z), with obstruction data
/// q = d_s chi(0, .) - d_s Phi(0, .) and p = -d_s Phi(0, .), Phi(s, .) = psi0(f_s(z)).
ToricLeaf toric_leaf_solution(const CauchyData& data, const Vec& z, double T, const std::vector<double>& s_grid,
                              double L = 40.0, std::size_t N = 4096);

}  // namespace hrma
