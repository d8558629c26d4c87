#pragma once

#include "hrma/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace hrma::detail {

/// Smallest eigenvalue of a symmetric 1x1 or 2x2 matrix.
inline double min_eigenvalue(const Mat& H) {
    if (H.rows() == 1) return H(0, 0);
    const double tr = H(0, 0) + H(1, 1);
    const double det = H(0, 0) * H(1, 1) - H(0, 1) * H(1, 0);
    return 0.5 * tr - std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
}

/// Weights of the 3-point derivative at t[at] from nodes t[0..2].
inline std::array<double, 3> derivative_weights(const std::array<double, 3>& t, int at) {
    std::array<double, 3> w{};
    for (int a = 0; a < 3; ++a) {
        double num = 0.0, den = 1.0;
        for (int b = 0; b < 3; ++b) {
            if (b == a) continue;
            den *= t[a] - t[b];
            double prod = 1.0;
            for (int c = 0; c < 3; ++c) {
                if (c != a && c != b) prod *= t[at] - t[c];
            }
            num += prod;
        }
        w[a] = num / den;
    }
    return w;
}

/// First index of the 3-point stencil used for node k of n >= 3: centred inside, one-sided at the ends.
inline std::size_t stencil_start(std::size_t k, std::size_t n) { return k == 0 ? 0 : (k == n - 1 ? n - 3 : k - 1); }

}  // namespace hrma::detail
