#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hrma/convex_core.hpp"
#include "hrma/errors.hpp"

#include <cmath>
#include <random>

using namespace hrma;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

GridFn sample1(double lo, double hi, int n, double (*f)(double)) {
    return GridFn::sample({{lo, hi, n}}, [f](const Vec& x) { return f(x[0]); });
}

double sup_diff(const GridFn& a, const std::function<double(double)>& g, int margin = 0) {
    double e = 0;
    for (int i = margin; i < a.shape(0) - margin; ++i) e = std::max(e, std::abs(a.at(i) - g(a.axis(0).node(i))));
    return e;
}

// Oracle: brute-force sup over an explicit x sample.
double brute_sup(const std::vector<double>& xs, const std::function<double(double)>& f, double y) {
    double best = -INFINITY;
    for (double x : xs) best = std::max(best, x * y - f(x));
    return best;
}

// Oracle: lower convex envelope of sampled points by minimising over all chords a <= i <= b.
std::vector<double> chord_envelope(const GridFn& f) {
    const int n = f.shape(0);
    std::vector<double> env(n);
    for (int i = 0; i < n; ++i) {
        double best = f.at(i);
        for (int a = 0; a <= i; ++a) {
            for (int b = i; b < n; ++b) {
                if (a == b) continue;
                const double t = double(i - a) / (b - a);
                best = std::min(best, (1 - t) * f.at(a) + t * f.at(b));
            }
        }
        env[i] = best;
    }
    return env;
}

}  // namespace

TEST_CASE("legendre: self-dual quadratic") {
    auto f = sample1(-2, 2, 401, [](double x) { return 0.5 * x * x; });
    auto g = legendre_transform(f, {{-2, 2, 401}});
    const double h = f.step(0);
    CHECK(sup_diff(g, [](double y) { return 0.5 * y * y; }) <= 2 * h * h);
    CHECK(g.convex_hint());
}

TEST_CASE("legendre: zero function gives the support function of the box") {
    auto f = sample1(-1, 1, 101, [](double) { return 0.0; });
    auto g = legendre_transform(f, {{-1, 1, 101}});
    CHECK(sup_diff(g, [](double y) { return std::abs(y); }) <= 1e-14);
}

TEST_CASE("legendre: quartic against a 10x finer brute-force sup") {
    auto quartic = [](double x) { return x * x * x * x / 4; };
    auto f = sample1(-1.5, 1.5, 301, +[](double x) { return x * x * x * x / 4; });
    const double ymax = 1.5 * 1.5 * 1.5;
    auto g = legendre_transform(f, {{-ymax, ymax, 201}});
    std::vector<double> fine;
    for (int i = 0; i <= 3000; ++i) fine.push_back(-1.5 + 3.0 * i / 3000);
    const double h = f.step(0);
    double err = 0, closed = 0;
    for (int j = 0; j < g.shape(0); ++j) {
        const double y = g.axis(0).node(j);
        const double oracle = brute_sup(fine, quartic, y);
        err = std::max(err, std::abs(g.at(j) - oracle));
        closed = std::max(closed, std::abs(oracle - 0.75 * std::pow(std::abs(y), 4.0 / 3.0)));
    }
    CHECK(err <= 2 * h * h);
    CHECK(closed <= 1e-3);  // the oracle itself agrees with the closed form
}

TEST_CASE("legendre: too-small dual box is rejected with the offending gradient") {
    auto f = sample1(-2, 2, 101, [](double x) { return 0.5 * x * x; });
    try {
        (void)legendre_transform(f, {{-1, 1, 101}});
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("dual domain too small") != std::string::npos);
        CHECK(msg.find("-1.98") != std::string::npos);
    }
}

TEST_CASE("legendre: 2-D separable transform of a quadratic") {
    auto f = GridFn::sample({{-2, 2, 81}, {-1, 1, 41}}, [](const Vec& x) { return x[0] * x[0] / 2 + x[1] * x[1]; });
    auto g = legendre_transform(f, {{-2, 2, 81}, {-2, 2, 81}});
    double err = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec y = g.node(k);
        err = std::max(err, std::abs(g[k] - (y[0] * y[0] / 2 + y[1] * y[1] / 4)));
    }
    CHECK(err <= 2 * 0.05 * 0.05);
}

TEST_CASE("legendre: refinement is exact for quadratics and never below the discrete value") {
    auto f = sample1(-2, 2, 41, [](double x) { return 0.5 * x * x; });
    auto plain = legendre_transform(f, {{-1.5, 1.5, 57}}, {.check_coverage = false});
    auto refined = legendre_transform(f, {{-1.5, 1.5, 57}}, {.refine = true, .check_coverage = false});
    CHECK(sup_diff(refined, [](double y) { return 0.5 * y * y; }) <= 1e-13);
    for (int j = 0; j < plain.shape(0); ++j) CHECK(refined.at(j) >= plain.at(j) - 1e-15);
}

TEST_CASE("biconjugate") {
    SUBCASE("convex input is reproduced") {
        auto f = sample1(-1, 1, 201, [](double x) { return std::exp(x); });
        auto ff = biconjugate(f);
        CHECK(sup_diff(ff, [](double x) { return std::exp(x); }) <= 2 * f.step(0) * f.step(0));
    }
    SUBCASE("double well matches the chord-envelope oracle") {
        auto f = sample1(-2, 2, 81, [](double x) { return std::min((x + 1) * (x + 1), (x - 1) * (x - 1)); });
        auto ff = biconjugate(f);
        const auto env = chord_envelope(f);
        for (int i = 0; i < f.shape(0); ++i) {
            CHECK(ff.at(i) == doctest::Approx(env[i]).epsilon(1e-12));
            CHECK(ff.at(i) <= f.at(i) + 1e-14);
        }
        CHECK(ff.value(v1(0.0)) == doctest::Approx(0.0).scale(1));
        CHECK(f.value(v1(0.0)) == doctest::Approx(1.0));
    }
    SUBCASE("constants are fixed") {
        auto f = sample1(-1, 3, 50, [](double) { return 2.5; });
        CHECK(sup_diff(biconjugate(f), [](double) { return 2.5; }) <= 1e-14);
    }
    SUBCASE("2-D envelope stays below the data and fixes a convex bowl") {
        auto f = GridFn::sample({{-1, 1, 21}, {-1, 1, 21}}, [](const Vec& x) { return x.squaredNorm(); });
        auto ff = biconjugate(f);
        for (std::size_t k = 0; k < f.size(); ++k) {
            CHECK(ff[k] <= f[k] + 1e-14);
            CHECK(ff[k] >= f[k] - 2 * 0.1 * 0.1);
        }
    }
}

TEST_CASE("gradient") {
    auto f = sample1(-1, 1, 201, [](double x) { return 0.5 * x * x; });
    const double h = f.step(0);
    CHECK(gradient(f, v1(0.5))[0] == doctest::Approx(0.5).epsilon(h * h));
    auto a = sample1(-1, 1, 201, [](double x) { return std::abs(x); });
    CHECK(std::abs(gradient(a, v1(0.0))[0]) <= 1e-14);
    auto q = GridFn::sample({{-2, 2, 161}, {-2, 2, 161}}, [](const Vec& x) { return x[0] * x[0] + 3 * x[1] * x[1]; });
    const Vec g = gradient(q, v2(1, 1));
    CHECK(g[0] == doctest::Approx(2).epsilon(1e-10));
    CHECK(g[1] == doctest::Approx(6).epsilon(1e-10));
    CHECK_THROWS_AS(gradient(f, v1(1.0)), DomainError);
    CHECK_THROWS_AS(gradient(f, v1(-1.0 + 0.5 * h)), DomainError);
}

TEST_CASE("gradient: finite differences match analytic gradients within 10 h^2") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    auto f = sample1(-1, 1, 401, [](double x) { return std::log(1 + std::exp(3 * x)) + std::sin(x); });
    const double h = f.step(0);
    for (int k = 0; k < 50; ++k) {
        const double x = u(rng);
        const double e = std::exp(3 * x);
        const double exact = 3 * e / (1 + e) + std::cos(x);
        CHECK(std::abs(gradient(f, v1(x))[0] - exact) <= 10 * h * h * 10);
    }
    // On nodes the central difference error is the classical h^2/6 f''' bound.
    for (int i = 5; i < 396; i += 13) {
        const double x = f.axis(0).node(i);
        const double e = std::exp(3 * x);
        CHECK(std::abs(node_gradient(f, i)[0] - (3 * e / (1 + e) + std::cos(x))) <= 10 * h * h);
    }
}

TEST_CASE("hessian and convexity_report") {
    auto conv = sample1(-1, 1, 101, [](double y) { return 0.5 * y * y; });
    auto r = convexity_report(conv);
    CHECK(r.min_margin == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(r.is_convex);
    auto conc = sample1(-1, 1, 101, [](double y) { return -y * y; });
    r = convexity_report(conc);
    CHECK(r.min_margin == doctest::Approx(-2.0).epsilon(1e-8));
    CHECK_FALSE(r.is_convex);
    auto u0 = sample1(0, 1, 101, [](double y) { return y * y; });
    auto ud = sample1(0, 1, 101, [](double y) { return -y * y; });
    r = convexity_report(axpy(u0, 0.5, ud));
    CHECK(r.min_margin == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(hessian(u0, v1(0.3))(0, 0) == doctest::Approx(2.0).epsilon(1e-8));
    auto coarse = sample1(0, 1, 4, [](double y) { return y * y; });
    CHECK_THROWS_AS(convexity_report(coarse), DomainError);
    CHECK_THROWS_AS(hessian(coarse, v1(0.5)), DomainError);

    auto saddle = GridFn::sample({{-1, 1, 21}, {-1, 1, 21}}, [](const Vec& x) { return x[0] * x[0] - x[1] * x[1]; });
    r = convexity_report(saddle);
    CHECK(r.min_margin == doctest::Approx(-2.0).epsilon(1e-8));
    CHECK_FALSE(r.is_convex);
    auto tilted = GridFn::sample({{-1, 1, 21}, {-1, 1, 21}},
                                 [](const Vec& x) { return x[0] * x[0] + x[0] * x[1] + x[1] * x[1]; });
    // Hessian [[2,1],[1,2]] has eigenvalues 1 and 3.
    CHECK(convexity_report(tilted).min_margin == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("invert_gradient") {
    auto q = sample1(-1, 1, 201, [](double x) { return 0.5 * x * x; });
    CHECK(invert_gradient(q, v1(0.3))[0] == doctest::Approx(0.3).epsilon(1e-9));
    auto logistic = sample1(-8, 8, 801, [](double x) { return std::log1p(std::exp(x)); });
    CHECK(std::abs(invert_gradient(logistic, v1(0.5))[0]) <= 1e-8);
    CHECK_THROWS_AS(invert_gradient(q, v1(1.5)), DomainError);

    SUBCASE("round trip on random strictly convex quartics") {
        std::mt19937 rng(11);
        std::uniform_real_distribution<double> coef(0.2, 1.0);
        for (int trial = 0; trial < 3; ++trial) {
            const double a = coef(rng), b = coef(rng), c = coef(rng) - 0.6;
            auto f = GridFn::sample({{-1, 1, 401}}, [&](const Vec& x) {
                const double t = x[0];
                return a * t * t * t * t + b * t * t + c * t;
            });
            const double glo = gradient(f, v1(-0.9))[0], ghi = gradient(f, v1(0.9))[0];
            std::uniform_real_distribution<double> ys(glo, ghi);
            auto dual = legendre_transform(f, {{-4 * a - 2 * b + c - 1, 4 * a + 2 * b + c + 1, 801}});
            for (int k = 0; k < 20; ++k) {
                const double y = ys(rng);
                const Vec x = invert_gradient(f, v1(y));
                CHECK(std::abs(gradient(f, x)[0] - y) <= 1e-8);
                CHECK(std::abs(x[0] - gradient(dual, v1(y))[0]) <= 5 * f.step(0));
            }
        }
    }

    SUBCASE("2-D") {
        auto f = GridFn::sample({{-2, 2, 81}, {-2, 2, 81}},
                                [](const Vec& x) { return x[0] * x[0] + 0.5 * x[0] * x[1] + x[1] * x[1]; });
        const Vec y = v2(0.7, -0.4);
        const Vec x = invert_gradient(f, y);
        CHECK((gradient(f, x) - y).norm() <= 1e-8);
    }
}

TEST_CASE("properties: duality identities") {
    auto f = sample1(-3, 3, 601, [](double x) { return std::log1p(std::exp(x)) + 0.1 * x * x; });
    const auto sr = slope_range(f);
    auto g = legendre_transform(f, {{sr[0][0], sr[0][1], 601}}, {.refine = true});
    const double h = f.step(0);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> xs(-2.5, 2.5);
    for (int k = 0; k < 40; ++k) {
        const double x = xs(rng);
        const double y = gradient(f, v1(x))[0];
        // gradient duality
        CHECK(std::abs(gradient(g, v1(y))[0] - x) <= 5 * h);
        // Hessian duality
        const double prod = hessian(g, v1(y))(0, 0) * hessian(f, v1(x))(0, 0);
        CHECK(std::abs(prod - 1.0) <= 50 * h);
    }
    CHECK(convexity_report(g).is_convex);
}

TEST_CASE("properties: order reversal and conjugate convexity on random data") {
    std::mt19937 rng(5);
    std::normal_distribution<double> noise(0.0, 0.3);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> a(64), b(64);
        for (int i = 0; i < 64; ++i) {
            a[i] = noise(rng);
            b[i] = a[i] + std::abs(noise(rng));
        }
        GridFn fa({{-1, 1, 64}}, a), fb({{-1, 1, 64}}, b);
        const Axes dual{{-40, 40, 97}};
        auto ga = legendre_transform(fa, dual), gb = legendre_transform(fb, dual);
        for (int j = 0; j < 97; ++j) CHECK(ga.at(j) >= gb.at(j));
        CHECK(convexity_report(ga).is_convex);
        CHECK(convexity_report(gb).is_convex);
        // f** <= f and f** is convex
        auto env = biconjugate(fa);
        for (int i = 0; i < 64; ++i) CHECK(env.at(i) <= fa.at(i) + 1e-14);
        CHECK(convexity_report(env).is_convex);
    }
}

TEST_CASE("property: involution converges at second order") {
    // The dual box is the analytic gradient range, fixed across levels so the grids stay nested.
    const double ymax = std::sinh(1.0) + 2.0;
    auto err_at = [ymax](int n) {
        auto f = GridFn::sample({{-1, 1, n}}, [](const Vec& x) { return std::cosh(x[0]) + x[0] * x[0]; });
        auto g = legendre_transform(f, {{-ymax, ymax, n}});
        auto ff = legendre_transform(g, f.axes());
        double e = 0;
        for (int i = 1; i + 1 < n; ++i) e = std::max(e, std::abs(ff.at(i) - f.at(i)));
        return e;
    };
    const double e1 = err_at(401), e2 = err_at(801), e3 = err_at(1601);
    CHECK(std::log2(e1 / e2) >= 1.8);
    CHECK(std::log2(e2 / e3) >= 1.8);
}
