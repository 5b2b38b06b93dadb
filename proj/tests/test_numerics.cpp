#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nwem/numerics.hpp"

using namespace nwem;
using namespace nwem::numerics;

namespace {

constexpr double kPi = std::numbers::pi;

// Bessel integral J_n(x) = (1/2pi) int_0^{2pi} cos(n t - x sin t) dt; the
// trapezoid rule is spectrally accurate on a periodic integrand.
double j_integral_oracle(int n, double x) {
    const int m = 4096;
    double s = 0.0;
    for (int i = 0; i < m; ++i) {
        const double t = 2.0 * kPi * i / m;
        s += std::cos(n * t - x * std::sin(t));
    }
    return s / m;
}

// K_n(x) = int_0^inf exp(-x cosh t) cosh(n t) dt, trapezoid on a doubly
// exponentially decaying integrand.
double k_integral_oracle(int n, double x) {
    const double h = 0.002;
    double s = 0.5 * std::exp(-x);
    for (int i = 1;; ++i) {
        const double t = i * h;
        const double v = std::exp(-x * std::cosh(t) + n * t) * 0.5 * (1.0 + std::exp(-2.0 * n * t));
        s += v;
        if (x * std::cosh(t) - n * t > 800.0) break;
    }
    return s * h;
}

// 40-term power series for J0 in long double.
long double j0_series_oracle(long double x) {
    long double term = 1.0L;
    long double sum = 1.0L;
    for (int k = 1; k < 40; ++k) {
        term *= -(x * x / 4.0L) / (long double)(k * k);
        sum += term;
    }
    return sum;
}

}  // namespace

TEST_CASE("bessel_j trivial values and first zero") {
    CHECK(bessel_j(0, 0.0) == 1.0);
    CHECK(bessel_j(1, 0.0) == 0.0);

    long double lo = 2.0L, hi = 3.0L;
    for (int i = 0; i < 200; ++i) {
        const long double mid = 0.5L * (lo + hi);
        if ((j0_series_oracle(mid) > 0) == (j0_series_oracle(lo) > 0))
            lo = mid;
        else
            hi = mid;
    }
    const double first_zero = static_cast<double>(0.5L * (lo + hi));
    CHECK(first_zero == doctest::Approx(2.404825557695773).epsilon(1e-12));
    CHECK(std::abs(bessel_j(0, first_zero)) < 1e-12);
}

TEST_CASE("bessel_j matches the integral representation to 1e-10") {
    for (int n = 0; n <= kMaxBesselOrder; ++n) {
        for (double x = 0.0; x <= 50.0; x += 0.37) {
            CHECK(std::abs(bessel_j(n, x) - j_integral_oracle(n, x)) < 1e-10);
        }
        // Both sides of the series / asymptotic switch-over.
        for (double x : {11.999999, 12.0, 12.000001}) {
            CHECK(std::abs(bessel_j(n, x) - j_integral_oracle(n, x)) < 1e-10);
        }
    }
}

TEST_CASE("bessel_j large arguments and domain errors") {
    // Asymptotic form with the leading correction only.
    const double x = 1e4;
    const double expected = std::sqrt(2.0 / (kPi * x)) * std::cos(x - kPi / 4);
    CHECK(std::abs(bessel_j(0, x) - expected) < 1e-6);
    CHECK_THROWS_AS(bessel_j(0, -1.0), std::domain_error);
    CHECK_THROWS_AS(bessel_j(11, 1.0), std::domain_error);
}

TEST_CASE("bessel_k against integral oracle and asymptotics") {
    for (int n = 0; n <= kMaxBesselOrder; ++n) {
        for (double x : {0.01, 0.1, 0.5, 1.0, 1.999, 2.0, 2.001, 3.3, 7.0, 15.0, 40.0}) {
            const double ref = k_integral_oracle(n, x);
            CHECK(bessel_k(n, x) == doctest::Approx(ref).epsilon(1e-10));
        }
    }
    CHECK(bessel_k(0, 1.0) > bessel_k(0, 2.0));
    CHECK(bessel_k(0, 2.0) > 0.0);

    // Asymptotic series sqrt(pi/2x) e^-x (1 - 1/(8x) + 9/(128x^2) - 225/(3072 x^3)).
    const double x = 20.0;
    const double lead = std::sqrt(kPi / (2 * x)) * std::exp(-x);
    const double asym = lead * (1 - 1 / (8 * x) + 9 / (128 * x * x) - 225 / (3072 * x * x * x));
    CHECK(std::abs(bessel_k(0, x) / asym - 1.0) < 1e-6);

    for (double xx = 0.05; xx < 30.0; xx *= 1.3) CHECK(bessel_k(1, xx) > bessel_k(0, xx));
    CHECK_THROWS_AS(bessel_k(0, 0.0), std::domain_error);
    CHECK_THROWS_AS(bessel_k(0, -2.0), std::domain_error);
}

TEST_CASE("bessel_k is strictly decreasing") {
    for (int n = 0; n <= kMaxBesselOrder; ++n) {
        double prev = bessel_k(n, 0.05);
        for (double x = 0.1; x < 60.0; x += 0.25) {
            const double v = bessel_k(n, x);
            CHECK(v > 0.0);
            CHECK(v < prev);
            prev = v;
        }
    }
}

TEST_CASE("bessel_deriv identities and finite differences") {
    CHECK(bessel_deriv(BesselKind::J, 0, 0.0) == 0.0);
    CHECK(bessel_deriv(BesselKind::J, 0, 1.0) == doctest::Approx(-bessel_j(1, 1.0)).epsilon(1e-14));
    CHECK(bessel_deriv(BesselKind::K, 0, 1.0) == doctest::Approx(-bessel_k(1, 1.0)).epsilon(1e-14));
    const double h = 1e-6;
    for (int n = 0; n <= kMaxBesselOrder; ++n) {
        for (double x : {0.3, 1.0, 4.5, 11.0, 13.0, 30.0}) {
            const double fdj = (bessel_j(n, x + h) - bessel_j(n, x - h)) / (2 * h);
            CHECK(std::abs(bessel_deriv(BesselKind::J, n, x) - fdj) < 1e-6);
            const double fdk = (bessel_k(n, x + h) - bessel_k(n, x - h)) / (2 * h);
            CHECK(std::abs(bessel_deriv(BesselKind::K, n, x) - fdk) < 1e-6 * std::max(1.0, std::abs(fdk)));
        }
    }
}

TEST_CASE("Turan inequality below the first zero") {
    // First zeros of J_n, n = 1..5, located with the library's own root scan.
    for (int n = 1; n <= 5; ++n) {
        const auto zeros = find_roots([n](double x) { return bessel_j(n, x); },
                                      Interval(0.5, n + 8.0), 1);
        REQUIRE(zeros.size() == 1);
        for (int i = 1; i <= 100; ++i) {
            const double x = zeros[0] * i / 101.0;
            const double jn = bessel_j(n, x);
            CHECK(bessel_j(n + 1, x) * bessel_j(n - 1, x) <= jn * jn + 1e-15);
        }
    }
}

TEST_CASE("find_roots examples") {
    auto r1 = find_roots([](double x) { return x * x - 1.0; }, Interval(0, 2), 10);
    REQUIRE(r1.size() == 1);
    CHECK(r1[0] == doctest::Approx(1.0).epsilon(1e-10));

    auto r2 = find_roots([](double x) { return std::sin(x); }, Interval(1, 10), 10);
    REQUIRE(r2.size() == 3);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(r2[k] - (k + 1) * kPi) < 1e-9);

    auto capped = find_roots([](double x) { return std::sin(x); }, Interval(1, 10), 2);
    CHECK(capped.size() == 2);
}

TEST_CASE("find_roots recovers polynomial roots") {
    const std::vector<std::vector<double>> cases = {
        {-0.7, 0.1, 0.35, 1.9},
        {0.25, 0.5, 0.75},
        {-3.0, 2.5},
        {0.0101, 0.4, 0.99},
    };
    for (const auto& roots : cases) {
        auto poly = [&roots](double x) {
            double p = 1.0;
            for (double r : roots) p *= (x - r);
            return p;
        };
        auto found = find_roots(poly, Interval(-4.0, 3.0), 20);
        REQUIRE(found.size() == roots.size());
        for (std::size_t i = 0; i < roots.size(); ++i) CHECK(std::abs(found[i] - roots[i]) < 1e-9);
    }
}

TEST_CASE("find_roots flags unresolved root pairs and skips poles") {
    // Two roots 1e-4 apart with a scan step of ~2.4e-4.
    auto tight = [](double x) { return (x - 0.50003) * (x - 0.50013); };
    CHECK_THROWS_AS(find_roots(tight, Interval(0, 1), 5), RootAmbiguityError);
    RootScanOptions fine;
    fine.samples = 1 << 16;
    CHECK(find_roots(tight, Interval(0, 1), 5, fine).size() == 2);

    auto pole = [](double x) { return 1.0 / (x - 0.3); };
    CHECK(find_roots(pole, Interval(0, 1), 5).empty());
}

TEST_CASE("Gauss-Legendre grids and integrate_1d") {
    const auto g = gauss_legendre(64, Interval(0, 2 * kPi));
    CHECK(g.nodes.size() == g.weights.size());
    for (double w : g.weights) CHECK(w > 0.0);
    CHECK(std::abs(g.measure() / (2 * kPi) - 1.0) < 1e-12);
    CHECK(integrate_1d([](double) { return 1.0; }, g) == doctest::Approx(2 * kPi).epsilon(1e-12));
    CHECK(integrate_1d([](double x) { return std::sin(x) * std::sin(x); }, g) ==
          doctest::Approx(kPi).epsilon(1e-12));

    // Planck-like bump over the emitter band, against a 10^6-step trapezoid.
    const double lo = 637e-9, hi = 780e-9;
    auto planck = [](double lam) {
        const double x = 0.0143877 / (lam * 3000.0);
        return 1.0 / (std::pow(lam * 1e6, 5) * (std::exp(x) - 1.0));
    };
    const int steps = 1000000;
    const double h = (hi - lo) / steps;
    double trap = 0.5 * (planck(lo) + planck(hi));
    for (int i = 1; i < steps; ++i) trap += planck(lo + i * h);
    trap *= h;
    const double gl = integrate_1d(planck, gauss_legendre(64, Interval(lo, hi)));
    CHECK(std::abs(gl / trap - 1.0) < 1e-8);

    CHECK_THROWS_AS(integrate_1d([](double) { return std::nan(""); }, g), NumericalError);
    CHECK_THROWS_AS(Interval(1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(Interval(0.0, INFINITY), std::invalid_argument);
}

TEST_CASE("integrate_1d is linear") {
    const auto g = gauss_legendre(16, Interval(-1.0, 2.0));
    auto f = [](double x) { return std::exp(x) * std::cos(3 * x); };
    auto h = [](double x) { return 1.0 / (1.0 + x * x); };
    for (double a : {-2.5, 0.3, 7.0}) {
        for (double b : {1.0, -0.125, 4.0}) {
            const double lhs = integrate_1d([&](double x) { return a * f(x) + b * h(x); }, g);
            const double rhs = a * integrate_1d(f, g) + b * integrate_1d(h, g);
            CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(std::abs(lhs), 1.0));
        }
    }
}
