// Special functions, root bracketing and Gauss-Legendre quadrature used by the
// waveguide mode solver and the spectral / polarization integrals.
#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nwem {

/// Raised when a numerical routine cannot produce a trustworthy answer
/// (non-finite integrand, unresolved root bracket, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two roots fell inside one scan cell, or a near-miss suggests a hidden pair.
class RootAmbiguityError : public NumericalError {
public:
    RootAmbiguityError(const std::string& what, double location)
        : NumericalError(what), location_(location) {}
    double location() const noexcept { return location_; }

private:
    double location_;
};

namespace numerics {

struct Interval {
    double lo;
    double hi;

    Interval(double lo_, double hi_);
    double width() const noexcept { return hi - lo; }
};

struct QuadratureGrid {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const noexcept { return nodes.size(); }
    /// Sum of weights, i.e. the measure of the integration domain.
    double measure() const noexcept;
};

/// Gauss-Legendre rule with `n` nodes mapped onto `domain`.
QuadratureGrid gauss_legendre(int n, const Interval& domain);

/// Composite Gauss-Legendre: `panels` equal sub-intervals, `n` nodes each.
QuadratureGrid composite_gauss_legendre(int n, int panels, const Interval& domain);

enum class BesselKind { J, K };

inline constexpr int kMaxBesselOrder = 10;

/// Bessel function of the first kind J_n(x), 0 <= n <= 10, 0 <= x <= 1e4.
double bessel_j(int order, double x);

/// Modified Bessel function of the second kind K_n(x), 0 <= n <= 10, x > 0.
double bessel_k(int order, double x);

/// d/dx of J_n or K_n through the three-term recurrence.
double bessel_deriv(BesselKind kind, int order, double x);

struct RootScanOptions {
    int samples = 4096;
    double tolerance = 1e-10;
};

/// Every sign-change root of `f` on `interval`, ascending, at most `max_roots`.
/// Brackets whose refined midpoint does not shrink |f| are poles and dropped.
/// Throws RootAmbiguityError when two roots sit closer than the scan step.
std::vector<double> find_roots(const std::function<double(double)>& f,
                               const Interval& interval,
                               int max_roots,
                               const RootScanOptions& options = {});

/// Bisection on a bracket with f(lo), f(hi) of opposite sign.
double bisect(const std::function<double(double)>& f, double lo, double hi,
              double tolerance);

/// Weighted sum of f over the grid nodes. Throws NumericalError on a
/// non-finite sample.
double integrate_1d(const std::function<double(double)>& f, const QuadratureGrid& grid);

}  // namespace numerics
}  // namespace nwem
