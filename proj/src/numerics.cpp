#include "nwem/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace nwem::numerics {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEulerGamma = 0.57721566490153286061;
constexpr double kSeriesSwitch = 12.0;

// J_n by its power series. Accurate to ~1e-12 absolute for x < 12.
double j_series(int n, double x) {
    const double half = 0.5 * x;
    double term = 1.0;
    for (int i = 1; i <= n; ++i) term *= half / i;
    double sum = term;
    const double q = -half * half;
    for (int k = 1; k < 200; ++k) {
        term *= q / (double(k) * double(k + n));
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum) && k > 2) break;
    }
    return sum;
}

// Hankel asymptotic expansion for J_0 and J_1, truncated at the smallest term.
double j_asymptotic(int nu, double x) {
    const double mu = 4.0 * nu * nu;
    double p = 1.0;
    double q = 0.0;
    double term = 1.0;
    double prev = 1.0;
    for (int k = 1; k < 200; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= (mu - odd * odd) / (8.0 * k * x);
        if (std::abs(term) >= std::abs(prev) || term == 0.0) break;
        // k odd feeds Q, k even feeds P; signs alternate within each series.
        if (k % 2 == 1)
            q += ((k / 2) % 2 == 0 ? term : -term);
        else
            p += ((k / 2) % 2 == 0 ? term : -term);
        prev = term;
        if (std::abs(term) < 1e-17) break;
    }
    const double chi = x - (0.5 * nu + 0.25) * kPi;
    return std::sqrt(2.0 / (kPi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

// Unchecked J_n for 0 <= n <= kMaxBesselOrder + 2.
double j_unchecked(int n, double x) {
    if (x == 0.0) return n == 0 ? 1.0 : 0.0;
    if (x < kSeriesSwitch) return j_series(n, x);
    // Upward recurrence is stable here because n < x.
    double jm = j_asymptotic(0, x);
    if (n == 0) return jm;
    double j = j_asymptotic(1, x);
    for (int k = 1; k < n; ++k) {
        const double next = (2.0 * k / x) * j - jm;
        jm = j;
        j = next;
    }
    return j;
}

struct K01 {
    double k0;
    double k1;
};

K01 k01_series(double x) {
    const double q = 0.25 * x * x;
    const double lg = std::log(0.5 * x);
    // K0
    double t = 1.0;
    double i0 = 1.0;
    double harm = 0.0;
    double s0 = 0.0;
    for (int k = 1; k < 100; ++k) {
        t *= q / (double(k) * k);
        harm += 1.0 / k;
        i0 += t;
        s0 += t * harm;
        if (t < 1e-18 * i0) break;
    }
    const double k0 = -(lg + kEulerGamma) * i0 + s0;
    // K1
    double u = 1.0;  // q^k / (k! (k+1)!)
    double i1s = 0.0;
    double s1 = 0.0;
    double hk = 0.0;
    for (int k = 0; k < 100; ++k) {
        if (k > 0) {
            u *= q / (double(k) * (k + 1));
            hk += 1.0 / k;
        }
        const double psi_sum = (-kEulerGamma + hk) + (-kEulerGamma + hk + 1.0 / (k + 1));
        i1s += u;
        s1 += psi_sum * u;
        if (k > 2 && u < 1e-18 * i1s) break;
    }
    const double i1 = 0.5 * x * i1s;
    const double k1 = 1.0 / x + lg * i1 - 0.25 * x * s1;
    return {k0, k1};
}

// Steed's continued fraction (Temme's CF2) for K_0, K_1 at x >= 2.
K01 k01_continued_fraction(double x) {
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    for (int i = 2; i < 10000; ++i) {
        a -= 2.0 * (i - 1);
        c = -a * c / i;
        const double qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const double dels = q * delh;
        s += dels;
        if (std::abs(dels / s) < 1e-17) break;
    }
    h *= a1;
    const double k0 = std::sqrt(kPi / (2.0 * x)) * std::exp(-x) / s;
    const double k1 = k0 * (x + 0.5 - h) / x;
    return {k0, k1};
}

double k_unchecked(int n, double x) {
    const K01 base = x <= 2.0 ? k01_series(x) : k01_continued_fraction(x);
    if (n == 0) return base.k0;
    double km = base.k0;
    double k = base.k1;
    for (int m = 1; m < n; ++m) {
        const double next = km + (2.0 * m / x) * k;
        km = k;
        k = next;
    }
    return k;
}

void check_order(int order) {
    if (order < 0 || order > kMaxBesselOrder)
        throw std::domain_error("Bessel order must lie in [0, 10], got " + std::to_string(order));
}

void check_j_argument(double x) {
    if (!(x >= 0.0)) throw std::domain_error("bessel_j: argument must be >= 0");
    if (x > 1e4) throw std::domain_error("bessel_j: argument above 1e4");
}

void check_k_argument(double x) {
    if (!(x > 0.0)) throw std::domain_error("bessel_k: argument must be > 0");
}

// Legendre P_n and its derivative at x.
std::pair<double, double> legendre(int n, double x) {
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    const double dp = n * (x * p1 - p0) / (x * x - 1.0);
    return {p1, dp};
}

}  // namespace

Interval::Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
    if (!std::isfinite(lo) || !std::isfinite(hi))
        throw std::invalid_argument("Interval bounds must be finite");
    if (!(lo < hi)) throw std::invalid_argument("Interval requires lo < hi");
}

double QuadratureGrid::measure() const noexcept {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

QuadratureGrid gauss_legendre(int n, const Interval& domain) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one node");
    QuadratureGrid g;
    g.nodes.resize(n);
    g.weights.resize(n);
    const double mid = 0.5 * (domain.lo + domain.hi);
    const double half = 0.5 * domain.width();
    if (n == 1) {
        g.nodes[0] = mid;
        g.weights[0] = domain.width();
        return g;
    }
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            auto [p, d] = legendre(n, x);
            dp = d;
            const double dx = p / d;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        dp = legendre(n, x).second;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        g.nodes[i] = mid - half * x;
        g.nodes[n - 1 - i] = mid + half * x;
        g.weights[i] = half * w;
        g.weights[n - 1 - i] = half * w;
    }
    return g;
}

QuadratureGrid composite_gauss_legendre(int n, int panels, const Interval& domain) {
    if (panels < 1) throw std::invalid_argument("composite_gauss_legendre: panels < 1");
    QuadratureGrid out;
    const double h = domain.width() / panels;
    for (int p = 0; p < panels; ++p) {
        const double a = domain.lo + p * h;
        const double b = p + 1 == panels ? domain.hi : a + h;
        const QuadratureGrid g = gauss_legendre(n, Interval(a, b));
        out.nodes.insert(out.nodes.end(), g.nodes.begin(), g.nodes.end());
        out.weights.insert(out.weights.end(), g.weights.begin(), g.weights.end());
    }
    return out;
}

double bessel_j(int order, double x) {
    check_order(order);
    check_j_argument(x);
    return j_unchecked(order, x);
}

double bessel_k(int order, double x) {
    check_order(order);
    check_k_argument(x);
    return k_unchecked(order, x);
}

double bessel_deriv(BesselKind kind, int order, double x) {
    check_order(order);
    if (kind == BesselKind::J) {
        check_j_argument(x);
        if (order == 0) return -j_unchecked(1, x);
        return 0.5 * (j_unchecked(order - 1, x) - j_unchecked(order + 1, x));
    }
    check_k_argument(x);
    if (order == 0) return -k_unchecked(1, x);
    return -0.5 * (k_unchecked(order - 1, x) + k_unchecked(order + 1, x));
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double tolerance) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) throw NumericalError("bisect: endpoints do not bracket a root");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (hi - lo <= tolerance || mid == lo || mid == hi) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::vector<double> find_roots(const std::function<double(double)>& f,
                               const Interval& interval,
                               int max_roots,
                               const RootScanOptions& options) {
    if (options.samples < 2) throw std::invalid_argument("find_roots: need >= 2 scan samples");
    if (max_roots < 0) throw std::invalid_argument("find_roots: max_roots must be >= 0");
    const int n = options.samples;
    const double step = interval.width() / n;
    std::vector<double> xs(n + 1);
    std::vector<double> fs(n + 1);
    for (int i = 0; i <= n; ++i) {
        xs[i] = i == n ? interval.hi : interval.lo + i * step;
        fs[i] = f(xs[i]);
        if (!std::isfinite(fs[i])) {
            std::ostringstream msg;
            msg << "find_roots: non-finite function value at x=" << xs[i];
            throw NumericalError(msg.str());
        }
    }

    std::vector<double> roots;
    for (int i = 0; i < n; ++i) {
        const double fa = fs[i];
        const double fb = fs[i + 1];
        if (fa == 0.0) {
            roots.push_back(xs[i]);
            continue;
        }
        if (i + 1 == n && fb == 0.0) {
            roots.push_back(xs[i + 1]);
            continue;
        }
        if ((fa > 0.0) != (fb > 0.0) && fb != 0.0) {
            const double r = bisect(f, xs[i], xs[i + 1], options.tolerance);
            const double fr = std::abs(f(r));
            if (fr > std::max(std::abs(fa), std::abs(fb))) continue;  // pole, not a root
            roots.push_back(r);
        }
    }

    // A same-sign dip whose parabola crosses zero hides a pair of roots.
    for (int i = 1; i < n; ++i) {
        const double f0 = fs[i - 1];
        const double f1 = fs[i];
        const double f2 = fs[i + 1];
        if (f1 == 0.0) continue;
        const bool same = (f0 > 0.0) == (f1 > 0.0) && (f1 > 0.0) == (f2 > 0.0);
        if (!same || std::abs(f1) >= std::abs(f0) || std::abs(f1) >= std::abs(f2)) continue;
        const double b = 0.5 * (f2 - f0);
        const double c = 0.5 * (f0 + f2) - f1;
        if (c == 0.0) continue;
        const double vertex = -b / (2.0 * c);
        const double fmin = f1 - b * b / (4.0 * c);
        if (std::abs(vertex) < 1.0 && (fmin > 0.0) != (f1 > 0.0)) {
            std::ostringstream msg;
            msg << "find_roots: unresolved root pair near x=" << xs[i]
                << "; increase the scan resolution";
            throw RootAmbiguityError(msg.str(), xs[i]);
        }
    }

    std::sort(roots.begin(), roots.end());
    for (std::size_t i = 1; i < roots.size(); ++i) {
        if (roots[i] - roots[i - 1] < step) {
            std::ostringstream msg;
            msg << "find_roots: roots at " << roots[i - 1] << " and " << roots[i]
                << " are closer than the scan step " << step;
            throw RootAmbiguityError(msg.str(), roots[i]);
        }
    }
    if (static_cast<int>(roots.size()) > max_roots) roots.resize(max_roots);
    return roots;
}

double integrate_1d(const std::function<double(double)>& f, const QuadratureGrid& grid) {
    if (grid.nodes.size() != grid.weights.size())
        throw std::invalid_argument("integrate_1d: node/weight length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
        const double v = f(grid.nodes[i]);
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "integrate_1d: non-finite integrand at node " << grid.nodes[i];
            throw NumericalError(msg.str());
        }
        sum += grid.weights[i] * v;
    }
    return sum;
}

}  // namespace nwem::numerics
