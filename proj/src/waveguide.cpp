#include "nwem/waveguide.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "nwem/constants.hpp"

namespace nwem::waveguide {

using numerics::BesselKind;
using numerics::bessel_deriv;
using numerics::bessel_j;
using numerics::bessel_k;

namespace {

constexpr double kPi = std::numbers::pi;

struct DispersionTerms {
    double j, jp, k, kp;
};

DispersionTerms terms(int nu, double u, double w) {
    return {bessel_j(nu, u), bessel_deriv(BesselKind::J, nu, u), bessel_k(nu, w),
            bessel_deriv(BesselKind::K, nu, w)};
}

// The two factors of the order-0 equation and the full nu >= 1 form, all
// multiplied by J_nu(U) (or J_nu(U)^2) so no pole appears where J_nu(U) = 0.
double te_factor(double u, double w) {
    const auto t = terms(0, u, w);
    return t.jp / u + t.j * t.kp / (w * t.k);
}

double tm_factor(double u, double w, double c) {
    const auto t = terms(0, u, w);
    return t.jp / u + c * t.j * t.kp / (w * t.k);
}

// With J'/(U J) = P - nu/U^2 and K'/(W K) = -Q - nu/W^2, where
// P = J_{nu-1}/(U J_nu) and Q = K_{nu-1}/(W K_nu), the nu^2 terms of the
// hybrid equation cancel exactly. What is left is multiplied by W^2 J_nu^2;
// this keeps HE11 near cutoff (W ~ 1e-8 at d = 50 nm) well conditioned.
double hybrid_determinant(int nu, double u, double w, double c) {
    const double j = bessel_j(nu, u);
    const double pj = bessel_j(nu - 1, u) / u;
    const double qj = j * bessel_k(nu - 1, w) / (w * bessel_k(nu, w));
    const double aw2 = (w * w) / (u * u);
    return w * w * (pj - qj) * (pj - c * qj) - nu * j * ((aw2 + c) * (pj - qj) + (aw2 + 1.0) * (pj - c * qj));
}

double u_of(double v, double w) { return std::sqrt(std::max(v * v - w * w, 0.0)); }

// Roots in W over (0, V): a uniform scan plus a logarithmic scan of the first
// cell so modes just above cutoff (and HE11 at small V) are not missed.
std::vector<double> roots_in_w(const std::function<double(double)>& f, double v,
                               const ModeSolverOptions& opt) {
    const double first = v / opt.scan_samples;
    const double last = v * (1.0 - 1e-12);
    numerics::RootScanOptions scan{opt.scan_samples, opt.tolerance * v};
    std::vector<double> roots = numerics::find_roots(f, numerics::Interval(first, last),
                                                     opt.scan_samples, scan);
    const double log_lo = std::log(v * 1e-12);
    const double log_hi = std::log(first);
    auto g = [&](double t) { return f(std::exp(t)); };
    numerics::RootScanOptions log_scan{512, 1e-15};
    for (double t : numerics::find_roots(g, numerics::Interval(log_lo, log_hi), 64, log_scan)) {
        const double w = std::exp(t);
        const bool dup = std::any_of(roots.begin(), roots.end(),
                                     [&](double r) { return std::abs(r - w) < 1e-9 * v; });
        if (!dup) roots.push_back(w);
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

struct Coefficients {
    double a_amp;  // Ez amplitude A
    double b_amp;  // Hz amplitude B
};

Coefficients axial_coefficients(const GuidedMode& m) {
    switch (m.family) {
        case ModeFamily::TE:
            return {0.0, 1.0};
        case ModeFamily::TM:
            return {1.0, 0.0};
        default:
            return {1.0, m.hz_ratio};
    }
}

// Radial amplitude functions; the angular factors cos(nu phi) for
// (Ez, Er, Hphi) and sin(nu phi) for (Hz, Ephi, Hr) are applied by callers.
// For nu = 0 both angular factors are 1.
FieldSextet radial_fields(const GuidedMode& m, double r, bool core) {
    const auto& s = m.spec;
    const double a = s.radius();
    const double k0 = s.k0();
    const double omega = k0 * constants::c0;
    const double beta = m.beta();
    const int nu = m.order;
    const auto [a_amp, b_amp] = axial_coefficients(m);
    const double rr = std::max(r, 1e-9 * a);

    double f, fp, kappa2, eps;
    if (core) {
        const double kappa = m.u / a;
        f = bessel_j(nu, kappa * rr);
        fp = kappa * bessel_deriv(BesselKind::J, nu, kappa * rr);
        kappa2 = kappa * kappa;
        eps = constants::eps0 * s.core_index * s.core_index;
    } else {
        const double gamma = m.w / a;
        const double scale = bessel_j(nu, m.u) / bessel_k(nu, m.w);
        f = scale * bessel_k(nu, gamma * rr);
        fp = scale * gamma * bessel_deriv(BesselKind::K, nu, gamma * rr);
        kappa2 = -gamma * gamma;
        eps = constants::eps0 * s.clad_index * s.clad_index;
    }
    const cplx pre(0.0, 1.0 / kappa2);
    const double mu_w = omega * constants::mu0;
    const double eps_w = omega * eps;
    const double g = m.normalization;
    FieldSextet out;
    out.ez = g * a_amp * f;
    out.hz = g * b_amp * f;
    out.er = g * pre * (beta * a_amp * fp + mu_w * nu * b_amp * f / rr);
    out.ephi = g * pre * (-beta * nu * a_amp * f / rr - mu_w * b_amp * fp);
    out.hr = g * pre * (beta * b_amp * fp + eps_w * nu * a_amp * f / rr);
    out.hphi = g * pre * (beta * nu * b_amp * f / rr + eps_w * a_amp * fp);
    return out;
}

// Axial Poynting density of the radial functions, integrated over phi.
double flux_density(const FieldSextet& f, int nu) {
    const double angular = nu == 0 ? 2.0 * kPi : kPi;
    return 0.5 * angular * std::real(f.er * std::conj(f.hphi) - f.ephi * std::conj(f.hr));
}

// Composite Simpson on uniform samples; a trailing 3/8 panel absorbs an odd
// interval count.
double simpson(const std::vector<double>& y, double h) {
    const std::size_t n = y.size() - 1;
    if (n == 0) return 0.0;
    if (n == 1) return 0.5 * h * (y[0] + y[1]);
    std::size_t simpson_end = n % 2 == 0 ? n : n - 3;
    double s = 0.0;
    for (std::size_t i = 0; i + 2 <= simpson_end; i += 2) s += h / 3.0 * (y[i] + 4 * y[i + 1] + y[i + 2]);
    if (simpson_end != n) {
        const std::size_t i = simpson_end;
        s += 3.0 * h / 8.0 * (y[i] + 3 * y[i + 1] + 3 * y[i + 2] + y[i + 3]);
    }
    return s;
}

GuidedMode make_mode(const WaveguideSpec& spec, int nu, ModeFamily family, double w) {
    GuidedMode m;
    m.spec = spec;
    m.order = nu;
    m.family = family;
    const double v = v_parameter(spec);
    m.w = w;
    m.u = u_of(v, w);
    const double ak0 = spec.radius() * spec.k0();
    m.n_eff = std::sqrt(spec.clad_index * spec.clad_index + (w / ak0) * (w / ak0));
    m.index_excess = (w / ak0) * (w / ak0) / (m.n_eff + spec.clad_index);
    if (nu > 0) {
        const auto t = terms(nu, m.u, m.w);
        const double x = t.jp / (m.u * t.j);
        const double kq = t.kp / (m.w * t.k);
        const double s = nu * (1.0 / (m.u * m.u) + 1.0 / (m.w * m.w)) / (x + kq);
        const double omega = spec.k0() * constants::c0;
        m.hz_ratio = -m.beta() / (omega * constants::mu0) * s;
    }
    m.normalization = 1.0;
    m.normalization = 1.0 / std::sqrt(modal_power(m));
    return m;
}

ModeFamily classify_hybrid(const WaveguideSpec& spec, int nu, double u, double w) {
    const double c = std::pow(spec.clad_index / spec.core_index, 2);
    const auto t = terms(nu, u, w);
    const double x = t.jp / (u * t.j);
    const double kq = t.kp / (w * t.k);
    const double rhs = double(nu) * nu * (1 / (u * u) + 1 / (w * w)) * (1 / (u * u) + c / (w * w));
    const double disc = std::sqrt(std::pow(0.5 * (1 - c) * kq, 2) + rhs);
    const double plus = -0.5 * (1 + c) * kq + disc;
    const double minus = -0.5 * (1 + c) * kq - disc;
    return std::abs(x - plus) < std::abs(x - minus) ? ModeFamily::EH : ModeFamily::HE;
}

// Outer radius of the stored profile: at least 3d, and far enough that the
// evanescent tail beyond it carries < 1e-9 of the power.
double profile_extent(const GuidedMode& m) {
    const double a = m.spec.radius();
    return std::max(3.0 * m.spec.diameter, a * (1.0 + 12.0 / m.w));
}

void fill_radial_profile(GuidedMode& m, int samples) {
    const double a = m.spec.radius();
    const double t_max = std::log(profile_extent(m) / a);
    // Core uniform in r, cladding uniform in t = ln(r / a); r = a is a node of both.
    const int core_pts = std::max(5, samples / 4) | 1;
    const int clad_pts = samples - core_pts;
    m.radial_profile.r.clear();
    m.radial_profile.fields.clear();
    for (int i = 0; i < core_pts; ++i) {
        const double r = a * i / (core_pts - 1);
        m.radial_profile.r.push_back(r);
        m.radial_profile.fields.push_back(radial_fields(m, r, true));
    }
    for (int i = 0; i < clad_pts; ++i) {
        const double r = i == clad_pts - 1 ? a * std::exp(t_max) : a * std::exp(t_max * i / (clad_pts - 1));
        m.radial_profile.r.push_back(r);
        m.radial_profile.fields.push_back(radial_fields(m, r, false));
    }
}

}  // namespace

void WaveguideSpec::validate() const {
    if (!(diameter > 0.0) || !std::isfinite(diameter))
        throw std::invalid_argument("waveguide: diameter must be positive");
    if (!(wavelength > 0.0) || !std::isfinite(wavelength))
        throw std::invalid_argument("waveguide: wavelength must be positive");
    if (!(clad_index >= 1.0)) throw std::invalid_argument("waveguide: cladding index must be >= 1");
    if (!(core_index > clad_index))
        throw std::invalid_argument("waveguide: core index must exceed cladding index");
}

double WaveguideSpec::k0() const noexcept { return 2.0 * kPi / wavelength; }

std::string to_string(ModeFamily family) {
    switch (family) {
        case ModeFamily::HE: return "HE";
        case ModeFamily::EH: return "EH";
        case ModeFamily::TE: return "TE";
        case ModeFamily::TM: return "TM";
    }
    return "?";
}

std::string GuidedMode::name() const {
    return to_string(family) + std::to_string(order) + std::to_string(radial_index);
}

GuidedMode GuidedMode::rotated(double angle) const {
    GuidedMode copy = *this;
    copy.rotation += angle;
    return copy;
}

double v_parameter(const WaveguideSpec& spec) {
    spec.validate();
    return kPi * spec.diameter / spec.wavelength *
           std::sqrt(spec.core_index * spec.core_index - spec.clad_index * spec.clad_index);
}

double characteristic_determinant(const WaveguideSpec& spec, int order, double n_eff) {
    spec.validate();
    if (!(n_eff > spec.clad_index && n_eff < spec.core_index))
        throw std::domain_error("characteristic_determinant: n_eff outside (n2, n1)");
    const double ak0 = spec.radius() * spec.k0();
    const double u = ak0 * std::sqrt(spec.core_index * spec.core_index - n_eff * n_eff);
    const double w = ak0 * std::sqrt(n_eff * n_eff - spec.clad_index * spec.clad_index);
    const double c = std::pow(spec.clad_index / spec.core_index, 2);
    if (order == 0) return te_factor(u, w) * tm_factor(u, w, c);
    return hybrid_determinant(order, u, w, c);
}

std::vector<GuidedMode> solve_modes(const WaveguideSpec& spec, int max_order,
                                    const ModeSolverOptions& options) {
    spec.validate();
    if (max_order < 0 || max_order > numerics::kMaxBesselOrder - 1)
        throw std::invalid_argument("solve_modes: max_order must lie in [0, 9]");
    const double v = v_parameter(spec);
    const double c = std::pow(spec.clad_index / spec.core_index, 2);

    std::vector<GuidedMode> modes;
    for (int nu = 0; nu <= max_order; ++nu) {
        if (nu == 0) {
            auto te = [&](double w) { return te_factor(u_of(v, w), w); };
            auto tm = [&](double w) { return tm_factor(u_of(v, w), w, c); };
            for (double w : roots_in_w(te, v, options)) modes.push_back(make_mode(spec, 0, ModeFamily::TE, w));
            for (double w : roots_in_w(tm, v, options)) modes.push_back(make_mode(spec, 0, ModeFamily::TM, w));
        } else {
            auto det = [&](double w) { return hybrid_determinant(nu, u_of(v, w), w, c); };
            for (double w : roots_in_w(det, v, options))
                modes.push_back(make_mode(spec, nu, classify_hybrid(spec, nu, u_of(v, w), w), w));
        }
    }
    std::sort(modes.begin(), modes.end(),
              [](const GuidedMode& l, const GuidedMode& r) { return l.n_eff > r.n_eff; });
    // Radial indices count upward within each (family, order) in n_eff order.
    for (std::size_t i = 0; i < modes.size(); ++i) {
        int idx = 1;
        for (std::size_t j = 0; j < i; ++j)
            if (modes[j].family == modes[i].family && modes[j].order == modes[i].order) ++idx;
        modes[i].radial_index = idx;
    }
    for (auto& m : modes) fill_radial_profile(m, options.radial_samples);
    return modes;
}

GuidedMode fundamental_mode(const WaveguideSpec& spec, const ModeSolverOptions& options) {
    for (auto& m : solve_modes(spec, 1, options))
        if (m.family == ModeFamily::HE && m.order == 1 && m.radial_index == 1) return m;
    throw NumericalError("fundamental_mode: HE11 not found");
}

FieldSextet mode_profile(const GuidedMode& mode, double r, double phi) {
    if (r < 0.0) throw std::invalid_argument("mode_profile: r must be >= 0");
    const bool core = r <= mode.spec.radius();
    FieldSextet f = radial_fields(mode, r, core);
    const double local = phi - mode.rotation;
    const double cf = mode.order == 0 ? 1.0 : std::cos(mode.order * local);
    const double sf = mode.order == 0 ? 1.0 : std::sin(mode.order * local);
    f.ez *= cf;
    f.er *= cf;
    f.hphi *= cf;
    f.hz *= sf;
    f.ephi *= sf;
    f.hr *= sf;
    return f;
}

CartesianField mode_field_cartesian(const GuidedMode& mode, double x, double y) {
    const double r = std::hypot(x, y);
    const double phi = r > 0.0 ? std::atan2(y, x) : 0.0;
    const FieldSextet f = mode_profile(mode, r, phi);
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    return {f.er * c - f.ephi * s, f.er * s + f.ephi * c, f.ez,
            f.hr * c - f.hphi * s, f.hr * s + f.hphi * c, f.hz};
}

double facet_reflectivity(const GuidedMode& mode, double outside_index) {
    return (mode.n_eff - outside_index) / (mode.n_eff + outside_index);
}

double modal_power(const GuidedMode& mode) {
    const double a = mode.spec.radius();
    const auto core_grid = numerics::composite_gauss_legendre(32, 4, numerics::Interval(0.0, a));
    double p = 0.0;
    for (std::size_t i = 0; i < core_grid.size(); ++i) {
        const double r = core_grid.nodes[i];
        p += core_grid.weights[i] * r * flux_density(radial_fields(mode, r, true), mode.order);
    }
    // Cladding in t = ln(r / a); covers both the K-tail and long 1/r tails.
    const double t_max = std::log1p(60.0 / std::max(mode.w, 1e-12));
    const auto clad_grid = numerics::composite_gauss_legendre(24, 32, numerics::Interval(0.0, t_max));
    for (std::size_t i = 0; i < clad_grid.size(); ++i) {
        const double r = a * std::exp(clad_grid.nodes[i]);
        p += clad_grid.weights[i] * r * r * flux_density(radial_fields(mode, r, false), mode.order);
    }
    return p;
}

double profile_power(const GuidedMode& mode) {
    const auto& prof = mode.radial_profile;
    if (prof.r.size() < 4) throw std::invalid_argument("profile_power: radial profile not sampled");
    // The interface node is stored twice; split there.
    std::size_t split = 1;
    while (split < prof.r.size() && prof.r[split] != prof.r[split - 1]) ++split;
    std::vector<double> core, clad;
    for (std::size_t i = 0; i < prof.r.size(); ++i) {
        const double r = prof.r[i];
        const double s = flux_density(prof.fields[i], mode.order);
        if (i < split)
            core.push_back(r * s);
        else
            clad.push_back(r * r * s);  // dr = r dt
    }
    const double a = mode.spec.radius();
    const double h_core = a / (core.size() - 1);
    const double h_clad = std::log(prof.r.back() / a) / (clad.size() - 1);
    return simpson(core, h_core) + simpson(clad, h_clad);
}

void write_profile_csv(std::ostream& out, const GuidedMode& mode, std::span<const double> phis) {
    out << "r_m,phi_rad,er_re,er_im,ephi_re,ephi_im,ez_re,ez_im,hr_re,hr_im,hphi_re,hphi_im,hz_re,hz_im\n";
    out.precision(12);
    for (double phi : phis) {
        for (std::size_t i = 0; i < mode.radial_profile.r.size(); ++i) {
            const double r = mode.radial_profile.r[i];
            const FieldSextet f = mode_profile(mode, r, phi);
            out << r << ',' << phi;
            for (const cplx& v : {f.er, f.ephi, f.ez, f.hr, f.hphi, f.hz}) out << ',' << v.real() << ',' << v.imag();
            out << '\n';
        }
    }
}

}  // namespace nwem::waveguide
