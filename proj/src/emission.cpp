#include "nwem/emission.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "nwem/constants.hpp"

namespace nwem::emission {

namespace {

using fdtd::FaceData;
using fdtd::FaceSamples;
using fdtd::MonitorData;
using std::numbers::pi;

const FaceData& z_plane_face(const MonitorData& m, const char* what) {
    if (m.kind != fdtd::MonitorKind::plane || m.faces.size() != 1 || m.faces[0].axis != 2)
        throw AnalysisError(std::string(what) + ": monitor \"" + m.name + "\" is not a z-normal plane");
    return m.faces[0];
}

double wavelength_of(const waveguide::GuidedMode& mode) { return mode.spec.wavelength; }

// Sum over set a of w e_x conj(h_y) minus set b of w e_y conj(h_x), with the
// field values supplied per point by the callbacks.
template <typename A, typename B>
cplx cross_sum(const FaceData& f, A set_a, B set_b) {
    cplx acc = 0.0;
    const FaceSamples& a = f.a;
    for (std::size_t iu = 0; iu < a.u.size(); ++iu)
        for (std::size_t iv = 0; iv < a.v.size(); ++iv)
            acc += a.wu[iu] * a.wv[iv] * set_a(iu * a.v.size() + iv, a.u[iu], a.v[iv]);
    const FaceSamples& b = f.b;
    for (std::size_t iu = 0; iu < b.u.size(); ++iu)
        for (std::size_t iv = 0; iv < b.v.size(); ++iv)
            acc -= b.wu[iu] * b.wv[iv] * set_b(iu * b.v.size() + iv, b.u[iu], b.v[iv]);
    return acc;
}

std::string fmt(double v) {
    if (!std::isfinite(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace

// ---- guided-mode coupling ------------------------------------------------

void fill_face_with_mode(FaceData& face, std::size_t w, const waveguide::GuidedMode& mode, double h_span,
                         double backward_amplitude) {
    if (face.axis != 2) throw AnalysisError("mode fields can only be placed on a z-normal face");
    const double c = std::cos(0.5 * mode.beta() * h_span);
    const double fe = 1.0 + backward_amplitude, fh = 1.0 - backward_amplitude;
    for (int set = 0; set < 2; ++set) {
        FaceSamples& s = set == 0 ? face.a : face.b;
        const std::size_t n = s.u.size() * s.v.size();
        if (s.e.size() <= w) s.e.resize(w + 1, std::vector<cplx>(n));
        if (s.h.size() <= w) s.h.resize(w + 1, std::vector<cplx>(n));
        for (std::size_t iu = 0; iu < s.u.size(); ++iu)
            for (std::size_t iv = 0; iv < s.v.size(); ++iv) {
                const auto f = waveguide::mode_field_cartesian(mode, s.u[iu], s.v[iv]);
                const std::size_t p = iu * s.v.size() + iv;
                s.e[w][p] = fe * (set == 0 ? f.ex : f.ey);
                s.h[w][p] = fh * c * (set == 0 ? f.hy : f.hx);
            }
    }
}

ModeAmplitudes mode_amplitudes(const FaceData& face, std::size_t w, const waveguide::GuidedMode& mode,
                               double h_span) {
    if (face.axis != 2) throw AnalysisError("mode projection needs a z-normal face");
    // Reference mode sampled like the monitor: same points, same H averaging.
    FaceData ref;
    ref.axis = 2;
    ref.a.u = face.a.u;
    ref.a.v = face.a.v;
    ref.b.u = face.b.u;
    ref.b.v = face.b.v;
    fill_face_with_mode(ref, 0, mode, h_span);
    const auto& ea = ref.a.e[0];
    const auto& ha = ref.a.h[0];
    const auto& eb = ref.b.e[0];
    const auto& hb = ref.b.h[0];
    const auto& Ea = face.a.e[w];
    const auto& Ha = face.a.h[w];
    const auto& Eb = face.b.e[w];
    const auto& Hb = face.b.h[w];

    const cplx n_c = cross_sum(
        face, [&](std::size_t p, double, double) { return ea[p] * std::conj(ha[p]); },
        [&](std::size_t p, double, double) { return eb[p] * std::conj(hb[p]); });
    const cplx i1 = cross_sum(
        face, [&](std::size_t p, double, double) { return Ea[p] * std::conj(ha[p]); },
        [&](std::size_t p, double, double) { return Eb[p] * std::conj(hb[p]); });
    const cplx i2 = cross_sum(
        face, [&](std::size_t p, double, double) { return std::conj(ea[p]) * Ha[p]; },
        [&](std::size_t p, double, double) { return std::conj(eb[p]) * Hb[p]; });
    if (!(std::abs(n_c) > 0.0)) throw AnalysisError("mode has no overlap with the monitor plane");
    // E = (a+ + a-) e, H = (a+ - a-) h for the guided part.
    const cplx sum = i1 / n_c;
    const cplx diff = i2 / std::conj(n_c);
    ModeAmplitudes out;
    out.forward = 0.5 * (sum + diff);
    out.backward = 0.5 * (sum - diff);
    out.mode_power = 0.5 * n_c.real();
    return out;
}

AlphaResult coupling_alpha(const fdtd::RunResult& run, const fdtd::SimulationConfig& config,
                           const waveguide::GuidedMode& mode, double wavelength, const std::string& lower_plane,
                           const std::string& upper_plane, double total_power) {
    if (std::abs(wavelength_of(mode) - wavelength) > 1e-9 * wavelength)
        throw AnalysisError("coupling_alpha: mode was solved at a different wavelength");
    if (!(total_power > 0.0)) throw AnalysisError("coupling_alpha: total power must be positive");
    const auto& lo = z_plane_face(run.monitor(lower_plane), "coupling_alpha");
    const auto& hi = z_plane_face(run.monitor(upper_plane), "coupling_alpha");
    const auto& geo = config.geometry;
    const double zd = config.source.position.z;
    const double gap = 0.5 * wavelength;
    auto check = [&](double z, const std::string& name) {
        if (std::abs(z - zd) < gap - 1e-12)
            throw AnalysisError("coupling_alpha: plane \"" + name + "\" is closer than lambda/2 to the dipole");
        if (!geo.infinite_wire) {
            if (z < gap - 1e-12 || z > geo.wire_height - gap + 1e-12)
                throw AnalysisError("coupling_alpha: plane \"" + name +
                                    "\" must cut the wire at least lambda/2 from both facets");
        }
    };
    check(lo.coordinate, lower_plane);
    check(hi.coordinate, upper_plane);
    if (!(lo.coordinate < zd && hi.coordinate > zd))
        throw AnalysisError("coupling_alpha: planes must lie below and above the dipole");

    const std::size_t w = run.wavelength_index(wavelength);
    const double dx = config.cell_size;
    AlphaResult r;
    // Both degenerate partners of HE11.
    for (const auto& m : {mode, mode.rotated(0.5 * pi)}) {
        r.upward += mode_amplitudes(hi, w, m, dx).forward_power();
        r.downward += mode_amplitudes(lo, w, m, dx).backward_power();
    }
    r.alpha = (r.upward + r.downward) / total_power;
    return r;
}

// ---- far field -----------------------------------------------------------

namespace {

struct Aperture {
    const std::vector<double>* x;
    const std::vector<double>* y;
    const std::vector<cplx>* f;
};

cplx angular_spectrum(const Aperture& a, double kx, double ky, std::vector<cplx>& py) {
    const auto& xs = *a.x;
    const auto& ys = *a.y;
    const auto& f = *a.f;
    py.resize(ys.size());
    for (std::size_t j = 0; j < ys.size(); ++j) py[j] = std::polar(1.0, -ky * ys[j]);
    cplx total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const cplx* row = f.data() + i * ys.size();
        cplx acc = 0.0;
        for (std::size_t j = 0; j < ys.size(); ++j) acc += row[j] * py[j];
        total += acc * std::polar(1.0, -kx * xs[i]);
    }
    return total;
}

}  // namespace

double FarFieldMap::power_density(double th, double ph) const {
    const double st = std::sin(th), ct = std::cos(th);
    const double kx = k0_ * st * std::cos(ph), ky = k0_ * st * std::sin(ph);
    thread_local std::vector<cplx> scratch;
    const cplx fx = angular_spectrum({&xa_, &ya_, &ex_}, kx, ky, scratch);
    const cplx fy = angular_spectrum({&xb_, &yb_, &ey_}, kx, ky, scratch);
    // |E_z|^2 cos^2 = |k_t . E_t|^2 / k0^2 from the transversality of each plane wave.
    const cplx kt = st * (std::cos(ph) * fx + std::sin(ph) * fy);
    const double s2 = ct * ct * (std::norm(fx) + std::norm(fy)) + std::norm(kt);
    return k0_ * k0_ / (8.0 * pi * pi * constants::eta0) * s2;
}

double FarFieldMap::cone_power(double theta_max) const {
    theta_max = std::clamp(theta_max, 0.0, 0.5 * pi);
    constexpr int panels = 16, nodes = 6, nphi = 96;
    const double width = 0.5 * pi / panels;
    double total = 0.0;
    auto ring = [&](double th) {
        double s = 0.0;
        for (int k = 0; k < nphi; ++k) s += power_density(th, 2.0 * pi * k / nphi);
        return s * (2.0 * pi / nphi) * std::sin(th);
    };
    for (int p = 0; p < panels; ++p) {
        const double a = p * width;
        if (a >= theta_max) break;
        const double b = std::min(theta_max, a + width);
        const auto q = numerics::gauss_legendre(nodes, {a, b});
        for (std::size_t i = 0; i < q.size(); ++i) total += q.weights[i] * ring(q.nodes[i]);
    }
    return total;
}

FarFieldMap far_field(const MonitorData& plane, double wavelength, const FarFieldOptions& opt) {
    const auto& face = z_plane_face(plane, "far_field");
    std::size_t w = plane.wavelengths.size();
    for (std::size_t i = 0; i < plane.wavelengths.size(); ++i)
        if (std::abs(plane.wavelengths[i] - wavelength) <= 1e-9 * wavelength) w = i;
    if (w == plane.wavelengths.size()) throw AnalysisError("far_field: wavelength not recorded by " + plane.name);
    if (opt.theta_samples < 2 || opt.phi_samples < 1) throw AnalysisError("far_field: table needs samples");

    // Rim check on the aperture.
    double peak = 0.0, rim = 0.0;
    for (const FaceSamples* s : {&face.a, &face.b}) {
        const std::size_t nu = s->u.size(), nv = s->v.size();
        for (std::size_t iu = 0; iu < nu; ++iu)
            for (std::size_t iv = 0; iv < nv; ++iv) {
                const double v = std::norm(s->e[w][iu * nv + iv]);
                peak = std::max(peak, v);
                if (iu == 0 || iv == 0 || iu + 1 == nu || iv + 1 == nv) rim = std::max(rim, v);
            }
    }
    if (!(peak > 0.0)) throw AnalysisError("far_field: plane \"" + plane.name + "\" recorded no field");
    if (rim > opt.edge_tolerance * peak) {
        std::ostringstream os;
        os << "far_field: plane \"" << plane.name << "\" is too small, rim intensity is " << rim / peak
           << " of the peak (limit " << opt.edge_tolerance << ")";
        throw AnalysisError(os.str());
    }

    FarFieldMap ff;
    ff.wavelength = wavelength;
    ff.k0_ = 2.0 * pi / wavelength;
    ff.plane_flux = fdtd::face_flux(face, w);
    ff.rim_ratio = rim / peak;
    ff.xa_ = face.a.u;
    ff.ya_ = face.a.v;
    ff.xb_ = face.b.u;
    ff.yb_ = face.b.v;
    for (int set = 0; set < 2; ++set) {
        const FaceSamples& s = set == 0 ? face.a : face.b;
        auto& dst = set == 0 ? ff.ex_ : ff.ey_;
        dst.resize(s.u.size() * s.v.size());
        for (std::size_t iu = 0; iu < s.u.size(); ++iu)
            for (std::size_t iv = 0; iv < s.v.size(); ++iv) {
                const std::size_t p = iu * s.v.size() + iv;
                dst[p] = s.wu[iu] * s.wv[iv] * s.e[w][p];
            }
    }
    for (int i = 0; i < opt.theta_samples; ++i) ff.theta.push_back(0.5 * pi * i / (opt.theta_samples - 1));
    for (int k = 0; k < opt.phi_samples; ++k) ff.phi.push_back(2.0 * pi * k / opt.phi_samples);
    ff.table.reserve(ff.theta.size() * ff.phi.size());
    for (double th : ff.theta)
        for (double ph : ff.phi) ff.table.push_back(ff.power_density(th, ph));
    return ff;
}

double collection_eta(const FarFieldMap& ff, double na, double total_power) {
    if (!(na > 0.0 && na <= 1.0)) throw std::invalid_argument("collection_eta: NA must lie in (0, 1]");
    if (!(total_power > 0.0)) throw std::invalid_argument("collection_eta: total power must be positive");
    return ff.cone_power(std::asin(na)) / total_power;
}

double dipole_power_density(cplx il, double wavelength, const fdtd::Vec3& d, double th, double ph) {
    const double k0 = 2.0 * pi / wavelength;
    const double r[3] = {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
    const double dot = d.x * r[0] + d.y * r[1] + d.z * r[2];
    const double dd = d.x * d.x + d.y * d.y + d.z * d.z;
    return constants::eta0 * k0 * k0 * std::norm(il) / (32.0 * pi * pi) * (dd - dot * dot);
}

// ---- enhancement and position dependence ---------------------------------

double enhancement_factor(double structure_power, double bulk_power) {
    if (!(bulk_power > 0.0)) throw std::invalid_argument("enhancement_factor: bulk power must be positive");
    return structure_power / bulk_power;
}

std::vector<FabryPerotPoint> fabry_perot_profile(double n_eff, double wavelength, double r_b, double r_t,
                                                 double h, const std::vector<double>& positions,
                                                 const FabryPerotParams& prm) {
    const double beta = 2.0 * pi * n_eff / wavelength;
    const cplx denom = 1.0 - r_b * r_t * std::polar(1.0, 2.0 * beta * h);
    std::vector<FabryPerotPoint> out;
    out.reserve(positions.size());
    for (double z : positions) {
        const cplx g = (1.0 + r_b * std::polar(1.0, 2.0 * beta * z)) * (1.0 + r_t * std::polar(1.0, 2.0 * beta * (h - z))) /
                       denom;
        out.push_back({z, prm.baseline * ((1.0 - prm.guided_fraction) + prm.guided_fraction * g.real())});
    }
    return out;
}

std::vector<FabryPerotPoint> fabry_perot_profile(const waveguide::WaveguideSpec& spec, double h,
                                                 const std::vector<double>& positions, const FabryPerotParams& prm) {
    const auto mode = waveguide::fundamental_mode(spec);
    const double r_t = waveguide::facet_reflectivity(mode, spec.clad_index);
    const double r_b = waveguide::facet_reflectivity(mode, prm.substrate_index);
    return fabry_perot_profile(mode.n_eff, spec.wavelength, r_b, r_t, h, positions, prm);
}

namespace {

// Linear least squares of [1, cos, sin] at one trial period; returns the
// residual sum of squares and fills the coefficients.
double fit_at(const std::vector<double>& z, const std::vector<double>& y, double period, double coef[3]) {
    double a[3][3] = {}, b[3] = {};
    const double k = 2.0 * pi / period;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double f[3] = {1.0, std::cos(k * z[i]), std::sin(k * z[i])};
        for (int r = 0; r < 3; ++r) {
            b[r] += f[r] * y[i];
            for (int c = 0; c < 3; ++c) a[r][c] += f[r] * f[c];
        }
    }
    // Gaussian elimination with partial pivoting.
    int idx[3] = {0, 1, 2};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(a[idx[r]][col]) > std::abs(a[idx[piv]][col])) piv = r;
        std::swap(idx[col], idx[piv]);
        const double d = a[idx[col]][col];
        if (std::abs(d) < 1e-300) return std::numeric_limits<double>::infinity();
        for (int r = col + 1; r < 3; ++r) {
            const double m = a[idx[r]][col] / d;
            for (int c = col; c < 3; ++c) a[idx[r]][c] -= m * a[idx[col]][c];
            b[idx[r]] -= m * b[idx[col]];
        }
    }
    for (int col = 2; col >= 0; --col) {
        double s = b[idx[col]];
        for (int c = col + 1; c < 3; ++c) s -= a[idx[col]][c] * coef[c];
        coef[col] = s / a[idx[col]][col];
    }
    double rss = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double e = y[i] - coef[0] - coef[1] * std::cos(k * z[i]) - coef[2] * std::sin(k * z[i]);
        rss += e * e;
    }
    return rss;
}

}  // namespace

SinusoidFit fit_sinusoid(const std::vector<double>& z, const std::vector<double>& y, double pmin, double pmax) {
    if (z.size() != y.size() || z.size() < 4) throw AnalysisError("fit_sinusoid: need at least 4 samples");
    if (!(pmin > 0.0 && pmax > pmin)) throw AnalysisError("fit_sinusoid: bad period range");
    constexpr int scan = 4000;
    double coef[3];
    double best = std::numeric_limits<double>::infinity(), best_p = pmin;
    for (int i = 0; i <= scan; ++i) {
        const double p = pmin + (pmax - pmin) * i / scan;
        const double r = fit_at(z, y, p, coef);
        if (r < best) {
            best = r;
            best_p = p;
        }
    }
    // Golden-section refinement around the best scan point.
    const double step = (pmax - pmin) / scan;
    double lo = std::max(pmin, best_p - step), hi = std::min(pmax, best_p + step);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100; ++it) {
        const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
        if (fit_at(z, y, m1, coef) < fit_at(z, y, m2, coef))
            hi = m2;
        else
            lo = m1;
    }
    SinusoidFit f;
    f.period = 0.5 * (lo + hi);
    const double rss = fit_at(z, y, f.period, coef);
    f.mean = coef[0];
    f.amplitude = std::hypot(coef[1], coef[2]);
    f.residual_rms = std::sqrt(rss / z.size());
    return f;
}

// ---- figure of merit -----------------------------------------------------

EmitterSpectrum::EmitterSpectrum(std::vector<double> wl, std::vector<double> wt)
    : wavelengths_(std::move(wl)), weights_(std::move(wt)) {
    if (wavelengths_.size() != weights_.size()) throw std::invalid_argument("spectrum: sample count mismatch");
    if (wavelengths_.size() < 2) throw std::invalid_argument("spectrum: at least 2 samples are required");
    double total = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        if (!std::isfinite(weights_[i]) || weights_[i] < 0.0)
            throw std::invalid_argument("spectrum: weights must be finite and non-negative");
        if (!(wavelengths_[i] > 0.0) || (i > 0 && !(wavelengths_[i] > wavelengths_[i - 1])))
            throw std::invalid_argument("spectrum: wavelengths must be positive and strictly increasing");
        total += weights_[i];
    }
    if (!(total > 0.0)) throw std::invalid_argument("spectrum: all weights are zero");
}

EmitterSpectrum EmitterSpectrum::flat(double lo, double hi) { return EmitterSpectrum({lo, hi}, {1.0, 1.0}); }

EmitterSpectrum EmitterSpectrum::parse_csv(std::istream& in) {
    std::string line;
    int lineno = 0;
    std::vector<double> wl, wt;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "wavelength_nm,weight")
                throw std::invalid_argument("spectrum line " + std::to_string(lineno) +
                                            ": expected header \"wavelength_nm,weight\"");
            header = true;
            continue;
        }
        const auto comma = line.find(',');
        try {
            if (comma == std::string::npos) throw std::invalid_argument("missing comma");
            std::size_t n1 = 0, n2 = 0;
            const std::string a = line.substr(0, comma), b = line.substr(comma + 1);
            const double l = std::stod(a, &n1), w = std::stod(b, &n2);
            if (n1 != a.size() || n2 != b.size()) throw std::invalid_argument("trailing characters");
            wl.push_back(l * 1e-9);
            wt.push_back(w);
        } catch (const std::exception& e) {
            throw std::invalid_argument("spectrum line " + std::to_string(lineno) + ": malformed row \"" + line +
                                        "\"");
        }
    }
    return EmitterSpectrum(std::move(wl), std::move(wt));
}

EmitterSpectrum EmitterSpectrum::from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open spectrum file " + path);
    return parse_csv(in);
}

double EmitterSpectrum::operator()(double l) const {
    const double eps = 1e-12 * wavelengths_.back();
    if (l < wavelengths_.front() - eps || l > wavelengths_.back() + eps) return 0.0;
    auto it = std::upper_bound(wavelengths_.begin(), wavelengths_.end(), l);
    if (it == wavelengths_.begin()) return weights_.front();
    if (it == wavelengths_.end()) return weights_.back();
    const std::size_t i = std::size_t(it - wavelengths_.begin());
    const double t = (l - wavelengths_[i - 1]) / (wavelengths_[i] - wavelengths_[i - 1]);
    return weights_[i - 1] + t * (weights_[i] - weights_[i - 1]);
}

EmitterSpectrum EmitterSpectrum::scaled(double c) const {
    auto w = weights_;
    for (auto& v : w) v *= c;
    return EmitterSpectrum(wavelengths_, std::move(w));
}

ZQuadrature default_z_quadrature(int lambda_nodes, int sigma_nodes) {
    if (sigma_nodes < 3) throw std::invalid_argument("sigma quadrature needs at least 3 nodes");
    ZQuadrature q;
    q.lambda = numerics::gauss_legendre(lambda_nodes, {kBandMin, kBandMax});
    for (int i = 0; i < sigma_nodes; ++i) {
        q.sigma.nodes.push_back(2.0 * pi * i / sigma_nodes);
        q.sigma.weights.push_back(2.0 * pi / sigma_nodes);
    }
    return q;
}

namespace {

bool same_wavelength(double a, double b) { return std::abs(a - b) <= 1e-9 * b; }

const EmissionReport* find_report(const std::vector<EmissionReport>& reports, double l, double s) {
    for (const auto& r : reports)
        if (same_wavelength(r.wavelength, l) && std::abs(r.sigma - s) <= 1e-9) return &r;
    return nullptr;
}

double e_eta(const EmissionReport& r) {
    if (!std::isfinite(r.enhancement) || !std::isfinite(r.eta)) {
        std::ostringstream os;
        os << "report at " << r.wavelength * 1e9 << " nm, sigma " << r.sigma << " lacks E or eta";
        throw GridCoverageError(os.str());
    }
    return r.enhancement * r.eta;
}

[[noreturn]] void missing(double l, const char* what) {
    std::ostringstream os;
    os.precision(10);
    os << "figure of merit: no " << what << " report at " << l * 1e9 << " nm";
    throw GridCoverageError(os.str());
}

}  // namespace

double figure_of_merit_z(const std::vector<EmissionReport>& reports, const EmitterSpectrum& spectrum,
                         const ZQuadrature& q) {
    const double norm = numerics::integrate_1d(spectrum, q.lambda);
    if (!(norm > 0.0)) throw AnalysisError("figure of merit: spectrum has no weight on the quadrature nodes");
    const double num = numerics::integrate_1d(
        [&](double l) {
            const double inner = numerics::integrate_1d(
                [&](double s) {
                    const EmissionReport* r = find_report(reports, l, s);
                    if (!r) {
                        std::ostringstream os;
                        os.precision(10);
                        os << "figure of merit: no report at " << l * 1e9 << " nm, sigma = " << s;
                        throw GridCoverageError(os.str());
                    }
                    return e_eta(*r);
                },
                q.sigma);
            return spectrum(l) * inner;
        },
        q.lambda);
    return num / (2.0 * pi * norm);
}

std::vector<EmissionReport> combine_polarizations(const std::vector<EmissionReport>& reports,
                                                  const numerics::QuadratureGrid& sigma) {
    std::vector<double> lambdas;
    for (const auto& r : reports)
        if (std::none_of(lambdas.begin(), lambdas.end(), [&](double l) { return same_wavelength(r.wavelength, l); }))
            lambdas.push_back(r.wavelength);
    std::sort(lambdas.begin(), lambdas.end());
    std::vector<EmissionReport> out;
    for (double l : lambdas) {
        const EmissionReport* s = find_report(reports, l, 0.0);
        const EmissionReport* p = find_report(reports, l, 0.5 * pi);
        if (!s) missing(l, "s-polarized");
        if (!p) missing(l, "p-polarized");
        const double cs = e_eta(*s), cp = e_eta(*p);
        for (double sg : sigma.nodes) {
            const double c2 = std::cos(sg) * std::cos(sg), s2 = std::sin(sg) * std::sin(sg);
            EmissionReport r = *s;
            r.far_field.reset();
            r.sigma = sg;
            r.enhancement = c2 * s->enhancement + s2 * p->enhancement;
            r.eta = r.enhancement > 0.0 ? (c2 * cs + s2 * cp) / r.enhancement : 0.0;
            r.alpha = std::numeric_limits<double>::quiet_NaN();
            r.total_power = c2 * s->total_power + s2 * p->total_power;
            r.bulk_power = c2 * s->bulk_power + s2 * p->bulk_power;
            r.box_power = c2 * s->box_power + s2 * p->box_power;
            r.upward_power = c2 * s->upward_power + s2 * p->upward_power;
            r.far_field_power = c2 * s->far_field_power + s2 * p->far_field_power;
            r.rim_ratio = std::max(s->rim_ratio, p->rim_ratio);
            out.push_back(std::move(r));
        }
    }
    return out;
}

double figure_of_merit_z_sp(const std::vector<EmissionReport>& reports, const EmitterSpectrum& spectrum,
                            const numerics::QuadratureGrid& lambda) {
    const double norm = numerics::integrate_1d(spectrum, lambda);
    if (!(norm > 0.0)) throw AnalysisError("figure of merit: spectrum has no weight on the quadrature nodes");
    const double num = numerics::integrate_1d(
        [&](double l) {
            const EmissionReport* s = find_report(reports, l, 0.0);
            const EmissionReport* p = find_report(reports, l, 0.5 * pi);
            if (!s) missing(l, "s-polarized");
            if (!p) missing(l, "p-polarized");
            return spectrum(l) * 0.5 * (e_eta(*s) + e_eta(*p));
        },
        lambda);
    return num / norm;
}

// ---- full analysis of one run --------------------------------------------

Analysis analyze(const fdtd::RunResult& run, const fdtd::SimulationConfig& cfg, const AnalysisSpec& spec) {
    Analysis out;
    std::vector<double> bulk;
    if (spec.reference_index > 0.0) bulk = fdtd::bulk_reference_power(cfg, spec.reference_index);
    const auto pol = cfg.source.polarization;
    for (std::size_t w = 0; w < run.wavelengths.size(); ++w) {
        const double l = run.wavelengths[w];
        EmissionReport r;
        r.label = spec.label;
        r.wavelength = l;
        r.polarization = pol;
        r.sigma = pol == fdtd::Polarization::s ? 0.0 : 0.5 * pi;
        r.total_power = run.source_power[w];
        if (!(r.total_power > 0.0)) throw AnalysisError("source delivered no power; check the source spectrum");
        if (!spec.box_monitor.empty()) {
            r.box_power = fdtd::flux(run.monitor(spec.box_monitor), l);
            const double bal = r.box_power / r.total_power - 1.0;
            if (std::abs(bal) >= std::abs(out.audit.box_balance)) out.audit.box_balance = bal;
        }
        if (!spec.far_field_monitor.empty()) {
            FarFieldMap ff = far_field(run.monitor(spec.far_field_monitor), l, spec.far_field_options);
            r.upward_power = ff.plane_flux;
            r.far_field_power = ff.hemisphere_power();
            r.rim_ratio = ff.rim_ratio;
            r.eta = collection_eta(ff, spec.numerical_aperture, r.total_power);
            const double bal = r.far_field_power / r.upward_power - 1.0;
            if (std::abs(bal) >= std::abs(out.audit.far_field_balance)) out.audit.far_field_balance = bal;
            r.far_field = std::move(ff);
        }
        if (!spec.mode_lower.empty() && !spec.mode_upper.empty()) {
            const auto& g = cfg.geometry;
            waveguide::WaveguideSpec ws{g.wire_diameter, g.wire_index, g.background_index, l};
            const auto mode = waveguide::fundamental_mode(ws);
            r.alpha = coupling_alpha(run, cfg, mode, l, spec.mode_lower, spec.mode_upper, r.total_power).alpha;
        }
        if (!bulk.empty()) {
            r.bulk_power = bulk[w];
            r.enhancement = enhancement_factor(r.total_power, r.bulk_power);
        }
        out.reports.push_back(std::move(r));
    }
    return out;
}

// ---- export ---------------------------------------------------------------

void write_reports_csv(std::ostream& out, const std::vector<EmissionReport>& reports) {
    out << "label,wavelength_nm,polarization,sigma_rad,alpha,eta,enhancement,total_power_W,bulk_power_W,"
           "box_power_W,upward_power_W,far_field_power_W,rim_ratio\n";
    for (const auto& r : reports)
        out << r.label << ',' << fmt(r.wavelength * 1e9) << ',' << fdtd::to_string(r.polarization) << ','
            << fmt(r.sigma) << ',' << fmt(r.alpha) << ',' << fmt(r.eta) << ',' << fmt(r.enhancement) << ','
            << fmt(r.total_power) << ',' << fmt(r.bulk_power) << ',' << fmt(r.box_power) << ','
            << fmt(r.upward_power) << ',' << fmt(r.far_field_power) << ',' << fmt(r.rim_ratio) << '\n';
}

namespace {

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::string reports_to_json(const std::vector<EmissionReport>& reports, const Audit* audit) {
    nlohmann::json j;
    auto arr = nlohmann::json::array();
    for (const auto& r : reports)
        arr.push_back({{"label", r.label},
                       {"wavelength_nm", r.wavelength * 1e9},
                       {"polarization", fdtd::to_string(r.polarization)},
                       {"sigma_rad", r.sigma},
                       {"alpha", num(r.alpha)},
                       {"eta", num(r.eta)},
                       {"enhancement", num(r.enhancement)},
                       {"total_power_W", r.total_power},
                       {"bulk_power_W", r.bulk_power},
                       {"box_power_W", r.box_power},
                       {"upward_power_W", r.upward_power},
                       {"far_field_power_W", num(r.far_field_power)},
                       {"rim_ratio", num(r.rim_ratio)}});
    j["reports"] = arr;
    if (audit) j["audit"] = {{"box_balance", audit->box_balance}, {"far_field_balance", audit->far_field_balance}};
    return j.dump(2);
}

void write_far_field_csv(std::ostream& out, const FarFieldMap& ff) {
    out << "theta_deg,phi_deg,dP_dOmega_W_per_sr\n";
    for (std::size_t i = 0; i < ff.theta.size(); ++i)
        for (std::size_t k = 0; k < ff.phi.size(); ++k)
            out << fmt(ff.theta[i] * 180.0 / pi) << ',' << fmt(ff.phi[k] * 180.0 / pi) << ','
                << fmt(ff.table[i * ff.phi.size() + k]) << '\n';
}

std::string far_field_to_json(const FarFieldMap& ff) {
    nlohmann::json j;
    j["wavelength_nm"] = ff.wavelength * 1e9;
    j["plane_flux_W"] = ff.plane_flux;
    j["hemisphere_power_W"] = ff.hemisphere_power();
    auto th = nlohmann::json::array(), ph = nlohmann::json::array();
    for (double t : ff.theta) th.push_back(t * 180.0 / pi);
    for (double p : ff.phi) ph.push_back(p * 180.0 / pi);
    j["theta_deg"] = th;
    j["phi_deg"] = ph;
    j["dP_dOmega_W_per_sr"] = ff.table;
    return j.dump();
}

}  // namespace nwem::emission
