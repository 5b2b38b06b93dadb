#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nwem/constants.hpp"
#include "nwem/fdtd.hpp"

namespace nwem::fdtd {

namespace {

constexpr int kPmlGrading = 3;

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

std::string describe(const char* what, double value) {
    std::ostringstream os;
    os << what << " (got " << value << ")";
    return os.str();
}

// Volume-averaged permittivity of the cube of side dx centred on p. A 3x3x3
// probe (faces, edges, centre) decides whether the cube is uniform; mixed
// cubes are averaged on an n^3 midpoint lattice.
double smoothed_permittivity(const SceneGeometry& g, const Vec3& p, double dx, int n) {
    const double first = g.permittivity(p.x - 0.5 * dx, p.y - 0.5 * dx, p.z - 0.5 * dx);
    bool uniform = true;
    for (int a = 0; a < 3 && uniform; ++a)
        for (int b = 0; b < 3 && uniform; ++b)
            for (int c = 0; c < 3 && uniform; ++c) {
                const double v = g.permittivity(p.x + (0.5 * a - 0.5) * dx, p.y + (0.5 * b - 0.5) * dx,
                                                p.z + (0.5 * c - 0.5) * dx);
                uniform = v == first;
            }
    if (uniform) return first;
    double sum = 0.0;
    for (int a = 0; a < n; ++a) {
        const double x = p.x + ((a + 0.5) / n - 0.5) * dx;
        for (int b = 0; b < n; ++b) {
            const double y = p.y + ((b + 0.5) / n - 0.5) * dx;
            for (int c = 0; c < n; ++c) sum += g.permittivity(x, y, p.z + ((c + 0.5) / n - 0.5) * dx);
        }
    }
    return sum / (double(n) * n * n);
}

Grid make_grid(const SimulationConfig& c) {
    Grid g;
    g.dx = c.cell_size;
    // Even lateral counts keep the wire axis on a node.
    g.nx = 2 * static_cast<int>(std::lround(0.5 * c.domain_extent.x / g.dx));
    g.ny = 2 * static_cast<int>(std::lround(0.5 * c.domain_extent.y / g.dx));
    g.nz = static_cast<int>(std::lround(c.domain_extent.z / g.dx));
    g.origin = {-0.5 * g.nx * g.dx, -0.5 * g.ny * g.dx, c.domain_z_min};
    return g;
}

// Interior (non-PML) bounds along an axis, as coordinates.
std::pair<double, double> interior(const Grid& g, int axis, int pml) {
    return {g.coord(axis, pml), g.coord(axis, g.n(axis) - pml)};
}

void check_inside(const Grid& g, int pml, const Vec3& lo, const Vec3& hi, const std::string& what) {
    const double margin = 2.0 * g.dx - 1e-6 * g.dx;
    for (int a = 0; a < 3; ++a) {
        auto [in_lo, in_hi] = interior(g, a, pml);
        if (lo[a] < in_lo + margin || hi[a] > in_hi - margin)
            throw ConfigError(what + " must lie at least 2 cells inside the absorbing layer");
    }
}

}  // namespace

std::string to_string(Polarization p) { return p == Polarization::s ? "s" : "p"; }

Polarization polarization_from_string(const std::string& s) {
    if (s == "s") return Polarization::s;
    if (s == "p") return Polarization::p;
    throw ConfigError("polarization must be \"s\" or \"p\" (got \"" + s + "\")");
}

void SceneGeometry::validate() const {
    if (!(wire_index >= 1.0) || !(substrate_index >= 1.0) || !(background_index >= 1.0))
        throw ConfigError("geometry: refractive indices must be >= 1");
    if (!(wire_height >= 0.0) || !std::isfinite(wire_height)) throw ConfigError("geometry: wire_height must be >= 0");
    if ((wire_height > 0.0 || infinite_wire) && !finite_positive(wire_diameter))
        throw ConfigError("geometry: wire_diameter must be positive");
}

double SceneGeometry::max_index() const {
    double n = background_index;
    if (substrate && !infinite_wire) n = std::max(n, substrate_index);
    if (wire_height > 0.0 || infinite_wire) n = std::max(n, wire_index);
    return n;
}

double SceneGeometry::permittivity(double x, double y, double z) const {
    const double r2 = x * x + y * y;
    const double rad = 0.5 * wire_diameter;
    if (infinite_wire) return r2 < rad * rad ? wire_index * wire_index : background_index * background_index;
    if (substrate && z < 0.0) return substrate_index * substrate_index;
    if (wire_height > 0.0 && z >= 0.0 && z < wire_height && r2 < rad * rad) return wire_index * wire_index;
    return background_index * background_index;
}

void DipoleSource::validate() const {
    const double norm = std::sqrt(orientation.x * orientation.x + orientation.y * orientation.y +
                                  orientation.z * orientation.z);
    if (std::abs(norm - 1.0) > 1e-9) throw ConfigError(describe("source: orientation must be a unit vector", norm));
    const bool axial = std::abs(orientation.z) > 1.0 - 1e-9;
    const bool transverse = std::abs(orientation.z) < 1e-9;
    if (polarization == Polarization::p && !axial)
        throw ConfigError("source: p polarization requires orientation parallel to the wire axis");
    if (polarization == Polarization::s && !transverse)
        throw ConfigError("source: s polarization requires orientation perpendicular to the wire axis");
    if (!finite_positive(center_wavelength)) throw ConfigError("source: center wavelength must be positive");
    if (!finite_positive(bandwidth) || bandwidth >= 2.0 * center_wavelength)
        throw ConfigError("source: bandwidth must be positive and below twice the center wavelength");
    if (!std::isfinite(amplitude) || amplitude == 0.0) throw ConfigError("source: amplitude must be finite and nonzero");
}

double SimulationConfig::max_courant() const { return 0.99 / std::sqrt(3.0); }

void SimulationConfig::validate() const {
    geometry.validate();
    source.validate();
    if (!finite_positive(cell_size)) throw ConfigError("cell size must be positive");
    for (int a = 0; a < 3; ++a)
        if (!finite_positive(domain_extent[a])) throw ConfigError("domain extent must be positive");
    if (pml_thickness < 8) throw ConfigError(describe("pml thickness must be at least 8 cells", pml_thickness));
    if (time_steps <= 0) throw ConfigError("time_steps must be positive");
    if (!(courant_factor > 0.0) || !(courant_factor < 1.0))
        throw ConfigError(describe("courant factor must lie in (0, 1)", courant_factor));
    if (enforce_courant_limit && courant_factor > max_courant() + 1e-12)
        throw ConfigError(describe("courant factor exceeds 0.99/sqrt(3)", courant_factor));
    if (record_wavelengths.empty()) throw ConfigError("at least one record wavelength is required");
    for (double w : record_wavelengths)
        if (!finite_positive(w)) throw ConfigError("record wavelengths must be positive");
    const double lambda_min = *std::min_element(record_wavelengths.begin(), record_wavelengths.end());
    const double limit = lambda_min / (10.0 * geometry.max_index());
    if (cell_size > limit * (1.0 + 1e-9)) {
        std::ostringstream os;
        os << "cell size " << cell_size * 1e9 << " nm exceeds lambda_min/(10 n_max) = " << limit * 1e9 << " nm";
        throw ConfigError(os.str());
    }
    if (!(energy_decay > 0.0) || !(energy_decay < 1.0)) throw ConfigError("energy_decay must lie in (0, 1)");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (!finite_positive(reference_extent)) throw ConfigError("reference extent must be positive");

    const Grid g = make_grid(*this);
    const int pml = pml_thickness;
    for (int a = 0; a < 3; ++a)
        if (g.n(a) < 2 * pml + 8) throw ConfigError("domain too small for the absorbing layers");

    check_inside(g, pml, source.position, source.position, "the dipole");
    auto [x_lo, x_hi] = interior(g, 0, pml);
    auto [y_lo, y_hi] = interior(g, 1, pml);
    auto [z_lo, z_hi] = interior(g, 2, pml);
    const bool has_wire = geometry.wire_height > 0.0 || geometry.infinite_wire;
    if (has_wire) {
        const double r = 0.5 * geometry.wire_diameter;
        if (-r < x_lo || r > x_hi || -r < y_lo || r > y_hi)
            throw ConfigError("the wire extends into the lateral absorbing layer");
        if (!geometry.infinite_wire && geometry.wire_height > z_hi - 2.0 * g.dx)
            throw ConfigError("the wire top extends into the absorbing layer");
    }
    if (geometry.substrate && !geometry.infinite_wire && (0.0 < z_lo || 0.0 > z_hi))
        throw ConfigError("the substrate surface must lie inside the domain interior");

    for (std::size_t m = 0; m < monitors.size(); ++m) {
        const auto& mon = monitors[m];
        if (mon.name.empty()) throw ConfigError("monitor names must be non-empty");
        for (std::size_t o = 0; o < m; ++o)
            if (monitors[o].name == mon.name) throw ConfigError("duplicate monitor name: " + mon.name);
        if (mon.kind == MonitorKind::plane) {
            if (mon.axis < 0 || mon.axis > 2) throw ConfigError("monitor axis must be 0, 1 or 2");
            Vec3 lo = mon.lo, hi = mon.hi;
            lo[mon.axis] = hi[mon.axis] = mon.position;
            for (int a = 0; a < 3; ++a)
                if (a != mon.axis && !(hi[a] > lo[a])) throw ConfigError("monitor " + mon.name + ": empty rectangle");
            check_inside(g, pml, lo, hi, "monitor " + mon.name);
        } else {
            for (int a = 0; a < 3; ++a)
                if (!(mon.hi[a] > mon.lo[a])) throw ConfigError("monitor " + mon.name + ": empty box");
            check_inside(g, pml, mon.lo, mon.hi, "monitor " + mon.name);
        }
    }
    for (const auto& p : probes) check_inside(g, pml, p, p, "probe");
}

Vec3 e_offset(int c) {
    Vec3 o;
    o[c] = 0.5;
    return o;
}

Vec3 h_offset(int c) {
    Vec3 o{0.5, 0.5, 0.5};
    o[c] = 0.0;
    return o;
}

Pulse::Pulse(const DipoleSource& s) {
    const double c0 = constants::c0;
    const double two_pi = 2.0 * std::numbers::pi;
    const double w_hi = two_pi * c0 / (s.center_wavelength - 0.5 * s.bandwidth);
    const double w_lo = two_pi * c0 / (s.center_wavelength + 0.5 * s.bandwidth);
    omega0 = 0.5 * (w_hi + w_lo);
    // |p(omega)| ~ exp(-(omega - omega0)^2 tau^2 / 2) falls to 1/e at the band edges.
    tau = std::sqrt(2.0) / (0.5 * (w_hi - w_lo));
    t0 = 6.0 * tau;
    p0 = 1e-29 * s.amplitude;
}

double Pulse::moment(double t) const {
    const double x = (t - t0) / tau;
    return p0 * std::exp(-0.5 * x * x) * std::cos(omega0 * (t - t0));
}

std::size_t FdtdDomain::memory_estimate() const {
    std::size_t cells = grid.size();
    std::size_t bytes = cells * sizeof(double) * 9;  // six fields, three permittivities
    const int n = config.pml_thickness;
    for (int a = 0; a < 3; ++a) {
        std::size_t slab = std::size_t(n + 1) * cells / std::size_t(grid.n(a) + 1);
        bytes += 2 * 4 * slab * sizeof(double);
    }
    std::size_t points = 0;
    for (const auto& m : config.monitors) {
        if (m.kind == MonitorKind::plane) {
            std::size_t p = 1;
            for (int a = 0; a < 3; ++a)
                if (a != m.axis) p *= std::size_t(std::lround((m.hi[a] - m.lo[a]) / grid.dx) + 2);
            points += p;
        } else {
            for (int a = 0; a < 3; ++a) {
                std::size_t p = 1;
                for (int b = 0; b < 3; ++b)
                    if (b != a) p *= std::size_t(std::lround((m.hi[b] - m.lo[b]) / grid.dx) + 2);
                points += 2 * p;
            }
        }
    }
    bytes += points * 4 * sizeof(cplx) * config.record_wavelengths.size();
    return bytes;
}

FdtdDomain build_domain(const SimulationConfig& config) {
    config.validate();
    FdtdDomain d;
    d.config = config;
    d.grid = make_grid(config);
    const Grid& g = d.grid;
    d.dt = config.courant_factor * g.dx / constants::c0;

    const double budget = config.memory_budget_mb * 1024.0 * 1024.0;
    if (double(d.memory_estimate()) > budget) {
        std::ostringstream os;
        os << "domain needs ~" << d.memory_estimate() / (1024 * 1024) << " MB, above the budget of "
           << config.memory_budget_mb << " MB";
        throw ConfigError(os.str());
    }

    // Permittivity per E component with volume averaging at interfaces.
    const int smoothing = 8;
    for (int c = 0; c < 3; ++c) {
        const Vec3 off = e_offset(c);
        auto& eps = d.eps[c];
        eps.assign(g.size(), 1.0);
        for (int i = 0; i <= g.nx; ++i)
            for (int j = 0; j <= g.ny; ++j)
                for (int k = 0; k <= g.nz; ++k) {
                    const Vec3 p{g.coord(0, i + off.x), g.coord(1, j + off.y), g.coord(2, k + off.z)};
                    eps[g.index(i, j, k)] = smoothed_permittivity(config.geometry, p, g.dx, smoothing);
                }
    }

    // Polynomial conductivity profiles at nodes (E) and half-nodes (H).
    const int n = config.pml_thickness;
    const double sigma_max = 0.8 * (kPmlGrading + 1) / (constants::eta0 * g.dx);
    d.pml_profile_e.assign(3, {});
    d.pml_profile_h.assign(3, {});
    for (int a = 0; a < 3; ++a) {
        const int na = g.n(a);
        auto depth = [&](double pos) {
            const double lo = double(n) - pos;
            const double hi = pos - double(na - n);
            return std::max({lo, hi, 0.0}) / n;
        };
        d.pml_profile_e[a].resize(na + 1);
        d.pml_profile_h[a].resize(na + 1);
        for (int i = 0; i <= na; ++i) {
            d.pml_profile_e[a][i] = sigma_max * std::pow(depth(i), kPmlGrading);
            d.pml_profile_h[a][i] = sigma_max * std::pow(depth(i + 0.5), kPmlGrading);
        }
    }

    // Trilinear spreading of each Cartesian part of the dipole onto its grid.
    const auto& src = config.source;
    for (int c = 0; c < 3; ++c) {
        const double o = src.orientation[c];
        if (o == 0.0) continue;
        const Vec3 off = e_offset(c);
        double f[3];
        int base[3];
        for (int a = 0; a < 3; ++a) {
            const double idx = g.to_index(a, src.position[a]) - off[a];
            const double fl = std::floor(idx + 1e-9);
            base[a] = static_cast<int>(fl);
            f[a] = std::max(0.0, idx - fl);
            if (f[a] < 1e-9) f[a] = 0.0;
        }
        for (int corner = 0; corner < 8; ++corner) {
            double w = 1.0;
            int ijk[3];
            for (int a = 0; a < 3; ++a) {
                const int bit = (corner >> a) & 1;
                w *= bit ? f[a] : 1.0 - f[a];
                ijk[a] = base[a] + bit;
            }
            if (w == 0.0) continue;
            d.source_points.push_back({c, g.index(ijk[0], ijk[1], ijk[2]), w * o});
        }
    }
    return d;
}

double rasterized_wire_area(const FdtdDomain& d, double z) {
    const Grid& g = d.grid;
    const auto& geo = d.config.geometry;
    const int k = static_cast<int>(std::lround(g.to_index(2, z) - 0.5));
    const double eb = geo.background_index * geo.background_index;
    const double ew = geo.wire_index * geo.wire_index;
    double area = 0.0;
    for (int i = 0; i <= g.nx; ++i)
        for (int j = 0; j <= g.ny; ++j) area += (d.eps[2][g.index(i, j, k)] - eb) / (ew - eb);
    return area * g.dx * g.dx;
}

}  // namespace nwem::fdtd
