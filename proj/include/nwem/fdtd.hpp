// 3D Yee FDTD for a dipole in a nanowire-on-substrate scene. Fields are
// real-valued in time; monitors accumulate running DFTs with exp(+i omega t).
#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "nwem/numerics.hpp"

namespace nwem::fdtd {

using cplx = std::complex<double>;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
    double operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }
    double& operator[](int a) { return a == 0 ? x : (a == 1 ? y : z); }
    bool operator==(const Vec3&) const = default;
};

enum class Polarization { s, p };
enum class MonitorKind { plane, box };

std::string to_string(Polarization p);
Polarization polarization_from_string(const std::string& s);

class InstabilityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Wire axis is z; the substrate fills z < 0 and the wire base sits on z = 0.
struct SceneGeometry {
    double wire_diameter = 200e-9;
    double wire_height = 2e-6;  // 0: no wire
    double wire_index = 2.43;
    double substrate_index = 2.43;
    double background_index = 1.0;
    bool substrate = true;
    // Wire spans the whole z range (through both z absorbers), no substrate.
    bool infinite_wire = false;

    void validate() const;
    double max_index() const;
    // Relative permittivity at a point.
    double permittivity(double x, double y, double z) const;
};

struct DipoleSource {
    Vec3 position{0.0, 0.0, 1e-6};
    Vec3 orientation{1.0, 0.0, 0.0};
    Polarization polarization = Polarization::s;
    double center_wavelength = 700e-9;
    // Wavelength span whose edges sit at 1/e of the peak dipole spectrum.
    double bandwidth = 160e-9;
    double amplitude = 1.0;

    void validate() const;
};

struct MonitorSpec {
    std::string name;
    MonitorKind kind = MonitorKind::plane;
    int axis = 2;           // plane normal (0, 1, 2)
    double position = 0.0;  // plane coordinate along axis
    Vec3 lo, hi;            // rectangle (plane) or box corners
};

struct SimulationConfig {
    double cell_size = 25e-9;
    Vec3 domain_extent{3e-6, 3e-6, 4e-6};
    double domain_z_min = -1e-6;  // x and y are centred on the wire axis
    int pml_thickness = 10;
    int time_steps = 20000;  // upper bound; runs stop once the energy has decayed
    double courant_factor = 0.99 / 1.7320508075688772;
    SceneGeometry geometry;
    DipoleSource source;
    std::vector<MonitorSpec> monitors;
    std::vector<double> record_wavelengths{637e-9};
    std::vector<Vec3> probes;  // points recorded as time traces of E

    double energy_decay = 1e-6;
    double memory_budget_mb = 4096.0;
    int workers = 1;
    bool enforce_courant_limit = true;
    // Edge length of the bulk-reference cube (homogeneous medium, same grid).
    double reference_extent = 1.6e-6;

    void validate() const;
    double max_courant() const;
};

// Uniform grid. Node (i, j, k) sits at origin + (i, j, k) * dx; field arrays
// hold (n + 1)^3 entries with E and H at the usual Yee offsets.
struct Grid {
    int nx = 0, ny = 0, nz = 0;
    double dx = 0.0;
    Vec3 origin;

    std::size_t size() const { return std::size_t(nx + 1) * (ny + 1) * (nz + 1); }
    std::size_t index(int i, int j, int k) const {
        return (std::size_t(i) * (ny + 1) + j) * (nz + 1) + k;
    }
    int n(int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
    double coord(int axis, double idx) const { return origin[axis] + idx * dx; }
    double to_index(int axis, double x) const { return (x - origin[axis]) / dx; }
};

// Offsets of each field component within the cell, in units of dx.
Vec3 e_offset(int component);
Vec3 h_offset(int component);

// Tangential samples of one monitor face. Set "a" pairs E_u with H_v on
// points (u half, v node); set "b" pairs E_v with H_u on (u node, v half),
// where (axis, u, v) is cyclic. H is averaged over the two neighbouring
// planes so both sit at the face coordinate.
struct FaceSamples {
    std::vector<double> u, v;    // point coordinates (tensor grid)
    std::vector<double> wu, wv;  // trapezoid weights in metres
    std::vector<std::vector<cplx>> e, h;  // [wavelength][iu * v.size() + iv]
};

struct FaceData {
    int axis = 2;
    double coordinate = 0.0;
    double sign = 1.0;  // +1: flux along +axis counts positive
    FaceSamples a, b;
};

struct MonitorData {
    std::string name;
    MonitorKind kind = MonitorKind::plane;
    std::vector<FaceData> faces;
    std::vector<double> wavelengths;
};

struct SourcePoint {
    int component;
    std::size_t index;
    double weight;  // trilinear weight times orientation component
};

struct FdtdDomain {
    SimulationConfig config;
    Grid grid;
    double dt = 0.0;
    std::array<std::vector<double>, 3> eps;  // relative permittivity at E_x, E_y, E_z
    std::vector<SourcePoint> source_points;
    std::vector<std::vector<double>> pml_profile_e, pml_profile_h;  // sigma per axis, node / half-node

    double permittivity_at(int component, int i, int j, int k) const {
        return eps[component][grid.index(i, j, k)];
    }
    std::size_t memory_estimate() const;
};

// Pulse shape of the dipole moment p(t) (C m).
struct Pulse {
    double omega0 = 0.0, tau = 0.0, t0 = 0.0, p0 = 0.0;
    explicit Pulse(const DipoleSource& s);
    double moment(double t) const;
    double end_time() const { return 2.0 * t0; }
};

struct RunResult {
    std::vector<double> wavelengths;
    std::vector<MonitorData> monitors;
    std::vector<cplx> source_current;  // DFT of the current moment I l (A m s)
    std::vector<double> source_power;  // -1/2 Re int E . J* dV per wavelength
    std::vector<std::vector<std::array<double, 3>>> probe_traces;
    std::vector<double> energy_trace;  // sampled every check interval
    int steps = 0;
    bool converged = false;
    double final_energy_ratio = 0.0;
    double dt = 0.0;

    const MonitorData& monitor(const std::string& name) const;
    std::size_t wavelength_index(double wavelength) const;
};

FdtdDomain build_domain(const SimulationConfig& config);
RunResult run(const FdtdDomain& domain);
RunResult simulate(const SimulationConfig& config);

// 1/2 Re of the face integral of E x H* along each face's signed normal.
double flux(const MonitorData& monitor, double wavelength);
double face_flux(const FaceData& face, std::size_t wavelength_index);

// Power radiated by the identical source in a homogeneous medium of the
// given index, at every record wavelength, from a run on the same grid with
// the dipole at the same sub-cell offset. Results are cached per process.
std::vector<double> bulk_reference_power(const SimulationConfig& config, double medium_index);
void clear_reference_cache();

// Radiated power of a point current element in a homogeneous medium.
double analytic_dipole_power(cplx current_moment, double wavelength, double index);

// Disk area seen by the rasterized permittivity on the E_z plane nearest
// to z; (eps - n_bg^2) / (n_w^2 - n_bg^2) summed times dx^2.
double rasterized_wire_area(const FdtdDomain& domain, double z);

// JSON config schema (units in key names).
SimulationConfig config_from_json(const std::string& text);
std::string config_to_json(const SimulationConfig& config);
SimulationConfig load_config(const std::string& path);

// Monitor export: CSV with one row per face sample, and the binary array
// format. The binary layout is [wavelength][face][set][point][E re, E im, H re, H im].
void write_monitor_csv(std::ostream& out, const MonitorData& monitor);

}  // namespace nwem::fdtd
