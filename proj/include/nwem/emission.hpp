// Post-processing of FDTD monitor data: guided-mode coupling, far field,
// collection efficiency, emission-rate enhancement, the two-mirror model of
// the position dependence and the spectrum/polarization figure of merit.
#pragma once

#include <cmath>
#include <complex>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nwem/fdtd.hpp"
#include "nwem/numerics.hpp"
#include "nwem/waveguide.hpp"

namespace nwem::emission {

using cplx = std::complex<double>;

inline constexpr double kBandMin = 637e-9;  // ZPL
inline constexpr double kBandMax = 780e-9;  // red end of the sideband

// Rejected analysis input: a monitor placed where the method is invalid,
// missing quadrature coverage, a too-small far-field aperture.
class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GridCoverageError : public AnalysisError {
public:
    using AnalysisError::AnalysisError;
};

// ---- guided-mode coupling ------------------------------------------------

struct ModeAmplitudes {
    cplx forward, backward;
    double mode_power = 0.0;  // 1/2 Re of the discrete self-overlap
    double forward_power() const { return std::norm(forward) * mode_power; }
    double backward_power() const { return std::norm(backward) * mode_power; }
};

// Fills a z-normal face with the fields of `mode` (forward, unit amplitude)
// as the monitor would sample them: H averaged over z +- h_span / 2.
void fill_face_with_mode(fdtd::FaceData& face, std::size_t wavelength_index, const waveguide::GuidedMode& mode,
                         double h_span, double backward_amplitude = 0.0);

// Forward/backward amplitudes of `mode` in the tangential fields of a
// z-normal face, from the conjugate orthogonality relation.
ModeAmplitudes mode_amplitudes(const fdtd::FaceData& face, std::size_t wavelength_index,
                               const waveguide::GuidedMode& mode, double h_span);

struct AlphaResult {
    double alpha = 0.0;
    double upward = 0.0;    // power in the mode travelling +z through the upper plane
    double downward = 0.0;  // power in the mode travelling -z through the lower plane
};

// Fraction of `total_power` carried away by both degenerate HE11 partners in
// both axial directions. Planes must be z-normal wire cross-sections at least
// half a wavelength from the dipole and from any facet.
AlphaResult coupling_alpha(const fdtd::RunResult& run, const fdtd::SimulationConfig& config,
                           const waveguide::GuidedMode& mode, double wavelength, const std::string& lower_plane,
                           const std::string& upper_plane, double total_power);

// ---- far field -----------------------------------------------------------

struct FarFieldOptions {
    int theta_samples = 91;  // table over [0, pi/2]
    int phi_samples = 72;    // table over [0, 2 pi)
    double edge_tolerance = 0.01;  // max |E_t|^2 on the aperture rim / max overall
};

// Radiated power per steradian into the upper half space, from the angular
// spectrum of the tangential E on one z-normal plane in air.
class FarFieldMap {
public:
    double wavelength = 0.0;
    double plane_flux = 0.0;  // 1/2 Re int (E x H*) . z over the plane
    double rim_ratio = 0.0;   // max |E_t|^2 on the aperture rim / max overall
    std::vector<double> theta, phi;
    std::vector<double> table;  // dP/dOmega at [itheta * phi.size() + iphi]

    // dP/dOmega (W/sr) in direction (theta, phi).
    double power_density(double theta, double phi) const;
    // Integral of dP/dOmega over theta <= theta_max.
    double cone_power(double theta_max) const;
    double hemisphere_power() const { return cone_power(0.5 * 3.14159265358979323846); }

    friend FarFieldMap far_field(const fdtd::MonitorData&, double, const FarFieldOptions&);

private:
    double k0_ = 0.0;
    std::vector<double> xa_, ya_, xb_, yb_;  // E_x points (set a), E_y points (set b)
    std::vector<cplx> ex_, ey_;               // weighted samples
};

FarFieldMap far_field(const fdtd::MonitorData& plane, double wavelength, const FarFieldOptions& options = {});

// Power inside the objective cone theta <= asin(NA), over `total_power`.
double collection_eta(const FarFieldMap& ff, double numerical_aperture, double total_power);

// Analytic dP/dOmega of a point current element I l in vacuum with unit
// orientation `dir`.
double dipole_power_density(cplx current_moment, double wavelength, const fdtd::Vec3& dir, double theta,
                            double phi);

// ---- enhancement and position dependence ---------------------------------

double enhancement_factor(double structure_power, double bulk_power);

struct FabryPerotParams {
    double substrate_index = 2.43;
    double baseline = 1.0;       // enhancement with no facet feedback
    double guided_fraction = 1.0;  // fraction of the emission that feels the cavity
};

struct FabryPerotPoint {
    double z = 0.0;
    double enhancement = 0.0;
};

// Two-mirror interference model of the emission rate against dipole height
// z above the wire base, for a wire of height h.
std::vector<FabryPerotPoint> fabry_perot_profile(const waveguide::WaveguideSpec& spec, double wire_height,
                                                 const std::vector<double>& positions,
                                                 const FabryPerotParams& params = {});
// Same with explicit mirror amplitudes and effective index.
std::vector<FabryPerotPoint> fabry_perot_profile(double n_eff, double wavelength, double r_bottom, double r_top,
                                                 double wire_height, const std::vector<double>& positions,
                                                 const FabryPerotParams& params = {});

struct SinusoidFit {
    double period = 0.0;
    double mean = 0.0;
    double amplitude = 0.0;
    double residual_rms = 0.0;
};

// Least-squares fit of mean + a cos(2 pi z / P) + b sin(2 pi z / P) with the
// period scanned over [period_min, period_max].
SinusoidFit fit_sinusoid(const std::vector<double>& z, const std::vector<double>& values, double period_min,
                         double period_max);

// ---- figure of merit -----------------------------------------------------

// Emission spectrum weight with linear interpolation, zero outside the samples.
class EmitterSpectrum {
public:
    EmitterSpectrum(std::vector<double> wavelengths, std::vector<double> weights);
    static EmitterSpectrum flat(double lo = kBandMin, double hi = kBandMax);
    // CSV with header "wavelength_nm,weight".
    static EmitterSpectrum from_csv(const std::string& path);
    static EmitterSpectrum parse_csv(std::istream& in);

    double operator()(double wavelength) const;
    double min_wavelength() const { return wavelengths_.front(); }
    double max_wavelength() const { return wavelengths_.back(); }
    EmitterSpectrum scaled(double c) const;

private:
    std::vector<double> wavelengths_, weights_;
};

struct EmissionReport {
    std::string label;
    double wavelength = 0.0;
    fdtd::Polarization polarization = fdtd::Polarization::s;
    double sigma = 0.0;  // polarization angle from the s direction
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double eta = std::numeric_limits<double>::quiet_NaN();
    double enhancement = std::numeric_limits<double>::quiet_NaN();
    double total_power = 0.0;   // work done by the source
    double bulk_power = 0.0;    // same source in homogeneous bulk
    double box_power = 0.0;     // outward flux through the closed box
    double upward_power = 0.0;  // flux through the far-field plane
    double far_field_power = std::numeric_limits<double>::quiet_NaN();  // hemispherical integral
    double rim_ratio = std::numeric_limits<double>::quiet_NaN();        // far-field aperture truncation
    std::optional<FarFieldMap> far_field;
};

struct ZQuadrature {
    numerics::QuadratureGrid lambda;
    numerics::QuadratureGrid sigma;
};

// Gauss-Legendre in wavelength over the band, uniform periodic rule in sigma.
ZQuadrature default_z_quadrature(int lambda_nodes = 5, int sigma_nodes = 8);

// Z = int int E eta Gamma0 dsigma dlambda / (2 pi int Gamma0 dlambda), with
// one report per (lambda, sigma) node of the quadrature.
double figure_of_merit_z(const std::vector<EmissionReport>& reports, const EmitterSpectrum& spectrum,
                         const ZQuadrature& quadrature);

// Reports at every sigma node built from s (sigma = 0) and p (sigma = pi/2)
// reports by incoherent cos^2 / sin^2 power weighting.
std::vector<EmissionReport> combine_polarizations(const std::vector<EmissionReport>& reports,
                                                  const numerics::QuadratureGrid& sigma);

// Same Z with the sigma integral done in closed form: 1/2 (E_s eta_s + E_p eta_p).
double figure_of_merit_z_sp(const std::vector<EmissionReport>& reports, const EmitterSpectrum& spectrum,
                            const numerics::QuadratureGrid& lambda);

// ---- full analysis of one run --------------------------------------------

struct AnalysisSpec {
    std::string label;
    std::string box_monitor = "box";
    std::string far_field_monitor;  // empty: no far field / eta
    std::string mode_lower, mode_upper;  // empty: no alpha
    double numerical_aperture = 0.95;
    double reference_index = 2.43;  // <= 0: no enhancement
    FarFieldOptions far_field_options;
};

struct Audit {
    double box_balance = 0.0;        // box flux / source power - 1 (worst wavelength)
    double far_field_balance = 0.0;  // hemisphere / plane flux - 1 (worst wavelength)
    bool box_ok(double tol = 0.03) const { return std::abs(box_balance) <= tol; }
    bool far_field_ok(double tol = 0.02) const { return std::abs(far_field_balance) <= tol; }
};

struct Analysis {
    std::vector<EmissionReport> reports;  // one per record wavelength
    Audit audit;
};

Analysis analyze(const fdtd::RunResult& run, const fdtd::SimulationConfig& config, const AnalysisSpec& spec);

// ---- export ---------------------------------------------------------------

void write_reports_csv(std::ostream& out, const std::vector<EmissionReport>& reports);
std::string reports_to_json(const std::vector<EmissionReport>& reports, const Audit* audit = nullptr);
// theta_deg, phi_deg, dP/dOmega rows for polar plotting.
void write_far_field_csv(std::ostream& out, const FarFieldMap& ff);
std::string far_field_to_json(const FarFieldMap& ff);

}  // namespace nwem::emission
