// Guided modes of a step-index circular dielectric rod (the nanowire), from the
// full-vectorial characteristic equation. Fields carry exp(i(beta z - omega t)).
#pragma once

#include <complex>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nwem/numerics.hpp"

namespace nwem::waveguide {

using cplx = std::complex<double>;

struct WaveguideSpec {
    double diameter = 200e-9;   // m
    double core_index = 2.43;
    double clad_index = 1.0;
    double wavelength = 637e-9;  // m

    /// Throws std::invalid_argument when d <= 0, lambda <= 0 or n1 <= n2 or n2 < 1.
    void validate() const;
    double radius() const noexcept { return 0.5 * diameter; }
    double k0() const noexcept;
};

enum class ModeFamily { HE, EH, TE, TM };

std::string to_string(ModeFamily family);

/// Cylindrical field components at one point. E in V/m, H in A/m.
struct FieldSextet {
    cplx er, ephi, ez;
    cplx hr, hphi, hz;
};

/// Cartesian transverse + axial components at one point.
struct CartesianField {
    cplx ex, ey, ez;
    cplx hx, hy, hz;
};

/// Radial amplitude functions sampled on [0, 3d]; the node r = d/2 appears
/// twice (core-side limit, then cladding-side limit).
struct RadialProfile {
    std::vector<double> r;
    std::vector<FieldSextet> fields;
};

struct GuidedMode {
    WaveguideSpec spec;
    double n_eff = 0.0;
    // n_eff - n2, kept separately: for very thin wires it is below the double
    // resolution of n_eff itself (about 1e-19 at d = 50 nm, lambda = 637 nm).
    double index_excess = 0.0;
    int order = 0;  // azimuthal order nu
    ModeFamily family = ModeFamily::HE;
    int radial_index = 1;
    double u = 0.0;  // a * sqrt(k0^2 n1^2 - beta^2)
    double w = 0.0;  // a * sqrt(beta^2 - k0^2 n2^2)
    double normalization = 1.0;  // amplitude scale giving unit carried power (W)
    double hz_ratio = 0.0;       // B / A of the axial fields, in A/V
    double rotation = 0.0;       // azimuthal orientation of the cos-type pattern (rad)
    RadialProfile radial_profile;

    double beta() const noexcept { return n_eff * spec.k0(); }
    std::string name() const;
    /// Copy rotated by `angle` about the axis (the degenerate partner of an
    /// nu >= 1 mode is rotated by pi / (2 nu)).
    GuidedMode rotated(double angle) const;
};

struct ModeSolverOptions {
    int scan_samples = 4096;
    double tolerance = 1e-13;  // on the scan variable W
    int radial_samples = 512;
};

double v_parameter(const WaveguideSpec& spec);

/// Pole-free characteristic function for azimuthal order `order` at effective
/// index n_eff (the eigenvalue equation multiplied through by J_nu(U)^2).
/// For order 0 it is the product of the TE and TM factors.
double characteristic_determinant(const WaveguideSpec& spec, int order, double n_eff);

/// All guided modes with azimuthal order <= max_order, descending n_eff.
/// Throws RootAmbiguityError when the scan cannot separate two roots.
std::vector<GuidedMode> solve_modes(const WaveguideSpec& spec, int max_order,
                                    const ModeSolverOptions& options = {});

/// The fundamental HE11 mode (always guided).
GuidedMode fundamental_mode(const WaveguideSpec& spec, const ModeSolverOptions& options = {});

/// Analytic fields at (r, phi), including the mode's rotation.
FieldSextet mode_profile(const GuidedMode& mode, double r, double phi);

/// Analytic fields at Cartesian (x, y) with the axis at the origin.
CartesianField mode_field_cartesian(const GuidedMode& mode, double x, double y);

/// Modal amplitude reflection at an end facet from the effective-index
/// Fresnel estimate (n_eff - n_out) / (n_eff + n_out).
double facet_reflectivity(const GuidedMode& mode, double outside_index = 1.0);

/// 1/2 Re int (E x H*) . z dA of the analytic fields, by quadrature.
double modal_power(const GuidedMode& mode);

/// The same flux integral evaluated from the stored radial samples only.
double profile_power(const GuidedMode& mode);

/// CSV export: r, phi and re/im of the six cylindrical components per row.
void write_profile_csv(std::ostream& out, const GuidedMode& mode, std::span<const double> phis);

}  // namespace nwem::waveguide
