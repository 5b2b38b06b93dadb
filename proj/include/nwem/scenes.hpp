// Preset scenes: nanowire on substrate, bulk diamond under a flat surface,
// infinite wire for guided-mode coupling, homogeneous cube. A scene bundles
// a simulation config with the analysis it is meant for.
#pragma once

#include <string>
#include <vector>

#include "nwem/emission.hpp"
#include "nwem/fdtd.hpp"

namespace nwem::scenes {

enum class Resolution { coarse, fine };

double cell_size(Resolution r);  // 25 nm / 13 nm
Resolution resolution_from_string(const std::string& s);
std::string to_string(Resolution r);

inline constexpr double kDiamondIndex = 2.43;
inline constexpr double kZplWavelength = 637e-9;

// 637 nm followed by the Gauss-Legendre nodes of the band quadrature.
std::vector<double> band_wavelengths(int band_nodes = 5);

struct Scene {
    std::string description;
    fdtd::SimulationConfig config;
    emission::AnalysisSpec analysis;
};

fdtd::Vec3 orientation(fdtd::Polarization p);

// 2 um wire on a diamond substrate, dipole on the axis at `dipole_z` above
// the base; far-field plane two cells above the top facet.
Scene wire_scene(double diameter, fdtd::Polarization pol, Resolution res, double dipole_z = 1e-6);
// Flat diamond surface at z = 0, dipole `depth` below it.
Scene bulk_scene(fdtd::Polarization pol, Resolution res, double depth = 100e-9);
// Wire through both z absorbers, dipole at z = 0, mode planes at +-400 nm.
Scene infinite_wire_scene(double diameter, fdtd::Polarization pol, Resolution res);
// Homogeneous cube of the given index with the dipole at the centre and a
// closed box; `cell` is the grid step.
Scene homogeneous_scene(double cell, double index, double wavelength = kZplWavelength);

// Scene JSON: the config schema plus "description" and "analysis".
Scene scene_from_json(const std::string& text);
std::string scene_to_json(const Scene& scene);
Scene load_scene(const std::string& path);

// Points the dipole along x (s) or z (p).
void set_polarization(Scene& s, fdtd::Polarization p);

}  // namespace nwem::scenes
