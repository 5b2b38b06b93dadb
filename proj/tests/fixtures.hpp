// Small shared scenes for the unit tests. Runs are cached per process.
#pragma once

#include "nwem/fdtd.hpp"
#include "nwem/scenes.hpp"

namespace fixtures {

using namespace nwem;

// Vacuum cube with a centred dipole, a closed box two cells inside the
// absorber and `half` cells from the centre to each face.
inline fdtd::SimulationConfig small_vacuum(double cell = 50e-9, int half = 16) {
    fdtd::SimulationConfig c;
    c.cell_size = cell;
    const double l = 2.0 * half * cell;
    c.domain_extent = {l, l, l};
    c.domain_z_min = -0.5 * l;
    c.geometry.wire_height = 0.0;
    c.geometry.substrate = false;
    c.source.position = {0, 0, 0};
    c.source.center_wavelength = 637e-9;
    c.source.bandwidth = 100e-9;
    c.record_wavelengths = {637e-9};
    const double b = (half - c.pml_thickness - 2) * cell;
    c.monitors.push_back({"box", fdtd::MonitorKind::box, 2, 0.0, {-b, -b, -b}, {b, b, b}});
    return c;
}

// Homogeneous vacuum at lambda/20 with a closed box.
inline const scenes::Scene& vacuum_scene() {
    static const scenes::Scene s = scenes::homogeneous_scene(637e-9 / 20, 1.0);
    return s;
}

inline const fdtd::RunResult& vacuum_run() {
    static const fdtd::RunResult r = fdtd::simulate(vacuum_scene().config);
    return r;
}

// Vacuum at lambda/20, wide enough that a plane two cells above the dipole
// keeps the rim intensity near 1 % of the peak.
inline const scenes::Scene& vacuum_plane_scene() {
    static const scenes::Scene s = [] {
        const double dx = 637e-9 / 20;
        scenes::Scene sc;
        sc.config = small_vacuum(dx, 36);
        const double b = sc.config.monitors[0].hi.x;
        sc.config.monitors.push_back({"top", fdtd::MonitorKind::plane, 2, 2 * dx, {-b, -b, 2 * dx}, {b, b, 2 * dx}});
        sc.analysis.label = "vacuum";
        sc.analysis.far_field_monitor = "top";
        sc.analysis.reference_index = 0.0;
        return sc;
    }();
    return s;
}

inline const fdtd::RunResult& vacuum_plane_run() {
    static const fdtd::RunResult r = fdtd::simulate(vacuum_plane_scene().config);
    return r;
}

}  // namespace fixtures
