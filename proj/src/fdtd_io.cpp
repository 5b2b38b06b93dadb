#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "nwem/fdtd.hpp"

namespace nwem::fdtd {

namespace {

using json = nlohmann::json;

constexpr double kNm = 1e-9;

const char* axis_name(int a) { return a == 0 ? "x" : (a == 1 ? "y" : "z"); }

int axis_from(const json& j) {
    const auto s = j.get<std::string>();
    if (s == "x") return 0;
    if (s == "y") return 1;
    if (s == "z") return 2;
    throw ConfigError("axis must be \"x\", \"y\" or \"z\" (got \"" + s + "\")");
}

// Metres to nm without the conversion noise (25e-9 prints as 25).
double nm(double m) {
    const double v = m / kNm;
    const double r = std::round(v * 1e6) / 1e6;
    return std::abs(r - v) <= 1e-13 * std::abs(v) ? r : v;
}

json vec_nm(const Vec3& v) { return json::array({nm(v.x), nm(v.y), nm(v.z)}); }
json vec_raw(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const json& j, double scale, const char* key) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(key) + " must be a 3-element array");
    return {j[0].get<double>() * scale, j[1].get<double>() * scale, j[2].get<double>() * scale};
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok |= it.key() == a;
        if (!ok) throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void read_nm(const json& j, const char* key, double& out) {
    if (j.contains(key)) out = j.at(key).get<double>() * kNm;
}

}  // namespace

SimulationConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    SimulationConfig c;
    try {
        reject_unknown(j,
                       {"description", "analysis", "cell_size_nm", "domain_extent_nm", "domain_z_min_nm", "pml_cells",
                        "max_time_steps", "courant_factor", "energy_decay", "memory_budget_mb", "workers",
                        "enforce_courant_limit", "reference_extent_nm", "record_wavelengths_nm", "geometry", "source",
                        "monitors", "probes_nm"},
                       "config");
        read_nm(j, "cell_size_nm", c.cell_size);
        if (j.contains("domain_extent_nm")) c.domain_extent = vec_from(j["domain_extent_nm"], kNm, "domain_extent_nm");
        read_nm(j, "domain_z_min_nm", c.domain_z_min);
        read(j, "pml_cells", c.pml_thickness);
        read(j, "max_time_steps", c.time_steps);
        read(j, "courant_factor", c.courant_factor);
        read(j, "energy_decay", c.energy_decay);
        read(j, "memory_budget_mb", c.memory_budget_mb);
        read(j, "workers", c.workers);
        read(j, "enforce_courant_limit", c.enforce_courant_limit);
        read_nm(j, "reference_extent_nm", c.reference_extent);
        if (j.contains("record_wavelengths_nm")) {
            c.record_wavelengths.clear();
            for (const auto& w : j["record_wavelengths_nm"]) c.record_wavelengths.push_back(w.get<double>() * kNm);
        }
        if (j.contains("geometry")) {
            const auto& g = j["geometry"];
            reject_unknown(g,
                           {"wire_diameter_nm", "wire_height_nm", "wire_index", "substrate_index", "background_index",
                            "substrate", "infinite_wire"},
                           "geometry");
            read_nm(g, "wire_diameter_nm", c.geometry.wire_diameter);
            read_nm(g, "wire_height_nm", c.geometry.wire_height);
            read(g, "wire_index", c.geometry.wire_index);
            read(g, "substrate_index", c.geometry.substrate_index);
            read(g, "background_index", c.geometry.background_index);
            read(g, "substrate", c.geometry.substrate);
            read(g, "infinite_wire", c.geometry.infinite_wire);
        }
        if (j.contains("source")) {
            const auto& s = j["source"];
            reject_unknown(s,
                           {"position_nm", "orientation", "polarization", "center_wavelength_nm", "bandwidth_nm",
                            "amplitude"},
                           "source");
            if (s.contains("position_nm")) c.source.position = vec_from(s["position_nm"], kNm, "position_nm");
            if (s.contains("orientation")) c.source.orientation = vec_from(s["orientation"], 1.0, "orientation");
            if (s.contains("polarization"))
                c.source.polarization = polarization_from_string(s["polarization"].get<std::string>());
            read_nm(s, "center_wavelength_nm", c.source.center_wavelength);
            read_nm(s, "bandwidth_nm", c.source.bandwidth);
            read(s, "amplitude", c.source.amplitude);
        }
        if (j.contains("monitors")) {
            for (const auto& m : j["monitors"]) {
                reject_unknown(m, {"name", "type", "axis", "position_nm", "lo_nm", "hi_nm"}, "monitor");
                MonitorSpec spec;
                spec.name = m.at("name").get<std::string>();
                const auto type = m.at("type").get<std::string>();
                if (type == "plane") {
                    spec.kind = MonitorKind::plane;
                    spec.axis = axis_from(m.at("axis"));
                    spec.position = m.at("position_nm").get<double>() * kNm;
                } else if (type == "box") {
                    spec.kind = MonitorKind::box;
                } else {
                    throw ConfigError("monitor type must be \"plane\" or \"box\" (got \"" + type + "\")");
                }
                spec.lo = vec_from(m.at("lo_nm"), kNm, "lo_nm");
                spec.hi = vec_from(m.at("hi_nm"), kNm, "hi_nm");
                c.monitors.push_back(spec);
            }
        }
        if (j.contains("probes_nm"))
            for (const auto& p : j["probes_nm"]) c.probes.push_back(vec_from(p, kNm, "probes_nm"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

std::string config_to_json(const SimulationConfig& c) {
    json j;
    j["cell_size_nm"] = nm(c.cell_size);
    j["domain_extent_nm"] = vec_nm(c.domain_extent);
    j["domain_z_min_nm"] = nm(c.domain_z_min);
    j["pml_cells"] = c.pml_thickness;
    j["max_time_steps"] = c.time_steps;
    j["courant_factor"] = c.courant_factor;
    j["energy_decay"] = c.energy_decay;
    j["memory_budget_mb"] = c.memory_budget_mb;
    j["workers"] = c.workers;
    j["enforce_courant_limit"] = c.enforce_courant_limit;
    j["reference_extent_nm"] = nm(c.reference_extent);
    json w = json::array();
    for (double v : c.record_wavelengths) w.push_back(nm(v));
    j["record_wavelengths_nm"] = w;
    j["geometry"] = {{"wire_diameter_nm", nm(c.geometry.wire_diameter)},
                     {"wire_height_nm", nm(c.geometry.wire_height)},
                     {"wire_index", c.geometry.wire_index},
                     {"substrate_index", c.geometry.substrate_index},
                     {"background_index", c.geometry.background_index},
                     {"substrate", c.geometry.substrate},
                     {"infinite_wire", c.geometry.infinite_wire}};
    j["source"] = {{"position_nm", vec_nm(c.source.position)},
                   {"orientation", vec_raw(c.source.orientation)},
                   {"polarization", to_string(c.source.polarization)},
                   {"center_wavelength_nm", nm(c.source.center_wavelength)},
                   {"bandwidth_nm", nm(c.source.bandwidth)},
                   {"amplitude", c.source.amplitude}};
    json mons = json::array();
    for (const auto& m : c.monitors) {
        json o{{"name", m.name}, {"type", m.kind == MonitorKind::plane ? "plane" : "box"}};
        if (m.kind == MonitorKind::plane) {
            o["axis"] = axis_name(m.axis);
            o["position_nm"] = nm(m.position);
        }
        o["lo_nm"] = vec_nm(m.lo);
        o["hi_nm"] = vec_nm(m.hi);
        mons.push_back(o);
    }
    j["monitors"] = mons;
    json probes = json::array();
    for (const auto& p : c.probes) probes.push_back(vec_nm(p));
    j["probes_nm"] = probes;
    return j.dump(2);
}

SimulationConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

void write_monitor_csv(std::ostream& out, const MonitorData& m) {
    out << "face,axis,sign,set,u_m,v_m,wavelength_m,e_re,e_im,h_re,h_im\n";
    out.precision(12);
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
        const auto& face = m.faces[f];
        for (int set = 0; set < 2; ++set) {
            const FaceSamples& s = set == 0 ? face.a : face.b;
            for (std::size_t w = 0; w < m.wavelengths.size(); ++w)
                for (std::size_t iu = 0; iu < s.u.size(); ++iu)
                    for (std::size_t iv = 0; iv < s.v.size(); ++iv) {
                        const std::size_t p = iu * s.v.size() + iv;
                        out << f << ',' << axis_name(face.axis) << ',' << face.sign << ',' << (set == 0 ? 'a' : 'b')
                            << ',' << s.u[iu] << ',' << s.v[iv] << ',' << m.wavelengths[w] << ','
                            << s.e[w][p].real() << ',' << s.e[w][p].imag() << ',' << s.h[w][p].real() << ','
                            << s.h[w][p].imag() << '\n';
                    }
        }
    }
}

}  // namespace nwem::fdtd
