// nwem: mode solver, FDTD runs, sweeps, figure of merit and etch tables.
// Exit codes: 0 success, 1 input error, 2 numerical failure.

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nwem/emission.hpp"
#include "nwem/fab.hpp"
#include "nwem/scenes.hpp"
#include "nwem/sweep.hpp"
#include "nwem/waveguide.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace nwem;

namespace {

constexpr int kInputError = 1;
constexpr int kNumericalError = 2;

struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Numerical failure detected by the command itself (audit, unconverged run).
struct RunFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// "200nm", "0.637um", "1e-6m". A unit is required.
double parse_length(const std::string& text) {
    static const std::pair<const char*, double> units[] = {
        {"nm", 1e-9}, {"um", 1e-6}, {"\xC2\xB5m", 1e-6}, {"mm", 1e-3}, {"m", 1.0}};
    for (const auto& [suffix, scale] : units) {
        const std::string s(suffix);
        if (text.size() > s.size() && text.compare(text.size() - s.size(), s.size(), s) == 0) {
            const std::string num = text.substr(0, text.size() - s.size());
            char* end = nullptr;
            errno = 0;
            const double v = std::strtod(num.c_str(), &end);
            if (end == num.c_str() || *end != '\0' || errno != 0 || !std::isfinite(v))
                throw InputError("\"" + text + "\" is not a length");
            return v * scale;
        }
    }
    throw InputError("\"" + text + "\" needs a unit (nm, um, mm or m)");
}

int default_workers() {
    const char* env = std::getenv("NWEM_WORKERS");
    if (!env || !*env) return 1;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1 || n > 1024) throw InputError(std::string("NWEM_WORKERS=\"") + env + "\" is not a worker count");
    return static_cast<int>(n);
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw InputError("cannot write " + p.string());
}

std::string num(double v, int prec = 6) {
    if (std::isnan(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

// key=value on a dotted path of the scene JSON, e.g. geometry.wire_diameter_nm=210.
void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError("override \"" + assignment + "\" is not key=value");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json* node = &j;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (!node->is_object() || !node->contains(part)) throw InputError("override: unknown config key \"" + key + "\"");
        node = &(*node)[part];
    }
    if (node->is_object()) throw InputError("override: \"" + key + "\" is a section, not a value");
    json v;
    try {
        v = json::parse(text);
    } catch (const json::exception&) {
        v = text;
    }
    if (node->is_array() && (!v.is_array() || v.size() != node->size()))
        throw InputError("override: \"" + key + "\" needs an array of " + std::to_string(node->size()) + " values");
    *node = v;
}

std::string resolution_name(double cell) {
    for (auto r : {scenes::Resolution::coarse, scenes::Resolution::fine})
        if (std::abs(cell - scenes::cell_size(r)) < 1e-12) return scenes::to_string(r);
    return "custom";
}

// ---- modes -----------------------------------------------------------------

struct ModesArgs {
    std::string d, lambda = "637nm";
    double n = scenes::kDiamondIndex, n_clad = 1.0;
    int max_order = 6;
    std::string profile;
};

int cmd_modes(const ModesArgs& a) {
    waveguide::WaveguideSpec spec;
    spec.diameter = parse_length(a.d);
    spec.wavelength = parse_length(a.lambda);
    spec.core_index = a.n;
    spec.clad_index = a.n_clad;
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    if (a.max_order < 0) throw InputError("--max-order must be >= 0");
    const auto modes = waveguide::solve_modes(spec, a.max_order);
    std::printf("V = %.4f  (d = %s nm, lambda = %s nm, n_core = %s, n_clad = %s)\n", waveguide::v_parameter(spec),
                num(spec.diameter * 1e9).c_str(), num(spec.wavelength * 1e9).c_str(), num(spec.core_index).c_str(),
                num(spec.clad_index).c_str());
    std::printf("guided modes: %zu\n", modes.size());
    std::printf("%-8s %-6s %-7s %s\n", "mode", "order", "radial", "n_eff");
    for (const auto& m : modes)
        std::printf("%-8s %-6d %-7d %.8f\n", m.name().c_str(), m.order, m.radial_index, m.n_eff);
    if (!a.profile.empty()) {
        std::ofstream out(a.profile);
        if (!out) throw InputError("cannot write " + a.profile);
        const double phis[] = {0.0, 0.5 * 3.14159265358979323846};
        waveguide::write_profile_csv(out, modes.front(), phis);
    }
    return 0;
}

// ---- simulate ----------------------------------------------------------------

struct SimulateArgs {
    std::string config, out = "nwem_out";
    std::vector<std::string> overrides;
    int workers = 0;
};

int cmd_simulate(const SimulateArgs& a) {
    if (!fs::exists(a.config)) throw InputError("config file " + a.config + " not found");
    scenes::Scene scene = scenes::load_scene(a.config);
    if (!a.overrides.empty()) {
        json j = json::parse(scenes::scene_to_json(scene));
        for (const auto& o : a.overrides) apply_override(j, o);
        scene = scenes::scene_from_json(j.dump());
    }
    scene.config.workers = a.workers > 0 ? a.workers : default_workers();
    scene.config.validate();

    fs::create_directories(a.out);
    const fs::path out(a.out);
    json manifest{{"subcommand", "simulate"},
                  {"config", a.config},
                  {"output_dir", a.out},
                  {"overrides", a.overrides},
                  {"workers", scene.config.workers},
                  {"resolution", resolution_name(scene.config.cell_size)},
                  {"code_version", NWEM_VERSION},
                  {"started_utc", utc_now()}};

    const auto run = fdtd::simulate(scene.config);
    std::printf("run: %d steps, energy ratio %s\n", run.steps, num(run.final_energy_ratio, 3).c_str());
    if (!run.converged) {
        manifest["status"] = "unconverged";
        write_text(out / "run_manifest.json", manifest.dump(2) + "\n");
        throw RunFailure("run did not converge within " + std::to_string(run.steps) + " steps");
    }
    const auto analysis = emission::analyze(run, scene.config, scene.analysis);

    write_text(out / "report.json", emission::reports_to_json(analysis.reports, &analysis.audit));
    std::ostringstream csv;
    emission::write_reports_csv(csv, analysis.reports);
    write_text(out / "report.csv", csv.str());
    for (const auto& r : analysis.reports) {
        if (!r.far_field) continue;
        std::ostringstream ff;
        emission::write_far_field_csv(ff, *r.far_field);
        write_text(out / ("far_field_" + r.label + "_" + num(r.wavelength * 1e9, 6) + "nm.csv"), ff.str());
    }

    std::printf("%-14s %-9s %-4s %-9s %-9s %-9s %s\n", "label", "lambda_nm", "pol", "alpha", "eta", "E", "P/P_bulk");
    for (const auto& r : analysis.reports)
        std::printf("%-14s %-9s %-4s %-9s %-9s %-9s %s\n", r.label.c_str(), num(r.wavelength * 1e9).c_str(),
                    fdtd::to_string(r.polarization).c_str(), num(r.alpha, 4).c_str(), num(r.eta, 4).c_str(),
                    num(r.enhancement, 4).c_str(),
                    r.bulk_power > 0 ? num(r.total_power / r.bulk_power, 4).c_str() : "n/a");

    const bool has_ff = !scene.analysis.far_field_monitor.empty();
    const bool ok = analysis.audit.box_ok() && (!has_ff || analysis.audit.far_field_ok());
    std::printf("audit box_balance=%+.4f far_field_balance=%s %s\n", analysis.audit.box_balance,
                has_ff ? num(analysis.audit.far_field_balance, 4).c_str() : "n/a", ok ? "ok" : "FAIL");
    manifest["status"] = ok ? "ok" : "audit_failed";
    write_text(out / "run_manifest.json", manifest.dump(2) + "\n");
    if (!ok) throw RunFailure("energy audit outside tolerance (box 3%, far field 2%)");
    return 0;
}

// ---- sweep -------------------------------------------------------------------

struct SweepArgs {
    std::string plan, out;
    int workers = 0;
    bool resume = false;
};

int cmd_sweep(const SweepArgs& a) {
    if (!fs::exists(a.plan)) throw InputError("plan file " + a.plan + " not found");
    const auto plan = sweep::load_plan(a.plan);
    sweep::ExecuteOptions opt;
    opt.workers = a.workers > 0 ? a.workers : default_workers();
    opt.on_row = [&](const sweep::Row& r) {
        std::fprintf(stderr, "row %zu/%zu %s%s%s\n", r.index + 1, plan.job_count(),
                     r.status == sweep::RowStatus::ok ? "ok" : "failed", r.error.empty() ? "" : ": ",
                     r.error.c_str());
    };
    const bool exists = fs::exists(fs::path(a.out) / "manifest.json");
    if (exists && !a.resume) throw InputError(a.out + " already holds a sweep; pass --resume to continue it");
    sweep::SweepResult result;
    if (a.resume) {
        result = sweep::resume(plan, a.out, opt);
    } else {
        result = sweep::execute(plan, opt);
        sweep::persist(result, plan, a.out);
    }
    std::printf("rows %zu ok %zu failed %zu\n", result.rows.size(), result.rows.size() - result.failed_count(),
                result.failed_count());
    std::ostringstream csv;
    sweep::write_rows_csv(csv, result);
    std::fputs(csv.str().c_str(), stdout);
    if (result.failed_count() > 0) throw RunFailure(std::to_string(result.failed_count()) + " sweep rows failed");
    return 0;
}

// ---- fom -----------------------------------------------------------------------

struct FomArgs {
    std::string dir, spectrum, wire_label = "wire", bulk_label = "bulk";
};

int cmd_fom(const FomArgs& a) {
    if (!fs::exists(fs::path(a.dir) / "manifest.json")) throw InputError(a.dir + " is not a sweep directory");
    const auto result = sweep::load(a.dir);
    const auto spectrum = a.spectrum.empty() ? emission::EmitterSpectrum::flat()
                                             : emission::EmitterSpectrum::from_csv(a.spectrum);
    const auto q = emission::default_z_quadrature();
    const auto wire = sweep::collect_reports(result, a.wire_label);
    const auto bulk = sweep::collect_reports(result, a.bulk_label);
    if (wire.empty()) throw InputError("no successful reports labelled \"" + a.wire_label + "\"");
    if (bulk.empty()) throw InputError("no successful reports labelled \"" + a.bulk_label + "\"");
    const double zw = emission::figure_of_merit_z_sp(wire, spectrum, q.lambda);
    const double zb = emission::figure_of_merit_z_sp(bulk, spectrum, q.lambda);
    std::printf("Z_wire = %.6f\nZ_bulk = %.6f\nratio = %.4f\n", zw, zb, zw / zb);
    return 0;
}

// ---- fab -----------------------------------------------------------------------

struct FabArgs {
    std::string table, masks, json_out;
    bool validate = false;
};

int cmd_fab(const FabArgs& a) {
    const auto records = fab::load_table(a.table);
    std::fputs(fab::report_text(records).c_str(), stdout);
    std::vector<fab::Check> checks = fab::validate(records);
    std::vector<fab::MaskRecord> masks;
    if (!a.masks.empty()) {
        masks = fab::load_masks(a.masks);
        std::printf("\n%s", fab::masks_text(masks).c_str());
        const auto mc = fab::validate(masks);
        checks.insert(checks.end(), mc.begin(), mc.end());
    }
    if (!a.json_out.empty()) {
        json j = json::parse(fab::report_json(records));
        if (!masks.empty()) j["masks"] = json::parse(fab::masks_json(masks))["masks"];
        write_text(a.json_out, j.dump(2) + "\n");
    }
    if (a.validate) {
        std::printf("\n%s", fab::checks_text(checks).c_str());
        std::size_t failed = 0;
        for (const auto& c : checks) failed += !c.pass;
        std::printf("validation: %zu checks, %zu failed\n", checks.size(), failed);
        if (failed) return kInputError;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nanowire emitter modelling: guided modes, FDTD, sweeps, figure of merit, etch tables"};
    app.set_version_flag("--version", std::string(NWEM_VERSION));
    app.require_subcommand(1);

    ModesArgs modes;
    auto* m = app.add_subcommand("modes", "Guided modes of a round wire");
    m->add_option("--d", modes.d, "Wire diameter with unit, e.g. 200nm")->required();
    m->add_option("--lambda", modes.lambda, "Vacuum wavelength with unit")->capture_default_str();
    m->add_option("--n", modes.n, "Core index")->capture_default_str();
    m->add_option("--n-clad", modes.n_clad, "Cladding index")->capture_default_str();
    m->add_option("--max-order", modes.max_order, "Highest azimuthal order searched")->capture_default_str();
    m->add_option("--profile", modes.profile, "Write the fundamental mode profile CSV here");

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Run one scene and analyse it");
    s->add_option("config", sim.config, "Scene JSON")->required();
    s->add_option("--out", sim.out, "Output directory")->capture_default_str();
    s->add_option("--set", sim.overrides, "Override a config value, key.path=value (repeatable)");
    s->add_option("--workers", sim.workers, "FDTD threads (default NWEM_WORKERS or 1)");

    SweepArgs sw;
    auto* w = app.add_subcommand("sweep", "Run a sweep plan into a result directory");
    w->add_option("plan", sw.plan, "Plan JSON")->required();
    w->add_option("--out", sw.out, "Result directory")->required();
    w->add_option("--workers", sw.workers, "Concurrent jobs (default NWEM_WORKERS or 1)");
    w->add_flag("--resume", sw.resume, "Re-run only failed or missing rows");

    FomArgs fom;
    auto* f = app.add_subcommand("fom", "Figure of merit Z from a sweep directory");
    f->add_option("dir", fom.dir, "Sweep result directory")->required();
    f->add_option("--spectrum", fom.spectrum, "Emitter spectrum CSV (wavelength_nm,weight); flat if omitted");
    f->add_option("--wire-label", fom.wire_label)->capture_default_str();
    f->add_option("--bulk-label", fom.bulk_label)->capture_default_str();

    FabArgs fb;
    auto* t = app.add_subcommand("fab", "Derived metrics of an etch table");
    t->add_option("table", fb.table, "Recipe/outcome CSV")->required();
    t->add_option("--masks", fb.masks, "Mask erosion CSV");
    t->add_option("--json", fb.json_out, "Write the report as JSON here");
    t->add_flag("--validate", fb.validate, "Check against the expected columns");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kInputError;
    }

    try {
        if (*m) return cmd_modes(modes);
        if (*s) return cmd_simulate(sim);
        if (*w) return cmd_sweep(sw);
        if (*f) return cmd_fom(fom);
        if (*t) return cmd_fab(fb);
    } catch (const RunFailure& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kNumericalError;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kNumericalError;
    } catch (const emission::GridCoverageError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kInputError;
    } catch (const emission::AnalysisError& e) {
        std::fprintf(stderr, "analysis failure: %s\n", e.what());
        return kNumericalError;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kInputError;
    } catch (const io::FormatError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kInputError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInputError;
    }
    return 0;
}
