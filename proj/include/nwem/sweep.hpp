// Parameter sweeps over scenes: planning, execution on a worker pool,
// persistence as a result directory, and resume.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "nwem/array_io.hpp"
#include "nwem/emission.hpp"
#include "nwem/scenes.hpp"

namespace nwem::sweep {

inline constexpr int kResultFormatVersion = 1;

class PlanError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class BudgetError : public PlanError {
public:
    using PlanError::PlanError;
};

// FNV-1a 64, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

enum class Output { alpha, eta, enhancement, far_field, z };

std::string to_string(Output o);
Output output_from_string(const std::string& s);

// A numeric value (nm for lengths) or a label (polarization, config path).
using Value = std::variant<double, std::string>;

std::string value_text(const Value& v);

// Sweepable parameters: wire_diameter_nm, dipole_z_nm, wavelength_nm,
// polarization ("s" / "p") and config (scene file path).
struct Axis {
    std::string parameter;
    std::vector<Value> values;
    std::vector<scenes::Scene> scenes;  // config axis: loaded scene per value
};

struct SweepPlan {
    std::string description;
    scenes::Scene base;
    std::vector<Axis> axes;
    std::vector<Output> outputs;
    std::size_t budget = 1000;
    int threads_per_job = 1;

    std::size_t job_count() const;
    // Axis values of job `index`; the last axis varies fastest.
    std::vector<Value> job_parameters(std::size_t index) const;
    // Base scene with the job's parameters applied and the analysis reduced
    // to the requested outputs.
    scenes::Scene job_scene(std::size_t index) const;
    bool wants(Output o) const;
    // Throws PlanError / BudgetError.
    void validate() const;
};

// Uniform grid d_min..d_max (steps >= 1) on the infinite-wire scene.
SweepPlan plan_diameter_sweep(double d_min, double d_max, int steps, double wavelength, fdtd::Polarization pol,
                              scenes::Resolution res = scenes::Resolution::coarse, std::size_t budget = 1000);

// Uniform grid of dipole heights above the wire base, emission rate only.
SweepPlan plan_position_sweep(double z_min, double z_max, int steps, double diameter, double wavelength,
                              fdtd::Polarization pol, scenes::Resolution res = scenes::Resolution::coarse,
                              std::size_t budget = 1000);

// JSON plan. Relative config paths resolve against `base_dir`.
SweepPlan plan_from_json(const std::string& text, const std::string& base_dir = ".");
std::string plan_to_json(const SweepPlan& plan);
SweepPlan load_plan(const std::string& path);
// Hash of the plan JSON and any scenes loaded for a config axis.
std::string plan_hash(const SweepPlan& plan);

enum class RowStatus { ok, failed };

struct Row {
    std::size_t index = 0;
    std::vector<Value> parameters;
    std::string config_hash;  // FNV-1a 64 of the job's scene JSON, hex
    RowStatus status = RowStatus::failed;
    std::string error_kind;  // config, instability, unconverged, analysis, numerical, other
    std::string error;
    int steps = 0;
    std::vector<emission::EmissionReport> reports;  // far_field maps stripped
    emission::Audit audit;
    // dP/dOmega tables, dims {wavelengths, theta, phi}, when far_field is requested.
    std::optional<io::Array> far_field;

    bool operator==(const Row& o) const;
};

struct Provenance {
    std::string plan_hash;
    std::string code_version;
    std::string timestamp;  // ISO 8601 UTC
};

struct SweepResult {
    std::vector<std::string> parameter_names;
    std::vector<Row> rows;
    Provenance provenance;

    std::size_t failed_count() const;
    // Identity of the rows; provenance timestamps are ignored.
    bool same_rows(const SweepResult& o) const;
};

struct ExecuteOptions {
    int workers = 1;
    // Called after each job from the worker that ran it.
    std::function<void(const Row&)> on_row;
};

SweepResult execute(const SweepPlan& plan, const ExecuteOptions& options = {});
Row run_job(const SweepPlan& plan, std::size_t index);

// Directory layout: manifest.json (provenance, plan, row index), rows.csv
// (one line per job and wavelength), row_NNNN.json and, with far fields,
// row_NNNN_farfield.nwem.
void persist(const SweepResult& result, const SweepPlan& plan, const std::string& dir);
SweepResult load(const std::string& dir);

// Re-runs failed or missing rows of an existing directory for the same plan
// and rewrites it. Returns the merged result.
SweepResult resume(const SweepPlan& plan, const std::string& dir, const ExecuteOptions& options = {});

void write_rows_csv(std::ostream& out, const SweepResult& result);

// Reports of all successful rows, for the figure of merit.
std::vector<emission::EmissionReport> collect_reports(const SweepResult& result, const std::string& label = "");

}  // namespace nwem::sweep
