#include "nwem/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace nwem::sweep {

namespace fs = std::filesystem;
using json = nlohmann::json;
using emission::EmissionReport;

namespace {

constexpr double kNm = 1e-9;

const char* kParameters[] = {"wire_diameter_nm", "dipole_z_nm", "wavelength_nm", "polarization", "config"};

bool is_label_parameter(const std::string& p) { return p == "polarization" || p == "config"; }

json value_to_json(const Value& v) {
    if (const double* d = std::get_if<double>(&v)) return *d;
    return std::get<std::string>(v);
}

Value value_from_json(const json& j, const std::string& parameter) {
    if (is_label_parameter(parameter)) {
        if (!j.is_string()) throw PlanError("axis " + parameter + ": values must be strings");
        return j.get<std::string>();
    }
    if (!j.is_number()) throw PlanError("axis " + parameter + ": values must be numbers");
    return j.get<double>();
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double num_from(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::numeric_limits<double>::quiet_NaN();
    return j[key].get<double>();
}

std::string fmt(double v) {
    if (!std::isfinite(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

bool same_double(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

json report_to_json(const EmissionReport& r) {
    return {{"label", r.label},
            {"wavelength_nm", r.wavelength / kNm},
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
            {"rim_ratio", num(r.rim_ratio)}};
}

EmissionReport report_from_json(const json& j) {
    EmissionReport r;
    r.label = j.at("label").get<std::string>();
    r.wavelength = j.at("wavelength_nm").get<double>() * kNm;
    r.polarization = fdtd::polarization_from_string(j.at("polarization").get<std::string>());
    r.sigma = j.at("sigma_rad").get<double>();
    r.alpha = num_from(j, "alpha");
    r.eta = num_from(j, "eta");
    r.enhancement = num_from(j, "enhancement");
    r.total_power = j.at("total_power_W").get<double>();
    r.bulk_power = j.at("bulk_power_W").get<double>();
    r.box_power = j.at("box_power_W").get<double>();
    r.upward_power = j.at("upward_power_W").get<double>();
    r.far_field_power = num_from(j, "far_field_power_W");
    r.rim_ratio = num_from(j, "rim_ratio");
    return r;
}

bool same_report(const EmissionReport& a, const EmissionReport& b) {
    return a.label == b.label && same_double(a.wavelength, b.wavelength) && a.polarization == b.polarization &&
           same_double(a.sigma, b.sigma) && same_double(a.alpha, b.alpha) && same_double(a.eta, b.eta) &&
           same_double(a.enhancement, b.enhancement) && same_double(a.total_power, b.total_power) &&
           same_double(a.bulk_power, b.bulk_power) && same_double(a.box_power, b.box_power) &&
           same_double(a.upward_power, b.upward_power) && same_double(a.far_field_power, b.far_field_power) &&
           same_double(a.rim_ratio, b.rim_ratio);
}

std::string row_stem(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "row_%04zu", index);
    return buf;
}

json row_to_json(const Row& r, const std::vector<std::string>& names) {
    json params = json::object();
    for (std::size_t i = 0; i < names.size() && i < r.parameters.size(); ++i)
        params[names[i]] = value_to_json(r.parameters[i]);
    json reports = json::array();
    for (const auto& rep : r.reports) reports.push_back(report_to_json(rep));
    json j{{"index", r.index},
           {"parameters", params},
           {"config_hash", r.config_hash},
           {"status", r.status == RowStatus::ok ? "ok" : "failed"},
           {"error_kind", r.error_kind},
           {"error", r.error},
           {"steps", r.steps},
           {"audit", {{"box_balance", r.audit.box_balance}, {"far_field_balance", r.audit.far_field_balance}}},
           {"reports", reports}};
    if (r.far_field) j["far_field_file"] = row_stem(r.index) + "_farfield.nwem";
    return j;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw io::FormatError("cannot open " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw io::FormatError("cannot write " + p.string());
}

json parse_or_corrupt(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw io::CorruptionError(what + " is not valid JSON: " + e.what());
    }
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<std::string> parameter_names(const SweepPlan& plan) {
    std::vector<std::string> n;
    for (const auto& a : plan.axes) n.push_back(a.parameter);
    return n;
}

std::vector<Value> linspace(double lo, double hi, int steps) {
    if (steps < 1) throw PlanError("axis needs at least one step");
    if (!(lo < hi) && steps > 1) throw PlanError("axis range must satisfy min < max");
    std::vector<Value> v;
    for (int i = 0; i < steps; ++i) v.push_back(steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1));
    return v;
}

}  // namespace

std::string to_string(Output o) {
    switch (o) {
        case Output::alpha: return "alpha";
        case Output::eta: return "eta";
        case Output::enhancement: return "E";
        case Output::far_field: return "far_field";
        case Output::z: return "Z";
    }
    return "?";
}

Output output_from_string(const std::string& s) {
    if (s == "alpha") return Output::alpha;
    if (s == "eta") return Output::eta;
    if (s == "E") return Output::enhancement;
    if (s == "far_field") return Output::far_field;
    if (s == "Z") return Output::z;
    throw PlanError("unknown output \"" + s + "\" (expected alpha, eta, E, far_field or Z)");
}

std::string value_text(const Value& v) {
    if (const double* d = std::get_if<double>(&v)) return fmt(*d);
    return std::get<std::string>(v);
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- plan ------------------------------------------------------------------

std::size_t SweepPlan::job_count() const {
    std::size_t n = axes.empty() ? 0 : 1;
    for (const auto& a : axes) n *= a.values.size();
    return n;
}

std::vector<Value> SweepPlan::job_parameters(std::size_t index) const {
    if (index >= job_count()) throw std::out_of_range("job index out of range");
    std::vector<Value> p(axes.size());
    for (std::size_t a = axes.size(); a-- > 0;) {
        const std::size_t n = axes[a].values.size();
        p[a] = axes[a].values[index % n];
        index /= n;
    }
    return p;
}

bool SweepPlan::wants(Output o) const { return std::find(outputs.begin(), outputs.end(), o) != outputs.end(); }

scenes::Scene SweepPlan::job_scene(std::size_t index) const {
    const auto params = job_parameters(index);
    scenes::Scene s = base;
    // A config axis replaces the base before the other parameters apply.
    for (std::size_t a = 0; a < axes.size(); ++a)
        if (axes[a].parameter == "config") {
            const auto& values = axes[a].values;
            const auto it = std::find(values.begin(), values.end(), params[a]);
            s = axes[a].scenes.at(std::size_t(it - values.begin()));
        }
    for (std::size_t a = 0; a < axes.size(); ++a) {
        const auto& name = axes[a].parameter;
        const Value& v = params[a];
        if (name == "wire_diameter_nm") s.config.geometry.wire_diameter = std::get<double>(v) * kNm;
        else if (name == "dipole_z_nm") s.config.source.position.z = std::get<double>(v) * kNm;
        else if (name == "wavelength_nm") s.config.record_wavelengths = {std::get<double>(v) * kNm};
        else if (name == "polarization") scenes::set_polarization(s, fdtd::polarization_from_string(std::get<std::string>(v)));
    }
    auto& an = s.analysis;
    const bool z = wants(Output::z);
    if (!wants(Output::alpha)) an.mode_lower.clear(), an.mode_upper.clear();
    if (!wants(Output::eta) && !wants(Output::far_field) && !z) an.far_field_monitor.clear();
    if (!wants(Output::enhancement) && !z) an.reference_index = 0.0;
    s.config.workers = 1;
    return s;
}

void SweepPlan::validate() const {
    if (axes.empty()) throw PlanError("a sweep plan needs at least one axis");
    if (outputs.empty()) throw PlanError("a sweep plan must request at least one output");
    if (threads_per_job < 1) throw PlanError("threads_per_job must be >= 1");
    for (const auto& a : axes) {
        if (std::find(std::begin(kParameters), std::end(kParameters), a.parameter) == std::end(kParameters))
            throw PlanError("unknown sweep parameter \"" + a.parameter + "\"");
        if (a.values.empty()) throw PlanError("axis " + a.parameter + " has no values");
        for (const auto& v : a.values) {
            if (is_label_parameter(a.parameter) != std::holds_alternative<std::string>(v))
                throw PlanError("axis " + a.parameter + ": wrong value type");
            if (a.parameter == "polarization") fdtd::polarization_from_string(std::get<std::string>(v));
            if (const double* d = std::get_if<double>(&v))
                if (!(std::isfinite(*d)) || (a.parameter != "dipole_z_nm" && !(*d > 0.0)))
                    throw PlanError("axis " + a.parameter + ": value " + fmt(*d) + " is out of range");
        }
        if (a.parameter == "config" && a.scenes.size() != a.values.size())
            throw PlanError("config axis: scenes are not loaded");
        for (const auto& b : axes)
            if (&a != &b && a.parameter == b.parameter) throw PlanError("duplicate axis " + a.parameter);
    }
    std::size_t n = 1;
    for (const auto& a : axes) {
        n *= a.values.size();
        if (n > budget) {
            std::ostringstream os;
            os << "sweep needs more than " << budget << " jobs (budget)";
            throw BudgetError(os.str());
        }
    }
    // Every job must be a valid simulation with the analysis it is asked for.
    for (std::size_t i = 0; i < n; ++i) {
        const auto s = job_scene(i);
        try {
            s.config.validate();
            s.config.geometry.validate();
            s.config.source.validate();
        } catch (const fdtd::ConfigError& e) {
            throw PlanError("job " + std::to_string(i) + ": " + e.what());
        }
        const auto& an = s.analysis;
        if (wants(Output::alpha) && (an.mode_lower.empty() || an.mode_upper.empty()))
            throw PlanError("job " + std::to_string(i) + ": alpha requested but the scene has no mode monitors");
        if ((wants(Output::eta) || wants(Output::far_field) || wants(Output::z)) && an.far_field_monitor.empty())
            throw PlanError("job " + std::to_string(i) + ": eta requested but the scene has no far-field plane");
        if ((wants(Output::enhancement) || wants(Output::z)) && !(an.reference_index > 0.0))
            throw PlanError("job " + std::to_string(i) + ": E requested but the scene has no reference index");
    }
}

SweepPlan plan_diameter_sweep(double d_min, double d_max, int steps, double wavelength, fdtd::Polarization pol,
                              scenes::Resolution res, std::size_t budget) {
    if (!(d_min > 0.0)) throw PlanError("diameter sweep: d_min must be positive");
    if (steps > 1 && !(d_min < d_max)) throw PlanError("diameter sweep: d_min must be below d_max");
    SweepPlan p;
    p.description = "coupling efficiency against wire diameter";
    p.base = scenes::infinite_wire_scene(d_min, pol, res);
    p.base.config.record_wavelengths = {wavelength};
    p.budget = budget;
    std::vector<Value> d;
    for (const auto& v : linspace(d_min / kNm, d_max / kNm, steps)) d.push_back(v);
    p.axes = {{"wire_diameter_nm", d, {}}};
    p.outputs = {Output::alpha};
    p.validate();
    return p;
}

SweepPlan plan_position_sweep(double z_min, double z_max, int steps, double diameter, double wavelength,
                              fdtd::Polarization pol, scenes::Resolution res, std::size_t budget) {
    if (steps > 1 && !(z_min < z_max)) throw PlanError("position sweep: z_min must be below z_max");
    SweepPlan p;
    p.description = "emission rate against dipole height in the wire";
    p.base = scenes::wire_scene(diameter, pol, res, z_min);
    p.base.config.record_wavelengths = {wavelength};
    p.budget = budget;
    p.axes = {{"dipole_z_nm", linspace(z_min / kNm, z_max / kNm, steps), {}}};
    p.outputs = {Output::enhancement};
    p.validate();
    return p;
}

SweepPlan plan_from_json(const std::string& text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw PlanError(std::string("plan is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw PlanError("plan must be a JSON object");
    static const char* keys[] = {"description", "base", "base_config", "axes", "outputs", "budget", "threads_per_job"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find_if(std::begin(keys), std::end(keys), [&](const char* k) { return it.key() == k; }) ==
            std::end(keys))
            throw PlanError("unknown plan key \"" + it.key() + "\"");
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : fs::path(base_dir) / p; };
    SweepPlan p;
    try {
        if (j.contains("description")) p.description = j["description"].get<std::string>();
        if (j.contains("base") && j.contains("base_config")) throw PlanError("give either base or base_config");
        bool has_base = false;
        if (j.contains("base")) {
            p.base = scenes::scene_from_json(j["base"].dump());
            has_base = true;
        }
        if (j.contains("base_config")) {
            p.base = scenes::load_scene(resolve(j["base_config"].get<std::string>()).string());
            has_base = true;
        }
        if (!j.contains("axes") || !j["axes"].is_array()) throw PlanError("plan needs an \"axes\" array");
        bool has_config_axis = false;
        for (const auto& a : j["axes"]) {
            for (auto it = a.begin(); it != a.end(); ++it)
                if (it.key() != "parameter" && it.key() != "values" && it.key() != "start" && it.key() != "stop" &&
                    it.key() != "steps")
                    throw PlanError("unknown axis key \"" + it.key() + "\"");
            Axis ax;
            ax.parameter = a.at("parameter").get<std::string>();
            if (a.contains("values")) {
                if (a.contains("start") || a.contains("stop") || a.contains("steps"))
                    throw PlanError("axis " + ax.parameter + ": give either values or start/stop/steps");
                for (const auto& v : a["values"]) ax.values.push_back(value_from_json(v, ax.parameter));
            } else {
                if (is_label_parameter(ax.parameter)) throw PlanError("axis " + ax.parameter + " needs a values list");
                ax.values = linspace(a.at("start").get<double>(), a.at("stop").get<double>(), a.at("steps").get<int>());
            }
            if (ax.parameter == "config") {
                has_config_axis = true;
                for (const auto& v : ax.values)
                    ax.scenes.push_back(scenes::load_scene(resolve(std::get<std::string>(v)).string()));
            }
            p.axes.push_back(std::move(ax));
        }
        if (!has_base && !has_config_axis) throw PlanError("plan needs a base scene or a config axis");
        if (!j.contains("outputs") || !j["outputs"].is_array()) throw PlanError("plan needs an \"outputs\" array");
        for (const auto& o : j["outputs"]) p.outputs.push_back(output_from_string(o.get<std::string>()));
        if (j.contains("budget")) p.budget = j["budget"].get<std::size_t>();
        if (j.contains("threads_per_job")) p.threads_per_job = j["threads_per_job"].get<int>();
    } catch (const json::exception& e) {
        throw PlanError(std::string("plan: ") + e.what());
    }
    p.validate();
    return p;
}

std::string plan_to_json(const SweepPlan& plan) {
    json axes = json::array();
    for (const auto& a : plan.axes) {
        json v = json::array();
        for (const auto& x : a.values) v.push_back(value_to_json(x));
        axes.push_back({{"parameter", a.parameter}, {"values", v}});
    }
    json outputs = json::array();
    for (auto o : plan.outputs) outputs.push_back(to_string(o));
    json j{{"description", plan.description},
           {"base", json::parse(scenes::scene_to_json(plan.base))},
           {"axes", axes},
           {"outputs", outputs},
           {"budget", plan.budget},
           {"threads_per_job", plan.threads_per_job}};
    return j.dump(2) + "\n";
}

std::string plan_hash(const SweepPlan& plan) {
    std::string text = plan_to_json(plan);
    for (const auto& a : plan.axes)
        for (const auto& s : a.scenes) text += scenes::scene_to_json(s);
    return fnv1a_hex(text);
}

SweepPlan load_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PlanError("cannot open plan file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return plan_from_json(ss.str(), fs::path(path).parent_path().string());
}

// ---- execution ---------------------------------------------------------------

bool Row::operator==(const Row& o) const {
    if (index != o.index || parameters != o.parameters || config_hash != o.config_hash || status != o.status ||
        error_kind != o.error_kind || error != o.error || steps != o.steps || reports.size() != o.reports.size() ||
        !same_double(audit.box_balance, o.audit.box_balance) ||
        !same_double(audit.far_field_balance, o.audit.far_field_balance) || far_field != o.far_field)
        return false;
    for (std::size_t i = 0; i < reports.size(); ++i)
        if (!same_report(reports[i], o.reports[i])) return false;
    return true;
}

std::size_t SweepResult::failed_count() const {
    return std::size_t(std::count_if(rows.begin(), rows.end(), [](const Row& r) { return r.status != RowStatus::ok; }));
}

bool SweepResult::same_rows(const SweepResult& o) const {
    return parameter_names == o.parameter_names && rows == o.rows;
}

Row run_job(const SweepPlan& plan, std::size_t index) {
    Row row;
    row.index = index;
    row.parameters = plan.job_parameters(index);
    try {
        auto scene = plan.job_scene(index);
        row.config_hash = fnv1a_hex(scenes::scene_to_json(scene));
        scene.config.workers = plan.threads_per_job;
        const auto run = fdtd::simulate(scene.config);
        row.steps = run.steps;
        if (!run.converged) {
            std::ostringstream os;
            os << "run stopped after " << run.steps << " steps with energy ratio " << run.final_energy_ratio
               << " above " << scene.config.energy_decay;
            row.error_kind = "unconverged";
            row.error = os.str();
            return row;
        }
        auto analysis = emission::analyze(run, scene.config, scene.analysis);
        if (plan.wants(Output::far_field)) {
            io::Array a;
            for (const auto& r : analysis.reports) {
                const auto& ff = *r.far_field;
                if (a.dims.empty()) a.dims = {0, ff.theta.size(), ff.phi.size()};
                ++a.dims[0];
                a.data.insert(a.data.end(), ff.table.begin(), ff.table.end());
            }
            row.far_field = std::move(a);
        }
        for (auto& r : analysis.reports) r.far_field.reset();
        row.reports = std::move(analysis.reports);
        row.audit = analysis.audit;
        row.status = RowStatus::ok;
    } catch (const fdtd::InstabilityError& e) {
        row.error_kind = "instability", row.error = e.what();
    } catch (const NumericalError& e) {
        row.error_kind = "numerical", row.error = e.what();
    } catch (const emission::AnalysisError& e) {
        row.error_kind = "analysis", row.error = e.what();
    } catch (const std::invalid_argument& e) {
        row.error_kind = "config", row.error = e.what();
    } catch (const std::exception& e) {
        row.error_kind = "other", row.error = e.what();
    }
    return row;
}

namespace {

SweepResult run_indices(const SweepPlan& plan, const std::vector<std::size_t>& indices, const ExecuteOptions& opt,
                        std::vector<Row> rows) {
    std::atomic<std::size_t> next{0};
    std::mutex m;
    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= indices.size()) return;
            Row r = run_job(plan, indices[k]);
            std::lock_guard lock(m);
            if (opt.on_row) opt.on_row(r);
            rows[indices[k]] = std::move(r);
        }
    };
    const int n = std::max(1, std::min<int>(opt.workers, static_cast<int>(indices.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    SweepResult out;
    out.parameter_names = parameter_names(plan);
    out.rows = std::move(rows);
    out.provenance = {plan_hash(plan), NWEM_VERSION, utc_now()};
    return out;
}

}  // namespace

SweepResult execute(const SweepPlan& plan, const ExecuteOptions& options) {
    plan.validate();
    std::vector<std::size_t> all(plan.job_count());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return run_indices(plan, all, options, std::vector<Row>(all.size()));
}

// ---- persistence -------------------------------------------------------------

void write_rows_csv(std::ostream& out, const SweepResult& result) {
    out << "index";
    for (const auto& n : result.parameter_names) out << ',' << n;
    out << ",status,label,wavelength_nm,polarization,sigma_rad,alpha,eta,enhancement,total_power_W,bulk_power_W,"
           "box_power_W,upward_power_W,far_field_power_W,rim_ratio\n";
    for (const auto& r : result.rows) {
        auto prefix = [&] {
            out << r.index;
            for (const auto& v : r.parameters) out << ',' << value_text(v);
            out << ',' << (r.status == RowStatus::ok ? "ok" : "failed");
        };
        if (r.status != RowStatus::ok || r.reports.empty()) {
            prefix();
            out << ",,,,,,,,,,,,,\n";
            continue;
        }
        for (const auto& e : r.reports) {
            prefix();
            out << ',' << e.label << ',' << fmt(e.wavelength / kNm) << ',' << fdtd::to_string(e.polarization) << ','
                << fmt(e.sigma) << ',' << fmt(e.alpha) << ',' << fmt(e.eta) << ',' << fmt(e.enhancement) << ','
                << fmt(e.total_power) << ',' << fmt(e.bulk_power) << ',' << fmt(e.box_power) << ','
                << fmt(e.upward_power) << ',' << fmt(e.far_field_power) << ',' << fmt(e.rim_ratio) << '\n';
        }
    }
}

void persist(const SweepResult& result, const SweepPlan& plan, const std::string& dir) {
    fs::create_directories(dir);
    const fs::path root(dir);
    json index = json::array();
    for (const auto& r : result.rows) {
        const std::string stem = row_stem(r.index);
        write_file(root / (stem + ".json"), row_to_json(r, result.parameter_names).dump(2) + "\n");
        if (r.far_field) io::save_array((root / (stem + "_farfield.nwem")).string(), *r.far_field);
        index.push_back({{"index", r.index},
                         {"status", r.status == RowStatus::ok ? "ok" : "failed"},
                         {"config_hash", r.config_hash},
                         {"file", stem + ".json"}});
    }
    std::ostringstream csv;
    write_rows_csv(csv, result);
    write_file(root / "rows.csv", csv.str());
    write_file(root / "plan.json", plan_to_json(plan));
    json manifest{{"format_version", kResultFormatVersion},
                  {"code_version", result.provenance.code_version},
                  {"created_utc", result.provenance.timestamp},
                  {"plan_hash", result.provenance.plan_hash},
                  {"parameter_names", result.parameter_names},
                  {"rows", index}};
    write_file(root / "manifest.json", manifest.dump(2) + "\n");
}

namespace {

// With `lenient`, unreadable row files are skipped instead of raising.
SweepResult load_rows(const std::string& dir, bool lenient) {
    const fs::path root(dir);
    const json m = parse_or_corrupt(read_file(root / "manifest.json"), "manifest.json");
    SweepResult out;
    try {
        const int version = m.at("format_version").get<int>();
        if (version > kResultFormatVersion)
            throw io::VersionMismatch("sweep result format " + std::to_string(version) +
                                      " is newer than supported version " + std::to_string(kResultFormatVersion));
        out.provenance = {m.at("plan_hash").get<std::string>(), m.at("code_version").get<std::string>(),
                          m.at("created_utc").get<std::string>()};
        out.parameter_names = m.at("parameter_names").get<std::vector<std::string>>();
        for (const auto& entry : m.at("rows")) {
            const std::string file = entry.at("file").get<std::string>();
            json j;
            try {
                j = parse_or_corrupt(read_file(root / file), file);
            } catch (const io::FormatError&) {
                if (lenient) continue;
                throw;
            }
            Row r;
            r.index = j.at("index").get<std::size_t>();
            for (const auto& n : out.parameter_names) {
                const json& v = j.at("parameters").at(n);
                r.parameters.push_back(v.is_string() ? Value(v.get<std::string>()) : Value(v.get<double>()));
            }
            r.config_hash = j.at("config_hash").get<std::string>();
            r.status = j.at("status").get<std::string>() == "ok" ? RowStatus::ok : RowStatus::failed;
            r.error_kind = j.at("error_kind").get<std::string>();
            r.error = j.at("error").get<std::string>();
            r.steps = j.at("steps").get<int>();
            r.audit.box_balance = j.at("audit").at("box_balance").get<double>();
            r.audit.far_field_balance = j.at("audit").at("far_field_balance").get<double>();
            for (const auto& rep : j.at("reports")) r.reports.push_back(report_from_json(rep));
            if (j.contains("far_field_file"))
                r.far_field = io::load_array((root / j["far_field_file"].get<std::string>()).string());
            out.rows.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw io::CorruptionError(std::string("sweep result in ") + dir + " is incomplete: " + e.what());
    }
    return out;
}

}  // namespace

SweepResult load(const std::string& dir) { return load_rows(dir, false); }

SweepResult resume(const SweepPlan& plan, const std::string& dir, const ExecuteOptions& options) {
    plan.validate();
    if (!fs::exists(fs::path(dir) / "manifest.json")) {
        auto r = execute(plan, options);
        persist(r, plan, dir);
        return r;
    }
    SweepResult old = load_rows(dir, true);
    if (old.provenance.plan_hash != plan_hash(plan))
        throw PlanError("directory " + dir + " holds results of a different plan");
    std::vector<Row> rows(plan.job_count());
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto it = std::find_if(old.rows.begin(), old.rows.end(), [&](const Row& r) { return r.index == i; });
        if (it != old.rows.end() && it->status == RowStatus::ok &&
            it->config_hash == fnv1a_hex(scenes::scene_to_json(plan.job_scene(i))))
            rows[i] = *it;
        else
            todo.push_back(i);
    }
    if (todo.empty() && old.rows.size() == rows.size()) return old;
    auto merged = run_indices(plan, todo, options, std::move(rows));
    persist(merged, plan, dir);
    return merged;
}

std::vector<EmissionReport> collect_reports(const SweepResult& result, const std::string& label) {
    std::vector<EmissionReport> out;
    for (const auto& r : result.rows)
        if (r.status == RowStatus::ok)
            for (const auto& e : r.reports)
                if (label.empty() || e.label == label) out.push_back(e);
    return out;
}

}  // namespace nwem::sweep
