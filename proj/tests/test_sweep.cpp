#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "nwem/sweep.hpp"

using namespace nwem;
using namespace nwem::sweep;
namespace fs = std::filesystem;

namespace {

scenes::Scene tiny_scene() {
    scenes::Scene s;
    s.config = fixtures::small_vacuum(50e-9, 16);
    s.analysis.label = "tiny";
    s.analysis.reference_index = 1.0;
    return s;
}

SweepPlan tiny_plan() {
    SweepPlan p;
    p.description = "tiny";
    p.base = tiny_scene();
    p.axes = {{"wavelength_nm", {600.0, 637.0, 680.0}, {}}};
    p.outputs = {Output::enhancement};
    return p;
}

// Two good scenes around one that violates the Courant limit.
SweepPlan plan_with_unstable_job() {
    SweepPlan p = tiny_plan();
    scenes::Scene bad = tiny_scene();
    bad.config.enforce_courant_limit = false;
    bad.config.courant_factor = 1.2 / std::sqrt(3.0);
    p.axes = {{"config", {std::string("a"), std::string("bad"), std::string("b")}, {tiny_scene(), bad, tiny_scene()}}};
    return p;
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("nwem_sweep_" + name);
    fs::remove_all(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("diameter sweep plans") {
    const auto p = plan_diameter_sweep(100e-9, 300e-9, 21, 637e-9, fdtd::Polarization::s);
    REQUIRE(p.job_count() == 21);
    CHECK(std::get<double>(p.job_parameters(0)[0]) == doctest::Approx(100.0));
    CHECK(std::get<double>(p.job_parameters(1)[0]) == doctest::Approx(110.0));
    CHECK(std::get<double>(p.job_parameters(20)[0]) == doctest::Approx(300.0));
    CHECK(p.job_scene(5).config.geometry.wire_diameter == doctest::Approx(150e-9));
    CHECK(p.job_scene(5).analysis.far_field_monitor.empty());

    const auto one = plan_diameter_sweep(180e-9, 300e-9, 1, 637e-9, fdtd::Polarization::s);
    REQUIRE(one.job_count() == 1);
    CHECK(std::get<double>(one.job_parameters(0)[0]) == doctest::Approx(180.0));

    CHECK_THROWS_AS(plan_diameter_sweep(100e-9, 300e-9, 21, 637e-9, fdtd::Polarization::s,
                                        scenes::Resolution::coarse, 10),
                    BudgetError);
    CHECK_THROWS_AS(plan_diameter_sweep(300e-9, 100e-9, 5, 637e-9, fdtd::Polarization::s), PlanError);
    CHECK_THROWS_AS(plan_diameter_sweep(100e-9, 300e-9, 0, 637e-9, fdtd::Polarization::s), PlanError);
}

TEST_CASE("job count is the product of the axis lengths") {
    SweepPlan p = tiny_plan();
    p.axes.push_back({"polarization", {std::string("s"), std::string("p")}, {}});
    p.axes.push_back({"dipole_z_nm", {-50.0, 0.0, 50.0, 100.0}, {}});
    CHECK(p.job_count() == 24);
    // Last axis fastest.
    const auto j = p.job_parameters(5);
    CHECK(std::get<double>(j[0]) == 600.0);
    CHECK(std::get<std::string>(j[1]) == "p");
    CHECK(std::get<double>(j[2]) == 0.0);
    const auto s = p.job_scene(5);
    CHECK(p.job_scene(6).config.source.position.z == doctest::Approx(50e-9));
    CHECK(s.config.source.polarization == fdtd::Polarization::p);
    REQUIRE(s.config.record_wavelengths.size() == 1);
    CHECK(s.config.record_wavelengths[0] == doctest::Approx(600e-9));
    CHECK_THROWS_AS(p.job_parameters(24), std::out_of_range);

    p.budget = 23;
    CHECK_THROWS_AS(p.validate(), BudgetError);
}

TEST_CASE("plan validation") {
    SweepPlan p = tiny_plan();
    CHECK_NOTHROW(p.validate());
    SUBCASE("unknown parameter") {
        p.axes[0].parameter = "temperature";
        CHECK_THROWS_AS(p.validate(), PlanError);
    }
    SUBCASE("no outputs") {
        p.outputs.clear();
        CHECK_THROWS_AS(p.validate(), PlanError);
    }
    SUBCASE("alpha without mode planes") {
        p.outputs = {Output::alpha};
        CHECK_THROWS_AS(p.validate(), PlanError);
    }
    SUBCASE("eta without a far-field plane") {
        p.outputs = {Output::eta};
        CHECK_THROWS_AS(p.validate(), PlanError);
    }
    SUBCASE("label on a numeric axis") {
        p.axes[0].values = {std::string("red")};
        CHECK_THROWS_AS(p.validate(), PlanError);
    }
    SUBCASE("bad polarization") {
        p.axes.push_back({"polarization", {std::string("q")}, {}});
        CHECK_THROWS(p.validate());
    }
    SUBCASE("job fails config validation") {
        p.axes = {{"wavelength_nm", {-637.0}, {}}};
        CHECK_THROWS_AS(p.validate(), PlanError);
    }
}

TEST_CASE("plan JSON") {
    const std::string text = R"({
      "description": "demo",
      "base": )" + scenes::scene_to_json(tiny_scene()) + R"(,
      "axes": [{"parameter": "wavelength_nm", "start": 600, "stop": 680, "steps": 3},
               {"parameter": "polarization", "values": ["s", "p"]}],
      "outputs": ["E"],
      "budget": 10
    })";
    const auto p = plan_from_json(text);
    CHECK(p.job_count() == 6);
    CHECK(p.budget == 10);
    CHECK(std::get<double>(p.axes[0].values[1]) == doctest::Approx(640.0));
    const auto back = plan_from_json(plan_to_json(p));
    CHECK(plan_to_json(back) == plan_to_json(p));

    CHECK_THROWS_AS(plan_from_json("{"), PlanError);
    CHECK_THROWS_AS(plan_from_json(R"({"axes": [], "outputs": ["E"]})"), PlanError);
    CHECK_THROWS_AS(plan_from_json(R"({"base": {}, "axes": [{"parameter": "x", "values": [1]}], "outputs": ["E"], "extra": 1})"),
                    PlanError);
    CHECK_THROWS_AS(output_from_string("beta"), PlanError);
}

TEST_CASE("config hash follows every scene field") {
    const SweepPlan p = tiny_plan();
    const auto h = fnv1a_hex(scenes::scene_to_json(p.job_scene(0)));
    CHECK(h.size() == 16);
    CHECK(h == fnv1a_hex(scenes::scene_to_json(p.job_scene(0))));
    CHECK(h != fnv1a_hex(scenes::scene_to_json(p.job_scene(1))));

    auto mutate = [&](auto f) {
        auto s = p.job_scene(0);
        f(s);
        return fnv1a_hex(scenes::scene_to_json(s));
    };
    CHECK(mutate([](scenes::Scene& s) { s.config.cell_size = 51e-9; }) != h);
    CHECK(mutate([](scenes::Scene& s) { s.config.pml_thickness = 11; }) != h);
    CHECK(mutate([](scenes::Scene& s) { s.config.source.amplitude = 2.0; }) != h);
    CHECK(mutate([](scenes::Scene& s) { s.config.geometry.wire_index = 2.4; }) != h);
    CHECK(mutate([](scenes::Scene& s) { s.config.energy_decay = 1e-7; }) != h);
    CHECK(mutate([](scenes::Scene& s) { s.analysis.numerical_aperture = 0.9; }) != h);
    CHECK(mutate([](scenes::Scene& s) { s.config.monitors[0].hi.x *= 0.5; }) != h);
}

TEST_CASE("sweep execution is deterministic across workers and isolates failures") {
    const SweepPlan p = plan_with_unstable_job();
    const auto serial = execute(p, {1, {}});
    REQUIRE(serial.rows.size() == 3);
    CHECK(serial.failed_count() == 1);
    CHECK(serial.rows[0].status == RowStatus::ok);
    CHECK(serial.rows[1].status == RowStatus::failed);
    CHECK(serial.rows[1].error_kind == "instability");
    CHECK_FALSE(serial.rows[1].error.empty());
    CHECK(serial.rows[2].status == RowStatus::ok);
    // Vacuum against its own reference.
    CHECK(serial.rows[0].reports.at(0).enhancement == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(serial.rows[0].audit.box_ok());

    int seen = 0;
    const auto parallel = execute(p, {3, [&](const Row&) { ++seen; }});
    CHECK(seen == 3);
    CHECK(parallel.same_rows(serial));
    CHECK(parallel.provenance.plan_hash == serial.provenance.plan_hash);

    const auto dir1 = scratch("det1"), dir2 = scratch("det2");
    persist(serial, p, dir1.string());
    persist(parallel, p, dir2.string());
    CHECK(slurp(dir1 / "rows.csv") == slurp(dir2 / "rows.csv"));
    CHECK(slurp(dir1 / "row_0000.json") == slurp(dir2 / "row_0000.json"));
    CHECK(slurp(dir1 / "row_0001.json") == slurp(dir2 / "row_0001.json"));
}

TEST_CASE("result directory round trip and damage") {
    SweepPlan p = tiny_plan();
    p.axes[0].values = {637.0};
    const auto r = execute(p);
    REQUIRE(r.failed_count() == 0);
    const auto dir = scratch("roundtrip");
    persist(r, p, dir.string());
    for (const char* f : {"manifest.json", "plan.json", "rows.csv", "row_0000.json"}) CHECK(fs::exists(dir / f));

    const auto back = load(dir.string());
    CHECK(back.same_rows(r));
    CHECK(back.provenance.plan_hash == r.provenance.plan_hash);
    CHECK(back.provenance.code_version == NWEM_VERSION);

    SUBCASE("truncated row") {
        const auto text = slurp(dir / "row_0000.json");
        std::ofstream(dir / "row_0000.json", std::ios::binary) << text.substr(0, text.size() / 2);
        CHECK_THROWS_AS(load(dir.string()), io::CorruptionError);
    }
    SUBCASE("truncated manifest") {
        const auto text = slurp(dir / "manifest.json");
        std::ofstream(dir / "manifest.json", std::ios::binary) << text.substr(0, text.size() - 10);
        CHECK_THROWS_AS(load(dir.string()), io::CorruptionError);
    }
    SUBCASE("newer format") {
        auto text = slurp(dir / "manifest.json");
        const auto at = text.find("\"format_version\": 1");
        REQUIRE(at != std::string::npos);
        text.replace(at, 19, "\"format_version\": 9");
        std::ofstream(dir / "manifest.json", std::ios::binary) << text;
        CHECK_THROWS_AS(load(dir.string()), io::VersionMismatch);
    }
    SUBCASE("missing row file") {
        fs::remove(dir / "row_0000.json");
        CHECK_THROWS_AS(load(dir.string()), io::FormatError);
    }
}

TEST_CASE("resume reruns only failed or missing rows") {
    const SweepPlan p = plan_with_unstable_job();
    const auto dir = scratch("resume");
    const auto first = resume(p, dir.string());
    CHECK(first.failed_count() == 1);

    std::vector<std::size_t> ran;
    const auto second = resume(p, dir.string(), {2, [&](const Row& r) { ran.push_back(r.index); }});
    CHECK(ran == std::vector<std::size_t>{1});
    CHECK(second.same_rows(first));

    // A completed directory is left alone.
    SweepPlan good = tiny_plan();
    good.axes[0].values = {600.0, 637.0};
    const auto dir2 = scratch("resume_done");
    resume(good, dir2.string());
    const auto manifest = slurp(dir2 / "manifest.json");
    ran.clear();
    resume(good, dir2.string(), {1, [&](const Row& r) { ran.push_back(r.index); }});
    CHECK(ran.empty());
    CHECK(slurp(dir2 / "manifest.json") == manifest);

    // A missing row is recomputed.
    fs::remove(dir2 / "row_0001.json");
    CHECK_THROWS_AS(load(dir2.string()), io::FormatError);
    resume(good, dir2.string(), {1, [&](const Row& r) { ran.push_back(r.index); }});
    CHECK(ran == std::vector<std::size_t>{1});
    CHECK(load(dir2.string()).failed_count() == 0);

    CHECK_THROWS_AS(resume(plan_with_unstable_job(), dir2.string()), PlanError);
}
