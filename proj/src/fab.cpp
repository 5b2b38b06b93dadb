#include "nwem/fab.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

namespace nwem::fab {

using json = nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

const std::vector<std::string> kTableHeader = {
    "label",   "sample",    "temperature_C", "pressure_mTorr", "bias_W",           "icp_W",
    "o2_sccm", "duration_min", "mask",       "height_nm",      "bottom_nm",        "top_nm",
    "waist_nm", "mask_consumed_nm", "result", "expected_rate_nm_min", "expected_taper_deg", "taper_tol_deg"};

const std::vector<std::string> kMaskHeader = {"mask",          "diamond_rate_nm_min",  "mask_rate_nm_min",
                                              "mask_rate_bound", "expected_selectivity", "expected_bound"};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(const std::string& s, double& v) {
    if (s.empty()) return false;
    const char* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    return r.ec == std::errc() && r.ptr == end && std::isfinite(v);
}

std::string shortest(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

struct Reader {
    int line;
    const std::vector<std::string>& header;
    const std::vector<std::string>& cells;
    std::vector<std::string>* notes = nullptr;

    [[noreturn]] void fail(std::size_t col, const std::string& why) const {
        throw TableError(line, "column " + header[col] + ": " + why);
    }

    const std::string& text(std::size_t col) const { return cells[col]; }

    double number(std::size_t col) const {
        double v;
        if (!parse_double(cells[col], v)) fail(col, "\"" + cells[col] + "\" is not a number");
        return v;
    }

    // "-" is absent. With `allow_range`, "lo-hi" becomes the midpoint.
    std::optional<double> optional_number(std::size_t col, std::optional<std::pair<double, double>>* range = nullptr) const {
        const std::string& s = cells[col];
        if (s == "-" || s.empty()) return std::nullopt;
        double v;
        if (parse_double(s, v)) return v;
        const auto dash = s.find('-', 1);
        double lo, hi;
        if (range && dash != std::string::npos && parse_double(s.substr(0, dash), lo) &&
            parse_double(s.substr(dash + 1), hi) && lo <= hi) {
            if (notes) notes->push_back(header[col] + " range " + s + " taken as " + shortest(0.5 * (lo + hi)));
            *range = std::make_pair(lo, hi);
            return 0.5 * (lo + hi);
        }
        fail(col, "\"" + s + "\" is not a number");
    }

    std::optional<double> positive(std::size_t col) const {
        auto v = optional_number(col);
        if (v && !(*v > 0.0)) fail(col, "must be positive");
        return v;
    }

    std::optional<double> length(std::size_t col, std::optional<std::pair<double, double>>* range = nullptr) const {
        auto v = optional_number(col, range);
        if (v && *v < 0.0) fail(col, "must not be negative");
        return v;
    }
};

template <class F>
void for_each_row(std::istream& in, const std::vector<std::string>& header, F&& f) {
    std::string line;
    int n = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (!have_header) {
            if (cells != header) throw TableError(n, "header does not match the table schema");
            have_header = true;
            continue;
        }
        if (cells.size() != header.size())
            throw TableError(n, "expected " + std::to_string(header.size()) + " cells, found " +
                                    std::to_string(cells.size()));
        f(n, cells);
    }
}

std::string fmt(double v, int prec = 4) {
    if (std::isinf(v)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

std::string fmt(const std::optional<double>& v, int prec = 4) { return v ? fmt(*v, prec) : "-"; }

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

Bound bound_from_string(const std::string& s) {
    if (s == "exact") return Bound::exact;
    if (s == "at_most") return Bound::at_most;
    if (s == "at_least") return Bound::at_least;
    throw FabError("unknown bound \"" + s + "\"");
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

}  // namespace

TableError::TableError(int line, const std::string& what)
    : FabError("line " + std::to_string(line) + ": " + what), line_(line) {}

std::string to_string(Mask m) {
    switch (m) {
        case Mask::au_colloid: return "Au-colloid";
        case Mask::al2o3: return "Al2O3";
        case Mask::sio2: return "SiO2";
        case Mask::evaporated_au: return "evaporated-Au";
        case Mask::fox: return "FOx";
    }
    return "?";
}

Mask mask_from_string(const std::string& s) {
    for (Mask m : {Mask::au_colloid, Mask::al2o3, Mask::sio2, Mask::evaporated_au, Mask::fox})
        if (to_string(m) == s) return m;
    throw FabError("unknown mask \"" + s + "\" (expected Au-colloid, Al2O3, SiO2, evaporated-Au or FOx)");
}

std::string to_string(Bound b) {
    switch (b) {
        case Bound::exact: return "exact";
        case Bound::at_most: return "at_most";
        case Bound::at_least: return "at_least";
    }
    return "?";
}

Taper taper_angle(double height, double bottom, double waist) {
    if (!(height >= 0.0) || !(bottom >= 0.0) || !(waist >= 0.0))
        throw FabError("taper_angle: lengths must be non-negative");
    Taper t;
    t.undercut = waist < bottom;
    const double half = 0.5 * std::abs(waist - bottom);
    t.degrees = half == 0.0 ? 90.0 : std::atan2(height, half) * 180.0 / kPi;
    return t;
}

Taper taper_angle(const EtchOutcome& o) {
    if (!o.height || !o.bottom || !o.waist) throw FabError("taper_angle: height, bottom and waist are required");
    return taper_angle(*o.height, *o.bottom, *o.waist);
}

double etch_rate(double height, double duration_min) {
    if (!(duration_min > 0.0)) throw FabError("etch_rate: duration must be positive");
    if (!(height >= 0.0)) throw FabError("etch_rate: height must be non-negative");
    return height / duration_min;
}

double selectivity(double diamond_rate, double mask_rate) {
    if (!(diamond_rate >= 0.0) || !(mask_rate >= 0.0)) throw FabError("selectivity: rates must be non-negative");
    if (mask_rate == 0.0) return std::numeric_limits<double>::infinity();
    return diamond_rate / mask_rate;
}

std::vector<Record> ingest_table(std::istream& in) {
    std::vector<Record> out;
    for_each_row(in, kTableHeader, [&](int line, const std::vector<std::string>& c) {
        Record r;
        r.line = line;
        const Reader rd{line, kTableHeader, c, &r.notes};
        auto& rec = r.recipe;
        rec.label = c[0];
        if (rec.label.empty()) throw TableError(line, "column label: empty");
        rec.sample = c[1];
        rec.temperature_token = c[2];
        if (c[2] == "RT") rec.temperature_c = kRoomTemperatureC;
        else rec.temperature_c = rd.optional_number(2);
        rec.pressure_mtorr = rd.positive(3);
        rec.bias_w = rd.positive(4);
        rec.icp_w = rd.positive(5);
        rec.o2_sccm = rd.positive(6);
        rec.duration_min = rd.number(7);
        if (!(rec.duration_min > 0.0)) rd.fail(7, "must be positive");
        try {
            rec.mask = mask_from_string(c[8]);
        } catch (const FabError& e) {
            throw TableError(line, std::string("column mask: ") + e.what());
        }
        auto& o = r.outcome;
        o.height = rd.length(9);
        o.bottom = rd.length(10, &o.bottom_range);
        o.top = rd.length(11);
        o.waist = rd.length(12);
        o.mask_consumed = rd.length(13);
        o.tag = c[14] == "-" ? "" : c[14];
        if (o.waist && o.top && o.bottom && *o.waist < std::min(*o.top, *o.bottom))
            throw TableError(line, "waist is narrower than both top and bottom");
        r.expected.etch_rate = rd.length(15);
        r.expected.taper_deg = rd.optional_number(16);
        r.expected.taper_tolerance_deg = rd.positive(17);
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<Record> load_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FabError("cannot open " + path);
    return ingest_table(in);
}

void write_table(std::ostream& out, const std::vector<Record>& records) {
    auto cell = [](const std::optional<double>& v) { return v ? shortest(*v) : std::string("-"); };
    for (std::size_t i = 0; i < kTableHeader.size(); ++i) out << (i ? "," : "") << kTableHeader[i];
    out << '\n';
    for (const auto& r : records) {
        const auto& rc = r.recipe;
        const auto& o = r.outcome;
        const std::string temp = rc.temperature_token == "RT" ? "RT" : cell(rc.temperature_c);
        const std::string bottom =
            o.bottom_range ? shortest(o.bottom_range->first) + "-" + shortest(o.bottom_range->second) : cell(o.bottom);
        out << rc.label << ',' << rc.sample << ',' << temp << ',' << cell(rc.pressure_mtorr) << ',' << cell(rc.bias_w)
            << ',' << cell(rc.icp_w) << ',' << cell(rc.o2_sccm) << ',' << shortest(rc.duration_min) << ','
            << to_string(rc.mask) << ',' << cell(o.height) << ',' << bottom << ',' << cell(o.top) << ','
            << cell(o.waist) << ',' << cell(o.mask_consumed) << ',' << (o.tag.empty() ? "-" : o.tag) << ','
            << cell(r.expected.etch_rate) << ',' << cell(r.expected.taper_deg) << ','
            << cell(r.expected.taper_tolerance_deg) << '\n';
    }
}

Bound MaskRecord::selectivity_bound() const {
    switch (mask_rate_bound) {
        case Bound::at_most: return Bound::at_least;
        case Bound::at_least: return Bound::at_most;
        default: return Bound::exact;
    }
}

std::vector<MaskRecord> ingest_masks(std::istream& in) {
    std::vector<MaskRecord> out;
    for_each_row(in, kMaskHeader, [&](int line, const std::vector<std::string>& c) {
        const Reader rd{line, kMaskHeader, c};
        MaskRecord m;
        m.line = line;
        try {
            m.mask = mask_from_string(c[0]);
            m.mask_rate_bound = bound_from_string(c[3]);
            m.expected_bound = c[5] == "-" ? Bound::exact : bound_from_string(c[5]);
        } catch (const FabError& e) {
            throw TableError(line, e.what());
        }
        m.diamond_rate = rd.number(1);
        m.mask_rate = rd.number(2);
        if (m.diamond_rate < 0.0) rd.fail(1, "must not be negative");
        if (m.mask_rate < 0.0) rd.fail(2, "must not be negative");
        m.expected_selectivity = rd.positive(4);
        out.push_back(m);
    });
    return out;
}

std::vector<MaskRecord> load_masks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FabError("cannot open " + path);
    return ingest_masks(in);
}

Metrics derive(const Record& r) {
    Metrics m;
    const auto& o = r.outcome;
    if (o.height) m.etch_rate = etch_rate(*o.height, r.recipe.duration_min);
    if (o.height && o.bottom && o.waist) m.taper = taper_angle(o);
    if (o.mask_consumed) {
        m.mask_rate = etch_rate(*o.mask_consumed, r.recipe.duration_min);
        if (m.etch_rate) m.selectivity = selectivity(*m.etch_rate, *m.mask_rate);
    }
    return m;
}

std::vector<Check> validate(const std::vector<Record>& records) {
    std::vector<Check> out;
    for (const auto& r : records) {
        const Metrics m = derive(r);
        if (r.expected.etch_rate) {
            Check c{r.recipe.label, "etch_rate_nm_min", *r.expected.etch_rate, std::nan(""), 1e-9, Bound::exact, false};
            if (m.etch_rate) {
                c.actual = *m.etch_rate;
                c.pass = std::abs(c.actual - c.expected) <= c.tolerance;
            }
            out.push_back(c);
        }
        if (r.expected.taper_deg) {
            Check c{r.recipe.label, "taper_deg", *r.expected.taper_deg, std::nan(""),
                    r.expected.taper_tolerance_deg.value_or(0.5), Bound::exact, false};
            if (m.taper) {
                c.actual = m.taper->degrees;
                c.pass = std::abs(c.actual - c.expected) <= c.tolerance;
            }
            out.push_back(c);
        }
    }
    return out;
}

std::vector<Check> validate(const std::vector<MaskRecord>& masks) {
    std::vector<Check> out;
    for (const auto& m : masks) {
        if (!m.expected_selectivity) continue;
        Check c{to_string(m.mask), "selectivity", *m.expected_selectivity, m.selectivity(), 1e-9, m.expected_bound, false};
        switch (c.bound) {
            case Bound::exact: c.pass = std::abs(c.actual - c.expected) <= c.tolerance; break;
            case Bound::at_least: c.pass = c.actual >= c.expected - c.tolerance; break;
            case Bound::at_most: c.pass = c.actual <= c.expected + c.tolerance; break;
        }
        out.push_back(c);
    }
    return out;
}

std::string report_text(const std::vector<Record>& records) {
    std::ostringstream os;
    os << pad("label", 12) << pad("sample", 28) << pad("T_C", 6) << pad("p", 5) << pad("bias", 6) << pad("icp", 6)
       << pad("o2", 5) << pad("t_min", 6) << pad("mask", 12) << pad("h_nm", 7) << pad("bot", 6) << pad("top", 6)
       << pad("waist", 6) << pad("rate", 7) << pad("taper", 8) << pad("sel", 6) << "result\n";
    for (const auto& r : records) {
        const auto& rc = r.recipe;
        const auto& o = r.outcome;
        const Metrics m = derive(r);
        std::string taper = "-";
        if (m.taper) taper = fmt(m.taper->degrees, 3) + (m.taper->undercut ? "*" : "");
        os << pad(rc.label, 12) << pad(rc.sample, 28) << pad(fmt(rc.temperature_c), 6) << pad(fmt(rc.pressure_mtorr), 5)
           << pad(fmt(rc.bias_w), 6) << pad(fmt(rc.icp_w), 6) << pad(fmt(rc.o2_sccm), 5)
           << pad(fmt(rc.duration_min), 6) << pad(to_string(rc.mask), 12) << pad(fmt(o.height), 7)
           << pad(fmt(o.bottom), 6) << pad(fmt(o.top), 6) << pad(fmt(o.waist), 6) << pad(fmt(m.etch_rate), 7)
           << pad(taper, 8) << pad(fmt(m.selectivity, 3), 6) << (o.tag.empty() ? "-" : o.tag) << '\n';
    }
    bool any_undercut = false;
    for (const auto& r : records) {
        const Metrics m = derive(r);
        any_undercut |= m.taper && m.taper->undercut;
        for (const auto& n : r.notes) os << "note " << r.recipe.label << ": " << n << '\n';
    }
    if (any_undercut) os << "* waist narrower than bottom\n";

    // Etch rate per sample, in order of first appearance.
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> rates;
    for (const auto& r : records) {
        const Metrics m = derive(r);
        if (!m.etch_rate) continue;
        if (!rates.count(r.recipe.sample)) order.push_back(r.recipe.sample);
        rates[r.recipe.sample].push_back(*m.etch_rate);
    }
    if (!order.empty()) {
        os << "\n" << pad("sample", 28) << pad("records", 9) << pad("min_rate", 10) << "max_rate\n";
        for (const auto& s : order) {
            const auto& v = rates[s];
            const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
            os << pad(s, 28) << pad(std::to_string(v.size()), 9) << pad(fmt(*lo), 10) << fmt(*hi) << '\n';
        }
    }
    return os.str();
}

std::string report_json(const std::vector<Record>& records) {
    json rows = json::array();
    for (const auto& r : records) {
        const auto& rc = r.recipe;
        const auto& o = r.outcome;
        const Metrics m = derive(r);
        json row{{"label", rc.label},
                 {"sample", rc.sample},
                 {"recipe",
                  {{"temperature_C", opt(rc.temperature_c)},
                   {"pressure_mTorr", opt(rc.pressure_mtorr)},
                   {"bias_W", opt(rc.bias_w)},
                   {"icp_W", opt(rc.icp_w)},
                   {"o2_sccm", opt(rc.o2_sccm)},
                   {"duration_min", rc.duration_min},
                   {"mask", to_string(rc.mask)}}},
                 {"outcome",
                  {{"height_nm", opt(o.height)},
                   {"bottom_nm", opt(o.bottom)},
                   {"top_nm", opt(o.top)},
                   {"waist_nm", opt(o.waist)},
                   {"mask_consumed_nm", opt(o.mask_consumed)},
                   {"result", o.tag}}},
                 {"etch_rate_nm_min", opt(m.etch_rate)},
                 {"taper_deg", m.taper ? json(m.taper->degrees) : json(nullptr)},
                 {"undercut", m.taper ? json(m.taper->undercut) : json(nullptr)},
                 {"mask_rate_nm_min", opt(m.mask_rate)},
                 {"selectivity", m.selectivity && std::isfinite(*m.selectivity) ? json(*m.selectivity) : json(nullptr)},
                 {"notes", r.notes}};
        rows.push_back(std::move(row));
    }
    return json{{"records", rows}}.dump(2) + "\n";
}

std::string masks_text(const std::vector<MaskRecord>& masks) {
    std::ostringstream os;
    os << pad("mask", 15) << pad("diamond_rate", 14) << pad("mask_rate", 12) << "selectivity\n";
    for (const auto& m : masks) {
        const char* rb = m.mask_rate_bound == Bound::at_most ? "<=" : m.mask_rate_bound == Bound::at_least ? ">=" : "";
        const Bound sb = m.selectivity_bound();
        const char* sp = sb == Bound::at_most ? "<=" : sb == Bound::at_least ? ">=" : "";
        const double s = m.selectivity();
        os << pad(to_string(m.mask), 15) << pad(fmt(m.diamond_rate), 14) << pad(rb + fmt(m.mask_rate), 12)
           << (std::isinf(s) ? std::string("effectively infinite") : sp + fmt(s)) << '\n';
    }
    return os.str();
}

std::string masks_json(const std::vector<MaskRecord>& masks) {
    json rows = json::array();
    for (const auto& m : masks) {
        const double s = m.selectivity();
        rows.push_back({{"mask", to_string(m.mask)},
                        {"diamond_rate_nm_min", m.diamond_rate},
                        {"mask_rate_nm_min", m.mask_rate},
                        {"mask_rate_bound", to_string(m.mask_rate_bound)},
                        {"selectivity", std::isinf(s) ? json("infinite") : json(s)},
                        {"selectivity_bound", to_string(m.selectivity_bound())}});
    }
    return json{{"masks", rows}}.dump(2) + "\n";
}

std::string checks_text(const std::vector<Check>& checks) {
    std::ostringstream os;
    for (const auto& c : checks) {
        const char* rel = c.bound == Bound::at_least ? ">=" : c.bound == Bound::at_most ? "<=" : "~";
        os << (c.pass ? "PASS " : "FAIL ") << pad(c.label, 14) << pad(c.quantity, 18) << "actual "
           << pad(std::isnan(c.actual) ? "absent" : fmt(c.actual, 6), 10) << "expected " << rel << ' '
           << fmt(c.expected, 6);
        if (c.bound == Bound::exact) os << " +- " << fmt(c.tolerance, 2);
        os << '\n';
    }
    return os.str();
}

}  // namespace nwem::fab
