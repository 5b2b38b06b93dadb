// Etch-process records and the metrics derived from them: etch rate, taper
// angle and mask selectivity.
#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nwem::fab {

// Room temperature, for the "RT" sentinel.
inline constexpr double kRoomTemperatureC = 20.0;

class FabError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed table content; `line` is 1-based (the header is line 1).
class TableError : public FabError {
public:
    TableError(int line, const std::string& what);
    int line() const { return line_; }

private:
    int line_;
};

enum class Mask { au_colloid, al2o3, sio2, evaporated_au, fox };

std::string to_string(Mask m);
Mask mask_from_string(const std::string& s);

struct EtchRecipe {
    std::string label;
    std::string sample;
    std::optional<double> temperature_c;
    std::string temperature_token;  // as written, e.g. "RT"
    std::optional<double> pressure_mtorr;
    std::optional<double> bias_w;
    std::optional<double> icp_w;
    std::optional<double> o2_sccm;
    double duration_min = 0.0;
    Mask mask = Mask::au_colloid;
};

// Lengths in nm. A range cell such as "330-420" is stored as its midpoint.
struct EtchOutcome {
    std::optional<double> height;
    std::optional<double> bottom;
    std::optional<std::pair<double, double>> bottom_range;
    std::optional<double> top;
    std::optional<double> waist;
    std::optional<double> mask_consumed;
    std::string tag;
};

// Columns a table may carry for cross-checking.
struct Expected {
    std::optional<double> etch_rate;
    std::optional<double> taper_deg;
    std::optional<double> taper_tolerance_deg;
};

struct Record {
    EtchRecipe recipe;
    EtchOutcome outcome;
    Expected expected;
    int line = 0;
    std::vector<std::string> notes;  // e.g. ranges replaced by midpoints
};

struct Taper {
    double degrees = 90.0;
    bool undercut = false;  // waist narrower than the bottom
};

// atan(height / ((waist - bottom) / 2)); |waist - bottom| when the waist is
// narrower, with the undercut flag set.
Taper taper_angle(double height, double bottom, double waist);
// Throws FabError when height, bottom or waist is absent.
Taper taper_angle(const EtchOutcome& outcome);

double etch_rate(double height, double duration_min);

// diamond_rate / mask_rate; +infinity when the mask does not erode.
double selectivity(double diamond_rate, double mask_rate);

// Header: label,sample,temperature_C,pressure_mTorr,bias_W,icp_W,o2_sccm,
// duration_min,mask,height_nm,bottom_nm,top_nm,waist_nm,mask_consumed_nm,
// result,expected_rate_nm_min,expected_taper_deg,taper_tol_deg
// "-" marks an absent value, "RT" a room-temperature entry.
std::vector<Record> ingest_table(std::istream& in);
std::vector<Record> load_table(const std::string& path);
// Same schema; shipped tables round-trip byte for byte.
void write_table(std::ostream& out, const std::vector<Record>& records);

// How a measured value bounds the true one.
enum class Bound { exact, at_most, at_least };

std::string to_string(Bound b);

// Mask erosion data.
// Header: mask,diamond_rate_nm_min,mask_rate_nm_min,mask_rate_bound,
// expected_selectivity,expected_bound
struct MaskRecord {
    Mask mask = Mask::au_colloid;
    double diamond_rate = 0.0;
    double mask_rate = 0.0;
    Bound mask_rate_bound = Bound::exact;
    std::optional<double> expected_selectivity;
    Bound expected_bound = Bound::exact;
    int line = 0;

    double selectivity() const { return fab::selectivity(diamond_rate, mask_rate); }
    // A mask rate bounded above bounds the selectivity below, and vice versa.
    Bound selectivity_bound() const;
};

std::vector<MaskRecord> ingest_masks(std::istream& in);
std::vector<MaskRecord> load_masks(const std::string& path);

struct Metrics {
    std::optional<double> etch_rate;
    std::optional<Taper> taper;
    std::optional<double> mask_rate;
    std::optional<double> selectivity;
};

Metrics derive(const Record& r);

struct Check {
    std::string label;
    std::string quantity;
    double expected = 0.0;
    double actual = 0.0;
    double tolerance = 0.0;
    Bound bound = Bound::exact;
    bool pass = false;
};

// Compares derived metrics with the expected columns. Rates must match to
// 1e-9; tapers use the row tolerance, default 0.5 degrees.
std::vector<Check> validate(const std::vector<Record>& records);
std::vector<Check> validate(const std::vector<MaskRecord>& masks);

// Text table of recipe, outcome and derived metrics followed by a
// per-sample comparison of etch rates; rows keep file order.
std::string report_text(const std::vector<Record>& records);
std::string report_json(const std::vector<Record>& records);
std::string masks_text(const std::vector<MaskRecord>& masks);
std::string masks_json(const std::vector<MaskRecord>& masks);
std::string checks_text(const std::vector<Check>& checks);

}  // namespace nwem::fab
