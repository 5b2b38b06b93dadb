// Compact binary array files: "NWEM", u32 version, u32 ndim, u64 dims[ndim],
// then prod(dims) little-endian f64 values.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace nwem::io {

inline constexpr std::uint32_t kArrayFormatVersion = 1;

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File written by a newer format revision.
class VersionMismatch : public FormatError {
public:
    using FormatError::FormatError;
};

// Bad magic, truncated payload or inconsistent header.
class CorruptionError : public FormatError {
public:
    using FormatError::FormatError;
};

struct Array {
    std::vector<std::uint64_t> dims;
    std::vector<double> data;

    std::uint64_t count() const;
    bool operator==(const Array&) const = default;
};

void write_array(std::ostream& out, const Array& a);
Array read_array(std::istream& in);
void save_array(const std::string& path, const Array& a);
Array load_array(const std::string& path);

}  // namespace nwem::io
