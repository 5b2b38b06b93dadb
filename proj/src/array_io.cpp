#include "nwem/array_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace nwem::io {

namespace {

static_assert(std::endian::native == std::endian::little, "array files assume a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
    char buf[sizeof(T)];
    if (!in.read(buf, sizeof(T))) throw CorruptionError(std::string("array file truncated in ") + what);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace

std::uint64_t Array::count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return dims.empty() ? 0 : n;
}

void write_array(std::ostream& out, const Array& a) {
    if (a.count() != a.data.size()) throw FormatError("array dims do not match the payload size");
    out.write("NWEM", 4);
    put<std::uint32_t>(out, kArrayFormatVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.dims.size()));
    for (auto d : a.dims) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(a.data.data()), std::streamsize(a.data.size() * sizeof(double)));
    if (!out) throw FormatError("array write failed");
}

Array read_array(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4)) throw CorruptionError("array file truncated in magic");
    if (std::memcmp(magic, "NWEM", 4) != 0) throw CorruptionError("not an NWEM array file (bad magic)");
    const auto version = get<std::uint32_t>(in, "version");
    if (version > kArrayFormatVersion)
        throw VersionMismatch("array file version " + std::to_string(version) + " is newer than supported version " +
                              std::to_string(kArrayFormatVersion));
    if (version == 0) throw CorruptionError("array file version 0 is invalid");
    const auto ndim = get<std::uint32_t>(in, "ndim");
    if (ndim > 16) throw CorruptionError("array file header claims " + std::to_string(ndim) + " dimensions");
    Array a;
    for (std::uint32_t i = 0; i < ndim; ++i) a.dims.push_back(get<std::uint64_t>(in, "dims"));
    const std::uint64_t n = a.count();
    if (n > (std::uint64_t(1) << 36)) throw CorruptionError("array file header claims an implausible size");
    a.data.resize(n);
    if (n > 0 && !in.read(reinterpret_cast<char*>(a.data.data()), std::streamsize(n * sizeof(double))))
        throw CorruptionError("array file truncated in payload");
    return a;
}

void save_array(const std::string& path, const Array& a) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    write_array(out, a);
}

Array load_array(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    return read_array(in);
}

}  // namespace nwem::io
