#include "mrsi/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace mrsi {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace io {

namespace {

template <typename T>
void put_raw(std::ostream& out, T v)
{
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.write(buf, sizeof(T));
}

template <typename T>
T get_raw(std::istream& in)
{
    char buf[sizeof(T)];
    if (!in.read(buf, sizeof(T)))
        throw FormatError(FormatError::Kind::Truncated, "unexpected end of file");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

} // namespace

void put_u8(std::ostream& out, std::uint8_t v) { put_raw(out, v); }
void put_u32(std::ostream& out, std::uint32_t v) { put_raw(out, v); }
void put_u64(std::ostream& out, std::uint64_t v) { put_raw(out, v); }
void put_f32(std::ostream& out, float v) { put_raw(out, v); }
void put_f64(std::ostream& out, double v) { put_raw(out, v); }

std::uint8_t get_u8(std::istream& in) { return get_raw<std::uint8_t>(in); }
std::uint32_t get_u32(std::istream& in) { return get_raw<std::uint32_t>(in); }
std::uint64_t get_u64(std::istream& in) { return get_raw<std::uint64_t>(in); }
float get_f32(std::istream& in) { return get_raw<float>(in); }
double get_f64(std::istream& in) { return get_raw<double>(in); }

void check_magic(std::istream& in, const char (&magic)[5])
{
    char buf[4];
    if (!in.read(buf, 4))
        throw FormatError(FormatError::Kind::Truncated, "file too short for magic");
    if (std::memcmp(buf, magic, 4) != 0)
        throw FormatError(FormatError::Kind::BadMagic,
                          std::string("bad magic: expected \"") + magic + "\", found \"" + std::string(buf, 4) + "\"");
}

} // namespace io

namespace {

constexpr std::uint8_t kHasMasks = 1;
constexpr std::uint8_t kHasB0 = 2;

// Upper bound on complex samples we agree to allocate (2^34 * 8 bytes = 128 GiB).
constexpr std::uint64_t kMaxSamples = std::uint64_t{1} << 34;

std::streamoff remaining_bytes(std::istream& in)
{
    const auto here = in.tellg();
    if (here < 0)
        return -1;
    in.seekg(0, std::ios::end);
    const auto end = in.tellg();
    in.seekg(here);
    if (end < 0)
        return -1;
    return end - here;
}

} // namespace

void write_volume(const MrsiVolume& v, std::ostream& out)
{
    v.validate();
    out.write("MRSX", 4);
    io::put_u32(out, kMrsxVersion);
    io::put_u32(out, static_cast<std::uint32_t>(v.nx()));
    io::put_u32(out, static_cast<std::uint32_t>(v.ny()));
    io::put_u32(out, static_cast<std::uint32_t>(v.axis().n_points()));
    io::put_f64(out, v.axis().bandwidth_hz());
    io::put_f64(out, v.axis().transmitter_mhz());
    io::put_f64(out, v.axis().ref_ppm());
    std::uint8_t flags = 0;
    if (v.has_masks())
        flags |= kHasMasks;
    if (v.has_b0())
        flags |= kHasB0;
    io::put_u8(out, flags);

    const auto& fids = v.fids();
    std::vector<float> row(2 * static_cast<std::size_t>(fids.cols()));
    for (Eigen::Index i = 0; i < fids.rows(); ++i) {
        for (Eigen::Index t = 0; t < fids.cols(); ++t) {
            row[2 * t] = static_cast<float>(fids(i, t).real());
            row[2 * t + 1] = static_cast<float>(fids(i, t).imag());
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (flags & kHasMasks) {
        for (auto b : v.brain_mask())
            io::put_u8(out, b ? 1 : 0);
        for (auto b : v.scalp_mask())
            io::put_u8(out, b ? 1 : 0);
    }
    if (flags & kHasB0)
        for (double b : v.b0_map_hz())
            io::put_f64(out, b);
    if (!out)
        throw FormatError(FormatError::Kind::Io, "write_volume: stream error");
}

void write_volume(const MrsiVolume& v, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw FormatError(FormatError::Kind::Io, "cannot open " + path.string() + " for writing");
    write_volume(v, out);
}

MrsiVolume read_volume(std::istream& in)
{
    io::check_magic(in, "MRSX");
    const std::uint32_t version = io::get_u32(in);
    if (version != kMrsxVersion)
        throw FormatError(FormatError::Kind::VersionMismatch,
                          "MRSX version " + std::to_string(version) + " not supported (expected " +
                              std::to_string(kMrsxVersion) + ")");
    const std::uint64_t nx = io::get_u32(in);
    const std::uint64_t ny = io::get_u32(in);
    const std::uint64_t np = io::get_u32(in);
    const double bw = io::get_f64(in);
    const double mhz = io::get_f64(in);
    const double ref = io::get_f64(in);
    const std::uint8_t flags = io::get_u8(in);

    if (nx == 0 || ny == 0 || np == 0)
        throw FormatError(FormatError::Kind::DimensionOverflow, "MRSX header declares an empty dimension");
    if (nx * ny > kMaxSamples || nx * ny * np > kMaxSamples)
        throw FormatError(FormatError::Kind::DimensionOverflow, "MRSX header dimensions too large");

    const std::uint64_t nvox = nx * ny;
    std::uint64_t payload = nvox * np * 8;
    if (flags & kHasMasks)
        payload += 2 * nvox;
    if (flags & kHasB0)
        payload += 8 * nvox;
    if (const auto rem = remaining_bytes(in); rem >= 0 && static_cast<std::uint64_t>(rem) < payload)
        throw FormatError(FormatError::Kind::Truncated, "MRSX payload truncated: header declares " +
                                                            std::to_string(payload) + " bytes, " +
                                                            std::to_string(rem) + " available");

    SpectralAxis axis = [&] {
        try {
            return SpectralAxis(np, bw, mhz, ref);
        } catch (const ConfigError& e) {
            throw FormatError(FormatError::Kind::ShapeMismatch, std::string("MRSX axis invalid: ") + e.what());
        }
    }();
    MrsiVolume v(nx, ny, axis);
    auto& fids = v.fids();
    std::vector<float> row(2 * np);
    for (Eigen::Index i = 0; i < fids.rows(); ++i) {
        if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float))))
            throw FormatError(FormatError::Kind::Truncated, "MRSX sample payload truncated");
        for (Eigen::Index t = 0; t < fids.cols(); ++t)
            fids(i, t) = cplx(row[2 * t], row[2 * t + 1]);
    }
    if (flags & kHasMasks) {
        v.brain_mask().resize(nvox);
        v.scalp_mask().resize(nvox);
        for (auto& b : v.brain_mask())
            b = io::get_u8(in) ? 1 : 0;
        for (auto& b : v.scalp_mask())
            b = io::get_u8(in) ? 1 : 0;
    }
    if (flags & kHasB0) {
        v.b0_map_hz().resize(nvox);
        for (auto& b : v.b0_map_hz())
            b = io::get_f64(in);
    }
    v.validate();
    return v;
}

MrsiVolume read_volume(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError(FormatError::Kind::Io, "cannot open " + path.string());
    return read_volume(in);
}

} // namespace mrsi
