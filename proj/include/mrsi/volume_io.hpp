#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "mrsi/core.hpp"

namespace mrsi {

/// MRSX layout, all little-endian:
///   "MRSX" | u32 version | u32 nx | u32 ny | u32 n_points |
///   f64 bandwidth_hz | f64 transmitter_mhz | f64 ref_ppm | u8 flags |
///   nx*ny*n_points x (f32 re, f32 im) |
///   [flags&1] nx*ny u8 brain, nx*ny u8 scalp | [flags&2] nx*ny f64 b0 (Hz)
inline constexpr std::uint32_t kMrsxVersion = 1;

void write_volume(const MrsiVolume& v, std::ostream& out);
void write_volume(const MrsiVolume& v, const std::filesystem::path& path);

MrsiVolume read_volume(std::istream& in);
MrsiVolume read_volume(const std::filesystem::path& path);

namespace io {

// Little-endian primitive helpers shared by the binary formats.
void put_u8(std::ostream& out, std::uint8_t v);
void put_u32(std::ostream& out, std::uint32_t v);
void put_u64(std::ostream& out, std::uint64_t v);
void put_f32(std::ostream& out, float v);
void put_f64(std::ostream& out, double v);

std::uint8_t get_u8(std::istream& in);
std::uint32_t get_u32(std::istream& in);
std::uint64_t get_u64(std::istream& in);
float get_f32(std::istream& in);
double get_f64(std::istream& in);

void check_magic(std::istream& in, const char (&magic)[5]);

} // namespace io

} // namespace mrsi
