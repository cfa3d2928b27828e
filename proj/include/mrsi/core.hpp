#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mrsi/error.hpp"

namespace mrsi {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;

/// Sampling grid shared by every spectrum of a dataset.
///
/// Frequency bins are fftshifted: bin k sits at (k - floor(N/2)) * bandwidth / N Hz,
/// so bin 0 is -bandwidth/2 for even N. The chemical shift of a bin is
/// ref_ppm - f_hz / transmitter_mhz, which makes ppm strictly decreasing in k.
class SpectralAxis
{
public:
    SpectralAxis(std::size_t n_points, double bandwidth_hz, double transmitter_mhz = 297.22,
                 double ref_ppm = 4.7);

    std::size_t n_points() const noexcept { return n_points_; }
    double bandwidth_hz() const noexcept { return bandwidth_hz_; }
    double transmitter_mhz() const noexcept { return transmitter_mhz_; }
    double ref_ppm() const noexcept { return ref_ppm_; }

    double dwell_s() const noexcept { return 1.0 / bandwidth_hz_; }
    double time_s(std::size_t k) const noexcept { return static_cast<double>(k) / bandwidth_hz_; }
    double bin_hz() const noexcept { return bandwidth_hz_ / static_cast<double>(n_points_); }
    double bin_ppm() const noexcept { return bin_hz() / transmitter_mhz_; }

    double index_to_hz(double k) const noexcept;
    double hz_to_index(double f_hz) const noexcept;
    double hz_to_ppm(double f_hz) const noexcept { return ref_ppm_ - f_hz / transmitter_mhz_; }
    double ppm_to_hz(double ppm) const noexcept { return (ref_ppm_ - ppm) * transmitter_mhz_; }

    double index_to_ppm(double k) const noexcept { return hz_to_ppm(index_to_hz(k)); }
    /// Fractional bin of a chemical shift. Throws OutOfRangeError outside the axis.
    double ppm_to_index(double ppm) const;

    /// Lowest and highest ppm covered (bin edges included).
    double ppm_min() const noexcept;
    double ppm_max() const noexcept;

    bool operator==(const SpectralAxis&) const = default;

private:
    std::size_t n_points_;
    double bandwidth_hz_;
    double transmitter_mhz_;
    double ref_ppm_;
};

/// Closed chemical-shift interval. Order of the two bounds does not matter.
struct PpmBand
{
    double lo = 0.0;
    double hi = 0.0;

    static PpmBand around(double center, double half_width) { return {center - half_width, center + half_width}; }

    double low() const noexcept { return lo < hi ? lo : hi; }
    double high() const noexcept { return lo < hi ? hi : lo; }
    bool contains(double ppm) const noexcept { return ppm >= low() && ppm <= high(); }
    bool empty() const noexcept { return lo == hi; }
};

/// Bins whose center ppm falls inside `band`, ascending.
std::vector<std::size_t> band_bins(const SpectralAxis& axis, const PpmBand& band);

enum class Domain : std::uint8_t { Time, Frequency };

struct Spectrum
{
    CVector samples;
    Domain domain = Domain::Time;
    SpectralAxis axis;

    Spectrum(SpectralAxis ax, Domain d) : samples(CVector::Zero(static_cast<Eigen::Index>(ax.n_points()))), domain(d), axis(ax) {}
    Spectrum(SpectralAxis ax, Domain d, CVector s);

    static Spectrum zeros(const SpectralAxis& ax, Domain d) { return Spectrum(ax, d); }

    std::size_t size() const noexcept { return static_cast<std::size_t>(samples.size()); }
    double energy() const noexcept { return samples.squaredNorm(); }
};

/// Unitary DFT (1/sqrt(N)), output fftshifted.
Spectrum to_frequency(const Spectrum& s);
/// Inverse of to_frequency.
Spectrum to_time(const Spectrum& s);

/// Raw unitary transforms on contiguous data of any length.
void fft_unitary(std::span<cplx> data, bool inverse);
void fftshift(std::span<cplx> data);
void ifftshift(std::span<cplx> data);

/// 2D grid of FIDs. Voxel (x, y) is row x*ny + y of `fids`; each row is a time-domain FID.
class MrsiVolume
{
public:
    using FidMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    MrsiVolume(std::size_t nx, std::size_t ny, SpectralAxis axis);

    std::size_t nx() const noexcept { return nx_; }
    std::size_t ny() const noexcept { return ny_; }
    std::size_t n_voxels() const noexcept { return nx_ * ny_; }
    const SpectralAxis& axis() const noexcept { return axis_; }

    std::size_t index(std::size_t x, std::size_t y) const noexcept { return x * ny_ + y; }

    FidMatrix& fids() noexcept { return fids_; }
    const FidMatrix& fids() const noexcept { return fids_; }

    Spectrum fid(std::size_t voxel) const;
    void set_fid(std::size_t voxel, const Spectrum& s);

    std::vector<std::uint8_t>& brain_mask() noexcept { return brain_; }
    const std::vector<std::uint8_t>& brain_mask() const noexcept { return brain_; }
    std::vector<std::uint8_t>& scalp_mask() noexcept { return scalp_; }
    const std::vector<std::uint8_t>& scalp_mask() const noexcept { return scalp_; }
    std::vector<double>& b0_map_hz() noexcept { return b0_; }
    const std::vector<double>& b0_map_hz() const noexcept { return b0_; }

    bool has_masks() const noexcept;
    bool has_b0() const noexcept;

    std::vector<std::size_t> brain_voxels() const;
    std::vector<std::size_t> scalp_voxels() const;

    /// Throws DataError when brain and scalp masks overlap or sizes disagree.
    void validate() const;

private:
    std::size_t nx_;
    std::size_t ny_;
    SpectralAxis axis_;
    FidMatrix fids_;
    std::vector<std::uint8_t> brain_;
    std::vector<std::uint8_t> scalp_;
    std::vector<double> b0_;
};

/// Demodulates every voxel by its B0 offset and zeroes the map.
MrsiVolume b0_correct(const MrsiVolume& v);

/// Multiplies a time-domain FID by exp(i 2 pi df t) in place.
void frequency_shift(Spectrum& fid, double df_hz);

void require_same_axis(const SpectralAxis& a, const SpectralAxis& b, const char* what);

} // namespace mrsi
