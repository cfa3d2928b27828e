#include "mrsi/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include <fftw3.h>

namespace mrsi {

SpectralAxis::SpectralAxis(std::size_t n_points, double bandwidth_hz, double transmitter_mhz, double ref_ppm)
    : n_points_(n_points), bandwidth_hz_(bandwidth_hz), transmitter_mhz_(transmitter_mhz), ref_ppm_(ref_ppm)
{
    if (n_points == 0)
        throw ConfigError("SpectralAxis: n_points must be positive");
    if (!(bandwidth_hz > 0.0) || !std::isfinite(bandwidth_hz))
        throw ConfigError("SpectralAxis: bandwidth_hz must be positive");
    if (!(transmitter_mhz > 0.0) || !std::isfinite(transmitter_mhz))
        throw ConfigError("SpectralAxis: transmitter_mhz must be positive");
    if (!std::isfinite(ref_ppm))
        throw ConfigError("SpectralAxis: ref_ppm must be finite");
}

double SpectralAxis::index_to_hz(double k) const noexcept
{
    const double center = static_cast<double>(n_points_ / 2);
    return (k - center) * bin_hz();
}

double SpectralAxis::hz_to_index(double f_hz) const noexcept
{
    return f_hz / bin_hz() + static_cast<double>(n_points_ / 2);
}

double SpectralAxis::ppm_to_index(double ppm) const
{
    const double k = hz_to_index(ppm_to_hz(ppm));
    if (!(k >= -0.5 && k <= static_cast<double>(n_points_) - 0.5)) {
        std::ostringstream os;
        os << "ppm " << ppm << " outside axis range [" << ppm_min() << ", " << ppm_max() << "]";
        throw OutOfRangeError(os.str());
    }
    return k;
}

double SpectralAxis::ppm_min() const noexcept
{
    return index_to_ppm(static_cast<double>(n_points_) - 0.5);
}

double SpectralAxis::ppm_max() const noexcept
{
    return index_to_ppm(-0.5);
}

std::vector<std::size_t> band_bins(const SpectralAxis& axis, const PpmBand& band)
{
    std::vector<std::size_t> bins;
    if (band.empty())
        return bins;
    for (std::size_t k = 0; k < axis.n_points(); ++k)
        if (band.contains(axis.index_to_ppm(static_cast<double>(k))))
            bins.push_back(k);
    return bins;
}

Spectrum::Spectrum(SpectralAxis ax, Domain d, CVector s) : samples(std::move(s)), domain(d), axis(ax)
{
    if (static_cast<std::size_t>(samples.size()) != axis.n_points())
        throw DataError("Spectrum: sample count does not match axis");
}

namespace {

// FFTW planning is not thread-safe; execution of an existing plan is.
class PlanCache
{
public:
    fftw_plan get(std::size_t n, bool inverse)
    {
        std::lock_guard lock(mutex_);
        auto key = std::make_pair(n, inverse);
        if (auto it = plans_.find(key); it != plans_.end())
            return it->second;
        auto* in = fftw_alloc_complex(n);
        auto* out = fftw_alloc_complex(n);
        fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), in, out, inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(in);
        fftw_free(out);
        if (p == nullptr)
            throw NumericError("FFTW failed to create a plan");
        plans_.emplace(key, p);
        return p;
    }

    ~PlanCache()
    {
        for (auto& [key, p] : plans_)
            fftw_destroy_plan(p);
    }

private:
    std::mutex mutex_;
    std::map<std::pair<std::size_t, bool>, fftw_plan> plans_;
};

PlanCache& plan_cache()
{
    static PlanCache cache;
    return cache;
}

} // namespace

void fft_unitary(std::span<cplx> data, bool inverse)
{
    const std::size_t n = data.size();
    if (n == 0)
        return;
    fftw_plan p = plan_cache().get(n, inverse);
    std::vector<cplx> out(n);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(data.data()), reinterpret_cast<fftw_complex*>(out.data()));
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t k = 0; k < n; ++k)
        data[k] = out[k] * scale;
}

void fftshift(std::span<cplx> data)
{
    const std::size_t n = data.size();
    std::rotate(data.begin(), data.begin() + static_cast<std::ptrdiff_t>((n + 1) / 2), data.end());
}

void ifftshift(std::span<cplx> data)
{
    const std::size_t n = data.size();
    std::rotate(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(n / 2), data.end());
}

Spectrum to_frequency(const Spectrum& s)
{
    if (s.domain != Domain::Time)
        throw DataError("to_frequency: spectrum is already in the frequency domain");
    Spectrum out = s;
    std::span<cplx> view(out.samples.data(), out.size());
    fft_unitary(view, false);
    fftshift(view);
    out.domain = Domain::Frequency;
    return out;
}

Spectrum to_time(const Spectrum& s)
{
    if (s.domain != Domain::Frequency)
        throw DataError("to_time: spectrum is already in the time domain");
    Spectrum out = s;
    std::span<cplx> view(out.samples.data(), out.size());
    ifftshift(view);
    fft_unitary(view, true);
    out.domain = Domain::Time;
    return out;
}

MrsiVolume::MrsiVolume(std::size_t nx, std::size_t ny, SpectralAxis axis) : nx_(nx), ny_(ny), axis_(axis)
{
    if (nx == 0 || ny == 0)
        throw ConfigError("MrsiVolume: dimensions must be positive");
    fids_ = FidMatrix::Zero(static_cast<Eigen::Index>(nx * ny), static_cast<Eigen::Index>(axis.n_points()));
}

Spectrum MrsiVolume::fid(std::size_t voxel) const
{
    return Spectrum(axis_, Domain::Time, fids_.row(static_cast<Eigen::Index>(voxel)).transpose());
}

void MrsiVolume::set_fid(std::size_t voxel, const Spectrum& s)
{
    if (s.domain != Domain::Time)
        throw DataError("MrsiVolume::set_fid: expected a time-domain FID");
    require_same_axis(axis_, s.axis, "MrsiVolume::set_fid");
    fids_.row(static_cast<Eigen::Index>(voxel)) = s.samples.transpose();
}

bool MrsiVolume::has_masks() const noexcept
{
    return !brain_.empty() || !scalp_.empty();
}

bool MrsiVolume::has_b0() const noexcept
{
    return !b0_.empty();
}

std::vector<std::size_t> MrsiVolume::brain_voxels() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < brain_.size(); ++i)
        if (brain_[i])
            out.push_back(i);
    return out;
}

std::vector<std::size_t> MrsiVolume::scalp_voxels() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < scalp_.size(); ++i)
        if (scalp_[i])
            out.push_back(i);
    return out;
}

void MrsiVolume::validate() const
{
    const std::size_t n = n_voxels();
    if (has_masks() && (brain_.size() != n || scalp_.size() != n))
        throw DataError("MrsiVolume: mask size does not match voxel count");
    if (has_b0() && b0_.size() != n)
        throw DataError("MrsiVolume: B0 map size does not match voxel count");
    for (std::size_t i = 0; i < brain_.size() && i < scalp_.size(); ++i)
        if (brain_[i] && scalp_[i])
            throw DataError("MrsiVolume: brain and scalp masks overlap");
}

void frequency_shift(Spectrum& fid, double df_hz)
{
    const double w = 2.0 * std::numbers::pi * df_hz * fid.axis.dwell_s();
    for (Eigen::Index k = 0; k < fid.samples.size(); ++k)
        fid.samples[k] *= std::polar(1.0, w * static_cast<double>(k));
}

MrsiVolume b0_correct(const MrsiVolume& v)
{
    MrsiVolume out = v;
    if (!v.has_b0())
        return out;
    const double dt = v.axis().dwell_s();
    auto& fids = out.fids();
    for (std::size_t i = 0; i < v.n_voxels(); ++i) {
        const double df = v.b0_map_hz()[i];
        if (df == 0.0)
            continue;
        const double w = -2.0 * std::numbers::pi * df * dt;
        for (Eigen::Index k = 0; k < fids.cols(); ++k)
            fids(static_cast<Eigen::Index>(i), k) *= std::polar(1.0, w * static_cast<double>(k));
    }
    std::fill(out.b0_map_hz().begin(), out.b0_map_hz().end(), 0.0);
    return out;
}

void require_same_axis(const SpectralAxis& a, const SpectralAxis& b, const char* what)
{
    if (!(a == b))
        throw AxisMismatchError(std::string(what) + ": spectral axes differ");
}

} // namespace mrsi
