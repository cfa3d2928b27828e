#pragma once

#include <cstddef>
#include <vector>

#include "mrsi/core.hpp"

namespace mrsi::hlsvd {

/// One damped complex exponential amp * e^{i phase} * e^{(i 2 pi f - d) t}.
struct Component
{
    double frequency_hz = 0.0;
    double damping_per_s = 0.0;
    double amplitude = 0.0;
    double phase_rad = 0.0;
    /// The fitted pole had |z| > 1; damping was clamped to zero.
    bool growing = false;
};

/// Hankel rows for an N-point FID: ceil(N/2). Columns: N - rows + 1.
std::size_t hankel_rows(std::size_t n_points) noexcept;
std::size_t hankel_cols(std::size_t n_points) noexcept;

/// Largest admissible rank for an N-point FID.
std::size_t max_rank(std::size_t n_points) noexcept;

/// Fits `rank` damped sinusoids to a time-domain FID.
///
/// Truncated SVD of the Hankel matrix H[i,j] = fid[i+j]; the poles are the
/// eigenvalues of the least-squares solution of U_top Z = U_bottom, and the
/// complex amplitudes come from a least-squares fit of all N samples against
/// the pole Vandermonde matrix.
std::vector<Component> decompose(const Spectrum& fid, std::size_t rank);

/// Time-domain sum of the given components on `axis`.
Spectrum reconstruct(const std::vector<Component>& components, const SpectralAxis& axis);

/// Components whose chemical shift lies inside `band`.
std::vector<Component> select_band(const std::vector<Component>& components, const SpectralAxis& axis,
                                   const PpmBand& band);

inline constexpr std::size_t kDefaultRank = 32;
inline constexpr PpmBand kWaterBand{4.2, 5.2};

/// Subtracts the in-band part of a rank-`rank` HSVD model from `fid`.
Spectrum remove_water(const Spectrum& fid, std::size_t rank = kDefaultRank, const PpmBand& band = kWaterBand);

} // namespace mrsi::hlsvd
