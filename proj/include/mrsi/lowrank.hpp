#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "mrsi/core.hpp"

namespace mrsi::lowrank {

inline constexpr std::size_t kDefaultRank = 40;

/// Brain-voxel Casorati matrix C ~= U V, U already carrying the singular values.
struct LowRankModel
{
    Eigen::MatrixXcd U; ///< n_brain x K
    Eigen::MatrixXcd V; ///< K x n_points
    std::size_t K = 0;
    /// Row r of U belongs to voxel voxel_index[r] (= x*ny + y).
    std::vector<std::size_t> voxel_index;
    std::size_t nx = 0;
    std::size_t ny = 0;
    SpectralAxis axis{1, 1.0};
    std::vector<std::uint8_t> brain_mask;
    std::vector<std::uint8_t> scalp_mask;
    std::vector<double> b0_map_hz;

    /// Singular values of the full Casorati matrix (all of them, for diagnostics).
    Eigen::VectorXd singular_values;
};

/// Time-domain Casorati matrix of the brain voxels, one row per voxel.
Eigen::MatrixXcd casorati(const MrsiVolume& v);

/// Throws DataError on an empty brain mask, ConfigError if K exceeds min(n_brain, n_points).
LowRankModel fit(const MrsiVolume& v, std::size_t K = kDefaultRank);

/// Brain voxels get rows of U V; everything else is zero.
MrsiVolume reconstruct(const LowRankModel& model);

/// fit + reconstruct.
MrsiVolume denoise(const MrsiVolume& v, std::size_t K = kDefaultRank);

} // namespace mrsi::lowrank
