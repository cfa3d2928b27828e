#include "mrsi/lowrank.hpp"

#include <algorithm>
#include <string>

#include <Eigen/SVD>

namespace mrsi::lowrank {

Eigen::MatrixXcd casorati(const MrsiVolume& v)
{
    const auto brain = v.brain_voxels();
    Eigen::MatrixXcd c(static_cast<Eigen::Index>(brain.size()), v.fids().cols());
    for (std::size_t r = 0; r < brain.size(); ++r)
        c.row(static_cast<Eigen::Index>(r)) = v.fids().row(static_cast<Eigen::Index>(brain[r]));
    return c;
}

LowRankModel fit(const MrsiVolume& v, std::size_t K)
{
    if (!v.has_masks())
        throw DataError("lowrank::fit: volume has no brain mask");
    LowRankModel m;
    m.voxel_index = v.brain_voxels();
    if (m.voxel_index.empty())
        throw DataError("lowrank::fit: brain mask is empty");
    const std::size_t limit = std::min(m.voxel_index.size(), v.axis().n_points());
    if (K > limit)
        throw ConfigError("lowrank::fit: rank " + std::to_string(K) + " exceeds min(brain voxels, points) = " +
                          std::to_string(limit));
    m.K = K;
    m.nx = v.nx();
    m.ny = v.ny();
    m.axis = v.axis();
    m.brain_mask = v.brain_mask();
    m.scalp_mask = v.scalp_mask();
    m.b0_map_hz = v.b0_map_hz();

    const Eigen::MatrixXcd c = casorati(v);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
        throw NumericError("lowrank::fit: SVD did not converge");
    const auto k = static_cast<Eigen::Index>(K);
    m.singular_values = svd.singularValues();
    m.U = svd.matrixU().leftCols(k) * m.singular_values.head(k).asDiagonal();
    m.V = svd.matrixV().leftCols(k).adjoint();
    return m;
}

MrsiVolume reconstruct(const LowRankModel& model)
{
    MrsiVolume out(model.nx, model.ny, model.axis);
    out.brain_mask() = model.brain_mask;
    out.scalp_mask() = model.scalp_mask;
    out.b0_map_hz() = model.b0_map_hz;
    if (model.K == 0)
        return out;
    const Eigen::MatrixXcd rows = model.U * model.V;
    for (std::size_t r = 0; r < model.voxel_index.size(); ++r)
        out.fids().row(static_cast<Eigen::Index>(model.voxel_index[r])) = rows.row(static_cast<Eigen::Index>(r));
    return out;
}

MrsiVolume denoise(const MrsiVolume& v, std::size_t K)
{
    return reconstruct(fit(v, K));
}

} // namespace mrsi::lowrank
