#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "mrsi/core.hpp"

namespace mrsi::lipid {

/// Frequency-domain lipid spectra, one column per contributing voxel.
struct LipidBasis
{
    Eigen::MatrixXcd columns;
    SpectralAxis axis;
    /// Voxel index of each column (empty when built from raw spectra).
    std::vector<std::size_t> voxels;
    /// Scalp voxels dropped because their spectrum was identically zero.
    std::vector<std::size_t> excluded;
};

/// Columns are the scalp-voxel spectra, each scaled to unit peak magnitude.
LipidBasis build_basis(const MrsiVolume& v);

/// Same normalization for an arbitrary set of frequency-domain spectra.
LipidBasis build_basis(const std::vector<Spectrum>& spectra);

/// The suppression operator (1 + beta L L^H)^{-1}, kept as the thin
/// eigendecomposition L L^H = V diag(eigvals) V^H.
class LipidOperator
{
public:
    LipidOperator(Eigen::MatrixXcd eigvecs, Eigen::VectorXd eigvals, double beta, SpectralAxis axis);

    const Eigen::MatrixXcd& eigvecs() const noexcept { return eigvecs_; }
    const Eigen::VectorXd& eigvals() const noexcept { return eigvals_; }
    double beta() const noexcept { return beta_; }
    const SpectralAxis& axis() const noexcept { return axis_; }
    std::size_t rank() const noexcept { return static_cast<std::size_t>(eigvals_.size()); }

    /// Same eigenbasis, different regularization weight.
    LipidOperator with_beta(double beta) const;

    /// beta*s/(1+beta*s) per eigenvalue: the weight removed along each eigenvector.
    Eigen::VectorXd suppression_gains() const;

    /// Dense N x N matrix; for tests and diagnostics.
    Eigen::MatrixXcd dense() const;

private:
    Eigen::MatrixXcd eigvecs_;
    Eigen::VectorXd eigvals_;
    double beta_;
    SpectralAxis axis_;
};

LipidOperator build_operator(const LipidBasis& basis, double beta);

/// L s.
Spectrum apply(const LipidOperator& op, const Spectrum& s);
/// (1 - L) s.
Spectrum project_lipid(const LipidOperator& op, const Spectrum& s);

/// (1/N) sum_k |L_kk|, evaluated from the eigendecomposition.
double mean_abs_diag(const LipidOperator& op);
double mean_abs_diag(const LipidOperator& op, double beta);

/// mean_abs_diag as beta -> infinity: 1 - R/N.
double mean_abs_diag_limit(const LipidOperator& op);

inline constexpr double kDefaultTarget = 0.938;

struct Calibration
{
    double beta = 0.0;
    double achieved = 1.0;
    int iterations = 0;
};

/// Bisection on log10(beta * eig_max) in [-12, 12] until the mean absolute
/// diagonal is within rel_tol * target of `target`.
Calibration calibrate_beta(const LipidOperator& op, double target = kDefaultTarget, double rel_tol = 1e-3);
Calibration calibrate_beta(const LipidBasis& basis, double target = kDefaultTarget, double rel_tol = 1e-3);

/// Basis, eigendecomposition and calibrated beta in one call.
LipidOperator build_calibrated(const MrsiVolume& v, double target = kDefaultTarget);

/// "LOP1" | u32 N | u32 R | f64 beta | R x f64 eigvals | N*R x (f32 re, f32 im), column-major.
void save_operator(const LipidOperator& op, const std::filesystem::path& path);
LipidOperator load_operator(const std::filesystem::path& path, const SpectralAxis& axis);

} // namespace mrsi::lipid
