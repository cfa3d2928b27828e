#include "mrsi/lipid_l2.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <Eigen/SVD>

#include "mrsi/volume_io.hpp"

namespace mrsi::lipid {

namespace {

LipidBasis normalize_columns(const std::vector<Spectrum>& spectra, const std::vector<std::size_t>& ids)
{
    if (spectra.empty())
        throw DataError("build_basis: no lipid spectra supplied");
    const SpectralAxis axis = spectra.front().axis;
    LipidBasis basis{Eigen::MatrixXcd(static_cast<Eigen::Index>(axis.n_points()), 0), axis, {}, {}};
    std::vector<Eigen::VectorXcd> kept;
    for (std::size_t i = 0; i < spectra.size(); ++i) {
        const auto& s = spectra[i];
        require_same_axis(axis, s.axis, "build_basis");
        if (s.domain != Domain::Frequency)
            throw DataError("build_basis: expected frequency-domain spectra");
        const double peak = s.samples.cwiseAbs().maxCoeff();
        if (!(peak > 0.0)) {
            basis.excluded.push_back(ids[i]);
            continue;
        }
        kept.push_back(s.samples / peak);
        basis.voxels.push_back(ids[i]);
    }
    if (kept.empty())
        throw DataError("build_basis: every lipid spectrum is zero");
    basis.columns.resize(static_cast<Eigen::Index>(axis.n_points()), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j)
        basis.columns.col(static_cast<Eigen::Index>(j)) = kept[j];
    if (!basis.excluded.empty())
        std::clog << "warning: lipid basis skipped " << basis.excluded.size() << " all-zero spectra\n";
    return basis;
}

} // namespace

LipidBasis build_basis(const MrsiVolume& v)
{
    const auto scalp = v.scalp_voxels();
    if (scalp.empty())
        throw DataError("build_basis: scalp mask is empty");
    std::vector<Spectrum> spectra;
    spectra.reserve(scalp.size());
    for (auto i : scalp)
        spectra.push_back(to_frequency(v.fid(i)));
    return normalize_columns(spectra, scalp);
}

LipidBasis build_basis(const std::vector<Spectrum>& spectra)
{
    std::vector<std::size_t> ids(spectra.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
        ids[i] = i;
    return normalize_columns(spectra, ids);
}

LipidOperator::LipidOperator(Eigen::MatrixXcd eigvecs, Eigen::VectorXd eigvals, double beta, SpectralAxis axis)
    : eigvecs_(std::move(eigvecs)), eigvals_(std::move(eigvals)), beta_(beta), axis_(axis)
{
    if (!(beta_ >= 0.0) || !std::isfinite(beta_))
        throw ConfigError("LipidOperator: beta must be finite and non-negative");
    if (eigvecs_.rows() != static_cast<Eigen::Index>(axis_.n_points()) || eigvecs_.cols() != eigvals_.size())
        throw DataError("LipidOperator: eigenvector shape inconsistent with axis or eigenvalue count");
}

LipidOperator LipidOperator::with_beta(double beta) const
{
    return LipidOperator(eigvecs_, eigvals_, beta, axis_);
}

Eigen::VectorXd LipidOperator::suppression_gains() const
{
    Eigen::VectorXd g(eigvals_.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double x = beta_ * eigvals_[i];
        g[i] = x / (1.0 + x);
    }
    return g;
}

Eigen::MatrixXcd LipidOperator::dense() const
{
    const auto n = eigvecs_.rows();
    return Eigen::MatrixXcd::Identity(n, n) - eigvecs_ * suppression_gains().asDiagonal() * eigvecs_.adjoint();
}

LipidOperator build_operator(const LipidBasis& basis, double beta)
{
    if (basis.columns.cols() == 0)
        throw DataError("build_operator: empty lipid basis");
    // L = U S W^H  =>  L L^H = U S^2 U^H.
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(basis.columns, Eigen::ComputeThinU);
    if (svd.info() != Eigen::Success)
        throw NumericError("build_operator: SVD of lipid basis did not converge");
    const Eigen::VectorXd& sv = svd.singularValues();
    const double tol = sv.size() > 0 ? sv[0] * static_cast<double>(std::max(basis.columns.rows(), basis.columns.cols())) *
                                           std::numeric_limits<double>::epsilon()
                                     : 0.0;
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv[rank] > tol)
        ++rank;
    Eigen::VectorXd eigvals = sv.head(rank).array().square();
    return LipidOperator(svd.matrixU().leftCols(rank), std::move(eigvals), beta, basis.axis);
}

namespace {

void check_input(const LipidOperator& op, const Spectrum& s, const char* what)
{
    require_same_axis(op.axis(), s.axis, what);
    if (s.domain != Domain::Frequency)
        throw DataError(std::string(what) + ": expected a frequency-domain spectrum");
}

Eigen::VectorXcd lipid_component(const LipidOperator& op, const Eigen::VectorXcd& s)
{
    const Eigen::VectorXcd coeffs = op.eigvecs().adjoint() * s;
    return op.eigvecs() * (op.suppression_gains().asDiagonal() * coeffs);
}

} // namespace

Spectrum apply(const LipidOperator& op, const Spectrum& s)
{
    check_input(op, s, "lipid::apply");
    Spectrum out = s;
    out.samples -= lipid_component(op, s.samples);
    return out;
}

Spectrum project_lipid(const LipidOperator& op, const Spectrum& s)
{
    check_input(op, s, "lipid::project_lipid");
    return Spectrum(s.axis, Domain::Frequency, lipid_component(op, s.samples));
}

double mean_abs_diag(const LipidOperator& op)
{
    const Eigen::VectorXd g = op.suppression_gains();
    const auto n = op.eigvecs().rows();
    double sum = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        double removed = 0.0;
        for (Eigen::Index i = 0; i < g.size(); ++i)
            removed += std::norm(op.eigvecs()(k, i)) * g[i];
        sum += std::abs(1.0 - removed);
    }
    return sum / static_cast<double>(n);
}

double mean_abs_diag(const LipidOperator& op, double beta)
{
    return mean_abs_diag(op.with_beta(beta));
}

double mean_abs_diag_limit(const LipidOperator& op)
{
    const auto n = op.eigvecs().rows();
    // Column norms are 1 up to rounding; use them rather than assuming R/N exactly.
    return 1.0 - op.eigvecs().squaredNorm() / static_cast<double>(n);
}

Calibration calibrate_beta(const LipidOperator& op, double target, double rel_tol)
{
    if (!(target > 0.0) || target > 1.0)
        throw ConfigError("calibrate_beta: target must lie in (0, 1]");
    if (target == 1.0)
        return {0.0, 1.0, 0};
    const double limit = mean_abs_diag_limit(op);
    if (op.rank() == 0 || target <= limit) {
        std::ostringstream os;
        os << "calibrate_beta: target " << target << " unreachable; mean |diag| tends to " << limit
           << " as beta grows (rank " << op.rank() << " of " << op.axis().n_points() << ")";
        throw NumericError(os.str());
    }
    const double scale = op.eigvals()[0];
    auto value_at = [&](double log_beta) { return mean_abs_diag(op, std::pow(10.0, log_beta) / scale); };

    double lo = -12.0;
    double hi = 12.0;
    const double tol = rel_tol * target;
    if (value_at(hi) > target + tol) {
        std::ostringstream os;
        os << "calibrate_beta: target " << target << " not reached within beta*eig_max <= 1e12 (value "
           << value_at(hi) << ", limit " << limit << ")";
        throw NumericError(os.str());
    }
    Calibration cal;
    for (cal.iterations = 1; cal.iterations <= 60; ++cal.iterations) {
        const double mid = 0.5 * (lo + hi);
        const double v = value_at(mid);
        cal.beta = std::pow(10.0, mid) / scale;
        cal.achieved = v;
        if (std::abs(v - target) <= tol)
            return cal;
        // mean |diag| decreases in beta.
        if (v > target)
            lo = mid;
        else
            hi = mid;
    }
    throw NumericError("calibrate_beta: bisection did not reach tolerance in 60 iterations");
}

Calibration calibrate_beta(const LipidBasis& basis, double target, double rel_tol)
{
    return calibrate_beta(build_operator(basis, 0.0), target, rel_tol);
}

LipidOperator build_calibrated(const MrsiVolume& v, double target)
{
    const LipidOperator op = build_operator(build_basis(v), 0.0);
    return op.with_beta(calibrate_beta(op, target).beta);
}

void save_operator(const LipidOperator& op, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw FormatError(FormatError::Kind::Io, "cannot open " + path.string() + " for writing");
    out.write("LOP1", 4);
    io::put_u32(out, static_cast<std::uint32_t>(op.eigvecs().rows()));
    io::put_u32(out, static_cast<std::uint32_t>(op.rank()));
    io::put_f64(out, op.beta());
    for (Eigen::Index i = 0; i < op.eigvals().size(); ++i)
        io::put_f64(out, op.eigvals()[i]);
    for (Eigen::Index j = 0; j < op.eigvecs().cols(); ++j)
        for (Eigen::Index k = 0; k < op.eigvecs().rows(); ++k) {
            io::put_f32(out, static_cast<float>(op.eigvecs()(k, j).real()));
            io::put_f32(out, static_cast<float>(op.eigvecs()(k, j).imag()));
        }
    if (!out)
        throw FormatError(FormatError::Kind::Io, "save_operator: write failed");
}

LipidOperator load_operator(const std::filesystem::path& path, const SpectralAxis& axis)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError(FormatError::Kind::Io, "cannot open " + path.string());
    io::check_magic(in, "LOP1");
    const std::uint32_t n = io::get_u32(in);
    const std::uint32_t r = io::get_u32(in);
    if (n != axis.n_points())
        throw FormatError(FormatError::Kind::ShapeMismatch, "operator has " + std::to_string(n) +
                                                                " bins, axis has " + std::to_string(axis.n_points()));
    if (r > n)
        throw FormatError(FormatError::Kind::DimensionOverflow, "operator rank exceeds its dimension");
    const double beta = io::get_f64(in);
    Eigen::VectorXd eigvals(r);
    for (std::uint32_t i = 0; i < r; ++i)
        eigvals[i] = io::get_f64(in);
    Eigen::MatrixXcd eigvecs(n, r);
    for (std::uint32_t j = 0; j < r; ++j)
        for (std::uint32_t k = 0; k < n; ++k) {
            const float re = io::get_f32(in);
            const float im = io::get_f32(in);
            eigvecs(k, j) = cplx(re, im);
        }
    return LipidOperator(std::move(eigvecs), std::move(eigvals), beta, axis);
}

} // namespace mrsi::lipid
