#include "mrsi/hlsvd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace mrsi::hlsvd {

namespace {

// Poles this close to the origin describe a signal that has fully decayed after one sample.
constexpr double kMinPoleModulus = 1e-12;

} // namespace

std::size_t hankel_rows(std::size_t n_points) noexcept
{
    return (n_points + 1) / 2;
}

std::size_t hankel_cols(std::size_t n_points) noexcept
{
    return n_points - hankel_rows(n_points) + 1;
}

std::size_t max_rank(std::size_t n_points) noexcept
{
    return std::min(hankel_rows(n_points), hankel_cols(n_points));
}

std::vector<Component> decompose(const Spectrum& fid, std::size_t rank)
{
    if (fid.domain != Domain::Time)
        throw DataError("hsvd_decompose: expected a time-domain FID");
    const std::size_t n = fid.size();
    if (rank == 0)
        throw ConfigError("hsvd_decompose: rank must be at least 1");
    if (n < 2 || rank > max_rank(n))
        throw ConfigError("hsvd_decompose: rank " + std::to_string(rank) + " too large for " + std::to_string(n) +
                          " points (max " + std::to_string(max_rank(n)) + ")");

    const auto rows = static_cast<Eigen::Index>(hankel_rows(n));
    const auto cols = static_cast<Eigen::Index>(hankel_cols(n));
    const auto r = static_cast<Eigen::Index>(rank);

    Eigen::MatrixXcd hankel(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        hankel.col(j) = fid.samples.segment(j, rows);

    Eigen::BDCSVD<Eigen::MatrixXcd> svd(hankel, Eigen::ComputeThinU);
    if (svd.info() != Eigen::Success)
        throw NumericError("hsvd_decompose: SVD did not converge");

    const Eigen::MatrixXcd u = svd.matrixU().leftCols(r);
    const Eigen::MatrixXcd u_top = u.topRows(rows - 1);
    const Eigen::MatrixXcd u_bottom = u.bottomRows(rows - 1);
    const Eigen::MatrixXcd z = u_top.completeOrthogonalDecomposition().solve(u_bottom);

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(z, false);
    if (eig.info() != Eigen::Success)
        throw NumericError("hsvd_decompose: pole eigenproblem did not converge");

    const double bw = fid.axis.bandwidth_hz();
    std::vector<Component> comps(rank);
    Eigen::VectorXcd poles(r);
    for (Eigen::Index k = 0; k < r; ++k) {
        cplx pole = eig.eigenvalues()[k];
        double mod = std::abs(pole);
        auto& c = comps[static_cast<std::size_t>(k)];
        if (!std::isfinite(mod)) {
            pole = cplx(1.0, 0.0);
            mod = 1.0;
        }
        if (mod > 1.0) {
            c.growing = true;
            mod = 1.0;
        }
        mod = std::max(mod, kMinPoleModulus);
        const double angle = std::arg(pole);
        c.frequency_hz = angle * bw / (2.0 * std::numbers::pi);
        c.damping_per_s = -std::log(mod) * bw;
        poles[k] = std::polar(mod, angle);
    }

    // Amplitudes from all N samples against the (clamped) pole Vandermonde matrix.
    Eigen::MatrixXcd vander(static_cast<Eigen::Index>(n), r);
    for (Eigen::Index k = 0; k < r; ++k) {
        cplx p(1.0, 0.0);
        for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(n); ++t) {
            vander(t, k) = p;
            p *= poles[k];
        }
    }
    const Eigen::VectorXcd amps = vander.completeOrthogonalDecomposition().solve(fid.samples);
    for (Eigen::Index k = 0; k < r; ++k) {
        auto& c = comps[static_cast<std::size_t>(k)];
        const cplx a = amps[k];
        c.amplitude = std::isfinite(std::abs(a)) ? std::abs(a) : 0.0;
        c.phase_rad = c.amplitude > 0.0 ? std::arg(a) : 0.0;
    }
    std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) { return a.amplitude > b.amplitude; });
    return comps;
}

Spectrum reconstruct(const std::vector<Component>& components, const SpectralAxis& axis)
{
    Spectrum out(axis, Domain::Time);
    const double dt = axis.dwell_s();
    const auto n = static_cast<Eigen::Index>(axis.n_points());
    for (const auto& c : components) {
        const double damping = std::max(0.0, c.damping_per_s);
        const cplx step = std::exp(cplx(-damping * dt, 2.0 * std::numbers::pi * c.frequency_hz * dt));
        cplx value = std::polar(c.amplitude, c.phase_rad);
        for (Eigen::Index t = 0; t < n; ++t) {
            out.samples[t] += value;
            value *= step;
        }
    }
    return out;
}

std::vector<Component> select_band(const std::vector<Component>& components, const SpectralAxis& axis,
                                   const PpmBand& band)
{
    std::vector<Component> out;
    if (band.empty())
        return out;
    for (const auto& c : components)
        if (band.contains(axis.hz_to_ppm(c.frequency_hz)))
            out.push_back(c);
    return out;
}

Spectrum remove_water(const Spectrum& fid, std::size_t rank, const PpmBand& band)
{
    if (fid.domain != Domain::Time)
        throw DataError("remove_water: expected a time-domain FID");
    if (band.empty())
        return fid;
    const auto in_band = select_band(decompose(fid, rank), fid.axis, band);
    if (in_band.empty())
        return fid;
    Spectrum out = fid;
    out.samples -= reconstruct(in_band, fid.axis).samples;
    return out;
}

} // namespace mrsi::hlsvd
