#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mrsi/core.hpp"
#include "mrsi/hlsvd.hpp"
#include "mrsi/lipid_l2.hpp"
#include "mrsi/ynet.hpp"

namespace mrsi::metrics {

struct BandRanges
{
    PpmBand whole{4.7, 0.7};
    PpmBand metabolite{4.2, 1.9};
    PpmBand lipid{1.9, 0.7};
    PpmBand water = hlsvd::kWaterBand;

    /// Throws OutOfRangeError if a band leaves the axis.
    void validate(const SpectralAxis& axis) const;
};

inline constexpr PpmBand kSnrPeakBand{2.10, 1.90};
inline constexpr PpmBand kSnrNoiseBand{0.40, 0.00};
inline constexpr double kNaaPpm = 2.008;

/// 100 * ||pred - truth|| / ||truth|| over the bins of `band` (frequency domain).
/// Throws DataError when truth has no energy in the band.
double nrmse(const Spectrum& pred, const Spectrum& truth, const PpmBand& band);

/// Largest real part in `peak` over the standard deviation of the real part in `noise`.
double snr(const Spectrum& s, const PpmBand& peak = kSnrPeakBand, const PpmBand& noise = kSnrNoiseBand);

/// Full width at half maximum (ppm) of the real (absorption) part around the
/// tallest point within half the search window of `peak_ppm`; assumes a phased spectrum.
/// Throws NumericError if a half-height crossing is not found within +-search_ppm.
double fwhm(const Spectrum& s, double peak_ppm, double search_ppm = 0.3);

/// Trapezoidal integral of |S| over the bins of `band`, in (signal units) x ppm.
double band_integral(const Spectrum& s, const PpmBand& band);

/// Per-voxel band integral of the frequency-domain spectrum. Voxels outside the
/// brain mask are 0 (every voxel counts when the volume has no masks).
std::vector<double> residual_map(const MrsiVolume& v, const PpmBand& band);

// ---------------------------------------------------------------------------
// Methods

enum class Method { None, L2, Hlsvd, HlsvdL2, Lipnet, Walinet, HlsvdLipnet };

Method parse_method(const std::string& name);
std::string to_string(Method m);
std::vector<Method> parse_methods(const std::string& comma_list);

/// What a method may need; unset pointers raise ConfigError only when used.
struct MethodContext
{
    const lipid::LipidOperator* op = nullptr;
    const ynet::YNetWeights<float>* walinet = nullptr;
    const ynet::YNetWeights<float>* lipnet = nullptr;
    std::size_t hlsvd_rank = hlsvd::kDefaultRank;
    PpmBand water_band = hlsvd::kWaterBand;
    std::size_t threads = 1;
};

bool needs_operator(Method m);

/// Cleans the given voxels of a (B0-corrected) volume. Returns frequency-domain
/// spectra aligned with `voxels`.
std::vector<Spectrum> run_method(Method m, const MrsiVolume& v, const std::vector<std::size_t>& voxels,
                                 const MethodContext& ctx);

/// Applies `m` to the brain voxels (all voxels without masks); other voxels are copied.
MrsiVolume remove(Method m, const MrsiVolume& v, const MethodContext& ctx);

// ---------------------------------------------------------------------------
// Reports

struct VoxelRow
{
    std::size_t x = 0, y = 0;
    std::string method;
    double nrmse_whole = 0.0, nrmse_metab = 0.0, nrmse_lipid = 0.0;
    double snr = 0.0, fwhm_ppm = 0.0;
    double residual_lipid = 0.0, residual_water = 0.0;
    double wall_ms = 0.0;
};

struct MethodSummary
{
    std::string method;
    std::size_t n_voxels = 0;
    double wall_ms_total = 0.0;
    std::array<double, 3> nrmse_whole{}, nrmse_metab{}, nrmse_lipid{}; ///< q25, median, q75
    double residual_lipid_median = 0.0;
    double residual_water_median = 0.0;
};

struct Report
{
    std::vector<VoxelRow> rows;
    std::vector<MethodSummary> summaries;
};

/// Linear-interpolation quantile (q in [0, 1]) of a non-empty sample.
double quantile(std::vector<double> values, double q);

/// Metrics of already-cleaned frequency-domain spectra against the truth volume.
std::vector<VoxelRow> score(const std::string& label, const std::vector<Spectrum>& cleaned, const MrsiVolume& truth,
                            const std::vector<std::size_t>& voxels, double wall_ms_per_voxel,
                            const BandRanges& bands = {});

MethodSummary summarize(const std::string& method, const std::vector<VoxelRow>& rows);

struct CompareOptions
{
    BandRanges bands{};
    /// Voxels shown in the spectrum overlay plots.
    std::size_t plot_voxels = 4;
    bool include_timing = true;
};

/// Runs every method over the brain voxels of `v` (B0-corrected) and scores it
/// against `truth` (clean metabolite FIDs). Writes voxels.csv, aggregate.csv,
/// spectra_<method>.svg and nrmse_box.svg into out_dir when it is non-empty.
/// Inputs are never modified.
Report compare(const MrsiVolume& v, const MrsiVolume& truth, const std::vector<Method>& methods,
               const MethodContext& ctx, const std::filesystem::path& out_dir, const CompareOptions& opts = {});

void write_voxel_csv(const std::vector<VoxelRow>& rows, std::ostream& out, bool include_timing = true);
void write_aggregate_csv(const std::vector<MethodSummary>& summaries, std::ostream& out, bool include_timing = true);

// ---------------------------------------------------------------------------
// Timing

struct BenchRow
{
    std::string method;
    std::size_t threads = 1;
    std::size_t nx = 0, ny = 0;
    std::size_t n_voxels = 0; ///< brain voxels processed
    double wall_ms = 0.0;
};

struct BenchOptions
{
    std::vector<std::size_t> grid_sizes{16, 24, 32};
    std::vector<std::size_t> threads{1};
    sim::PhantomConfig phantom{};
    std::size_t hlsvd_rank = hlsvd::kDefaultRank;
    std::size_t batch_size = 4;
};

struct BenchResult
{
    std::vector<BenchRow> rows;
    /// Coefficient of determination of HLSVD wall time against voxel count
    /// (single-thread rows); NaN with fewer than 3 sizes.
    double hlsvd_r2 = 0.0;
    /// HLSVD over network wall time at the largest grid, single thread.
    double speedup = 0.0;
};

/// Times HLSVD water removal and network inference over the brain voxels of
/// phantoms of each grid size. The lipid operator is built from the phantom
/// scalp before timing starts.
BenchResult bench(const ynet::YNetWeights<float>& weights, const BenchOptions& opts);

/// R^2 of the least-squares line through (x, y).
double linear_r2(const std::vector<double>& x, const std::vector<double>& y);

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out);

/// Minimal SVG line plot of named series sharing one x axis.
void write_line_svg(std::ostream& out, const std::string& title, const std::vector<double>& x,
                    const std::vector<std::pair<std::string, std::vector<double>>>& series, bool reverse_x = false);
/// Box summary (q25/median/q75 boxes) per method.
void write_box_svg(std::ostream& out, const std::string& title, const std::vector<MethodSummary>& summaries);

} // namespace mrsi::metrics
