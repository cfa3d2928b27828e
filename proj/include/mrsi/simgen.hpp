#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mrsi/core.hpp"
#include "mrsi/hlsvd.hpp"
#include "mrsi/lipid_l2.hpp"
#include "mrsi/random.hpp"

namespace mrsi::sim {

struct Range
{
    double lo = 0.0;
    double hi = 0.0;
};

// ---------------------------------------------------------------------------
// Metabolite basis

struct Peak
{
    double shift_ppm = 0.0;
    double amplitude = 0.0;
    /// Doublet separation; 0 for a singlet.
    double splitting_hz = 0.0;
};

struct Metabolite
{
    std::string name;
    std::vector<Peak> peaks;
};

/// Parametric peak table. Text form, one metabolite per line:
///   name shift_ppm rel_amp [J=hz] [shift_ppm rel_amp [J=hz] ...]   # comment
struct MetaboliteBasis
{
    std::vector<Metabolite> entries;

    std::size_t size() const noexcept { return entries.size(); }
    /// Throws ConfigError on non-positive amplitudes or shifts outside 0.5-4.5 ppm.
    void validate() const;
    std::size_t index_of(const std::string& name) const;

    /// NAA, NAAG, Cr, PCr, GPC+PCh, mI, Glu, Lac.
    static MetaboliteBasis default_7t();
};

MetaboliteBasis parse_basis(std::istream& in);
MetaboliteBasis load_basis(const std::filesystem::path& path);
void write_basis(const MetaboliteBasis& basis, std::ostream& out);

// ---------------------------------------------------------------------------
// Metabolite simulation

struct BaselineComponent
{
    double center_ppm = 0.0;
    double width_ppm = 0.0;
    /// Height relative to the tallest metabolite peak magnitude.
    double amplitude = 0.0;
};

struct SimConfig
{
    double conc_mean = 1.0;
    double conc_sd = 5.0;
    Range offset_hz{-150.0, 150.0};
    Range voigt_width_hz{4.0, 50.0};
    Range snr{1.0, 10.0};
    std::size_t n_baseline = 10;
    Range baseline_center_ppm{0.5, 4.5};
    Range baseline_width_ppm{0.3, 1.5};
    Range baseline_amplitude{0.0, 0.1};
    Range phase_rad{0.0, 6.283185307179586};
};

struct SimParams
{
    std::vector<double> concentrations;
    double freq_offset_hz = 0.0;
    double lorentz_width_hz = 0.0;
    double gauss_width_hz = 0.0;
    /// Tallest metabolite peak over frequency-domain noise sd (real part); <= 0 or inf disables noise.
    double snr = 0.0;
    std::vector<BaselineComponent> baseline;
    double global_phase_rad = 0.0;
    std::uint64_t seed = 0;
};

SimParams sample_params(Rng& rng, const MetaboliteBasis& basis, const SimConfig& config = {});

/// Noiseless metabolite FID (no baseline) for the given parameters.
Spectrum metabolite_fid(const SimParams& params, const MetaboliteBasis& basis, const SpectralAxis& axis);

/// Full simulated time-domain signal: metabolites + baseline + noise.
Spectrum simulate_metabolite(const SimParams& params, const MetaboliteBasis& basis, const SpectralAxis& axis);

/// Gaussian decay constant whose lineshape alone has the given FWHM.
double gauss_decay_for_fwhm(double fwhm_hz) noexcept;

// ---------------------------------------------------------------------------
// Nuisance generators

struct LipidConfig
{
    std::vector<double> shifts_ppm{0.90, 1.30, 1.59, 2.03, 2.25, 2.77, 5.31};
    std::vector<double> base_amplitudes{0.35, 1.0, 0.12, 0.15, 0.08, 0.02, 0.15};
    bool include_olefinic = true; ///< the 5.31 ppm resonance
    double amplitude_jitter = 0.5;
    Range width_hz{30.0, 150.0};
    double freq_jitter_hz = 30.0;
    Range scale{1e-2, 1e3};
    std::optional<double> fixed_scale;
    bool random_phase = true;
};

struct WaterConfig
{
    std::size_t n_components = 10;
    double center_ppm = 4.7;
    double spread_ppm = 0.4;
    Range damping_per_s{5.0, 80.0};
    Range weight{0.1, 100.0};
    std::optional<double> fixed_weight;
};

/// A drawn nuisance FID with the overall scale that produced it.
struct NuisanceDraw
{
    Spectrum fid;
    double scale = 0.0;
};

NuisanceDraw draw_lipid(Rng& rng, const SpectralAxis& axis, const LipidConfig& config = {});
NuisanceDraw draw_water(Rng& rng, const SpectralAxis& axis, const WaterConfig& config = {});
/// Ground-truth water components of the draw (for recovery checks).
std::vector<hlsvd::Component> water_components(Rng& rng, const SpectralAxis& axis, const WaterConfig& config = {});

Spectrum simulate_lipid(Rng& rng, const SpectralAxis& axis, const LipidConfig& config = {});
Spectrum simulate_water(Rng& rng, const SpectralAxis& axis, const WaterConfig& config = {});

// ---------------------------------------------------------------------------
// k-space apodization

/// Periodic Hamming window on DFT frequency order: 0.54 + 0.46 cos(2 pi k / n).
std::vector<double> hamming_window(std::size_t n);

/// Per time point: 2D DFT, multiply by wx(kx) * wy(ky), inverse 2D DFT.
/// Windows are indexed in DFT order (DC at index 0).
MrsiVolume encode_and_reconstruct(const MrsiVolume& v, const std::vector<double>& wx, const std::vector<double>& wy);
MrsiVolume encode_and_reconstruct(const MrsiVolume& v);

// ---------------------------------------------------------------------------
// Phantom

struct PhantomConfig
{
    std::size_t nx = 32;
    std::size_t ny = 32;
    SpectralAxis axis{512, 4000.0, 297.22, 4.7};
    std::size_t scalp_thickness = 2;
    double gray_multiplier = 1.0;
    double white_multiplier = 0.65;
    double lorentz_width_hz = 4.0;
    double gauss_width_hz = 6.0;
    /// Noise relative to the gray-matter reference peak; <= 0 disables noise.
    double snr = 20.0;
    Range scalp_lipid_scale{1e2, 1e3};
    WaterConfig water{};
    LipidConfig lipid{};
    bool lipid_bleed = true;
    /// Odd super-resolution factor used to model k-space truncation.
    std::size_t bleed_upsample = 3;
    double b0_brain_max_hz = 20.0;
    double b0_scalp_max_hz = 60.0;
    std::uint64_t seed = 1;
};

struct Phantom
{
    /// Measured data: metabolites + water + lipids (+ bleed), B0-shifted, noisy.
    MrsiVolume measured;
    /// Noiseless metabolite signal in the B0-corrected frame.
    MrsiVolume metabolite;
    /// Lipid and water contributions as they appear in `measured`.
    MrsiVolume lipid;
    MrsiVolume water;
};

Phantom build_phantom(const PhantomConfig& config, const MetaboliteBasis& basis = MetaboliteBasis::default_7t());

// ---------------------------------------------------------------------------
// Training data

enum class RemovalMode { Walinet, Lipnet };

std::string to_string(RemovalMode mode);
RemovalMode parse_mode(const std::string& s);

class NuisanceSource
{
public:
    virtual ~NuisanceSource() = default;
    virtual const SpectralAxis& axis() const = 0;
    /// Time-domain FID.
    virtual NuisanceDraw draw(Rng& rng) const = 0;
};

class ParametricLipidSource final : public NuisanceSource
{
public:
    ParametricLipidSource(SpectralAxis axis, LipidConfig config = {}) : axis_(axis), config_(std::move(config)) {}
    const SpectralAxis& axis() const override { return axis_; }
    NuisanceDraw draw(Rng& rng) const override { return draw_lipid(rng, axis_, config_); }

private:
    SpectralAxis axis_;
    LipidConfig config_;
};

class ParametricWaterSource final : public NuisanceSource
{
public:
    ParametricWaterSource(SpectralAxis axis, WaterConfig config = {}) : axis_(axis), config_(std::move(config)) {}
    const SpectralAxis& axis() const override { return axis_; }
    NuisanceDraw draw(Rng& rng) const override { return draw_water(rng, axis_, config_); }

private:
    SpectralAxis axis_;
    WaterConfig config_;
};

/// Random voxel from a volume, multiplied by a log-uniform scale.
class VoxelPoolSource final : public NuisanceSource
{
public:
    VoxelPoolSource(const MrsiVolume& v, std::vector<std::size_t> voxels, Range scale);
    const SpectralAxis& axis() const override { return axis_; }
    NuisanceDraw draw(Rng& rng) const override;

private:
    SpectralAxis axis_;
    std::vector<Spectrum> pool_;
    Range scale_;
};

/// HSVD water components extracted per voxel; each draw reweights the
/// components of a random voxel by independent log-uniform factors.
class HsvdWaterSource final : public NuisanceSource
{
public:
    HsvdWaterSource(const MrsiVolume& v, std::vector<std::size_t> voxels, std::size_t rank = 64,
                    PpmBand band = hlsvd::kWaterBand, Range weight = {0.1, 100.0}, std::size_t n_keep = 10,
                    std::size_t threads = 1);
    const SpectralAxis& axis() const override { return axis_; }
    NuisanceDraw draw(Rng& rng) const override;
    std::size_t pool_size() const noexcept { return pool_.size(); }

private:
    SpectralAxis axis_;
    std::vector<std::vector<hlsvd::Component>> pool_;
    Range weight_;
};

struct TrainingSample
{
    Spectrum x1;       ///< m + y (frequency domain)
    Spectrum x2;       ///< (1 - L) x1
    Spectrum target_y; ///< l + w, or l in lipid-only mode
    Spectrum clean_m;  ///< x1 - target_y
    std::uint64_t seed = 0;
    double lipid_scale = 0.0;
    double water_scale = 0.0;
};

struct TrainingSetConfig
{
    RemovalMode mode = RemovalMode::Walinet;
    SimConfig sim{};
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

/// Lipid operator calibrated on parametric scalp-like spectra (lipid plus
/// water draws, frequency domain), for training without measured scalp data.
lipid::LipidOperator synthetic_lipid_operator(const SpectralAxis& axis, std::size_t n_spectra, std::uint64_t seed,
                                              double target = lipid::kDefaultTarget);

std::vector<TrainingSample> make_training_set(std::size_t n, const MetaboliteBasis& basis,
                                              const NuisanceSource& lipid_source, const NuisanceSource* water_source,
                                              const lipid::LipidOperator& op, const TrainingSetConfig& config);

/// Directory with x1/x2/y/m .mrsx files (n x 1 volumes of frequency-domain
/// samples) and manifest.txt: "seed mode lipid_scale water_scale" per sample.
void save_training_set(const std::filesystem::path& dir, const std::vector<TrainingSample>& samples, RemovalMode mode);
std::vector<TrainingSample> load_training_set(const std::filesystem::path& dir);

} // namespace mrsi::sim
