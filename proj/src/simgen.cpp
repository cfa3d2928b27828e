#include "mrsi/simgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "mrsi/parallel.hpp"
#include "mrsi/volume_io.hpp"

namespace mrsi::sim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double parse_double(const std::string& token, std::size_t line_no)
{
    double v = 0.0;
    const char* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw ConfigError("basis line " + std::to_string(line_no) + ": cannot parse number '" + token + "'");
    return v;
}

/// Adds amp * e^{i phase} e^{(i 2 pi f - pi lw) t - g^2 t^2} to `fid`.
void add_voigt(CVector& fid, const SpectralAxis& axis, double amp, double phase, double f_hz, double lorentz_hz,
               double gauss_hz)
{
    const double dt = axis.dwell_s();
    const double lambda_l = std::numbers::pi * lorentz_hz;
    const double lambda_g = gauss_decay_for_fwhm(gauss_hz);
    for (Eigen::Index k = 0; k < fid.size(); ++k) {
        const double t = static_cast<double>(k) * dt;
        const double env = amp * std::exp(-lambda_l * t - lambda_g * lambda_g * t * t);
        fid[k] += std::polar(env, phase + kTwoPi * f_hz * t);
    }
}

Rng voxel_rng(std::uint64_t seed, std::size_t voxel, std::uint64_t stream)
{
    return Rng(mix_seed(seed, static_cast<std::uint64_t>(voxel) * 16 + stream));
}

} // namespace

// ---------------------------------------------------------------------------
// Basis

void MetaboliteBasis::validate() const
{
    if (entries.empty())
        throw ConfigError("metabolite basis is empty");
    for (const auto& m : entries) {
        if (m.peaks.empty())
            throw ConfigError("metabolite '" + m.name + "' has no peaks");
        for (const auto& p : m.peaks) {
            if (!(p.amplitude > 0.0))
                throw ConfigError("metabolite '" + m.name + "': peak amplitudes must be positive");
            if (p.shift_ppm < 0.5 || p.shift_ppm > 4.5)
                throw ConfigError("metabolite '" + m.name + "': shift outside 0.5-4.5 ppm");
            if (p.splitting_hz < 0.0)
                throw ConfigError("metabolite '" + m.name + "': negative splitting");
        }
    }
}

std::size_t MetaboliteBasis::index_of(const std::string& name) const
{
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].name == name)
            return i;
    throw ConfigError("metabolite '" + name + "' not in basis");
}

MetaboliteBasis MetaboliteBasis::default_7t()
{
    MetaboliteBasis b;
    b.entries = {
        {"NAA", {{2.008, 3.0}, {2.486, 0.5}, {2.673, 0.5}, {4.382, 0.5}}},
        {"NAAG", {{2.042, 3.0}, {2.180, 0.5}, {2.520, 0.5}}},
        {"Cr", {{3.027, 3.0}, {3.913, 2.0}}},
        {"PCr", {{3.029, 3.0}, {3.930, 2.0}}},
        {"GPC+PCh", {{3.208, 9.0}, {3.610, 2.0}, {4.280, 2.0}}},
        {"mI", {{3.522, 2.0}, {3.614, 2.0}, {4.054, 1.0}, {3.269, 1.0}}},
        {"Glu", {{2.042, 1.0}, {2.120, 1.0}, {2.344, 2.0}, {3.744, 1.0}}},
        {"Lac", {{1.313, 3.0, 6.9}, {4.097, 1.0, 6.9}}},
    };
    return b;
}

MetaboliteBasis parse_basis(std::istream& in)
{
    MetaboliteBasis basis;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        std::vector<std::string> tokens;
        for (std::string tok; ls >> tok;)
            tokens.push_back(tok);
        if (tokens.empty())
            continue;
        Metabolite m{tokens[0], {}};
        for (std::size_t i = 1; i < tokens.size();) {
            if (tokens[i].rfind("J=", 0) == 0) {
                if (m.peaks.empty())
                    throw ConfigError("basis line " + std::to_string(line_no) + ": J= before any peak");
                m.peaks.back().splitting_hz = parse_double(tokens[i].substr(2), line_no);
                ++i;
                continue;
            }
            if (i + 1 >= tokens.size())
                throw ConfigError("basis line " + std::to_string(line_no) + ": shift without amplitude");
            m.peaks.push_back({parse_double(tokens[i], line_no), parse_double(tokens[i + 1], line_no), 0.0});
            i += 2;
        }
        basis.entries.push_back(std::move(m));
    }
    basis.validate();
    return basis;
}

MetaboliteBasis load_basis(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open basis file " + path.string());
    return parse_basis(in);
}

void write_basis(const MetaboliteBasis& basis, std::ostream& out)
{
    out << "# name shift_ppm rel_amp [J=hz] ...\n";
    for (const auto& m : basis.entries) {
        out << m.name;
        for (const auto& p : m.peaks) {
            out << ' ' << p.shift_ppm << ' ' << p.amplitude;
            if (p.splitting_hz > 0.0)
                out << " J=" << p.splitting_hz;
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Metabolites

double gauss_decay_for_fwhm(double fwhm_hz) noexcept
{
    // e^{-g^2 t^2} transforms to a Gaussian with FWHM 2 g sqrt(ln 2) / pi.
    return std::numbers::pi * fwhm_hz / (2.0 * std::sqrt(std::numbers::ln2));
}

SimParams sample_params(Rng& rng, const MetaboliteBasis& basis, const SimConfig& config)
{
    SimParams p;
    p.concentrations.resize(basis.size());
    for (auto& c : p.concentrations)
        c = config.conc_sd > 0.0 ? std::max(0.0, normal(rng, config.conc_mean, config.conc_sd)) : config.conc_mean;
    p.freq_offset_hz = uniform(rng, config.offset_hz.lo, config.offset_hz.hi);
    const double width = uniform(rng, config.voigt_width_hz.lo, config.voigt_width_hz.hi);
    const double lorentz_fraction = uniform(rng, 0.0, 1.0);
    p.lorentz_width_hz = lorentz_fraction * width;
    p.gauss_width_hz = width - p.lorentz_width_hz;
    p.snr = uniform(rng, config.snr.lo, config.snr.hi);
    p.baseline.resize(config.n_baseline);
    for (auto& b : p.baseline) {
        b.center_ppm = uniform(rng, config.baseline_center_ppm.lo, config.baseline_center_ppm.hi);
        b.width_ppm = uniform(rng, config.baseline_width_ppm.lo, config.baseline_width_ppm.hi);
        b.amplitude = uniform(rng, config.baseline_amplitude.lo, config.baseline_amplitude.hi);
    }
    p.global_phase_rad = uniform(rng, config.phase_rad.lo, config.phase_rad.hi);
    p.seed = rng();
    return p;
}

Spectrum metabolite_fid(const SimParams& params, const MetaboliteBasis& basis, const SpectralAxis& axis)
{
    if (basis.entries.empty())
        throw ConfigError("simulate_metabolite: empty basis");
    if (params.concentrations.size() != basis.size())
        throw ConfigError("simulate_metabolite: concentration count does not match basis");
    Spectrum fid(axis, Domain::Time);
    for (std::size_t m = 0; m < basis.size(); ++m) {
        const double conc = params.concentrations[m];
        if (conc == 0.0)
            continue;
        for (const auto& peak : basis.entries[m].peaks) {
            const double f = axis.ppm_to_hz(peak.shift_ppm) + params.freq_offset_hz;
            const double amp = conc * peak.amplitude;
            if (peak.splitting_hz > 0.0) {
                add_voigt(fid.samples, axis, 0.5 * amp, params.global_phase_rad, f - 0.5 * peak.splitting_hz,
                          params.lorentz_width_hz, params.gauss_width_hz);
                add_voigt(fid.samples, axis, 0.5 * amp, params.global_phase_rad, f + 0.5 * peak.splitting_hz,
                          params.lorentz_width_hz, params.gauss_width_hz);
            } else {
                add_voigt(fid.samples, axis, amp, params.global_phase_rad, f, params.lorentz_width_hz,
                          params.gauss_width_hz);
            }
        }
    }
    return fid;
}

Spectrum simulate_metabolite(const SimParams& params, const MetaboliteBasis& basis, const SpectralAxis& axis)
{
    Spectrum spec = to_frequency(metabolite_fid(params, basis, axis));
    const double peak = spec.samples.size() > 0 ? spec.samples.cwiseAbs().maxCoeff() : 0.0;
    if (!params.baseline.empty() && peak > 0.0) {
        const cplx rot = std::polar(1.0, params.global_phase_rad);
        for (std::size_t k = 0; k < axis.n_points(); ++k) {
            const double ppm = axis.index_to_ppm(static_cast<double>(k));
            double b = 0.0;
            for (const auto& c : params.baseline) {
                const double sigma = c.width_ppm / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
                const double d = (ppm - c.center_ppm) / sigma;
                b += c.amplitude * std::exp(-0.5 * d * d);
            }
            spec.samples[static_cast<Eigen::Index>(k)] += peak * b * rot;
        }
    }
    if (params.snr > 0.0 && std::isfinite(params.snr) && peak > 0.0) {
        Rng noise_rng(params.seed);
        std::normal_distribution<double> dist(0.0, peak / params.snr);
        for (Eigen::Index k = 0; k < spec.samples.size(); ++k) {
            const double re = dist(noise_rng);
            const double im = dist(noise_rng);
            spec.samples[k] += cplx(re, im);
        }
    }
    return to_time(spec);
}

// ---------------------------------------------------------------------------
// Nuisance

NuisanceDraw draw_lipid(Rng& rng, const SpectralAxis& axis, const LipidConfig& config)
{
    if (config.shifts_ppm.size() != config.base_amplitudes.size())
        throw ConfigError("LipidConfig: shifts and amplitudes differ in length");
    NuisanceDraw out{Spectrum(axis, Domain::Time), 0.0};
    out.scale = config.fixed_scale ? *config.fixed_scale : log_uniform(rng, config.scale.lo, config.scale.hi);
    const double phase = config.random_phase ? uniform(rng, 0.0, kTwoPi) : 0.0;
    for (std::size_t i = 0; i < config.shifts_ppm.size(); ++i) {
        const double amp = config.base_amplitudes[i] *
                           (1.0 + uniform(rng, -config.amplitude_jitter, config.amplitude_jitter));
        const double width = uniform(rng, config.width_hz.lo, config.width_hz.hi);
        const double lorentz_fraction = uniform(rng, 0.0, 1.0);
        const double jitter = uniform(rng, -config.freq_jitter_hz, config.freq_jitter_hz);
        const bool olefinic = config.shifts_ppm[i] > 5.0;
        if (out.scale == 0.0 || (olefinic && !config.include_olefinic))
            continue;
        add_voigt(out.fid.samples, axis, out.scale * amp, phase, axis.ppm_to_hz(config.shifts_ppm[i]) + jitter,
                  lorentz_fraction * width, (1.0 - lorentz_fraction) * width);
    }
    return out;
}

Spectrum simulate_lipid(Rng& rng, const SpectralAxis& axis, const LipidConfig& config)
{
    return draw_lipid(rng, axis, config).fid;
}

std::vector<hlsvd::Component> water_components(Rng& rng, const SpectralAxis& axis, const WaterConfig& config)
{
    std::vector<hlsvd::Component> comps(config.n_components);
    for (auto& c : comps) {
        const double ppm = config.center_ppm + uniform(rng, -config.spread_ppm, config.spread_ppm);
        c.frequency_hz = axis.ppm_to_hz(ppm);
        c.damping_per_s = uniform(rng, config.damping_per_s.lo, config.damping_per_s.hi);
        c.phase_rad = uniform(rng, -std::numbers::pi, std::numbers::pi);
        c.amplitude = config.fixed_weight ? *config.fixed_weight : log_uniform(rng, config.weight.lo, config.weight.hi);
    }
    return comps;
}

NuisanceDraw draw_water(Rng& rng, const SpectralAxis& axis, const WaterConfig& config)
{
    const auto comps = water_components(rng, axis, config);
    double mean_weight = 0.0;
    for (const auto& c : comps)
        mean_weight += c.amplitude;
    if (!comps.empty())
        mean_weight /= static_cast<double>(comps.size());
    return {hlsvd::reconstruct(comps, axis), mean_weight};
}

Spectrum simulate_water(Rng& rng, const SpectralAxis& axis, const WaterConfig& config)
{
    return draw_water(rng, axis, config).fid;
}

// ---------------------------------------------------------------------------
// k-space

std::vector<double> hamming_window(std::size_t n)
{
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k)
        w[k] = 0.54 + 0.46 * std::cos(kTwoPi * static_cast<double>(k) / static_cast<double>(n));
    return w;
}

namespace {

/// Unitary 2D DFT of a row-major nx x ny image (y fastest).
void fft2(std::vector<cplx>& img, std::size_t nx, std::size_t ny, bool inverse)
{
    for (std::size_t x = 0; x < nx; ++x)
        fft_unitary(std::span<cplx>(img.data() + x * ny, ny), inverse);
    std::vector<cplx> col(nx);
    for (std::size_t y = 0; y < ny; ++y) {
        for (std::size_t x = 0; x < nx; ++x)
            col[x] = img[x * ny + y];
        fft_unitary(col, inverse);
        for (std::size_t x = 0; x < nx; ++x)
            img[x * ny + y] = col[x];
    }
}

} // namespace

MrsiVolume encode_and_reconstruct(const MrsiVolume& v, const std::vector<double>& wx, const std::vector<double>& wy)
{
    if (wx.size() != v.nx() || wy.size() != v.ny())
        throw ConfigError("encode_and_reconstruct: window length does not match volume dimensions");
    MrsiVolume out = v;
    const std::size_t nx = v.nx();
    const std::size_t ny = v.ny();
    std::vector<cplx> img(nx * ny);
    auto& fids = out.fids();
    for (Eigen::Index t = 0; t < fids.cols(); ++t) {
        for (std::size_t i = 0; i < nx * ny; ++i)
            img[i] = fids(static_cast<Eigen::Index>(i), t);
        fft2(img, nx, ny, false);
        for (std::size_t x = 0; x < nx; ++x)
            for (std::size_t y = 0; y < ny; ++y)
                img[x * ny + y] *= wx[x] * wy[y];
        fft2(img, nx, ny, true);
        for (std::size_t i = 0; i < nx * ny; ++i)
            fids(static_cast<Eigen::Index>(i), t) = img[i];
    }
    return out;
}

MrsiVolume encode_and_reconstruct(const MrsiVolume& v)
{
    return encode_and_reconstruct(v, hamming_window(v.nx()), hamming_window(v.ny()));
}

// ---------------------------------------------------------------------------
// Phantom

namespace {

struct HeadGeometry
{
    double cx, cy, ax, ay, thickness;

    /// Normalized elliptical radius of (x, y) against the brain ellipse grown by `grow` voxels.
    double radius(double x, double y, double grow) const
    {
        const double dx = (x - cx) / (ax + grow);
        const double dy = (y - cy) / (ay + grow);
        return std::sqrt(dx * dx + dy * dy);
    }
    bool in_brain(double x, double y) const { return radius(x, y, 0.0) <= 1.0; }
    bool in_scalp(double x, double y) const { return !in_brain(x, y) && radius(x, y, thickness) <= 1.0; }
};

std::vector<double> phantom_concentrations(const MetaboliteBasis& basis)
{
    static const std::map<std::string, double> table{{"NAA", 1.0},  {"NAAG", 0.15}, {"Cr", 0.45},
                                                     {"PCr", 0.35}, {"GPC+PCh", 0.12}, {"mI", 0.5},
                                                     {"Glu", 0.8},  {"Lac", 0.05}};
    std::vector<double> c(basis.size(), 0.5);
    for (std::size_t i = 0; i < basis.size(); ++i)
        if (auto it = table.find(basis.entries[i].name); it != table.end())
            c[i] = it->second;
    return c;
}

} // namespace

Phantom build_phantom(const PhantomConfig& cfg, const MetaboliteBasis& basis)
{
    if (cfg.nx < 16 || cfg.ny < 16)
        throw ConfigError("build_phantom: dimensions must be at least 16x16");
    if (cfg.bleed_upsample == 0 || cfg.bleed_upsample % 2 == 0)
        throw ConfigError("build_phantom: bleed_upsample must be odd");
    basis.validate();

    const std::size_t nx = cfg.nx;
    const std::size_t ny = cfg.ny;
    const SpectralAxis& axis = cfg.axis;
    const auto n_vox = nx * ny;
    const auto thickness = static_cast<double>(cfg.scalp_thickness);
    const HeadGeometry head{(static_cast<double>(nx) - 1.0) / 2.0, (static_cast<double>(ny) - 1.0) / 2.0,
                            static_cast<double>(nx) / 2.0 - thickness - 1.5,
                            static_cast<double>(ny) / 2.0 - thickness - 1.5, thickness};

    Phantom ph{MrsiVolume(nx, ny, axis), MrsiVolume(nx, ny, axis), MrsiVolume(nx, ny, axis), MrsiVolume(nx, ny, axis)};
    std::vector<std::uint8_t> brain(n_vox, 0);
    std::vector<std::uint8_t> scalp(n_vox, 0);
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y) {
            const auto i = x * ny + y;
            brain[i] = head.in_brain(static_cast<double>(x), static_cast<double>(y)) ? 1 : 0;
            scalp[i] = head.in_scalp(static_cast<double>(x), static_cast<double>(y)) ? 1 : 0;
        }

    // Smooth second-order B0 field.
    Rng field_rng(mix_seed(cfg.seed, 0xB0));
    std::array<double, 6> coef{};
    for (auto& c : coef)
        c = normal(field_rng, 0.0, 1.0);
    auto poly = [&](double x, double y) {
        const double u = (x - head.cx) / (static_cast<double>(nx) / 2.0);
        const double v = (y - head.cy) / (static_cast<double>(ny) / 2.0);
        return coef[0] + coef[1] * u + coef[2] * v + coef[3] * u * u + coef[4] * u * v + coef[5] * v * v;
    };
    double max_brain = 1e-12;
    double max_scalp = 1e-12;
    for (std::size_t i = 0; i < n_vox; ++i) {
        const double p = std::abs(poly(static_cast<double>(i / ny), static_cast<double>(i % ny)));
        if (brain[i])
            max_brain = std::max(max_brain, p);
        if (scalp[i])
            max_scalp = std::max(max_scalp, p);
    }
    const double b0_scale = std::min(cfg.b0_brain_max_hz / max_brain, cfg.b0_scalp_max_hz / max_scalp) *
                            uniform(field_rng, 0.5, 1.0);
    std::vector<double> b0(n_vox);
    for (std::size_t i = 0; i < n_vox; ++i)
        b0[i] = b0_scale * poly(static_cast<double>(i / ny), static_cast<double>(i % ny));

    // Metabolites: two-level gray/white multiplier on a fixed concentration table.
    const auto base_conc = phantom_concentrations(basis);
    auto metabolite_params = [&](double multiplier) {
        SimParams p;
        p.concentrations = base_conc;
        for (auto& c : p.concentrations)
            c *= multiplier;
        p.lorentz_width_hz = cfg.lorentz_width_hz;
        p.gauss_width_hz = cfg.gauss_width_hz;
        return p;
    };
    const Spectrum gray_fid = metabolite_fid(metabolite_params(cfg.gray_multiplier), basis, axis);
    const Spectrum white_fid = metabolite_fid(metabolite_params(cfg.white_multiplier), basis, axis);
    const double ref_peak = to_frequency(gray_fid).samples.cwiseAbs().maxCoeff();

    for (std::size_t i = 0; i < n_vox; ++i) {
        if (!brain[i])
            continue;
        const double r = head.radius(static_cast<double>(i / ny), static_cast<double>(i % ny), 0.0);
        const bool gray = r > 0.72 || r < 0.2;
        ph.metabolite.fids().row(static_cast<Eigen::Index>(i)) = (gray ? gray_fid : white_fid).samples.transpose();
    }

    // Water in brain and scalp.
    for (std::size_t i = 0; i < n_vox; ++i) {
        if (!brain[i] && !scalp[i])
            continue;
        Rng rng = voxel_rng(cfg.seed, i, 1);
        Spectrum w = simulate_water(rng, axis, cfg.water);
        frequency_shift(w, b0[i]);
        ph.water.fids().row(static_cast<Eigen::Index>(i)) = w.samples.transpose();
    }

    // Scalp lipids, optionally spread by Hamming-apodized k-space truncation.
    LipidConfig lipid_cfg = cfg.lipid;
    lipid_cfg.scale = cfg.scalp_lipid_scale;
    lipid_cfg.fixed_scale.reset();
    auto voxel_lipid = [&](std::size_t i) {
        Rng rng = voxel_rng(cfg.seed, i, 2);
        Spectrum l = simulate_lipid(rng, axis, lipid_cfg);
        frequency_shift(l, b0[i]);
        return l;
    };
    if (!cfg.lipid_bleed) {
        for (std::size_t i = 0; i < n_vox; ++i)
            if (scalp[i])
                ph.lipid.fids().row(static_cast<Eigen::Index>(i)) = voxel_lipid(i).samples.transpose();
    } else {
        const std::size_t up = cfg.bleed_upsample;
        const std::size_t fx = up * nx;
        const std::size_t fy = up * ny;
        std::vector<std::size_t> parent(fx * fy, n_vox);
        std::set<std::size_t> owners;
        for (std::size_t i = 0; i < fx; ++i)
            for (std::size_t j = 0; j < fy; ++j) {
                const double x = static_cast<double>(i) / static_cast<double>(up);
                const double y = static_cast<double>(j) / static_cast<double>(up);
                if (!head.in_scalp(x, y))
                    continue;
                const std::size_t px = ((i + up / 2) / up) % nx;
                const std::size_t py = ((j + up / 2) / up) % ny;
                parent[i * fy + j] = px * ny + py;
                owners.insert(px * ny + py);
            }
        std::map<std::size_t, Spectrum> lipid_of;
        for (auto i : owners)
            lipid_of.emplace(i, voxel_lipid(i));

        const auto wx = hamming_window(nx);
        const auto wy = hamming_window(ny);
        const double area = static_cast<double>(up * up);
        std::vector<cplx> fine(fx * fy);
        std::vector<cplx> coarse(n_vox);
        for (std::size_t t = 0; t < axis.n_points(); ++t) {
            for (std::size_t p = 0; p < fine.size(); ++p)
                fine[p] = parent[p] < n_vox ? lipid_of.at(parent[p]).samples[static_cast<Eigen::Index>(t)] / area
                                            : cplx(0.0, 0.0);
            fft2(fine, fx, fy, false);
            for (std::size_t kx = 0; kx < nx; ++kx) {
                // Coarse DFT bin kx <-> signed frequency, mapped into the fine spectrum.
                const long sx = static_cast<long>(kx) - (kx >= (nx + 1) / 2 ? static_cast<long>(nx) : 0);
                const std::size_t ix = static_cast<std::size_t>((sx + static_cast<long>(fx)) % static_cast<long>(fx));
                for (std::size_t ky = 0; ky < ny; ++ky) {
                    const long sy = static_cast<long>(ky) - (ky >= (ny + 1) / 2 ? static_cast<long>(ny) : 0);
                    const std::size_t iy =
                        static_cast<std::size_t>((sy + static_cast<long>(fy)) % static_cast<long>(fy));
                    coarse[kx * ny + ky] = fine[ix * fy + iy] * (wx[kx] * wy[ky]);
                }
            }
            fft2(coarse, nx, ny, true);
            for (std::size_t i = 0; i < n_vox; ++i)
                ph.lipid.fids()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
                    coarse[i] * static_cast<double>(up);
        }
    }

    // Assemble the measurement.
    auto& meas = ph.measured.fids();
    for (std::size_t i = 0; i < n_vox; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        if (brain[i]) {
            Spectrum m = ph.metabolite.fid(i);
            frequency_shift(m, b0[i]);
            meas.row(row) = m.samples.transpose();
        }
        meas.row(row) += ph.water.fids().row(row) + ph.lipid.fids().row(row);
        if (cfg.snr > 0.0) {
            Rng rng = voxel_rng(cfg.seed, i, 3);
            std::normal_distribution<double> noise(0.0, ref_peak / cfg.snr);
            for (Eigen::Index t = 0; t < meas.cols(); ++t) {
                const double re = noise(rng);
                const double im = noise(rng);
                meas(row, t) += cplx(re, im);
            }
        }
    }

    for (auto* v : {&ph.measured, &ph.metabolite, &ph.lipid, &ph.water}) {
        v->brain_mask() = brain;
        v->scalp_mask() = scalp;
    }
    ph.measured.b0_map_hz() = b0;
    return ph;
}

// ---------------------------------------------------------------------------
// Training data

std::string to_string(RemovalMode mode)
{
    return mode == RemovalMode::Walinet ? "walinet" : "lipnet";
}

RemovalMode parse_mode(const std::string& s)
{
    if (s == "walinet")
        return RemovalMode::Walinet;
    if (s == "lipnet")
        return RemovalMode::Lipnet;
    throw ConfigError("unknown mode '" + s + "' (expected walinet or lipnet)");
}

VoxelPoolSource::VoxelPoolSource(const MrsiVolume& v, std::vector<std::size_t> voxels, Range scale)
    : axis_(v.axis()), scale_(scale)
{
    if (voxels.empty())
        throw DataError("VoxelPoolSource: no voxels selected");
    for (auto i : voxels)
        pool_.push_back(v.fid(i));
}

NuisanceDraw VoxelPoolSource::draw(Rng& rng) const
{
    std::uniform_int_distribution<std::size_t> pick(0, pool_.size() - 1);
    const auto& src = pool_[pick(rng)];
    const double scale = log_uniform(rng, scale_.lo, scale_.hi);
    return {Spectrum(axis_, Domain::Time, src.samples * scale), scale};
}

HsvdWaterSource::HsvdWaterSource(const MrsiVolume& v, std::vector<std::size_t> voxels, std::size_t rank,
                                 PpmBand band, Range weight, std::size_t n_keep, std::size_t threads)
    : axis_(v.axis()), weight_(weight)
{
    if (voxels.empty())
        throw DataError("HsvdWaterSource: no voxels selected");
    pool_.resize(voxels.size());
    parallel_for(voxels.size(), threads, [&](std::size_t k) {
        auto comps = hlsvd::select_band(hlsvd::decompose(v.fid(voxels[k]), rank), axis_, band);
        // decompose() sorts by amplitude, so the first n_keep are the strongest.
        if (comps.size() > n_keep)
            comps.resize(n_keep);
        pool_[k] = std::move(comps);
    });
}

NuisanceDraw HsvdWaterSource::draw(Rng& rng) const
{
    std::uniform_int_distribution<std::size_t> pick(0, pool_.size() - 1);
    auto comps = pool_[pick(rng)];
    double mean_factor = 0.0;
    for (auto& c : comps) {
        const double f = log_uniform(rng, weight_.lo, weight_.hi);
        c.amplitude *= f;
        mean_factor += f;
    }
    if (!comps.empty())
        mean_factor /= static_cast<double>(comps.size());
    return {hlsvd::reconstruct(comps, axis_), mean_factor};
}

lipid::LipidOperator synthetic_lipid_operator(const SpectralAxis& axis, std::size_t n_spectra, std::uint64_t seed,
                                              double target)
{
    if (n_spectra == 0)
        throw ConfigError("synthetic_lipid_operator: need at least one spectrum");
    LipidConfig lc;
    lc.fixed_scale = 1.0;
    WaterConfig wc;
    wc.weight = {1e-3, 1e-1};
    std::vector<Spectrum> spectra;
    spectra.reserve(n_spectra);
    for (std::size_t i = 0; i < n_spectra; ++i) {
        Rng rng(mix_seed(seed, i));
        Spectrum s = draw_lipid(rng, axis, lc).fid;
        s.samples += draw_water(rng, axis, wc).fid.samples;
        spectra.push_back(to_frequency(s));
    }
    const lipid::LipidOperator op = lipid::build_operator(lipid::build_basis(spectra), 0.0);
    return op.with_beta(lipid::calibrate_beta(op, target).beta);
}

std::vector<TrainingSample> make_training_set(std::size_t n, const MetaboliteBasis& basis,
                                              const NuisanceSource& lipid_source, const NuisanceSource* water_source,
                                              const lipid::LipidOperator& op, const TrainingSetConfig& config)
{
    const SpectralAxis& axis = op.axis();
    require_same_axis(axis, lipid_source.axis(), "make_training_set (lipid source)");
    const bool with_water = config.mode == RemovalMode::Walinet;
    if (with_water) {
        if (water_source == nullptr)
            throw ConfigError("make_training_set: water source required in walinet mode");
        require_same_axis(axis, water_source->axis(), "make_training_set (water source)");
    }
    basis.validate();

    std::vector<std::optional<TrainingSample>> slots(n);
    parallel_for(n, config.threads, [&](std::size_t i) {
        const std::uint64_t seed = mix_seed(config.seed, i);
        Rng rng(seed);
        const SimParams params = sample_params(rng, basis, config.sim);
        const Spectrum m = to_frequency(simulate_metabolite(params, basis, axis));
        const NuisanceDraw l = lipid_source.draw(rng);
        Spectrum y = to_frequency(l.fid);
        double water_scale = 0.0;
        if (with_water) {
            const NuisanceDraw w = water_source->draw(rng);
            y.samples += to_frequency(w.fid).samples;
            water_scale = w.scale;
        }
        Spectrum x1(axis, Domain::Frequency, m.samples + y.samples);
        // clean_m is re-derived from x1 so that x1 - y == clean_m holds bit for bit.
        Spectrum clean(axis, Domain::Frequency, x1.samples - y.samples);
        Spectrum x2 = lipid::project_lipid(op, x1);
        slots[i] = TrainingSample{std::move(x1), std::move(x2), std::move(y), std::move(clean), seed, l.scale,
                                  water_scale};
    });
    std::vector<TrainingSample> out;
    out.reserve(n);
    for (auto& s : slots)
        out.push_back(std::move(*s));
    return out;
}

void save_training_set(const std::filesystem::path& dir, const std::vector<TrainingSample>& samples, RemovalMode mode)
{
    if (samples.empty())
        throw DataError("save_training_set: no samples");
    std::filesystem::create_directories(dir);
    const SpectralAxis axis = samples.front().x1.axis;
    auto dump = [&](const char* name, auto field) {
        MrsiVolume v(samples.size(), 1, axis);
        for (std::size_t i = 0; i < samples.size(); ++i)
            v.fids().row(static_cast<Eigen::Index>(i)) = (samples[i].*field).samples.transpose();
        write_volume(v, dir / name);
    };
    dump("x1.mrsx", &TrainingSample::x1);
    dump("x2.mrsx", &TrainingSample::x2);
    dump("y.mrsx", &TrainingSample::target_y);
    dump("m.mrsx", &TrainingSample::clean_m);
    std::ofstream manifest(dir / "manifest.txt");
    manifest << std::setprecision(17);
    for (const auto& s : samples)
        manifest << s.seed << ' ' << to_string(mode) << ' ' << s.lipid_scale << ' ' << s.water_scale << '\n';
    if (!manifest)
        throw FormatError(FormatError::Kind::Io, "cannot write manifest in " + dir.string());
}

std::vector<TrainingSample> load_training_set(const std::filesystem::path& dir)
{
    const MrsiVolume x1 = read_volume(dir / "x1.mrsx");
    const MrsiVolume x2 = read_volume(dir / "x2.mrsx");
    const MrsiVolume y = read_volume(dir / "y.mrsx");
    const MrsiVolume m = read_volume(dir / "m.mrsx");
    const std::size_t n = x1.n_voxels();
    if (x2.n_voxels() != n || y.n_voxels() != n || m.n_voxels() != n)
        throw FormatError(FormatError::Kind::ShapeMismatch, "training set files disagree on sample count");
    std::ifstream manifest(dir / "manifest.txt");
    std::vector<TrainingSample> out;
    out.reserve(n);
    auto spec = [](const MrsiVolume& v, std::size_t i) {
        return Spectrum(v.axis(), Domain::Frequency, v.fids().row(static_cast<Eigen::Index>(i)).transpose());
    };
    for (std::size_t i = 0; i < n; ++i) {
        TrainingSample s{spec(x1, i), spec(x2, i), spec(y, i), spec(m, i), 0, 0.0, 0.0};
        std::string mode;
        if (manifest)
            manifest >> s.seed >> mode >> s.lipid_scale >> s.water_scale;
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace mrsi::sim
