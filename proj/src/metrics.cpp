#include "mrsi/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "mrsi/parallel.hpp"

namespace mrsi::metrics {

namespace {

void require_frequency(const Spectrum& s, const char* what)
{
    if (s.domain != Domain::Frequency)
        throw DataError(std::string(what) + ": expected a frequency-domain spectrum");
}

void check_band(const SpectralAxis& axis, const PpmBand& band, const char* what)
{
    if (band.low() < axis.ppm_min() || band.high() > axis.ppm_max()) {
        std::ostringstream os;
        os << what << ": band " << band.low() << "-" << band.high() << " ppm outside axis [" << axis.ppm_min() << ", "
           << axis.ppm_max() << "]";
        throw OutOfRangeError(os.str());
    }
}

} // namespace

void BandRanges::validate(const SpectralAxis& axis) const
{
    check_band(axis, whole, "BandRanges.whole");
    check_band(axis, metabolite, "BandRanges.metabolite");
    check_band(axis, lipid, "BandRanges.lipid");
    check_band(axis, water, "BandRanges.water");
}

double nrmse(const Spectrum& pred, const Spectrum& truth, const PpmBand& band)
{
    require_same_axis(pred.axis, truth.axis, "nrmse");
    require_frequency(pred, "nrmse");
    require_frequency(truth, "nrmse");
    check_band(truth.axis, band, "nrmse");
    double err = 0.0;
    double ref = 0.0;
    for (auto k : band_bins(truth.axis, band)) {
        const auto i = static_cast<Eigen::Index>(k);
        err += std::norm(pred.samples[i] - truth.samples[i]);
        ref += std::norm(truth.samples[i]);
    }
    if (!(ref > 0.0))
        throw DataError("nrmse: truth has no energy in the band");
    return 100.0 * std::sqrt(err / ref);
}

double snr(const Spectrum& s, const PpmBand& peak, const PpmBand& noise)
{
    require_frequency(s, "snr");
    check_band(s.axis, peak, "snr peak band");
    check_band(s.axis, noise, "snr noise band");
    const auto peak_bins = band_bins(s.axis, peak);
    const auto noise_bins = band_bins(s.axis, noise);
    if (peak_bins.empty() || noise_bins.size() < 2)
        throw DataError("snr: bands contain too few bins");
    double top = -std::numeric_limits<double>::infinity();
    for (auto k : peak_bins)
        top = std::max(top, s.samples[static_cast<Eigen::Index>(k)].real());
    double mean = 0.0;
    for (auto k : noise_bins)
        mean += s.samples[static_cast<Eigen::Index>(k)].real();
    mean /= static_cast<double>(noise_bins.size());
    double var = 0.0;
    for (auto k : noise_bins) {
        const double d = s.samples[static_cast<Eigen::Index>(k)].real() - mean;
        var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(noise_bins.size() - 1));
    if (!(sd > 0.0))
        throw NumericError("snr: noise band has zero standard deviation");
    return top / sd;
}

double fwhm(const Spectrum& s, double peak_ppm, double search_ppm)
{
    require_frequency(s, "fwhm");
    const SpectralAxis& ax = s.axis;
    const auto n = static_cast<long>(ax.n_points());
    const double center = ax.ppm_to_index(peak_ppm);
    const double reach = search_ppm / ax.bin_ppm();
    const long lo = std::max(0L, static_cast<long>(std::floor(center - reach)));
    const long hi = std::min(n - 1, static_cast<long>(std::ceil(center + reach)));
    auto re = [&](long k) { return s.samples[k].real(); };

    // Largest absorption value within half a search window of the nominal position.
    long top = std::clamp(static_cast<long>(std::lround(center)), lo, hi);
    const double half_reach = 0.5 * reach;
    for (long k = lo; k <= hi; ++k)
        if (std::abs(static_cast<double>(k) - center) <= half_reach && re(k) > re(top))
            top = k;
    const double half = 0.5 * re(top);
    if (!(half > 0.0))
        throw NumericError("fwhm: no peak near " + std::to_string(peak_ppm) + " ppm");

    double left = std::nan("");
    for (long k = top; k > lo; --k)
        if (re(k - 1) <= half) {
            left = static_cast<double>(k - 1) + (half - re(k - 1)) / (re(k) - re(k - 1));
            break;
        }
    double right = std::nan("");
    for (long k = top; k < hi; ++k)
        if (re(k + 1) <= half) {
            right = static_cast<double>(k) + (re(k) - half) / (re(k) - re(k + 1));
            break;
        }
    if (std::isnan(left) || std::isnan(right))
        throw NumericError("fwhm: half-height crossing not found within +-" + std::to_string(search_ppm) + " ppm of " +
                           std::to_string(peak_ppm));
    return (right - left) * ax.bin_ppm();
}

double band_integral(const Spectrum& s, const PpmBand& band)
{
    require_frequency(s, "band_integral");
    check_band(s.axis, band, "band_integral");
    const auto bins = band_bins(s.axis, band);
    double sum = 0.0;
    for (std::size_t i = 1; i < bins.size(); ++i)
        sum += 0.5 * (std::abs(s.samples[static_cast<Eigen::Index>(bins[i - 1])]) +
                      std::abs(s.samples[static_cast<Eigen::Index>(bins[i])]));
    return sum * s.axis.bin_ppm();
}

std::vector<double> residual_map(const MrsiVolume& v, const PpmBand& band)
{
    std::vector<double> map(v.n_voxels(), 0.0);
    if (band.empty())
        return map;
    const bool masked = v.has_masks();
    for (std::size_t i = 0; i < v.n_voxels(); ++i)
        if (!masked || v.brain_mask()[i])
            map[i] = band_integral(to_frequency(v.fid(i)), band);
    return map;
}

// ---------------------------------------------------------------------------
// Methods

namespace {

constexpr std::pair<Method, const char*> kMethodNames[] = {
    {Method::None, "none"},     {Method::L2, "l2"},         {Method::Hlsvd, "hlsvd"},
    {Method::HlsvdL2, "hlsvd+l2"}, {Method::Lipnet, "lipnet"}, {Method::Walinet, "walinet"},
    {Method::HlsvdLipnet, "hlsvd+lipnet"},
};

const ynet::YNetWeights<float>& require_weights(const ynet::YNetWeights<float>* w, Method m)
{
    if (w == nullptr)
        throw ConfigError("method " + to_string(m) + " needs network weights");
    return *w;
}

} // namespace

Method parse_method(const std::string& name)
{
    for (const auto& [m, n] : kMethodNames)
        if (name == n)
            return m;
    throw ConfigError("unknown method '" + name + "' (expected none, l2, hlsvd, hlsvd+l2, lipnet, walinet, hlsvd+lipnet)");
}

std::string to_string(Method m)
{
    for (const auto& [mm, n] : kMethodNames)
        if (mm == m)
            return n;
    return "?";
}

std::vector<Method> parse_methods(const std::string& comma_list)
{
    std::vector<Method> out;
    std::stringstream ss(comma_list);
    for (std::string item; std::getline(ss, item, ',');) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty())
            out.push_back(parse_method(item));
    }
    if (out.empty())
        throw ConfigError("no methods given");
    return out;
}

bool needs_operator(Method m)
{
    return m == Method::L2 || m == Method::HlsvdL2 || m == Method::Lipnet || m == Method::Walinet ||
           m == Method::HlsvdLipnet;
}

std::vector<Spectrum> run_method(Method m, const MrsiVolume& v, const std::vector<std::size_t>& voxels,
                                 const MethodContext& ctx)
{
    if (needs_operator(m) && ctx.op == nullptr)
        throw ConfigError("method " + to_string(m) + " needs a lipid operator");
    for (auto i : voxels)
        if (i >= v.n_voxels())
            throw DataError("run_method: voxel index out of range");

    const bool water_first = m == Method::Hlsvd || m == Method::HlsvdL2 || m == Method::HlsvdLipnet;
    std::vector<Spectrum> spectra(voxels.size(), Spectrum(v.axis(), Domain::Frequency));
    parallel_for(voxels.size(), ctx.threads, [&](std::size_t j) {
        Spectrum fid = v.fid(voxels[j]);
        if (water_first)
            fid = hlsvd::remove_water(fid, ctx.hlsvd_rank, ctx.water_band);
        spectra[j] = to_frequency(fid);
        if (m == Method::L2 || m == Method::HlsvdL2)
            spectra[j] = lipid::apply(*ctx.op, spectra[j]);
    });

    if (m == Method::Walinet || m == Method::Lipnet || m == Method::HlsvdLipnet) {
        const bool wal = m == Method::Walinet;
        const auto& w = require_weights(wal ? ctx.walinet : ctx.lipnet, m);
        auto res = ynet::infer_batch(w, spectra, *ctx.op, wal ? sim::RemovalMode::Walinet : sim::RemovalMode::Lipnet,
                                     ctx.threads, 4);
        for (std::size_t j = 0; j < spectra.size(); ++j)
            spectra[j] = std::move(res[j].m_tilde);
    }
    return spectra;
}

MrsiVolume remove(Method m, const MrsiVolume& v, const MethodContext& ctx)
{
    std::vector<std::size_t> voxels;
    if (v.has_masks()) {
        voxels = v.brain_voxels();
    } else {
        voxels.resize(v.n_voxels());
        for (std::size_t i = 0; i < voxels.size(); ++i)
            voxels[i] = i;
    }
    MrsiVolume out = v;
    if (m == Method::None)
        return out;
    const auto cleaned = run_method(m, v, voxels, ctx);
    for (std::size_t j = 0; j < voxels.size(); ++j)
        out.set_fid(voxels[j], to_time(cleaned[j]));
    return out;
}

// ---------------------------------------------------------------------------
// Reports

double quantile(std::vector<double> values, double q)
{
    if (values.empty())
        throw DataError("quantile: empty sample");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= values.size())
        return values.back();
    return values[i] + frac * (values[i + 1] - values[i]);
}

std::vector<VoxelRow> score(const std::string& label, const std::vector<Spectrum>& cleaned, const MrsiVolume& truth,
                            const std::vector<std::size_t>& voxels, double wall_ms_per_voxel, const BandRanges& bands)
{
    if (cleaned.size() != voxels.size())
        throw DataError("score: spectra and voxel list differ in length");
    bands.validate(truth.axis());
    std::vector<VoxelRow> rows;
    rows.reserve(voxels.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t j = 0; j < voxels.size(); ++j) {
        const Spectrum t = to_frequency(truth.fid(voxels[j]));
        const Spectrum& p = cleaned[j];
        VoxelRow r;
        r.x = voxels[j] / truth.ny();
        r.y = voxels[j] % truth.ny();
        r.method = label;
        auto safe = [&](auto&& fn) {
            try {
                return fn();
            } catch (const Error&) {
                return nan;
            }
        };
        r.nrmse_whole = safe([&] { return nrmse(p, t, bands.whole); });
        r.nrmse_metab = safe([&] { return nrmse(p, t, bands.metabolite); });
        r.nrmse_lipid = safe([&] { return nrmse(p, t, bands.lipid); });
        r.snr = safe([&] { return snr(p); });
        r.fwhm_ppm = safe([&] { return fwhm(p, kNaaPpm); });
        r.residual_lipid = band_integral(p, bands.lipid);
        r.residual_water = band_integral(p, bands.water);
        r.wall_ms = wall_ms_per_voxel;
        rows.push_back(r);
    }
    return rows;
}

MethodSummary summarize(const std::string& method, const std::vector<VoxelRow>& rows)
{
    MethodSummary s;
    s.method = method;
    std::vector<double> whole, metab, lip, rl, rw;
    for (const auto& r : rows) {
        if (r.method != method)
            continue;
        ++s.n_voxels;
        s.wall_ms_total += r.wall_ms;
        if (std::isfinite(r.nrmse_whole))
            whole.push_back(r.nrmse_whole);
        if (std::isfinite(r.nrmse_metab))
            metab.push_back(r.nrmse_metab);
        if (std::isfinite(r.nrmse_lipid))
            lip.push_back(r.nrmse_lipid);
        rl.push_back(r.residual_lipid);
        rw.push_back(r.residual_water);
    }
    auto quartiles = [](const std::vector<double>& v) {
        if (v.empty()) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            return std::array<double, 3>{nan, nan, nan};
        }
        return std::array<double, 3>{quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)};
    };
    s.nrmse_whole = quartiles(whole);
    s.nrmse_metab = quartiles(metab);
    s.nrmse_lipid = quartiles(lip);
    if (!rl.empty()) {
        s.residual_lipid_median = quantile(rl, 0.5);
        s.residual_water_median = quantile(rw, 0.5);
    }
    return s;
}

void write_voxel_csv(const std::vector<VoxelRow>& rows, std::ostream& out, bool include_timing)
{
    out << "voxel_x,voxel_y,method,nrmse_whole,nrmse_metab,nrmse_lipid,snr,fwhm_ppm,residual_lipid,residual_water";
    out << (include_timing ? ",wall_ms\n" : "\n");
    out << std::setprecision(8);
    for (const auto& r : rows) {
        out << r.x << ',' << r.y << ',' << r.method << ',' << r.nrmse_whole << ',' << r.nrmse_metab << ','
            << r.nrmse_lipid << ',' << r.snr << ',' << r.fwhm_ppm << ',' << r.residual_lipid << ',' << r.residual_water;
        if (include_timing)
            out << ',' << r.wall_ms;
        out << '\n';
    }
}

void write_aggregate_csv(const std::vector<MethodSummary>& summaries, std::ostream& out, bool include_timing)
{
    out << "method,n_voxels";
    if (include_timing)
        out << ",wall_ms_total";
    for (const char* band : {"whole", "metab", "lipid"})
        for (const char* q : {"q25", "median", "q75"})
            out << ",nrmse_" << band << '_' << q;
    out << ",residual_lipid_median,residual_water_median\n";
    out << std::setprecision(8);
    for (const auto& s : summaries) {
        out << s.method << ',' << s.n_voxels;
        if (include_timing)
            out << ',' << s.wall_ms_total;
        for (const auto* q : {&s.nrmse_whole, &s.nrmse_metab, &s.nrmse_lipid})
            for (double v : *q)
                out << ',' << v;
        out << ',' << s.residual_lipid_median << ',' << s.residual_water_median << '\n';
    }
}

namespace {

constexpr const char* kPalette[] = {"#000000", "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string fmt(double v)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

} // namespace

void write_line_svg(std::ostream& out, const std::string& title, const std::vector<double>& x,
                    const std::vector<std::pair<std::string, std::vector<double>>>& series, bool reverse_x)
{
    const double w = 640, h = 360, pad = 40;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (double v : x) {
        xmin = std::min(xmin, v);
        xmax = std::max(xmax, v);
    }
    for (const auto& [name, ys] : series)
        for (double v : ys)
            if (std::isfinite(v)) {
                ymin = std::min(ymin, v);
                ymax = std::max(ymax, v);
            }
    if (!(xmax > xmin))
        xmax = xmin + 1.0;
    if (!(ymax > ymin))
        ymax = ymin + 1.0;
    auto px = [&](double v) {
        const double f = (v - xmin) / (xmax - xmin);
        return pad + (reverse_x ? 1.0 - f : f) * (w - 2 * pad);
    };
    auto py = [&](double v) { return h - pad - (v - ymin) / (ymax - ymin) * (h - 2 * pad); };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << pad << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\"" << h - pad
        << "\" stroke=\"#888\"/>\n";
    out << "<text x=\"" << px(xmin) << "\" y=\"" << h - pad + 16 << "\" font-size=\"11\">" << fmt(xmin) << "</text>\n";
    out << "<text x=\"" << px(xmax) << "\" y=\"" << h - pad + 16 << "\" font-size=\"11\">" << fmt(xmax) << "</text>\n";
    std::size_t color = 0;
    for (const auto& [name, ys] : series) {
        out << "<polyline fill=\"none\" stroke-width=\"1\" stroke=\"" << kPalette[color % std::size(kPalette)]
            << "\" points=\"";
        for (std::size_t i = 0; i < std::min(x.size(), ys.size()); ++i)
            if (std::isfinite(ys[i]))
                out << fmt(px(x[i])) << ',' << fmt(py(ys[i])) << ' ';
        out << "\"/>\n";
        out << "<text x=\"" << w - pad - 120 << "\" y=\"" << 20 + 14 * color << "\" font-size=\"11\" fill=\""
            << kPalette[color % std::size(kPalette)] << "\">" << name << "</text>\n";
        ++color;
    }
    out << "</svg>\n";
}

void write_box_svg(std::ostream& out, const std::string& title, const std::vector<MethodSummary>& summaries)
{
    const double w = 640, h = 360, pad = 40;
    double ymax = 0.0;
    for (const auto& s : summaries)
        if (std::isfinite(s.nrmse_metab[2]))
            ymax = std::max(ymax, s.nrmse_metab[2]);
    if (!(ymax > 0.0))
        ymax = 1.0;
    ymax *= 1.1;
    auto py = [&](double v) { return h - pad - v / ymax * (h - 2 * pad); };
    const double slot = (w - 2 * pad) / static_cast<double>(std::max<std::size_t>(1, summaries.size()));

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << pad << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
    out << "<text x=\"4\" y=\"" << py(ymax / 1.1) << "\" font-size=\"11\">" << fmt(ymax / 1.1) << "%</text>\n";
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        const auto& q = summaries[i].nrmse_metab;
        const double x0 = pad + slot * static_cast<double>(i) + slot * 0.2;
        const double bw = slot * 0.6;
        if (std::isfinite(q[0]) && std::isfinite(q[2])) {
            out << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(py(q[2])) << "\" width=\"" << fmt(bw) << "\" height=\""
                << fmt(py(q[0]) - py(q[2])) << "\" fill=\"#c6dbef\" stroke=\"#08519c\"/>\n";
            out << "<line x1=\"" << fmt(x0) << "\" x2=\"" << fmt(x0 + bw) << "\" y1=\"" << fmt(py(q[1])) << "\" y2=\""
                << fmt(py(q[1])) << "\" stroke=\"#08519c\" stroke-width=\"2\"/>\n";
        }
        out << "<text x=\"" << fmt(x0) << "\" y=\"" << h - pad + 16 << "\" font-size=\"11\">" << summaries[i].method
            << "</text>\n";
    }
    out << "</svg>\n";
}

Report compare(const MrsiVolume& v, const MrsiVolume& truth, const std::vector<Method>& methods,
               const MethodContext& ctx, const std::filesystem::path& out_dir, const CompareOptions& opts)
{
    require_same_axis(v.axis(), truth.axis(), "compare");
    if (v.nx() != truth.nx() || v.ny() != truth.ny())
        throw DataError("compare: volume and truth differ in grid size");
    if (!v.has_masks())
        throw DataError("compare: volume has no brain mask");
    const auto voxels = v.brain_voxels();
    if (voxels.empty())
        throw DataError("compare: brain mask is empty");
    opts.bands.validate(v.axis());

    Report report;
    std::vector<std::vector<Spectrum>> outputs;
    for (Method m : methods) {
        const auto t0 = std::chrono::steady_clock::now();
        auto cleaned = run_method(m, v, voxels, ctx);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        auto rows = score(to_string(m), cleaned, truth, voxels, ms / static_cast<double>(voxels.size()), opts.bands);
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
        report.summaries.push_back(summarize(to_string(m), rows));
        outputs.push_back(std::move(cleaned));
    }

    if (out_dir.empty())
        return report;
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream f(out_dir / "voxels.csv");
        write_voxel_csv(report.rows, f, opts.include_timing);
    }
    {
        std::ofstream f(out_dir / "aggregate.csv");
        write_aggregate_csv(report.summaries, f, opts.include_timing);
    }
    {
        std::ofstream f(out_dir / "nrmse_box.svg");
        write_box_svg(f, "metabolite-band NRMSE (%) per method", report.summaries);
    }
    const auto bins = band_bins(v.axis(), opts.bands.whole);
    std::vector<double> ppm;
    for (auto k : bins)
        ppm.push_back(v.axis().index_to_ppm(static_cast<double>(k)));
    const std::size_t n_plot = std::min(opts.plot_voxels, voxels.size());
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        std::ofstream f(out_dir / ("spectra_" + to_string(methods[mi]) + ".svg"));
        std::vector<std::pair<std::string, std::vector<double>>> series;
        for (std::size_t p = 0; p < n_plot; ++p) {
            const std::size_t j = p * voxels.size() / std::max<std::size_t>(1, n_plot);
            const Spectrum t = to_frequency(truth.fid(voxels[j]));
            std::vector<double> tr, pr;
            // Offset each voxel vertically so the overlays do not collide.
            const double offset = static_cast<double>(p) * 1.5 * t.samples.cwiseAbs().maxCoeff();
            for (auto k : bins) {
                tr.push_back(t.samples[static_cast<Eigen::Index>(k)].real() + offset);
                pr.push_back(outputs[mi][j].samples[static_cast<Eigen::Index>(k)].real() + offset);
            }
            const std::string tag = "(" + std::to_string(voxels[j] / v.ny()) + "," + std::to_string(voxels[j] % v.ny()) + ")";
            series.emplace_back("truth " + tag, std::move(tr));
            series.emplace_back(to_string(methods[mi]) + " " + tag, std::move(pr));
        }
        write_line_svg(f, "real part, " + to_string(methods[mi]) + " vs truth", ppm, series, true);
    }
    return report;
}

} // namespace mrsi::metrics

namespace mrsi::metrics {

double linear_r2(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 3)
        return std::numeric_limits<double>::quiet_NaN();
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        return std::numeric_limits<double>::quiet_NaN();
    return sxy * sxy / (sxx * syy);
}

BenchResult bench(const ynet::YNetWeights<float>& weights, const BenchOptions& opts)
{
    if (opts.grid_sizes.empty() || opts.threads.empty())
        throw ConfigError("bench: need at least one grid size and one thread count");
    if (weights.config().padded_length != ynet::YNetConfig::padded_for(opts.phantom.axis.n_points(), weights.config().depth))
        throw AxisMismatchError("bench: weights do not match the phantom spectral axis");
    using clock = std::chrono::steady_clock;
    BenchResult res;
    std::vector<double> counts, hl_ms;
    double hl_last = 0.0, net_last = 0.0;
    for (std::size_t size : opts.grid_sizes) {
        sim::PhantomConfig pc = opts.phantom;
        pc.nx = pc.ny = size;
        const auto ph = sim::build_phantom(pc);
        const MrsiVolume v = b0_correct(ph.measured);
        const auto op = lipid::build_calibrated(v);
        const auto voxels = v.brain_voxels();
        std::vector<Spectrum> freq;
        freq.reserve(voxels.size());
        for (auto i : voxels)
            freq.push_back(to_frequency(v.fid(i)));

        for (std::size_t t : opts.threads) {
            auto t0 = clock::now();
            parallel_for(voxels.size(), t, [&](std::size_t j) {
                (void)hlsvd::remove_water(v.fid(voxels[j]), opts.hlsvd_rank);
            });
            const double hl = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
            t0 = clock::now();
            (void)ynet::infer_batch(weights, freq, op, weights.config().mode, t, opts.batch_size);
            const double net = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
            res.rows.push_back({"hlsvd", t, size, size, voxels.size(), hl});
            res.rows.push_back({to_string(weights.config().mode == sim::RemovalMode::Walinet ? Method::Walinet
                                                                                             : Method::Lipnet),
                                t, size, size, voxels.size(), net});
            if (t == opts.threads.front()) {
                counts.push_back(static_cast<double>(voxels.size()));
                hl_ms.push_back(hl);
                hl_last = hl;
                net_last = net;
            }
        }
    }
    res.hlsvd_r2 = linear_r2(counts, hl_ms);
    res.speedup = net_last > 0.0 ? hl_last / net_last : 0.0;
    return res;
}

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out)
{
    out << "method,threads,nx,ny,n_voxels,wall_ms,ms_per_voxel\n" << std::setprecision(8);
    for (const auto& r : rows)
        out << r.method << ',' << r.threads << ',' << r.nx << ',' << r.ny << ',' << r.n_voxels << ',' << r.wall_ms << ','
            << r.wall_ms / static_cast<double>(std::max<std::size_t>(1, r.n_voxels)) << '\n';
}

} // namespace mrsi::metrics
