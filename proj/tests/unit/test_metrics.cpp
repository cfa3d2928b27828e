#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mrsi/metrics.hpp"
#include "oracles.hpp"

using namespace mrsi;
using namespace mrsi::metrics;

namespace {

const SpectralAxis kAxis(1024, 4000.0);

Spectrum random_freq(Rng& rng, const SpectralAxis& ax = kAxis)
{
    return Spectrum(ax, Domain::Frequency, oracle::random_vector(rng, static_cast<Eigen::Index>(ax.n_points())));
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

sim::Phantom small_phantom(std::uint64_t seed, double snr)
{
    sim::PhantomConfig c;
    c.nx = 16;
    c.ny = 16;
    c.axis = SpectralAxis(128, 4000.0);
    c.snr = snr;
    c.seed = seed;
    return sim::build_phantom(c);
}

} // namespace

TEST_CASE("nrmse closed forms")
{
    Rng rng(1);
    const auto t = random_freq(rng);
    const PpmBand band{4.2, 1.9};
    CHECK(nrmse(t, t, band) == 0.0);
    Spectrum twice = t;
    twice.samples *= 2.0;
    CHECK(nrmse(twice, t, band) == doctest::Approx(100.0).epsilon(1e-12));

    const auto bins = band_bins(kAxis, band);
    double band_norm = 0.0;
    for (auto k : bins)
        band_norm += std::norm(t.samples[static_cast<Eigen::Index>(k)]);
    Spectrum spike = t;
    spike.samples[static_cast<Eigen::Index>(bins[bins.size() / 2])] += std::sqrt(band_norm) / 10.0;
    CHECK(nrmse(spike, t, band) == doctest::Approx(10.0).epsilon(1e-12));

    Spectrum scaled_p = spike, scaled_t = t;
    scaled_p.samples *= -3.0;
    scaled_t.samples *= -3.0;
    CHECK(nrmse(scaled_p, scaled_t, band) == doctest::Approx(nrmse(spike, t, band)).epsilon(1e-12));

    // Norm triangle inequality through an intermediate spectrum.
    const auto mid = random_freq(rng);
    const double tn = nrmse(spike, t, band), a = nrmse(spike, mid, band) * std::sqrt(band_norm);
    double mid_norm = 0.0;
    for (auto k : bins)
        mid_norm += std::norm(mid.samples[static_cast<Eigen::Index>(k)]);
    CHECK(tn * std::sqrt(band_norm) <= a * std::sqrt(mid_norm) / std::sqrt(band_norm) + nrmse(mid, t, band) * std::sqrt(band_norm) + 1e-9);

    CHECK_THROWS_AS(nrmse(t, Spectrum(kAxis, Domain::Frequency), band), DataError);
    CHECK_THROWS_AS(nrmse(t, t, PpmBand{30.0, 20.0}), OutOfRangeError);
}

TEST_CASE("snr: Monte-Carlo peak over unit noise")
{
    const SpectralAxis ax(2048, 4000.0);
    double sum = 0.0;
    Rng rng(2);
    for (int r = 0; r < 100; ++r) {
        Spectrum s(ax, Domain::Frequency);
        for (auto& z : s.samples)
            z = {normal(rng, 0, 1), normal(rng, 0, 1)};
        s.samples[static_cast<Eigen::Index>(std::lround(ax.ppm_to_index(2.0)))] += 10.0;
        sum += snr(s);
    }
    CHECK(std::abs(sum / 100.0 - 10.0) <= 1.5);

    Spectrum s = random_freq(rng);
    const double a = snr(s);
    s.samples *= 2.0;
    CHECK(snr(s) == doctest::Approx(a).epsilon(1e-12));
    CHECK_THROWS_AS(snr(Spectrum(kAxis, Domain::Frequency)), NumericError);
}

TEST_CASE("fwhm of an absorption Lorentzian")
{
    const SpectralAxis ax(4096, 4096.0);
    const double width_hz = 10.0;
    const double f = ax.ppm_to_hz(2.0);
    Spectrum fid(ax, Domain::Time,
                 oracle::sinusoids({{f, std::numbers::pi * width_hz, 1.0, 0.0}}, ax.n_points(), ax.bandwidth_hz()));
    auto s = to_frequency(fid);
    const double w = fwhm(s, 2.0);
    CHECK(std::abs(w - width_hz / ax.transmitter_mhz()) <= ax.bin_ppm());
    s.samples *= 5.0;
    CHECK(fwhm(s, 2.0) == doctest::Approx(w).epsilon(1e-12));

    // Two overlapping lines read as one wider line.
    Spectrum pair_fid(ax, Domain::Time,
                      oracle::sinusoids({{f - 4.0, std::numbers::pi * width_hz, 1.0, 0.0},
                                         {f + 4.0, std::numbers::pi * width_hz, 1.0, 0.0}},
                                        ax.n_points(), ax.bandwidth_hz()));
    CHECK(fwhm(to_frequency(pair_fid), 2.0) > w);

    // A flat spectrum has no half-height crossing.
    Spectrum flat(ax, Domain::Frequency);
    flat.samples.setConstant(1.0);
    CHECK_THROWS_AS(fwhm(flat, 2.0), NumericError);
}

TEST_CASE("band integrals and residual maps")
{
    Rng rng(3);
    const auto s = random_freq(rng);
    const double mid = kAxis.index_to_ppm(std::round(kAxis.ppm_to_index(1.5)));
    CHECK(band_integral(s, {1.9, mid}) + band_integral(s, {mid, 0.7}) ==
          doctest::Approx(band_integral(s, {1.9, 0.7})).epsilon(1e-12));
    CHECK(band_integral(s, {1.0, 1.0}) == 0.0);

    MrsiVolume v(3, 2, kAxis);
    for (double r : residual_map(v, {1.9, 0.7}))
        CHECK(r == 0.0);
    v.fids().row(1) = oracle::random_vector(rng, 1024).transpose();
    v.brain_mask() = {0, 1, 1, 0, 0, 0};
    v.scalp_mask() = {1, 0, 0, 0, 0, 0};
    v.fids().row(0) = oracle::random_vector(rng, 1024).transpose();
    const auto map = residual_map(v, {1.9, 0.7});
    CHECK(map[0] == 0.0);
    CHECK(map[1] > 0.0);
    CHECK(map[2] == 0.0);
    for (double r : residual_map(v, {1.2, 1.2}))
        CHECK(r == 0.0);
}

TEST_CASE("method names")
{
    for (const char* name : {"none", "l2", "hlsvd", "hlsvd+l2", "lipnet", "walinet", "hlsvd+lipnet"})
        CHECK(to_string(parse_method(name)) == name);
    CHECK(parse_methods(" l2, walinet ") == std::vector<Method>{Method::L2, Method::Walinet});
    CHECK_THROWS_AS(parse_method("hsvd"), ConfigError);
    CHECK(needs_operator(Method::L2));
    CHECK_FALSE(needs_operator(Method::Hlsvd));
}

TEST_CASE("quantiles")
{
    CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
    CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.25) == doctest::Approx(1.75));
    CHECK(quantile({5.0}, 0.75) == 5.0);
}

TEST_CASE("remove: missing operator or weights is a configuration error")
{
    const auto ph = small_phantom(4, 20.0);
    MethodContext ctx;
    CHECK_THROWS_AS(remove(Method::L2, ph.measured, ctx), ConfigError);
    CHECK_THROWS_AS(remove(Method::Walinet, ph.measured, ctx), ConfigError);
    const auto same = remove(Method::None, ph.measured, ctx);
    CHECK(same.fids() == ph.measured.fids());
}

TEST_CASE("compare: baseline ordering, timing, determinism, inputs untouched")
{
    const auto ph = small_phantom(5, 0.0);
    const MrsiVolume v = b0_correct(ph.measured);
    const auto op = lipid::build_calibrated(v);
    MethodContext ctx;
    ctx.op = &op;
    const auto methods = parse_methods("none,l2,hlsvd,hlsvd+l2");

    const MrsiVolume v_copy = v;
    const auto report = compare(v, ph.metabolite, methods, ctx, {});
    CHECK(v.fids() == v_copy.fids());
    REQUIRE(report.summaries.size() == 4);
    const auto& none = report.summaries[0];
    CHECK(none.method == "none");
    for (const auto& s : report.summaries) {
        CHECK(s.wall_ms_total > 0.0);
        CHECK(s.n_voxels == v.brain_voxels().size());
        CHECK(s.nrmse_whole[1] <= none.nrmse_whole[1]);
    }
    for (const auto& r : report.rows)
        CHECK(r.wall_ms > 0.0);
    CHECK(report.summaries[3].nrmse_metab[1] < none.nrmse_metab[1]);

    const auto tmp = std::filesystem::temp_directory_path();
    const auto a = tmp / "test_metrics_a", b = tmp / "test_metrics_b";
    CompareOptions opts;
    opts.include_timing = false;
    compare(v, ph.metabolite, methods, ctx, a, opts);
    compare(v, ph.metabolite, methods, ctx, b, opts);
    for (const char* f : {"voxels.csv", "aggregate.csv", "nrmse_box.svg", "spectra_l2.svg"}) {
        CHECK(std::filesystem::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    const std::string header = slurp(a / "voxels.csv").substr(0, slurp(a / "voxels.csv").find('\n'));
    CHECK(header == "voxel_x,voxel_y,method,nrmse_whole,nrmse_metab,nrmse_lipid,snr,fwhm_ppm,residual_lipid,residual_water");
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
}

TEST_CASE("L2 cleanup lowers the mean lipid residual of a phantom")
{
    const auto ph = small_phantom(6, 20.0);
    const MrsiVolume v = b0_correct(ph.measured);
    const auto op = lipid::build_calibrated(v);
    MethodContext ctx;
    ctx.op = &op;
    const auto before = residual_map(v, {1.9, 0.7});
    const auto after = residual_map(remove(Method::L2, v, ctx), {1.9, 0.7});
    double sb = 0.0, sa = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        sb += before[i];
        sa += after[i];
    }
    CHECK(sa < sb);
}

TEST_CASE("timing regression helper")
{
    CHECK(linear_r2({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
    CHECK(linear_r2({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(0.64));
    std::ostringstream os;
    write_bench_csv({{"hlsvd", 1, 16, 16, 100, 250.0}}, os);
    CHECK(os.str() == "method,threads,nx,ny,n_voxels,wall_ms,ms_per_voxel\nhlsvd,1,16,16,100,250,2.5\n");
}
