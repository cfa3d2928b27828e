// mrsi-scrub: water/lipid removal workflows for MRSI data.
//
// Every subcommand reads `--config FILE` (INI, one [section] per subcommand)
// and flags; flags win. The resolved configuration is logged to stderr.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mrsi/core.hpp"
#include "mrsi/hlsvd.hpp"
#include "mrsi/lipid_l2.hpp"
#include "mrsi/lowrank.hpp"
#include "mrsi/metrics.hpp"
#include "mrsi/parallel.hpp"
#include "mrsi/simgen.hpp"
#include "mrsi/volume_io.hpp"
#include "mrsi/ynet.hpp"

namespace fs = std::filesystem;
using namespace mrsi;

namespace {

enum class Preset { Toy, Full };

// Spectral axis and training-size presets. Toy runs in minutes on one core.
struct PresetValues
{
    std::size_t points;
    std::size_t n_samples;
    std::size_t depth;
    std::size_t epochs;
    double lr;
};

PresetValues preset_values(Preset p)
{
    if (p == Preset::Toy)
        return {128, 2000, 3, 50, 1e-3};
    return {512, 10000, 4, 400, 0.01};
}

std::size_t resolve_threads(std::size_t flag)
{
    if (flag > 0)
        return flag;
    if (const char* env = std::getenv("MRSI_SCRUB_THREADS")) {
        try {
            const long n = std::stol(env);
            if (n > 0)
                return static_cast<std::size_t>(n);
        } catch (const std::exception&) {
        }
        throw ConfigError(std::string("MRSI_SCRUB_THREADS must be a positive integer, got '") + env + "'");
    }
    return 1;
}

void log_config(const CLI::App* sub, std::size_t threads)
{
    std::cerr << "# resolved configuration\nthreads=" << threads << "\n[" << sub->get_name() << "]\n"
              << sub->config_to_str(true, false) << std::flush;
}

std::ofstream open_out(const fs::path& p)
{
    std::ofstream f(p);
    if (!f)
        throw FormatError(FormatError::Kind::Io, "cannot write " + p.string());
    return f;
}

sim::RemovalMode manifest_mode(const fs::path& dir)
{
    std::ifstream in(dir / "manifest.txt");
    std::string seed, mode;
    if (!(in >> seed >> mode))
        throw DataError("cannot read mode from " + (dir / "manifest.txt").string());
    return sim::parse_mode(mode);
}

lipid::LipidOperator operator_for(const MrsiVolume& v, const std::string& path, const char* what)
{
    if (!path.empty())
        return lipid::load_operator(path, v.axis());
    if (v.scalp_voxels().empty())
        throw DataError(std::string(what) + " needs a scalp mask in the input volume or --operator");
    return lipid::build_calibrated(v);
}

sim::MetaboliteBasis basis_from(const std::string& path)
{
    return path.empty() ? sim::MetaboliteBasis::default_7t() : sim::load_basis(path);
}

// ---------------------------------------------------------------------------

struct PhantomArgs
{
    std::string out, basis;
    std::size_t nx = 32, ny = 32, points = 512;
    double bandwidth = 4000.0;
    double snr = 20.0;
    std::uint64_t seed = 1;
    bool no_bleed = false;
};

int cmd_phantom(const PhantomArgs& a)
{
    sim::PhantomConfig pc;
    pc.nx = a.nx;
    pc.ny = a.ny;
    pc.axis = SpectralAxis(a.points, a.bandwidth);
    pc.snr = a.snr;
    pc.seed = a.seed;
    pc.lipid_bleed = !a.no_bleed;
    const auto ph = sim::build_phantom(pc, basis_from(a.basis));
    fs::create_directories(a.out);
    write_volume(ph.measured, fs::path(a.out) / "measured.mrsx");
    write_volume(ph.metabolite, fs::path(a.out) / "metabolite.mrsx");
    write_volume(ph.lipid, fs::path(a.out) / "lipid.mrsx");
    write_volume(ph.water, fs::path(a.out) / "water.mrsx");
    std::cout << "phantom " << a.nx << "x" << a.ny << "x" << a.points << ": " << ph.measured.brain_voxels().size()
              << " brain, " << ph.measured.scalp_voxels().size() << " scalp voxels -> " << a.out << "\n";
    return 0;
}

struct SimulateArgs
{
    std::string out, mode = "walinet", op_path, nuisance_from, basis;
    Preset preset = Preset::Toy;
    std::size_t n = 0, points = 0, op_spectra = 64;
    double bandwidth = 4000.0;
    std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a, std::size_t threads)
{
    const auto pv = preset_values(a.preset);
    const std::size_t n = a.n > 0 ? a.n : pv.n_samples;
    const SpectralAxis axis(a.points > 0 ? a.points : pv.points, a.bandwidth);
    const auto mode = sim::parse_mode(a.mode);
    fs::create_directories(a.out);

    std::unique_ptr<sim::NuisanceSource> lipid_src, water_src;
    std::optional<MrsiVolume> source;
    if (!a.nuisance_from.empty()) {
        source = read_volume(a.nuisance_from);
        require_same_axis(source->axis(), axis, "--nuisance-from");
        // Scalp voxels become the lipid pool once their water is removed.
        const auto scalp = source->scalp_voxels();
        if (scalp.empty())
            throw DataError("--nuisance-from volume has no scalp voxels");
        parallel_for(scalp.size(), threads, [&](std::size_t j) {
            source->set_fid(scalp[j], hlsvd::remove_water(source->fid(scalp[j])));
        });
        lipid_src = std::make_unique<sim::VoxelPoolSource>(*source, scalp, sim::Range{0.5, 2.0});
        if (mode == sim::RemovalMode::Walinet)
            water_src = std::make_unique<sim::HsvdWaterSource>(*source, source->brain_voxels(), 64, hlsvd::kWaterBand,
                                                               sim::Range{0.1, 100.0}, 10, threads);
    } else {
        lipid_src = std::make_unique<sim::ParametricLipidSource>(axis);
        if (mode == sim::RemovalMode::Walinet)
            water_src = std::make_unique<sim::ParametricWaterSource>(axis);
    }

    lipid::LipidOperator op = !a.op_path.empty()  ? lipid::load_operator(a.op_path, axis)
                              : source.has_value() ? lipid::build_calibrated(*source)
                                                   : sim::synthetic_lipid_operator(axis, a.op_spectra, mix_seed(a.seed, 0x0B));
    lipid::save_operator(op, fs::path(a.out) / "operator.lop");

    sim::TrainingSetConfig tc;
    tc.mode = mode;
    tc.seed = a.seed;
    tc.threads = threads;
    const auto samples = sim::make_training_set(n, basis_from(a.basis), *lipid_src, water_src.get(), op, tc);
    sim::save_training_set(a.out, samples, mode);
    std::cout << "simulated " << n << " " << a.mode << " samples (" << axis.n_points() << " points, beta " << op.beta()
              << ") -> " << a.out << "\n";
    return 0;
}

struct TrainArgs
{
    std::string data, out, resume;
    Preset preset = Preset::Toy;
    std::size_t epochs = 0, depth = 0, base_channels = 16, batch = 32;
    double lr = 0.0, validation_fraction = 0.1;
    std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a)
{
    const auto pv = preset_values(a.preset);
    const auto data = sim::load_training_set(a.data);
    if (data.empty())
        throw DataError("training set is empty");
    ynet::TrainConfig tc;
    tc.epochs = a.epochs > 0 ? a.epochs : pv.epochs;
    tc.lr = a.lr > 0.0 ? a.lr : pv.lr;
    tc.batch_size = a.batch;
    tc.seed = a.seed;
    tc.validation_fraction = a.validation_fraction;
    auto ycfg = ynet::YNetConfig::for_points(data.front().x1.size(), a.depth > 0 ? a.depth : pv.depth, a.base_channels);
    ycfg.mode = manifest_mode(a.data);

    std::optional<ynet::YNetWeights<float>> resume;
    if (!a.resume.empty())
        resume = ynet::load_weights(a.resume, &ycfg);

    std::cerr << "# network: " << ycfg << "\n";
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = ynet::train(data, tc, ycfg, resume ? &*resume : nullptr, [&](const ynet::HistoryRow& r) {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cerr << "epoch " << r.epoch << " lr " << r.lr << " train " << r.train_mse << " val " << r.val_mse << " ("
                  << s << " s)\n";
    });
    fs::create_directories(a.out);
    ynet::save_weights(res.weights, fs::path(a.out) / "weights.ynw");
    ynet::write_history_csv(res.history, fs::path(a.out) / "history.csv");
    std::cout << "initial validation mse " << res.initial_val_mse << "\nfinal validation mse "
              << (res.history.empty() ? res.initial_val_mse : res.history.back().val_mse) << "\n";
    return 0;
}

struct RemoveArgs
{
    std::string method = "walinet", input, out, weights, op_path;
    std::size_t rank = lowrank::kDefaultRank, hlsvd_rank = hlsvd::kDefaultRank;
    bool no_b0 = false;
};

int cmd_remove(const RemoveArgs& a, std::size_t threads)
{
    const auto m = metrics::parse_method(a.method);
    const MrsiVolume in = read_volume(a.input);
    if (m == metrics::Method::None) {
        // Pass-through: no B0 correction or low-rank step either.
        write_volume(in, a.out);
        std::cout << "method none: copied " << a.input << " -> " << a.out << "\n";
        return 0;
    }
    const MrsiVolume v = (in.has_b0() && !a.no_b0) ? b0_correct(in) : in;

    std::optional<lipid::LipidOperator> op;
    if (metrics::needs_operator(m))
        op = operator_for(v, a.op_path, ("method " + a.method).c_str());
    std::optional<ynet::YNetWeights<float>> w;
    if (m == metrics::Method::Walinet || m == metrics::Method::Lipnet || m == metrics::Method::HlsvdLipnet) {
        if (a.weights.empty())
            throw ConfigError("method " + a.method + " needs --weights");
        w = ynet::load_weights(a.weights);
    }
    metrics::MethodContext ctx;
    ctx.op = op ? &*op : nullptr;
    ctx.walinet = ctx.lipnet = w ? &*w : nullptr;
    ctx.hlsvd_rank = a.hlsvd_rank;
    ctx.threads = threads;

    MrsiVolume out = metrics::remove(m, v, ctx);
    if (a.rank > 0) {
        if (!out.has_masks()) {
            std::cerr << "warning: no brain mask, skipping the low-rank step\n";
        } else {
            const std::size_t k = std::min({a.rank, out.brain_voxels().size(), out.axis().n_points()});
            MrsiVolume lr = lowrank::denoise(out, k);
            // Keep non-brain voxels as they were.
            for (auto i : out.brain_voxels())
                out.set_fid(i, lr.fid(i));
        }
    }
    write_volume(out, a.out);
    std::cout << "method " << a.method << " -> " << a.out << "\n";
    return 0;
}

struct EvaluateArgs
{
    std::string data, weights, op_path, out;
};

int cmd_evaluate(const EvaluateArgs& a, std::size_t threads)
{
    const auto data = sim::load_training_set(a.data);
    if (data.empty())
        throw DataError("test set is empty");
    const auto w = ynet::load_weights(a.weights);
    const fs::path op_path = a.op_path.empty() ? fs::path(a.data) / "operator.lop" : fs::path(a.op_path);
    const auto op = lipid::load_operator(op_path, data.front().x1.axis);
    const auto mode = manifest_mode(a.data);

    std::vector<Spectrum> x1;
    for (const auto& s : data)
        x1.push_back(s.x1);
    const auto inf = ynet::infer_batch(w, x1, op, mode, threads, 4);

    const metrics::BandRanges bands;
    const std::string net = sim::to_string(mode);
    std::vector<metrics::VoxelRow> rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Spectrum l2 = lipid::apply(op, data[i].x1);
        for (const auto* pred : {&inf[i].m_tilde, &l2}) {
            metrics::VoxelRow r;
            r.x = i;
            r.method = pred == &l2 ? "l2" : net;
            auto safe = [&](const PpmBand& b) {
                try {
                    return metrics::nrmse(*pred, data[i].clean_m, b);
                } catch (const Error&) {
                    return std::numeric_limits<double>::quiet_NaN();
                }
            };
            r.nrmse_whole = safe(bands.whole);
            r.nrmse_metab = safe(bands.metabolite);
            r.nrmse_lipid = safe(bands.lipid);
            r.residual_lipid = metrics::band_integral(*pred, bands.lipid);
            r.residual_water = metrics::band_integral(*pred, bands.water);
            rows.push_back(r);
        }
    }
    std::vector<metrics::MethodSummary> sums{metrics::summarize(net, rows), metrics::summarize("l2", rows)};
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        auto f = open_out(fs::path(a.out) / "samples.csv");
        metrics::write_voxel_csv(rows, f, false);
        auto g = open_out(fs::path(a.out) / "aggregate.csv");
        metrics::write_aggregate_csv(sums, g, false);
    }
    for (const auto& s : sums)
        std::cout << s.method << ": median NRMSE whole " << s.nrmse_whole[1] << "% metabolite " << s.nrmse_metab[1]
                  << "% lipid " << s.nrmse_lipid[1] << "%\n";
    return 0;
}

struct CompareArgs
{
    std::string input, truth, methods = "none,l2,hlsvd+l2,walinet", walinet, lipnet, op_path, out;
    std::size_t hlsvd_rank = hlsvd::kDefaultRank;
    bool no_timing = false;
};

int cmd_compare(const CompareArgs& a, std::size_t threads)
{
    const auto methods = metrics::parse_methods(a.methods);
    const MrsiVolume in = read_volume(a.input);
    const MrsiVolume v = in.has_b0() ? b0_correct(in) : in;
    const MrsiVolume truth = read_volume(a.truth);

    bool need_op = false;
    for (auto m : methods)
        need_op = need_op || metrics::needs_operator(m);
    std::optional<lipid::LipidOperator> op;
    if (need_op)
        op = operator_for(v, a.op_path, "compare");
    std::optional<ynet::YNetWeights<float>> wal, lip;
    if (!a.walinet.empty())
        wal = ynet::load_weights(a.walinet);
    if (!a.lipnet.empty())
        lip = ynet::load_weights(a.lipnet);

    metrics::MethodContext ctx;
    ctx.op = op ? &*op : nullptr;
    ctx.walinet = wal ? &*wal : nullptr;
    ctx.lipnet = lip ? &*lip : nullptr;
    ctx.hlsvd_rank = a.hlsvd_rank;
    ctx.threads = threads;
    metrics::CompareOptions co;
    co.include_timing = !a.no_timing;
    const auto rep = metrics::compare(v, truth, methods, ctx, a.out, co);
    metrics::write_aggregate_csv(rep.summaries, std::cout, co.include_timing);
    return 0;
}

struct BenchArgs
{
    std::string out, weights, sizes = "16,24,32", threads = "1,max";
    std::size_t points = 512;
    double bandwidth = 4000.0;
    std::uint64_t seed = 1;
};

std::vector<std::size_t> parse_list(const std::string& s, const char* what)
{
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        if (item == "max") {
            out.push_back(default_threads());
            continue;
        }
        try {
            std::size_t pos = 0;
            const long v = std::stol(item, &pos);
            if (pos != item.size() || v <= 0)
                throw std::invalid_argument(item);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": bad entry '" + item + "'");
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (out.empty())
        throw ConfigError(std::string(what) + ": empty list");
    return out;
}

int cmd_bench(const BenchArgs& a)
{
    metrics::BenchOptions bo;
    bo.grid_sizes = parse_list(a.sizes, "--sizes");
    bo.threads = parse_list(a.threads, "--threads-list");
    bo.phantom.axis = SpectralAxis(a.points, a.bandwidth);
    bo.phantom.seed = a.seed;
    // Timing does not depend on the weight values, so untrained weights are
    // fine when none are given.
    const auto w = a.weights.empty() ? ynet::YNetWeights<float>::init(ynet::YNetConfig::for_points(a.points), a.seed)
                                     : ynet::load_weights(a.weights);
    const auto res = metrics::bench(w, bo);
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        auto f = open_out(fs::path(a.out) / "bench.csv");
        metrics::write_bench_csv(res.rows, f);
    }
    metrics::write_bench_csv(res.rows, std::cout);
    std::cout << "hlsvd_r2 " << res.hlsvd_r2 << "\nspeedup " << res.speedup << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Water and lipid removal for MRSI spectra"};
    app.set_config("--config", "", "INI file; [section] per subcommand, flags override")->check(CLI::ExistingFile);
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    std::size_t threads_flag = 0;
    app.add_option("--threads", threads_flag, "Worker threads (default: $MRSI_SCRUB_THREADS or 1)");

    const std::map<std::string, Preset> presets{{"toy", Preset::Toy}, {"full", Preset::Full}};

    PhantomArgs pa;
    auto* phantom = app.add_subcommand("phantom", "Build a synthetic head phantom");
    phantom->add_option("--out", pa.out, "Output directory")->required();
    phantom->add_option("--nx", pa.nx)->capture_default_str();
    phantom->add_option("--ny", pa.ny)->capture_default_str();
    phantom->add_option("--points", pa.points)->capture_default_str();
    phantom->add_option("--bandwidth", pa.bandwidth, "Hz")->capture_default_str();
    phantom->add_option("--snr", pa.snr)->capture_default_str();
    phantom->add_option("--seed", pa.seed)->capture_default_str();
    phantom->add_option("--basis", pa.basis, "Metabolite peak table (default: built-in 7T set)")
        ->check(CLI::ExistingFile);
    phantom->add_flag("--no-bleed", pa.no_bleed, "Disable k-space truncation of the scalp lipids");

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "Generate a training or test set");
    simulate->add_option("--out", sa.out)->required();
    simulate->add_option("--mode", sa.mode)->check(CLI::IsMember({"walinet", "lipnet"}))->capture_default_str();
    simulate->add_option("--preset", sa.preset, "toy or full")
        ->transform(CLI::CheckedTransformer(presets, CLI::ignore_case))
        ->default_str("toy");
    simulate->add_option("--n", sa.n, "Samples (default from preset)");
    simulate->add_option("--points", sa.points, "Spectral points (default from preset)");
    simulate->add_option("--bandwidth", sa.bandwidth)->capture_default_str();
    simulate->add_option("--operator", sa.op_path, "Lipid operator file to use instead of building one");
    simulate->add_option("--operator-spectra", sa.op_spectra, "Synthetic spectra behind the default operator")
        ->capture_default_str();
    simulate->add_option("--nuisance-from", sa.nuisance_from, "Volume whose scalp/brain voxels supply lipids/water");
    simulate->add_option("--basis", sa.basis, "Metabolite peak table (default: built-in 7T set)")
        ->check(CLI::ExistingFile);
    simulate->add_option("--seed", sa.seed)->capture_default_str();

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train a network on a simulated set");
    train->add_option("--data", ta.data)->required()->check(CLI::ExistingDirectory);
    train->add_option("--out", ta.out)->required();
    train->add_option("--preset", ta.preset, "toy or full")
        ->transform(CLI::CheckedTransformer(presets, CLI::ignore_case))
        ->default_str("toy");
    train->add_option("--epochs", ta.epochs, "Default from preset");
    train->add_option("--lr", ta.lr, "Default from preset");
    train->add_option("--depth", ta.depth, "Default from preset");
    train->add_option("--base-channels", ta.base_channels)->capture_default_str();
    train->add_option("--batch", ta.batch)->capture_default_str();
    train->add_option("--validation-fraction", ta.validation_fraction)->capture_default_str();
    train->add_option("--resume", ta.resume, "Continue from a weights file")->check(CLI::ExistingFile);
    train->add_option("--seed", ta.seed)->capture_default_str();

    RemoveArgs ra;
    auto* remove = app.add_subcommand("remove", "Clean a volume");
    remove->add_option("--method", ra.method)->capture_default_str();
    remove->add_option("--input", ra.input)->required()->check(CLI::ExistingFile);
    remove->add_option("--out", ra.out)->required();
    remove->add_option("--weights", ra.weights)->check(CLI::ExistingFile);
    remove->add_option("--operator", ra.op_path, "Lipid operator (default: built from the scalp mask)")
        ->check(CLI::ExistingFile);
    remove->add_option("--rank", ra.rank, "Low-rank post-step rank, 0 to disable")->capture_default_str();
    remove->add_option("--hlsvd-rank", ra.hlsvd_rank)->capture_default_str();
    remove->add_flag("--no-b0", ra.no_b0, "Skip B0 correction");

    EvaluateArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "Score a network against L2 on a simulated test set");
    evaluate->add_option("--data", ea.data)->required()->check(CLI::ExistingDirectory);
    evaluate->add_option("--weights", ea.weights)->required()->check(CLI::ExistingFile);
    evaluate->add_option("--operator", ea.op_path, "Default: <data>/operator.lop");
    evaluate->add_option("--out", ea.out, "Directory for samples.csv and aggregate.csv");

    CompareArgs ca;
    auto* compare = app.add_subcommand("compare", "Run several methods on a volume and score them");
    compare->add_option("--input", ca.input)->required()->check(CLI::ExistingFile);
    compare->add_option("--truth", ca.truth, "Clean metabolite volume")->required()->check(CLI::ExistingFile);
    compare->add_option("--methods", ca.methods)->capture_default_str();
    compare->add_option("--walinet", ca.walinet)->check(CLI::ExistingFile);
    compare->add_option("--lipnet", ca.lipnet)->check(CLI::ExistingFile);
    compare->add_option("--operator", ca.op_path)->check(CLI::ExistingFile);
    compare->add_option("--out", ca.out)->required();
    compare->add_option("--hlsvd-rank", ca.hlsvd_rank)->capture_default_str();
    compare->add_flag("--no-timing", ca.no_timing, "Leave wall-time columns out of the CSVs");

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "Time HLSVD against network inference");
    bench->add_option("--out", ba.out);
    bench->add_option("--weights", ba.weights)->check(CLI::ExistingFile);
    bench->add_option("--sizes", ba.sizes, "Grid sizes")->capture_default_str();
    bench->add_option("--threads-list", ba.threads, "Thread counts, 'max' = all cores")->capture_default_str();
    bench->add_option("--points", ba.points)->capture_default_str();
    bench->add_option("--bandwidth", ba.bandwidth)->capture_default_str();
    bench->add_option("--seed", ba.seed)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const std::size_t threads = resolve_threads(threads_flag);
        for (auto* sub : app.get_subcommands())
            log_config(sub, threads);
        if (phantom->parsed())
            return cmd_phantom(pa);
        if (simulate->parsed())
            return cmd_simulate(sa, threads);
        if (train->parsed())
            return cmd_train(ta);
        if (remove->parsed())
            return cmd_remove(ra, threads);
        if (evaluate->parsed())
            return cmd_evaluate(ea, threads);
        if (compare->parsed())
            return cmd_compare(ca, threads);
        if (bench->parsed())
            return cmd_bench(ba);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
