#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "mrsi/ynet.hpp"
#include "oracles.hpp"

using namespace mrsi;
using namespace mrsi::ynet;

namespace {

template <typename T>
Mat<T> random_channels(Rng& rng, std::size_t cols)
{
    Mat<T> m(2, static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<T>(normal(rng, 0, 1));
    return m;
}

YNetConfig tiny(std::size_t length = 32)
{
    auto c = YNetConfig::for_points(length, 2, 4);
    c.dropout_rate = 0.0;
    return c;
}

YNetWeights<double> perturbed(const YNetConfig& c, std::uint64_t seed)
{
    auto w = YNetWeights<double>::init(c, seed);
    Rng rng(mix_seed(seed, 99));
    for (auto& p : w.mutable_params())
        p += 0.05 * normal(rng, 0, 1);
    return w;
}

std::vector<sim::TrainingSample> small_set(std::size_t n, std::uint64_t seed)
{
    const SpectralAxis ax(64, 4000.0);
    sim::ParametricLipidSource ls(ax);
    sim::ParametricWaterSource ws(ax);
    const auto op = sim::synthetic_lipid_operator(ax, 16, 3);
    sim::TrainingSetConfig tc;
    tc.seed = seed;
    return sim::make_training_set(n, sim::MetaboliteBasis::default_7t(), ls, &ws, op, tc);
}

} // namespace

TEST_CASE("config validation and padding")
{
    CHECK(YNetConfig::padded_for(453, 4) == 464);
    CHECK(YNetConfig::padded_for(512, 4) == 512);
    CHECK(YNetConfig::padded_for(128, 3) == 128);
    auto c = YNetConfig::for_points(512);
    CHECK_NOTHROW(c.validate());
    c.kernel = 6;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = YNetConfig::for_points(512);
    c.padded_length = 500;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("backward matches central differences")
{
    const auto cfg = tiny();
    auto w = perturbed(cfg, 5);
    const std::size_t L = 32, B = 2;
    Rng rng(1);
    const auto x1 = random_channels<double>(rng, L * B);
    const auto x2 = random_channels<double>(rng, L * B);
    const auto t = random_channels<double>(rng, L * B);
    ForwardCache<double> cache;
    Mat<double> g;
    mse_loss(forward(w, x1, x2, L, nullptr, &cache), t, &g);
    const auto grad = backward(w, cache, g);
    REQUIRE(grad.size() == w.size());

    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double orig = w.params()[i];
        w.mutable_params()[i] = orig + h;
        const double lp = mse_loss(forward(w, x1, x2, L, nullptr), t);
        w.mutable_params()[i] = orig - h;
        const double lm = mse_loss(forward(w, x1, x2, L, nullptr), t);
        w.mutable_params()[i] = orig;
        const double num = (lp - lm) / (2 * h);
        worst = std::max(worst, std::abs(num - grad[i]) / std::max(1e-6, std::abs(num) + std::abs(grad[i])));
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("stale cache rejected, zero upstream gradient gives zero")
{
    const auto cfg = tiny();
    auto w = perturbed(cfg, 6);
    Rng rng(2);
    const auto x1 = random_channels<double>(rng, 32);
    const auto x2 = random_channels<double>(rng, 32);
    ForwardCache<double> cache;
    const auto out = forward(w, x1, x2, 32, nullptr, &cache);
    const auto grad = backward(w, cache, Mat<double>(Mat<double>::Zero(out.rows(), out.cols())));
    CHECK(std::all_of(grad.begin(), grad.end(), [](double v) { return v == 0.0; }));
    w.mutable_params()[0] += 1.0;
    CHECK_THROWS_AS(backward(w, cache, out), std::logic_error);
}

TEST_CASE("one Adam step lowers the loss on a fixed batch")
{
    const auto cfg = tiny();
    TrainConfig tc;
    tc.lr = 1e-3;
    int decreased = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto w = YNetWeights<double>::init(cfg, seed);
        Rng rng(mix_seed(seed, 7));
        const auto x1 = random_channels<double>(rng, 4 * 32);
        const auto x2 = random_channels<double>(rng, 4 * 32);
        const auto t = random_channels<double>(rng, 4 * 32);
        ForwardCache<double> cache;
        Mat<double> g;
        const double before = mse_loss(forward(w, x1, x2, 32, nullptr, &cache), t, &g);
        adam_step(w, backward(w, cache, g), tc.lr, tc);
        if (mse_loss(forward(w, x1, x2, 32, nullptr), t) < before)
            ++decreased;
    }
    CHECK(decreased == 20);
}

TEST_CASE("zero input with zero biases gives zero output")
{
    const auto cfg = tiny();
    const auto w = YNetWeights<double>::init(cfg, 3);
    const Mat<double> z = Mat<double>::Zero(2, 64);
    CHECK(forward(w, z, z, 32, nullptr).cwiseAbs().maxCoeff() == 0.0);

    const SpectralAxis ax(32, 4000.0);
    const auto op = sim::synthetic_lipid_operator(ax, 8, 1);
    const auto r = infer(w.cast<float>(), Spectrum(ax, Domain::Frequency), op, sim::RemovalMode::Walinet);
    CHECK(r.y.samples.norm() == 0.0);
    CHECK(r.m_tilde.samples.norm() == 0.0);
}

TEST_CASE("output shape for the supported lengths")
{
    for (std::size_t n : {128u, 256u, 512u, 453u}) {
        const auto cfg = YNetConfig::for_points(n, 4, 4);
        const auto w = YNetWeights<float>::init(cfg, 1);
        Rng rng(n);
        const auto x = random_channels<float>(rng, cfg.padded_length);
        const auto out = forward(w, x, x, cfg.padded_length, nullptr);
        CHECK(out.rows() == 2);
        CHECK(out.cols() == static_cast<Eigen::Index>(cfg.padded_length));

        const SpectralAxis ax(n, 4000.0);
        const auto op = sim::synthetic_lipid_operator(ax, n / 4, 2);
        Spectrum s(ax, Domain::Frequency, oracle::random_vector(rng, static_cast<Eigen::Index>(n)));
        const auto r = infer(w, s, op, sim::RemovalMode::Walinet);
        CHECK(r.y.samples.size() == static_cast<Eigen::Index>(n));
        CHECK(r.m_tilde.samples == s.samples - r.y.samples);
        CHECK((r.m_tilde.samples + r.y.samples - s.samples).cwiseAbs().maxCoeff() <= 1e-14 * s.samples.cwiseAbs().maxCoeff() * 8);
    }
}

TEST_CASE("eval mode deterministic, train mode seeded")
{
    const auto cfg = YNetConfig::for_points(64, 3, 4);
    const auto w = YNetWeights<float>::init(cfg, 4);
    Rng rng(3);
    const auto a = random_channels<float>(rng, 128);
    const auto b = random_channels<float>(rng, 128);
    CHECK(forward(w, a, b, 64, nullptr) == forward(w, a, b, 64, nullptr));
    Rng d1(8), d2(8);
    CHECK(forward(w, a, b, 64, &d1) == forward(w, a, b, 64, &d2));
}

TEST_CASE("normalize_pair")
{
    const SpectralAxis ax(16, 1000.0);
    Rng rng(4);
    Spectrum x1(ax, Domain::Frequency, oracle::random_vector(rng, 16));
    CHECK(normalize_pair(x1, x1).energy == 1e-12);

    Spectrum x2 = x1;
    x2.samples[5] -= 1.0;
    CHECK(normalize_pair(x1, x2).energy == doctest::Approx(1.0));

    x2 = Spectrum(ax, Domain::Frequency, oracle::random_vector(rng, 16));
    const auto n1 = normalize_pair(x1, x2);
    Spectrum y1 = x1, y2 = x2;
    y1.samples *= 3.5;
    y2.samples *= 3.5;
    const auto n2 = normalize_pair(y1, y2);
    CHECK(n2.energy == doctest::Approx(3.5 * n1.energy));
    CHECK((n2.x1.samples - n1.x1.samples).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((n2.x2.samples - n1.x2.samples).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("phase augmentation")
{
    const SpectralAxis ax(32, 1000.0);
    Rng rng(5);
    Spectrum x(ax, Domain::Frequency, oracle::random_vector(rng, 32));
    CHECK(augment_phase(x, 0.0).samples == x.samples);
    const auto a = augment_phase(x, rng);
    CHECK((a.samples.cwiseAbs() - x.samples.cwiseAbs()).cwiseAbs().maxCoeff() < 1e-12);

    // A perfect predictor has the same (zero) loss after a shared rotation, and
    // so does any fixed prediction error rotated with it.
    Spectrum target(ax, Domain::Frequency, oracle::random_vector(rng, 32));
    Spectrum pred = target;
    pred.samples += 0.1 * oracle::random_vector(rng, 32);
    auto loss = [](const Spectrum& p, const Spectrum& t) {
        Mat<double> mp(2, 32), mt(2, 32);
        split_channels<double>(p.samples, 1.0, mp, 0, 32);
        split_channels<double>(t.samples, 1.0, mt, 0, 32);
        return mse_loss(mp, mt);
    };
    for (double omega : {0.3, 1.7, 4.0}) {
        CHECK(loss(augment_phase(target, omega), augment_phase(target, omega)) == 0.0);
        CHECK(loss(augment_phase(pred, omega), augment_phase(target, omega)) ==
              doctest::Approx(loss(pred, target)).epsilon(1e-12));
    }
}

TEST_CASE("split and merge channels")
{
    Rng rng(6);
    const CVector s = oracle::random_vector(rng, 20);
    Mat<double> m = Mat<double>::Constant(2, 64, 7.0);
    split_channels<double>(s, 2.0, m, 32, 32);
    CHECK(m(0, 32) == 2.0 * s[0].real());
    CHECK(m(1, 32) == 2.0 * s[0].imag());
    CHECK(m(0, 52) == 0.0);
    CHECK(m(0, 0) == 7.0);
    const CVector back = merge_channels(m, 32, 20, 0.5);
    CHECK((back - s).cwiseAbs().maxCoeff() < 1e-15);
    Mat<double> again(2, 32);
    split_channels<double>(back, 1.0, again, 0, 32);
    CHECK(merge_channels(again, 0, 20) == back);
    CHECK_THROWS_AS(split_channels<double>(s, 1.0, m, 0, 16), AxisMismatchError);
}

TEST_CASE("weights round trip and errors")
{
    auto w = YNetWeights<float>::init(YNetConfig::for_points(64, 3, 4), 9);
    w.adam_m.assign(w.size(), 0.5f);
    w.adam_v.assign(w.size(), 0.25f);
    w.adam_step = 12;
    w.epochs_trained = 3;
    std::stringstream buf;
    save_weights(w, buf);
    const std::string bytes = buf.str();

    std::istringstream in(bytes);
    const auto back = load_weights(in);
    CHECK(back.config() == w.config());
    CHECK(back.params() == w.params());
    CHECK(back.adam_m == w.adam_m);
    CHECK(back.adam_step == 12);
    CHECK(back.epochs_trained == 3);
    std::stringstream again;
    save_weights(back, again);
    CHECK(again.str() == bytes);

    std::istringstream cut(bytes.substr(0, bytes.size() / 2));
    try {
        load_weights(cut);
        FAIL("truncated weights accepted");
    } catch (const FormatError& e) {
        CHECK(e.kind() == FormatError::Kind::Truncated);
    }

    auto other = YNetConfig::for_points(64, 2, 4);
    std::istringstream in2(bytes);
    try {
        load_weights(in2, &other);
        FAIL("depth mismatch accepted");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("depth") != std::string::npos);
    }

    std::istringstream bad("XXXX1234");
    CHECK_THROWS_AS(load_weights(bad), FormatError);
}

TEST_CASE("learning-rate schedule")
{
    TrainConfig c;
    CHECK(lr_at_epoch(c, 0) == 0.01);
    CHECK(lr_at_epoch(c, 49) == 0.01);
    CHECK(lr_at_epoch(c, 50) == doctest::Approx(0.0025));
    CHECK(lr_at_epoch(c, 100) == doctest::Approx(0.000625));
    c.lr = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("training is deterministic and mode mismatch is rejected")
{
    const auto data = small_set(40, 5);
    TrainConfig tc;
    tc.epochs = 2;
    tc.lr = 1e-3;
    tc.batch_size = 8;
    tc.seed = 4;
    const auto ycfg = YNetConfig::for_points(64, 2, 4);
    const auto a = train(data, tc, ycfg);
    const auto b = train(data, tc, ycfg);
    CHECK(a.weights.params() == b.weights.params());
    REQUIRE(a.history.size() == 2);
    CHECK(a.history[0].val_mse == b.history[0].val_mse);
    CHECK(a.n_train + a.n_val == 40);
    CHECK(std::isfinite(a.initial_val_mse));
    CHECK(a.weights.epochs_trained == 2);

    const auto resumed = train(data, tc, ycfg, &a.weights);
    CHECK(resumed.history.front().epoch == 2);

    const auto op = sim::synthetic_lipid_operator(SpectralAxis(64, 4000.0), 16, 3);
    CHECK_THROWS_AS(infer(a.weights, data[0].x1, op, sim::RemovalMode::Lipnet), ConfigError);
    CHECK_THROWS_AS(train({}, tc, ycfg), DataError);
}
