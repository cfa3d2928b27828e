#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mrsi/core.hpp"
#include "mrsi/lipid_l2.hpp"
#include "mrsi/random.hpp"
#include "mrsi/simgen.hpp"

namespace mrsi::ynet {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

struct YNetConfig
{
    std::size_t depth = 4;
    std::size_t base_channels = 16;
    std::size_t kernel = 7;
    double dropout_rate = 0.01;
    std::size_t in_channels_per_branch = 2;
    std::size_t out_channels = 2;
    std::size_t pool_factor = 2;
    std::size_t padded_length = 512;
    sim::RemovalMode mode = sim::RemovalMode::Walinet;

    /// Throws ConfigError naming the offending field.
    void validate() const;
    /// Smallest multiple of 2^depth that is >= n.
    static std::size_t padded_for(std::size_t n_points, std::size_t depth);
    /// Config for spectra of n_points samples (padded_length derived).
    static YNetConfig for_points(std::size_t n_points, std::size_t depth = 4, std::size_t base_channels = 16);

    bool operator==(const YNetConfig&) const = default;
};

std::ostream& operator<<(std::ostream& os, const YNetConfig& c);

/// One learnable tensor inside the flat parameter vector.
/// Conv kernels have dims (out, in, kernel) stored with `out` varying fastest,
/// then `in`, then `kernel`; biases and PReLU slopes have dims (out).
struct TensorSpec
{
    std::string name;
    std::vector<std::uint32_t> dims;
    std::size_t offset = 0;
    std::size_t size = 0;
};

struct ConvRef
{
    std::size_t w = 0, b = 0; ///< tensor indices
    std::size_t out = 0, in = 0, k = 0;
};

struct BlockRef
{
    ConvRef c1;
    std::size_t a1 = 0;
    ConvRef c2;
    std::size_t a2 = 0;
};

struct Layout
{
    std::array<std::vector<BlockRef>, 2> enc;
    BlockRef bottleneck;
    std::vector<BlockRef> dec; ///< dec[i] works at the resolution of enc level i
    BlockRef final_block;
    ConvRef head;
    std::vector<TensorSpec> specs;
    std::size_t total = 0;
};

Layout make_layout(const YNetConfig& cfg);

template <typename T>
class YNetWeights
{
public:
    /// All parameters zero (slopes included).
    explicit YNetWeights(const YNetConfig& cfg);

    /// He fan-in uniform kernels, zero biases, PReLU slopes 0.25.
    static YNetWeights init(const YNetConfig& cfg, std::uint64_t seed);

    const YNetConfig& config() const noexcept { return cfg_; }
    const Layout& layout() const noexcept { return layout_; }
    std::size_t size() const noexcept { return params_.size(); }

    const std::vector<T>& params() const noexcept { return params_; }
    /// Mutable access invalidates forward caches taken earlier.
    std::vector<T>& mutable_params() noexcept
    {
        ++version_;
        return params_;
    }
    std::uint64_t version() const noexcept { return version_; }

    Eigen::Map<const Mat<T>> conv_weight(const ConvRef& c) const
    {
        return {params_.data() + layout_.specs[c.w].offset, static_cast<Eigen::Index>(c.out),
                static_cast<Eigen::Index>(c.in * c.k)};
    }
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> vec(std::size_t tensor) const
    {
        return {params_.data() + layout_.specs[tensor].offset, static_cast<Eigen::Index>(layout_.specs[tensor].size)};
    }

    template <typename U>
    YNetWeights<U> cast() const;

    // Optimizer state, persisted for resume.
    std::vector<T> adam_m;
    std::vector<T> adam_v;
    std::uint64_t adam_step = 0;
    std::uint64_t epochs_trained = 0;

private:
    template <typename U>
    friend class YNetWeights;

    YNetConfig cfg_;
    Layout layout_;
    std::vector<T> params_;
    std::uint64_t version_ = 0;
};

template <typename T>
struct BlockCache
{
    Mat<T> x, z1, m1, d1, z2, m2, out;
};

template <typename T>
struct ForwardCache
{
    const void* owner = nullptr;
    std::uint64_t version = 0;
    std::size_t length = 0;
    std::size_t batch = 0;
    std::array<std::vector<BlockCache<T>>, 2> enc;
    std::array<std::vector<std::vector<std::uint8_t>>, 2> pool_arg;
    BlockCache<T> bottleneck;
    std::vector<BlockCache<T>> dec;
    BlockCache<T> final_block;
};

/// x1, x2: 2 x (batch*length) with column b*length + p holding (re, im) of sample b at bin p.
/// `dropout_rng` non-null selects train mode. Returns 2 x (batch*length).
template <typename T>
Mat<T> forward(const YNetWeights<T>& w, const Mat<T>& x1, const Mat<T>& x2, std::size_t length, Rng* dropout_rng,
               ForwardCache<T>* cache = nullptr);

/// Gradient of the loss w.r.t. every parameter, flat in parameter order.
/// Throws std::logic_error if the cache belongs to other (or since modified) weights.
template <typename T>
std::vector<T> backward(const YNetWeights<T>& w, const ForwardCache<T>& cache, const Mat<T>& grad_out);

/// Mean over batch, channels and length; fills `grad` with dLoss/dpred when non-null.
template <typename T>
double mse_loss(const Mat<T>& pred, const Mat<T>& target, Mat<T>* grad = nullptr);

struct TrainConfig
{
    std::size_t epochs = 400;
    double lr = 0.01;
    double lr_decay = 0.25;
    std::size_t decay_every = 50;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double energy_floor = 1e-12;
    /// Held-out share of the dataset used for val_mse.
    double validation_fraction = 0.1;

    void validate() const;
};

/// Learning rate used during zero-based epoch `epoch`.
double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch);

template <typename T>
void adam_step(YNetWeights<T>& w, const std::vector<T>& grad, double lr, const TrainConfig& cfg);

struct NormalizedPair
{
    Spectrum x1;
    Spectrum x2;
    double energy = 0.0;
};

/// E = ||x1 - x2||_2 floored at energy_floor; both inputs divided by E.
NormalizedPair normalize_pair(const Spectrum& x1, const Spectrum& x2, double energy_floor = 1e-12);

/// x * e^{i omega}.
Spectrum augment_phase(const Spectrum& x, double omega);
/// omega uniform in [0, 2 pi), then augment.
Spectrum augment_phase(const Spectrum& x, Rng& rng);

/// Writes (re, im) of `s`, zero-padded, into columns [col0, col0 + length) of `out`.
template <typename T>
void split_channels(const CVector& s, double scale, Mat<T>& out, std::size_t col0, std::size_t length);
/// First n complex samples from columns [col0, col0 + n).
template <typename T>
CVector merge_channels(const Mat<T>& m, std::size_t col0, std::size_t n, double scale = 1.0);

struct HistoryRow
{
    std::size_t epoch = 0; ///< zero-based
    double lr = 0.0;
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct TrainResult
{
    YNetWeights<float> weights;
    std::vector<HistoryRow> history;
    /// Validation MSE of the weights before the first update.
    double initial_val_mse = 0.0;
    std::size_t n_train = 0;
    std::size_t n_val = 0;
};

using EpochCallback = std::function<void(const HistoryRow&)>;

/// Single-threaded, fully seeded (split, shuffling, phases, dropout).
/// Resuming continues the Adam state and the learning-rate schedule of `resume`.
TrainResult train(const std::vector<sim::TrainingSample>& data, const TrainConfig& cfg, const YNetConfig& ycfg,
                  const YNetWeights<float>* resume = nullptr, const EpochCallback& on_epoch = {});

/// Eval-mode MSE on the given samples without phase augmentation.
double evaluate_mse(const YNetWeights<float>& w, const std::vector<sim::TrainingSample>& data,
                    const std::vector<std::size_t>& indices, double energy_floor = 1e-12, std::size_t batch_size = 32);

void write_history_csv(const std::vector<HistoryRow>& history, std::ostream& out);
void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path);

struct Inference
{
    Spectrum m_tilde; ///< x1 - y
    Spectrum y;       ///< estimated nuisance
};

/// x1 in the frequency domain; `mode` must match the weights.
Inference infer(const YNetWeights<float>& w, const Spectrum& x1, const lipid::LipidOperator& op, sim::RemovalMode mode);
std::vector<Inference> infer_batch(const YNetWeights<float>& w, const std::vector<Spectrum>& x1,
                                   const lipid::LipidOperator& op, sim::RemovalMode mode, std::size_t threads = 1,
                                   std::size_t batch_size = 4);

inline constexpr std::uint32_t kWeightsVersion = 1;

void save_weights(const YNetWeights<float>& w, std::ostream& out);
void save_weights(const YNetWeights<float>& w, const std::filesystem::path& path);
/// With `expected`, a differing architecture raises ConfigError naming the field.
YNetWeights<float> load_weights(std::istream& in, const YNetConfig* expected = nullptr);
YNetWeights<float> load_weights(const std::filesystem::path& path, const YNetConfig* expected = nullptr);

/// Throws ConfigError naming the first architecture field that differs.
void check_compatible(const YNetConfig& found, const YNetConfig& expected);

} // namespace mrsi::ynet
