#include "mrsi/ynet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mrsi/parallel.hpp"
#include "mrsi/volume_io.hpp"

namespace mrsi::ynet {

// ---------------------------------------------------------------------------
// Config and layout

void YNetConfig::validate() const
{
    auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("YNetConfig." + field + ": " + why);
    };
    if (depth < 1 || depth > 8)
        fail("depth", "must be in [1, 8]");
    if (base_channels < 1)
        fail("base_channels", "must be positive");
    if (kernel < 1 || kernel % 2 == 0)
        fail("kernel", "must be odd");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        fail("dropout_rate", "must be in [0, 1)");
    if (in_channels_per_branch != 2)
        fail("in_channels_per_branch", "only 2 (real, imaginary) is supported");
    if (out_channels != 2)
        fail("out_channels", "only 2 (real, imaginary) is supported");
    if (pool_factor != 2)
        fail("pool_factor", "only 2 is supported");
    if (padded_length == 0 || padded_length % (std::size_t{1} << depth) != 0)
        fail("padded_length", "must be a positive multiple of 2^depth");
}

std::size_t YNetConfig::padded_for(std::size_t n_points, std::size_t depth)
{
    const std::size_t m = std::size_t{1} << depth;
    return (n_points + m - 1) / m * m;
}

YNetConfig YNetConfig::for_points(std::size_t n_points, std::size_t depth, std::size_t base_channels)
{
    YNetConfig c;
    c.depth = depth;
    c.base_channels = base_channels;
    c.padded_length = padded_for(n_points, depth);
    return c;
}

std::ostream& operator<<(std::ostream& os, const YNetConfig& c)
{
    return os << "depth=" << c.depth << " base_channels=" << c.base_channels << " kernel=" << c.kernel
              << " dropout=" << c.dropout_rate << " padded_length=" << c.padded_length
              << " mode=" << sim::to_string(c.mode);
}

Layout make_layout(const YNetConfig& cfg)
{
    cfg.validate();
    Layout lay;
    auto add = [&](std::string name, std::vector<std::uint32_t> dims) {
        std::size_t size = 1;
        for (auto d : dims)
            size *= d;
        lay.specs.push_back({std::move(name), std::move(dims), lay.total, size});
        lay.total += size;
        return lay.specs.size() - 1;
    };
    auto conv = [&](const std::string& name, std::size_t in, std::size_t out, std::size_t k) {
        ConvRef c;
        c.in = in;
        c.out = out;
        c.k = k;
        c.w = add(name + ".w", {static_cast<std::uint32_t>(out), static_cast<std::uint32_t>(in),
                                static_cast<std::uint32_t>(k)});
        c.b = add(name + ".b", {static_cast<std::uint32_t>(out)});
        return c;
    };
    auto block = [&](const std::string& name, std::size_t in, std::size_t out) {
        BlockRef b;
        b.c1 = conv(name + ".conv1", in, out, cfg.kernel);
        b.a1 = add(name + ".prelu1", {static_cast<std::uint32_t>(out)});
        b.c2 = conv(name + ".conv2", out, out, cfg.kernel);
        b.a2 = add(name + ".prelu2", {static_cast<std::uint32_t>(out)});
        return b;
    };
    const std::size_t c = cfg.base_channels;
    const std::size_t d = cfg.depth;
    for (std::size_t e = 0; e < 2; ++e)
        for (std::size_t i = 0; i < d; ++i)
            lay.enc[e].push_back(block("enc" + std::to_string(e + 1) + "." + std::to_string(i),
                                       i == 0 ? cfg.in_channels_per_branch : c << (i - 1), c << i));
    lay.bottleneck = block("bottleneck", 2 * (c << (d - 1)), c << d);
    lay.dec.resize(d);
    for (std::size_t i = d; i-- > 0;)
        lay.dec[i] = block("dec." + std::to_string(i), (c << (i + 1)) + 2 * (c << i), c << i);
    lay.final_block = block("final", c, c);
    lay.head = conv("head", c, cfg.out_channels, 1);
    return lay;
}

// ---------------------------------------------------------------------------
// Weights

template <typename T>
YNetWeights<T>::YNetWeights(const YNetConfig& cfg) : cfg_(cfg), layout_(make_layout(cfg)), params_(layout_.total, T(0))
{
}

template <typename T>
YNetWeights<T> YNetWeights<T>::init(const YNetConfig& cfg, std::uint64_t seed)
{
    YNetWeights w(cfg);
    Rng rng(mix_seed(seed, 0x1417));
    auto& p = w.params_;
    auto init_conv = [&](const ConvRef& c) {
        const double bound = std::sqrt(6.0 / static_cast<double>(c.in * c.k));
        const auto& spec = w.layout_.specs[c.w];
        for (std::size_t i = 0; i < spec.size; ++i)
            p[spec.offset + i] = static_cast<T>(uniform(rng, -bound, bound));
    };
    auto init_slopes = [&](std::size_t tensor) {
        const auto& spec = w.layout_.specs[tensor];
        std::fill_n(p.begin() + static_cast<std::ptrdiff_t>(spec.offset), spec.size, T(0.25));
    };
    auto init_block = [&](const BlockRef& b) {
        init_conv(b.c1);
        init_slopes(b.a1);
        init_conv(b.c2);
        init_slopes(b.a2);
    };
    for (const auto& enc : w.layout_.enc)
        for (const auto& b : enc)
            init_block(b);
    init_block(w.layout_.bottleneck);
    for (std::size_t i = w.layout_.dec.size(); i-- > 0;)
        init_block(w.layout_.dec[i]);
    init_block(w.layout_.final_block);
    init_conv(w.layout_.head);
    return w;
}

template <typename T>
template <typename U>
YNetWeights<U> YNetWeights<T>::cast() const
{
    YNetWeights<U> out(cfg_);
    std::transform(params_.begin(), params_.end(), out.params_.begin(), [](T v) { return static_cast<U>(v); });
    out.adam_m.assign(adam_m.begin(), adam_m.end());
    out.adam_v.assign(adam_v.begin(), adam_v.end());
    out.adam_step = adam_step;
    out.epochs_trained = epochs_trained;
    return out;
}

// ---------------------------------------------------------------------------
// Layers

namespace {

template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
using Sources = std::vector<const Mat<T>*>;

/// Row (j*cin + c) of column (b*len + p) holds x(c, b*len + p + j - k/2), zero outside the sample.
/// `xs` are stacked along channels without materializing the concatenation.
template <typename T>
Mat<T> im2col(const Sources<T>& xs, std::size_t len, std::size_t k)
{
    Eigen::Index cin = 0;
    for (const auto* x : xs)
        cin += x->rows();
    const Eigen::Index n = xs.front()->cols();
    const auto half = static_cast<Eigen::Index>(k / 2);
    const auto l = static_cast<Eigen::Index>(len);
    Mat<T> cols(cin * static_cast<Eigen::Index>(k), n);
    for (Eigen::Index base = 0; base < n; base += l)
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(k); ++j) {
            const Eigen::Index shift = j - half;
            // Output positions p with 0 <= p + shift < l.
            const Eigen::Index p0 = std::max<Eigen::Index>(0, -shift);
            const Eigen::Index p1 = std::min<Eigen::Index>(l, l - shift);
            auto rows = cols.middleRows(j * cin, cin);
            rows.middleCols(base, p0).setZero();
            rows.middleCols(base + p1, l - p1).setZero();
            if (p1 <= p0)
                continue;
            Eigen::Index r0 = 0;
            for (const auto* x : xs) {
                rows.block(r0, base + p0, x->rows(), p1 - p0) = x->middleCols(base + p0 + shift, p1 - p0);
                r0 += x->rows();
            }
        }
    return cols;
}

template <typename T>
Mat<T> concat_rows(const Sources<T>& xs)
{
    if (xs.size() == 1)
        return *xs.front();
    Eigen::Index rows = 0;
    for (const auto* x : xs)
        rows += x->rows();
    Mat<T> out(rows, xs.front()->cols());
    Eigen::Index r0 = 0;
    for (const auto* x : xs) {
        out.middleRows(r0, x->rows()) = *x;
        r0 += x->rows();
    }
    return out;
}

template <typename T>
Mat<T> col2im(const Mat<T>& cols, Eigen::Index cin, std::size_t len, std::size_t k)
{
    const Eigen::Index n = cols.cols();
    const auto half = static_cast<Eigen::Index>(k / 2);
    const auto l = static_cast<Eigen::Index>(len);
    Mat<T> x = Mat<T>::Zero(cin, n);
    for (Eigen::Index base = 0; base < n; base += l)
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(k); ++j) {
            const Eigen::Index shift = j - half;
            const Eigen::Index p0 = std::max<Eigen::Index>(0, -shift);
            const Eigen::Index p1 = std::min<Eigen::Index>(l, l - shift);
            if (p1 > p0)
                x.middleCols(base + p0 + shift, p1 - p0) += cols.block(j * cin, base + p0, cin, p1 - p0);
        }
    return x;
}

template <typename T>
class Net
{
public:
    Net(const YNetWeights<T>& w, std::vector<T>* grad) : w_(w), lay_(w.layout()), grad_(grad) {}

    Mat<T> conv(const ConvRef& c, const Sources<T>& xs, std::size_t len) const
    {
        const auto weight = w_.conv_weight(c);
        Mat<T> y(weight.rows(), xs.front()->cols());
        if (c.k == 1 && xs.size() == 1)
            y.noalias() = weight * *xs.front();
        else
            y.noalias() = weight * im2col(xs, len, c.k);
        y.colwise() += w_.vec(c.b);
        return y;
    }
    Mat<T> conv(const ConvRef& c, const Mat<T>& x, std::size_t len) const { return conv(c, Sources<T>{&x}, len); }

    Mat<T> conv_back(const ConvRef& c, const Mat<T>& x, const Mat<T>& dy, std::size_t len)
    {
        const auto weight = w_.conv_weight(c);
        auto gw = grad_map(c.w, weight.rows(), weight.cols());
        // Reduce into an aligned temporary: Eigen's summation order for a
        // partial redux depends on the destination's alignment.
        const Vec<T> db = dy.rowwise().sum();
        grad_vec(c.b) += db;
        if (c.k == 1) {
            gw.noalias() += dy * x.transpose();
            return weight.transpose() * dy;
        }
        const Mat<T> cols = im2col(Sources<T>{&x}, len, c.k);
        gw.noalias() += dy * cols.transpose();
        const Mat<T> dcols = weight.transpose() * dy;
        return col2im(dcols, x.rows(), len, c.k);
    }

    Mat<T> prelu(std::size_t tensor, const Mat<T>& z) const
    {
        const auto a = w_.vec(tensor);
        Mat<T> y = z.cwiseMin(T(0));
        y = a.asDiagonal() * y;
        y += z.cwiseMax(T(0));
        return y;
    }

    Mat<T> prelu_back(std::size_t tensor, const Mat<T>& z, const Mat<T>& dy)
    {
        const auto a = w_.vec(tensor);
        // Slope applies where z <= 0.
        const Mat<T> neg = (z.array() > T(0)).select(Mat<T>::Zero(z.rows(), z.cols()), dy);
        const Vec<T> da = neg.cwiseProduct(z).rowwise().sum();
        grad_vec(tensor) += da;
        Mat<T> dz = (z.array() > T(0)).select(dy, Mat<T>::Zero(z.rows(), z.cols()));
        dz += a.asDiagonal() * neg;
        return dz;
    }

    /// Inverted dropout; returns an empty mask in eval mode.
    Mat<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, Rng* rng) const
    {
        const double p = w_.config().dropout_rate;
        if (rng == nullptr || p <= 0.0)
            return {};
        Mat<T> m(rows, cols);
        const T keep = static_cast<T>(1.0 / (1.0 - p));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (Eigen::Index i = 0; i < m.size(); ++i)
            m.data()[i] = u(*rng) < p ? T(0) : keep;
        return m;
    }

    Mat<T> block(const BlockRef& b, const Sources<T>& xs, std::size_t len, Rng* rng, BlockCache<T>* cache) const
    {
        Mat<T> z1 = conv(b.c1, xs, len);
        Mat<T> d1 = prelu(b.a1, z1);
        Mat<T> m1 = dropout_mask(d1.rows(), d1.cols(), rng);
        if (m1.size() > 0)
            d1.array() *= m1.array();
        Mat<T> z2 = conv(b.c2, d1, len);
        Mat<T> out = prelu(b.a2, z2);
        Mat<T> m2 = dropout_mask(out.rows(), out.cols(), rng);
        if (m2.size() > 0)
            out.array() *= m2.array();
        if (cache != nullptr) {
            cache->x = concat_rows(xs);
            cache->z1 = std::move(z1);
            cache->m1 = std::move(m1);
            cache->d1 = std::move(d1);
            cache->z2 = std::move(z2);
            cache->m2 = std::move(m2);
            cache->out = out;
        }
        return out;
    }

    Mat<T> block_back(const BlockRef& b, const BlockCache<T>& c, Mat<T> dout, std::size_t len)
    {
        if (c.m2.size() > 0)
            dout.array() *= c.m2.array();
        Mat<T> dz2 = prelu_back(b.a2, c.z2, dout);
        Mat<T> dd1 = conv_back(b.c2, c.d1, dz2, len);
        if (c.m1.size() > 0)
            dd1.array() *= c.m1.array();
        Mat<T> dz1 = prelu_back(b.a1, c.z1, dd1);
        return conv_back(b.c1, c.x, dz1, len);
    }

    const Layout& layout() const { return lay_; }

private:
    Eigen::Map<Mat<T>> grad_map(std::size_t tensor, Eigen::Index rows, Eigen::Index cols)
    {
        return {grad_->data() + lay_.specs[tensor].offset, rows, cols};
    }
    Eigen::Map<Vec<T>> grad_vec(std::size_t tensor)
    {
        return {grad_->data() + lay_.specs[tensor].offset, static_cast<Eigen::Index>(lay_.specs[tensor].size)};
    }

    const YNetWeights<T>& w_;
    const Layout& lay_;
    std::vector<T>* grad_;
};

// Pool pairs (2q, 2q+1) never straddle samples because every level length is even.
template <typename T>
using Strided = Eigen::Map<Mat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStrided = Eigen::Map<const Mat<T>, 0, Eigen::OuterStride<>>;

template <typename T>
ConstStrided<T> column_phase(const Mat<T>& x, Eigen::Index phase)
{
    return {x.data() + phase * x.rows(), x.rows(), x.cols() / 2, Eigen::OuterStride<>(2 * x.rows())};
}

template <typename T>
Strided<T> column_phase(Mat<T>& x, Eigen::Index phase)
{
    return {x.data() + phase * x.rows(), x.rows(), x.cols() / 2, Eigen::OuterStride<>(2 * x.rows())};
}

template <typename T>
Mat<T> maxpool(const Mat<T>& x, std::vector<std::uint8_t>* arg)
{
    const auto even = column_phase(x, 0);
    const auto odd = column_phase(x, 1);
    Mat<T> y = even.cwiseMax(odd);
    if (arg != nullptr) {
        arg->resize(static_cast<std::size_t>(y.size()));
        Eigen::Map<Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>>(arg->data(), y.rows(), y.cols()) =
            (odd.array() > even.array()).template cast<std::uint8_t>();
    }
    return y;
}

template <typename T>
Mat<T> maxpool_back(const Mat<T>& dy, const std::vector<std::uint8_t>& arg)
{
    Mat<T> dx(dy.rows(), dy.cols() * 2);
    const Eigen::Map<const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>> second(arg.data(), dy.rows(),
                                                                                                dy.cols());
    const auto take = second.array() != 0;
    column_phase(dx, 0) = take.select(T(0), dy);
    column_phase(dx, 1) = take.select(dy, T(0));
    return dx;
}

template <typename T>
Mat<T> upsample(const Mat<T>& x)
{
    Mat<T> y(x.rows(), x.cols() * 2);
    column_phase(y, 0) = x;
    column_phase(y, 1) = x;
    return y;
}

template <typename T>
Mat<T> upsample_back(const Mat<T>& dy)
{
    return column_phase(dy, 0) + column_phase(dy, 1);
}

} // namespace

template <typename T>
Mat<T> forward(const YNetWeights<T>& w, const Mat<T>& x1, const Mat<T>& x2, std::size_t length, Rng* dropout_rng,
               ForwardCache<T>* cache)
{
    const YNetConfig& cfg = w.config();
    const std::size_t d = cfg.depth;
    if (length == 0 || length % (std::size_t{1} << d) != 0)
        throw AxisMismatchError("ynet::forward: length " + std::to_string(length) + " is not a multiple of 2^" +
                                std::to_string(d));
    if (x1.rows() != 2 || x2.rows() != 2 || x1.cols() != x2.cols() || x1.cols() == 0 ||
        x1.cols() % static_cast<Eigen::Index>(length) != 0)
        throw AxisMismatchError("ynet::forward: inputs must both be 2 x (batch*length)");

    Net<T> net(w, nullptr);
    const Layout& lay = w.layout();
    if (cache != nullptr) {
        cache->owner = &w;
        cache->version = w.version();
        cache->length = length;
        cache->batch = static_cast<std::size_t>(x1.cols()) / length;
        for (std::size_t e = 0; e < 2; ++e) {
            cache->enc[e].assign(d, {});
            cache->pool_arg[e].assign(d, {});
        }
        cache->dec.assign(d, {});
    }

    std::array<std::vector<Mat<T>>, 2> skips;
    std::array<Mat<T>, 2> deepest;
    for (std::size_t e = 0; e < 2; ++e) {
        Mat<T> h = e == 0 ? x1 : x2;
        std::size_t len = length;
        for (std::size_t i = 0; i < d; ++i) {
            Mat<T> out = net.block(lay.enc[e][i], {&h}, len, dropout_rng, cache ? &cache->enc[e][i] : nullptr);
            h = maxpool(out, cache ? &cache->pool_arg[e][i] : nullptr);
            skips[e].push_back(std::move(out));
            len /= 2;
        }
        deepest[e] = std::move(h);
    }

    std::size_t len = length >> d;
    Mat<T> h = net.block(lay.bottleneck, {&deepest[0], &deepest[1]}, len, dropout_rng, cache ? &cache->bottleneck : nullptr);
    for (std::size_t i = d; i-- > 0;) {
        Mat<T> up = upsample(h);
        len *= 2;
        h = net.block(lay.dec[i], {&up, &skips[0][i], &skips[1][i]}, len, dropout_rng, cache ? &cache->dec[i] : nullptr);
    }
    h = net.block(lay.final_block, {&h}, len, dropout_rng, cache ? &cache->final_block : nullptr);
    return net.conv(lay.head, h, len);
}

template <typename T>
std::vector<T> backward(const YNetWeights<T>& w, const ForwardCache<T>& cache, const Mat<T>& grad_out)
{
    if (cache.owner != &w || cache.version != w.version())
        throw std::logic_error("ynet::backward: stale forward cache");
    const std::size_t d = w.config().depth;
    const std::size_t length = cache.length;
    if (grad_out.rows() != 2 || grad_out.cols() != static_cast<Eigen::Index>(cache.batch * length))
        throw AxisMismatchError("ynet::backward: grad_out shape does not match the cached forward pass");

    std::vector<T> grad(w.size(), T(0));
    Net<T> net(w, &grad);
    const Layout& lay = w.layout();

    Mat<T> dh = net.conv_back(lay.head, cache.final_block.out, grad_out, length);
    dh = net.block_back(lay.final_block, cache.final_block, std::move(dh), length);

    std::array<std::vector<Mat<T>>, 2> dskip;
    for (auto& v : dskip)
        v.resize(d);
    std::size_t len = length;
    for (std::size_t i = 0; i < d; ++i) {
        Mat<T> dcat = net.block_back(lay.dec[i], cache.dec[i], std::move(dh), len);
        const Eigen::Index c_up = static_cast<Eigen::Index>(lay.dec[i].c1.in - 2 * lay.enc[0][i].c2.out);
        const Eigen::Index c_skip = static_cast<Eigen::Index>(lay.enc[0][i].c2.out);
        dskip[0][i] = dcat.middleRows(c_up, c_skip);
        dskip[1][i] = dcat.middleRows(c_up + c_skip, c_skip);
        dh = upsample_back<T>(Mat<T>(dcat.topRows(c_up)));
        len /= 2;
    }
    Mat<T> dcat = net.block_back(lay.bottleneck, cache.bottleneck, std::move(dh), len);
    const Eigen::Index c_deep = dcat.rows() / 2;
    for (std::size_t e = 0; e < 2; ++e) {
        Mat<T> dpooled = dcat.middleRows(static_cast<Eigen::Index>(e) * c_deep, c_deep);
        std::size_t l = length >> (d - 1);
        for (std::size_t i = d; i-- > 0;) {
            Mat<T> dout = maxpool_back(dpooled, cache.pool_arg[e][i]);
            dout += dskip[e][i];
            dpooled = net.block_back(lay.enc[e][i], cache.enc[e][i], std::move(dout), l);
            l *= 2;
        }
    }
    return grad;
}

template <typename T>
double mse_loss(const Mat<T>& pred, const Mat<T>& target, Mat<T>* grad)
{
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw AxisMismatchError("mse_loss: shape mismatch");
    const double n = static_cast<double>(pred.size());
    const Mat<T> diff = pred - target;
    if (grad != nullptr)
        *grad = diff * static_cast<T>(2.0 / n);
    return static_cast<double>(diff.template cast<double>().squaredNorm()) / n;
}

// ---------------------------------------------------------------------------
// Optimizer

void TrainConfig::validate() const
{
    if (epochs == 0)
        throw ConfigError("TrainConfig.epochs must be positive");
    if (!(lr > 0.0))
        throw ConfigError("TrainConfig.lr must be positive");
    if (!(lr_decay > 0.0) || decay_every == 0)
        throw ConfigError("TrainConfig.lr_decay/decay_every must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw ConfigError("TrainConfig: Adam betas must lie in [0, 1)");
    if (batch_size == 0)
        throw ConfigError("TrainConfig.batch_size must be positive");
    if (!(energy_floor > 0.0))
        throw ConfigError("TrainConfig.energy_floor must be positive");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw ConfigError("TrainConfig.validation_fraction must lie in [0, 1)");
}

double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch)
{
    return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch / cfg.decay_every));
}

template <typename T>
void adam_step(YNetWeights<T>& w, const std::vector<T>& grad, double lr, const TrainConfig& cfg)
{
    if (grad.size() != w.size())
        throw std::logic_error("adam_step: gradient size mismatch");
    if (w.adam_m.size() != w.size()) {
        w.adam_m.assign(w.size(), T(0));
        w.adam_v.assign(w.size(), T(0));
        w.adam_step = 0;
    }
    ++w.adam_step;
    const double b1 = cfg.adam_beta1;
    const double b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(w.adam_step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(w.adam_step));
    const T step = static_cast<T>(lr / c1);
    const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
    const T eps = static_cast<T>(cfg.adam_eps);
    const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);
    auto& p = w.mutable_params();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const T g = grad[i];
        w.adam_m[i] = tb1 * w.adam_m[i] + (T(1) - tb1) * g;
        w.adam_v[i] = tb2 * w.adam_v[i] + (T(1) - tb2) * g * g;
        p[i] -= step * w.adam_m[i] / (std::sqrt(w.adam_v[i]) * inv_sqrt_c2 + eps);
    }
}

// ---------------------------------------------------------------------------
// Data plumbing

NormalizedPair normalize_pair(const Spectrum& x1, const Spectrum& x2, double energy_floor)
{
    require_same_axis(x1.axis, x2.axis, "normalize_pair");
    const double e = std::max((x1.samples - x2.samples).norm(), energy_floor);
    return {Spectrum(x1.axis, x1.domain, x1.samples / e), Spectrum(x2.axis, x2.domain, x2.samples / e), e};
}

Spectrum augment_phase(const Spectrum& x, double omega)
{
    if (omega == 0.0)
        return x;
    return Spectrum(x.axis, x.domain, x.samples * std::polar(1.0, omega));
}

Spectrum augment_phase(const Spectrum& x, Rng& rng)
{
    return augment_phase(x, uniform(rng, 0.0, 2.0 * std::numbers::pi));
}

template <typename T>
void split_channels(const CVector& s, double scale, Mat<T>& out, std::size_t col0, std::size_t length)
{
    if (static_cast<std::size_t>(s.size()) > length)
        throw AxisMismatchError("split_channels: spectrum longer than padded length");
    const auto c0 = static_cast<Eigen::Index>(col0);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(length); ++k) {
        const cplx v = k < s.size() ? s[k] * scale : cplx(0.0, 0.0);
        out(0, c0 + k) = static_cast<T>(v.real());
        out(1, c0 + k) = static_cast<T>(v.imag());
    }
}

template <typename T>
CVector merge_channels(const Mat<T>& m, std::size_t col0, std::size_t n, double scale)
{
    CVector s(static_cast<Eigen::Index>(n));
    const auto c0 = static_cast<Eigen::Index>(col0);
    for (Eigen::Index k = 0; k < s.size(); ++k)
        s[k] = cplx(static_cast<double>(m(0, c0 + k)), static_cast<double>(m(1, c0 + k))) * scale;
    return s;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Prepared
{
    const CVector* x1;
    const CVector* x2;
    const CVector* y;
    double inv_energy;
};

std::vector<Prepared> prepare(const std::vector<sim::TrainingSample>& data, double floor, std::size_t padded)
{
    std::vector<Prepared> out;
    out.reserve(data.size());
    for (const auto& s : data) {
        if (s.x1.domain != Domain::Frequency || s.x2.domain != Domain::Frequency ||
            s.target_y.domain != Domain::Frequency)
            throw DataError("train: samples must be frequency-domain spectra");
        if (s.x1.size() > padded || s.x2.size() != s.x1.size() || s.target_y.size() != s.x1.size())
            throw AxisMismatchError("train: sample length inconsistent with padded_length");
        const double e = std::max((s.x1.samples - s.x2.samples).norm(), floor);
        out.push_back({&s.x1.samples, &s.x2.samples, &s.target_y.samples, 1.0 / e});
    }
    return out;
}

struct Batch
{
    Mat<float> x1, x2, y;
};

Batch make_batch(const std::vector<Prepared>& prep, const std::vector<std::size_t>& idx, std::size_t begin,
                 std::size_t end, std::size_t len, Rng* phase_rng)
{
    const auto cols = static_cast<Eigen::Index>((end - begin) * len);
    Batch b{Mat<float>(2, cols), Mat<float>(2, cols), Mat<float>(2, cols)};
    for (std::size_t j = begin; j < end; ++j) {
        const Prepared& p = prep[idx[j]];
        const std::size_t col0 = (j - begin) * len;
        if (phase_rng != nullptr) {
            const cplx rot = std::polar(1.0, uniform(*phase_rng, 0.0, 2.0 * std::numbers::pi));
            split_channels<float>(*p.x1 * rot, p.inv_energy, b.x1, col0, len);
            split_channels<float>(*p.x2 * rot, p.inv_energy, b.x2, col0, len);
            split_channels<float>(*p.y * rot, p.inv_energy, b.y, col0, len);
        } else {
            split_channels<float>(*p.x1, p.inv_energy, b.x1, col0, len);
            split_channels<float>(*p.x2, p.inv_energy, b.x2, col0, len);
            split_channels<float>(*p.y, p.inv_energy, b.y, col0, len);
        }
    }
    return b;
}

double eval_prepared(const YNetWeights<float>& w, const std::vector<Prepared>& prep,
                     const std::vector<std::size_t>& idx, std::size_t batch_size)
{
    if (idx.empty())
        return 0.0;
    const std::size_t len = w.config().padded_length;
    double sum = 0.0;
    for (std::size_t begin = 0; begin < idx.size(); begin += batch_size) {
        const std::size_t end = std::min(idx.size(), begin + batch_size);
        const Batch b = make_batch(prep, idx, begin, end, len, nullptr);
        const Mat<float> pred = forward(w, b.x1, b.x2, len, nullptr);
        sum += mse_loss(pred, b.y) * static_cast<double>(end - begin);
    }
    return sum / static_cast<double>(idx.size());
}

} // namespace

double evaluate_mse(const YNetWeights<float>& w, const std::vector<sim::TrainingSample>& data,
                    const std::vector<std::size_t>& indices, double energy_floor, std::size_t batch_size)
{
    const auto prep = prepare(data, energy_floor, w.config().padded_length);
    for (auto i : indices)
        if (i >= data.size())
            throw ConfigError("evaluate_mse: sample index out of range");
    return eval_prepared(w, prep, indices, std::max<std::size_t>(1, batch_size));
}

TrainResult train(const std::vector<sim::TrainingSample>& data, const TrainConfig& cfg, const YNetConfig& ycfg,
                  const YNetWeights<float>* resume, const EpochCallback& on_epoch)
{
    cfg.validate();
    ycfg.validate();
    if (data.empty())
        throw DataError("train: dataset is empty");
    if (resume != nullptr)
        check_compatible(resume->config(), ycfg);
    const std::size_t len = ycfg.padded_length;
    const auto prep = prepare(data, cfg.energy_floor, len);

    // Fixed split: permutation from the seed, validation taken from the front.
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng split_rng(mix_seed(cfg.seed, 0x5B117));
    std::shuffle(order.begin(), order.end(), split_rng);
    std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(data.size())));
    if (cfg.validation_fraction > 0.0)
        n_val = std::clamp<std::size_t>(n_val, 1, data.size() > 1 ? data.size() - 1 : 1);
    std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> tr(order.begin() + static_cast<std::ptrdiff_t>(std::min(n_val, data.size() - 1)),
                                order.end());
    if (data.size() == 1)
        tr = order;

    TrainResult res{resume != nullptr ? *resume : YNetWeights<float>::init(ycfg, cfg.seed), {}, 0.0, tr.size(),
                    val.size()};
    YNetWeights<float>& w = res.weights;
    const std::vector<std::size_t>& val_or_train = val.empty() ? tr : val;
    res.initial_val_mse = eval_prepared(w, prep, val_or_train, cfg.batch_size);

    const std::size_t first = static_cast<std::size_t>(w.epochs_trained);
    for (std::size_t epoch = first; epoch < first + cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        Rng shuffle_rng(mix_seed(cfg.seed, 3 * epoch + 0x100));
        Rng phase_rng(mix_seed(cfg.seed, 3 * epoch + 0x101));
        Rng dropout_rng(mix_seed(cfg.seed, 3 * epoch + 0x102));
        std::shuffle(tr.begin(), tr.end(), shuffle_rng);
        double sum = 0.0;
        for (std::size_t begin = 0; begin < tr.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(tr.size(), begin + cfg.batch_size);
            const Batch b = make_batch(prep, tr, begin, end, len, &phase_rng);
            ForwardCache<float> cache;
            const Mat<float> pred = forward(w, b.x1, b.x2, len, &dropout_rng, &cache);
            Mat<float> g;
            const double loss = mse_loss(pred, b.y, &g);
            if (!std::isfinite(loss)) {
                std::ostringstream os;
                os << "train: non-finite loss at epoch " << epoch << ", batch starting at " << begin << " (lr " << lr
                   << ", last finite epoch train_mse "
                   << (res.history.empty() ? std::nan("") : res.history.back().train_mse) << ")";
                throw NumericError(os.str());
            }
            sum += loss * static_cast<double>(end - begin);
            adam_step(w, backward(w, cache, g), lr, cfg);
        }
        ++w.epochs_trained;
        HistoryRow row{epoch, lr, sum / static_cast<double>(tr.size()), eval_prepared(w, prep, val_or_train, cfg.batch_size)};
        if (!std::isfinite(row.val_mse))
            throw NumericError("train: non-finite validation loss at epoch " + std::to_string(epoch));
        res.history.push_back(row);
        if (on_epoch)
            on_epoch(row);
    }
    return res;
}

void write_history_csv(const std::vector<HistoryRow>& history, std::ostream& out)
{
    out << "epoch,lr,train_mse,val_mse\n";
    out.precision(9);
    for (const auto& r : history)
        out << r.epoch << ',' << r.lr << ',' << r.train_mse << ',' << r.val_mse << '\n';
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw FormatError(FormatError::Kind::Io, "cannot write " + path.string());
    write_history_csv(history, out);
}

// ---------------------------------------------------------------------------
// Inference

std::vector<Inference> infer_batch(const YNetWeights<float>& w, const std::vector<Spectrum>& x1,
                                   const lipid::LipidOperator& op, sim::RemovalMode mode, std::size_t threads,
                                   std::size_t batch_size)
{
    const YNetConfig& cfg = w.config();
    if (cfg.mode != mode)
        throw ConfigError("infer: weights were trained for " + sim::to_string(cfg.mode) + ", requested " +
                          sim::to_string(mode));
    for (const auto& s : x1) {
        require_same_axis(op.axis(), s.axis, "ynet::infer");
        if (s.domain != Domain::Frequency)
            throw DataError("ynet::infer: expected frequency-domain spectra");
    }
    const std::size_t n = op.axis().n_points();
    const std::size_t len = cfg.padded_length;
    if (YNetConfig::padded_for(n, cfg.depth) != len)
        throw AxisMismatchError("ynet::infer: " + std::to_string(n) + " points do not pad to the network length " +
                                std::to_string(len));
    batch_size = std::max<std::size_t>(1, batch_size);
    const std::size_t n_batches = (x1.size() + batch_size - 1) / batch_size;
    std::vector<Inference> out;
    out.reserve(x1.size());
    const Spectrum empty(op.axis(), Domain::Frequency);
    for (std::size_t i = 0; i < x1.size(); ++i)
        out.push_back({empty, empty});

    parallel_for(n_batches, threads, [&](std::size_t bi) {
        const std::size_t begin = bi * batch_size;
        const std::size_t end = std::min(x1.size(), begin + batch_size);
        const auto cols = static_cast<Eigen::Index>((end - begin) * len);
        Mat<float> a(2, cols), b(2, cols);
        std::vector<double> energy(end - begin);
        for (std::size_t j = begin; j < end; ++j) {
            const Spectrum x2 = lipid::project_lipid(op, x1[j]);
            const double e = std::max((x1[j].samples - x2.samples).norm(), 1e-12);
            energy[j - begin] = e;
            split_channels<float>(x1[j].samples, 1.0 / e, a, (j - begin) * len, len);
            split_channels<float>(x2.samples, 1.0 / e, b, (j - begin) * len, len);
        }
        const Mat<float> pred = forward(w, a, b, len, nullptr);
        for (std::size_t j = begin; j < end; ++j) {
            Spectrum y(op.axis(), Domain::Frequency, merge_channels(pred, (j - begin) * len, n, energy[j - begin]));
            Spectrum m(op.axis(), Domain::Frequency, x1[j].samples - y.samples);
            out[j] = {std::move(m), std::move(y)};
        }
    });
    return out;
}

Inference infer(const YNetWeights<float>& w, const Spectrum& x1, const lipid::LipidOperator& op, sim::RemovalMode mode)
{
    return infer_batch(w, {x1}, op, mode, 1, 1).front();
}

// ---------------------------------------------------------------------------
// Persistence

void check_compatible(const YNetConfig& found, const YNetConfig& expected)
{
    auto differ = [](const char* field, auto a, auto b) {
        std::ostringstream os;
        os << "weights config mismatch in field '" << field << "': file has " << a << ", expected " << b;
        throw ConfigError(os.str());
    };
    if (found.depth != expected.depth)
        differ("depth", found.depth, expected.depth);
    if (found.base_channels != expected.base_channels)
        differ("base_channels", found.base_channels, expected.base_channels);
    if (found.kernel != expected.kernel)
        differ("kernel", found.kernel, expected.kernel);
    if (found.dropout_rate != expected.dropout_rate)
        differ("dropout_rate", found.dropout_rate, expected.dropout_rate);
    if (found.in_channels_per_branch != expected.in_channels_per_branch)
        differ("in_channels_per_branch", found.in_channels_per_branch, expected.in_channels_per_branch);
    if (found.out_channels != expected.out_channels)
        differ("out_channels", found.out_channels, expected.out_channels);
    if (found.pool_factor != expected.pool_factor)
        differ("pool_factor", found.pool_factor, expected.pool_factor);
    if (found.padded_length != expected.padded_length)
        differ("padded_length", found.padded_length, expected.padded_length);
    if (found.mode != expected.mode)
        differ("mode", sim::to_string(found.mode), sim::to_string(expected.mode));
}

void save_weights(const YNetWeights<float>& w, std::ostream& out)
{
    const YNetConfig& c = w.config();
    out.write("YNW1", 4);
    io::put_u32(out, kWeightsVersion);
    io::put_u32(out, static_cast<std::uint32_t>(c.depth));
    io::put_u32(out, static_cast<std::uint32_t>(c.base_channels));
    io::put_u32(out, static_cast<std::uint32_t>(c.kernel));
    io::put_f64(out, c.dropout_rate);
    io::put_u32(out, static_cast<std::uint32_t>(c.in_channels_per_branch));
    io::put_u32(out, static_cast<std::uint32_t>(c.out_channels));
    io::put_u32(out, static_cast<std::uint32_t>(c.pool_factor));
    io::put_u32(out, static_cast<std::uint32_t>(c.padded_length));
    io::put_u8(out, c.mode == sim::RemovalMode::Walinet ? 0 : 1);

    const auto& specs = w.layout().specs;
    io::put_u32(out, static_cast<std::uint32_t>(specs.size()));
    for (const auto& s : specs) {
        io::put_u32(out, static_cast<std::uint32_t>(s.dims.size()));
        for (auto d : s.dims)
            io::put_u32(out, d);
        for (std::size_t i = 0; i < s.size; ++i)
            io::put_f32(out, w.params()[s.offset + i]);
    }
    const bool has_adam = w.adam_m.size() == w.size();
    io::put_u8(out, has_adam ? 1 : 0);
    io::put_u64(out, w.epochs_trained);
    if (has_adam) {
        io::put_u64(out, w.adam_step);
        for (float v : w.adam_m)
            io::put_f32(out, v);
        for (float v : w.adam_v)
            io::put_f32(out, v);
    }
    if (!out)
        throw FormatError(FormatError::Kind::Io, "save_weights: write failed");
}

void save_weights(const YNetWeights<float>& w, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw FormatError(FormatError::Kind::Io, "cannot open " + path.string() + " for writing");
    save_weights(w, out);
}

YNetWeights<float> load_weights(std::istream& in, const YNetConfig* expected)
{
    io::check_magic(in, "YNW1");
    const std::uint32_t version = io::get_u32(in);
    if (version != kWeightsVersion)
        throw FormatError(FormatError::Kind::VersionMismatch,
                          "weights version " + std::to_string(version) + ", expected " + std::to_string(kWeightsVersion));
    YNetConfig c;
    c.depth = io::get_u32(in);
    c.base_channels = io::get_u32(in);
    c.kernel = io::get_u32(in);
    c.dropout_rate = io::get_f64(in);
    c.in_channels_per_branch = io::get_u32(in);
    c.out_channels = io::get_u32(in);
    c.pool_factor = io::get_u32(in);
    c.padded_length = io::get_u32(in);
    const std::uint8_t mode = io::get_u8(in);
    if (mode > 1)
        throw FormatError(FormatError::Kind::ShapeMismatch, "weights file: unknown mode byte");
    c.mode = mode == 0 ? sim::RemovalMode::Walinet : sim::RemovalMode::Lipnet;
    if (c.depth > 8 || c.base_channels > 4096 || c.kernel > 1024)
        throw FormatError(FormatError::Kind::DimensionOverflow, "weights file: implausible architecture");
    if (expected != nullptr)
        check_compatible(c, *expected);
    c.validate();

    YNetWeights<float> w(c);
    const auto& specs = w.layout().specs;
    const std::uint32_t n_tensors = io::get_u32(in);
    if (n_tensors != specs.size())
        throw FormatError(FormatError::Kind::ShapeMismatch, "weights file has " + std::to_string(n_tensors) +
                                                                " tensors, architecture needs " +
                                                                std::to_string(specs.size()));
    std::vector<float>& p = w.mutable_params();
    for (const auto& s : specs) {
        const std::uint32_t rank = io::get_u32(in);
        if (rank != s.dims.size())
            throw FormatError(FormatError::Kind::ShapeMismatch, "tensor " + s.name + ": rank mismatch");
        for (auto d : s.dims)
            if (io::get_u32(in) != d)
                throw FormatError(FormatError::Kind::ShapeMismatch, "tensor " + s.name + ": shape mismatch");
        for (std::size_t i = 0; i < s.size; ++i)
            p[s.offset + i] = io::get_f32(in);
    }
    const bool has_adam = io::get_u8(in) != 0;
    w.epochs_trained = io::get_u64(in);
    if (has_adam) {
        w.adam_step = io::get_u64(in);
        w.adam_m.resize(w.size());
        w.adam_v.resize(w.size());
        for (auto& v : w.adam_m)
            v = io::get_f32(in);
        for (auto& v : w.adam_v)
            v = io::get_f32(in);
    }
    return w;
}

YNetWeights<float> load_weights(const std::filesystem::path& path, const YNetConfig* expected)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError(FormatError::Kind::Io, "cannot open " + path.string());
    return load_weights(in, expected);
}

// ---------------------------------------------------------------------------
// Instantiations

template class YNetWeights<float>;
template class YNetWeights<double>;
template YNetWeights<double> YNetWeights<float>::cast<double>() const;
template YNetWeights<float> YNetWeights<double>::cast<float>() const;
template YNetWeights<float> YNetWeights<float>::cast<float>() const;
template YNetWeights<double> YNetWeights<double>::cast<double>() const;

#define MRSI_YNET_INSTANTIATE(T)                                                                                     \
    template Mat<T> forward<T>(const YNetWeights<T>&, const Mat<T>&, const Mat<T>&, std::size_t, Rng*,            \
                               ForwardCache<T>*);                                                                    \
    template std::vector<T> backward<T>(const YNetWeights<T>&, const ForwardCache<T>&, const Mat<T>&);            \
    template double mse_loss<T>(const Mat<T>&, const Mat<T>&, Mat<T>*);                                            \
    template void adam_step<T>(YNetWeights<T>&, const std::vector<T>&, double, const TrainConfig&);                \
    template void split_channels<T>(const CVector&, double, Mat<T>&, std::size_t, std::size_t);                    \
    template CVector merge_channels<T>(const Mat<T>&, std::size_t, std::size_t, double);

MRSI_YNET_INSTANTIATE(float)
MRSI_YNET_INSTANTIATE(double)

#undef MRSI_YNET_INSTANTIATE

} // namespace mrsi::ynet
