#include "mineseg/nn.hpp"

#include <cmath>
#include <numbers>

#include "mineseg/errors.hpp"
#include "mineseg/rng.hpp"

namespace mineseg::nn {

// ---------------------------------------------------------------------------
// ModelParams / Gradients

std::size_t ModelParams::declare(std::string name, std::vector<std::size_t> shape, InitKind init) {
    if (find(name)) {
        throw ArgumentError("duplicate parameter name '" + name + "'");
    }
    std::size_t n = 1;
    for (auto d : shape) {
        n *= d;
    }
    tensors_.push_back(ParamTensor{std::move(name), std::move(shape), init, std::vector<double>(n, 0.0)});
    return tensors_.size() - 1;
}

std::size_t ModelParams::total_count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tensors_) {
        n += t.numel();
    }
    return n;
}

std::optional<std::size_t> ModelParams::find(const std::string& name) const {
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        if (tensors_[i].name == name) {
            return i;
        }
    }
    return std::nullopt;
}

void ModelParams::initialize(std::uint64_t seed) {
    seed_ = seed;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        auto& t = tensors_[i];
        switch (t.init) {
            case InitKind::zeros:
                std::fill(t.values.begin(), t.values.end(), 0.0);
                break;
            case InitKind::ones:
                std::fill(t.values.begin(), t.values.end(), 1.0);
                break;
            case InitKind::trunc_normal: {
                Rng rng(seed, {0x1417ull, i});
                for (auto& v : t.values) {
                    v = static_cast<double>(static_cast<float>(rng.truncated_normal(kInitSigma, kInitTruncation)));
                }
                break;
            }
        }
    }
}

bool ModelParams::same_layout(const ModelParams& other) const {
    if (tensors_.size() != other.tensors_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        if (tensors_[i].name != other.tensors_[i].name || tensors_[i].shape != other.tensors_[i].shape) {
            return false;
        }
    }
    return true;
}

Gradients::Gradients(const ModelParams& params) {
    g.reserve(params.size());
    for (const auto& t : params.tensors()) {
        g.emplace_back(t.numel(), 0.0);
    }
}

void Gradients::zero() {
    for (auto& v : g) {
        std::fill(v.begin(), v.end(), 0.0);
    }
}

void Gradients::add(const Gradients& other) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < g[i].size(); ++j) {
            g[i][j] += other.g[i][j];
        }
    }
}

void Gradients::scale(double s) {
    for (auto& v : g) {
        for (auto& x : v) {
            x *= s;
        }
    }
}

double Gradients::squared_norm() const {
    double s = 0.0;
    for (const auto& v : g) {
        for (double x : v) {
            s += x * x;
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Helpers

Mat gelu(const Mat& x) {
    return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); });
}

Mat gelu_backward(const Mat& x, const Mat& dy) {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    return x.binaryExpr(dy, [](double v, double d) {
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        return d * (cdf + v * pdf);
    });
}

void softmax_rows(Mat& s) {
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
        auto row = s.row(r);
        const double m = row.maxCoeff();
        row = (row.array() - m).exp();
        row /= row.sum();
    }
}

namespace {

struct AxisTap {
    std::size_t i0;
    std::size_t i1;
    double w0;
    double w1;
};

std::vector<AxisTap> bilinear_taps(std::size_t in, std::size_t out) {
    std::vector<AxisTap> taps(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
        if (src < 0.0) {
            src = 0.0;
        }
        auto i0 = static_cast<std::size_t>(src);
        if (i0 > in - 1) {
            i0 = in - 1;
        }
        const std::size_t i1 = i0 + (i0 < in - 1 ? 1 : 0);
        const double l1 = src - static_cast<double>(i0);
        taps[o] = AxisTap{i0, i1, 1.0 - l1, l1};
    }
    return taps;
}

}  // namespace

Mat resize_bilinear(const Mat& tokens, std::size_t h, std::size_t w, std::size_t out_h, std::size_t out_w) {
    if (h == out_h && w == out_w) {
        return tokens;
    }
    const auto ty = bilinear_taps(h, out_h);
    const auto tx = bilinear_taps(w, out_w);
    Mat out(static_cast<Eigen::Index>(out_h * out_w), tokens.cols());
    for (std::size_t y = 0; y < out_h; ++y) {
        const auto& a = ty[y];
        for (std::size_t x = 0; x < out_w; ++x) {
            const auto& b = tx[x];
            out.row(static_cast<Eigen::Index>(y * out_w + x)) =
                a.w0 * (b.w0 * tokens.row(static_cast<Eigen::Index>(a.i0 * w + b.i0)) +
                        b.w1 * tokens.row(static_cast<Eigen::Index>(a.i0 * w + b.i1))) +
                a.w1 * (b.w0 * tokens.row(static_cast<Eigen::Index>(a.i1 * w + b.i0)) +
                        b.w1 * tokens.row(static_cast<Eigen::Index>(a.i1 * w + b.i1)));
        }
    }
    return out;
}

Mat resize_bilinear_backward(const Mat& d_out, std::size_t h, std::size_t w, std::size_t out_h,
                             std::size_t out_w) {
    if (h == out_h && w == out_w) {
        return d_out;
    }
    const auto ty = bilinear_taps(h, out_h);
    const auto tx = bilinear_taps(w, out_w);
    Mat d_in = Mat::Zero(static_cast<Eigen::Index>(h * w), d_out.cols());
    for (std::size_t y = 0; y < out_h; ++y) {
        const auto& a = ty[y];
        for (std::size_t x = 0; x < out_w; ++x) {
            const auto& b = tx[x];
            const auto g = d_out.row(static_cast<Eigen::Index>(y * out_w + x));
            d_in.row(static_cast<Eigen::Index>(a.i0 * w + b.i0)) += (a.w0 * b.w0) * g;
            d_in.row(static_cast<Eigen::Index>(a.i0 * w + b.i1)) += (a.w0 * b.w1) * g;
            d_in.row(static_cast<Eigen::Index>(a.i1 * w + b.i0)) += (a.w1 * b.w0) * g;
            d_in.row(static_cast<Eigen::Index>(a.i1 * w + b.i1)) += (a.w1 * b.w1) * g;
        }
    }
    return d_in;
}

Mat im2col(const FeatureMap& x, std::size_t k, std::size_t stride, std::size_t pad, std::size_t& out_h,
           std::size_t& out_w) {
    const std::size_t c = static_cast<std::size_t>(x.tokens.cols());
    if (x.height + 2 * pad < k || x.width + 2 * pad < k) {
        throw ShapeError("convolution kernel larger than padded input");
    }
    out_h = (x.height + 2 * pad - k) / stride + 1;
    out_w = (x.width + 2 * pad - k) / stride + 1;
    Mat cols = Mat::Zero(static_cast<Eigen::Index>(out_h * out_w), static_cast<Eigen::Index>(k * k * c));
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            double* dst = cols.row(static_cast<Eigen::Index>(oy * out_w + ox)).data();
            for (std::size_t ky = 0; ky < k; ++ky) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                if (iy < 0 || iy >= static_cast<long>(x.height)) {
                    continue;
                }
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                    if (ix < 0 || ix >= static_cast<long>(x.width)) {
                        continue;
                    }
                    const double* src = x.tokens.row(static_cast<Eigen::Index>(iy * static_cast<long>(x.width) + ix)).data();
                    std::copy(src, src + c, dst + (ky * k + kx) * c);
                }
            }
        }
    }
    return cols;
}

Mat col2im(const Mat& cols, std::size_t channels, std::size_t h, std::size_t w, std::size_t k, std::size_t stride,
           std::size_t pad, std::size_t out_h, std::size_t out_w) {
    Mat dx = Mat::Zero(static_cast<Eigen::Index>(h * w), static_cast<Eigen::Index>(channels));
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            const double* src = cols.row(static_cast<Eigen::Index>(oy * out_w + ox)).data();
            for (std::size_t ky = 0; ky < k; ++ky) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                if (iy < 0 || iy >= static_cast<long>(h)) {
                    continue;
                }
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                    if (ix < 0 || ix >= static_cast<long>(w)) {
                        continue;
                    }
                    double* dst = dx.row(static_cast<Eigen::Index>(iy * static_cast<long>(w) + ix)).data();
                    const double* s = src + (ky * k + kx) * channels;
                    for (std::size_t ch = 0; ch < channels; ++ch) {
                        dst[ch] += s[ch];
                    }
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(ModelParams& p, const std::string& name, std::size_t in, std::size_t out, bool bias)
    : in_(in), out_(out) {
    w_ = p.declare(name + ".weight", {in, out}, InitKind::trunc_normal);
    if (bias) {
        b_ = p.declare(name + ".bias", {out}, InitKind::zeros);
    }
}

Mat Linear::forward(const ModelParams& p, const Mat& x) const {
    if (static_cast<std::size_t>(x.cols()) != in_) {
        throw ShapeError("linear layer expects " + std::to_string(in_) + " features, got " +
                         std::to_string(x.cols()));
    }
    Mat y = x * view(p, w_, in_, out_);
    if (b_) {
        y.rowwise() += view(p, *b_, 1, out_).row(0);
    }
    return y;
}

Mat Linear::backward(const ModelParams& p, const Mat& x, const Mat& dy, Gradients& g) const {
    view(g, w_, in_, out_).noalias() += x.transpose() * dy;
    if (b_) {
        view(g, *b_, 1, out_).row(0) += dy.colwise().sum();
    }
    return dy * view(p, w_, in_, out_).transpose();
}

// ---------------------------------------------------------------------------
// LayerNorm

LayerNorm::LayerNorm(ModelParams& p, const std::string& name, std::size_t dim) : dim_(dim) {
    gamma_ = p.declare(name + ".weight", {dim}, InitKind::ones);
    beta_ = p.declare(name + ".bias", {dim}, InitKind::zeros);
}

Mat LayerNorm::forward(const ModelParams& p, const Mat& x, Cache* cache) const {
    if (static_cast<std::size_t>(x.cols()) != dim_) {
        throw ShapeError("layer norm expects " + std::to_string(dim_) + " features");
    }
    const auto n = x.rows();
    const double inv_d = 1.0 / static_cast<double>(dim_);
    Mat xhat(n, x.cols());
    Eigen::VectorXd rstd(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double mean = x.row(r).sum() * inv_d;
        const double var = (x.row(r).array() - mean).square().sum() * inv_d;
        rstd[r] = 1.0 / std::sqrt(var + kEps);
        xhat.row(r) = (x.row(r).array() - mean) * rstd[r];
    }
    const auto gamma = view(p, gamma_, 1, dim_).row(0);
    const auto beta = view(p, beta_, 1, dim_).row(0);
    Mat y = (xhat.array().rowwise() * gamma.array()).rowwise() + beta.array();
    if (cache != nullptr) {
        cache->xhat = std::move(xhat);
        cache->rstd = std::move(rstd);
    }
    return y;
}

Mat LayerNorm::backward(const ModelParams& p, const Cache& cache, const Mat& dy, Gradients& g) const {
    const auto gamma = view(p, gamma_, 1, dim_).row(0);
    view(g, gamma_, 1, dim_).row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    view(g, beta_, 1, dim_).row(0) += dy.colwise().sum();
    const Mat dxhat = dy.array().rowwise() * gamma.array();
    const double inv_d = 1.0 / static_cast<double>(dim_);
    Mat dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const double m1 = dxhat.row(r).sum() * inv_d;
        const double m2 = dxhat.row(r).dot(cache.xhat.row(r)) * inv_d;
        dx.row(r) = cache.rstd[r] * (dxhat.row(r).array() - m1 - cache.xhat.row(r).array() * m2);
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(ModelParams& p, const std::string& name, std::size_t in, std::size_t out, std::size_t k,
               std::size_t stride, std::size_t pad)
    : in_(in), out_(out), k_(k), stride_(stride), pad_(pad) {
    w_ = p.declare(name + ".weight", {k, k, in, out}, InitKind::trunc_normal);
    b_ = p.declare(name + ".bias", {out}, InitKind::zeros);
}

FeatureMap Conv2d::forward(const ModelParams& p, const FeatureMap& x, Cache* cache) const {
    if (static_cast<std::size_t>(x.tokens.cols()) != in_) {
        throw ShapeError("convolution expects " + std::to_string(in_) + " channels, got " +
                         std::to_string(x.tokens.cols()));
    }
    FeatureMap out;
    Mat cols = im2col(x, k_, stride_, pad_, out.height, out.width);
    out.tokens = cols * view(p, w_, k_ * k_ * in_, out_);
    out.tokens.rowwise() += view(p, b_, 1, out_).row(0);
    if (cache != nullptr) {
        cache->cols = std::move(cols);
        cache->in_h = x.height;
        cache->in_w = x.width;
    }
    return out;
}

Mat Conv2d::backward(const ModelParams& p, const Cache& cache, const Mat& dy, Gradients& g) const {
    view(g, w_, k_ * k_ * in_, out_).noalias() += cache.cols.transpose() * dy;
    view(g, b_, 1, out_).row(0) += dy.colwise().sum();
    const Mat dcols = dy * view(p, w_, k_ * k_ * in_, out_).transpose();
    const std::size_t out_h = (cache.in_h + 2 * pad_ - k_) / stride_ + 1;
    const std::size_t out_w = (cache.in_w + 2 * pad_ - k_) / stride_ + 1;
    return col2im(dcols, in_, cache.in_h, cache.in_w, k_, stride_, pad_, out_h, out_w);
}

// ---------------------------------------------------------------------------
// DepthwiseConv3x3

DepthwiseConv3x3::DepthwiseConv3x3(ModelParams& p, const std::string& name, std::size_t channels)
    : channels_(channels) {
    w_ = p.declare(name + ".weight", {3, 3, channels}, InitKind::trunc_normal);
    b_ = p.declare(name + ".bias", {channels}, InitKind::zeros);
}

Mat DepthwiseConv3x3::forward(const ModelParams& p, const Mat& x, std::size_t h, std::size_t w) const {
    const auto kernel = view(p, w_, 9, channels_);
    Mat y(x.rows(), x.cols());
    y.rowwise() = view(p, b_, 1, channels_).row(0);
    for (std::size_t oy = 0; oy < h; ++oy) {
        for (std::size_t ox = 0; ox < w; ++ox) {
            auto dst = y.row(static_cast<Eigen::Index>(oy * w + ox));
            for (int ky = 0; ky < 3; ++ky) {
                const long iy = static_cast<long>(oy) + ky - 1;
                if (iy < 0 || iy >= static_cast<long>(h)) continue;
                for (int kx = 0; kx < 3; ++kx) {
                    const long ix = static_cast<long>(ox) + kx - 1;
                    if (ix < 0 || ix >= static_cast<long>(w)) continue;
                    dst.array() += kernel.row(ky * 3 + kx).array() *
                                   x.row(static_cast<Eigen::Index>(iy * static_cast<long>(w) + ix)).array();
                }
            }
        }
    }
    return y;
}

Mat DepthwiseConv3x3::backward(const ModelParams& p, const Mat& x, const Mat& dy, std::size_t h, std::size_t w,
                               Gradients& g) const {
    const auto kernel = view(p, w_, 9, channels_);
    auto dkernel = view(g, w_, 9, channels_);
    view(g, b_, 1, channels_).row(0) += dy.colwise().sum();
    Mat dx = Mat::Zero(x.rows(), x.cols());
    for (std::size_t oy = 0; oy < h; ++oy) {
        for (std::size_t ox = 0; ox < w; ++ox) {
            const auto go = dy.row(static_cast<Eigen::Index>(oy * w + ox));
            for (int ky = 0; ky < 3; ++ky) {
                const long iy = static_cast<long>(oy) + ky - 1;
                if (iy < 0 || iy >= static_cast<long>(h)) continue;
                for (int kx = 0; kx < 3; ++kx) {
                    const long ix = static_cast<long>(ox) + kx - 1;
                    if (ix < 0 || ix >= static_cast<long>(w)) continue;
                    const auto in_row = static_cast<Eigen::Index>(iy * static_cast<long>(w) + ix);
                    dkernel.row(ky * 3 + kx).array() += go.array() * x.row(in_row).array();
                    dx.row(in_row).array() += go.array() * kernel.row(ky * 3 + kx).array();
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// OverlapPatchEmbed

OverlapPatchEmbed::OverlapPatchEmbed(ModelParams& p, const std::string& name, std::size_t in, std::size_t dim,
                                     std::size_t k, std::size_t stride)
    : proj_(p, name + ".proj", in, dim, k, stride, k / 2), norm_(p, name + ".norm", dim), stride_(stride) {}

FeatureMap OverlapPatchEmbed::forward(const ModelParams& p, const FeatureMap& x, Cache* cache) const {
    if (x.height % stride_ != 0 || x.width % stride_ != 0) {
        throw ShapeError("patch embedding input " + std::to_string(x.height) + "x" + std::to_string(x.width) +
                         " is not divisible by stride " + std::to_string(stride_));
    }
    FeatureMap y = proj_.forward(p, x, cache ? &cache->conv : nullptr);
    y.tokens = norm_.forward(p, y.tokens, cache ? &cache->norm : nullptr);
    return y;
}

Mat OverlapPatchEmbed::backward(const ModelParams& p, const Cache& cache, const Mat& dy, Gradients& g) const {
    return proj_.backward(p, cache.conv, norm_.backward(p, cache.norm, dy, g), g);
}

// ---------------------------------------------------------------------------
// EfficientSelfAttention

EfficientSelfAttention::EfficientSelfAttention(ModelParams& p, const std::string& name, std::size_t dim,
                                               std::size_t heads, std::size_t sr_ratio)
    : dim_(dim), heads_(heads), sr_ratio_(sr_ratio) {
    if (heads == 0 || dim % heads != 0) {
        throw ArgumentError("embedding dim " + std::to_string(dim) + " is not divisible by " +
                            std::to_string(heads) + " heads");
    }
    if (sr_ratio == 0) {
        throw ArgumentError("reduction ratio must be positive");
    }
    q_ = Linear(p, name + ".q", dim, dim);
    k_ = Linear(p, name + ".k", dim, dim);
    v_ = Linear(p, name + ".v", dim, dim);
    if (sr_ratio > 1) {
        sr_ = Conv2d(p, name + ".sr", dim, dim, sr_ratio, sr_ratio, 0);
        sr_norm_ = LayerNorm(p, name + ".sr_norm", dim);
    }
    proj_ = Linear(p, name + ".proj", dim, dim);
}

Mat EfficientSelfAttention::forward(const ModelParams& p, const Mat& x, std::size_t h, std::size_t w,
                                    Cache* cache) const {
    if (static_cast<std::size_t>(x.rows()) != h * w) {
        throw ShapeError("token count does not match the grid");
    }
    if (h % sr_ratio_ != 0 || w % sr_ratio_ != 0) {
        throw ShapeError("token grid " + std::to_string(h) + "x" + std::to_string(w) +
                         " is not divisible by reduction ratio " + std::to_string(sr_ratio_));
    }
    Mat q = q_.forward(p, x);
    Mat kv_input;
    Conv2d::Cache sr_cache;
    LayerNorm::Cache srn_cache;
    if (sr_ratio_ > 1) {
        const FeatureMap reduced = sr_.forward(p, FeatureMap{x, h, w}, cache ? &sr_cache : nullptr);
        kv_input = sr_norm_.forward(p, reduced.tokens, cache ? &srn_cache : nullptr);
    } else {
        kv_input = x;
    }
    Mat k = k_.forward(p, kv_input);
    Mat v = v_.forward(p, kv_input);

    const std::size_t dh = dim_ / heads_;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Mat attended(x.rows(), static_cast<Eigen::Index>(dim_));
    std::vector<Mat> probs;
    for (std::size_t hd = 0; hd < heads_; ++hd) {
        const auto c0 = static_cast<Eigen::Index>(hd * dh);
        const auto n = static_cast<Eigen::Index>(dh);
        Mat s = (q.middleCols(c0, n) * k.middleCols(c0, n).transpose()) * scale;
        softmax_rows(s);
        attended.middleCols(c0, n).noalias() = s * v.middleCols(c0, n);
        if (cache != nullptr) {
            probs.push_back(std::move(s));
        }
    }
    Mat y = proj_.forward(p, attended);
    if (cache != nullptr) {
        cache->x = x;
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->kv_input = std::move(kv_input);
        cache->sr = std::move(sr_cache);
        cache->sr_norm = std::move(srn_cache);
        cache->probs = std::move(probs);
        cache->attended = std::move(attended);
    }
    return y;
}

Mat EfficientSelfAttention::backward(const ModelParams& p, const Cache& cache, const Mat& dy, Gradients& g) const {
    const Mat d_att = proj_.backward(p, cache.attended, dy, g);
    const std::size_t dh = dim_ / heads_;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Mat dq(cache.q.rows(), cache.q.cols());
    Mat dk(cache.k.rows(), cache.k.cols());
    Mat dv(cache.v.rows(), cache.v.cols());
    for (std::size_t hd = 0; hd < heads_; ++hd) {
        const auto c0 = static_cast<Eigen::Index>(hd * dh);
        const auto n = static_cast<Eigen::Index>(dh);
        const Mat& prob = cache.probs[hd];
        const auto d_out = d_att.middleCols(c0, n);
        dv.middleCols(c0, n).noalias() = prob.transpose() * d_out;
        Mat dp = d_out * cache.v.middleCols(c0, n).transpose();
        const Eigen::VectorXd row_dot = (dp.array() * prob.array()).rowwise().sum();
        Mat ds = prob.array() * (dp.colwise() - row_dot).array();
        ds *= scale;
        dq.middleCols(c0, n).noalias() = ds * cache.k.middleCols(c0, n);
        dk.middleCols(c0, n).noalias() = ds.transpose() * cache.q.middleCols(c0, n);
    }
    Mat d_kv = k_.backward(p, cache.kv_input, dk, g);
    d_kv += v_.backward(p, cache.kv_input, dv, g);
    Mat dx = q_.backward(p, cache.x, dq, g);
    if (sr_ratio_ > 1) {
        dx += sr_.backward(p, cache.sr, sr_norm_.backward(p, cache.sr_norm, d_kv, g), g);
    } else {
        dx += d_kv;
    }
    return dx;
}

// ---------------------------------------------------------------------------
// MixFfn

MixFfn::MixFfn(ModelParams& p, const std::string& name, std::size_t dim, std::size_t mlp_ratio)
    : fc1_(p, name + ".fc1", dim, dim * mlp_ratio),
      dw_(p, name + ".dwconv", dim * mlp_ratio),
      fc2_(p, name + ".fc2", dim * mlp_ratio, dim) {}

Mat MixFfn::forward(const ModelParams& p, const Mat& x, std::size_t h, std::size_t w, Cache* cache) const {
    Mat hidden = fc1_.forward(p, x);
    Mat mixed = dw_.forward(p, hidden, h, w);
    Mat act = gelu(mixed);
    Mat y = fc2_.forward(p, act);
    if (cache != nullptr) {
        cache->x = x;
        cache->hidden = std::move(hidden);
        cache->mixed = std::move(mixed);
        cache->act = std::move(act);
    }
    return y;
}

Mat MixFfn::backward(const ModelParams& p, const Cache& cache, const Mat& dy, std::size_t h, std::size_t w,
                     Gradients& g) const {
    const Mat d_act = fc2_.backward(p, cache.act, dy, g);
    const Mat d_mixed = gelu_backward(cache.mixed, d_act);
    const Mat d_hidden = dw_.backward(p, cache.hidden, d_mixed, h, w, g);
    return fc1_.backward(p, cache.x, d_hidden, g);
}

// ---------------------------------------------------------------------------
// TransformerBlock

TransformerBlock::TransformerBlock(ModelParams& p, const std::string& name, std::size_t dim, std::size_t heads,
                                   std::size_t sr_ratio, std::size_t mlp_ratio)
    : norm1_(p, name + ".norm1", dim),
      attn_(p, name + ".attn", dim, heads, sr_ratio),
      norm2_(p, name + ".norm2", dim),
      ffn_(p, name + ".ffn", dim, mlp_ratio) {}

Mat TransformerBlock::forward(const ModelParams& p, const Mat& x, std::size_t h, std::size_t w, double attn_scale,
                              double ffn_scale, Cache* cache) const {
    Mat y = x;
    if (attn_scale != 0.0) {
        const Mat n1 = norm1_.forward(p, x, cache ? &cache->norm1 : nullptr);
        y += attn_scale * attn_.forward(p, n1, h, w, cache ? &cache->attn : nullptr);
    }
    if (ffn_scale != 0.0) {
        const Mat n2 = norm2_.forward(p, y, cache ? &cache->norm2 : nullptr);
        y += ffn_scale * ffn_.forward(p, n2, h, w, cache ? &cache->ffn : nullptr);
    }
    if (cache != nullptr) {
        cache->attn_scale = attn_scale;
        cache->ffn_scale = ffn_scale;
    }
    return y;
}

Mat TransformerBlock::backward(const ModelParams& p, const Cache& cache, const Mat& dy, std::size_t h,
                               std::size_t w, Gradients& g) const {
    Mat dmid = dy;
    if (cache.ffn_scale != 0.0) {
        const Mat d_branch = dy * cache.ffn_scale;
        dmid += norm2_.backward(p, cache.norm2, ffn_.backward(p, cache.ffn, d_branch, h, w, g), g);
    }
    Mat dx = dmid;
    if (cache.attn_scale != 0.0) {
        const Mat d_branch = dmid * cache.attn_scale;
        dx += norm1_.backward(p, cache.norm1, attn_.backward(p, cache.attn, d_branch, g), g);
    }
    return dx;
}

}  // namespace mineseg::nn
