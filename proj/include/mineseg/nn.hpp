#pragma once

// Layer primitives with explicit forward/backward passes. Feature maps are
// token matrices (height*width rows, channels columns, row-major spatial
// order). Weights live in a ModelParams store; layers only hold indices, so
// one layer graph can run against any parameter set with the same layout.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mineseg::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const Mat>;
using MatMap = Eigen::Map<Mat>;
using RowVec = Eigen::RowVectorXd;

struct FeatureMap {
    Mat tokens;
    std::size_t height = 0;
    std::size_t width = 0;
};

// ---------------------------------------------------------------------------
// Parameter store

enum class InitKind { trunc_normal, zeros, ones };

struct ParamTensor {
    std::string name;
    std::vector<std::size_t> shape;
    InitKind init = InitKind::zeros;
    std::vector<double> values;

    [[nodiscard]] std::size_t numel() const noexcept { return values.size(); }
};

class ModelParams {
public:
    /// Registers a tensor and returns its index. Values start at zero.
    std::size_t declare(std::string name, std::vector<std::size_t> shape, InitKind init);

    [[nodiscard]] std::size_t size() const noexcept { return tensors_.size(); }
    [[nodiscard]] std::size_t total_count() const noexcept;
    [[nodiscard]] ParamTensor& at(std::size_t i) { return tensors_.at(i); }
    [[nodiscard]] const ParamTensor& at(std::size_t i) const { return tensors_.at(i); }
    [[nodiscard]] const std::vector<ParamTensor>& tensors() const noexcept { return tensors_; }
    [[nodiscard]] std::vector<ParamTensor>& tensors() noexcept { return tensors_; }
    [[nodiscard]] std::optional<std::size_t> find(const std::string& name) const;

    /// Truncated normal (sigma 0.02, cut at 3 sigma) for weights, zeros for
    /// biases, ones for norm scales. Each tensor draws from its own stream
    /// keyed by (seed, tensor index). Values are rounded to float32 so they
    /// survive a checkpoint round trip exactly.
    void initialize(std::uint64_t seed);
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    /// True if both stores have identical names and shapes.
    [[nodiscard]] bool same_layout(const ModelParams& other) const;

private:
    std::vector<ParamTensor> tensors_;
    std::uint64_t seed_ = 0;
};

inline constexpr double kInitSigma = 0.02;
inline constexpr double kInitTruncation = 3.0;

/// Gradient buffers parallel to a ModelParams layout.
struct Gradients {
    std::vector<std::vector<double>> g;

    Gradients() = default;
    explicit Gradients(const ModelParams& params);
    void zero();
    void add(const Gradients& other);
    void scale(double s);
    [[nodiscard]] double squared_norm() const;
};

[[nodiscard]] inline ConstMatMap view(const ModelParams& p, std::size_t idx, std::size_t rows, std::size_t cols) {
    return ConstMatMap(p.at(idx).values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
[[nodiscard]] inline MatMap view(Gradients& g, std::size_t idx, std::size_t rows, std::size_t cols) {
    return MatMap(g.g.at(idx).data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

// ---------------------------------------------------------------------------
// Stateless helpers

[[nodiscard]] Mat gelu(const Mat& x);
[[nodiscard]] Mat gelu_backward(const Mat& x, const Mat& dy);

/// Row-wise softmax (numerically stabilized).
void softmax_rows(Mat& s);

/// Bilinear resize of a token grid, half-pixel centers (align_corners = false).
[[nodiscard]] Mat resize_bilinear(const Mat& tokens, std::size_t h, std::size_t w, std::size_t out_h,
                                  std::size_t out_w);
[[nodiscard]] Mat resize_bilinear_backward(const Mat& d_out, std::size_t h, std::size_t w, std::size_t out_h,
                                           std::size_t out_w);

/// Patch matrix for a k x k / stride s / zero-pad p convolution over a token
/// grid; column order is (ky, kx, channel).
[[nodiscard]] Mat im2col(const FeatureMap& x, std::size_t k, std::size_t stride, std::size_t pad,
                         std::size_t& out_h, std::size_t& out_w);
[[nodiscard]] Mat col2im(const Mat& cols, std::size_t channels, std::size_t h, std::size_t w, std::size_t k,
                         std::size_t stride, std::size_t pad, std::size_t out_h, std::size_t out_w);

// ---------------------------------------------------------------------------
// Layers

class Linear {
public:
    Linear() = default;
    Linear(ModelParams& p, const std::string& name, std::size_t in, std::size_t out, bool bias = true);

    [[nodiscard]] Mat forward(const ModelParams& p, const Mat& x) const;
    /// Accumulates weight gradients; returns d input.
    [[nodiscard]] Mat backward(const ModelParams& p, const Mat& x, const Mat& dy, Gradients& g) const;

    [[nodiscard]] std::size_t weight_index() const noexcept { return w_; }
    [[nodiscard]] std::optional<std::size_t> bias_index() const noexcept { return b_; }

private:
    std::size_t w_ = 0;
    std::optional<std::size_t> b_;
    std::size_t in_ = 0;
    std::size_t out_ = 0;
};

class LayerNorm {
public:
    static constexpr double kEps = 1e-6;

    struct Cache {
        Mat xhat;
        Eigen::VectorXd rstd;
    };

    LayerNorm() = default;
    LayerNorm(ModelParams& p, const std::string& name, std::size_t dim);

    [[nodiscard]] Mat forward(const ModelParams& p, const Mat& x, Cache* cache) const;
    [[nodiscard]] Mat backward(const ModelParams& p, const Cache& cache, const Mat& dy, Gradients& g) const;

private:
    std::size_t gamma_ = 0;
    std::size_t beta_ = 0;
    std::size_t dim_ = 0;
};

/// Dense 2-D convolution via im2col; weight shape (k, k, in, out).
class Conv2d {
public:
    struct Cache {
        Mat cols;
        std::size_t in_h = 0;
        std::size_t in_w = 0;
    };

    Conv2d() = default;
    Conv2d(ModelParams& p, const std::string& name, std::size_t in, std::size_t out, std::size_t k,
           std::size_t stride, std::size_t pad);

    [[nodiscard]] FeatureMap forward(const ModelParams& p, const FeatureMap& x, Cache* cache) const;
    [[nodiscard]] Mat backward(const ModelParams& p, const Cache& cache, const Mat& dy, Gradients& g) const;

    [[nodiscard]] std::size_t weight_index() const noexcept { return w_; }
    [[nodiscard]] std::size_t bias_index() const noexcept { return b_; }

private:
    std::size_t w_ = 0;
    std::size_t b_ = 0;
    std::size_t in_ = 0;
    std::size_t out_ = 0;
    std::size_t k_ = 0;
    std::size_t stride_ = 1;
    std::size_t pad_ = 0;
};

/// 3x3 depthwise convolution, zero padding 1; weight shape (3, 3, channels).
class DepthwiseConv3x3 {
public:
    DepthwiseConv3x3() = default;
    DepthwiseConv3x3(ModelParams& p, const std::string& name, std::size_t channels);

    [[nodiscard]] Mat forward(const ModelParams& p, const Mat& x, std::size_t h, std::size_t w) const;
    [[nodiscard]] Mat backward(const ModelParams& p, const Mat& x, const Mat& dy, std::size_t h, std::size_t w,
                               Gradients& g) const;

    [[nodiscard]] std::size_t weight_index() const noexcept { return w_; }
    [[nodiscard]] std::size_t bias_index() const noexcept { return b_; }

private:
    std::size_t w_ = 0;
    std::size_t b_ = 0;
    std::size_t channels_ = 0;
};

/// Overlapping patch embedding: k x k / stride s convolution (padding k/2)
/// followed by layer normalization.
class OverlapPatchEmbed {
public:
    struct Cache {
        Conv2d::Cache conv;
        LayerNorm::Cache norm;
    };

    OverlapPatchEmbed() = default;
    OverlapPatchEmbed(ModelParams& p, const std::string& name, std::size_t in, std::size_t dim, std::size_t k,
                      std::size_t stride);

    [[nodiscard]] FeatureMap forward(const ModelParams& p, const FeatureMap& x, Cache* cache) const;
    [[nodiscard]] Mat backward(const ModelParams& p, const Cache& cache, const Mat& dy, Gradients& g) const;

    [[nodiscard]] const Conv2d& proj() const noexcept { return proj_; }

private:
    Conv2d proj_;
    LayerNorm norm_;
    std::size_t stride_ = 1;
};

/// Multi-head self-attention whose keys and values come from the token grid
/// reduced by an r x r, stride-r projection (plus layer norm). r = 1 is plain
/// multi-head attention.
class EfficientSelfAttention {
public:
    struct Cache {
        Mat x;
        Mat q;
        Mat kv_input;  // x when r == 1, else the normalized reduction
        Mat k;
        Mat v;
        Conv2d::Cache sr;
        LayerNorm::Cache sr_norm;
        std::vector<Mat> probs;  // per head, N x M
        Mat attended;            // N x D before the output projection
    };

    EfficientSelfAttention() = default;
    EfficientSelfAttention(ModelParams& p, const std::string& name, std::size_t dim, std::size_t heads,
                           std::size_t sr_ratio);

    [[nodiscard]] Mat forward(const ModelParams& p, const Mat& x, std::size_t h, std::size_t w, Cache* cache) const;
    [[nodiscard]] Mat backward(const ModelParams& p, const Cache& cache, const Mat& dy, Gradients& g) const;

    [[nodiscard]] const Linear& query() const noexcept { return q_; }
    [[nodiscard]] const Linear& key() const noexcept { return k_; }
    [[nodiscard]] const Linear& value() const noexcept { return v_; }
    [[nodiscard]] const Linear& output() const noexcept { return proj_; }
    [[nodiscard]] const Conv2d& reduction() const noexcept { return sr_; }

private:
    Linear q_, k_, v_, proj_;
    Conv2d sr_;
    LayerNorm sr_norm_;
    std::size_t dim_ = 0;
    std::size_t heads_ = 1;
    std::size_t sr_ratio_ = 1;
};

/// Feed-forward block: expand, 3x3 depthwise mixing, GELU, project back.
class MixFfn {
public:
    struct Cache {
        Mat x;
        Mat hidden;
        Mat mixed;  // pre-activation
        Mat act;
    };

    MixFfn() = default;
    MixFfn(ModelParams& p, const std::string& name, std::size_t dim, std::size_t mlp_ratio);

    [[nodiscard]] Mat forward(const ModelParams& p, const Mat& x, std::size_t h, std::size_t w, Cache* cache) const;
    [[nodiscard]] Mat backward(const ModelParams& p, const Cache& cache, const Mat& dy, std::size_t h,
                               std::size_t w, Gradients& g) const;

    [[nodiscard]] const Linear& fc1() const noexcept { return fc1_; }
    [[nodiscard]] const Linear& fc2() const noexcept { return fc2_; }
    [[nodiscard]] const DepthwiseConv3x3& dwconv() const noexcept { return dw_; }

private:
    Linear fc1_;
    DepthwiseConv3x3 dw_;
    Linear fc2_;
};

/// Pre-norm transformer block with stochastic-depth residual branches.
class TransformerBlock {
public:
    struct Cache {
        LayerNorm::Cache norm1;
        EfficientSelfAttention::Cache attn;
        LayerNorm::Cache norm2;
        MixFfn::Cache ffn;
        double attn_scale = 1.0;
        double ffn_scale = 1.0;
    };

    TransformerBlock() = default;
    TransformerBlock(ModelParams& p, const std::string& name, std::size_t dim, std::size_t heads,
                     std::size_t sr_ratio, std::size_t mlp_ratio);

    /// attn_scale / ffn_scale multiply the residual branches (0 = dropped,
    /// 1/(1-p) = kept during training, 1 at inference).
    [[nodiscard]] Mat forward(const ModelParams& p, const Mat& x, std::size_t h, std::size_t w, double attn_scale,
                              double ffn_scale, Cache* cache) const;
    [[nodiscard]] Mat backward(const ModelParams& p, const Cache& cache, const Mat& dy, std::size_t h,
                               std::size_t w, Gradients& g) const;

private:
    LayerNorm norm1_;
    EfficientSelfAttention attn_;
    LayerNorm norm2_;
    MixFfn ffn_;
};

}  // namespace mineseg::nn
