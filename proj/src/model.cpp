#include "mineseg/model.hpp"

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "mineseg/errors.hpp"

namespace mineseg {
namespace {

using nlohmann::json;
using nn::FeatureMap;
using nn::Mat;

FeatureMap image_tokens(const Image& img) {
    FeatureMap f;
    f.height = img.height;
    f.width = img.width;
    const std::size_t plane = img.height * img.width;
    f.tokens.resize(static_cast<Eigen::Index>(plane), static_cast<Eigen::Index>(img.channels));
    for (std::size_t ch = 0; ch < img.channels; ++ch) {
        for (std::size_t i = 0; i < plane; ++i) {
            f.tokens(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ch)) = img.data[ch * plane + i];
        }
    }
    return f;
}

template <std::size_t N>
std::array<std::size_t, N> stage_list(const json& j, const char* key, const std::array<std::size_t, N>& fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    const auto& v = j[key];
    if (!v.is_array() || v.size() != N) {
        throw ConfigError(std::string("model.") + key, "expected a list of " + std::to_string(N) + " integers");
    }
    std::array<std::size_t, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
        if (!v[i].is_number_unsigned() && !(v[i].is_number_integer() && v[i].get<long long>() >= 0)) {
            throw ConfigError(std::string("model.") + key + "[" + std::to_string(i) + "]", "expected a non-negative integer");
        }
        out[i] = v[i].get<std::size_t>();
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.stage_depths = {1, 1, 1, 1};
    c.embed_dims = {8, 16, 32, 64};
    c.num_heads = {1, 1, 2, 2};
    c.decoder_dim = 32;
    c.drop_path_rate = 0.0;
    return c;
}

void ModelConfig::validate() const {
    if (in_channels == 0) {
        throw ConfigError("model.in_channels", "must be positive");
    }
    constexpr std::array<std::size_t, 4> kReduction{4, 8, 16, 32};
    std::size_t total_stride = 1;
    for (std::size_t i = 0; i < 4; ++i) {
        const std::string idx = "[" + std::to_string(i) + "]";
        if (stage_depths[i] == 0) {
            throw ConfigError("model.stage_depths" + idx, "must be at least 1");
        }
        if (embed_dims[i] == 0 || num_heads[i] == 0) {
            throw ConfigError("model.embed_dims" + idx, "dims and heads must be positive");
        }
        if (embed_dims[i] % num_heads[i] != 0) {
            throw ConfigError("model.num_heads" + idx, "embed_dims " + std::to_string(embed_dims[i]) +
                                                          " is not divisible by " + std::to_string(num_heads[i]));
        }
        if (sr_ratios[i] == 0) {
            throw ConfigError("model.sr_ratios" + idx, "must be positive");
        }
        if (patch_sizes[i] == 0 || patch_sizes[i] % 2 == 0) {
            throw ConfigError("model.patch_sizes" + idx, "must be odd and positive");
        }
        total_stride *= strides[i];
        if (strides[i] == 0 || total_stride != kReduction[i]) {
            throw ConfigError("model.strides" + idx, "stage outputs must sit at 1/4, 1/8, 1/16 and 1/32 scale");
        }
        if ((32 / kReduction[i]) % sr_ratios[i] != 0) {
            throw ConfigError("model.sr_ratios" + idx,
                              "must divide the stage grid of every input whose sides are multiples of 32");
        }
    }
    if (mlp_ratio == 0) {
        throw ConfigError("model.mlp_ratio", "must be positive");
    }
    if (decoder_dim == 0) {
        throw ConfigError("model.decoder_dim", "must be positive");
    }
    if (!(drop_path_rate >= 0.0 && drop_path_rate < 1.0)) {
        throw ConfigError("model.drop_path_rate", "must lie in [0, 1)");
    }
    if (out_classes != 1) {
        throw ConfigError("model.out_classes", "only binary segmentation (1 output channel) is supported");
    }
}

json ModelConfig::to_json() const {
    return json{{"in_channels", in_channels}, {"stage_depths", stage_depths}, {"embed_dims", embed_dims},
                {"num_heads", num_heads},     {"sr_ratios", sr_ratios},       {"mlp_ratio", mlp_ratio},
                {"patch_sizes", patch_sizes}, {"strides", strides},           {"decoder_dim", decoder_dim},
                {"drop_path_rate", drop_path_rate}, {"out_classes", out_classes}};
}

ModelConfig ModelConfig::from_json(const json& j) {
    if (!j.is_object()) {
        throw ConfigError("model", "expected an object");
    }
    ModelConfig c;
    const auto scalar = [&](const char* key, auto& field) {
        if (!j.contains(key)) {
            return;
        }
        try {
            field = j[key].get<std::remove_reference_t<decltype(field)>>();
        } catch (const json::exception&) {
            throw ConfigError(std::string("model.") + key, "wrong type");
        }
    };
    scalar("in_channels", c.in_channels);
    scalar("mlp_ratio", c.mlp_ratio);
    scalar("decoder_dim", c.decoder_dim);
    scalar("drop_path_rate", c.drop_path_rate);
    scalar("out_classes", c.out_classes);
    c.stage_depths = stage_list(j, "stage_depths", c.stage_depths);
    c.embed_dims = stage_list(j, "embed_dims", c.embed_dims);
    c.num_heads = stage_list(j, "num_heads", c.num_heads);
    c.sr_ratios = stage_list(j, "sr_ratios", c.sr_ratios);
    c.patch_sizes = stage_list(j, "patch_sizes", c.patch_sizes);
    c.strides = stage_list(j, "strides", c.strides);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------

SegFormer::SegFormer(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::size_t in = cfg_.in_channels;
    for (std::size_t s = 0; s < 4; ++s) {
        const std::string name = "stage" + std::to_string(s + 1);
        Stage& st = stages_[s];
        st.embed = nn::OverlapPatchEmbed(layout_, name + ".patch_embed", in, cfg_.embed_dims[s], cfg_.patch_sizes[s],
                                         cfg_.strides[s]);
        for (std::size_t b = 0; b < cfg_.stage_depths[s]; ++b) {
            st.blocks.emplace_back(layout_, name + ".block" + std::to_string(b + 1), cfg_.embed_dims[s],
                                   cfg_.num_heads[s], cfg_.sr_ratios[s], cfg_.mlp_ratio);
        }
        st.norm = nn::LayerNorm(layout_, name + ".norm", cfg_.embed_dims[s]);
        in = cfg_.embed_dims[s];
    }
    for (std::size_t s = 0; s < 4; ++s) {
        decoder_proj_[s] = nn::Linear(layout_, "decoder.linear_c" + std::to_string(s + 1), cfg_.embed_dims[s],
                                      cfg_.decoder_dim);
    }
    fuse_ = nn::Linear(layout_, "decoder.linear_fuse", 4 * cfg_.decoder_dim, cfg_.decoder_dim);
    classifier_ = nn::Linear(layout_, "decoder.linear_pred", cfg_.decoder_dim, cfg_.out_classes);
}

ModelParams SegFormer::init_params(std::uint64_t seed) const {
    ModelParams p = layout_;
    p.initialize(seed);
    return p;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) { return SegFormer(cfg).init_params(seed); }

std::size_t SegFormer::block_count() const noexcept {
    std::size_t n = 0;
    for (auto d : cfg_.stage_depths) {
        n += d;
    }
    return n;
}

std::vector<double> SegFormer::drop_path_rates() const {
    const std::size_t n = block_count();
    std::vector<double> rates(n, 0.0);
    for (std::size_t i = 0; i < n && n > 1; ++i) {
        rates[i] = cfg_.drop_path_rate * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return rates;
}

void SegFormer::check(const ModelParams& params, const Image& image) const {
    if (params.size() != layout_.size() || params.total_count() != layout_.total_count()) {
        throw CompatibilityError("parameter set does not match the model configuration");
    }
    if (image.channels != cfg_.in_channels) {
        throw ShapeError("model expects " + std::to_string(cfg_.in_channels) + " channels, got " +
                         std::to_string(image.channels));
    }
    if (image.height == 0 || image.width == 0 || image.height % 32 != 0 || image.width % 32 != 0) {
        throw ShapeError("input " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                         " is not divisible by 32");
    }
}

std::array<FeatureMap, 4> SegFormer::run_encoder(const ModelParams& params, const Image& image, Trace* trace,
                                                 std::span<const double> scales) const {
    if (!scales.empty() && scales.size() != 2 * block_count()) {
        throw ArgumentError("expected two residual scales per block");
    }
    std::array<FeatureMap, 4> feats;
    FeatureMap x = image_tokens(image);
    std::size_t block_index = 0;
    for (std::size_t s = 0; s < 4; ++s) {
        const Stage& st = stages_[s];
        StageTrace* tr = trace ? &trace->stages[s] : nullptr;
        FeatureMap y = st.embed.forward(params, x, tr ? &tr->embed : nullptr);
        if (tr != nullptr) {
            tr->blocks.assign(st.blocks.size(), {});
            tr->height = y.height;
            tr->width = y.width;
        }
        for (std::size_t b = 0; b < st.blocks.size(); ++b, ++block_index) {
            const double sa = scales.empty() ? 1.0 : scales[2 * block_index];
            const double sf = scales.empty() ? 1.0 : scales[2 * block_index + 1];
            y.tokens = st.blocks[b].forward(params, y.tokens, y.height, y.width, sa, sf, tr ? &tr->blocks[b] : nullptr);
        }
        y.tokens = st.norm.forward(params, y.tokens, tr ? &tr->norm : nullptr);
        feats[s] = y;
        x = std::move(y);
    }
    return feats;
}

std::array<FeatureMap, 4> SegFormer::encode(const ModelParams& params, const Image& image) const {
    check(params, image);
    return run_encoder(params, image, nullptr, {});
}

Grid<double> SegFormer::forward(const ModelParams& params, const Image& image, Trace* trace,
                                std::span<const double> branch_scales) const {
    check(params, image);
    const auto feats = run_encoder(params, image, trace, branch_scales);

    const std::size_t h1 = feats[0].height;
    const std::size_t w1 = feats[0].width;
    const std::size_t dd = cfg_.decoder_dim;
    const auto fuse_w = nn::view(params, fuse_.weight_index(), 4 * dd, dd);
    Mat fused_pre(static_cast<Eigen::Index>(h1 * w1), static_cast<Eigen::Index>(dd));
    fused_pre.rowwise() = nn::view(params, *fuse_.bias_index(), 1, dd).row(0);
    // Concatenation order is deepest stage first; the fused projection is
    // applied block-wise instead of materializing the concatenation.
    for (std::size_t s = 0; s < 4; ++s) {
        const Mat proj = decoder_proj_[s].forward(params, feats[s].tokens);
        Mat up = nn::resize_bilinear(proj, feats[s].height, feats[s].width, h1, w1);
        const auto block = static_cast<Eigen::Index>((3 - s) * dd);
        fused_pre.noalias() += up * fuse_w.middleRows(block, static_cast<Eigen::Index>(dd));
        if (trace != nullptr) {
            trace->upsampled[s] = std::move(up);
        }
    }
    Mat fused = fused_pre.cwiseMax(0.0);
    const Mat coarse = classifier_.forward(params, fused);
    const Mat full = nn::resize_bilinear(coarse, h1, w1, image.height, image.width);

    Grid<double> logits(image.height, image.width);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double v = full(static_cast<Eigen::Index>(i), 0);
        if (!std::isfinite(v)) {
            throw NumericalError("non-finite logit at pixel " + std::to_string(i));
        }
        logits.storage()[i] = v;
    }
    if (trace != nullptr) {
        trace->in_h = image.height;
        trace->in_w = image.width;
        for (std::size_t s = 0; s < 4; ++s) {
            trace->features[s] = feats[s].tokens;
        }
        trace->fused_pre = std::move(fused_pre);
        trace->fused = std::move(fused);
    }
    return logits;
}

void SegFormer::backward(const ModelParams& params, const Trace& trace, const Grid<double>& d_logits,
                         Gradients& grads) const {
    if (d_logits.rows() != trace.in_h || d_logits.cols() != trace.in_w) {
        throw ShapeError("logit gradient shape differs from the traced forward pass");
    }
    const std::size_t h1 = trace.stages[0].height;
    const std::size_t w1 = trace.stages[0].width;
    const std::size_t dd = cfg_.decoder_dim;

    const Mat d_full = nn::ConstMatMap(d_logits.storage().data(), static_cast<Eigen::Index>(d_logits.size()), 1);
    const Mat d_coarse = nn::resize_bilinear_backward(d_full, h1, w1, trace.in_h, trace.in_w);
    const Mat d_fused = classifier_.backward(params, trace.fused, d_coarse, grads);
    const Mat d_pre = (trace.fused_pre.array() > 0.0).select(d_fused, 0.0);

    nn::view(grads, *fuse_.bias_index(), 1, dd).row(0) += d_pre.colwise().sum();
    const auto fuse_w = nn::view(params, fuse_.weight_index(), 4 * dd, dd);
    auto fuse_g = nn::view(grads, fuse_.weight_index(), 4 * dd, dd);

    std::array<Mat, 4> d_feat;
    for (std::size_t s = 0; s < 4; ++s) {
        const auto block = static_cast<Eigen::Index>((3 - s) * dd);
        const auto n = static_cast<Eigen::Index>(dd);
        fuse_g.middleRows(block, n).noalias() += trace.upsampled[s].transpose() * d_pre;
        const Mat d_up = d_pre * fuse_w.middleRows(block, n).transpose();
        const Mat d_proj = nn::resize_bilinear_backward(d_up, trace.stages[s].height, trace.stages[s].width, h1, w1);
        d_feat[s] = decoder_proj_[s].backward(params, trace.features[s], d_proj, grads);
    }

    for (std::size_t si = 4; si-- > 0;) {
        const Stage& st = stages_[si];
        const StageTrace& tr = trace.stages[si];
        Mat d = st.norm.backward(params, tr.norm, d_feat[si], grads);
        for (std::size_t b = st.blocks.size(); b-- > 0;) {
            d = st.blocks[b].backward(params, tr.blocks[b], d, tr.height, tr.width, grads);
        }
        Mat d_in = st.embed.backward(params, tr.embed, d, grads);
        if (si > 0) {
            d_feat[si - 1] += d_in;
        }
    }
}

}  // namespace mineseg
