#include <doctest.h>

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mineseg/errors.hpp"
#include "mineseg/model.hpp"

using namespace mineseg;
using nn::FeatureMap;
using nn::Mat;

namespace {

std::size_t linear_count(std::size_t in, std::size_t out) { return in * out + out; }

// Closed-form parameter count from the layer shapes.
std::size_t expected_param_count(const ModelConfig& c) {
    std::size_t n = 0;
    std::size_t in = c.in_channels;
    for (std::size_t s = 0; s < 4; ++s) {
        const std::size_t d = c.embed_dims[s];
        const std::size_t k = c.patch_sizes[s];
        const std::size_t r = c.sr_ratios[s];
        const std::size_t hidden = d * c.mlp_ratio;
        n += k * k * in * d + d + 2 * d;
        std::size_t block = 2 * d + 4 * linear_count(d, d) + 2 * d;
        if (r > 1) {
            block += r * r * d * d + d + 2 * d;
        }
        block += linear_count(d, hidden) + 9 * hidden + hidden + linear_count(hidden, d);
        n += c.stage_depths[s] * block + 2 * d;
        in = d;
    }
    for (std::size_t s = 0; s < 4; ++s) {
        n += linear_count(c.embed_dims[s], c.decoder_dim);
    }
    n += linear_count(4 * c.decoder_dim, c.decoder_dim) + linear_count(c.decoder_dim, c.out_classes);
    return n;
}

Image random_image(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
    Image img(c, h, w);
    Rng rng(seed);
    for (auto& v : img.data) {
        v = rng.normal();
    }
    return img;
}

void fill_random(nn::ModelParams& p, std::uint64_t seed, double scale = 0.5) {
    Rng rng(seed);
    for (auto& t : p.tensors()) {
        for (auto& v : t.values) {
            v = scale * rng.normal();
        }
    }
}

Mat random_mat(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.normal();
    }
    return m;
}

const std::vector<double>& values_of(const nn::ModelParams& p, const std::string& name) {
    return p.at(p.find(name).value()).values;
}

std::vector<double> layer_norm_row(const std::vector<double>& x, const std::vector<double>& g,
                                   const std::vector<double>& b) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = (x[i] - mean) / std::sqrt(var + nn::LayerNorm::kEps) * g[i] + b[i];
    }
    return out;
}

// y = x W + b with W stored (in, out) row-major.
std::vector<double> affine(const std::vector<double>& x, const std::vector<double>& w, const std::vector<double>& b) {
    std::vector<double> y(b);
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t o = 0; o < b.size(); ++o) {
            y[o] += x[i] * w[i * b.size() + o];
        }
    }
    return y;
}

std::vector<double> row_of(const Mat& m, Eigen::Index r) {
    return std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols());
}

}  // namespace

TEST_CASE("configuration and parameter layout") {
    CHECK(ModelConfig::b3().stage_depths == std::array<std::size_t, 4>{3, 4, 18, 3});
    CHECK(ModelConfig::b3().decoder_dim == 768);
    for (const ModelConfig& cfg : {ModelConfig::tiny(), ModelConfig::b3()}) {
        const SegFormer m(cfg);
        CHECK(m.layout().total_count() == expected_param_count(cfg));
    }
    ModelConfig bad = ModelConfig::tiny();
    bad.num_heads[1] = 3;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ModelConfig::tiny();
    bad.strides[0] = 2;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK(ModelConfig::from_json(ModelConfig::tiny().to_json()) == ModelConfig::tiny());
}

TEST_CASE("init_params is deterministic with the documented distributions") {
    const ModelConfig cfg = ModelConfig::b3();
    const nn::ModelParams a = init_params(cfg, 7);
    const nn::ModelParams b = init_params(cfg, 7);
    const nn::ModelParams c = init_params(cfg, 8);
    std::size_t large = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& t = a.at(i);
        REQUIRE(t.values == b.at(i).values);
        if (t.init == nn::InitKind::trunc_normal) {
            CHECK(t.values != c.at(i).values);
            for (double v : t.values) {
                REQUIRE(std::abs(v) <= nn::kInitSigma * nn::kInitTruncation + 1e-9);
            }
            if (t.numel() >= 10000) {
                ++large;
                double m = 0.0;
                for (double v : t.values) m += v;
                m /= static_cast<double>(t.numel());
                double q = 0.0;
                for (double v : t.values) q += (v - m) * (v - m);
                const double sd = std::sqrt(q / static_cast<double>(t.numel()));
                CHECK(std::abs(sd - 0.02) < 0.002);
            }
        } else {
            const double want = t.init == nn::InitKind::ones ? 1.0 : 0.0;
            for (double v : t.values) {
                REQUIRE(v == want);
            }
        }
    }
    CHECK(large > 0);
}

TEST_CASE("overlapping patch embedding matches a sliding-window oracle") {
    nn::ModelParams p;
    const nn::OverlapPatchEmbed embed(p, "pe", 1, 2, 3, 2);
    fill_random(p, 3);
    const Mat x = random_mat(64, 1, 4);
    const FeatureMap out = embed.forward(p, FeatureMap{x, 8, 8}, nullptr);
    REQUIRE(out.height == 4);
    REQUIRE(out.width == 4);
    const auto& w = values_of(p, "pe.proj.weight");
    const auto& b = values_of(p, "pe.proj.bias");
    for (std::size_t oy = 0; oy < 4; ++oy) {
        for (std::size_t ox = 0; ox < 4; ++ox) {
            std::vector<double> acc(b);
            for (std::size_t ky = 0; ky < 3; ++ky) {
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const long iy = static_cast<long>(2 * oy + ky) - 1;
                    const long ix = static_cast<long>(2 * ox + kx) - 1;
                    if (iy < 0 || ix < 0 || iy >= 8 || ix >= 8) continue;
                    for (std::size_t o = 0; o < 2; ++o) {
                        acc[o] += x(iy * 8 + ix, 0) * w[(ky * 3 + kx) * 2 + o];
                    }
                }
            }
            const auto expect = layer_norm_row(acc, values_of(p, "pe.norm.weight"), values_of(p, "pe.norm.bias"));
            for (std::size_t o = 0; o < 2; ++o) {
                CHECK(out.tokens(static_cast<Eigen::Index>(oy * 4 + ox), static_cast<Eigen::Index>(o)) ==
                      doctest::Approx(expect[o]).epsilon(1e-12));
            }
        }
    }

    nn::ModelParams z;
    const nn::Conv2d conv(z, "c", 12, 8, 7, 4, 3);
    const FeatureMap zero = conv.forward(z, FeatureMap{Mat::Constant(64 * 64, 12, 0.7), 64, 64}, nullptr);
    CHECK(zero.height == 16);
    CHECK(zero.tokens.isZero(0.0));
}

TEST_CASE("efficient attention with reduction 2 matches a dense oracle") {
    const std::size_t d = 3;
    nn::ModelParams p;
    const nn::EfficientSelfAttention attn(p, "a", d, 1, 2);
    fill_random(p, 5);
    const Mat x = random_mat(16, d, 6);
    const Mat y = attn.forward(p, x, 4, 4, nullptr);

    // Explicit 2x2 stride-2 reduction, layer norm, then dense softmax attention.
    const auto& srw = values_of(p, "a.sr.weight");
    const auto& srb = values_of(p, "a.sr.bias");
    std::vector<std::vector<double>> keys;
    std::vector<std::vector<double>> vals;
    for (std::size_t by = 0; by < 2; ++by) {
        for (std::size_t bx = 0; bx < 2; ++bx) {
            std::vector<double> red(srb);
            for (std::size_t ky = 0; ky < 2; ++ky) {
                for (std::size_t kx = 0; kx < 2; ++kx) {
                    const auto tok = static_cast<Eigen::Index>((2 * by + ky) * 4 + 2 * bx + kx);
                    for (std::size_t ci = 0; ci < d; ++ci) {
                        for (std::size_t o = 0; o < d; ++o) {
                            red[o] += x(tok, static_cast<Eigen::Index>(ci)) * srw[((ky * 2 + kx) * d + ci) * d + o];
                        }
                    }
                }
            }
            red = layer_norm_row(red, values_of(p, "a.sr_norm.weight"), values_of(p, "a.sr_norm.bias"));
            keys.push_back(affine(red, values_of(p, "a.k.weight"), values_of(p, "a.k.bias")));
            vals.push_back(affine(red, values_of(p, "a.v.weight"), values_of(p, "a.v.bias")));
        }
    }
    for (Eigen::Index i = 0; i < 16; ++i) {
        const auto q = affine(row_of(x, i), values_of(p, "a.q.weight"), values_of(p, "a.q.bias"));
        std::vector<double> logits;
        for (const auto& k : keys) {
            logits.push_back(std::inner_product(q.begin(), q.end(), k.begin(), 0.0) / std::sqrt(3.0));
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (auto& l : logits) {
            l = std::exp(l - mx);
            z += l;
        }
        std::vector<double> att(d, 0.0);
        for (std::size_t j = 0; j < keys.size(); ++j) {
            for (std::size_t o = 0; o < d; ++o) {
                att[o] += logits[j] / z * vals[j][o];
            }
        }
        const auto expect = affine(att, values_of(p, "a.proj.weight"), values_of(p, "a.proj.bias"));
        for (std::size_t o = 0; o < d; ++o) {
            CHECK(y(i, static_cast<Eigen::Index>(o)) == doctest::Approx(expect[o]).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS((void)attn.forward(p, random_mat(12, d, 1), 3, 4, nullptr), ShapeError);
}

TEST_CASE("plain attention is permutation equivariant and a singleton maps to its value") {
    nn::ModelParams p;
    const nn::EfficientSelfAttention attn(p, "a", 4, 2, 1);
    fill_random(p, 8);
    const Mat x = random_mat(6, 4, 9);
    const Mat y = attn.forward(p, x, 2, 3, nullptr);
    const std::vector<Eigen::Index> perm{4, 2, 0, 5, 1, 3};
    Mat xp(6, 4);
    for (Eigen::Index i = 0; i < 6; ++i) {
        xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    }
    const Mat yp = attn.forward(p, xp, 3, 2, nullptr);
    for (Eigen::Index i = 0; i < 6; ++i) {
        for (Eigen::Index c = 0; c < 4; ++c) {
            CHECK(yp(i, c) == doctest::Approx(y(perm[static_cast<std::size_t>(i)], c)).epsilon(1e-12));
        }
    }

    const Mat one = random_mat(1, 4, 10);
    const Mat y1 = attn.forward(p, one, 1, 1, nullptr);
    const auto v = affine(row_of(one, 0), values_of(p, "a.v.weight"), values_of(p, "a.v.bias"));
    const auto expect = affine(v, values_of(p, "a.proj.weight"), values_of(p, "a.proj.bias"));
    for (Eigen::Index c = 0; c < 4; ++c) {
        CHECK(y1(0, c) == doctest::Approx(expect[static_cast<std::size_t>(c)]).epsilon(1e-12));
    }
}

TEST_CASE("mix feed-forward") {
    nn::ModelParams p;
    const nn::MixFfn ffn(p, "f", 3, 2);
    const Mat x = random_mat(4, 3, 11);
    CHECK(ffn.forward(p, x, 2, 2, nullptr).isZero(0.0));
    fill_random(p, 12);
    const Mat y = ffn.forward(p, x, 2, 2, nullptr);
    CHECK(y.rows() == 4);
    CHECK(y.cols() == 3);

    nn::ModelParams q;
    const nn::DepthwiseConv3x3 dw(q, "dw", 2);
    fill_random(q, 13);
    const Mat z = random_mat(4, 2, 14);
    const Mat out = dw.forward(q, z, 2, 2);
    const auto& k = values_of(q, "dw.weight");
    const auto& b = values_of(q, "dw.bias");
    for (long oy = 0; oy < 2; ++oy) {
        for (long ox = 0; ox < 2; ++ox) {
            for (std::size_t ch = 0; ch < 2; ++ch) {
                double acc = b[ch];
                for (long iy = 0; iy < 2; ++iy) {
                    for (long ix = 0; ix < 2; ++ix) {
                        const long ky = iy - oy + 1;
                        const long kx = ix - ox + 1;
                        acc += k[static_cast<std::size_t>(ky * 3 + kx) * 2 + ch] *
                               z(iy * 2 + ix, static_cast<Eigen::Index>(ch));
                    }
                }
                CHECK(out(oy * 2 + ox, static_cast<Eigen::Index>(ch)) == doctest::Approx(acc).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("tiny model runs at any multiple of 32 with the same parameters") {
    const SegFormer model(ModelConfig::tiny());
    const nn::ModelParams p = model.init_params(1);
    for (std::size_t size : {64u, 96u, 768u}) {
        const Image img = random_image(12, size, size + 32, size);
        const Grid<double> logits = model.forward(p, img);
        CHECK(logits.rows() == size);
        CHECK(logits.cols() == size + 32);
        for (double v : logits.storage()) {
            REQUIRE(std::isfinite(v));
        }
        const auto feats = model.encode(p, img);
        for (std::size_t s = 0; s < 4; ++s) {
            CHECK(feats[s].height == size >> (s + 2));
            CHECK(feats[s].width == (size + 32) >> (s + 2));
        }
        CHECK(model.forward(p, img) == logits);
    }
    CHECK_THROWS_AS((void)model.forward(p, random_image(12, 80, 64, 1)), ShapeError);
    CHECK_THROWS_AS((void)model.forward(p, random_image(11, 64, 64, 1)), ShapeError);
}

TEST_CASE("analytic gradient of the mean logit matches central differences") {
    const SegFormer model(ModelConfig::tiny());
    nn::ModelParams p = model.init_params(2);
    // Larger weights keep the sampled gradients well above rounding noise.
    for (auto& t : p.tensors()) {
        if (t.init == nn::InitKind::trunc_normal) {
            for (auto& v : t.values) v *= 10.0;
        }
    }
    const Image img = random_image(12, 64, 64, 3);
    const auto objective = [&](const nn::ModelParams& params) {
        const Grid<double> l = model.forward(params, img);
        double s = 0.0;
        for (double v : l.storage()) s += v;
        return s / static_cast<double>(l.size());
    };
    SegFormer::Trace trace;
    const Grid<double> logits = model.forward(p, img, &trace);
    const Grid<double> d(logits.rows(), logits.cols(), 1.0 / static_cast<double>(logits.size()));
    nn::Gradients g(p);
    model.backward(p, trace, d, g);

    Rng rng(4);
    const double h = 1e-5;
    int checked = 0;
    while (checked < 10) {
        const std::size_t t = rng.below(p.size());
        const std::size_t i = rng.below(p.at(t).numel());
        const double analytic = g.g[t][i];
        nn::ModelParams plus = p;
        nn::ModelParams minus = p;
        plus.at(t).values[i] += h;
        minus.at(t).values[i] -= h;
        const double numeric = (objective(plus) - objective(minus)) / (2 * h);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
        INFO(p.at(t).name, "[", i, "] analytic ", analytic, " numeric ", numeric);
        CHECK(std::abs(analytic - numeric) / denom < 1e-3);
        ++checked;
    }
}

TEST_CASE("B3 configuration forwards a batch of two 512 inputs") {
    const SegFormer model(ModelConfig::b3());
    const nn::ModelParams p = model.init_params(0);
    for (std::uint64_t b = 0; b < 2; ++b) {
        const Grid<double> logits = model.forward(p, random_image(12, 512, 512, b));
        CHECK(logits.rows() == 512);
        CHECK(logits.cols() == 512);
    }
}
