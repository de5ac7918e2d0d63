// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "mineseg/catalog.hpp"
#include "mineseg/dataset.hpp"
#include "mineseg/errors.hpp"
#include "mineseg/inference.hpp"
#include "mineseg/losses.hpp"
#include "mineseg/metrics.hpp"
#include "mineseg/model.hpp"
#include "mineseg/synthetic.hpp"
#include "mineseg/tiling.hpp"
#include "mineseg/training.hpp"

using namespace mineseg;

namespace {

using Bytes = std::vector<std::uint8_t>;
using Reals = std::vector<double>;
using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[200];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

Bytes random_bits(Rng& rng, std::size_t n, double p) {
    Bytes y(n);
    for (auto& v : y) v = rng.bernoulli(p) ? 1 : 0;
    return y;
}

Reals random_probs(Rng& rng, std::size_t n) {
    Reals p(n);
    for (auto& v : p) v = 0.02 + 0.96 * rng.uniform();
    return p;
}

LossConfig tversky_cfg(double a, double b, double d) {
    LossConfig c;
    c.alpha = a;
    c.beta = b;
    c.delta = d;
    return c;
}

template <typename F>
double worst_fd_error(F value_of, Reals x, const Reals& analytic, double h) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = value_of(x);
        x[i] = keep - h;
        const double down = value_of(x);
        x[i] = keep;
        const double numeric = (up - down) / (2 * h);
        const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-12});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
    return worst;
}

Verdict loss_identities() {
    Verdict v;
    const auto t0 = Clock::now();
    Rng rng(101);
    double worst_dice = 0.0;
    double worst_jaccard = 0.0;
    LossConfig dice;
    dice.kind = LossKind::dice;
    for (int i = 0; i < 100; ++i) {
        const Bytes y = random_bits(rng, 32 * 32, 0.4);
        const Reals p = random_probs(rng, 32 * 32);
        worst_dice = std::max(worst_dice, std::abs(tversky_loss(p, y, tversky_cfg(0.5, 0.5, 1e-6)).value -
                                                   tversky_loss(p, y, dice).value));
        Reals bin(p.size());
        double inter = 0.0;
        double uni = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            bin[k] = p[k] >= 0.5 ? 1.0 : 0.0;
            inter += bin[k] * y[k];
            uni += std::max<double>(bin[k], y[k]);
        }
        worst_jaccard = std::max(
            worst_jaccard, std::abs(tversky_loss(bin, y, tversky_cfg(1, 1, 1e-12)).value - (1.0 - inter / uni)));
    }
    const double secs = seconds_since(t0);
    v.require(worst_dice <= 1e-12, fmt("dice gap %.3g > 1e-12", worst_dice));
    v.require(worst_jaccard <= 1e-6, fmt("jaccard gap %.3g > 1e-6", worst_jaccard));
    v.require(secs < 1.0, fmt("took %.2f s", secs));
    if (v.pass) v.detail = fmt("max |dice gap| %.2g, max |jaccard gap| %.2g, %.3f s", worst_dice, worst_jaccard, secs);
    return v;
}

Verdict gradient_correctness() {
    Verdict v;
    const auto t0 = Clock::now();
    Rng rng(202);
    double wt = 0.0;
    double wb = 0.0;
    double wl = 0.0;
    int lovasz_trials = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const Bytes y = random_bits(rng, 16, 0.4);
        const Reals p = random_probs(rng, 16);
        const LossConfig cfg = tversky_cfg(0.2 + rng.uniform(), 0.2 + rng.uniform(), 1e-6);
        wt = std::max(wt, worst_fd_error([&](const Reals& x) { return tversky_loss(x, y, cfg).value; }, p,
                                         tversky_loss(p, y, cfg).grad, 1e-6));
        wb = std::max(wb, worst_fd_error([&](const Reals& x) { return bce_loss(x, y).value; }, p,
                                         bce_loss(p, y).grad, 1e-6));
        Reals f(16);
        for (auto& x : f) x = 2.0 * rng.normal();
        Reals e(16);
        bool near_tie = false;
        for (std::size_t i = 0; i < 16; ++i) {
            const double margin = (2.0 * y[i] - 1.0) * f[i];
            e[i] = std::max(0.0, 1.0 - margin);
            near_tie |= std::abs(1.0 - margin) < 1e-3;
        }
        std::sort(e.begin(), e.end());
        for (std::size_t i = 1; i < 16; ++i) {
            near_tie |= e[i] > 0.0 && e[i] - e[i - 1] < 1e-3;
        }
        if (near_tie) continue;
        ++lovasz_trials;
        wl = std::max(wl, worst_fd_error([&](const Reals& x) { return lovasz_hinge(x, y).value; }, f,
                                         lovasz_hinge(f, y).grad, 1e-7));
    }
    const double secs = seconds_since(t0);
    v.require(wt < 1e-6, fmt("tversky relative error %.3g", wt));
    v.require(wb < 1e-6, fmt("bce relative error %.3g", wb));
    v.require(lovasz_trials > 0 && wl < 1e-5, fmt("lovasz relative error %.3g", wl));
    v.require(secs < 10.0, fmt("took %.2f s", secs));
    if (v.pass) {
        v.detail = fmt("tversky %.2g, bce %.2g, lovasz %.2g", wt, wb, wl) +
                   " (" + std::to_string(lovasz_trials) + " tie-free lovasz trials)";
    }
    return v;
}

Image random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
    Image img(kChannels, h, w);
    Rng rng(seed);
    for (auto& x : img.data) x = rng.normal();
    return img;
}

Verdict model_suite() {
    Verdict v;
    const auto t0 = Clock::now();
    const SegFormer net(ModelConfig::tiny());
    ModelParams p = net.init_params(303);
    for (std::size_t s : {64u, 96u}) {
        const Grid<double> logits = net.forward(p, random_image(s, s, s));
        v.require(logits.rows() == s && logits.cols() == s, "logit map is not full resolution");
        v.require(std::all_of(logits.storage().begin(), logits.storage().end(),
                              [](double x) { return std::isfinite(x); }),
                  "non-finite logits");
    }
    for (auto& t : p.tensors()) {
        if (t.init == nn::InitKind::trunc_normal) {
            for (auto& x : t.values) x *= 10.0;
        }
    }
    const Image img = random_image(64, 64, 7);
    const auto mean_logit = [&](const ModelParams& q) {
        const Grid<double> l = net.forward(q, img);
        return std::accumulate(l.storage().begin(), l.storage().end(), 0.0) / static_cast<double>(l.size());
    };
    SegFormer::Trace trace;
    const Grid<double> logits = net.forward(p, img, &trace);
    Gradients g(p);
    net.backward(p, trace, Grid<double>(64, 64, 1.0 / (64.0 * 64.0)), g);
    Rng rng(304);
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
        const std::size_t t = rng.below(p.size());
        const std::size_t i = rng.below(p.at(t).numel());
        ModelParams plus = p;
        ModelParams minus = p;
        plus.at(t).values[i] += 1e-5;
        minus.at(t).values[i] -= 1e-5;
        const double numeric = (mean_logit(plus) - mean_logit(minus)) / 2e-5;
        const double analytic = g.g[t][i];
        worst = std::max(worst, std::abs(numeric - analytic) /
                                    std::max({std::abs(numeric), std::abs(analytic), 1e-7}));
    }
    const double secs = seconds_since(t0);
    v.require(worst < 1e-3, fmt("finite-difference relative error %.3g", worst));
    v.require(secs < 60.0, fmt("took %.1f s", secs));
    if (v.pass) v.detail = fmt("64/96 forwards ok, max FD relative error %.2g, %.1f s", worst, secs);
    return v;
}

Verdict overfit_oracle() {
    Verdict v;
    const auto t0 = Clock::now();
    double worst_f1 = 1.0;
    double worst_ratio = 1e300;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        InMemoryTiles tiles;
        Splits splits;
        for (auto& t : synthesize_tiles(8, 128, seed)) {
            splits.train.push_back(t.provenance.tile_id);
            tiles.add(std::move(t));
        }
        splits.val = {splits.train.front()};
        const BandStats stats = compute_band_stats(tiles, splits.train);
        TrainConfig cfg;
        cfg.epochs = 200;
        cfg.lr0 = 2e-3;
        cfg.batch_size = 2;
        cfg.crop = 128;
        cfg.seed = seed;
        TrainOptions opts;
        opts.jobs = 2;
        const TrainResult r = train(tiles, splits, stats, ModelConfig::tiny(), LossConfig{}, cfg,
                                    AugmentConfig{}.crop_only(), opts);
        const double first = r.log.front().loss;
        const double last = r.log[r.log.size() - 2].loss;
        const SegFormer net(ModelConfig::tiny());
        EvalOptions eo;
        eo.crop = 128;
        eo.overlap = 0;
        eo.jobs = 2;
        const double f1 = evaluate(net, r.last.params, stats, tiles, splits.train, "train", eo).mean.f1;
        worst_f1 = std::min(worst_f1, f1);
        worst_ratio = std::min(worst_ratio, first / last);
    }
    const double secs = seconds_since(t0);
    v.require(worst_f1 >= 0.95, fmt("train F1 %.4f < 0.95", worst_f1));
    v.require(worst_ratio >= 10.0, fmt("loss fell only %.2fx", worst_ratio));
    v.require(secs < 600.0, fmt("took %.0f s", secs));
    if (v.pass) v.detail = fmt("3 seeds: min train F1 %.4f, min loss reduction %.1fx, %.0f s", worst_f1, worst_ratio, secs);
    return v;
}

Verdict schedule_values() {
    Verdict v;
    const double a = cosine_lr(0, 1000, 3e-4, 0.0);
    const double b = cosine_lr(500, 1000, 3e-4, 0.0);
    const double c = cosine_lr(1000, 1000, 3e-4, 2e-6);
    v.require(std::abs(a - 0.0003) <= 1e-12, fmt("lr(0) = %.17g", a));
    v.require(std::abs(b - 0.00015) <= 1e-12, fmt("lr(T/2) = %.17g", b));
    v.require(std::abs(c - 2e-6) <= 1e-12, fmt("lr(T) = %.17g", c));

    InMemoryTiles tiles;
    Splits splits;
    for (auto& t : synthesize_tiles(3, 64, 5)) {
        splits.train.push_back(t.provenance.tile_id);
        tiles.add(std::move(t));
    }
    splits.val = {splits.train.back()};
    const BandStats stats = compute_band_stats(tiles, splits.train);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.crop = 64;
    cfg.finetune.epochs = 1;
    const TrainResult base = train(tiles, splits, stats, ModelConfig::tiny(), LossConfig{}, cfg, {});
    const TrainResult ft = finetune(base.last, ModelConfig::tiny(), tiles, splits);
    v.require(std::abs(base.log.front().lr - 0.0003) <= 1e-12, "main run did not start at 0.0003");
    v.require(std::abs(ft.log.front().lr - 0.0001) <= 1e-12, fmt("finetune epoch 0 lr = %.17g", ft.log.front().lr));
    if (v.pass) v.detail = "0.0003 / 0.00015 / eta_min, finetune restart at 0.0001";
    return v;
}

SceneRaster one_band_scene(const std::string& id, std::size_t rows, std::size_t cols, std::size_t col0) {
    SceneRaster s;
    s.id = id;
    s.crs = "EPSG:32610";
    s.transform = Affine::north_up(500000.0 + 10.0 * static_cast<double>(col0), 6000000.0, 10.0);
    s.acquisition_date = parse_date("2021-06-01");
    Band b;
    b.pixel_size = 10;
    b.values = Grid<float>(rows, cols, 0.0f);
    b.valid = Grid<std::uint8_t>(rows, cols, 1);
    s.bands.emplace("B02", std::move(b));
    return s;
}

SceneRaster full_scene(std::size_t size) {
    SceneRaster s;
    s.id = "full";
    s.crs = "EPSG:32610";
    s.transform = Affine::north_up(500000.0, 6000000.0, 10.0);
    s.acquisition_date = parse_date("2021-06-01");
    float value = 1.0f;
    for (const auto& band : kBands) {
        const int res = band_resolution(band.id);
        const std::size_t n = size * 10 / static_cast<std::size_t>(res);
        Band b;
        b.pixel_size = res;
        b.values = Grid<float>(n, n, value);
        b.valid = Grid<std::uint8_t>(n, n, 1);
        s.bands.emplace(std::string(band.id), std::move(b));
        value += 1.0f;
    }
    return s;
}

Verdict pipeline_exactness() {
    Verdict v;
    // Three overlapping scenes with random holes: first valid scene wins.
    Rng rng(606);
    const std::array<std::size_t, 3> col0{0, 5, 9};
    std::vector<SceneRaster> scenes;
    for (std::size_t k = 0; k < 3; ++k) {
        SceneRaster s = one_band_scene("s" + std::to_string(k), 6, 10, col0[k]);
        Band& b = s.bands.at("B02");
        for (std::size_t i = 0; i < b.values.size(); ++i) {
            b.values.storage()[i] = static_cast<float>(100 * k + i);
            b.valid.storage()[i] = rng.bernoulli(0.6) ? 1 : 0;
        }
        scenes.push_back(std::move(s));
    }
    const SceneRaster merged = merge_scenes(scenes);
    const Band& out = merged.bands.at("B02");
    bool merge_ok = out.values.cols() == 19;
    for (std::size_t r = 0; merge_ok && r < 6; ++r) {
        for (std::size_t c = 0; c < 19; ++c) {
            bool found = false;
            float want = 0.0f;
            for (std::size_t k = 0; k < 3 && !found; ++k) {
                if (c < col0[k] || c >= col0[k] + 10) continue;
                const Band& src = scenes[k].bands.at("B02");
                if (src.valid(r, c - col0[k])) {
                    found = true;
                    want = src.values(r, c - col0[k]);
                }
            }
            merge_ok &= out.valid(r, c) == (found ? 1 : 0) && (!found || out.values(r, c) == want);
        }
    }
    v.require(merge_ok, "merge differs from the first-valid painting oracle");

    Grid<float> img(768, 768);
    for (auto& x : img.storage()) x = static_cast<float>(rng.uniform());
    const WindowPlan plan = plan_windows(768, 768, 512, 512, 256);
    v.require(stitch(split_by_plan(img, plan), 768, 768) == img, "stitch of split is not bit-exact");

    const SceneRaster scene = full_scene(768);
    const MaskRaster mask{Grid<std::uint8_t>(768, 768, 0), scene.transform, scene.crs};
    const auto tiles = tile_scene(scene, mask, Period::train);
    v.require(tiles.size() == 1 && tiles[0].pixels.size() == 12u * 768 * 768 && tiles[0].height == 768,
              "tiling did not give one 12x768x768 sample");
    bool constants = !tiles.empty();
    for (std::size_t ch = 0; constants && ch < kChannels; ++ch) {
        const auto plane = tiles[0].channel(ch);
        constants = std::all_of(plane.begin(), plane.end(), [&](float x) { return x == static_cast<float>(ch + 1); });
    }
    v.require(constants, "upsampled constant bands are not exact");

    Grid<float> ramp(40, 40);
    for (std::size_t r = 0; r < 40; ++r) {
        for (std::size_t c = 0; c < 40; ++c) ramp(r, c) = static_cast<float>(50.0 + 2.0 * r + 0.5 * c);
    }
    double worst = 0.0;
    for (int f : {2, 6}) {
        const Grid<float> up = upsample_band(ramp, f);
        for (std::size_t r = 2 * f; r < up.rows() - 2 * f; ++r) {
            for (std::size_t c = 2 * f; c < up.cols() - 2 * f; ++c) {
                const double want = 50.0 + 2.0 * ((r + 0.5) / f - 0.5) + 0.5 * ((c + 0.5) / f - 0.5);
                worst = std::max(worst, std::abs(up(r, c) - want) / want);
            }
        }
    }
    v.require(worst <= 1e-6, fmt("ramp relative error %.3g", worst));
    if (v.pass) v.detail = fmt("merge, stitch and tiling exact; ramp relative error %.2g", worst);
    return v;
}

Verdict metrics_checks() {
    Verdict v;
    const Scores s = prf1(ConfusionCounts{2, 1, 2, 0});
    v.require(std::abs(s.f1 - 4.0 / 7.0) <= 1e-12, fmt("F1 = %.17g", s.f1));
    v.require(std::abs(s.precision - 2.0 / 3.0) <= 1e-12 && std::abs(s.recall - 0.5) <= 1e-12, "P/R mismatch");
    const Scores empty = prf1(ConfusionCounts{0, 0, 0, 7});
    v.require(empty.f1 == 1.0 && empty.precision == 1.0 && empty.recall == 1.0, "0/0 convention not honoured");

    Rng rng(707);
    for (int trial = 0; trial < 50 && v.pass; ++trial) {
        std::vector<Grid<std::uint8_t>> preds;
        std::vector<Grid<std::uint8_t>> targets;
        for (int i = 0; i < 5; ++i) {
            Grid<std::uint8_t> p(6, 6);
            Grid<std::uint8_t> t(6, 6);
            p.storage() = random_bits(rng, 36, rng.uniform());
            t.storage() = random_bits(rng, 36, 0.5 * rng.uniform());
            preds.push_back(p);
            targets.push_back(t);
        }
        const auto perm = rng.permutation(5);
        std::vector<Grid<std::uint8_t>> pp;
        std::vector<Grid<std::uint8_t>> tp;
        for (auto i : perm) {
            pp.push_back(preds[i]);
            tp.push_back(targets[i]);
        }
        const double a = split_report("x", preds, targets).mean.f1;
        const double b = split_report("x", pp, tp).mean.f1;
        v.require(std::abs(a - b) <= 1e-12, "report changed under image permutation");
    }
    if (v.pass) v.detail = "F1 4/7 exact, 0/0 -> 1, permutation invariant";
    return v;
}

Verdict augmentation_statistics() {
    Verdict v;
    TileSample tile(16, 16);
    const AugmentConfig cfg{1.0, 8, 0.5, 0.5, 0.5, 0.3};
    int vflip = 0, rot = 0, hflip = 0, shuffle = 0, crop = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        Rng rng = sample_rng(808, i, "tile", 1);
        const AugmentRecord r = augment(tile, cfg, rng).record;
        vflip += r.vflip;
        rot += r.rot_quarters != 0;
        hflip += r.hflip;
        shuffle += r.channel_shuffle;
        crop += r.cropped;
    }
    const double half = 2.5758 * std::sqrt(1000 * 0.25);
    v.require(std::abs(vflip - 500) <= half, "vflip rate " + std::to_string(vflip));
    v.require(std::abs(rot - 500) <= half, "rotation rate " + std::to_string(rot));
    v.require(std::abs(hflip - 500) <= half, "hflip rate " + std::to_string(hflip));
    v.require(std::abs(shuffle - 300) <= 45, "channel shuffle rate " + std::to_string(shuffle));
    v.require(crop == 1000, "crop did not always fire");
    if (v.pass) {
        v.detail = "vflip " + std::to_string(vflip) + ", rot " + std::to_string(rot) + ", hflip " +
                   std::to_string(hflip) + ", shuffle " + std::to_string(shuffle) + " of 1000";
    }
    return v;
}

Verdict split_arithmetic() {
    Verdict v;
    std::vector<std::string> ids;
    for (int i = 0; i < 134; ++i) ids.push_back("tile" + std::to_string(i));
    const SplitSpec spec{{0.7, 0.15, 0.15}, 909};
    const Splits s = split_dataset(ids, spec);
    v.require(s.train.size() == 93 && s.val.size() == 20 && s.test.size() == 21, "sizes differ from (93, 20, 21)");
    std::vector<std::string> all = s.train;
    all.insert(all.end(), s.val.begin(), s.val.end());
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    std::vector<std::string> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    v.require(all == sorted, "splits are not a disjoint cover");
    const Splits again = split_dataset(ids, spec);
    v.require(again.train == s.train && again.val == s.val && again.test == s.test, "not deterministic");
    if (v.pass) v.detail = "(93, 20, 21), disjoint, exhaustive, reproducible";
    return v;
}

Verdict change_detection() {
    Verdict v;
    Grid<std::uint8_t> a(1, 3);
    Grid<std::uint8_t> b(1, 3);
    a.storage() = {1, 1, 0};
    b.storage() = {1, 0, 1};
    const ChangeCounts c = compare_periods(a, b);
    v.require(c.expansion_px == 1 && c.contraction_px == 1 && c.stable_px == 1 && c.expansion_m2() == 100.0,
              "3-pixel example");
    Rng rng(1010);
    for (int trial = 0; trial < 1000 && v.pass; ++trial) {
        Grid<std::uint8_t> x(16, 16);
        Grid<std::uint8_t> y(16, 16);
        x.storage() = random_bits(rng, 256, rng.uniform());
        y.storage() = random_bits(rng, 256, rng.uniform());
        const ChangeCounts xy = compare_periods(x, y);
        const ChangeCounts yx = compare_periods(y, x);
        const auto pos = [](const Grid<std::uint8_t>& m) {
            return static_cast<std::uint64_t>(std::count(m.storage().begin(), m.storage().end(), 1));
        };
        v.require(xy.expansion_px == yx.contraction_px && xy.contraction_px == yx.expansion_px, "antisymmetry");
        v.require(xy.expansion_px + xy.stable_px == pos(y) && xy.contraction_px + xy.stable_px == pos(x),
                  "conservation");
    }
    if (v.pass) v.detail = "worked example exact; 1000 random pairs consistent";
    return v;
}

Verdict determinism() {
    Verdict v;
    InMemoryTiles tiles;
    Splits splits;
    for (auto& t : synthesize_tiles(5, 64, 11)) {
        splits.train.push_back(t.provenance.tile_id);
        tiles.add(std::move(t));
    }
    splits.val = {splits.train.back()};
    splits.train.pop_back();
    const BandStats stats = compute_band_stats(tiles, splits.train);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.lr0 = 2e-3;
    cfg.batch_size = 2;
    cfg.crop = 64;
    cfg.seed = 1111;
    const TrainResult a = train(tiles, splits, stats, ModelConfig::tiny(), LossConfig{}, cfg, {});
    const TrainResult b = train(tiles, splits, stats, ModelConfig::tiny(), LossConfig{}, cfg, {});
    v.require(a.log == b.log, "two fixed-seed runs logged different losses");

    const auto dir = std::filesystem::temp_directory_path() / "mineseg-acceptance-resume";
    std::filesystem::remove_all(dir);
    TrainOptions head_opts;
    head_opts.output_dir = dir;
    head_opts.stop_after_epoch = 2;
    const TrainResult head = train(tiles, splits, stats, ModelConfig::tiny(), LossConfig{}, cfg, {}, head_opts);
    const Checkpoint ckpt = load_checkpoint(dir / "last.ckpt");
    const TrainResult tail = resume(ckpt, tiles, splits);
    std::filesystem::remove_all(dir);
    std::vector<EpochRecord> joined = head.log;
    joined.insert(joined.end(), tail.log.begin(), tail.log.end());
    v.require(joined == a.log, "resumed log differs from the uninterrupted run");
    bool params_equal = true;
    for (std::size_t i = 0; i < a.last.params.size(); ++i) {
        params_equal &= a.last.params.at(i).values == tail.last.params.at(i).values;
    }
    v.require(params_equal, "resumed parameters differ from the uninterrupted run");
    if (v.pass) v.detail = "identical logs; save/load/continue bit-exact over 4 epochs";
    return v;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"loss-family identities", loss_identities},
        {"gradient correctness", gradient_correctness},
        {"model shape and gradient suite", model_suite},
        {"overfit oracle", overfit_oracle},
        {"schedule values", schedule_values},
        {"pipeline exactness", pipeline_exactness},
        {"metrics", metrics_checks},
        {"augmentation statistics", augmentation_statistics},
        {"split arithmetic", split_arithmetic},
        {"change detection", change_detection},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("threw: ") + e.what();
        }
        failures += v.pass ? 0 : 1;
        std::printf("%s %2zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
