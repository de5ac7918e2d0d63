#include "mineseg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mineseg/errors.hpp"
#include "mineseg/metrics.hpp"
#include "mineseg/parallel.hpp"
#include "mineseg/tiling.hpp"

namespace mineseg {
namespace {

std::size_t fit_window(std::size_t window, std::size_t extent) {
    const std::size_t w = std::min(window, extent);
    const std::size_t fitted = w - w % 32;
    if (fitted == 0) {
        throw ShapeError("tile side " + std::to_string(extent) + " is smaller than 32 px");
    }
    return fitted;
}

Image crop_image(const Image& img, std::size_t row, std::size_t col, std::size_t h, std::size_t w) {
    Image out(img.channels, h, w);
    for (std::size_t ch = 0; ch < img.channels; ++ch) {
        for (std::size_t r = 0; r < h; ++r) {
            const double* src = &img.data[(ch * img.height + row + r) * img.width + col];
            std::copy(src, src + w, &out.data[(ch * h + r) * w]);
        }
    }
    return out;
}

nlohmann::json counts_json(const ChangeCounts& c) {
    return {{"expansion_px", c.expansion_px},     {"contraction_px", c.contraction_px},
            {"stable_px", c.stable_px},           {"excluded_px", c.excluded_px},
            {"expansion_m2", c.expansion_m2()},   {"contraction_m2", c.contraction_m2()},
            {"stable_m2", c.stable_m2()}};
}

}  // namespace

void InferenceConfig::validate() const {
    if (window < 32 || window % 32 != 0) {
        throw ConfigError("inference.window", "must be a positive multiple of 32");
    }
    if (overlap >= window) {
        throw ConfigError("inference.overlap", "must be smaller than the window");
    }
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ConfigError("inference.threshold", "must lie in (0, 1)");
    }
}

Prediction predict(const SegFormer& model, const ModelParams& params, const BandStats& stats, const TileSample& tile,
                   const InferenceConfig& cfg) {
    cfg.validate();
    if (model.config().in_channels != kChannels) {
        throw CompatibilityError("model expects " + std::to_string(model.config().in_channels) +
                                 " input bands, tiles carry " + std::to_string(kChannels));
    }
    tile.validate();
    const std::size_t wh = fit_window(cfg.window, tile.height);
    const std::size_t ww = fit_window(cfg.window, tile.width);
    const std::size_t overlap = std::min(cfg.overlap, std::min(wh, ww) / 2);
    const WindowPlan plan = plan_windows(tile.height, tile.width, wh, ww, overlap);
    const Image image = normalize(tile, stats);

    std::vector<WindowPrediction> windows(plan.origins.size());
    parallel_for(windows.size(), std::max(1u, cfg.jobs), [&](std::size_t i) {
        const auto [row, col] = plan.origins[i];
        const Grid<double> logits = model.forward(params, crop_image(image, row, col, wh, ww));
        WindowPrediction& w = windows[i];
        w.row = row;
        w.col = col;
        w.values = Grid<float>(wh, ww);
        for (std::size_t k = 0; k < logits.size(); ++k) {
            w.values.storage()[k] = static_cast<float>(sigmoid(logits.storage()[k]));
        }
    });
    Prediction p;
    p.windows = windows.size();
    p.probability = stitch(windows, tile.height, tile.width);
    p.mask = threshold_mask(p.probability, cfg.threshold);
    return p;
}

ChangeCounts& ChangeCounts::operator+=(const ChangeCounts& o) noexcept {
    expansion_px += o.expansion_px;
    contraction_px += o.contraction_px;
    stable_px += o.stable_px;
    excluded_px += o.excluded_px;
    return *this;
}

ChangeCounts compare_periods(const Grid<std::uint8_t>& a, const Grid<std::uint8_t>& b) {
    if (!a.same_shape(b)) {
        throw AlignmentError("period masks differ in shape (" + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()) + ")");
    }
    ChangeCounts c;
    const auto& va = a.storage();
    const auto& vb = b.storage();
    for (std::size_t i = 0; i < va.size(); ++i) {
        if (va[i] == MaskRaster::kNoData || vb[i] == MaskRaster::kNoData) {
            ++c.excluded_px;
            continue;
        }
        if (va[i] > 1 || vb[i] > 1) {
            throw ArgumentError("period masks must hold 0, 1 or 255");
        }
        if (va[i] && vb[i]) {
            ++c.stable_px;
        } else if (vb[i]) {
            ++c.expansion_px;
        } else if (va[i]) {
            ++c.contraction_px;
        }
    }
    return c;
}

ChangeCounts compare_periods(const MaskRaster& a, const MaskRaster& b) {
    if (a.crs != b.crs) {
        throw AlignmentError("period masks use different CRS (" + a.crs + " vs " + b.crs + ")");
    }
    for (std::size_t i = 0; i < a.transform.c.size(); ++i) {
        if (std::abs(a.transform.c[i] - b.transform.c[i]) > 1e-6) {
            throw AlignmentError("period masks sit on different pixel grids");
        }
    }
    return compare_periods(a.values, b.values);
}

void ChangeReport::add(std::string tile_id, const ChangeCounts& counts) {
    total += counts;
    tiles.push_back({std::move(tile_id), counts});
}

nlohmann::json ChangeReport::to_json() const {
    nlohmann::json per_tile = nlohmann::json::array();
    for (const auto& t : tiles) {
        nlohmann::json e = counts_json(t.counts);
        e["tile_id"] = t.tile_id;
        per_tile.push_back(std::move(e));
    }
    return {{"total", counts_json(total)}, {"tiles", std::move(per_tile)}};
}

std::string ChangeReport::table() const {
    std::size_t width = 5;
    for (const auto& t : tiles) {
        width = std::max(width, t.tile_id.size());
    }
    const int w = static_cast<int>(width);
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-*s %12s %12s %12s %14s %14s\n", w, "tile", "expansion_px", "contract_px",
                  "stable_px", "expansion_m2", "contract_m2");
    os << line;
    const auto row = [&](const std::string& name, const ChangeCounts& c) {
        os << name << std::string(width - name.size(), ' ');
        std::snprintf(line, sizeof line, " %12llu %12llu %12llu %14.0f %14.0f\n",
                      static_cast<unsigned long long>(c.expansion_px),
                      static_cast<unsigned long long>(c.contraction_px),
                      static_cast<unsigned long long>(c.stable_px), c.expansion_m2(), c.contraction_m2());
        os << line;
    };
    for (const auto& t : tiles) {
        row(t.tile_id, t.counts);
    }
    row("TOTAL", total);
    return os.str();
}

}  // namespace mineseg
