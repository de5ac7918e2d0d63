#include "mineseg/metrics.hpp"

#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mineseg/errors.hpp"

namespace mineseg {
namespace {

nlohmann::json scores_json(const Scores& s) {
    return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

template <typename T>
Grid<std::uint8_t> threshold_impl(const Grid<T>& probs, double threshold) {
    Grid<std::uint8_t> out(probs.rows(), probs.cols());
    const auto& src = probs.storage();
    auto& dst = out.storage();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = static_cast<double>(src[i]) >= threshold ? 1 : 0;
    }
    return out;
}

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

ConfusionCounts confusion(const Grid<std::uint8_t>& pred, const Grid<std::uint8_t>& target) {
    if (!pred.same_shape(target)) {
        throw ArgumentError("prediction and target shapes differ");
    }
    ConfusionCounts c;
    const auto& p = pred.storage();
    const auto& t = target.storage();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 1 || t[i] > 1) {
            throw ArgumentError("confusion counts need binary masks (found value " +
                                std::to_string(p[i] > 1 ? p[i] : t[i]) + ")");
        }
        if (p[i]) {
            t[i] ? ++c.tp : ++c.fp;
        } else {
            t[i] ? ++c.fn : ++c.tn;
        }
    }
    return c;
}

Scores prf1(const ConfusionCounts& c) noexcept {
    if (c.tp == 0 && c.fp == 0 && c.fn == 0) {
        return {1.0, 1.0, 1.0};
    }
    const auto tp = static_cast<double>(c.tp);
    Scores s;
    s.precision = c.tp + c.fp == 0 ? 0.0 : tp / (tp + static_cast<double>(c.fp));
    s.recall = c.tp + c.fn == 0 ? 0.0 : tp / (tp + static_cast<double>(c.fn));
    const double pr = s.precision + s.recall;
    s.f1 = pr == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / pr;
    return s;
}

SplitReport split_report(std::string split, const std::vector<Grid<std::uint8_t>>& preds,
                         const std::vector<Grid<std::uint8_t>>& targets, std::vector<std::string> ids) {
    if (preds.empty()) {
        throw ArgumentError("split '" + split + "' has no images");
    }
    if (preds.size() != targets.size() || (!ids.empty() && ids.size() != preds.size())) {
        throw ArgumentError("prediction, target and id lists differ in length");
    }
    SplitReport r;
    r.split = std::move(split);
    r.image_ids = std::move(ids);
    ConfusionCounts pooled;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const ConfusionCounts c = confusion(preds[i], targets[i]);
        pooled += c;
        r.counts.push_back(c);
        r.per_image.push_back(prf1(c));
    }
    const double n = static_cast<double>(preds.size());
    for (const Scores& s : r.per_image) {
        r.mean.precision += s.precision;
        r.mean.recall += s.recall;
        r.mean.f1 += s.f1;
    }
    r.mean.precision /= n;
    r.mean.recall /= n;
    r.mean.f1 /= n;
    r.pooled = prf1(pooled);
    return r;
}

nlohmann::json SplitReport::to_json() const {
    nlohmann::json images = nlohmann::json::array();
    for (std::size_t i = 0; i < per_image.size(); ++i) {
        nlohmann::json e = scores_json(per_image[i]);
        if (!image_ids.empty()) {
            e["id"] = image_ids[i];
        }
        e["tp"] = counts[i].tp;
        e["fp"] = counts[i].fp;
        e["fn"] = counts[i].fn;
        e["tn"] = counts[i].tn;
        images.push_back(std::move(e));
    }
    return {{"split", split},
            {"images", std::move(images)},
            {"mean_per_image", scores_json(mean)},
            {"pooled_pixels", scores_json(pooled)}};
}

const SplitReport* MetricsReport::find(const std::string& split) const noexcept {
    for (const auto& s : splits) {
        if (s.split == split) {
            return &s;
        }
    }
    return nullptr;
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : splits) {
        j.push_back(s.to_json());
    }
    return {{"splits", std::move(j)}};
}

std::string MetricsReport::table() const {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-8s %8s %10s %8s %7s\n", "split", "F1", "Precision", "Recall", "images");
    os << line;
    for (const auto& s : splits) {
        std::snprintf(line, sizeof line, "%-8s %8.4f %10.4f %8.4f %7zu\n", s.split.c_str(), s.mean.f1,
                      s.mean.precision, s.mean.recall, s.per_image.size());
        os << line;
    }
    os << "pooled-pixel scores (not per-image means):\n";
    for (const auto& s : splits) {
        std::snprintf(line, sizeof line, "%-8s %8.4f %10.4f %8.4f\n", s.split.c_str(), s.pooled.f1,
                      s.pooled.precision, s.pooled.recall);
        os << line;
    }
    return os.str();
}

Grid<std::uint8_t> threshold_mask(const Grid<float>& probs, double threshold) {
    return threshold_impl(probs, threshold);
}

Grid<std::uint8_t> threshold_mask(const Grid<double>& probs, double threshold) {
    return threshold_impl(probs, threshold);
}

}  // namespace mineseg
