#include "mineseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mineseg/errors.hpp"
#include "mineseg/model.hpp"

namespace mineseg {
namespace {

void check_shapes(std::size_t a, std::size_t b) {
    if (a != b) {
        throw ArgumentError("prediction and target sizes differ (" + std::to_string(a) + " vs " +
                            std::to_string(b) + ")");
    }
}

}  // namespace

std::string_view loss_kind_name(LossKind k) noexcept {
    switch (k) {
        case LossKind::tversky: return "tversky";
        case LossKind::dice: return "dice";
        case LossKind::jaccard: return "jaccard";
        case LossKind::lovasz_hinge: return "lovasz_hinge";
        case LossKind::bce: return "bce";
    }
    return "?";
}

LossKind parse_loss_kind(std::string_view name) {
    for (auto k : {LossKind::tversky, LossKind::dice, LossKind::jaccard, LossKind::lovasz_hinge, LossKind::bce}) {
        if (loss_kind_name(k) == name) {
            return k;
        }
    }
    throw ConfigError("loss.kind", "unknown loss '" + std::string(name) + "'");
}

LossConfig LossConfig::resolved() const {
    LossConfig c = *this;
    if (kind == LossKind::dice) {
        c.alpha = c.beta = 0.5;
    } else if (kind == LossKind::jaccard) {
        c.alpha = c.beta = 1.0;
    }
    return c;
}

void LossConfig::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("loss.alpha", "must be > 0");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("loss.beta", "must be > 0");
    if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("loss.delta", "must be > 0");
}

nlohmann::json LossConfig::to_json() const {
    return {{"kind", loss_kind_name(kind)},
            {"alpha", alpha},
            {"beta", beta},
            {"delta", delta},
            {"numerator_smoothing", numerator_smoothing}};
}

LossConfig LossConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ConfigError("loss", "expected an object");
    }
    LossConfig c;
    try {
        if (j.contains("kind")) c.kind = parse_loss_kind(j["kind"].get<std::string>());
        if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
        if (j.contains("beta")) c.beta = j["beta"].get<double>();
        if (j.contains("delta")) c.delta = j["delta"].get<double>();
        if (j.contains("numerator_smoothing")) c.numerator_smoothing = j["numerator_smoothing"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("loss", std::string("wrong type: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------

LossValue tversky_loss(std::span<const double> probs, std::span<const std::uint8_t> target, const LossConfig& cfg) {
    cfg.validate();
    check_shapes(probs.size(), target.size());
    const LossConfig c = cfg.resolved();
    double tp = 0.0;
    double fp = 0.0;
    double fn = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double y = target[i];
        const double p = probs[i];
        tp += y * p;
        fp += (1.0 - y) * p;
        fn += y * (1.0 - p);
    }
    const double denom = tp + c.alpha * fp + c.beta * fn + c.delta;
    const double numer = c.numerator_smoothing ? tp + c.delta : tp;
    LossValue out;
    out.value = 1.0 - numer / denom;
    out.grad.resize(probs.size());
    // dI/dp = (y*D - N*dD/dp) / D^2 with dD/dp = y + alpha*(1-y) - beta*y.
    const double inv_d2 = 1.0 / (denom * denom);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double y = target[i];
        const double d_denom = y + c.alpha * (1.0 - y) - c.beta * y;
        out.grad[i] = -(y * denom - numer * d_denom) * inv_d2;
    }
    return out;
}

std::vector<double> lovasz_grad(std::span<const std::uint8_t> sorted_target) {
    const std::size_t n = sorted_target.size();
    std::vector<double> g(n);
    const double gts = std::accumulate(sorted_target.begin(), sorted_target.end(), 0.0);
    double cum_pos = 0.0;
    double cum_neg = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cum_pos += sorted_target[i];
        cum_neg += 1.0 - sorted_target[i];
        const double intersection = gts - cum_pos;
        const double uni = gts + cum_neg;
        const double jac = 1.0 - intersection / uni;
        g[i] = jac - prev;
        prev = jac;
    }
    return g;
}

LossValue lovasz_hinge(std::span<const double> logits, std::span<const std::uint8_t> target) {
    check_shapes(logits.size(), target.size());
    const std::size_t n = logits.size();
    LossValue out;
    out.grad.assign(n, 0.0);
    if (n == 0) {
        return out;
    }
    std::vector<double> errors(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double sign = 2.0 * target[i] - 1.0;
        errors[i] = 1.0 - logits[i] * sign;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return errors[a] > errors[b]; });
    std::vector<std::uint8_t> sorted(n);
    for (std::size_t k = 0; k < n; ++k) {
        sorted[k] = target[order[k]];
    }
    const auto g = lovasz_grad(sorted);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = order[k];
        if (errors[i] > 0.0) {
            out.value += errors[i] * g[k];
            out.grad[i] = -(2.0 * target[i] - 1.0) * g[k];
        }
    }
    return out;
}

LossValue bce_loss(std::span<const double> probs, std::span<const std::uint8_t> target) {
    check_shapes(probs.size(), target.size());
    const std::size_t n = probs.size();
    LossValue out;
    out.grad.assign(n, 0.0);
    if (n == 0) {
        return out;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = target[i];
        const double raw = probs[i];
        const double p = std::clamp(raw, kBceEps, 1.0 - kBceEps);
        out.value -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        if (raw > kBceEps && raw < 1.0 - kBceEps) {
            out.grad[i] = (-y / p + (1.0 - y) / (1.0 - p)) * inv_n;
        }
    }
    out.value *= inv_n;
    return out;
}

LossValue image_loss(const Grid<double>& logits, const Grid<std::uint8_t>& target, const LossConfig& cfg) {
    if (!logits.same_shape(target)) {
        throw ArgumentError("logit and target shapes differ");
    }
    const auto& f = logits.storage();
    const std::span<const std::uint8_t> y(target.storage());
    if (cfg.kind == LossKind::lovasz_hinge) {
        return lovasz_hinge(f, y);
    }
    std::vector<double> probs(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        probs[i] = sigmoid(f[i]);
    }
    LossValue v = cfg.kind == LossKind::bce ? bce_loss(probs, y) : tversky_loss(probs, y, cfg);
    for (std::size_t i = 0; i < f.size(); ++i) {
        v.grad[i] *= probs[i] * (1.0 - probs[i]);
    }
    return v;
}

}  // namespace mineseg
