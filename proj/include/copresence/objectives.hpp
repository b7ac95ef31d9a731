#pragma once

#include "copresence/autodiff.hpp"
#include "copresence/errors.hpp"
#include "copresence/meformer.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace copresence::objectives {

inline constexpr double kLogClipLow = 1e-7;
inline constexpr double kLogClipHigh = 1.0 - 1e-7;

enum class LossKind { l1, smooth_l1, l2 };

[[nodiscard]] inline std::string to_string(LossKind k) {
    switch (k) {
        case LossKind::l1: return "l1";
        case LossKind::smooth_l1: return "smooth-l1";
        case LossKind::l2: return "l2";
    }
    return "?";
}

[[nodiscard]] inline LossKind loss_kind_from_string(std::string_view s) {
    if (s == "l1") return LossKind::l1;
    if (s == "smooth-l1" || s == "smooth_l1") return LossKind::smooth_l1;
    if (s == "l2" || s == "mse") return LossKind::l2;
    throw ConfigError("unknown loss kind '" + std::string(s) + "' (expected l1, smooth-l1 or l2)");
}

namespace detail {

inline void check_lengths(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ShapeError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
    if (a == 0) {
        throw ShapeError(std::string(what) + ": empty input");
    }
}

inline Var as_column(Tape& tape, const std::vector<double>& v) { return tape.constant(Tensor::column(v)); }

}  // namespace detail

// ---------------------------------------------------------------------------------------------
// Training losses
// ---------------------------------------------------------------------------------------------

/// (1/n)·Σ(p̂ᵢ − pᵢ)².
[[nodiscard]] inline double mse_loss(const std::vector<double>& pred, const std::vector<double>& gt) {
    detail::check_lengths(pred.size(), gt.size(), "mse_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - gt[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

[[nodiscard]] inline Var mse_loss(const Var& pred, const std::vector<double>& gt) {
    detail::check_lengths(pred.shape().numel(), gt.size(), "mse_loss");
    Var target = pred.tape()->constant(Tensor(pred.shape(), gt));
    return mean(square(sub(pred, target)));
}

/// Element-wise Huber with transition δ = 1: ½d² for |d| < 1, |d| − ½ otherwise.
[[nodiscard]] inline double smooth_l1(double d) {
    const double a = std::abs(d);
    return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

[[nodiscard]] inline double regression_loss(LossKind kind, const std::vector<double>& pred,
                                            const std::vector<double>& gt) {
    detail::check_lengths(pred.size(), gt.size(), "regression_loss");
    if (kind == LossKind::l2) {
        return mse_loss(pred, gt);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - gt[i];
        acc += kind == LossKind::l1 ? std::abs(d) : smooth_l1(d);
    }
    return acc / static_cast<double>(pred.size());
}

[[nodiscard]] inline Var regression_loss(LossKind kind, const Var& pred, const std::vector<double>& gt) {
    detail::check_lengths(pred.shape().numel(), gt.size(), "regression_loss");
    Var diff = sub(pred, pred.tape()->constant(Tensor(pred.shape(), gt)));
    switch (kind) {
        case LossKind::l2: return mean(square(diff));
        case LossKind::l1: return mean(abs(diff));
        case LossKind::smooth_l1:
            return mean(ops_detail::unary(
                diff, [](double d) { return smooth_l1(d); },
                [](double d, double) { return std::abs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0); }));
    }
    throw ConfigError("unknown loss kind");
}

/// Closed-form KL(Q‖P) between diagonal Gaussians:
/// Σₘ [ln(σ_p/σ_q) + (σ_q² + (μ_q − μ_p)²)/(2σ_p²) − ½].
[[nodiscard]] inline double kl_gaussians(const model::LatentGaussian& q, const model::LatentGaussian& p) {
    const std::size_t m = q.mu.size();
    if (q.sigma.size() != m || p.mu.size() != m || p.sigma.size() != m) {
        throw ShapeError("kl_gaussians: latent sizes differ");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double sq = q.sigma[i], sp = p.sigma[i];
        if (!(sq > 0.0) || !(sp > 0.0)) {
            throw DomainError("kl_gaussians: sigma must be > 0 (dimension " + std::to_string(i) + ")");
        }
        const double dm = q.mu[i] - p.mu[i];
        acc += std::log(sp / sq) + (sq * sq + dm * dm) / (2.0 * sp * sp) - 0.5;
    }
    return acc;
}

[[nodiscard]] inline Var kl_gaussians(const model::GaussianVars& q, const model::GaussianVars& p) {
    if (q.mu.shape() != p.mu.shape() || q.sigma.shape() != p.sigma.shape() || q.mu.shape() != q.sigma.shape()) {
        throw ShapeError("kl_gaussians: latent shapes differ");
    }
    for (const auto* s : {&q.sigma, &p.sigma}) {
        for (double v : s->value().values()) {
            if (!(v > 0.0)) {
                throw DomainError("kl_gaussians: sigma must be > 0");
            }
        }
    }
    Var log_ratio = sub(log(p.sigma), log(q.sigma));
    Var numer = add(square(q.sigma), square(sub(q.mu, p.mu)));
    Var quad = div(numer, scale(square(p.sigma), 2.0));
    return sum(add_scalar(add(log_ratio, quad), -0.5));
}

struct LossReport {
    double mse = 0.0;
    double kl = 0.0;
    double total = 0.0;
    double lambda = 0.0;
};

/// total = mse + λ·kl.
[[nodiscard]] inline LossReport total_loss(double mse, double kl, double lambda) {
    if (!(lambda >= 0.0)) {
        throw DomainError("total_loss: lambda must be >= 0");
    }
    return {mse, kl, mse + lambda * kl, lambda};
}

[[nodiscard]] inline Var total_loss(const Var& regression, const std::optional<Var>& kl, double lambda) {
    if (!(lambda >= 0.0)) {
        throw DomainError("total_loss: lambda must be >= 0");
    }
    if (!kl.has_value() || lambda == 0.0) {
        return regression;
    }
    return add(regression, scale(*kl, lambda));
}

/// Mean over categories of −[y ln p̂ + (1 − y) ln(1 − p̂)], p̂ clipped to [1e-7, 1 − 1e-7].
[[nodiscard]] inline double bce_multilabel(const std::vector<double>& pred, const std::vector<double>& target) {
    detail::check_lengths(pred.size(), target.size(), "bce_multilabel");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double y = target[i];
        if (y != 0.0 && y != 1.0) {
            throw DomainError("bce_multilabel: targets must be 0 or 1");
        }
        const double p = std::clamp(pred[i], kLogClipLow, kLogClipHigh);
        acc -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return acc / static_cast<double>(pred.size());
}

[[nodiscard]] inline Var bce_multilabel(const Var& pred, const std::vector<double>& target) {
    detail::check_lengths(pred.shape().numel(), target.size(), "bce_multilabel");
    for (double y : target) {
        if (y != 0.0 && y != 1.0) {
            throw DomainError("bce_multilabel: targets must be 0 or 1");
        }
    }
    Tensor y(pred.shape(), target);
    Tensor one_minus_y(pred.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
        one_minus_y[i] = 1.0 - y[i];
    }
    Var p = clamp(pred, kLogClipLow, kLogClipHigh);
    Var pos = mul_const(log(p), y);
    Var neg = mul_const(log(add_scalar(scale(p, -1.0), 1.0)), one_minus_y);
    return scale(mean(add(pos, neg)), -1.0);
}

// ---------------------------------------------------------------------------------------------
// Estimation metrics
// ---------------------------------------------------------------------------------------------

struct SampleMetrics {
    double ssd = 0.0;
    double kl = 0.0;
    double r2 = 0.0;
    double ce = 0.0;
    bool r2_defined = true;  // false for a constant ground-truth vector
};

/// SSD = Σ(pᵢ − p̂ᵢ)², KL = Σ pᵢ ln(pᵢ/p̂ᵢ), R² = 1 − Σ(pᵢ − p̂ᵢ)²/Σ(pᵢ − p̄)², CE = −Σ pᵢ ln p̂ᵢ.
/// Log terms use p̂ clipped to [1e-7, 1]; terms with pᵢ = 0 contribute 0.
[[nodiscard]] inline SampleMetrics metric_suite(const std::vector<double>& pred, const std::vector<double>& gt) {
    detail::check_lengths(pred.size(), gt.size(), "metric_suite");
    SampleMetrics m;
    double gt_mean = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!std::isfinite(pred[i]) || !std::isfinite(gt[i])) {
            throw DomainError("metric_suite: non-finite input at index " + std::to_string(i));
        }
        if (gt[i] < 0.0) {
            throw DomainError("metric_suite: negative ground-truth probability at index " + std::to_string(i));
        }
        gt_mean += gt[i];
    }
    gt_mean /= static_cast<double>(gt.size());
    double spread = 0.0;
    bool constant = true;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const double d = gt[i] - pred[i];
        m.ssd += d * d;
        const double c = gt[i] - gt_mean;
        spread += c * c;
        constant = constant && gt[i] == gt[0];
        if (gt[i] > 0.0) {
            const double p = std::clamp(pred[i], kLogClipLow, 1.0);
            m.kl += gt[i] * std::log(gt[i] / p);
            m.ce -= gt[i] * std::log(p);
        }
    }
    if (constant) {
        m.r2_defined = false;
        m.r2 = std::numeric_limits<double>::quiet_NaN();
    } else {
        m.r2 = 1.0 - m.ssd / spread;
    }
    return m;
}

/// Means of the per-sample metrics over a set of samples; R² only over samples where it is defined.
struct MetricSummary {
    double ssd = 0.0;
    double kl = 0.0;
    double r2 = std::numeric_limits<double>::quiet_NaN();
    double ce = 0.0;
    std::size_t count = 0;
    std::size_t r2_count = 0;
};

[[nodiscard]] inline MetricSummary summarize(const std::vector<SampleMetrics>& samples,
                                             const std::vector<std::size_t>& subset) {
    MetricSummary s;
    double r2_acc = 0.0;
    for (std::size_t i : subset) {
        const auto& m = samples.at(i);
        s.ssd += m.ssd;
        s.kl += m.kl;
        s.ce += m.ce;
        ++s.count;
        if (m.r2_defined) {
            r2_acc += m.r2;
            ++s.r2_count;
        }
    }
    if (s.count > 0) {
        const auto n = static_cast<double>(s.count);
        s.ssd /= n;
        s.kl /= n;
        s.ce /= n;
    } else {
        s.ssd = s.kl = s.ce = std::numeric_limits<double>::quiet_NaN();
    }
    if (s.r2_count > 0) {
        s.r2 = r2_acc / static_cast<double>(s.r2_count);
    }
    return s;
}

[[nodiscard]] inline MetricSummary summarize(const std::vector<SampleMetrics>& samples) {
    std::vector<std::size_t> all(samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return summarize(samples, all);
}

struct EstimationReport {
    std::vector<SampleMetrics> samples;
    std::vector<MetricSummary> per_category;  // samples whose ground truth for the category is > 0
    MetricSummary overall;
};

[[nodiscard]] inline EstimationReport estimation_report(const std::vector<std::vector<double>>& preds,
                                                        const std::vector<std::vector<double>>& gts) {
    if (preds.size() != gts.size()) {
        throw ShapeError("estimation_report: " + std::to_string(preds.size()) + " predictions for " +
                         std::to_string(gts.size()) + " ground-truth vectors");
    }
    if (preds.empty()) {
        throw DomainError("estimation_report: no samples");
    }
    EstimationReport r;
    const std::size_t n = gts.front().size();
    for (std::size_t s = 0; s < preds.size(); ++s) {
        if (gts[s].size() != n) {
            throw ShapeError("estimation_report: ragged ground truth at sample " + std::to_string(s));
        }
        r.samples.push_back(metric_suite(preds[s], gts[s]));
    }
    r.overall = summarize(r.samples);
    for (std::size_t c = 0; c < n; ++c) {
        std::vector<std::size_t> subset;
        for (std::size_t s = 0; s < gts.size(); ++s) {
            if (gts[s][c] > 0.0) subset.push_back(s);
        }
        r.per_category.push_back(summarize(r.samples, subset));
    }
    return r;
}

// ---------------------------------------------------------------------------------------------
// Classification metrics
// ---------------------------------------------------------------------------------------------

struct CategoryCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct CategoryClassification {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    bool precision_undefined = false;  // no predicted positives
    bool recall_undefined = false;     // no actual positives
    CategoryCounts counts;
};

struct ClassificationReport {
    std::vector<CategoryClassification> per_category;
    double ap = 0.0, ar = 0.0, af1 = 0.0;
    double op = 0.0, orecall = 0.0, of1 = 0.0;
};

[[nodiscard]] inline double harmonic_mean(double a, double b) { return a + b > 0.0 ? 2.0 * a * b / (a + b) : 0.0; }

/// Macro (AP/AR/AF1) and micro-pooled (OP/OR/OF1) scores plus per-category accuracy for binary matrices.
[[nodiscard]] inline ClassificationReport classification_suite(const std::vector<std::vector<int>>& preds,
                                                               const std::vector<std::vector<int>>& gts) {
    if (preds.size() != gts.size() || preds.empty()) {
        throw ShapeError("classification_suite: prediction and ground-truth sample counts differ or are zero");
    }
    const std::size_t n = gts.front().size();
    if (n == 0) {
        throw ShapeError("classification_suite: no categories");
    }
    std::vector<CategoryCounts> counts(n);
    std::size_t positives = 0;
    for (std::size_t s = 0; s < preds.size(); ++s) {
        if (preds[s].size() != n || gts[s].size() != n) {
            throw ShapeError("classification_suite: ragged row at sample " + std::to_string(s));
        }
        for (std::size_t c = 0; c < n; ++c) {
            const int p = preds[s][c], g = gts[s][c];
            if ((p != 0 && p != 1) || (g != 0 && g != 1)) {
                throw DomainError("classification_suite: entries must be 0 or 1");
            }
            positives += static_cast<std::size_t>(g);
            auto& k = counts[c];
            if (p == 1 && g == 1) ++k.tp;
            else if (p == 1) ++k.fp;
            else if (g == 1) ++k.fn;
            else ++k.tn;
        }
    }
    if (positives == 0) {
        throw DomainError("classification_suite: ground truth has no positive labels");
    }
    ClassificationReport r;
    CategoryCounts pooled;
    for (const auto& k : counts) {
        CategoryClassification cc;
        cc.counts = k;
        cc.precision_undefined = k.tp + k.fp == 0;
        cc.recall_undefined = k.tp + k.fn == 0;
        cc.precision = cc.precision_undefined ? 0.0 : static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fp);
        cc.recall = cc.recall_undefined ? 0.0 : static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fn);
        cc.f1 = harmonic_mean(cc.precision, cc.recall);
        cc.accuracy = static_cast<double>(k.tp + k.tn) / static_cast<double>(preds.size());
        r.ap += cc.precision;
        r.ar += cc.recall;
        pooled.tp += k.tp;
        pooled.fp += k.fp;
        pooled.fn += k.fn;
        r.per_category.push_back(cc);
    }
    r.ap /= static_cast<double>(n);
    r.ar /= static_cast<double>(n);
    r.af1 = harmonic_mean(r.ap, r.ar);
    r.op = pooled.tp + pooled.fp == 0 ? 0.0 : static_cast<double>(pooled.tp) / static_cast<double>(pooled.tp + pooled.fp);
    r.orecall = static_cast<double>(pooled.tp) / static_cast<double>(pooled.tp + pooled.fn);
    r.of1 = harmonic_mean(r.op, r.orecall);
    return r;
}

}  // namespace copresence::objectives
