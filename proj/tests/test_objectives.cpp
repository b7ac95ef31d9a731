#include "copresence/objectives.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace copresence;
using namespace copresence::objectives;
using model::GaussianVars;
using model::LatentGaussian;

namespace {

std::vector<double> random_simplex(Rng& rng, std::size_t n, std::size_t nonzero) {
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < nonzero; ++i) w[rng.below(n)] += rng.uniform(0.05, 1.0);
    double total = 0.0;
    for (double v : w) total += v;
    for (double& v : w) v /= total;
    return w;
}

std::vector<double> random_probs(Rng& rng, std::size_t n) {
    std::vector<double> p(n);
    for (double& v : p) v = rng.uniform();
    return p;
}

LatentGaussian random_gaussian(Rng& rng, std::size_t m) {
    LatentGaussian g;
    for (std::size_t i = 0; i < m; ++i) {
        g.mu.push_back(rng.normal());
        g.sigma.push_back(std::exp(rng.uniform(-1.0, 1.0)));
    }
    return g;
}

}  // namespace

TEST(MseLoss, Examples) {
    EXPECT_EQ(mse_loss({0.2, 0.8}, {0.2, 0.8}), 0.0);
    EXPECT_EQ(mse_loss({1, 0}, {0, 1}), 1.0);
    EXPECT_THROW((void)mse_loss({1, 0}, {1}), ShapeError);
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = random_probs(rng, 14), b = random_probs(rng, 14);
        long double ref = 0;
        for (std::size_t i = 0; i < 14; ++i) ref += (static_cast<long double>(a[i]) - b[i]) * (a[i] - b[i]);
        EXPECT_NEAR(mse_loss(a, b), static_cast<double>(ref / 14), 1e-15);
    }
}

TEST(MseLoss, VarMatchesScalarAndGradient) {
    Rng rng(2);
    const auto gt = random_probs(rng, 5);
    const auto x = random_probs(rng, 5);
    Tape tape;
    EXPECT_NEAR(mse_loss(tape.constant(Tensor::column(x)), gt).item(), mse_loss(x, gt), 1e-15);
    EXPECT_LT(grad_check([&](Tape&, const Var& v) { return mse_loss(v, gt); }, Tensor::column(x)), 1e-4);
}

TEST(RegressionLoss, Kinds) {
    const std::vector<double> p{0.0, 3.0}, g{0.5, 0.0};
    EXPECT_DOUBLE_EQ(regression_loss(LossKind::l1, p, g), (0.5 + 3.0) / 2);
    EXPECT_DOUBLE_EQ(regression_loss(LossKind::smooth_l1, p, g), (0.125 + 2.5) / 2);
    EXPECT_DOUBLE_EQ(regression_loss(LossKind::l2, p, g), (0.25 + 9.0) / 2);
    for (auto kind : {LossKind::l1, LossKind::smooth_l1, LossKind::l2}) {
        EXPECT_EQ(loss_kind_from_string(to_string(kind)), kind);
        Tape tape;
        EXPECT_DOUBLE_EQ(regression_loss(kind, tape.constant(Tensor::column(p)), g).item(), regression_loss(kind, p, g));
        const std::vector<double> gt{0.3, 0.1, 0.9};
        EXPECT_LT(grad_check([&](Tape&, const Var& v) { return regression_loss(kind, v, gt); },
                             Tensor::column({0.9, -0.6, 1.05})),
                  1e-4);
    }
    EXPECT_THROW((void)loss_kind_from_string("huber"), ConfigError);
}

TEST(KlGaussians, IdenticalDistributionsGiveExactlyZero) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const auto g = random_gaussian(rng, 16);
        EXPECT_EQ(kl_gaussians(g, g), 0.0);
    }
}

TEST(KlGaussians, UnitShiftGivesOneHalfPerDimension) {
    EXPECT_DOUBLE_EQ(kl_gaussians({{1.0}, {1.0}}, {{0.0}, {1.0}}), 0.5);
    EXPECT_DOUBLE_EQ(kl_gaussians({{1, 1, 1}, {1, 1, 1}}, {{0, 0, 0}, {1, 1, 1}}), 1.5);
}

TEST(KlGaussians, NonNegativeAndPositiveUnderPerturbation) {
    Rng rng(4);
    for (int trial = 0; trial < 10000; ++trial) {
        const auto p = random_gaussian(rng, 8);
        auto q = random_gaussian(rng, 8);
        EXPECT_GE(kl_gaussians(q, p), 0.0);
        q = p;
        const std::size_t dim = rng.below(8);
        if (rng.uniform() < 0.5) q.mu[dim] += rng.uniform(1e-3, 1.0);
        else q.sigma[dim] *= rng.uniform(1.01, 2.0);
        EXPECT_GT(kl_gaussians(q, p), 0.0);
    }
}

TEST(KlGaussians, AgreesWithMonteCarloExpectation) {
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const auto q = random_gaussian(rng, 4), p = random_gaussian(rng, 4);
        const auto mc = oracle::kl_monte_carlo(q.mu, q.sigma, p.mu, p.sigma, 200000, 1000 + trial);
        EXPECT_LT(std::abs(kl_gaussians(q, p) - mc.mean), 3.0 * mc.standard_error);
    }
}

TEST(KlGaussians, RejectsNonPositiveSigmaAndShapeMismatch) {
    EXPECT_THROW((void)kl_gaussians({{0}, {0}}, {{0}, {1}}), DomainError);
    EXPECT_THROW((void)kl_gaussians({{0}, {1}}, {{0, 1}, {1, 1}}), ShapeError);
}

TEST(KlGaussians, VarFormMatchesAndDifferentiatesInAllFourVectors) {
    Rng rng(6);
    const auto q = random_gaussian(rng, 5), p = random_gaussian(rng, 5);
    Tape tape;
    const GaussianVars qv{tape.constant(Tensor::row(q.mu)), tape.constant(Tensor::row(q.sigma))};
    const GaussianVars pv{tape.constant(Tensor::row(p.mu)), tape.constant(Tensor::row(p.sigma))};
    EXPECT_NEAR(kl_gaussians(qv, pv).item(), kl_gaussians(q, p), 1e-13);
    for (int which = 0; which < 4; ++which) {
        const std::vector<double>& start = which == 0 ? q.mu : which == 1 ? q.sigma : which == 2 ? p.mu : p.sigma;
        const auto f = [&](Tape& t, const Var& x) {
            GaussianVars a{t.constant(Tensor::row(q.mu)), t.constant(Tensor::row(q.sigma))};
            GaussianVars b{t.constant(Tensor::row(p.mu)), t.constant(Tensor::row(p.sigma))};
            (which == 0 ? a.mu : which == 1 ? a.sigma : which == 2 ? b.mu : b.sigma) = x;
            return kl_gaussians(a, b);
        };
        EXPECT_LT(grad_check(f, Tensor::row(start)), 1e-4) << which;
    }
}

TEST(TotalLoss, Examples) {
    EXPECT_EQ(total_loss(0.3, 5.0, 0.0).total, 0.3);
    EXPECT_DOUBLE_EQ(total_loss(1.0, 2.0, 1e-5).total, 1.00002);
    EXPECT_EQ(total_loss(0.7, 0.0, 1e-5).total, 0.7);
    const auto r = total_loss(0.25, 3.0, 0.5);
    EXPECT_EQ(r.total, r.mse + r.lambda * r.kl);
    EXPECT_THROW((void)total_loss(1.0, 1.0, -1.0), DomainError);
    Tape tape;
    Var mse = tape.constant(Tensor::scalar(0.4));
    EXPECT_EQ(total_loss(mse, tape.constant(Tensor::scalar(9.0)), 0.0).id(), mse.id());
    EXPECT_EQ(total_loss(mse, std::nullopt, 1e-5).item(), 0.4);
    EXPECT_DOUBLE_EQ(total_loss(mse, tape.constant(Tensor::scalar(2.0)), 1e-5).item(), 0.40002);
}

TEST(Bce, Examples) {
    EXPECT_NEAR(bce_multilabel({0.5, 0.5, 0.5}, {1, 0, 1}), std::log(2.0), 1e-15);
    EXPECT_LT(bce_multilabel({1 - 1e-9, 1e-9}, {1, 0}), 1e-6);
    EXPECT_TRUE(std::isfinite(bce_multilabel({0.0, 1.0}, {1, 0})));
    EXPECT_THROW((void)bce_multilabel({0.5}, {0.5}), DomainError);
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = random_probs(rng, 14);
        std::vector<double> y(14);
        for (double& v : y) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
        long double ref = 0;
        for (std::size_t i = 0; i < 14; ++i) {
            const long double q = std::clamp<long double>(p[i], 1e-7L, 1 - 1e-7L);
            ref -= y[i] * std::log(q) + (1 - y[i]) * std::log(1 - q);
        }
        EXPECT_NEAR(bce_multilabel(p, y), static_cast<double>(ref / 14), 1e-12);
        Tape tape;
        EXPECT_NEAR(bce_multilabel(tape.constant(Tensor::column(p)), y).item(), bce_multilabel(p, y), 1e-12);
    }
    const std::vector<double> y{1, 0, 1};
    EXPECT_LT(grad_check([&](Tape&, const Var& v) { return bce_multilabel(v, y); }, Tensor::column({0.3, 0.6, 0.9})),
              1e-4);
}

TEST(MetricSuite, PerfectPrediction) {
    const std::vector<double> gt{0.2, 0.0, 0.5, 0.3};
    const auto m = metric_suite(gt, gt);
    EXPECT_EQ(m.ssd, 0.0);
    EXPECT_EQ(m.kl, 0.0);
    EXPECT_EQ(m.r2, 1.0);
    long double entropy = 0;
    for (double p : gt)
        if (p > 0) entropy -= p * std::log(static_cast<long double>(p));
    EXPECT_NEAR(m.ce, static_cast<double>(entropy), 1e-15);
    const std::vector<double> one_hot{0, 1, 0};
    const auto h = metric_suite(one_hot, one_hot);
    EXPECT_EQ(h.kl, 0.0);
    EXPECT_EQ(h.r2, 1.0);
}

TEST(MetricSuite, HalfHalfAgainstOneHot) {
    const auto m = metric_suite({0.5, 0.5}, {1.0, 0.0});
    EXPECT_DOUBLE_EQ(m.ssd, 0.5);
    EXPECT_DOUBLE_EQ(m.kl, std::log(2.0));
    EXPECT_DOUBLE_EQ(m.ce, std::log(2.0));
}

TEST(MetricSuite, ConstantTruthFlagsRSquared) {
    const auto m = metric_suite({0.1, 0.2}, {0.5, 0.5});
    EXPECT_FALSE(m.r2_defined);
    EXPECT_TRUE(std::isnan(m.r2));
    const auto s = summarize({m, metric_suite({0.5, 0.5}, {1.0, 0.0})});
    EXPECT_EQ(s.r2_count, 1U);
    EXPECT_EQ(s.count, 2U);
    EXPECT_DOUBLE_EQ(s.r2, 0.0);
}

TEST(MetricSuite, MatchesExtendedPrecisionOracle) {
    Rng rng(8);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto gt = random_simplex(rng, 14, 1 + rng.below(6));
        auto pred = random_probs(rng, 14);
        if (trial % 10 == 0) pred[rng.below(14)] = 0.0;
        const auto m = metric_suite(pred, gt);
        const auto ref = oracle::metrics(pred, gt);
        EXPECT_NEAR(m.ssd, static_cast<double>(ref.ssd), 1e-12);
        EXPECT_NEAR(m.kl, static_cast<double>(ref.kl), 1e-12);
        EXPECT_NEAR(m.ce, static_cast<double>(ref.ce), 1e-12);
        EXPECT_EQ(m.r2_defined, ref.r2_defined);
        if (ref.r2_defined) {
            EXPECT_NEAR(m.r2, static_cast<double>(ref.r2), 1e-12);
        }
        EXPECT_LE(m.r2, 1.0);
        EXPECT_GE(m.ssd, 0.0);
        EXPECT_NEAR(m.ssd, 14 * mse_loss(pred, gt), 1e-15);
    }
}

TEST(MetricSuite, RejectsBadInput) {
    EXPECT_THROW((void)metric_suite({0.5}, {0.5, 0.5}), ShapeError);
    EXPECT_THROW((void)metric_suite({std::nan("")}, {1.0}), DomainError);
    EXPECT_THROW((void)metric_suite({0.5}, {-0.1}), DomainError);
}

TEST(EstimationReport, PerCategoryUsesSamplesWhereCategoryIsPresent) {
    const std::vector<std::vector<double>> gts{{1, 0}, {0.5, 0.5}, {0, 1}};
    const std::vector<std::vector<double>> preds{{0.9, 0.1}, {0.4, 0.6}, {0.2, 0.7}};
    const auto r = estimation_report(preds, gts);
    EXPECT_EQ(r.per_category[0].count, 2U);
    EXPECT_EQ(r.per_category[1].count, 2U);
    const double s0 = metric_suite(preds[0], gts[0]).ssd, s1 = metric_suite(preds[1], gts[1]).ssd,
                 s2 = metric_suite(preds[2], gts[2]).ssd;
    EXPECT_DOUBLE_EQ(r.per_category[0].ssd, (s0 + s1) / 2);
    EXPECT_DOUBLE_EQ(r.per_category[1].ssd, (s1 + s2) / 2);
    EXPECT_DOUBLE_EQ(r.overall.ssd, (s0 + s1 + s2) / 3);
    EXPECT_THROW((void)estimation_report({{0.5}}, {}), ShapeError);
}

TEST(ClassificationSuite, PerfectPredictionScoresOne) {
    const std::vector<std::vector<int>> g{{1, 0, 1}, {0, 1, 0}, {1, 1, 0}};
    const auto r = classification_suite(g, g);
    for (double v : {r.ap, r.ar, r.af1, r.op, r.orecall, r.of1}) EXPECT_EQ(v, 1.0);
    for (const auto& c : r.per_category) EXPECT_EQ(c.accuracy, 1.0);
}

TEST(ClassificationSuite, ComplementScoresZero) {
    const auto r = classification_suite({{0}, {1}, {0}}, {{1}, {0}, {1}});
    EXPECT_EQ(r.ap, 0.0);
    EXPECT_EQ(r.ar, 0.0);
    EXPECT_EQ(r.af1, 0.0);
}

TEST(ClassificationSuite, HandCountedFixture) {
    // 4 samples × 3 categories.
    //   cat 0: TP=2 FP=1 FN=0 TN=1   cat 1: TP=1 FP=0 FN=1 TN=2   cat 2: TP=0 FP=1 FN=1 TN=2
    const std::vector<std::vector<int>> preds{{1, 1, 0}, {1, 0, 1}, {1, 0, 0}, {0, 0, 0}};
    const std::vector<std::vector<int>> gts{{1, 1, 0}, {1, 0, 0}, {0, 1, 1}, {0, 0, 0}};
    const auto r = classification_suite(preds, gts);
    EXPECT_EQ(r.per_category[0].counts.tp, 2U);
    EXPECT_EQ(r.per_category[0].counts.fp, 1U);
    EXPECT_EQ(r.per_category[1].counts.fn, 1U);
    EXPECT_EQ(r.per_category[2].counts.tn, 2U);
    EXPECT_DOUBLE_EQ(r.per_category[0].precision, 2.0 / 3);
    EXPECT_DOUBLE_EQ(r.per_category[1].recall, 0.5);
    EXPECT_EQ(r.per_category[2].f1, 0.0);
    EXPECT_DOUBLE_EQ(r.ap, (2.0 / 3 + 1.0 + 0.0) / 3);
    EXPECT_DOUBLE_EQ(r.ar, (1.0 + 0.5 + 0.0) / 3);
    EXPECT_DOUBLE_EQ(r.op, 3.0 / 5);
    EXPECT_DOUBLE_EQ(r.orecall, 3.0 / 5);
    EXPECT_DOUBLE_EQ(r.of1, 3.0 / 5);
    EXPECT_DOUBLE_EQ(r.per_category[0].accuracy, 0.75);
    EXPECT_DOUBLE_EQ(r.per_category[2].accuracy, 0.5);
}

TEST(ClassificationSuite, UndefinedDenominatorsAreFlaggedZero) {
    const auto r = classification_suite({{0, 0}, {0, 1}}, {{0, 0}, {0, 1}});
    EXPECT_TRUE(r.per_category[0].precision_undefined);
    EXPECT_TRUE(r.per_category[0].recall_undefined);
    EXPECT_EQ(r.per_category[0].precision, 0.0);
    EXPECT_THROW((void)classification_suite({{0}}, {{0}}), DomainError);
    EXPECT_THROW((void)classification_suite({{0, 1}}, {{1}}), ShapeError);
}

TEST(ClassificationSuite, MatchesOracleOnRandomMatrices) {
    Rng rng(9);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t samples = 1 + rng.below(20), n = 1 + rng.below(14);
        std::vector<std::vector<int>> p(samples, std::vector<int>(n)), g = p;
        for (std::size_t s = 0; s < samples; ++s)
            for (std::size_t c = 0; c < n; ++c) {
                p[s][c] = rng.uniform() < 0.4;
                g[s][c] = rng.uniform() < 0.3;
            }
        g[0][0] = 1;
        const auto r = classification_suite(p, g);
        const auto ref = oracle::classification(p, g);
        EXPECT_NEAR(r.ap, static_cast<double>(ref.ap), 1e-12);
        EXPECT_NEAR(r.ar, static_cast<double>(ref.ar), 1e-12);
        EXPECT_NEAR(r.af1, static_cast<double>(ref.af1), 1e-12);
        EXPECT_NEAR(r.op, static_cast<double>(ref.op), 1e-12);
        EXPECT_NEAR(r.orecall, static_cast<double>(ref.orecall), 1e-12);
        EXPECT_NEAR(r.of1, static_cast<double>(ref.of1), 1e-12);
        for (std::size_t c = 0; c < n; ++c) {
            EXPECT_NEAR(r.per_category[c].accuracy, static_cast<double>(ref.accuracy[c]), 1e-12);
            EXPECT_DOUBLE_EQ(r.per_category[c].f1, harmonic_mean(r.per_category[c].precision, r.per_category[c].recall));
        }
        for (double v : {r.ap, r.ar, r.af1, r.op, r.orecall, r.of1}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}
