#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "xauc/alignment_losses.hpp"
#include "xauc/error.hpp"
#include "xauc/rng.hpp"

using namespace xauc;

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kFdTol = 1e-5;
constexpr double kKinkBand = 1e-3;  // instances keep every hinge slack this far from 0

// Relative error with a unit floor so near-zero gradients are judged absolutely.
double rel_err(double analytic, double fd) {
    const double denom = std::max({1.0, std::fabs(analytic), std::fabs(fd)});
    return std::fabs(analytic - fd) / denom;
}

std::vector<double> random_vec(Rng& rng, int d, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(d));
    for (double& x : v) x = lo + (hi - lo) * rng.next_double();
    return v;
}

PatchFeatures random_features(Rng& rng, int n_patches, int d) {
    PatchFeatures f;
    f.n_patches = n_patches;
    f.dim = d;
    f.cls = random_vec(rng, d);
    f.patches = random_vec(rng, n_patches * d);
    return f;
}

// Smallest |slack| over every hinge the batch induces; used to reject
// instances near a kink before running finite differences.
double min_slack_gap(const LossBatch& batch, double margin) {
    double gap = 1e9;
    std::vector<PatchScores> scores;
    for (const SampleInput& s : batch.samples) scores.push_back(patch_scores(s.features, batch.text));
    for (std::size_t k = 0; k < batch.samples.size(); ++k) {
        const SampleInput& s = batch.samples[k];
        if (!s.label) continue;
        for (std::size_t i = 0; i < s.patch_labels.size(); ++i) {
            if (!s.patch_labels[i]) continue;
            for (std::size_t j = 0; j < s.patch_labels.size(); ++j) {
                if (s.patch_labels[j]) continue;
                const double slack = margin - (scores[k].patch_p[i] - scores[k].patch_p[j]);
                gap = std::min(gap, std::fabs(slack));
            }
            if (s.pair_index >= 0) {
                const auto& real_p = scores[static_cast<std::size_t>(s.pair_index)].patch_p;
                const double slack = margin - (scores[k].patch_p[i] - real_p[i]);
                gap = std::min(gap, std::fabs(slack));
            }
        }
    }
    return gap;
}

// Batch of 6 samples (two real/fake pairs plus one loose sample of each
// label) regenerated until no hinge sits near its kink.
LossBatch smooth_batch(Rng& rng, int n_patches, int d, double margin) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        LossBatch batch;
        batch.text.t_real = random_vec(rng, d);
        batch.text.t_fake = random_vec(rng, d);
        for (int s = 0; s < 6; ++s) {
            SampleInput in;
            in.features = random_features(rng, n_patches, d);
            in.label = (s % 2 == 1) ? 1 : 0;
            if (in.label) {
                in.patch_labels.assign(static_cast<std::size_t>(n_patches), 0);
                // keep both a forged and a background patch present
                for (auto& l : in.patch_labels) l = rng.next_double() < 0.4 ? 1 : 0;
                in.patch_labels[0] = 1;
                in.patch_labels[1] = 0;
                if (s < 4) in.pair_index = s - 1;  // samples 1,3 pair with 0,2
            }
            batch.samples.push_back(std::move(in));
        }
        if (min_slack_gap(batch, margin) > kKinkBand) return batch;
    }
    FAIL("could not build a kink-free batch");
    return {};
}

double total_value(const LossBatch& batch, const LossWeights& w) {
    return total_loss(batch, w).breakdown.l_total;
}

}  // namespace

TEST_CASE("cosine similarity anchors") {
    CHECK(similarity({1.0, 0.0}, {1.0, 0.0}) == 1.0);
    CHECK(similarity({3.0, 4.0}, {3.0, 4.0}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(similarity({1.0, 0.0}, {0.0, 1.0}) == 0.0);
    CHECK(similarity({1.0, 0.0}, {1.0, 1.0}) ==
          doctest::Approx(0.7071067811865475).epsilon(1e-14));
    CHECK(similarity({1.0, 2.0}, {-1.0, -2.0}) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("cosine similarity rejects degenerate input") {
    CHECK_THROWS_AS(similarity({0.0, 0.0}, {1.0, 0.0}), Error);
    CHECK_THROWS_AS(similarity({1.0, 0.0}, {0.0, 0.0}), Error);
    CHECK_THROWS_AS(similarity({1.0}, {1.0, 0.0}), Error);
    CHECK_THROWS_AS(similarity({}, {}), Error);
    try {
        similarity({0.0, 0.0}, {1.0, 0.0});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ZeroNormVector);
    }
}

TEST_CASE("cosine similarity is exactly invariant to power-of-two scaling") {
    Rng rng(411);
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 2 + static_cast<int>(rng.next_below(6));
        const std::vector<double> f = random_vec(rng, d);
        const std::vector<double> t = random_vec(rng, d);
        std::vector<double> f2 = f;
        std::vector<double> t2 = t;
        for (double& x : f2) x *= 4.0;
        for (double& x : t2) x *= 0.5;
        CHECK(similarity(f2, t2) == similarity(f, t));
    }
}

TEST_CASE("forgery probability anchors") {
    CHECK(forgery_prob(0.0, 0.0) == 0.5);
    CHECK(forgery_prob(0.7, 0.7) == 0.5);
    CHECK(forgery_prob(1.0, 0.0) == doctest::Approx(0.7310585786300049).epsilon(1e-15));
    CHECK(std::fabs(forgery_prob(1.0, 0.0) - 0.73106) < 5e-6);
    // softmax form evaluated directly as an independent path
    const double naive = std::exp(0.3) / (std::exp(0.3) + std::exp(-0.2));
    CHECK(forgery_prob(0.3, -0.2) == doctest::Approx(naive).epsilon(1e-14));
    CHECK(forgery_prob(50.0, -50.0) > 1.0 - 1e-12);
    CHECK(forgery_prob(-50.0, 50.0) < 1e-12);
    CHECK(std::isfinite(forgery_prob(-700.0, 700.0)));
}

TEST_CASE("forgery probability complement identity") {
    Rng rng(412);
    for (int trial = 0; trial < 1000; ++trial) {
        const double a = -30.0 + 60.0 * rng.next_double();
        const double b = -30.0 + 60.0 * rng.next_double();
        CHECK(std::fabs(forgery_prob(a, b) + forgery_prob(b, a) - 1.0) <= 1e-15);
    }
}

TEST_CASE("forgery probability depends only on the similarity difference") {
    Rng rng(413);
    for (int trial = 0; trial < 500; ++trial) {
        // dyadic grid points keep the shifted subtraction exact in binary
        const double a = static_cast<double>(rng.next_below(16384)) / 1024.0 - 8.0;
        const double b = static_cast<double>(rng.next_below(16384)) / 1024.0 - 8.0;
        const double c = static_cast<double>(rng.next_below(4096)) / 1024.0 - 2.0;
        CHECK(forgery_prob(a + c, b + c) == forgery_prob(a, b));
    }
}

TEST_CASE("patch_scores matches a hand-evaluated two-patch table") {
    // unit vectors at 30 and 120 degrees against axis-aligned prompts
    PatchFeatures f;
    f.n_patches = 2;
    f.dim = 2;
    f.cls = {1.0, 1.0};
    f.patches = {0.8660254037844386, 0.5, -0.5, 0.8660254037844386};
    TextEmbeddings text{{0.0, 1.0}, {1.0, 0.0}};  // t_real up, t_fake right

    const PatchScores out = patch_scores(f, text);
    CHECK(out.global_p == 0.5);  // cls is equidistant from both prompts
    CHECK(out.patch_s_fake[0] == doctest::Approx(0.8660254037844387).epsilon(1e-14));
    CHECK(out.patch_s_real[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(out.patch_p[0] == doctest::Approx(0.5904982278815984).epsilon(1e-12));
    CHECK(out.patch_s_fake[1] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(out.patch_s_real[1] == doctest::Approx(0.8660254037844387).epsilon(1e-14));
    CHECK(out.patch_p[1] == doctest::Approx(0.20326276130179993).epsilon(1e-12));
    // independent softmax evaluation of the same similarities
    for (int i = 0; i < 2; ++i) {
        const double sf = out.patch_s_fake[static_cast<std::size_t>(i)];
        const double sr = out.patch_s_real[static_cast<std::size_t>(i)];
        const double naive = std::exp(sf) / (std::exp(sf) + std::exp(sr));
        CHECK(out.patch_p[static_cast<std::size_t>(i)] == doctest::Approx(naive).epsilon(1e-14));
    }
}

TEST_CASE("patch_scores degenerate prompt and patch cases") {
    Rng rng(414);
    const int d = 6;
    PatchFeatures f = random_features(rng, 4, d);

    SUBCASE("patches equal to cls reproduce the global probability") {
        for (int i = 0; i < f.n_patches; ++i) {
            for (int k = 0; k < d; ++k) f.patch(i)[k] = f.cls[static_cast<std::size_t>(k)];
        }
        TextEmbeddings text{random_vec(rng, d), random_vec(rng, d)};
        const PatchScores out = patch_scores(f, text);
        for (double p : out.patch_p) CHECK(p == out.global_p);
    }
    SUBCASE("identical prompts give probability one half everywhere") {
        const std::vector<double> t = random_vec(rng, d);
        const PatchScores out = patch_scores(f, {t, t});
        CHECK(out.global_p == 0.5);
        for (double p : out.patch_p) CHECK(p == 0.5);
    }
    SUBCASE("zero-norm patch is reported with its index") {
        for (int k = 0; k < d; ++k) f.patch(2)[k] = 0.0;
        TextEmbeddings text{random_vec(rng, d), random_vec(rng, d)};
        try {
            patch_scores(f, text);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ZeroNormVector);
            CHECK(std::string(e.what()).find("index 2") != std::string::npos);
        }
    }
    SUBCASE("dimension mismatches rejected") {
        TextEmbeddings text{random_vec(rng, d), random_vec(rng, d + 1)};
        CHECK_THROWS_AS(patch_scores(f, text), Error);
        TextEmbeddings short_text{random_vec(rng, d - 1), random_vec(rng, d - 1)};
        CHECK_THROWS_AS(patch_scores(f, short_text), Error);
    }
}

TEST_CASE("intra-image ranking loss anchor") {
    // one image, forged {0.5} vs background {0.45, 0.6}, margin 0.1:
    // hinges 0.05 and 0.2 average to 0.125
    IntraRankItem item;
    item.scores = {0.5, 0.45, 0.6};
    item.labels = {1, 0, 0};
    const RankLossResult out = loss_rank_intra({item}, 0.1);
    CHECK(out.value == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(out.n_used == 1);
    CHECK(out.n_skipped == 0);
    // both hinges active: d/ds_fg = -2/2, d/ds_bg = +1/2 each
    CHECK(out.grads[0][0] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(out.grads[0][1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out.grads[0][2] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("intra-image ranking loss satisfied and skipped cases") {
    SUBCASE("all margins satisfied gives zero loss and zero gradient") {
        IntraRankItem item;
        item.scores = {0.9, 0.85, 0.2, 0.1};
        item.labels = {1, 1, 0, 0};
        const RankLossResult out = loss_rank_intra({item}, 0.1);
        CHECK(out.value == 0.0);
        for (double g : out.grads[0]) CHECK(g == 0.0);
        CHECK(out.n_used == 1);
    }
    SUBCASE("exactly at the margin sits on the kink with zero subgradient") {
        IntraRankItem item;
        item.scores = {0.625, 0.5};  // dyadic so the slack is exactly zero
        item.labels = {1, 0};
        const RankLossResult out = loss_rank_intra({item}, 0.125);
        CHECK(out.value == 0.0);
        CHECK(out.grads[0][0] == 0.0);
        CHECK(out.grads[0][1] == 0.0);
    }
    SUBCASE("single-class images are skipped, not fatal") {
        IntraRankItem all_fg{{0.5, 0.6}, {1, 1}};
        IntraRankItem all_bg{{0.5, 0.6}, {0, 0}};
        IntraRankItem usable{{0.5, 0.45, 0.6}, {1, 0, 0}};
        const RankLossResult out = loss_rank_intra({all_fg, usable, all_bg}, 0.1);
        CHECK(out.value == doctest::Approx(0.125).epsilon(1e-15));
        CHECK(out.n_used == 1);
        CHECK(out.n_skipped == 2);
        for (double g : out.grads[0]) CHECK(g == 0.0);
        for (double g : out.grads[2]) CHECK(g == 0.0);
    }
    SUBCASE("everything skipped reports zero with counters, no throw") {
        IntraRankItem all_fg{{0.5}, {1}};
        const RankLossResult out = loss_rank_intra({all_fg}, 0.1);
        CHECK(out.value == 0.0);
        CHECK(out.n_used == 0);
        CHECK(out.n_skipped == 1);
    }
    SUBCASE("mean over images averages per-image means") {
        IntraRankItem a{{0.5, 0.45, 0.6}, {1, 0, 0}};  // 0.125
        IntraRankItem b{{0.7, 0.68}, {1, 0}};          // hinge 0.08
        const RankLossResult out = loss_rank_intra({a, b}, 0.1);
        CHECK(out.value == doctest::Approx((0.125 + 0.08) / 2.0).epsilon(1e-12));
        CHECK(out.n_used == 2);
    }
    SUBCASE("score/label length mismatch is rejected") {
        IntraRankItem bad{{0.5, 0.6}, {1}};
        CHECK_THROWS_AS(loss_rank_intra({bad}, 0.1), Error);
    }
}

TEST_CASE("paired ranking loss anchor and degenerate cases") {
    SUBCASE("single forged patch anchor") {
        PairRankItem item;
        item.fake_scores = {0.6, 0.3};
        item.real_scores = {0.55, 0.9};
        item.fake_labels = {1, 0};
        const RankLossResult out = loss_rank_pair({item}, 0.1);
        CHECK(out.value == doctest::Approx(0.05).epsilon(1e-15));
        CHECK(out.n_used == 1);
        CHECK(out.grads[0][0] == doctest::Approx(-1.0).epsilon(1e-15));
        CHECK(out.grads[0][1] == 0.0);  // background patch never enters
        CHECK(out.grads_real[0][0] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(out.grads_real[0][1] == 0.0);
    }
    SUBCASE("fake ahead of real by the margin everywhere gives zero") {
        PairRankItem item;
        item.fake_scores = {0.8, 0.7};
        item.real_scores = {0.6, 0.55};
        item.fake_labels = {1, 1};
        const RankLossResult out = loss_rank_pair({item}, 0.1);
        CHECK(out.value == 0.0);
        for (double g : out.grads[0]) CHECK(g == 0.0);
        for (double g : out.grads_real[0]) CHECK(g == 0.0);
    }
    SUBCASE("empty forged set in the only pair skips it") {
        PairRankItem item;
        item.fake_scores = {0.6};
        item.real_scores = {0.5};
        item.fake_labels = {0};
        const RankLossResult out = loss_rank_pair({item}, 0.1);
        CHECK(out.value == 0.0);
        CHECK(out.n_used == 0);
        CHECK(out.n_skipped == 1);
    }
    SUBCASE("inconsistent pair sizes rejected") {
        PairRankItem bad;
        bad.fake_scores = {0.5, 0.6};
        bad.real_scores = {0.5};
        bad.fake_labels = {1, 0};
        CHECK_THROWS_AS(loss_rank_pair({bad}, 0.1), Error);
    }
}

TEST_CASE("hinge losses are non-negative and monotone in their scores") {
    Rng rng(415);
    for (int trial = 0; trial < 200; ++trial) {
        IntraRankItem item;
        const int n = 3 + static_cast<int>(rng.next_below(6));
        item.scores = random_vec(rng, n, 0.0, 1.0);
        item.labels.assign(static_cast<std::size_t>(n), 0);
        for (auto& l : item.labels) l = rng.next_double() < 0.5 ? 1 : 0;
        item.labels[0] = 1;
        item.labels[1] = 0;
        const double base = loss_rank_intra({item}, 0.1).value;
        CHECK(base >= 0.0);

        IntraRankItem up = item;
        const std::size_t fg = 0;
        up.scores[fg] += 0.05;  // raising a forged score never increases the loss
        CHECK(loss_rank_intra({up}, 0.1).value <= base + 1e-15);

        IntraRankItem down = item;
        down.scores[1] += 0.05;  // raising a background score never decreases it
        CHECK(loss_rank_intra({down}, 0.1).value >= base - 1e-15);
    }
}

TEST_CASE("ranking loss gradients match central finite differences") {
    Rng rng(416);
    int done = 0;
    while (done < 100) {
        const int n = 4 + static_cast<int>(rng.next_below(13));
        std::vector<IntraRankItem> batch;
        for (int img = 0; img < 2; ++img) {
            IntraRankItem item;
            item.scores = random_vec(rng, n, 0.0, 1.0);
            item.labels.assign(static_cast<std::size_t>(n), 0);
            for (auto& l : item.labels) l = rng.next_double() < 0.5 ? 1 : 0;
            item.labels[0] = 1;
            item.labels[1] = 0;
            batch.push_back(std::move(item));
        }
        const double margin = 0.1;
        double gap = 1e9;
        for (const IntraRankItem& item : batch) {
            for (std::size_t i = 0; i < item.labels.size(); ++i) {
                if (!item.labels[i]) continue;
                for (std::size_t j = 0; j < item.labels.size(); ++j) {
                    if (item.labels[j]) continue;
                    gap = std::min(gap,
                                   std::fabs(margin - (item.scores[i] - item.scores[j])));
                }
            }
        }
        if (gap <= kKinkBand) continue;  // resample away from the kink
        ++done;

        const RankLossResult out = loss_rank_intra(batch, margin);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            for (std::size_t i = 0; i < batch[b].scores.size(); ++i) {
                std::vector<IntraRankItem> plus = batch;
                std::vector<IntraRankItem> minus = batch;
                plus[b].scores[i] += kFdStep;
                minus[b].scores[i] -= kFdStep;
                const double fd = (loss_rank_intra(plus, margin).value -
                                   loss_rank_intra(minus, margin).value) /
                                  (2.0 * kFdStep);
                CHECK(rel_err(out.grads[b][i], fd) < kFdTol);
            }
        }
    }
}

TEST_CASE("paired loss gradients match central finite differences") {
    Rng rng(417);
    int done = 0;
    while (done < 100) {
        const int n = 4 + static_cast<int>(rng.next_below(13));
        PairRankItem item;
        item.fake_scores = random_vec(rng, n, 0.0, 1.0);
        item.real_scores = random_vec(rng, n, 0.0, 1.0);
        item.fake_labels.assign(static_cast<std::size_t>(n), 0);
        for (auto& l : item.fake_labels) l = rng.next_double() < 0.5 ? 1 : 0;
        item.fake_labels[0] = 1;
        const double margin = 0.1;
        double gap = 1e9;
        for (std::size_t i = 0; i < item.fake_labels.size(); ++i) {
            if (!item.fake_labels[i]) continue;
            gap = std::min(gap,
                           std::fabs(margin - (item.fake_scores[i] - item.real_scores[i])));
        }
        if (gap <= kKinkBand) continue;
        ++done;

        const std::vector<PairRankItem> batch{item};
        const RankLossResult out = loss_rank_pair(batch, margin);
        for (std::size_t i = 0; i < item.fake_scores.size(); ++i) {
            std::vector<PairRankItem> plus = batch;
            std::vector<PairRankItem> minus = batch;
            plus[0].fake_scores[i] += kFdStep;
            minus[0].fake_scores[i] -= kFdStep;
            double fd = (loss_rank_pair(plus, margin).value -
                         loss_rank_pair(minus, margin).value) /
                        (2.0 * kFdStep);
            CHECK(rel_err(out.grads[0][i], fd) < kFdTol);

            plus = batch;
            minus = batch;
            plus[0].real_scores[i] += kFdStep;
            minus[0].real_scores[i] -= kFdStep;
            fd = (loss_rank_pair(plus, margin).value - loss_rank_pair(minus, margin).value) /
                 (2.0 * kFdStep);
            CHECK(rel_err(out.grads_real[0][i], fd) < kFdTol);
        }
    }
}

TEST_CASE("classification loss anchors") {
    CHECK(loss_cls({0.5, 0.5, 0.5}, {1, 0, 1}).value ==
          doctest::Approx(0.6931471805599453).epsilon(1e-15));
    // N=2 worked case: -(ln 0.9 + ln 0.8)/2
    CHECK(loss_cls({0.9, 0.2}, {1, 0}).value ==
          doctest::Approx(0.164252033486018).epsilon(1e-14));
    CHECK(std::fabs(loss_cls({0.9, 0.2}, {1, 0}).value - 0.16425) < 5e-6);
    // perfect predictions bottom out at the clamp floor
    CHECK(loss_cls({1.0, 0.0}, {1, 0}).value <= 1.1e-7);
    CHECK(loss_cls({1.0, 0.0}, {1, 0}).value > 0.0);
}

TEST_CASE("classification loss gradient and clamping") {
    SUBCASE("interior gradient matches the analytic form and finite differences") {
        Rng rng(418);
        for (int trial = 0; trial < 100; ++trial) {
            const int n = 1 + static_cast<int>(rng.next_below(8));
            std::vector<double> probs(static_cast<std::size_t>(n));
            std::vector<std::uint8_t> labels(static_cast<std::size_t>(n));
            for (int k = 0; k < n; ++k) {
                probs[static_cast<std::size_t>(k)] = 0.05 + 0.9 * rng.next_double();
                labels[static_cast<std::size_t>(k)] = rng.next_double() < 0.5 ? 1 : 0;
            }
            const ClsLossResult out = loss_cls(probs, labels);
            for (int k = 0; k < n; ++k) {
                std::vector<double> plus = probs;
                std::vector<double> minus = probs;
                plus[static_cast<std::size_t>(k)] += kFdStep;
                minus[static_cast<std::size_t>(k)] -= kFdStep;
                const double fd =
                    (loss_cls(plus, labels).value - loss_cls(minus, labels).value) /
                    (2.0 * kFdStep);
                CHECK(rel_err(out.grads[static_cast<std::size_t>(k)], fd) < kFdTol);
            }
        }
    }
    SUBCASE("gradient is zero where the clamp is active") {
        const ClsLossResult out = loss_cls({0.0, 1.0, 0.5}, {1, 0, 1});
        CHECK(out.grads[0] == 0.0);
        CHECK(out.grads[1] == 0.0);
        CHECK(out.grads[2] != 0.0);
    }
    SUBCASE("empty batch rejected") {
        try {
            loss_cls({}, {});
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::EmptyBatch);
        }
        CHECK_THROWS_AS(loss_cls({0.5}, {1, 0}), Error);
    }
}

TEST_CASE("total loss composition and weights") {
    Rng rng(419);
    const int d = 8;
    const int P = 16;
    LossWeights w;  // defaults 0.3 / 0.2 / 0.1
    const LossBatch batch = smooth_batch(rng, P, d, w.margin);

    SUBCASE("weighted recomposition identity") {
        const TotalLossResult out = total_loss(batch, w);
        const LossBreakdown& b = out.breakdown;
        CHECK(std::fabs(b.l_total -
                        (b.l_cls + w.lambda1 * b.l_rank_intra + w.lambda2 * b.l_rank_pair)) <=
              1e-12);
        CHECK(b.n_fake_images_used == 3);
        CHECK(b.n_pairs_used == 2);
        CHECK(b.n_skipped == 0);
        CHECK(out.global_probs.size() == batch.samples.size());
        // weighted-sum arithmetic on representative component values
        CHECK(0.5 + w.lambda1 * 0.2 + w.lambda2 * 0.1 == doctest::Approx(0.58).epsilon(1e-15));
    }
    SUBCASE("zero weights reduce the total to the classification term") {
        LossWeights off;
        off.lambda1 = 0.0;
        off.lambda2 = 0.0;
        const TotalLossResult out = total_loss(batch, off);
        CHECK(out.breakdown.l_total == out.breakdown.l_cls);
    }
    SUBCASE("deterministic across repeated evaluation") {
        const TotalLossResult a = total_loss(batch, w);
        const TotalLossResult b = total_loss(batch, w);
        CHECK(a.breakdown.l_total == b.breakdown.l_total);
        for (std::size_t k = 0; k < a.sample_grads.size(); ++k) {
            CHECK(a.sample_grads[k].d_cls == b.sample_grads[k].d_cls);
            CHECK(a.sample_grads[k].d_patches == b.sample_grads[k].d_patches);
        }
        CHECK(a.d_t_real == b.d_t_real);
        CHECK(a.d_t_fake == b.d_t_fake);
    }
    SUBCASE("scaling every vector by a power of two changes nothing") {
        LossBatch scaled = batch;
        for (SampleInput& s : scaled.samples) {
            for (double& x : s.features.cls) x *= 2.0;
            for (double& x : s.features.patches) x *= 2.0;
        }
        for (double& x : scaled.text.t_real) x *= 2.0;
        for (double& x : scaled.text.t_fake) x *= 2.0;
        const TotalLossResult a = total_loss(batch, w);
        const TotalLossResult b = total_loss(scaled, w);
        CHECK(a.breakdown.l_total == b.breakdown.l_total);
        CHECK(a.breakdown.l_cls == b.breakdown.l_cls);
        CHECK(a.breakdown.l_rank_intra == b.breakdown.l_rank_intra);
        CHECK(a.breakdown.l_rank_pair == b.breakdown.l_rank_pair);
        CHECK(a.global_probs == b.global_probs);
        // cosine gradients carry a 1/norm factor, so they halve exactly
        for (std::size_t k = 0; k < a.sample_grads.size(); ++k) {
            for (std::size_t c = 0; c < a.sample_grads[k].d_cls.size(); ++c) {
                CHECK(2.0 * b.sample_grads[k].d_cls[c] == a.sample_grads[k].d_cls[c]);
            }
        }
    }
    SUBCASE("arbitrary positive scale changes nothing within round-off") {
        LossBatch scaled = batch;
        const double c = 3.7;
        for (SampleInput& s : scaled.samples) {
            for (double& x : s.features.cls) x *= c;
            for (double& x : s.features.patches) x *= c;
        }
        for (double& x : scaled.text.t_real) x *= c;
        for (double& x : scaled.text.t_fake) x *= c;
        CHECK(total_loss(scaled, w).breakdown.l_total ==
              doctest::Approx(total_loss(batch, w).breakdown.l_total).epsilon(1e-12));
    }
    SUBCASE("real samples untouched by any pair get no patch gradient") {
        LossBatch loose = batch;
        loose.samples[4].pair_index = -1;  // ensure sample 4 stays unpaired
        const TotalLossResult out = total_loss(loose, w);
        for (double g : out.sample_grads[4].d_patches) CHECK(g == 0.0);
        bool any = false;
        for (double g : out.sample_grads[4].d_cls) any = any || g != 0.0;
        CHECK(any);  // classification still reaches its cls feature
    }
}

TEST_CASE("total loss input validation") {
    Rng rng(420);
    const int d = 4;
    LossWeights w;
    LossBatch batch;
    batch.text.t_real = random_vec(rng, d);
    batch.text.t_fake = random_vec(rng, d);
    SampleInput real;
    real.features = random_features(rng, 3, d);
    real.label = 0;
    SampleInput fake;
    fake.features = random_features(rng, 3, d);
    fake.label = 1;
    fake.patch_labels = {1, 0, 1};
    fake.pair_index = 0;
    batch.samples = {real, fake};

    SUBCASE("well-formed batch is accepted") {
        CHECK_NOTHROW(total_loss(batch, w));
    }
    SUBCASE("empty batch") {
        LossBatch empty;
        empty.text = batch.text;
        CHECK_THROWS_AS(total_loss(empty, w), Error);
    }
    SUBCASE("text dimension mismatch") {
        batch.text.t_fake = random_vec(rng, d + 1);
        CHECK_THROWS_AS(total_loss(batch, w), Error);
    }
    SUBCASE("feature dimension mismatch") {
        batch.samples[0].features.cls.push_back(0.5);
        CHECK_THROWS_AS(total_loss(batch, w), Error);
    }
    SUBCASE("patch label count mismatch on a fake") {
        batch.samples[1].patch_labels = {1, 0};
        CHECK_THROWS_AS(total_loss(batch, w), Error);
    }
    SUBCASE("pair index out of range") {
        batch.samples[1].pair_index = 7;
        CHECK_THROWS_AS(total_loss(batch, w), Error);
    }
    SUBCASE("paired samples must share a patch grid") {
        batch.samples[0].features = random_features(rng, 5, d);
        CHECK_THROWS_AS(total_loss(batch, w), Error);
    }
    SUBCASE("all ranking inputs skipped still yields a valid breakdown") {
        batch.samples[1].patch_labels = {0, 0, 0};
        const TotalLossResult out = total_loss(batch, w);
        CHECK(out.breakdown.l_rank_intra == 0.0);
        CHECK(out.breakdown.l_rank_pair == 0.0);
        CHECK(out.breakdown.l_total == out.breakdown.l_cls);
        CHECK(out.breakdown.n_fake_images_used == 0);
        CHECK(out.breakdown.n_pairs_used == 0);
        CHECK(out.breakdown.n_skipped == 2);
    }
}

TEST_CASE("full-chain gradients match central finite differences") {
    Rng rng(421);
    const int d = 8;
    const int P = 16;
    LossWeights w;
    for (int instance = 0; instance < 100; ++instance) {
        LossBatch batch = smooth_batch(rng, P, d, w.margin);
        const TotalLossResult out = total_loss(batch, w);

        // every feature coordinate of every sample
        for (std::size_t k = 0; k < batch.samples.size(); ++k) {
            PatchFeatures& f = batch.samples[k].features;
            for (std::size_t c = 0; c < f.cls.size(); ++c) {
                const double keep = f.cls[c];
                f.cls[c] = keep + kFdStep;
                const double up = total_value(batch, w);
                f.cls[c] = keep - kFdStep;
                const double down = total_value(batch, w);
                f.cls[c] = keep;
                CHECK(rel_err(out.sample_grads[k].d_cls[c], (up - down) / (2.0 * kFdStep)) <
                      kFdTol);
            }
            for (std::size_t c = 0; c < f.patches.size(); ++c) {
                const double keep = f.patches[c];
                f.patches[c] = keep + kFdStep;
                const double up = total_value(batch, w);
                f.patches[c] = keep - kFdStep;
                const double down = total_value(batch, w);
                f.patches[c] = keep;
                CHECK(rel_err(out.sample_grads[k].d_patches[c],
                              (up - down) / (2.0 * kFdStep)) < kFdTol);
            }
        }
        // both text embeddings
        for (std::size_t c = 0; c < batch.text.t_real.size(); ++c) {
            double keep = batch.text.t_real[c];
            batch.text.t_real[c] = keep + kFdStep;
            const double up = total_value(batch, w);
            batch.text.t_real[c] = keep - kFdStep;
            const double down = total_value(batch, w);
            batch.text.t_real[c] = keep;
            CHECK(rel_err(out.d_t_real[c], (up - down) / (2.0 * kFdStep)) < kFdTol);

            keep = batch.text.t_fake[c];
            batch.text.t_fake[c] = keep + kFdStep;
            const double up2 = total_value(batch, w);
            batch.text.t_fake[c] = keep - kFdStep;
            const double down2 = total_value(batch, w);
            batch.text.t_fake[c] = keep;
            CHECK(rel_err(out.d_t_fake[c], (up2 - down2) / (2.0 * kFdStep)) < kFdTol);
        }
    }
}
