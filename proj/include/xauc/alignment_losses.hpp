#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace xauc {

// Global (cls) plus per-patch features of one image, row-major patches.
struct PatchFeatures {
    int n_patches = 0;
    int dim = 0;
    std::vector<double> cls;      // dim
    std::vector<double> patches;  // n_patches * dim

    const double* patch(int i) const { return patches.data() + static_cast<std::size_t>(i) * dim; }
    double* patch(int i) { return patches.data() + static_cast<std::size_t>(i) * dim; }
};

struct TextEmbeddings {
    std::vector<double> t_real;
    std::vector<double> t_fake;
};

struct LossWeights {
    double lambda1 = 0.3;
    double lambda2 = 0.2;
    double margin = 0.1;
};

struct LossBreakdown {
    double l_cls = 0.0;
    double l_rank_intra = 0.0;
    double l_rank_pair = 0.0;
    double l_total = 0.0;
    std::int64_t n_fake_images_used = 0;
    std::int64_t n_pairs_used = 0;
    std::int64_t n_skipped = 0;
};

// ---- scalar kernels -------------------------------------------------------

// Cosine similarity; inputs must have norm >= 1e-12.
double similarity(const std::vector<double>& f, const std::vector<double>& t);

// Softmax over the two prompt similarities, evaluated as the numerically
// stable logistic of (s_fake - s_real).
double forgery_prob(double s_fake, double s_real);

struct PatchScores {
    double global_p = 0.0;
    double global_s_fake = 0.0;
    double global_s_real = 0.0;
    std::vector<double> patch_p;
    std::vector<double> patch_s_fake;
    std::vector<double> patch_s_real;
};

PatchScores patch_scores(const PatchFeatures& features, const TextEmbeddings& text);

// ---- ranking and classification losses ------------------------------------

// One fake image's patch scores with its forged/background split.
struct IntraRankItem {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;  // 1 = forged patch, 0 = background
};

// One aligned real/fake pair; fake_labels select R_fake.
struct PairRankItem {
    std::vector<double> fake_scores;
    std::vector<double> real_scores;
    std::vector<std::uint8_t> fake_labels;
};

// value + gradient wrt each input score, plus usage counters. Images/pairs
// without both a forged and a comparison side are skipped, not fatal.
struct RankLossResult {
    double value = 0.0;
    std::vector<std::vector<double>> grads;       // matches scores layout
    std::vector<std::vector<double>> grads_real;  // pair loss only
    std::int64_t n_used = 0;
    std::int64_t n_skipped = 0;
};

// Mean over usable fake images of the mean pairwise hinge
// max(0, margin - (s_fg - s_bg)); subgradient 0 at the kink.
RankLossResult loss_rank_intra(const std::vector<IntraRankItem>& batch, double margin);

// Mean over usable pairs of the mean hinge over forged patch indices
// max(0, margin - (s_fake_i - s_real_i)).
RankLossResult loss_rank_pair(const std::vector<PairRankItem>& batch, double margin);

struct ClsLossResult {
    double value = 0.0;
    std::vector<double> grads;  // d value / d prob
};

// Mean binary cross-entropy with probabilities clamped to [eps, 1-eps],
// eps = 1e-7; gradient is 0 where the clamp is active.
ClsLossResult loss_cls(const std::vector<double>& probs, const std::vector<std::uint8_t>& labels);

// ---- composed objective ---------------------------------------------------

// One batch element: features, global label, patch labels (meaningful for
// fakes), and an optional index of the aligned real sample in the batch.
struct SampleInput {
    PatchFeatures features;
    std::uint8_t label = 0;  // 0 real, 1 fake
    std::vector<std::uint8_t> patch_labels;
    int pair_index = -1;
};

struct LossBatch {
    std::vector<SampleInput> samples;
    TextEmbeddings text;
};

struct SampleGrad {
    std::vector<double> d_cls;      // dim
    std::vector<double> d_patches;  // n_patches * dim
};

struct TotalLossResult {
    LossBreakdown breakdown;
    std::vector<SampleGrad> sample_grads;
    std::vector<double> d_t_real;
    std::vector<double> d_t_fake;
    std::vector<double> global_probs;  // per sample, for evaluation reuse
};

// The full objective l_cls + lambda1 * l_rank_intra + lambda2 * l_rank_pair
// with chain-rule gradients through the probability and cosine layers down
// to every feature coordinate and both text embeddings. The ranked quantity
// in both hinge losses is the patch forgery probability.
TotalLossResult total_loss(const LossBatch& batch, const LossWeights& weights);

}  // namespace xauc
