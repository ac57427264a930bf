#include "xauc/alignment_losses.hpp"

#include <algorithm>
#include <cmath>

#include "xauc/error.hpp"

namespace xauc {

namespace {

constexpr double kNormFloor = 1e-12;
constexpr double kProbEps = 1e-7;

double norm_of(const std::vector<double>& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    return std::sqrt(sq);
}

double dot(const double* a, const double* b, int d) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += a[k] * b[k];
    return s;
}

double norm_of(const double* v, int d) {
    return std::sqrt(dot(v, v, d));
}

// cosine + the pieces its gradient needs
struct Cos {
    double value;
    double nf;
    double nt;
};

Cos cosine(const double* f, const double* t, int d, const char* what) {
    Cos c;
    c.nf = norm_of(f, d);
    c.nt = norm_of(t, d);
    if (c.nf < kNormFloor || c.nt < kNormFloor) {
        throw Error(ErrorKind::ZeroNormVector,
                    std::string("zero-norm vector in cosine similarity (") + what + ")");
    }
    c.value = dot(f, t, d) / (c.nf * c.nt);
    return c;
}

// d cos / d f_k = t_k / (|f||t|) - cos * f_k / |f|^2, accumulated scaled by w
void add_cos_grad_f(std::vector<double>& acc, const double* f, const double* t, const Cos& c,
                    int d, double w) {
    const double inv = 1.0 / (c.nf * c.nt);
    const double self = c.value / (c.nf * c.nf);
    for (int k = 0; k < d; ++k) {
        acc[static_cast<std::size_t>(k)] += w * (t[k] * inv - self * f[k]);
    }
}

void add_cos_grad_t(std::vector<double>& acc, const double* f, const double* t, const Cos& c,
                    int d, double w) {
    const double inv = 1.0 / (c.nf * c.nt);
    const double self = c.value / (c.nt * c.nt);
    for (int k = 0; k < d; ++k) {
        acc[static_cast<std::size_t>(k)] += w * (f[k] * inv - self * t[k]);
    }
}

double stable_logistic(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void check_features(const PatchFeatures& f, int dim) {
    if (f.dim != dim || static_cast<int>(f.cls.size()) != dim ||
        static_cast<int>(f.patches.size()) != f.n_patches * dim) {
        throw Error(ErrorKind::DimMismatch, "feature dimensions are inconsistent");
    }
}

}  // namespace

double similarity(const std::vector<double>& f, const std::vector<double>& t) {
    if (f.size() != t.size() || f.empty()) {
        throw Error(ErrorKind::DimMismatch, "similarity requires equal nonzero dimensions");
    }
    return cosine(f.data(), t.data(), static_cast<int>(f.size()), "similarity").value;
}

double forgery_prob(double s_fake, double s_real) {
    return stable_logistic(s_fake - s_real);
}

PatchScores patch_scores(const PatchFeatures& features, const TextEmbeddings& text) {
    const int d = features.dim;
    if (static_cast<int>(text.t_real.size()) != d || static_cast<int>(text.t_fake.size()) != d) {
        throw Error(ErrorKind::DimMismatch, "text embedding dimension mismatch");
    }
    check_features(features, d);
    if (norm_of(text.t_real) < kNormFloor || norm_of(text.t_fake) < kNormFloor) {
        throw Error(ErrorKind::ZeroNormVector, "zero-norm text embedding");
    }
    PatchScores out;
    const Cos gf = cosine(features.cls.data(), text.t_fake.data(), d, "cls vs t_fake");
    const Cos gr = cosine(features.cls.data(), text.t_real.data(), d, "cls vs t_real");
    out.global_s_fake = gf.value;
    out.global_s_real = gr.value;
    out.global_p = forgery_prob(gf.value, gr.value);
    out.patch_p.resize(static_cast<std::size_t>(features.n_patches));
    out.patch_s_fake.resize(static_cast<std::size_t>(features.n_patches));
    out.patch_s_real.resize(static_cast<std::size_t>(features.n_patches));
    for (int i = 0; i < features.n_patches; ++i) {
        const double* f = features.patch(i);
        if (norm_of(f, d) < kNormFloor) {
            throw Error(ErrorKind::ZeroNormVector,
                        "zero-norm patch feature at index " + std::to_string(i));
        }
        const double sf = cosine(f, text.t_fake.data(), d, "patch vs t_fake").value;
        const double sr = cosine(f, text.t_real.data(), d, "patch vs t_real").value;
        out.patch_s_fake[static_cast<std::size_t>(i)] = sf;
        out.patch_s_real[static_cast<std::size_t>(i)] = sr;
        out.patch_p[static_cast<std::size_t>(i)] = forgery_prob(sf, sr);
    }
    return out;
}

RankLossResult loss_rank_intra(const std::vector<IntraRankItem>& batch, double margin) {
    RankLossResult out;
    out.grads.resize(batch.size());
    std::vector<double> image_values;
    std::vector<std::size_t> used_indices;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const IntraRankItem& item = batch[b];
        if (item.scores.size() != item.labels.size()) {
            throw Error(ErrorKind::DimMismatch, "score/label count mismatch in rank batch");
        }
        out.grads[b].assign(item.scores.size(), 0.0);
        std::vector<std::size_t> fg;
        std::vector<std::size_t> bg;
        for (std::size_t i = 0; i < item.labels.size(); ++i) {
            (item.labels[i] ? fg : bg).push_back(i);
        }
        if (fg.empty() || bg.empty()) {
            ++out.n_skipped;
            continue;
        }
        const double pair_count = static_cast<double>(fg.size() * bg.size());
        double value = 0.0;
        for (std::size_t i : fg) {
            for (std::size_t j : bg) {
                const double slack = margin - (item.scores[i] - item.scores[j]);
                if (slack > 0.0) {  // strict: subgradient at the kink is 0
                    value += slack;
                    out.grads[b][i] -= 1.0 / pair_count;
                    out.grads[b][j] += 1.0 / pair_count;
                }
            }
        }
        image_values.push_back(value / pair_count);
        used_indices.push_back(b);
        ++out.n_used;
    }
    if (out.n_used == 0) {
        out.value = 0.0;  // NoUsableFakeImages: reported via counters, not a throw
        return out;
    }
    const double scale = 1.0 / static_cast<double>(out.n_used);
    double total = 0.0;
    for (double v : image_values) total += v;
    out.value = total * scale;
    for (std::size_t b : used_indices) {
        for (double& g : out.grads[b]) g *= scale;
    }
    return out;
}

RankLossResult loss_rank_pair(const std::vector<PairRankItem>& batch, double margin) {
    RankLossResult out;
    out.grads.resize(batch.size());
    out.grads_real.resize(batch.size());
    std::vector<double> pair_values;
    std::vector<std::size_t> used_indices;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const PairRankItem& item = batch[b];
        if (item.fake_scores.size() != item.real_scores.size() ||
            item.fake_scores.size() != item.fake_labels.size()) {
            throw Error(ErrorKind::DimMismatch, "pair batch sizes are inconsistent");
        }
        out.grads[b].assign(item.fake_scores.size(), 0.0);
        out.grads_real[b].assign(item.real_scores.size(), 0.0);
        std::vector<std::size_t> forged;
        for (std::size_t i = 0; i < item.fake_labels.size(); ++i) {
            if (item.fake_labels[i]) forged.push_back(i);
        }
        if (forged.empty()) {
            ++out.n_skipped;
            continue;
        }
        const double count = static_cast<double>(forged.size());
        double value = 0.0;
        for (std::size_t i : forged) {
            const double slack = margin - (item.fake_scores[i] - item.real_scores[i]);
            if (slack > 0.0) {
                value += slack;
                out.grads[b][i] -= 1.0 / count;
                out.grads_real[b][i] += 1.0 / count;
            }
        }
        pair_values.push_back(value / count);
        used_indices.push_back(b);
        ++out.n_used;
    }
    if (out.n_used == 0) {
        out.value = 0.0;  // NoUsablePairs: reported via counters
        return out;
    }
    const double scale = 1.0 / static_cast<double>(out.n_used);
    double total = 0.0;
    for (double v : pair_values) total += v;
    out.value = total * scale;
    for (std::size_t b : used_indices) {
        for (double& g : out.grads[b]) g *= scale;
        for (double& g : out.grads_real[b]) g *= scale;
    }
    return out;
}

ClsLossResult loss_cls(const std::vector<double>& probs, const std::vector<std::uint8_t>& labels) {
    if (probs.empty()) {
        throw Error(ErrorKind::EmptyBatch, "classification loss needs at least one sample");
    }
    if (probs.size() != labels.size()) {
        throw Error(ErrorKind::DimMismatch, "probability/label count mismatch");
    }
    ClsLossResult out;
    out.grads.assign(probs.size(), 0.0);
    const double n = static_cast<double>(probs.size());
    double total = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        const double raw = probs[k];
        const double p = std::clamp(raw, kProbEps, 1.0 - kProbEps);
        const double y = labels[k] ? 1.0 : 0.0;
        total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        if (raw > kProbEps && raw < 1.0 - kProbEps) {
            out.grads[k] = -(y / p - (1.0 - y) / (1.0 - p)) / n;
        }
    }
    out.value = total / n;
    return out;
}

TotalLossResult total_loss(const LossBatch& batch, const LossWeights& weights) {
    if (batch.samples.empty()) {
        throw Error(ErrorKind::EmptyBatch, "loss batch is empty");
    }
    const int d = static_cast<int>(batch.text.t_real.size());
    if (static_cast<int>(batch.text.t_fake.size()) != d || d == 0) {
        throw Error(ErrorKind::DimMismatch, "text embeddings must share one nonzero dimension");
    }

    TotalLossResult out;
    out.sample_grads.resize(batch.samples.size());
    out.d_t_real.assign(static_cast<std::size_t>(d), 0.0);
    out.d_t_fake.assign(static_cast<std::size_t>(d), 0.0);

    // forward: per-sample scores
    std::vector<PatchScores> scores;
    scores.reserve(batch.samples.size());
    std::vector<double> global_probs;
    std::vector<std::uint8_t> global_labels;
    for (const SampleInput& s : batch.samples) {
        check_features(s.features, d);
        if (s.label &&
            s.patch_labels.size() != static_cast<std::size_t>(s.features.n_patches)) {
            throw Error(ErrorKind::DimMismatch, "patch label count must match patch count");
        }
        if (s.pair_index >= 0) {
            if (static_cast<std::size_t>(s.pair_index) >= batch.samples.size()) {
                throw Error(ErrorKind::DimMismatch, "pair index out of range");
            }
            const SampleInput& mate = batch.samples[static_cast<std::size_t>(s.pair_index)];
            if (mate.features.n_patches != s.features.n_patches) {
                throw Error(ErrorKind::DimMismatch, "paired samples must share the patch grid");
            }
        }
        scores.push_back(patch_scores(s.features, batch.text));
        global_probs.push_back(scores.back().global_p);
        global_labels.push_back(s.label);
    }
    out.global_probs = global_probs;

    // component losses on the probability scale
    const ClsLossResult cls = loss_cls(global_probs, global_labels);

    std::vector<IntraRankItem> intra_batch;
    std::vector<std::size_t> intra_owner;
    for (std::size_t k = 0; k < batch.samples.size(); ++k) {
        if (!batch.samples[k].label) continue;
        IntraRankItem item;
        item.scores = scores[k].patch_p;
        item.labels = batch.samples[k].patch_labels;
        intra_batch.push_back(std::move(item));
        intra_owner.push_back(k);
    }
    const RankLossResult intra = loss_rank_intra(intra_batch, weights.margin);

    std::vector<PairRankItem> pair_batch;
    std::vector<std::pair<std::size_t, std::size_t>> pair_owner;  // (fake, real)
    for (std::size_t k = 0; k < batch.samples.size(); ++k) {
        const SampleInput& s = batch.samples[k];
        if (!s.label || s.pair_index < 0) continue;
        PairRankItem item;
        item.fake_scores = scores[k].patch_p;
        item.real_scores = scores[static_cast<std::size_t>(s.pair_index)].patch_p;
        item.fake_labels = s.patch_labels;
        pair_batch.push_back(std::move(item));
        pair_owner.push_back({k, static_cast<std::size_t>(s.pair_index)});
    }
    const RankLossResult pair = loss_rank_pair(pair_batch, weights.margin);

    out.breakdown.l_cls = cls.value;
    out.breakdown.l_rank_intra = intra.value;
    out.breakdown.l_rank_pair = pair.value;
    out.breakdown.l_total =
        cls.value + weights.lambda1 * intra.value + weights.lambda2 * pair.value;
    out.breakdown.n_fake_images_used = intra.n_used;
    out.breakdown.n_pairs_used = pair.n_used;
    out.breakdown.n_skipped = intra.n_skipped + pair.n_skipped;

    // backward: collect d loss / d p for every probability node, then chain
    // through the logistic and both cosines.
    std::vector<std::vector<double>> d_patch_p(batch.samples.size());
    std::vector<double> d_global_p(batch.samples.size(), 0.0);
    for (std::size_t k = 0; k < batch.samples.size(); ++k) {
        d_patch_p[k].assign(static_cast<std::size_t>(batch.samples[k].features.n_patches), 0.0);
        d_global_p[k] = cls.grads[k];
    }
    for (std::size_t b = 0; b < intra_batch.size(); ++b) {
        const std::size_t k = intra_owner[b];
        for (std::size_t i = 0; i < intra.grads[b].size(); ++i) {
            d_patch_p[k][i] += weights.lambda1 * intra.grads[b][i];
        }
    }
    for (std::size_t b = 0; b < pair_batch.size(); ++b) {
        const auto [fk, rk] = pair_owner[b];
        for (std::size_t i = 0; i < pair.grads[b].size(); ++i) {
            d_patch_p[fk][i] += weights.lambda2 * pair.grads[b][i];
            d_patch_p[rk][i] += weights.lambda2 * pair.grads_real[b][i];
        }
    }

    for (std::size_t k = 0; k < batch.samples.size(); ++k) {
        const SampleInput& s = batch.samples[k];
        const PatchScores& sc = scores[k];
        SampleGrad& grad = out.sample_grads[k];
        grad.d_cls.assign(static_cast<std::size_t>(d), 0.0);
        grad.d_patches.assign(static_cast<std::size_t>(s.features.n_patches) *
                                  static_cast<std::size_t>(d),
                              0.0);

        // global prob -> cls feature and text embeddings
        if (d_global_p[k] != 0.0) {
            const double p = sc.global_p;
            const double dz = d_global_p[k] * p * (1.0 - p);  // d p / d (s_fake - s_real)
            const Cos gf = cosine(s.features.cls.data(), batch.text.t_fake.data(), d, "cls");
            const Cos gr = cosine(s.features.cls.data(), batch.text.t_real.data(), d, "cls");
            add_cos_grad_f(grad.d_cls, s.features.cls.data(), batch.text.t_fake.data(), gf, d, dz);
            add_cos_grad_f(grad.d_cls, s.features.cls.data(), batch.text.t_real.data(), gr, d, -dz);
            add_cos_grad_t(out.d_t_fake, s.features.cls.data(), batch.text.t_fake.data(), gf, d, dz);
            add_cos_grad_t(out.d_t_real, s.features.cls.data(), batch.text.t_real.data(), gr, d, -dz);
        }
        // patch probs -> patch features and text embeddings
        for (int i = 0; i < s.features.n_patches; ++i) {
            const double dp = d_patch_p[k][static_cast<std::size_t>(i)];
            if (dp == 0.0) continue;
            const double p = sc.patch_p[static_cast<std::size_t>(i)];
            const double dz = dp * p * (1.0 - p);
            const double* f = s.features.patch(i);
            std::vector<double> acc(static_cast<std::size_t>(d), 0.0);
            const Cos pf = cosine(f, batch.text.t_fake.data(), d, "patch");
            const Cos pr = cosine(f, batch.text.t_real.data(), d, "patch");
            add_cos_grad_f(acc, f, batch.text.t_fake.data(), pf, d, dz);
            add_cos_grad_f(acc, f, batch.text.t_real.data(), pr, d, -dz);
            for (int c = 0; c < d; ++c) {
                grad.d_patches[static_cast<std::size_t>(i) * d + c] += acc[static_cast<std::size_t>(c)];
            }
            add_cos_grad_t(out.d_t_fake, f, batch.text.t_fake.data(), pf, d, dz);
            add_cos_grad_t(out.d_t_real, f, batch.text.t_real.data(), pr, d, -dz);
        }
    }
    return out;
}

}  // namespace xauc
