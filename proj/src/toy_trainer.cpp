#include "xauc/toy_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "json.hpp"
#include "xauc/error.hpp"
#include "xauc/format.hpp"
#include "xauc/image.hpp"
#include "xauc/roc_auc.hpp"
#include "xauc/score_store.hpp"

namespace xauc {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_config(const ToyConfig& config) {
    const int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(config.n_patches))));
    if (config.d <= 0 || config.n_patches <= 0 || s * s != config.n_patches) {
        throw Error(ErrorKind::InvalidSpec, "model needs d > 0 and a square patch grid");
    }
    if (config.steps <= 0 || config.eval_pairs <= 0) {
        throw Error(ErrorKind::InvalidSpec, "steps and eval_pairs must be positive");
    }
    if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
        throw Error(ErrorKind::InvalidSpec, "learning rate must be finite and >= 0");
    }
    if (config.weights.lambda1 < 0.0 || config.weights.lambda2 < 0.0 ||
        config.weights.margin < 0.0) {
        throw Error(ErrorKind::InvalidSpec, "loss weights must be non-negative");
    }
}

void check_domain(const SynthDomainSpec& spec, int n_patches) {
    if (spec.dataset_id.empty() || spec.n_real < 0 || spec.n_fake < 0 ||
        spec.n_real + spec.n_fake == 0) {
        throw Error(ErrorKind::InvalidSpec,
                    "domain needs an id and at least one real or fake item");
    }
    if (!(spec.p_forged > 0.0) || !(spec.p_forged < 1.0)) {
        throw Error(ErrorKind::InvalidSpec, "p_forged must lie strictly inside (0,1)");
    }
    if (!std::isfinite(spec.signal) || !std::isfinite(spec.nuisance)) {
        throw Error(ErrorKind::InvalidSpec, "signal and nuisance must be finite");
    }
    if (spec.n_fake > 0 && n_patches < 2) {
        throw Error(ErrorKind::InvalidSpec, "fake items need >= 2 patches");
    }
}

// Parametric 68-point face used only to derive a deterministic patch-region
// map for the synthetic grid (same proportions as the augmentation tests).
LandmarkSet canonical_landmarks(int height, int width) {
    LandmarkSet lm;
    const double cx = 0.5 * width;
    const double cy = 0.52 * height;
    auto set = [&](int k, double x, double y) {
        lm.points[static_cast<std::size_t>(k)] = {x, y};
    };
    for (int k = 0; k <= 16; ++k) {
        const double t = kPi * k / 16.0;
        set(k, cx - 0.32 * width * std::cos(t), cy + 0.40 * height * std::sin(t));
    }
    for (int k = 0; k < 5; ++k) {
        set(17 + k, cx - 0.25 * width + 0.05 * width * k, cy - 0.25 * height);
        set(22 + k, cx + 0.05 * width + 0.05 * width * k, cy - 0.25 * height);
    }
    for (int k = 0; k < 4; ++k) set(27 + k, cx, cy - 0.18 * height + 0.0533 * height * k);
    for (int k = 0; k < 5; ++k) set(31 + k, cx - 0.06 * width + 0.03 * width * k, cy);
    auto hexagon = [&](int first, double ex, double ey) {
        for (int k = 0; k < 6; ++k) {
            const double t = kPi * k / 3.0;
            set(first + k, ex + 0.08 * width * std::cos(t), ey + 0.06 * height * std::sin(t));
        }
    };
    hexagon(36, cx - 0.15 * width, cy - 0.18 * height);
    hexagon(42, cx + 0.15 * width, cy - 0.18 * height);
    for (int k = 0; k < 12; ++k) {
        const double t = 2.0 * kPi * k / 12.0;
        set(48 + k, cx + 0.12 * width * std::cos(t),
            cy + 0.22 * height + 0.06 * height * std::sin(t));
    }
    for (int k = 0; k < 8; ++k) {
        const double t = 2.0 * kPi * k / 8.0;
        set(60 + k, cx + 0.07 * width * std::cos(t),
            cy + 0.22 * height + 0.03 * height * std::sin(t));
    }
    return lm;
}

AffineMap noisy_identity(Rng& rng, int d, double noise) {
    AffineMap m = AffineMap::identity(d);
    for (double& w : m.weight) w += noise * (2.0 * rng.next_double() - 1.0);
    return m;
}

AffineMap small_random(Rng& rng, int d, double scale) {
    AffineMap m;
    m.dim = d;
    m.weight.resize(static_cast<std::size_t>(d) * d);
    m.bias.assign(static_cast<std::size_t>(d), 0.0);
    for (double& w : m.weight) w = scale * (2.0 * rng.next_double() - 1.0);
    return m;
}

// y += W^T dy (gradient wrt the affine input)
void affine_back_input(const AffineMap& m, const double* dy, double* dx) {
    const int d = m.dim;
    for (int i = 0; i < d; ++i) {
        const double g = dy[i];
        if (g == 0.0) continue;
        const double* row = m.weight.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) dx[j] += row[j] * g;
    }
}

// accumulate dW += dy x^T and db += dy
void affine_grad(AffineMap& grad, const double* dy, const double* x) {
    const int d = grad.dim;
    for (int i = 0; i < d; ++i) {
        const double g = dy[i];
        grad.bias[static_cast<std::size_t>(i)] += g;
        if (g == 0.0) continue;
        double* row = grad.weight.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) row[j] += g * x[j];
    }
}

void sgd_step(AffineMap& param, const AffineMap& grad, double lr) {
    for (std::size_t k = 0; k < param.weight.size(); ++k) param.weight[k] -= lr * grad.weight[k];
    for (std::size_t k = 0; k < param.bias.size(); ++k) param.bias[k] -= lr * grad.bias[k];
}

}  // namespace

SyntheticFaceBatch gen_synthetic_batch(const SynthDomainSpec& spec, int n_patches, int dim,
                                       Rng& rng) {
    if (n_patches <= 0 || dim < 2) {
        throw Error(ErrorKind::InvalidSpec, "batch needs n_patches > 0 and dim >= 2");
    }
    check_domain(spec, n_patches);

    SyntheticFaceBatch batch;
    batch.n_patches = n_patches;
    batch.dim = dim;
    const std::size_t vec_len = static_cast<std::size_t>(n_patches) * dim;

    auto base_patches = [&]() {
        std::vector<double> p(vec_len);
        for (double& v : p) v = rng.next_gaussian();
        // domain nuisance: constant offset along axis 1 on every patch
        for (int i = 0; i < n_patches; ++i) p[static_cast<std::size_t>(i) * dim + 1] += spec.nuisance;
        return p;
    };

    for (int k = 0; k < spec.n_real; ++k) {
        SynthItem item;
        item.patches = base_patches();
        item.label = 0;
        item.dataset_id = spec.dataset_id;
        item.sample_id = spec.dataset_id + "_real_" + std::to_string(k);
        batch.items.push_back(std::move(item));
    }
    const int n_pairs = std::min(spec.n_real, spec.n_fake);
    for (int k = 0; k < spec.n_fake; ++k) {
        SynthItem item;
        if (k < n_pairs) {
            item.patches = batch.items[static_cast<std::size_t>(k)].patches;
            item.pair_index = k;
        } else {
            item.patches = base_patches();
        }
        item.label = 1;
        item.patch_labels.assign(static_cast<std::size_t>(n_patches), 0);
        for (int attempt = 0;; ++attempt) {
            int forged = 0;
            for (auto& l : item.patch_labels) {
                l = rng.next_double() < spec.p_forged ? 1 : 0;
                forged += l;
            }
            if (forged > 0 && forged < n_patches) break;
            if (attempt > 1000) {
                throw Error(ErrorKind::InvalidSpec, "could not draw a usable forged mask");
            }
        }
        // planted forgery: shift forged patches along axis 0
        for (int i = 0; i < n_patches; ++i) {
            if (item.patch_labels[static_cast<std::size_t>(i)]) {
                item.patches[static_cast<std::size_t>(i) * dim] += spec.signal;
            }
        }
        item.dataset_id = spec.dataset_id;
        item.sample_id = spec.dataset_id + "_fake_" + std::to_string(k);
        batch.items.push_back(std::move(item));
    }
    return batch;
}

ToyModel init_model(const ToyConfig& config, Rng& rng) {
    check_config(config);
    ToyModel model;
    model.d = config.d;
    model.n_patches = config.n_patches;
    model.grid_h = static_cast<int>(std::lround(std::sqrt(static_cast<double>(config.n_patches))));
    model.grid_w = model.grid_h;
    model.use_farmoe = false;  // stage 1 always runs against the shared key

    model.encoder = noisy_identity(rng, config.d, 0.05);
    model.query = small_random(rng, config.d, 0.3);
    model.value = small_random(rng, config.d, 0.3);
    model.bank.dim = config.d;
    model.bank.shared_key = noisy_identity(rng, config.d, 0.05);
    for (int k = 0; k < kRegionCount; ++k) model.bank.experts.push_back(model.bank.shared_key);

    const int frame = 16 * model.grid_h;
    model.region_map = assign_regions(model.grid_h, model.grid_w, frame, frame,
                                      canonical_landmarks(frame, frame));

    // prompts start coincident: the untrained model scores everything 0.5,
    // and the first descent step splits them symmetrically
    std::vector<double> prompt(static_cast<std::size_t>(config.d));
    double norm = 0.0;
    for (double& v : prompt) {
        v = rng.next_gaussian();
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : prompt) v /= norm;
    model.t_real = prompt;
    model.t_fake = prompt;
    return model;
}

ForwardCache forward_item(const ToyModel& model, const std::vector<double>& raw_patches) {
    const int d = model.d;
    const int P = model.n_patches;
    if (raw_patches.size() != static_cast<std::size_t>(P) * d) {
        throw Error(ErrorKind::DimMismatch, "raw patch matrix must be n_patches x d");
    }
    ForwardCache cache;
    const int T = P + 1;
    cache.tokens.assign(static_cast<std::size_t>(T) * d, 0.0);
    // tokens 1..P: encoded patches; token 0: their mean (the cls stand-in)
    for (int i = 0; i < P; ++i) {
        apply_affine(model.encoder, raw_patches.data() + static_cast<std::size_t>(i) * d,
                     cache.tokens.data() + static_cast<std::size_t>(i + 1) * d);
    }
    for (int c = 0; c < d; ++c) {
        double mean = 0.0;
        for (int i = 1; i <= P; ++i) mean += cache.tokens[static_cast<std::size_t>(i) * d + c];
        cache.tokens[static_cast<std::size_t>(c)] = mean / static_cast<double>(P);
    }

    cache.queries.assign(static_cast<std::size_t>(T) * d, 0.0);
    cache.values.assign(static_cast<std::size_t>(T) * d, 0.0);
    cache.keys.assign(static_cast<std::size_t>(T) * d, 0.0);
    for (int t = 0; t < T; ++t) {
        const double* x = cache.tokens.data() + static_cast<std::size_t>(t) * d;
        apply_affine(model.query, x, cache.queries.data() + static_cast<std::size_t>(t) * d);
        apply_affine(model.value, x, cache.values.data() + static_cast<std::size_t>(t) * d);
    }
    if (model.use_farmoe) {
        PatchFeatures tokens_f;
        tokens_f.n_patches = P;
        tokens_f.dim = d;
        tokens_f.cls.assign(cache.tokens.begin(), cache.tokens.begin() + d);
        tokens_f.patches.assign(cache.tokens.begin() + d, cache.tokens.end());
        cache.keys = moe_key_projection(tokens_f, model.region_map, model.bank);
    } else {
        for (int t = 0; t < T; ++t) {
            apply_affine(model.bank.shared_key,
                         cache.tokens.data() + static_cast<std::size_t>(t) * d,
                         cache.keys.data() + static_cast<std::size_t>(t) * d);
        }
    }

    // single-head attention, row-wise stable softmax over dot(Q_t, K_s)/sqrt(d)
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    cache.attn.assign(static_cast<std::size_t>(T) * T, 0.0);
    for (int t = 0; t < T; ++t) {
        double* row = cache.attn.data() + static_cast<std::size_t>(t) * T;
        const double* q = cache.queries.data() + static_cast<std::size_t>(t) * d;
        double max_z = -1e300;
        for (int s = 0; s < T; ++s) {
            double z = 0.0;
            const double* k = cache.keys.data() + static_cast<std::size_t>(s) * d;
            for (int c = 0; c < d; ++c) z += q[c] * k[c];
            row[s] = z * inv_sqrt_d;
            max_z = std::max(max_z, row[s]);
        }
        double sum = 0.0;
        for (int s = 0; s < T; ++s) {
            row[s] = std::exp(row[s] - max_z);
            sum += row[s];
        }
        for (int s = 0; s < T; ++s) row[s] /= sum;
    }

    // residual block output
    cache.features.n_patches = P;
    cache.features.dim = d;
    cache.features.cls.assign(static_cast<std::size_t>(d), 0.0);
    cache.features.patches.assign(static_cast<std::size_t>(P) * d, 0.0);
    for (int t = 0; t < T; ++t) {
        const double* row = cache.attn.data() + static_cast<std::size_t>(t) * T;
        double* out = t == 0 ? cache.features.cls.data()
                             : cache.features.patches.data() + static_cast<std::size_t>(t - 1) * d;
        for (int c = 0; c < d; ++c) out[c] = cache.tokens[static_cast<std::size_t>(t) * d + c];
        for (int s = 0; s < T; ++s) {
            const double a = row[s];
            const double* v = cache.values.data() + static_cast<std::size_t>(s) * d;
            for (int c = 0; c < d; ++c) out[c] += a * v[c];
        }
    }
    return cache;
}

ForwardResult forward(const ToyModel& model, const SyntheticFaceBatch& batch) {
    if (batch.n_patches != model.n_patches || batch.dim != model.d) {
        throw Error(ErrorKind::DimMismatch, "batch shape does not match the model");
    }
    ForwardResult result;
    TextEmbeddings text{model.t_real, model.t_fake};
    for (const SynthItem& item : batch.items) {
        const ForwardCache cache = forward_item(model, item.patches);
        const PatchScores scores = patch_scores(cache.features, text);
        result.global_probs.push_back(scores.global_p);
        result.patch_probs.push_back(scores.patch_p);
    }
    return result;
}

ToyModel zero_like(const ToyModel& model) {
    ToyModel g = model;
    auto zero_affine = [](AffineMap& m) {
        std::fill(m.weight.begin(), m.weight.end(), 0.0);
        std::fill(m.bias.begin(), m.bias.end(), 0.0);
    };
    zero_affine(g.encoder);
    zero_affine(g.query);
    zero_affine(g.value);
    zero_affine(g.bank.shared_key);
    for (AffineMap& e : g.bank.experts) zero_affine(e);
    std::fill(g.t_real.begin(), g.t_real.end(), 0.0);
    std::fill(g.t_fake.begin(), g.t_fake.end(), 0.0);
    return g;
}

void backward_item(const ToyModel& model, const std::vector<double>& raw_patches,
                   const ForwardCache& cache, const SampleGrad& d_features, ToyModel& grads) {
    const int d = model.d;
    const int P = model.n_patches;
    const int T = P + 1;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

    // block output gradient: residual passes straight into the tokens
    std::vector<double> d_tokens(static_cast<std::size_t>(T) * d, 0.0);
    std::vector<double> d_out(static_cast<std::size_t>(T) * d, 0.0);
    std::copy(d_features.d_cls.begin(), d_features.d_cls.end(), d_out.begin());
    std::copy(d_features.d_patches.begin(), d_features.d_patches.end(), d_out.begin() + d);
    for (std::size_t k = 0; k < d_out.size(); ++k) d_tokens[k] += d_out[k];

    // attention: O_t = sum_s A_ts V_s
    std::vector<double> d_values(static_cast<std::size_t>(T) * d, 0.0);
    std::vector<double> d_queries(static_cast<std::size_t>(T) * d, 0.0);
    std::vector<double> d_keys(static_cast<std::size_t>(T) * d, 0.0);
    std::vector<double> d_attn_row(static_cast<std::size_t>(T), 0.0);
    for (int t = 0; t < T; ++t) {
        const double* a_row = cache.attn.data() + static_cast<std::size_t>(t) * T;
        const double* g_o = d_out.data() + static_cast<std::size_t>(t) * d;
        double inner = 0.0;  // sum_u A_tu dA_tu for the softmax Jacobian
        for (int s = 0; s < T; ++s) {
            const double* v = cache.values.data() + static_cast<std::size_t>(s) * d;
            double da = 0.0;
            for (int c = 0; c < d; ++c) {
                d_values[static_cast<std::size_t>(s) * d + c] += a_row[s] * g_o[c];
                da += g_o[c] * v[c];
            }
            d_attn_row[static_cast<std::size_t>(s)] = da;
            inner += a_row[s] * da;
        }
        const double* q = cache.queries.data() + static_cast<std::size_t>(t) * d;
        for (int s = 0; s < T; ++s) {
            const double dz =
                a_row[s] * (d_attn_row[static_cast<std::size_t>(s)] - inner) * inv_sqrt_d;
            if (dz == 0.0) continue;
            const double* k = cache.keys.data() + static_cast<std::size_t>(s) * d;
            for (int c = 0; c < d; ++c) {
                d_queries[static_cast<std::size_t>(t) * d + c] += dz * k[c];
                d_keys[static_cast<std::size_t>(s) * d + c] += dz * q[c];
            }
        }
    }

    // projections back to tokens and parameter gradients
    for (int t = 0; t < T; ++t) {
        const double* x = cache.tokens.data() + static_cast<std::size_t>(t) * d;
        double* dx = d_tokens.data() + static_cast<std::size_t>(t) * d;
        const double* dq = d_queries.data() + static_cast<std::size_t>(t) * d;
        const double* dv = d_values.data() + static_cast<std::size_t>(t) * d;
        const double* dk = d_keys.data() + static_cast<std::size_t>(t) * d;
        affine_grad(grads.query, dq, x);
        affine_back_input(model.query, dq, dx);
        affine_grad(grads.value, dv, x);
        affine_back_input(model.value, dv, dx);
        if (t == 0 || !model.use_farmoe) {
            affine_grad(grads.bank.shared_key, dk, x);
            affine_back_input(model.bank.shared_key, dk, dx);
        } else {
            const int r = model.region_map.region_of[static_cast<std::size_t>(t - 1)];
            affine_grad(grads.bank.experts[static_cast<std::size_t>(r - 1)], dk, x);
            affine_back_input(model.bank.experts[static_cast<std::size_t>(r - 1)], dk, dx);
        }
    }

    // cls token is the patch mean; fold its gradient back into the patches
    for (int i = 1; i <= P; ++i) {
        for (int c = 0; c < d; ++c) {
            d_tokens[static_cast<std::size_t>(i) * d + c] +=
                d_tokens[static_cast<std::size_t>(c)] / static_cast<double>(P);
        }
    }
    for (int i = 0; i < P; ++i) {
        affine_grad(grads.encoder, d_tokens.data() + static_cast<std::size_t>(i + 1) * d,
                    raw_patches.data() + static_cast<std::size_t>(i) * d);
    }
}

EvalResult evaluate(const ToyModel& model, const std::vector<SynthDomainSpec>& domains,
                    int eval_pairs, std::uint64_t seed) {
    if (eval_pairs <= 0) {
        throw Error(ErrorKind::InvalidSpec, "eval_pairs must be positive");
    }
    ScoreStore store;
    for (const SynthDomainSpec& domain : domains) {
        SynthDomainSpec eval_spec = domain;
        eval_spec.n_real = eval_pairs;
        eval_spec.n_fake = eval_pairs;
        Rng rng(derive_seed(seed, "eval_" + domain.dataset_id));
        const SyntheticFaceBatch batch =
            gen_synthetic_batch(eval_spec, model.n_patches, model.d, rng);
        const ForwardResult out = forward(model, batch);
        for (std::size_t k = 0; k < batch.items.size(); ++k) {
            Sample sample;
            sample.sample_id = batch.items[k].sample_id;
            sample.dataset_id = batch.items[k].dataset_id;
            sample.video_id = sample.sample_id;
            sample.frame_idx = 0;
            sample.label = batch.items[k].label ? Label::Fake : Label::Real;
            sample.score = out.global_probs[k];
            store.add(sample);
        }
    }
    EvalResult result;
    result.matrix = cross_matrix(store, Level::Frame);
    result.summary = summarize(result.matrix);
    const std::size_t n = result.matrix.dataset_ids.size();
    for (std::size_t i = 0; i < n; ++i) {
        const CrossCell& cell = result.matrix.at(i, i);
        result.intra_auc.push_back(cell.auc ? cell.auc->value : 0.5);
    }
    return result;
}

TrainReport train(const ToyConfig& config, const std::vector<SynthDomainSpec>& domains) {
    check_config(config);
    if (domains.empty()) {
        throw Error(ErrorKind::InvalidSpec, "training needs at least one domain");
    }

    Rng init_rng(derive_seed(config.seed, "init"));
    ToyModel model = init_model(config, init_rng);

    // assemble the full training set once; pair indices become batch-global
    SyntheticFaceBatch data;
    data.n_patches = config.n_patches;
    data.dim = config.d;
    for (const SynthDomainSpec& domain : domains) {
        Rng rng(derive_seed(config.seed, "train_" + domain.dataset_id));
        SyntheticFaceBatch part = gen_synthetic_batch(domain, config.n_patches, config.d, rng);
        const int base = static_cast<int>(data.items.size());
        for (SynthItem& item : part.items) {
            if (item.pair_index >= 0) item.pair_index += base;
            data.items.push_back(std::move(item));
        }
    }

    const int stage2_steps = config.use_farmoe ? config.steps / 2 : 0;
    const int stage1_steps = config.steps - stage2_steps;
    const StageMask stage1{true, true, true, false};
    const StageMask stage2{false, false, false, true};

    TrainReport report;
    report.config = config;
    report.seed = config.seed;

    for (int step = 0; step < config.steps; ++step) {
        if (step == stage1_steps && stage2_steps > 0) {
            // stage 2: freeze the trained model, specialize the experts from
            // the shared key it learned
            model.use_farmoe = true;
            for (AffineMap& e : model.bank.experts) e = model.bank.shared_key;
        }
        const StageMask& mask = step < stage1_steps ? stage1 : stage2;

        LossBatch loss_batch;
        loss_batch.text = TextEmbeddings{model.t_real, model.t_fake};
        std::vector<ForwardCache> caches;
        caches.reserve(data.items.size());
        for (const SynthItem& item : data.items) {
            caches.push_back(forward_item(model, item.patches));
            SampleInput in;
            in.features = caches.back().features;
            in.label = item.label;
            in.patch_labels = item.patch_labels;
            in.pair_index = item.pair_index;
            loss_batch.samples.push_back(std::move(in));
        }
        const TotalLossResult loss = total_loss(loss_batch, config.weights);
        if (!std::isfinite(loss.breakdown.l_total)) {
            throw Error(ErrorKind::DivergenceDetected,
                        "non-finite loss at step " + std::to_string(step));
        }
        report.trajectory.push_back(loss.breakdown);

        ToyModel grads = zero_like(model);
        for (std::size_t k = 0; k < data.items.size(); ++k) {
            backward_item(model, data.items[k].patches, caches[k], loss.sample_grads[k], grads);
        }

        const double lr = config.learning_rate;
        if (mask.encoder) sgd_step(model.encoder, grads.encoder, lr);
        if (mask.attention) {
            sgd_step(model.query, grads.query, lr);
            sgd_step(model.value, grads.value, lr);
            sgd_step(model.bank.shared_key, grads.bank.shared_key, lr);
        }
        if (mask.experts) {
            for (std::size_t e = 0; e < model.bank.experts.size(); ++e) {
                sgd_step(model.bank.experts[e], grads.bank.experts[e], lr);
            }
        }
        if (mask.prompts) {
            for (int c = 0; c < config.d; ++c) {
                model.t_real[static_cast<std::size_t>(c)] -=
                    lr * loss.d_t_real[static_cast<std::size_t>(c)];
                model.t_fake[static_cast<std::size_t>(c)] -=
                    lr * loss.d_t_fake[static_cast<std::size_t>(c)];
            }
        }
    }

    if (domains.size() >= 2) {
        const EvalResult eval =
            evaluate(model, domains, config.eval_pairs, derive_seed(config.seed, "eval"));
        report.dataset_ids = eval.matrix.dataset_ids;
        report.intra_auc_final = eval.intra_auc;
        report.summary = eval.summary;
    } else {
        report.dataset_ids.push_back(domains[0].dataset_id);
        // single-domain runs still report the intra AUC on fresh data
        Rng rng(derive_seed(config.seed, "eval_" + domains[0].dataset_id));
        SynthDomainSpec eval_spec = domains[0];
        eval_spec.n_real = config.eval_pairs;
        eval_spec.n_fake = config.eval_pairs;
        const SyntheticFaceBatch batch =
            gen_synthetic_batch(eval_spec, config.n_patches, config.d, rng);
        const ForwardResult out = forward(model, batch);
        std::vector<double> fakes;
        std::vector<double> reals;
        for (std::size_t k = 0; k < batch.items.size(); ++k) {
            (batch.items[k].label ? fakes : reals).push_back(out.global_probs[k]);
        }
        report.intra_auc_final.push_back(rank_auc(fakes, reals).value);
    }
    report.model = model;
    return report;
}

// ---- JSON interfaces ------------------------------------------------------

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& doc, std::initializer_list<const char*> allowed,
                         const std::string& what) {
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        bool known = false;
        for (const char* name : allowed) known = known || key == name;
        if (!known) {
            throw Error(ErrorKind::InvalidSpec, what + ": unknown key \"" + key + "\"");
        }
    }
}

double get_number(const json& doc, const char* key, double fallback, const std::string& what) {
    if (!doc.contains(key)) return fallback;
    if (!doc[key].is_number()) {
        throw Error(ErrorKind::InvalidSpec, what + ": \"" + key + "\" must be a number");
    }
    return doc[key].get<double>();
}

int get_int(const json& doc, const char* key, int fallback, const std::string& what) {
    if (!doc.contains(key)) return fallback;
    if (!doc[key].is_number_integer()) {
        throw Error(ErrorKind::InvalidSpec, what + ": \"" + key + "\" must be an integer");
    }
    return doc[key].get<int>();
}

json affine_doc(const AffineMap& map) {
    return json{{"dim", map.dim}, {"weight", map.weight}, {"bias", map.bias}};
}

AffineMap affine_from_doc(const json& doc, const char* what) {
    if (!doc.is_object() || !doc.contains("dim") || !doc.contains("weight") ||
        !doc.contains("bias") || !doc["dim"].is_number_integer() || !doc["weight"].is_array() ||
        !doc["bias"].is_array()) {
        throw Error(ErrorKind::MalformedFixture, std::string("checkpoint: bad ") + what);
    }
    AffineMap map;
    map.dim = doc["dim"].get<int>();
    map.weight = doc["weight"].get<std::vector<double>>();
    map.bias = doc["bias"].get<std::vector<double>>();
    if (map.weight.size() != static_cast<std::size_t>(map.dim) * map.dim ||
        map.bias.size() != static_cast<std::size_t>(map.dim)) {
        throw Error(ErrorKind::MalformedFixture,
                    std::string("checkpoint: inconsistent dims in ") + what);
    }
    return map;
}

}  // namespace

ToyRunSpec default_toy_run_spec() {
    ToyRunSpec spec;
    SynthDomainSpec dom;
    dom.n_real = 24;
    dom.n_fake = 24;
    dom.signal = 2.5;
    dom.nuisance = 0.0;
    dom.dataset_id = "DomA";
    spec.domains.push_back(dom);
    dom.dataset_id = "DomB";
    spec.domains.push_back(dom);
    return spec;
}

ToyRunSpec parse_toy_run_spec(const std::string& json_text) {
    const json doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw Error(ErrorKind::InvalidSpec, "config document must be a JSON object");
    }
    reject_unknown_keys(doc,
                        {"d", "n_patches", "steps", "learning_rate", "weights", "use_farmoe",
                         "seed", "eval_pairs", "domains"},
                        "config");

    ToyRunSpec spec = default_toy_run_spec();
    ToyConfig& cfg = spec.config;
    cfg.d = get_int(doc, "d", cfg.d, "config");
    cfg.n_patches = get_int(doc, "n_patches", cfg.n_patches, "config");
    cfg.steps = get_int(doc, "steps", cfg.steps, "config");
    cfg.learning_rate = get_number(doc, "learning_rate", cfg.learning_rate, "config");
    cfg.eval_pairs = get_int(doc, "eval_pairs", cfg.eval_pairs, "config");
    if (doc.contains("use_farmoe")) {
        if (!doc["use_farmoe"].is_boolean()) {
            throw Error(ErrorKind::InvalidSpec, "config: \"use_farmoe\" must be a boolean");
        }
        cfg.use_farmoe = doc["use_farmoe"].get<bool>();
    }
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_integer() || doc["seed"].get<std::int64_t>() < 0) {
            throw Error(ErrorKind::InvalidSpec, "config: \"seed\" must be a non-negative integer");
        }
        cfg.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("weights")) {
        const json& w = doc["weights"];
        if (!w.is_object()) {
            throw Error(ErrorKind::InvalidSpec, "config: \"weights\" must be an object");
        }
        reject_unknown_keys(w, {"lambda1", "lambda2", "margin"}, "config.weights");
        cfg.weights.lambda1 = get_number(w, "lambda1", cfg.weights.lambda1, "config.weights");
        cfg.weights.lambda2 = get_number(w, "lambda2", cfg.weights.lambda2, "config.weights");
        cfg.weights.margin = get_number(w, "margin", cfg.weights.margin, "config.weights");
    }
    if (doc.contains("domains")) {
        if (!doc["domains"].is_array()) {
            throw Error(ErrorKind::InvalidSpec, "config: \"domains\" must be an array");
        }
        spec.domains.clear();
        for (const json& d : doc["domains"]) {
            if (!d.is_object()) {
                throw Error(ErrorKind::InvalidSpec, "config: each domain must be an object");
            }
            reject_unknown_keys(
                d, {"dataset_id", "n_real", "n_fake", "signal", "nuisance", "p_forged"},
                "domain");
            SynthDomainSpec dom;
            if (!d.contains("dataset_id") || !d["dataset_id"].is_string()) {
                throw Error(ErrorKind::InvalidSpec, "domain: \"dataset_id\" must be a string");
            }
            dom.dataset_id = d["dataset_id"].get<std::string>();
            dom.n_real = get_int(d, "n_real", dom.n_real, "domain");
            dom.n_fake = get_int(d, "n_fake", dom.n_fake, "domain");
            dom.signal = get_number(d, "signal", dom.signal, "domain");
            dom.nuisance = get_number(d, "nuisance", dom.nuisance, "domain");
            dom.p_forged = get_number(d, "p_forged", dom.p_forged, "domain");
            spec.domains.push_back(std::move(dom));
        }
    }
    return spec;
}

std::string serialize_toy_run_spec(const ToyRunSpec& spec) {
    json doc;
    doc["d"] = spec.config.d;
    doc["n_patches"] = spec.config.n_patches;
    doc["steps"] = spec.config.steps;
    doc["learning_rate"] = spec.config.learning_rate;
    doc["weights"] = json{{"lambda1", spec.config.weights.lambda1},
                          {"lambda2", spec.config.weights.lambda2},
                          {"margin", spec.config.weights.margin}};
    doc["use_farmoe"] = spec.config.use_farmoe;
    doc["seed"] = spec.config.seed;
    doc["eval_pairs"] = spec.config.eval_pairs;
    doc["domains"] = json::array();
    for (const SynthDomainSpec& d : spec.domains) {
        doc["domains"].push_back(json{{"dataset_id", d.dataset_id},
                                      {"n_real", d.n_real},
                                      {"n_fake", d.n_fake},
                                      {"signal", d.signal},
                                      {"nuisance", d.nuisance},
                                      {"p_forged", d.p_forged}});
    }
    return doc.dump(2);
}

std::string serialize_train_report(const TrainReport& report, const ToyRunSpec& spec) {
    json doc;
    doc["seed"] = report.seed;
    doc["config"] = json::parse(serialize_toy_run_spec(spec));
    doc["dataset_ids"] = report.dataset_ids;
    json traj = json::array();
    for (const LossBreakdown& step : report.trajectory) {
        traj.push_back(json{{"l_cls", format_fixed(step.l_cls)},
                            {"l_rank_intra", format_fixed(step.l_rank_intra)},
                            {"l_rank_pair", format_fixed(step.l_rank_pair)},
                            {"l_total", format_fixed(step.l_total)},
                            {"n_fake_images_used", step.n_fake_images_used},
                            {"n_pairs_used", step.n_pairs_used},
                            {"n_skipped", step.n_skipped}});
    }
    doc["trajectory"] = std::move(traj);
    json intra = json::array();
    for (std::size_t k = 0; k < report.dataset_ids.size(); ++k) {
        intra.push_back(json{{"dataset", report.dataset_ids[k]},
                             {"auc", format_fixed(report.intra_auc_final[k])}});
    }
    doc["intra_auc"] = std::move(intra);
    doc["summary"] = json{{"cross_avg", format_fixed(report.summary.cross_avg)},
                          {"cross_min", format_fixed(report.summary.cross_min)},
                          {"cross_std", format_fixed(report.summary.cross_std)},
                          {"intra_avg", format_fixed(report.summary.intra_avg)},
                          {"n_pairs", report.summary.n_pairs},
                          {"n_intra", report.summary.n_intra}};
    return doc.dump(2);
}

std::string serialize_model(const ToyModel& model) {
    json doc;
    doc["d"] = model.d;
    doc["n_patches"] = model.n_patches;
    doc["grid_h"] = model.grid_h;
    doc["grid_w"] = model.grid_w;
    doc["use_farmoe"] = model.use_farmoe;
    doc["encoder"] = affine_doc(model.encoder);
    doc["query"] = affine_doc(model.query);
    doc["value"] = affine_doc(model.value);
    doc["bank"] = json::parse(serialize_expert_bank(model.bank));
    doc["region_map"] =
        json{{"n_patches", model.region_map.n_patches},
             {"region_of", model.region_map.region_of},
             {"cls_policy",
              model.region_map.cls_policy == ClsPolicy::SharedKey ? "shared_key"
                                                                  : "dedicated_expert"}};
    doc["t_real"] = model.t_real;
    doc["t_fake"] = model.t_fake;
    return doc.dump(2);
}

ToyModel parse_model(const std::string& json_text) {
    const json doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw Error(ErrorKind::MalformedFixture, "checkpoint document is malformed");
    }
    for (const char* key : {"d", "n_patches", "grid_h", "grid_w", "use_farmoe", "encoder",
                            "query", "value", "bank", "region_map", "t_real", "t_fake"}) {
        if (!doc.contains(key)) {
            throw Error(ErrorKind::MalformedFixture,
                        std::string("checkpoint: missing \"") + key + "\"");
        }
    }
    ToyModel model;
    model.d = doc["d"].get<int>();
    model.n_patches = doc["n_patches"].get<int>();
    model.grid_h = doc["grid_h"].get<int>();
    model.grid_w = doc["grid_w"].get<int>();
    model.use_farmoe = doc["use_farmoe"].get<bool>();
    model.encoder = affine_from_doc(doc["encoder"], "encoder");
    model.query = affine_from_doc(doc["query"], "query projection");
    model.value = affine_from_doc(doc["value"], "value projection");
    model.bank = parse_expert_bank(doc["bank"].dump());
    const json& rm = doc["region_map"];
    if (!rm.is_object() || !rm.contains("n_patches") || !rm.contains("region_of") ||
        !rm.contains("cls_policy")) {
        throw Error(ErrorKind::MalformedFixture, "checkpoint: bad region map");
    }
    model.region_map.n_patches = rm["n_patches"].get<int>();
    model.region_map.region_of = rm["region_of"].get<std::vector<int>>();
    const std::string policy = rm["cls_policy"].get<std::string>();
    if (policy == "shared_key") {
        model.region_map.cls_policy = ClsPolicy::SharedKey;
    } else if (policy == "dedicated_expert") {
        model.region_map.cls_policy = ClsPolicy::DedicatedExpert;
    } else {
        throw Error(ErrorKind::MalformedFixture, "checkpoint: unknown cls policy " + policy);
    }
    model.t_real = doc["t_real"].get<std::vector<double>>();
    model.t_fake = doc["t_fake"].get<std::vector<double>>();
    if (model.d <= 0 || model.encoder.dim != model.d || model.query.dim != model.d ||
        model.value.dim != model.d || model.bank.dim != model.d ||
        model.t_real.size() != static_cast<std::size_t>(model.d) ||
        model.t_fake.size() != static_cast<std::size_t>(model.d) ||
        model.region_map.region_of.size() != static_cast<std::size_t>(model.n_patches) ||
        model.grid_h * model.grid_w != model.n_patches) {
        throw Error(ErrorKind::MalformedFixture, "checkpoint: inconsistent dimensions");
    }
    return model;
}

}  // namespace xauc
