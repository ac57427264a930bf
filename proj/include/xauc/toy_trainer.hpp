#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xauc/alignment_losses.hpp"
#include "xauc/cross_auc.hpp"
#include "xauc/farmoe.hpp"
#include "xauc/rng.hpp"

namespace xauc {

// Desk-scale training configuration. The model dimension doubles as the raw
// patch input dimension; n_patches must form a square grid.
struct ToyConfig {
    int d = 16;
    int n_patches = 16;
    int steps = 300;
    double learning_rate = 0.5;
    LossWeights weights;
    bool use_farmoe = false;
    std::uint64_t seed = 1;
    int eval_pairs = 100;  // per-domain real/fake count at evaluation time
};

// One synthetic domain: aligned real/fake items with a planted forged-patch
// signal (along one feature axis) and a domain-wide nuisance offset (along
// another), emulating a detector score shift between datasets.
struct SynthDomainSpec {
    std::string dataset_id;
    int n_real = 24;
    int n_fake = 24;
    double signal = 1.2;
    double nuisance = 0.0;
    double p_forged = 0.35;  // per-patch forgery probability for fake items
};

struct SynthItem {
    std::vector<double> patches;  // n_patches * dim raw inputs
    std::uint8_t label = 0;
    std::vector<std::uint8_t> patch_labels;
    int pair_index = -1;  // aligned real item, local to the batch
    std::string dataset_id;
    std::string sample_id;
};

struct SyntheticFaceBatch {
    int n_patches = 0;
    int dim = 0;
    std::vector<SynthItem> items;
};

// Deterministic under the rng state; aligned pairs share every background
// patch, so the forged-patch contrast is the only within-pair difference.
SyntheticFaceBatch gen_synthetic_batch(const SynthDomainSpec& spec, int n_patches, int dim,
                                       Rng& rng);

// The tiny model: linear patch encoder, one attention block whose key
// projection is either the shared map or the per-region expert bank, and
// cosine prompt heads. The same struct shape doubles as the gradient
// accumulator.
struct ToyModel {
    int d = 0;
    int n_patches = 0;
    int grid_h = 0;
    int grid_w = 0;
    bool use_farmoe = false;
    AffineMap encoder;
    AffineMap query;
    AffineMap value;
    ExpertBank bank;  // shared_key always used for the cls token
    RegionMap region_map;
    std::vector<double> t_real;
    std::vector<double> t_fake;
};

ToyModel init_model(const ToyConfig& config, Rng& rng);

// Per-item activations cached for the manual backward pass.
struct ForwardCache {
    std::vector<double> tokens;  // (P+1) * d, row 0 = cls token
    std::vector<double> queries;
    std::vector<double> keys;
    std::vector<double> values;
    std::vector<double> attn;  // (P+1) * (P+1) row-stochastic
    PatchFeatures features;    // block output fed to the prompt heads
};

ForwardCache forward_item(const ToyModel& model, const std::vector<double>& raw_patches);

// Convenience: global and patch probabilities for a whole batch.
struct ForwardResult {
    std::vector<double> global_probs;
    std::vector<std::vector<double>> patch_probs;
};

ForwardResult forward(const ToyModel& model, const SyntheticFaceBatch& batch);

// Accumulates d loss / d model for one item given d loss / d block output;
// grads must be zero-initialized with zero_like.
ToyModel zero_like(const ToyModel& model);
void backward_item(const ToyModel& model, const std::vector<double>& raw_patches,
                   const ForwardCache& cache, const SampleGrad& d_features, ToyModel& grads);

// Which parameter groups a gradient-descent step updates.
struct StageMask {
    bool encoder = true;
    bool attention = true;  // query, value, shared key
    bool prompts = true;
    bool experts = false;
};

struct TrainReport {
    ToyConfig config;
    std::vector<LossBreakdown> trajectory;  // one entry per step
    std::vector<std::string> dataset_ids;
    std::vector<double> intra_auc_final;  // per dataset, matrix diagonal
    CrossAucSummary summary;
    std::uint64_t seed = 0;
    ToyModel model;  // final weights, for checkpointing and scoring
};

// Two-stage plain gradient descent: stage 1 trains encoder, attention, and
// prompts against the shared key map; with use_farmoe the later half of the
// step budget freezes those and trains the expert bank (initialized from the
// trained shared map). Throws DivergenceDetected when the loss leaves the
// finite range, reporting the step.
TrainReport train(const ToyConfig& config, const std::vector<SynthDomainSpec>& domains);

// Scores fresh per-domain batches with the model and runs the cross-AUC
// analysis at image level.
struct EvalResult {
    CrossAucMatrix matrix;
    CrossAucSummary summary;
    std::vector<double> intra_auc;  // diagonal, dataset order of the matrix
};

EvalResult evaluate(const ToyModel& model, const std::vector<SynthDomainSpec>& domains,
                    int eval_pairs, std::uint64_t seed);

// ---- JSON interfaces ------------------------------------------------------

// One JSON document describing a full run: the model/optimizer configuration
// plus the synthetic training domains. Omitted fields take the defaults;
// omitted domains default to the balanced planted two-domain task. Unknown
// keys are rejected so config typos fail loudly instead of silently running
// with defaults.
struct ToyRunSpec {
    ToyConfig config;
    std::vector<SynthDomainSpec> domains;
};

ToyRunSpec default_toy_run_spec();
ToyRunSpec parse_toy_run_spec(const std::string& json_text);
std::string serialize_toy_run_spec(const ToyRunSpec& spec);

// Report document: config echo, per-step loss trajectory, final evaluation.
// Metric values are printed with 6 decimals (round-half-even).
std::string serialize_train_report(const TrainReport& report, const ToyRunSpec& spec);

// Flat checkpoint: the expert-bank scheme extended with the encoder, the
// attention projections, the prompt vectors, and the routing table.
std::string serialize_model(const ToyModel& model);
ToyModel parse_model(const std::string& json_text);

}  // namespace xauc
