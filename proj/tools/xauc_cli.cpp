// Command-line front end: evaluation, fixture verification, loss kernels,
// desk-scale training, score simulation, and augmentation, sharing one
// report convention (embedded manifest, 6-decimal metrics) and one exit-code
// taxonomy (0 ok, 1 verification mismatch, 2 invalid input, 3 insufficient
// data, 4 numeric failure).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "xauc/alignment_losses.hpp"
#include "xauc/augmentation.hpp"
#include "xauc/cross_auc.hpp"
#include "xauc/error.hpp"
#include "xauc/format.hpp"
#include "xauc/image.hpp"
#include "xauc/manifest.hpp"
#include "xauc/rng.hpp"
#include "xauc/roc_auc.hpp"
#include "xauc/score_store.hpp"
#include "xauc/shift_sim.hpp"
#include "xauc/toy_trainer.hpp"
#include "xauc/version.hpp"

namespace {

using nlohmann::json;
using namespace xauc;

#ifndef XAUC_DATA_DIR
#define XAUC_DATA_DIR "data"
#endif

std::string fmt(double v) { return format_fixed(v); }

// Scientific form for quantities whose scale is unknown a priori
// (gradient-check errors); fixed 6 decimals would flush them to zero.
std::string fmt_sci(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.3e", v);
    return buf;
}

// "-" selects stdout; reports always end with a newline.
void write_output(const std::string& path, const std::string& content) {
    if (path == "-") {
        std::cout << content;
        if (content.empty() || content.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::MalformedFixture, "cannot open output file '" + path + "'");
    }
    out << content;
    if (content.empty() || content.back() != '\n') out << '\n';
}

json manifest_block(const RunManifest& manifest) {
    return json::parse(manifest_to_json(manifest));
}

// ---- strict-document helpers (config files fail loudly on typos) ----------

void reject_unknown_keys(const json& doc, const std::vector<std::string>& known,
                         const std::string& where) {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            throw Error(ErrorKind::MalformedFixture,
                        "unknown key \"" + it.key() + "\" in " + where);
        }
    }
}

double get_number(const json& doc, const std::string& key, const std::string& where) {
    if (!doc.contains(key) || !doc[key].is_number()) {
        throw Error(ErrorKind::MalformedFixture,
                    where + " needs a numeric \"" + key + "\"");
    }
    return doc[key].get<double>();
}

std::vector<double> get_vector(const json& doc, const std::string& key,
                               const std::string& where) {
    if (!doc.contains(key) || !doc[key].is_array()) {
        throw Error(ErrorKind::MalformedFixture, where + " needs an array \"" + key + "\"");
    }
    std::vector<double> out;
    for (const json& v : doc[key]) {
        if (!v.is_number()) {
            throw Error(ErrorKind::MalformedFixture,
                        where + "." + key + " must contain only numbers");
        }
        out.push_back(v.get<double>());
    }
    return out;
}

// ---- eval -----------------------------------------------------------------

// Merges one JSONL file into the store with path:line diagnostics.
void ingest_file(ScoreStore& store, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::MalformedFixture, "cannot read score file '" + path + "'");
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            store.add(parse_sample_line(line));
        } catch (const Error& e) {
            throw Error(e.kind(),
                        path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

json cell_block(const CrossCell& cell) {
    json out;
    if (cell.auc) {
        out["auc"] = fmt(cell.auc->value);
        out["n_real"] = cell.auc->n_neg;
        out["n_fake"] = cell.auc->n_pos;
        out["n_tied_pairs"] = cell.auc->n_tied_pairs;
    } else {
        out["auc"] = nullptr;
        out["reason"] = cell.absent_reason;
    }
    return out;
}

json summary_block(const CrossAucSummary& summary) {
    json out;
    out["cross_avg"] = fmt(summary.cross_avg);
    out["cross_min"] = fmt(summary.cross_min);
    out["cross_std"] = fmt(summary.cross_std);
    out["intra_avg"] = fmt(summary.intra_avg);
    out["n_pairs"] = summary.n_pairs;
    out["n_intra"] = summary.n_intra;
    return out;
}

struct EvalArgs {
    std::vector<std::string> files;
    std::string level = "frame";
    std::string agg = "mean";
    std::string format = "json";
    std::string output = "-";
};

int cmd_eval(const EvalArgs& args) {
    const Level level = parse_level(args.level);
    const VideoAgg agg = parse_video_agg(args.agg);

    RunManifest manifest = make_manifest("eval");
    json config;
    config["level"] = args.level;
    config["aggregation"] = args.agg;
    config["format"] = args.format;
    manifest.config_json = config.dump();
    for (const std::string& path : args.files) {
        manifest.inputs.push_back({path, file_digest(path)});
    }

    ScoreStore store;
    for (const std::string& path : args.files) ingest_file(store, path);
    if (store.empty()) {
        throw Error(ErrorKind::InvalidSpec, "no samples in input");
    }

    const CrossAucMatrix matrix = cross_matrix(store, level, agg);
    const CrossAucSummary summary = summarize(matrix);
    const std::size_t n = matrix.dataset_ids.size();

    if (args.format == "csv") {
        std::ostringstream out;
        out << matrix_to_csv(matrix) << "\n";
        out << "metric,value\n";
        out << "cross_avg," << fmt(summary.cross_avg) << "\n";
        out << "cross_min," << fmt(summary.cross_min) << "\n";
        out << "cross_std," << fmt(summary.cross_std) << "\n";
        out << "intra_avg," << fmt(summary.intra_avg) << "\n";
        out << "n_pairs," << summary.n_pairs << "\n";
        out << "n_intra," << summary.n_intra << "\n";
        write_output(args.output, out.str());
        return 0;
    }

    json report;
    report["manifest"] = manifest_block(manifest);
    report["level"] = level_name(level);
    report["aggregation"] = video_agg_name(agg);
    report["dataset_ids"] = matrix.dataset_ids;
    json intra = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        json entry = cell_block(matrix.at(i, i));
        entry["dataset"] = matrix.dataset_ids[i];
        intra.push_back(entry);
    }
    report["intra"] = intra;
    json cells = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            json entry = cell_block(matrix.at(i, j));
            entry["real"] = matrix.dataset_ids[i];
            entry["fake"] = matrix.dataset_ids[j];
            cells.push_back(entry);
        }
    }
    report["cells"] = cells;
    report["summary"] = summary_block(summary);
    write_output(args.output, report.dump(2));
    return 0;
}

// ---- verify-table ---------------------------------------------------------

struct VerifyArgs {
    std::vector<std::string> names;
    bool all = false;
    std::string dir = std::string(XAUC_DATA_DIR) + "/fixtures/table_values";
    double tolerance = 0.0015;
    std::string output = "-";
};

std::vector<std::string> fixture_names_in(const std::string& dir) {
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
        if (entry.path().extension() == ".json") names.push_back(entry.path().stem().string());
    }
    if (ec) {
        throw Error(ErrorKind::MalformedFixture, "cannot list fixture directory '" + dir + "'");
    }
    std::sort(names.begin(), names.end());
    return names;
}

int cmd_verify_table(const VerifyArgs& args) {
    std::vector<std::string> names = args.names;
    if (args.all) names = fixture_names_in(args.dir);
    if (names.empty()) {
        throw Error(ErrorKind::InvalidSpec, "no fixture named; pass names or --all");
    }

    RunManifest manifest = make_manifest("verify-table");
    json config;
    config["tolerance"] = args.tolerance;
    config["dir"] = args.dir;
    manifest.config_json = config.dump();

    json columns = json::array();
    bool all_pass = true;
    for (const std::string& name : names) {
        const std::string path = args.dir + "/" + name + ".json";
        if (!std::filesystem::exists(path)) {
            std::string available;
            for (const std::string& n : fixture_names_in(args.dir)) {
                available += available.empty() ? n : ", " + n;
            }
            throw Error(ErrorKind::UnknownFixture,
                        "unknown fixture \"" + name + "\"; available: " + available);
        }
        manifest.inputs.push_back({path, file_digest(path)});
        const TableFixture fixture = load_table_fixture(path);
        const VerifyReport verdict = verify_published(fixture, args.tolerance);
        json fields = json::array();
        for (const FieldCheck& check : verdict.fields) {
            json f;
            f["field"] = check.field;
            f["computed"] = fmt(check.computed);
            f["claimed"] = fmt(check.claimed);
            f["delta"] = fmt(check.delta);
            f["pass"] = check.pass;
            fields.push_back(f);
        }
        json column;
        column["name"] = verdict.name;
        column["fields"] = fields;
        column["pass"] = verdict.pass;
        columns.push_back(column);
        all_pass = all_pass && verdict.pass;
    }

    json report;
    report["manifest"] = manifest_block(manifest);
    report["tolerance"] = fmt(args.tolerance);
    report["columns"] = columns;
    report["pass"] = all_pass;
    write_output(args.output, report.dump(2));
    return all_pass ? 0 : 1;
}

// ---- losses ---------------------------------------------------------------

LossBatch parse_loss_batch(const json& doc) {
    reject_unknown_keys(doc, {"dim", "text", "weights", "samples", "provenance"},
                        "batch document");
    const int dim = static_cast<int>(get_number(doc, "dim", "batch document"));
    if (dim <= 0) {
        throw Error(ErrorKind::MalformedFixture, "batch dim must be positive");
    }
    if (!doc.contains("text") || !doc["text"].is_object()) {
        throw Error(ErrorKind::MalformedFixture, "batch document needs a \"text\" object");
    }
    reject_unknown_keys(doc["text"], {"t_real", "t_fake"}, "text");
    LossBatch batch;
    batch.text.t_real = get_vector(doc["text"], "t_real", "text");
    batch.text.t_fake = get_vector(doc["text"], "t_fake", "text");
    if (batch.text.t_real.size() != static_cast<std::size_t>(dim) ||
        batch.text.t_fake.size() != static_cast<std::size_t>(dim)) {
        throw Error(ErrorKind::MalformedFixture, "text embeddings must have length dim");
    }
    if (!doc.contains("samples") || !doc["samples"].is_array()) {
        throw Error(ErrorKind::MalformedFixture, "batch document needs a \"samples\" array");
    }
    const json& samples = doc["samples"];
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const json& s = samples[k];
        const std::string where = "samples[" + std::to_string(k) + "]";
        if (!s.is_object()) {
            throw Error(ErrorKind::MalformedFixture, where + " must be an object");
        }
        reject_unknown_keys(s, {"label", "cls", "patches", "patch_labels", "pair_index"},
                            where);
        SampleInput in;
        const double label = get_number(s, "label", where);
        if (label != 0.0 && label != 1.0) {
            throw Error(ErrorKind::MalformedFixture, where + ".label must be 0 or 1");
        }
        in.label = label != 0.0 ? 1 : 0;
        in.features.dim = dim;
        in.features.cls = get_vector(s, "cls", where);
        if (in.features.cls.size() != static_cast<std::size_t>(dim)) {
            throw Error(ErrorKind::MalformedFixture, where + ".cls must have length dim");
        }
        if (!s.contains("patches") || !s["patches"].is_array()) {
            throw Error(ErrorKind::MalformedFixture, where + " needs a \"patches\" array");
        }
        for (std::size_t p = 0; p < s["patches"].size(); ++p) {
            const json row = json{{"row", s["patches"][p]}};
            std::vector<double> patch = get_vector(row, "row", where + ".patches");
            if (patch.size() != static_cast<std::size_t>(dim)) {
                throw Error(ErrorKind::MalformedFixture,
                            where + ".patches rows must have length dim");
            }
            in.features.patches.insert(in.features.patches.end(), patch.begin(), patch.end());
        }
        in.features.n_patches = static_cast<int>(s["patches"].size());
        if (s.contains("patch_labels")) {
            for (const double v : get_vector(s, "patch_labels", where)) {
                if (v != 0.0 && v != 1.0) {
                    throw Error(ErrorKind::MalformedFixture,
                                where + ".patch_labels must be 0/1");
                }
                in.patch_labels.push_back(v != 0.0 ? 1 : 0);
            }
            if (in.patch_labels.size() !=
                static_cast<std::size_t>(in.features.n_patches)) {
                throw Error(ErrorKind::MalformedFixture,
                            where + ".patch_labels must match the patch count");
            }
        }
        if (s.contains("pair_index")) {
            in.pair_index = static_cast<int>(get_number(s, "pair_index", where));
        }
        batch.samples.push_back(std::move(in));
    }
    for (const SampleInput& in : batch.samples) {
        if (in.pair_index < -1 ||
            in.pair_index >= static_cast<int>(batch.samples.size())) {
            throw Error(ErrorKind::MalformedFixture, "pair_index out of range");
        }
    }
    return batch;
}

LossWeights parse_weights_block(const json& doc, LossWeights weights) {
    reject_unknown_keys(doc, {"lambda1", "lambda2", "margin"}, "weights");
    if (doc.contains("lambda1")) weights.lambda1 = get_number(doc, "lambda1", "weights");
    if (doc.contains("lambda2")) weights.lambda2 = get_number(doc, "lambda2", "weights");
    if (doc.contains("margin")) weights.margin = get_number(doc, "margin", "weights");
    return weights;
}

// Central finite differences over every feature coordinate and both text
// embeddings; rel. err. = |fd - an| / max(1, |fd|, |an|).
double grad_check_max_err(const LossBatch& batch, const LossWeights& weights, double h) {
    const TotalLossResult analytic = total_loss(batch, weights);
    LossBatch probe = batch;
    double max_err = 0.0;
    auto check_coord = [&](double* slot, double an) {
        const double keep = *slot;
        *slot = keep + h;
        const double up = total_loss(probe, weights).breakdown.l_total;
        *slot = keep - h;
        const double down = total_loss(probe, weights).breakdown.l_total;
        *slot = keep;
        const double fd = (up - down) / (2.0 * h);
        const double err =
            std::fabs(fd - an) / std::max({1.0, std::fabs(fd), std::fabs(an)});
        max_err = std::max(max_err, err);
    };
    for (std::size_t k = 0; k < probe.samples.size(); ++k) {
        PatchFeatures& f = probe.samples[k].features;
        for (std::size_t c = 0; c < f.cls.size(); ++c) {
            check_coord(&f.cls[c], analytic.sample_grads[k].d_cls[c]);
        }
        for (std::size_t c = 0; c < f.patches.size(); ++c) {
            check_coord(&f.patches[c], analytic.sample_grads[k].d_patches[c]);
        }
    }
    for (std::size_t c = 0; c < probe.text.t_real.size(); ++c) {
        check_coord(&probe.text.t_real[c], analytic.d_t_real[c]);
    }
    for (std::size_t c = 0; c < probe.text.t_fake.size(); ++c) {
        check_coord(&probe.text.t_fake[c], analytic.d_t_fake[c]);
    }
    return max_err;
}

struct LossesArgs {
    std::string batch_file;
    std::optional<double> lambda1;
    std::optional<double> lambda2;
    std::optional<double> margin;
    bool grad_check = false;
    double grad_tol = 1e-5;
    std::string output = "-";
};

int cmd_losses(const LossesArgs& args) {
    json doc;
    try {
        doc = json::parse(read_text_file(args.batch_file));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::MalformedFixture,
                    args.batch_file + ": " + std::string(e.what()));
    }
    if (!doc.is_object()) {
        throw Error(ErrorKind::MalformedFixture, "batch document must be a JSON object");
    }
    LossBatch batch = parse_loss_batch(doc);

    // precedence: built-in defaults, then the file's weights block, then flags
    LossWeights weights;
    if (doc.contains("weights")) {
        if (!doc["weights"].is_object()) {
            throw Error(ErrorKind::MalformedFixture, "weights must be an object");
        }
        weights = parse_weights_block(doc["weights"], weights);
    }
    if (args.lambda1) weights.lambda1 = *args.lambda1;
    if (args.lambda2) weights.lambda2 = *args.lambda2;
    if (args.margin) weights.margin = *args.margin;

    RunManifest manifest = make_manifest("losses");
    json config;
    config["lambda1"] = weights.lambda1;
    config["lambda2"] = weights.lambda2;
    config["margin"] = weights.margin;
    config["grad_check"] = args.grad_check;
    if (args.grad_check) config["grad_tol"] = args.grad_tol;
    manifest.config_json = config.dump();
    manifest.inputs.push_back({args.batch_file, file_digest(args.batch_file)});

    const TotalLossResult result = total_loss(batch, weights);
    json report;
    report["manifest"] = manifest_block(manifest);
    report["weights"] = {{"lambda1", weights.lambda1},
                         {"lambda2", weights.lambda2},
                         {"margin", weights.margin}};
    json breakdown;
    breakdown["l_cls"] = fmt(result.breakdown.l_cls);
    breakdown["l_rank_intra"] = fmt(result.breakdown.l_rank_intra);
    breakdown["l_rank_pair"] = fmt(result.breakdown.l_rank_pair);
    breakdown["l_total"] = fmt(result.breakdown.l_total);
    breakdown["n_fake_images_used"] = result.breakdown.n_fake_images_used;
    breakdown["n_pairs_used"] = result.breakdown.n_pairs_used;
    breakdown["n_skipped"] = result.breakdown.n_skipped;
    report["breakdown"] = breakdown;
    json probs = json::array();
    for (const double p : result.global_probs) probs.push_back(fmt(p));
    report["global_probs"] = probs;

    int code = 0;
    if (args.grad_check) {
        const double h = 1e-5;
        const double max_err = grad_check_max_err(batch, weights, h);
        const bool pass = max_err < args.grad_tol;
        json gc;
        gc["step"] = fmt_sci(h);
        gc["max_rel_err"] = fmt_sci(max_err);
        gc["tolerance"] = fmt_sci(args.grad_tol);
        gc["pass"] = pass;
        report["grad_check"] = gc;
        if (!pass) {
            std::cerr << "error: gradient check failed (max rel err " << fmt_sci(max_err)
                      << " >= " << fmt_sci(args.grad_tol) << ")\n";
            code = 4;
        }
    }
    write_output(args.output, report.dump(2));
    return code;
}

// ---- toytrain -------------------------------------------------------------

struct ToytrainArgs {
    std::string config_file;  // empty = defaults
    std::string output = "-";
    std::string checkpoint;  // empty = skip
};

int cmd_toytrain(const ToytrainArgs& args) {
    ToyRunSpec spec = args.config_file.empty()
                          ? default_toy_run_spec()
                          : parse_toy_run_spec(read_text_file(args.config_file));

    RunManifest manifest = make_manifest("toytrain");
    manifest.seed = spec.config.seed;
    manifest.config_json = serialize_toy_run_spec(spec);
    if (!args.config_file.empty()) {
        manifest.inputs.push_back({args.config_file, file_digest(args.config_file)});
    }

    TrainReport report;
    if (spec.config.steps == 0) {
        // untrained baseline: initialize and evaluate, empty trajectory
        ToyConfig init_cfg = spec.config;
        init_cfg.steps = 1;  // init_model validates the full config
        if (spec.domains.empty()) {
            throw Error(ErrorKind::InvalidSpec, "training needs at least one domain");
        }
        Rng init_rng(derive_seed(spec.config.seed, "init"));
        report.model = init_model(init_cfg, init_rng);
        report.config = spec.config;
        report.seed = spec.config.seed;
        if (spec.domains.size() >= 2) {
            const EvalResult eval = evaluate(report.model, spec.domains,
                                             spec.config.eval_pairs,
                                             derive_seed(spec.config.seed, "eval"));
            report.dataset_ids = eval.matrix.dataset_ids;
            report.intra_auc_final = eval.intra_auc;
            report.summary = eval.summary;
        } else {
            report.dataset_ids.push_back(spec.domains[0].dataset_id);
            Rng rng(derive_seed(spec.config.seed, "eval_" + spec.domains[0].dataset_id));
            SynthDomainSpec eval_spec = spec.domains[0];
            eval_spec.n_real = spec.config.eval_pairs;
            eval_spec.n_fake = spec.config.eval_pairs;
            const SyntheticFaceBatch batch =
                gen_synthetic_batch(eval_spec, spec.config.n_patches, spec.config.d, rng);
            const ForwardResult out = forward(report.model, batch);
            std::vector<double> fakes;
            std::vector<double> reals;
            for (std::size_t k = 0; k < batch.items.size(); ++k) {
                (batch.items[k].label ? fakes : reals).push_back(out.global_probs[k]);
            }
            report.intra_auc_final.push_back(rank_auc(fakes, reals).value);
        }
    } else {
        report = train(spec.config, spec.domains);
    }

    json out = json::parse(serialize_train_report(report, spec));
    out["manifest"] = manifest_block(manifest);
    write_output(args.output, out.dump(2));
    if (!args.checkpoint.empty()) {
        write_output(args.checkpoint, serialize_model(report.model));
    }
    return 0;
}

// ---- simulate -------------------------------------------------------------

DomainSpec parse_domain_spec(const json& doc) {
    reject_unknown_keys(doc,
                        {"dataset_id", "real_mean", "real_std", "fake_mean", "fake_std",
                         "n_real", "n_fake", "seed"},
                        "domain spec");
    DomainSpec spec;
    spec.dataset_id = "sim";
    if (doc.contains("dataset_id")) {
        if (!doc["dataset_id"].is_string()) {
            throw Error(ErrorKind::MalformedFixture, "dataset_id must be a string");
        }
        spec.dataset_id = doc["dataset_id"].get<std::string>();
    }
    if (doc.contains("real_mean")) spec.real_mean = get_number(doc, "real_mean", "domain spec");
    if (doc.contains("real_std")) spec.real_std = get_number(doc, "real_std", "domain spec");
    if (doc.contains("fake_mean")) spec.fake_mean = get_number(doc, "fake_mean", "domain spec");
    if (doc.contains("fake_std")) spec.fake_std = get_number(doc, "fake_std", "domain spec");
    if (doc.contains("n_real")) {
        spec.n_real = static_cast<std::int64_t>(get_number(doc, "n_real", "domain spec"));
    }
    if (doc.contains("n_fake")) {
        spec.n_fake = static_cast<std::int64_t>(get_number(doc, "n_fake", "domain spec"));
    }
    if (doc.contains("seed")) {
        const double seed = get_number(doc, "seed", "domain spec");
        if (seed < 0) {
            throw Error(ErrorKind::MalformedFixture, "seed must be non-negative");
        }
        spec.seed = static_cast<std::uint64_t>(seed);
    }
    return spec;
}

json domain_spec_block(const DomainSpec& spec) {
    json out;
    out["dataset_id"] = spec.dataset_id;
    out["real_mean"] = spec.real_mean;
    out["real_std"] = spec.real_std;
    out["fake_mean"] = spec.fake_mean;
    out["fake_std"] = spec.fake_std;
    out["n_real"] = spec.n_real;
    out["n_fake"] = spec.n_fake;
    out["seed"] = spec.seed;
    return out;
}

struct SimulateArgs {
    std::string spec_file;  // empty = defaults (dataset_id "sim")
    std::vector<double> shifts = {0.0};
    std::optional<std::uint64_t> seed;
    std::string scores_out = "-";
    std::string hist_out;  // empty = skip
    std::int64_t bins = 20;
    double lo = 0.0;
    double hi = 1.0;
};

int cmd_simulate(const SimulateArgs& args) {
    DomainSpec base;
    base.dataset_id = "sim";
    if (!args.spec_file.empty()) {
        json doc;
        try {
            doc = json::parse(read_text_file(args.spec_file));
        } catch (const json::exception& e) {
            throw Error(ErrorKind::MalformedFixture,
                        args.spec_file + ": " + std::string(e.what()));
        }
        if (!doc.is_object()) {
            throw Error(ErrorKind::MalformedFixture, "domain spec must be a JSON object");
        }
        base = parse_domain_spec(doc);
    }
    if (args.seed) base.seed = *args.seed;

    RunManifest manifest = make_manifest("simulate");
    manifest.seed = base.seed;
    json config;
    config["base"] = domain_spec_block(base);
    json shift_list = json::array();
    for (const double s : args.shifts) shift_list.push_back(s);
    config["shifts"] = shift_list;
    config["bins"] = args.bins;
    config["lo"] = args.lo;
    config["hi"] = args.hi;
    manifest.config_json = config.dump();
    if (!args.spec_file.empty()) {
        manifest.inputs.push_back({args.spec_file, file_digest(args.spec_file)});
    }

    const ScoreStore store = make_shift_scenario(base, args.shifts);
    std::ostringstream lines;
    for (const Sample& sample : store.samples()) {
        lines << serialize_sample(sample) << "\n";
    }
    write_output(args.scores_out, lines.str());

    if (!args.hist_out.empty()) {
        json report;
        report["manifest"] = manifest_block(manifest);
        report["bins"] = args.bins;
        report["lo"] = fmt(args.lo);
        report["hi"] = fmt(args.hi);
        json domains = json::array();
        for (const std::string& id : store.datasets()) {
            const Partition part = store.partition(id);
            const Histogram hist = make_histogram(part.reals, part.fakes, args.bins,
                                                  args.lo, args.hi);
            json entry;
            entry["dataset"] = id;
            json edges = json::array();
            for (const double e : hist.bin_edges) edges.push_back(fmt(e));
            entry["bin_edges"] = edges;
            entry["counts_real"] = hist.counts_real;
            entry["counts_fake"] = hist.counts_fake;
            domains.push_back(entry);
        }
        report["domains"] = domains;
        write_output(args.hist_out, report.dump(2));
    }
    return 0;
}

// ---- augment --------------------------------------------------------------

LandmarkSet parse_landmarks(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::MalformedFixture, path + ": " + std::string(e.what()));
    }
    if (!doc.is_object() || !doc.contains("points") || !doc["points"].is_array() ||
        doc["points"].size() != 68) {
        throw Error(ErrorKind::MalformedFixture,
                    "landmark file must hold a \"points\" array of 68 [x, y] pairs");
    }
    LandmarkSet landmarks;
    for (std::size_t k = 0; k < 68; ++k) {
        const json& p = doc["points"][k];
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
            throw Error(ErrorKind::MalformedFixture,
                        "landmark point " + std::to_string(k) + " must be [x, y]");
        }
        landmarks.points[k] = {p[0].get<double>(), p[1].get<double>()};
    }
    return landmarks;
}

struct AugmentArgs {
    std::string real_path;
    std::string fake_path;
    std::string landmarks_path;
    std::string mode = "random";
    std::vector<std::string> regions = {"left_half", "right_half"};
    std::uint64_t seed = 0;
    double sigma = 5.0;
    double threshold = 0.5;
    double p_swap = 0.5;
    int patch = 8;
    std::string image_out = "augmented.ppm";
    std::string mask_out = "mask.pgm";
    std::string labels_out = "labels.json";
};

int cmd_augment(const AugmentArgs& args) {
    const ImageBuffer real = load_ppm(args.real_path);
    const ImageBuffer fake = load_ppm(args.fake_path);
    const LandmarkSet landmarks = parse_landmarks(args.landmarks_path);

    std::vector<Region> regions;
    for (const std::string& name : args.regions) {
        if (name.empty()) continue;
        regions.push_back(parse_region(name));
    }

    RunManifest manifest = make_manifest("augment");
    manifest.seed = args.seed;
    json config;
    config["mode"] = args.mode;
    json region_list = json::array();
    for (const Region r : regions) region_list.push_back(region_name(r));
    config["regions"] = region_list;
    config["sigma"] = args.sigma;
    config["threshold"] = args.threshold;
    config["p_swap"] = args.p_swap;
    config["patch"] = args.patch;
    manifest.config_json = config.dump();
    manifest.inputs.push_back({args.real_path, file_digest(args.real_path)});
    manifest.inputs.push_back({args.fake_path, file_digest(args.fake_path)});
    manifest.inputs.push_back({args.landmarks_path, file_digest(args.landmarks_path)});

    AugmentationResult result;
    Rng rng(derive_seed(args.seed, "augment"));
    if (args.mode == "swap") {
        result.mode = AugMode::Swap;
        result.regions = regions;
        result.mask = region_mask(landmarks, regions, real.height, real.width);
        result.image = blend_swap(real, fake, result.mask);
    } else if (args.mode == "self_blend") {
        result.mode = AugMode::SelfBlend;
        result.regions = regions;
        result.transform = sample_transform(rng);
        const BinaryMask hard = region_mask(landmarks, regions, real.height, real.width);
        const SoftMask soft = smooth_mask(hard, args.sigma);
        result.image = self_blend(real, result.transform, soft);
        result.mask = threshold_mask(soft, args.threshold);
    } else if (args.mode == "random") {
        AugmentationConfig aug;
        aug.p_swap = args.p_swap;
        aug.sigma = args.sigma;
        aug.mask_threshold = args.threshold;
        result = sample_augmentation(real, fake, landmarks, aug, rng);
    } else {
        throw Error(ErrorKind::InvalidSpec,
                    "mode must be swap, self_blend, or random, got '" + args.mode + "'");
    }

    save_ppm(args.image_out, result.image);
    save_pgm(args.mask_out, result.mask);

    const PatchLabels labels = downsample_mask(result.mask, args.patch);
    json report;
    report["manifest"] = manifest_block(manifest);
    report["mode"] = aug_mode_name(result.mode);
    json used_regions = json::array();
    for (const Region r : result.regions) used_regions.push_back(region_name(r));
    report["regions"] = used_regions;
    json transform;
    transform["gain"] = {result.transform.gain[0], result.transform.gain[1],
                         result.transform.gain[2]};
    transform["bias"] = {result.transform.bias[0], result.transform.bias[1],
                         result.transform.bias[2]};
    transform["resample"] = result.transform.resample;
    report["transform"] = transform;
    report["grid_h"] = labels.grid_h;
    report["grid_w"] = labels.grid_w;
    report["patch"] = args.patch;
    json rows = json::array();
    for (int gy = 0; gy < labels.grid_h; ++gy) {
        json row = json::array();
        for (int gx = 0; gx < labels.grid_w; ++gx) row.push_back(labels.at(gy, gx));
        rows.push_back(row);
    }
    report["labels"] = rows;
    report["mask_coverage"] = fmt(static_cast<double>(result.mask.popcount()) /
                                  (static_cast<double>(real.height) * real.width));
    write_output(args.labels_out, report.dump(2));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-domain forgery-detection evaluation toolkit"};
    app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
    app.require_subcommand(1);

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "cross-dataset AUC analysis of JSONL scores");
    eval->add_option("files", eval_args.files, "JSONL score file(s)")->required();
    eval->add_option("--level", eval_args.level, "frame or video")
        ->check(CLI::IsMember({"frame", "video"}));
    eval->add_option("--agg", eval_args.agg, "video aggregation: mean, max, or median")
        ->check(CLI::IsMember({"mean", "max", "median"}));
    eval->add_option("--format", eval_args.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    eval->add_option("-o,--output", eval_args.output, "report path, - for stdout");

    VerifyArgs verify_args;
    CLI::App* verify =
        app.add_subcommand("verify-table", "recheck published summary rows from per-pair values");
    verify->add_option("names", verify_args.names, "fixture name(s)");
    verify->add_flag("--all", verify_args.all, "verify every fixture in the directory");
    verify->add_option("--dir", verify_args.dir, "fixture directory");
    verify->add_option("--tolerance", verify_args.tolerance, "per-field tolerance");
    verify->add_option("-o,--output", verify_args.output, "report path, - for stdout");

    LossesArgs losses_args;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double margin = 0.0;
    CLI::App* losses =
        app.add_subcommand("losses", "loss breakdown (and gradient check) for a batch file");
    losses->add_option("batch", losses_args.batch_file, "batch JSON document")->required();
    CLI::Option* l1 = losses->add_option("--lambda1", lambda1, "intra-rank weight override");
    CLI::Option* l2 = losses->add_option("--lambda2", lambda2, "pair-rank weight override");
    CLI::Option* mg = losses->add_option("--margin", margin, "hinge margin override");
    losses->add_flag("--grad-check", losses_args.grad_check,
                     "finite-difference gradient verification");
    losses->add_option("--grad-tol", losses_args.grad_tol, "max relative error allowed");
    losses->add_option("-o,--output", losses_args.output, "report path, - for stdout");

    ToytrainArgs toytrain_args;
    CLI::App* toytrain =
        app.add_subcommand("toytrain", "train the desk-scale model and evaluate it");
    toytrain->add_option("config", toytrain_args.config_file,
                         "run spec JSON (omit for the built-in planted task)");
    toytrain->add_option("-o,--output", toytrain_args.output, "report path, - for stdout");
    toytrain->add_option("--checkpoint", toytrain_args.checkpoint, "write final weights here");

    SimulateArgs simulate_args;
    CLI::App* simulate =
        app.add_subcommand("simulate", "generate shifted synthetic score domains");
    simulate->add_option("spec", simulate_args.spec_file,
                         "domain spec JSON (omit for defaults)");
    simulate->add_option("--shifts", simulate_args.shifts, "mean shifts, one domain each")
        ->delimiter(',');
    std::uint64_t sim_seed = 0;
    CLI::Option* seed_opt = simulate->add_option("--seed", sim_seed, "override the spec seed");
    simulate->add_option("-o,--scores", simulate_args.scores_out,
                         "JSONL output path, - for stdout");
    simulate->add_option("--hist", simulate_args.hist_out, "histogram report path");
    simulate->add_option("--bins", simulate_args.bins, "histogram bin count");
    simulate->add_option("--lo", simulate_args.lo, "histogram lower edge");
    simulate->add_option("--hi", simulate_args.hi, "histogram upper edge");

    AugmentArgs augment_args;
    CLI::App* augment =
        app.add_subcommand("augment", "blend a training forgery and emit patch labels");
    augment->add_option("real", augment_args.real_path, "real image (PPM)")->required();
    augment->add_option("fake", augment_args.fake_path, "fake image (PPM)")->required();
    augment->add_option("landmarks", augment_args.landmarks_path, "landmark JSON")->required();
    augment->add_option("--mode", augment_args.mode, "swap, self_blend, or random");
    augment->add_option("--regions", augment_args.regions, "region names")->delimiter(',');
    augment->add_option("--seed", augment_args.seed, "sampling seed");
    augment->add_option("--sigma", augment_args.sigma, "soft-mask blur width");
    augment->add_option("--threshold", augment_args.threshold, "soft-mask binarization");
    augment->add_option("--p-swap", augment_args.p_swap, "random-mode swap probability");
    augment->add_option("--patch", augment_args.patch, "patch size for label downsampling");
    augment->add_option("--image-out", augment_args.image_out, "blended image path");
    augment->add_option("--mask-out", augment_args.mask_out, "binary mask path");
    augment->add_option("--labels-out", augment_args.labels_out, "patch-label report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // flag misuse is an input error like any other
    }

    if (l1->count() > 0) losses_args.lambda1 = lambda1;
    if (l2->count() > 0) losses_args.lambda2 = lambda2;
    if (mg->count() > 0) losses_args.margin = margin;
    if (seed_opt->count() > 0) simulate_args.seed = sim_seed;

    try {
        if (eval->parsed()) return cmd_eval(eval_args);
        if (verify->parsed()) return cmd_verify_table(verify_args);
        if (losses->parsed()) return cmd_losses(losses_args);
        if (toytrain->parsed()) return cmd_toytrain(toytrain_args);
        if (simulate->parsed()) return cmd_simulate(simulate_args);
        if (augment->parsed()) return cmd_augment(augment_args);
    } catch (const Error& e) {
        std::cerr << "error: [" << error_name(e.kind()) << "] " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
