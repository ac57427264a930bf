#include "xauc/cross_auc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"
#include "xauc/error.hpp"
#include "xauc/format.hpp"

namespace xauc {

namespace {

using nlohmann::json;

struct LabelledScores {
    std::vector<double> reals;
    std::vector<double> fakes;
};

LabelledScores scores_at_level(const ScoreStore& store, const std::string& dataset_id,
                               Level level, VideoAgg agg) {
    LabelledScores out;
    if (level == Level::Frame) {
        Partition p = store.partition(dataset_id);
        out.reals = std::move(p.reals);
        out.fakes = std::move(p.fakes);
        return out;
    }
    const VideoScoreSet set = store.aggregate_video(dataset_id, agg);
    for (const VideoEntry& e : set.entries) {
        (e.label == Label::Fake ? out.fakes : out.reals).push_back(e.score);
    }
    return out;
}

}  // namespace

AucResult pair_auc(const ScoreStore& store, const std::string& i, const std::string& j,
                   Level level, VideoAgg agg) {
    if (i == j) {
        throw Error(ErrorKind::SameDataset,
                    "pair_auc requires two distinct datasets, got '" + i + "' twice");
    }
    const LabelledScores ri = scores_at_level(store, i, level, agg);
    const LabelledScores fj = scores_at_level(store, j, level, agg);
    if (fj.fakes.empty()) {
        throw Error(ErrorKind::EmptyClass, "dataset '" + j + "' has no fakes");
    }
    if (ri.reals.empty()) {
        throw Error(ErrorKind::EmptyClass, "dataset '" + i + "' has no reals");
    }
    return rank_auc(fj.fakes, ri.reals);
}

CrossAucMatrix cross_matrix(const ScoreStore& store, Level level, VideoAgg agg) {
    const std::vector<std::string>& ids = store.datasets();
    if (ids.size() < 2) {
        throw Error(ErrorKind::TooFewDatasets,
                    "cross matrix needs at least 2 datasets, got " + std::to_string(ids.size()));
    }
    const std::size_t k = ids.size();
    CrossAucMatrix m;
    m.dataset_ids = ids;
    m.cells.resize(k * k);

    std::vector<LabelledScores> per_dataset(k);
    for (std::size_t i = 0; i < k; ++i) {
        per_dataset[i] = scores_at_level(store, ids[i], level, agg);
    }
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            CrossCell& cell = m.at(i, j);
            const std::vector<double>& reals = per_dataset[i].reals;
            const std::vector<double>& fakes = per_dataset[j].fakes;
            if (reals.empty()) {
                cell.absent_reason = "EmptyClass: dataset '" + ids[i] + "' has no reals";
            } else if (fakes.empty()) {
                cell.absent_reason = "EmptyClass: dataset '" + ids[j] + "' has no fakes";
            } else {
                cell.auc = rank_auc(fakes, reals);
            }
        }
    }
    return m;
}

CrossAucSummary summarize(const CrossAucMatrix& matrix) {
    const std::size_t k = matrix.dataset_ids.size();
    std::vector<double> cross;
    std::vector<double> intra;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const CrossCell& cell = matrix.at(i, j);
            if (!cell.auc) continue;
            (i == j ? intra : cross).push_back(cell.auc->value);
        }
    }
    if (cross.empty()) {
        throw Error(ErrorKind::NoCrossCells, "no off-diagonal cells present");
    }
    CrossAucSummary s;
    s.n_pairs = static_cast<std::int64_t>(cross.size());
    s.n_intra = static_cast<std::int64_t>(intra.size());
    double sum = 0.0;
    double mn = cross.front();
    for (double v : cross) {
        sum += v;
        mn = std::min(mn, v);
    }
    s.cross_avg = sum / static_cast<double>(cross.size());
    s.cross_min = mn;
    double sq = 0.0;
    for (double v : cross) {
        const double d = v - s.cross_avg;
        sq += d * d;
    }
    s.cross_std = std::sqrt(sq / static_cast<double>(cross.size()));
    if (!intra.empty()) {
        double isum = 0.0;
        for (double v : intra) isum += v;
        s.intra_avg = isum / static_cast<double>(intra.size());
    }
    return s;
}

TableFixture load_table_fixture(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::MalformedFixture, "cannot open fixture file '" + path + "'");
    }
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw Error(ErrorKind::MalformedFixture, "fixture is not a JSON object: " + path);
    }
    for (const char* field : {"name", "dataset_ids", "cells", "claimed"}) {
        if (!doc.contains(field)) {
            throw Error(ErrorKind::MalformedFixture,
                        std::string("fixture missing field '") + field + "'");
        }
    }
    TableFixture f;
    f.name = doc["name"].get<std::string>();
    for (const auto& id : doc["dataset_ids"]) {
        f.dataset_ids.push_back(id.get<std::string>());
    }
    const std::size_t k = f.dataset_ids.size();
    if (k < 2) {
        throw Error(ErrorKind::MalformedFixture, "fixture needs at least 2 dataset ids");
    }
    auto index_of = [&](const std::string& id) -> std::size_t {
        auto it = std::find(f.dataset_ids.begin(), f.dataset_ids.end(), id);
        if (it == f.dataset_ids.end()) {
            throw Error(ErrorKind::MalformedFixture, "cell references unknown dataset '" + id + "'");
        }
        return static_cast<std::size_t>(it - f.dataset_ids.begin());
    };
    f.values.assign(k * k, std::nan(""));
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& cell : doc["cells"]) {
        if (!cell.contains("real") || !cell.contains("fake") || !cell.contains("value")) {
            throw Error(ErrorKind::MalformedFixture, "cell needs fields real, fake, value");
        }
        const std::size_t i = index_of(cell["real"].get<std::string>());
        const std::size_t j = index_of(cell["fake"].get<std::string>());
        if (i == j) {
            throw Error(ErrorKind::MalformedFixture,
                        "diagonal cell for '" + f.dataset_ids[i] + "' not allowed in fixture");
        }
        if (!seen.insert({i, j}).second) {
            throw Error(ErrorKind::MalformedFixture,
                        "duplicate cell (" + f.dataset_ids[i] + ", " + f.dataset_ids[j] + ")");
        }
        if (!cell["value"].is_number()) {
            throw Error(ErrorKind::MalformedFixture, "cell value must be a number");
        }
        const double v = cell["value"].get<double>();
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::MalformedFixture, "cell value must be finite");
        }
        f.values[i * k + j] = v;
    }
    if (seen.size() != k * (k - 1)) {
        throw Error(ErrorKind::MalformedFixture,
                    "expected " + std::to_string(k * (k - 1)) + " off-diagonal cells, got " +
                        std::to_string(seen.size()));
    }
    const json& claimed = doc["claimed"];
    for (const char* field : {"cross_avg", "cross_min", "cross_std"}) {
        if (!claimed.contains(field) || !claimed[field].is_number()) {
            throw Error(ErrorKind::MalformedFixture,
                        std::string("claimed summary missing numeric field '") + field + "'");
        }
    }
    f.claimed_avg = claimed["cross_avg"].get<double>();
    f.claimed_min = claimed["cross_min"].get<double>();
    f.claimed_std = claimed["cross_std"].get<double>();
    return f;
}

VerifyReport verify_published(const TableFixture& fixture, double tolerance) {
    const std::size_t k = fixture.dataset_ids.size();
    std::vector<double> vals;
    vals.reserve(k * (k - 1));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (i != j) vals.push_back(fixture.values[i * k + j]);
        }
    }
    double sum = 0.0;
    double mn = vals.front();
    for (double v : vals) {
        sum += v;
        mn = std::min(mn, v);
    }
    const double avg = sum / static_cast<double>(vals.size());
    double sq = 0.0;
    for (double v : vals) sq += (v - avg) * (v - avg);
    const double sd = std::sqrt(sq / static_cast<double>(vals.size()));

    VerifyReport report;
    report.name = fixture.name;
    report.tolerance = tolerance;
    report.pass = true;
    auto check = [&](const char* field, double computed, double claimed) {
        FieldCheck c;
        c.field = field;
        c.computed = computed;
        c.claimed = claimed;
        c.delta = std::fabs(computed - claimed);
        c.pass = c.delta <= tolerance;
        report.pass = report.pass && c.pass;
        report.fields.push_back(c);
    };
    check("cross_avg", avg, fixture.claimed_avg);
    check("cross_min", mn, fixture.claimed_min);
    check("cross_std", sd, fixture.claimed_std);
    return report;
}

std::string matrix_to_csv(const CrossAucMatrix& matrix) {
    std::string out = "real\\fake";
    for (const std::string& id : matrix.dataset_ids) {
        out += ",";
        out += id;
    }
    out += "\n";
    const std::size_t k = matrix.dataset_ids.size();
    for (std::size_t i = 0; i < k; ++i) {
        out += matrix.dataset_ids[i];
        for (std::size_t j = 0; j < k; ++j) {
            out += ",";
            const CrossCell& cell = matrix.at(i, j);
            if (cell.auc) out += format_fixed(cell.auc->value, 6);
        }
        out += "\n";
    }
    return out;
}

}  // namespace xauc
