#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xauc/roc_auc.hpp"
#include "xauc/score_store.hpp"

namespace xauc {

// Cell (i,j) pairs the reals of dataset i against the fakes of dataset j;
// the diagonal is ordinary intra-dataset AUC. A cell is absent only when one
// side of the pairing is empty; the reason string records which.
struct CrossCell {
    std::optional<AucResult> auc;
    std::string absent_reason;
};

struct CrossAucMatrix {
    std::vector<std::string> dataset_ids;
    std::vector<CrossCell> cells;  // K*K, row-major; row = real-provider

    const CrossCell& at(std::size_t i, std::size_t j) const {
        return cells[i * dataset_ids.size() + j];
    }
    CrossCell& at(std::size_t i, std::size_t j) {
        return cells[i * dataset_ids.size() + j];
    }
};

struct CrossAucSummary {
    double cross_avg = 0.0;
    double cross_min = 0.0;
    double cross_std = 0.0;  // population std over present off-diagonal cells
    double intra_avg = 0.0;  // only meaningful when n_intra > 0
    std::int64_t n_pairs = 0;
    std::int64_t n_intra = 0;
};

// AUC(reals of i, fakes of j), i != j; fakes are the positive class.
AucResult pair_auc(const ScoreStore& store, const std::string& i, const std::string& j,
                   Level level, VideoAgg agg = VideoAgg::Mean);

// Computes all K*K cells; absent pairings are recorded, not fatal.
CrossAucMatrix cross_matrix(const ScoreStore& store, Level level,
                            VideoAgg agg = VideoAgg::Mean);

CrossAucSummary summarize(const CrossAucMatrix& matrix);

// One published detector column: the 20 off-diagonal values plus the claimed
// summary row, shipped as a data file.
struct TableFixture {
    std::string name;
    std::vector<std::string> dataset_ids;
    // values[i*K + j] for i != j; diagonal slots unused
    std::vector<double> values;
    double claimed_avg = 0.0;
    double claimed_min = 0.0;
    double claimed_std = 0.0;
};

TableFixture load_table_fixture(const std::string& path);

struct FieldCheck {
    std::string field;
    double computed = 0.0;
    double claimed = 0.0;
    double delta = 0.0;  // |computed - claimed|
    bool pass = false;
};

struct VerifyReport {
    std::string name;
    std::vector<FieldCheck> fields;
    double tolerance = 0.0;
    bool pass = false;
};

// Recomputes avg/min/std from the fixture's 20 values and compares each field
// against the claimed summary at the given tolerance.
VerifyReport verify_published(const TableFixture& fixture, double tolerance = 0.0015);

// Header row of dataset ids, one row per real-provider; absent cells empty.
std::string matrix_to_csv(const CrossAucMatrix& matrix);

}  // namespace xauc
