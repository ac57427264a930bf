#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xauc/score_store.hpp"

namespace xauc {

struct AucResult {
    double value = 0.0;
    std::int64_t n_pos = 0;
    std::int64_t n_neg = 0;
    std::int64_t n_tied_pairs = 0;
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;
};

enum class Level { Frame, Video };

Level parse_level(const std::string& name);
const char* level_name(Level level);

// Tie-aware Mann-Whitney AUC via midranks, O((m+n) log(m+n)). Positives are
// fakes: higher score = more fake. Ties count 0.5.
AucResult rank_auc(const std::vector<double>& pos, const std::vector<double>& neg);

// Independent O(m*n) pair-counting oracle; bit-identical to rank_auc.
AucResult auc_bruteforce(const std::vector<double>& pos, const std::vector<double>& neg);

// ROC swept over distinct scores descending; trapezoid area equals rank_auc.
RocCurve roc_curve(const std::vector<double>& pos, const std::vector<double>& neg);

double trapezoid_area(const RocCurve& curve);

// AUC of one dataset's own reals vs. its own fakes.
AucResult intra_auc(const ScoreStore& store, const std::string& dataset_id,
                    Level level, VideoAgg agg = VideoAgg::Mean);

}  // namespace xauc
