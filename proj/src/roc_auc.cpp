#include "xauc/roc_auc.hpp"

#include <algorithm>
#include <cmath>

#include "xauc/error.hpp"

namespace xauc {

namespace {

void require_nonempty(const std::vector<double>& pos, const std::vector<double>& neg) {
    if (pos.empty() || neg.empty()) {
        throw Error(ErrorKind::EmptyClass,
                    pos.empty() ? "positive (fake) class is empty" : "negative (real) class is empty");
    }
}

// Shared final division so the fast path and the oracle agree bit-for-bit:
// both count  2*wins + ties  in 64-bit integers first.
AucResult make_result(std::int64_t wins2, std::int64_t tied, std::int64_t m, std::int64_t n) {
    AucResult r;
    r.n_pos = m;
    r.n_neg = n;
    r.n_tied_pairs = tied;
    r.value = static_cast<double>(wins2) / (2.0 * static_cast<double>(m) * static_cast<double>(n));
    return r;
}

}  // namespace

Level parse_level(const std::string& name) {
    if (name == "frame") return Level::Frame;
    if (name == "video") return Level::Video;
    throw Error(ErrorKind::MalformedLine, "unknown level '" + name + "' (expected frame|video)");
}

const char* level_name(Level level) {
    return level == Level::Video ? "video" : "frame";
}

AucResult rank_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    require_nonempty(pos, neg);
    std::vector<double> p = pos;
    std::vector<double> n = neg;
    std::sort(p.begin(), p.end());
    std::sort(n.begin(), n.end());

    std::int64_t wins2 = 0;
    std::int64_t tied = 0;
    std::size_t i = 0;  // cursor into p
    std::size_t j = 0;  // cursor into n
    while (i < p.size()) {
        const double v = (j < n.size() && n[j] < p[i]) ? n[j] : p[i];
        if (v < p[i]) {
            // advance negatives strictly below the next positive
            while (j < n.size() && n[j] == v) ++j;
            continue;
        }
        // v == p[i]: count the tie group at this value on both sides
        std::int64_t cp = 0;
        while (i < p.size() && p[i] == v) { ++cp; ++i; }
        std::int64_t cn = 0;
        const std::int64_t below = static_cast<std::int64_t>(j);
        while (j < n.size() && n[j] == v) { ++cn; ++j; }
        wins2 += cp * (2 * below + cn);
        tied += cp * cn;
    }
    return make_result(wins2, tied,
                       static_cast<std::int64_t>(p.size()),
                       static_cast<std::int64_t>(n.size()));
}

AucResult auc_bruteforce(const std::vector<double>& pos, const std::vector<double>& neg) {
    require_nonempty(pos, neg);
    std::int64_t wins2 = 0;
    std::int64_t tied = 0;
    for (double p : pos) {
        for (double q : neg) {
            if (p > q) {
                wins2 += 2;  // full credit
            } else if (p == q) {
                wins2 += 1;  // half credit
                ++tied;
            }
        }
    }
    return make_result(wins2, tied,
                       static_cast<std::int64_t>(pos.size()),
                       static_cast<std::int64_t>(neg.size()));
}

RocCurve roc_curve(const std::vector<double>& pos, const std::vector<double>& neg) {
    require_nonempty(pos, neg);
    std::vector<double> all = pos;
    all.insert(all.end(), neg.begin(), neg.end());
    std::sort(all.begin(), all.end(), std::greater<double>());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    std::vector<double> p = pos;
    std::vector<double> n = neg;
    std::sort(p.begin(), p.end(), std::greater<double>());
    std::sort(n.begin(), n.end(), std::greater<double>());

    RocCurve curve;
    curve.points.push_back({0.0, 0.0});
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (double threshold : all) {  // classify score >= threshold as fake
        while (tp < p.size() && p[tp] >= threshold) ++tp;
        while (fp < n.size() && n[fp] >= threshold) ++fp;
        curve.points.push_back({static_cast<double>(fp) / static_cast<double>(n.size()),
                                static_cast<double>(tp) / static_cast<double>(p.size())});
    }
    return curve;
}

double trapezoid_area(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
        const RocPoint& a = curve.points[k - 1];
        const RocPoint& b = curve.points[k];
        area += 0.5 * (b.fpr - a.fpr) * (a.tpr + b.tpr);
    }
    return area;
}

AucResult intra_auc(const ScoreStore& store, const std::string& dataset_id,
                    Level level, VideoAgg agg) {
    if (level == Level::Frame) {
        const Partition p = store.partition(dataset_id);
        return rank_auc(p.fakes, p.reals);
    }
    const VideoScoreSet set = store.aggregate_video(dataset_id, agg);
    std::vector<double> reals;
    std::vector<double> fakes;
    for (const VideoEntry& e : set.entries) {
        (e.label == Label::Fake ? fakes : reals).push_back(e.score);
    }
    return rank_auc(fakes, reals);
}

}  // namespace xauc
