#include "xauc/score_store.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>

#include "json.hpp"
#include "xauc/error.hpp"

namespace xauc {

namespace {

using nlohmann::json;

std::string dedup_key(const Sample& s) {
    // '\x1f' cannot appear in JSON string content unescaped, so the key is
    // collision-free across fields.
    std::string key = s.dataset_id;
    key.push_back('\x1f');
    key += s.video_id;
    key.push_back('\x1f');
    key += std::to_string(s.frame_idx);
    return key;
}

double aggregate(const std::vector<double>& frames, VideoAgg agg) {
    switch (agg) {
        case VideoAgg::Mean: {
            // summed in sorted order so the result is frame-order invariant
            std::vector<double> sorted = frames;
            std::sort(sorted.begin(), sorted.end());
            double sum = 0.0;
            for (double v : sorted) sum += v;
            return sum / static_cast<double>(sorted.size());
        }
        case VideoAgg::Max:
            return *std::max_element(frames.begin(), frames.end());
        case VideoAgg::Median: {
            std::vector<double> sorted = frames;
            std::sort(sorted.begin(), sorted.end());
            const std::size_t n = sorted.size();
            return n % 2 == 1 ? sorted[n / 2]
                              : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        }
    }
    return 0.0;
}

}  // namespace

Sample parse_sample_line(const std::string& line) {
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw Error(ErrorKind::MalformedLine, "line is not a JSON object");
    }
    for (const char* field : {"sample_id", "dataset", "video_id", "frame_idx", "label", "score"}) {
        if (!doc.contains(field)) {
            throw Error(ErrorKind::MalformedLine,
                        std::string("missing field '") + field + "'");
        }
    }
    Sample s;
    if (!doc["sample_id"].is_string() || !doc["dataset"].is_string() ||
        !doc["video_id"].is_string()) {
        throw Error(ErrorKind::MalformedLine, "id fields must be strings");
    }
    s.sample_id = doc["sample_id"].get<std::string>();
    s.dataset_id = doc["dataset"].get<std::string>();
    s.video_id = doc["video_id"].get<std::string>();
    if (!doc["frame_idx"].is_number_integer() || doc["frame_idx"].get<std::int64_t>() < 0) {
        throw Error(ErrorKind::MalformedLine, "frame_idx must be a non-negative integer");
    }
    s.frame_idx = doc["frame_idx"].get<std::int64_t>();
    if (!doc["label"].is_string()) {
        throw Error(ErrorKind::InvalidLabel, "label must be a string");
    }
    const std::string label = doc["label"].get<std::string>();
    if (label == "real") {
        s.label = Label::Real;
    } else if (label == "fake") {
        s.label = Label::Fake;
    } else {
        throw Error(ErrorKind::InvalidLabel, "label must be \"real\" or \"fake\", got \"" + label + "\"");
    }
    if (!doc["score"].is_number()) {
        throw Error(ErrorKind::InvalidScore, "score must be a JSON number");
    }
    s.score = doc["score"].get<double>();
    if (!std::isfinite(s.score)) {
        throw Error(ErrorKind::InvalidScore, "score must be finite");
    }
    return s;
}

std::string serialize_sample(const Sample& sample) {
    json doc;
    doc["sample_id"] = sample.sample_id;
    doc["dataset"] = sample.dataset_id;
    doc["video_id"] = sample.video_id;
    doc["frame_idx"] = sample.frame_idx;
    doc["label"] = label_name(sample.label);
    doc["score"] = sample.score;
    return doc.dump();
}

VideoAgg parse_video_agg(const std::string& name) {
    if (name == "mean") return VideoAgg::Mean;
    if (name == "max") return VideoAgg::Max;
    if (name == "median") return VideoAgg::Median;
    throw Error(ErrorKind::MalformedLine,
                "unknown video aggregation '" + name + "' (expected mean|max|median)");
}

const char* video_agg_name(VideoAgg agg) {
    switch (agg) {
        case VideoAgg::Mean: return "mean";
        case VideoAgg::Max: return "max";
        case VideoAgg::Median: return "median";
    }
    return "mean";
}

ScoreStore ScoreStore::ingest(std::istream& lines) {
    ScoreStore store;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            store.add(parse_sample_line(line));
        } catch (const Error& e) {
            throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return store;
}

void ScoreStore::add(const Sample& sample) {
    if (!std::isfinite(sample.score)) {
        throw Error(ErrorKind::InvalidScore, "score must be finite");
    }
    const std::string key = dedup_key(sample);
    auto [it, inserted] = key_index_.emplace(key, samples_.size());
    if (!inserted) {
        throw Error(ErrorKind::DuplicateKey,
                    "duplicate (dataset, video, frame) key: " + sample.dataset_id + "/" +
                        sample.video_id + "/" + std::to_string(sample.frame_idx));
    }
    auto bucket_it = buckets_.find(sample.dataset_id);
    if (bucket_it == buckets_.end()) {
        dataset_order_.push_back(sample.dataset_id);
        bucket_it = buckets_.emplace(sample.dataset_id, Bucket{}).first;
    }
    if (sample.label == Label::Real) {
        bucket_it->second.reals.push_back(samples_.size());
    } else {
        bucket_it->second.fakes.push_back(samples_.size());
    }
    samples_.push_back(sample);
}

bool ScoreStore::has_dataset(const std::string& dataset_id) const {
    return buckets_.count(dataset_id) != 0;
}

Partition ScoreStore::partition(const std::string& dataset_id) const {
    auto it = buckets_.find(dataset_id);
    if (it == buckets_.end()) {
        throw Error(ErrorKind::UnknownDataset, "unknown dataset '" + dataset_id + "'");
    }
    Partition p;
    p.reals.reserve(it->second.reals.size());
    p.fakes.reserve(it->second.fakes.size());
    for (std::size_t i : it->second.reals) p.reals.push_back(samples_[i].score);
    for (std::size_t i : it->second.fakes) p.fakes.push_back(samples_[i].score);
    return p;
}

VideoScoreSet ScoreStore::aggregate_video(const std::string& dataset_id, VideoAgg agg) const {
    auto it = buckets_.find(dataset_id);
    if (it == buckets_.end()) {
        throw Error(ErrorKind::UnknownDataset, "unknown dataset '" + dataset_id + "'");
    }
    // first-seen video order, one frame list per video
    std::vector<std::string> video_order;
    std::map<std::string, std::pair<Label, std::vector<double>>> frames;
    auto collect = [&](const std::vector<std::size_t>& indices) {
        for (std::size_t i : indices) {
            const Sample& s = samples_[i];
            auto [fit, inserted] = frames.emplace(
                s.video_id, std::make_pair(s.label, std::vector<double>{}));
            if (inserted) {
                video_order.push_back(s.video_id);
            } else if (fit->second.first != s.label) {
                throw Error(ErrorKind::MixedLabelVideo,
                            "video '" + s.video_id + "' in dataset '" + dataset_id +
                                "' mixes real and fake frames");
            }
            fit->second.second.push_back(s.score);
        }
    };
    // interleave in insertion order over the whole dataset
    std::vector<std::size_t> all = it->second.reals;
    all.insert(all.end(), it->second.fakes.begin(), it->second.fakes.end());
    std::sort(all.begin(), all.end());
    collect(all);

    VideoScoreSet out;
    out.dataset_id = dataset_id;
    out.entries.reserve(video_order.size());
    for (const std::string& vid : video_order) {
        const auto& [label, scores] = frames.at(vid);
        out.entries.push_back({vid, label, aggregate(scores, agg)});
    }
    return out;
}

ScoreStore ScoreStore::to_video_level(VideoAgg agg) const {
    ScoreStore out;
    for (const std::string& ds : dataset_order_) {
        const VideoScoreSet set = aggregate_video(ds, agg);
        for (const VideoEntry& e : set.entries) {
            Sample s;
            s.sample_id = e.video_id;
            s.dataset_id = ds;
            s.video_id = e.video_id;
            s.frame_idx = 0;
            s.label = e.label;
            s.score = e.score;
            out.add(s);
        }
    }
    return out;
}

}  // namespace xauc
