#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace xauc {

enum class Label { Real, Fake };

inline const char* label_name(Label l) { return l == Label::Fake ? "fake" : "real"; }

struct Sample {
    std::string sample_id;
    std::string dataset_id;
    std::string video_id;  // equals sample_id for image-only datasets
    std::int64_t frame_idx = 0;
    Label label = Label::Real;
    double score = 0.0;
};

// Parses one JSONL record. Unknown extra fields are ignored.
Sample parse_sample_line(const std::string& line);

// Serializes a Sample back to its one-line JSON form (round-trip safe).
std::string serialize_sample(const Sample& sample);

// Frame scores for one dataset, split by label, in insertion order.
struct Partition {
    std::vector<double> reals;
    std::vector<double> fakes;
};

struct VideoEntry {
    std::string video_id;
    Label label = Label::Real;
    double score = 0.0;
};

struct VideoScoreSet {
    std::string dataset_id;
    std::vector<VideoEntry> entries;
};

enum class VideoAgg { Mean, Max, Median };

VideoAgg parse_video_agg(const std::string& name);
const char* video_agg_name(VideoAgg agg);

// Immutable once built: ingest/add during construction, then share freely.
class ScoreStore {
public:
    // Reads JSONL from a stream. Parse errors and duplicate keys are reported
    // with 1-based line numbers.
    static ScoreStore ingest(std::istream& lines);

    void add(const Sample& sample);

    const std::vector<Sample>& samples() const { return samples_; }

    // Dataset ids in first-seen order.
    const std::vector<std::string>& datasets() const { return dataset_order_; }

    bool has_dataset(const std::string& dataset_id) const;

    // Frame-level scores of one dataset, split by label; either side may be
    // empty (downstream AUC rejects empties itself).
    Partition partition(const std::string& dataset_id) const;

    // Per-video aggregated scores; every video must carry a single label.
    VideoScoreSet aggregate_video(const std::string& dataset_id,
                                  VideoAgg agg = VideoAgg::Mean) const;

    // Collapses frames to one pseudo-frame per video so that every frame-level
    // computation can run unchanged at video level.
    ScoreStore to_video_level(VideoAgg agg = VideoAgg::Mean) const;

    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }

private:
    struct Bucket {
        std::vector<std::size_t> reals;  // indices into samples_
        std::vector<std::size_t> fakes;
    };

    std::vector<Sample> samples_;
    std::vector<std::string> dataset_order_;
    std::map<std::string, Bucket> buckets_;
    std::map<std::string, std::size_t> key_index_;  // dedup key -> sample index
};

}  // namespace xauc
