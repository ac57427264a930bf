#include "xauc/shift_sim.hpp"

#include <cmath>

#include "xauc/error.hpp"
#include "xauc/rng.hpp"

namespace xauc {

void validate_spec(const DomainSpec& spec) {
    if (spec.dataset_id.empty()) {
        throw Error(ErrorKind::InvalidSpec, "dataset_id must be non-empty");
    }
    if (!(spec.real_std > 0.0) || !(spec.fake_std > 0.0)) {
        throw Error(ErrorKind::InvalidSpec, "std values must be > 0");
    }
    if (spec.n_real <= 0 || spec.n_fake <= 0) {
        throw Error(ErrorKind::InvalidSpec, "sample counts must be > 0");
    }
    if (!(spec.fake_mean > spec.real_mean)) {
        throw Error(ErrorKind::InvalidSpec,
                    "fake_mean must exceed real_mean (generator convention)");
    }
    if (!std::isfinite(spec.real_mean) || !std::isfinite(spec.fake_mean) ||
        !std::isfinite(spec.real_std) || !std::isfinite(spec.fake_std)) {
        throw Error(ErrorKind::InvalidSpec, "distribution parameters must be finite");
    }
}

double phi(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double expected_auc(const DomainSpec& spec) {
    const double denom =
        std::sqrt(spec.real_std * spec.real_std + spec.fake_std * spec.fake_std);
    return phi((spec.fake_mean - spec.real_mean) / denom);
}

std::vector<Sample> gen_domain(const DomainSpec& spec) {
    validate_spec(spec);
    Rng rng(derive_seed(spec.seed, spec.dataset_id));
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(spec.n_real + spec.n_fake));
    auto emit = [&](Label label, std::int64_t count, double mean, double std) {
        for (std::int64_t k = 0; k < count; ++k) {
            Sample s;
            s.sample_id = spec.dataset_id + "_" + label_name(label) + "_" + std::to_string(k);
            s.dataset_id = spec.dataset_id;
            s.video_id = s.sample_id;
            s.frame_idx = 0;
            s.label = label;
            s.score = mean + std * rng.next_gaussian();
            out.push_back(std::move(s));
        }
    };
    emit(Label::Real, spec.n_real, spec.real_mean, spec.real_std);
    emit(Label::Fake, spec.n_fake, spec.fake_mean, spec.fake_std);
    return out;
}

ScoreStore make_shift_scenario(const DomainSpec& base, const std::vector<double>& shifts) {
    validate_spec(base);
    if (shifts.empty()) {
        throw Error(ErrorKind::InvalidSpec, "need at least one shift");
    }
    for (double s : shifts) {
        if (!std::isfinite(s)) {
            throw Error(ErrorKind::InvalidSpec, "shifts must be finite");
        }
    }
    ScoreStore store;
    for (std::size_t k = 0; k < shifts.size(); ++k) {
        DomainSpec d = base;
        d.dataset_id = base.dataset_id + "_" + std::to_string(k);
        d.real_mean = base.real_mean + shifts[k];
        d.fake_mean = base.fake_mean + shifts[k];
        for (const Sample& s : gen_domain(d)) {
            store.add(s);
        }
    }
    return store;
}

Histogram make_histogram(const std::vector<double>& reals, const std::vector<double>& fakes,
                         std::int64_t bins, double lo, double hi) {
    if (bins < 1) {
        throw Error(ErrorKind::InvalidRange, "bins must be >= 1");
    }
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw Error(ErrorKind::InvalidRange, "range requires lo < hi, both finite");
    }
    Histogram h;
    h.bin_edges.reserve(static_cast<std::size_t>(bins) + 1);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::int64_t b = 0; b <= bins; ++b) {
        h.bin_edges.push_back(lo + width * static_cast<double>(b));
    }
    h.counts_real.assign(static_cast<std::size_t>(bins), 0);
    h.counts_fake.assign(static_cast<std::size_t>(bins), 0);
    auto bin_of = [&](double v) -> std::size_t {
        const double t = (v - lo) / width;
        std::int64_t b = static_cast<std::int64_t>(std::floor(t));
        if (b < 0) b = 0;                // clamp below range into first bin
        if (b >= bins) b = bins - 1;     // clamp above range into last bin
        return static_cast<std::size_t>(b);
    };
    for (double v : reals) ++h.counts_real[bin_of(v)];
    for (double v : fakes) ++h.counts_fake[bin_of(v)];
    return h;
}

}  // namespace xauc
