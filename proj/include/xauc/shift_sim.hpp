#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xauc/score_store.hpp"

namespace xauc {

// Gaussian class-conditional score generator for one synthetic dataset.
struct DomainSpec {
    std::string dataset_id;
    double real_mean = 0.2;
    double real_std = 0.1;
    double fake_mean = 0.8;
    double fake_std = 0.1;
    std::int64_t n_real = 100;
    std::int64_t n_fake = 100;
    std::uint64_t seed = 0;
};

struct Histogram {
    std::vector<double> bin_edges;  // bins+1 ascending edges
    std::vector<std::int64_t> counts_real;
    std::vector<std::int64_t> counts_fake;
};

void validate_spec(const DomainSpec& spec);

// Standard normal CDF; closed-form planted AUC for two Gaussian classes is
// phi((fake_mean - real_mean) / sqrt(real_std^2 + fake_std^2)).
double phi(double x);
double expected_auc(const DomainSpec& spec);

// Deterministic Gaussian draws, reals then fakes; video_id = sample_id.
// The effective stream is seeded by hash(spec.seed, dataset_id) so domains
// are independent of generation order.
std::vector<Sample> gen_domain(const DomainSpec& spec);

// One derived domain per shift: both class means translated by shifts[k].
// Intra-domain separability is identical across domains by construction.
ScoreStore make_shift_scenario(const DomainSpec& base, const std::vector<double>& shifts);

// Uniform bins over [lo, hi); out-of-range values are clamped into the end
// bins so counts are conserved.
Histogram make_histogram(const std::vector<double>& reals, const std::vector<double>& fakes,
                         std::int64_t bins, double lo, double hi);

}  // namespace xauc
