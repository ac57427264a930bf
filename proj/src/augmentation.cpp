#include "xauc/augmentation.hpp"

#include <algorithm>
#include <cmath>

#include "xauc/error.hpp"

namespace xauc {

namespace {

struct Pt {
    double x;
    double y;
};

double cross(const Pt& o, const Pt& a, const Pt& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew monotone chain; returns CCW hull (y axis pointing down flips
// orientation, but the inside test below is sign-agnostic anyway).
std::vector<Pt> convex_hull(std::vector<Pt> pts) {
    std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Pt& a, const Pt& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    if (pts.size() < 3) return pts;
    std::vector<Pt> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = pts.size() - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

// Inside-or-on test for a convex polygon; works for either winding.
bool inside_hull(const std::vector<Pt>& hull, double x, double y) {
    if (hull.size() < 3) return false;
    const double eps = 1e-9;
    bool has_pos = false;
    bool has_neg = false;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const Pt& a = hull[i];
        const Pt& b = hull[(i + 1) % hull.size()];
        const double c = cross(a, b, {x, y});
        if (c > eps) has_pos = true;
        if (c < -eps) has_neg = true;
        if (has_pos && has_neg) return false;
    }
    return true;
}

std::vector<Pt> collect(const LandmarkSet& lm, int first, int last) {
    std::vector<Pt> pts;
    pts.reserve(static_cast<std::size_t>(last - first + 1));
    for (int k = first; k <= last; ++k) {
        pts.push_back({lm.points[static_cast<std::size_t>(k)][0],
                       lm.points[static_cast<std::size_t>(k)][1]});
    }
    return pts;
}

// Rasterizes one hull into the mask (union), optionally restricted to one
// side of the vertical line x = split (side -1 keeps x <= split, +1 keeps
// x >= split, 0 keeps everything).
void fill_hull(BinaryMask& mask, const std::vector<Pt>& hull, int side, double split) {
    if (hull.size() < 3) return;
    double min_x = hull[0].x, max_x = hull[0].x, min_y = hull[0].y, max_y = hull[0].y;
    for (const Pt& p : hull) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 1.0)));
    const int x1 = std::min(mask.width - 1, static_cast<int>(std::ceil(max_x + 1.0)));
    const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 1.0)));
    const int y1 = std::min(mask.height - 1, static_cast<int>(std::ceil(max_y + 1.0)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double cx = x + 0.5;
            const double cy = y + 0.5;
            if (side < 0 && cx > split) continue;
            if (side > 0 && cx < split) continue;
            if (inside_hull(hull, cx, cy)) mask.at(y, x) = 1;
        }
    }
}

int reflect_index(int idx, int n) {
    // symmetric reflection: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
    while (idx < 0 || idx >= n) {
        if (idx < 0) idx = -1 - idx;
        if (idx >= n) idx = 2 * n - 1 - idx;
    }
    return idx;
}

void validate_transform(const TransformParams& t) {
    for (int c = 0; c < 3; ++c) {
        if (!std::isfinite(t.gain[c]) || !std::isfinite(t.bias[c]) || t.gain[c] <= 0.0) {
            throw Error(ErrorKind::InvalidTransform,
                        "transform gain must be positive and finite, bias finite");
        }
    }
}

ImageBuffer down_up_resample(const ImageBuffer& img) {
    const int hh = (img.height + 1) / 2;
    const int ww = (img.width + 1) / 2;
    ImageBuffer small = ImageBuffer::filled(hh, ww, img.channels, 0.0);
    for (int y = 0; y < hh; ++y) {
        for (int x = 0; x < ww; ++x) {
            const int y1 = std::min(2 * y + 1, img.height - 1);
            const int x1 = std::min(2 * x + 1, img.width - 1);
            for (int c = 0; c < img.channels; ++c) {
                small.at(y, x, c) = 0.25 * (img.at(2 * y, 2 * x, c) + img.at(2 * y, x1, c) +
                                            img.at(y1, 2 * x, c) + img.at(y1, x1, c));
            }
        }
    }
    ImageBuffer out = ImageBuffer::filled(img.height, img.width, img.channels, 0.0);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                out.at(y, x, c) = small.at(y / 2, x / 2, c);
            }
        }
    }
    return out;
}

}  // namespace

const char* region_name(Region region) {
    switch (region) {
        case Region::LeftEye: return "left_eye";
        case Region::RightEye: return "right_eye";
        case Region::Nose: return "nose";
        case Region::Mouth: return "mouth";
        case Region::LeftHalf: return "left_half";
        case Region::RightHalf: return "right_half";
    }
    return "unknown";
}

Region parse_region(const std::string& name) {
    for (Region r : kAllRegions) {
        if (name == region_name(r)) return r;
    }
    throw Error(ErrorKind::UnknownRegionId, "unknown region '" + name + "'");
}

BinaryMask region_mask(const LandmarkSet& landmarks, const std::vector<Region>& regions,
                       int height, int width) {
    for (const auto& p : landmarks.points) {
        if (p[0] < 0.0 || p[0] > static_cast<double>(width) || p[1] < 0.0 ||
            p[1] > static_cast<double>(height)) {
            throw Error(ErrorKind::OutOfBoundsLandmarks,
                        "landmark outside the image frame");
        }
    }
    return region_mask_clipped(landmarks, regions, height, width);
}

BinaryMask region_mask_clipped(const LandmarkSet& landmarks, const std::vector<Region>& regions,
                               int height, int width) {
    if (regions.empty()) {
        throw Error(ErrorKind::EmptyRegionSet, "region subset must be non-empty");
    }
    if (height <= 0 || width <= 0) {
        throw Error(ErrorKind::ShapeMismatch, "mask dimensions must be positive");
    }
    for (const auto& p : landmarks.points) {
        if (!std::isfinite(p[0]) || !std::isfinite(p[1])) {
            throw Error(ErrorKind::OutOfBoundsLandmarks, "landmark coordinates must be finite");
        }
    }
    BinaryMask mask;
    mask.height = height;
    mask.width = width;
    mask.data.assign(static_cast<std::size_t>(height) * width, 0);

    // nose-bridge vertical used by the half-face cut
    double split = 0.0;
    for (int k = 27; k <= 30; ++k) split += landmarks.points[static_cast<std::size_t>(k)][0];
    split /= 4.0;

    for (Region region : regions) {
        switch (region) {
            case Region::LeftEye:
                fill_hull(mask, convex_hull(collect(landmarks, 36, 41)), 0, 0.0);
                break;
            case Region::RightEye:
                fill_hull(mask, convex_hull(collect(landmarks, 42, 47)), 0, 0.0);
                break;
            case Region::Nose:
                fill_hull(mask, convex_hull(collect(landmarks, 27, 35)), 0, 0.0);
                break;
            case Region::Mouth:
                fill_hull(mask, convex_hull(collect(landmarks, 48, 67)), 0, 0.0);
                break;
            case Region::LeftHalf:
                fill_hull(mask, convex_hull(collect(landmarks, 0, 67)), -1, split);
                break;
            case Region::RightHalf:
                fill_hull(mask, convex_hull(collect(landmarks, 0, 67)), +1, split);
                break;
        }
    }
    return mask;
}

ImageBuffer blend_swap(const ImageBuffer& real, const ImageBuffer& fake,
                       const BinaryMask& mask) {
    if (real.height != fake.height || real.width != fake.width ||
        real.channels != fake.channels || mask.height != real.height ||
        mask.width != real.width) {
        throw Error(ErrorKind::ShapeMismatch, "real, fake, and mask shapes must match");
    }
    ImageBuffer out = real;
    for (int y = 0; y < real.height; ++y) {
        for (int x = 0; x < real.width; ++x) {
            if (!mask.at(y, x)) continue;
            for (int c = 0; c < real.channels; ++c) {
                out.at(y, x, c) = fake.at(y, x, c);
            }
        }
    }
    return out;
}

SoftMask smooth_mask(const BinaryMask& mask, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw Error(ErrorKind::InvalidSigma, "sigma must be a positive finite real");
    }
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        const double w = std::exp(-0.5 * (k / sigma) * (k / sigma));
        kernel[static_cast<std::size_t>(k + radius)] = w;
        sum += w;
    }
    for (double& w : kernel) w /= sum;

    const int h = mask.height;
    const int w = mask.width;
    std::vector<double> tmp(static_cast<std::size_t>(h) * w, 0.0);
    // horizontal pass
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int xx = reflect_index(x + k, w);
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       static_cast<double>(mask.at(y, xx));
            }
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    SoftMask out;
    out.height = h;
    out.width = w;
    out.data.assign(static_cast<std::size_t>(h) * w, 0.0);
    // vertical pass
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int yy = reflect_index(y + k, h);
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       tmp[static_cast<std::size_t>(yy) * w + x];
            }
            out.at(y, x) = std::clamp(acc, 0.0, 1.0);
        }
    }
    return out;
}

ImageBuffer self_blend(const ImageBuffer& real, const TransformParams& transform,
                       const SoftMask& soft) {
    if (soft.height != real.height || soft.width != real.width) {
        throw Error(ErrorKind::ShapeMismatch, "soft mask shape must match the image");
    }
    validate_transform(transform);
    // fixed point: with the identity transform the blend cancels for any mask
    if (transform.is_identity()) return real;

    ImageBuffer jittered = real;
    for (int y = 0; y < real.height; ++y) {
        for (int x = 0; x < real.width; ++x) {
            for (int c = 0; c < real.channels; ++c) {
                jittered.at(y, x, c) = std::clamp(
                    transform.gain[static_cast<std::size_t>(c)] * real.at(y, x, c) +
                        transform.bias[static_cast<std::size_t>(c)],
                    0.0, 1.0);
            }
        }
    }
    if (transform.resample) {
        jittered = down_up_resample(jittered);
    }
    ImageBuffer out = real;
    for (int y = 0; y < real.height; ++y) {
        for (int x = 0; x < real.width; ++x) {
            const double m = soft.at(y, x);
            for (int c = 0; c < real.channels; ++c) {
                out.at(y, x, c) = std::clamp(
                    m * jittered.at(y, x, c) + (1.0 - m) * real.at(y, x, c), 0.0, 1.0);
            }
        }
    }
    return out;
}

PatchLabels downsample_mask(const BinaryMask& mask, int patch, double tau) {
    if (patch <= 0 || mask.height % patch != 0 || mask.width % patch != 0) {
        throw Error(ErrorKind::IndivisibleDims,
                    "mask dimensions must divide evenly by the patch size");
    }
    if (!(tau >= 0.0) || !(tau < 1.0)) {
        throw Error(ErrorKind::InvalidRange, "tau must lie in [0, 1)");
    }
    PatchLabels out;
    out.grid_h = mask.height / patch;
    out.grid_w = mask.width / patch;
    out.labels.assign(static_cast<std::size_t>(out.grid_h) * out.grid_w, 0);
    const double denom = static_cast<double>(patch) * patch;
    for (int gy = 0; gy < out.grid_h; ++gy) {
        for (int gx = 0; gx < out.grid_w; ++gx) {
            std::int64_t count = 0;
            for (int y = gy * patch; y < (gy + 1) * patch; ++y) {
                for (int x = gx * patch; x < (gx + 1) * patch; ++x) {
                    count += mask.at(y, x);
                }
            }
            const double mean = static_cast<double>(count) / denom;
            out.labels[static_cast<std::size_t>(gy) * out.grid_w + gx] = mean > tau ? 1 : 0;
        }
    }
    return out;
}

TransformParams sample_transform(Rng& rng) {
    TransformParams t;
    for (int c = 0; c < 3; ++c) {
        t.gain[static_cast<std::size_t>(c)] = 0.9 + 0.2 * rng.next_double();
    }
    for (int c = 0; c < 3; ++c) {
        t.bias[static_cast<std::size_t>(c)] = -0.05 + 0.1 * rng.next_double();
    }
    t.resample = rng.next_double() < 0.5;
    return t;
}

AugmentationResult sample_augmentation(const ImageBuffer& real, const ImageBuffer& fake,
                                       const LandmarkSet& landmarks,
                                       const AugmentationConfig& config, Rng& rng) {
    if (!(config.p_swap >= 0.0) || !(config.p_swap <= 1.0)) {
        throw Error(ErrorKind::InvalidSpec, "p_swap must lie in [0, 1]");
    }
    AugmentationResult result;
    result.mode = rng.next_double() < config.p_swap ? AugMode::Swap : AugMode::SelfBlend;

    // non-empty region subset, each region an independent coin flip
    do {
        result.regions.clear();
        for (Region r : kAllRegions) {
            if (rng.next_double() < 0.5) result.regions.push_back(r);
        }
    } while (result.regions.empty());

    const BinaryMask hard = region_mask(landmarks, result.regions, real.height, real.width);
    if (result.mode == AugMode::Swap) {
        result.image = blend_swap(real, fake, hard);
        result.mask = hard;
        return result;
    }
    result.transform = sample_transform(rng);
    const SoftMask soft = smooth_mask(hard, config.sigma);
    result.image = self_blend(real, result.transform, soft);
    result.mask = threshold_mask(soft, config.mask_threshold);
    return result;
}

}  // namespace xauc
