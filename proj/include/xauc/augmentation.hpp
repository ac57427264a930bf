#pragma once

#include <string>
#include <vector>

#include "xauc/image.hpp"
#include "xauc/rng.hpp"

namespace xauc {

// Facial regions eligible for manipulation. Eye sides are in image
// coordinates: LeftEye is the eye on the image's left.
enum class Region { LeftEye, RightEye, Nose, Mouth, LeftHalf, RightHalf };

inline constexpr Region kAllRegions[] = {Region::LeftEye,  Region::RightEye,
                                         Region::Nose,     Region::Mouth,
                                         Region::LeftHalf, Region::RightHalf};

const char* region_name(Region region);
Region parse_region(const std::string& name);

// Patch-resolution forgery labels: 1 = patch overlaps the manipulated area.
struct PatchLabels {
    int grid_h = 0;
    int grid_w = 0;
    std::vector<std::uint8_t> labels;  // row-major, values in {0,1}

    std::uint8_t at(int gy, int gx) const {
        return labels[static_cast<std::size_t>(gy) * grid_w + gx];
    }
};

// Per-channel affine color jitter with an optional half-resolution
// down-up resample pass.
struct TransformParams {
    std::array<double, 3> gain = {1.0, 1.0, 1.0};
    std::array<double, 3> bias = {0.0, 0.0, 0.0};
    bool resample = false;

    bool is_identity() const {
        return !resample && gain == std::array<double, 3>{1.0, 1.0, 1.0} &&
               bias == std::array<double, 3>{0.0, 0.0, 0.0};
    }
};

// Color-jitter parameters drawn from the augmentation distribution:
// per-channel gain in [0.9, 1.1), bias in [-0.05, 0.05), resample coin flip.
TransformParams sample_transform(Rng& rng);

// Union of convex hulls of the selected regions' landmark groups; half-face
// regions are the full-face hull cut at the nose-bridge vertical.
BinaryMask region_mask(const LandmarkSet& landmarks, const std::vector<Region>& regions,
                       int height, int width);

// Same rasterizer but off-frame geometry is clipped away instead of
// rejected; used for patch-region assignment where a face partly (or fully)
// outside the frame simply contributes no coverage.
BinaryMask region_mask_clipped(const LandmarkSet& landmarks, const std::vector<Region>& regions,
                               int height, int width);

// Pixelwise mask blend: out = mask ? fake : real, exact.
ImageBuffer blend_swap(const ImageBuffer& real, const ImageBuffer& fake,
                       const BinaryMask& mask);

// Gaussian blur with reflective (symmetric) borders; kernel normalized so
// constant regions are preserved.
SoftMask smooth_mask(const BinaryMask& mask, double sigma);

// Self-blend: out = soft * T(real) + (1 - soft) * real, clamped to [0,1].
ImageBuffer self_blend(const ImageBuffer& real, const TransformParams& transform,
                       const SoftMask& soft);

// Patch label = 1 iff mean of mask over the patch is strictly greater
// than tau.
PatchLabels downsample_mask(const BinaryMask& mask, int patch, double tau = 0.5);

enum class AugMode { Swap, SelfBlend };

inline const char* aug_mode_name(AugMode mode) {
    return mode == AugMode::Swap ? "swap" : "self_blend";
}

struct AugmentationConfig {
    double p_swap = 0.5;
    double sigma = 5.0;          // smoothing for self-blend masks
    double mask_threshold = 0.5; // binarization of the SBI soft mask
};

struct AugmentationResult {
    ImageBuffer image;
    BinaryMask mask;  // effective binary mask (thresholded soft mask for SBI)
    AugMode mode = AugMode::Swap;
    std::vector<Region> regions;
    TransformParams transform;  // identity for swap mode
};

// Randomly picks swap vs. self-blend, a non-empty region subset, and (for
// self-blend) transform parameters; fully deterministic under the rng state.
AugmentationResult sample_augmentation(const ImageBuffer& real, const ImageBuffer& fake,
                                       const LandmarkSet& landmarks,
                                       const AugmentationConfig& config, Rng& rng);

}  // namespace xauc
