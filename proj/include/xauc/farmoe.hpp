#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xauc/alignment_losses.hpp"
#include "xauc/image.hpp"

namespace xauc {

// Region ids used for patch routing: the six facial regions in
// kAllRegions order are 1..6, plus a catch-all Background id.
inline constexpr int kFaceRegionCount = 6;
inline constexpr int kBackgroundRegionId = 7;
inline constexpr int kRegionCount = 7;

// How the class token is projected: through the shared baseline key map or
// through its own dedicated expert.
enum class ClsPolicy { SharedKey, DedicatedExpert };

// Per-patch region assignment over a fixed patch grid.
struct RegionMap {
    int n_patches = 0;
    std::vector<int> region_of;  // 1..K_regions, row-major over the grid
    ClsPolicy cls_policy = ClsPolicy::SharedKey;
};

// Dense affine map y = W x + b with a row-major square weight.
struct AffineMap {
    int dim = 0;
    std::vector<double> weight;  // dim * dim
    std::vector<double> bias;    // dim

    static AffineMap identity(int dim);
};

// One expert per region id (experts[r-1] serves region r) plus the baseline
// shared key map; cls_expert is consulted only under ClsPolicy::DedicatedExpert.
struct ExpertBank {
    int dim = 0;
    std::vector<AffineMap> experts;
    AffineMap shared_key;
    std::optional<AffineMap> cls_expert;
};

// Applies y = W x + b; x points at `dim` values, y receives `dim` values.
void apply_affine(const AffineMap& map, const double* x, double* y);

// Labels every patch of a gh×gw grid over an image_h×image_w frame with the
// facial region whose rasterized mask covers most of the patch's pixels;
// ties go to the lower region id, uncovered patches to Background. Image
// dims must divide evenly into the grid. Landmarks may fall outside the
// frame (clipped away); they only have to be finite.
RegionMap assign_regions(int grid_h, int grid_w, int image_h, int image_w,
                         const LandmarkSet& landmarks,
                         ClsPolicy cls_policy = ClsPolicy::SharedKey);

// Dispatches each patch feature to its region's expert: out row i =
// experts[region_of[i]-1](features row i). No cross-patch mixing.
std::vector<double> route(const std::vector<double>& features, const RegionMap& map,
                          const ExpertBank& bank);

// Key projection for a cls+patch token sequence: row 0 is the cls key
// (shared_key or cls_expert per policy), rows 1..P are the routed patch keys.
std::vector<double> moe_key_projection(const PatchFeatures& features, const RegionMap& map,
                                       const ExpertBank& bank);

// Indices of the transformer layers whose key projection is replaced:
// always the last n_moe of total_layers.
std::vector<int> layer_selection(int total_layers, int n_moe);

// Flat JSON checkpoint format for the bank (dims, row-major weights, biases).
std::string serialize_expert_bank(const ExpertBank& bank);
ExpertBank parse_expert_bank(const std::string& text);

}  // namespace xauc
