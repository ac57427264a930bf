#include "xauc/farmoe.hpp"

#include <algorithm>
#include <cstdint>

#include "json.hpp"
#include "xauc/augmentation.hpp"
#include "xauc/error.hpp"

namespace xauc {

using nlohmann::json;

namespace {

void check_affine(const AffineMap& map, int dim, const char* what) {
    if (map.dim != dim || static_cast<int>(map.bias.size()) != dim ||
        map.weight.size() != static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim)) {
        throw Error(ErrorKind::DimMismatch,
                    std::string(what) + " must be a " + std::to_string(dim) + "-dim affine map");
    }
}

void check_bank(const ExpertBank& bank) {
    if (bank.dim <= 0 || bank.experts.empty()) {
        throw Error(ErrorKind::DimMismatch, "expert bank needs a positive dim and >= 1 expert");
    }
    for (const AffineMap& e : bank.experts) check_affine(e, bank.dim, "region expert");
    check_affine(bank.shared_key, bank.dim, "shared key map");
    if (bank.cls_expert) check_affine(*bank.cls_expert, bank.dim, "cls expert");
}

json affine_to_json(const AffineMap& map) {
    return json{{"dim", map.dim}, {"weight", map.weight}, {"bias", map.bias}};
}

AffineMap affine_from_json(const json& doc, const char* what) {
    if (!doc.is_object() || !doc.contains("dim") || !doc.contains("weight") ||
        !doc.contains("bias") || !doc["dim"].is_number_integer() || !doc["weight"].is_array() ||
        !doc["bias"].is_array()) {
        throw Error(ErrorKind::MalformedFixture,
                    std::string("expert bank: bad affine map for ") + what);
    }
    AffineMap map;
    map.dim = doc["dim"].get<int>();
    map.weight = doc["weight"].get<std::vector<double>>();
    map.bias = doc["bias"].get<std::vector<double>>();
    return map;
}

}  // namespace

AffineMap AffineMap::identity(int dim) {
    AffineMap map;
    map.dim = dim;
    map.weight.assign(static_cast<std::size_t>(dim) * dim, 0.0);
    map.bias.assign(static_cast<std::size_t>(dim), 0.0);
    for (int i = 0; i < dim; ++i) {
        map.weight[static_cast<std::size_t>(i) * dim + i] = 1.0;
    }
    return map;
}

void apply_affine(const AffineMap& map, const double* x, double* y) {
    const int d = map.dim;
    for (int i = 0; i < d; ++i) {
        double acc = map.bias[static_cast<std::size_t>(i)];
        const double* row = map.weight.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
}

RegionMap assign_regions(int grid_h, int grid_w, int image_h, int image_w,
                         const LandmarkSet& landmarks, ClsPolicy cls_policy) {
    if (grid_h <= 0 || grid_w <= 0 || image_h <= 0 || image_w <= 0) {
        throw Error(ErrorKind::ShapeMismatch, "grid and image dimensions must be positive");
    }
    if (image_h % grid_h != 0 || image_w % grid_w != 0) {
        throw Error(ErrorKind::IndivisibleDims,
                    "image dimensions must divide evenly into the patch grid");
    }
    const int ph = image_h / grid_h;
    const int pw = image_w / grid_w;

    RegionMap map;
    map.n_patches = grid_h * grid_w;
    map.region_of.assign(static_cast<std::size_t>(map.n_patches), kBackgroundRegionId);
    map.cls_policy = cls_policy;

    // per-patch pixel coverage of each facial region, region ids 1..6 in
    // kAllRegions order; the best-covered region wins, lower id on ties
    std::vector<std::int64_t> best(static_cast<std::size_t>(map.n_patches), 0);
    for (int t = 0; t < kFaceRegionCount; ++t) {
        const BinaryMask mask =
            region_mask_clipped(landmarks, {kAllRegions[t]}, image_h, image_w);
        for (int gy = 0; gy < grid_h; ++gy) {
            for (int gx = 0; gx < grid_w; ++gx) {
                std::int64_t cover = 0;
                for (int y = gy * ph; y < (gy + 1) * ph; ++y) {
                    for (int x = gx * pw; x < (gx + 1) * pw; ++x) {
                        cover += mask.at(y, x);
                    }
                }
                const std::size_t p = static_cast<std::size_t>(gy) * grid_w + gx;
                if (cover > best[p]) {
                    best[p] = cover;
                    map.region_of[p] = t + 1;
                }
            }
        }
    }
    return map;
}

std::vector<double> route(const std::vector<double>& features, const RegionMap& map,
                          const ExpertBank& bank) {
    check_bank(bank);
    const int d = bank.dim;
    const int P = map.n_patches;
    if (P < 0 || static_cast<int>(map.region_of.size()) != P ||
        features.size() != static_cast<std::size_t>(P) * static_cast<std::size_t>(d)) {
        throw Error(ErrorKind::DimMismatch, "feature matrix must be n_patches x dim");
    }
    const int K = static_cast<int>(bank.experts.size());
    std::vector<double> out(features.size(), 0.0);
    for (int i = 0; i < P; ++i) {
        const int r = map.region_of[static_cast<std::size_t>(i)];
        if (r < 1 || r > K) {
            throw Error(ErrorKind::UnknownRegionId,
                        "patch " + std::to_string(i) + " routed to unknown region id " +
                            std::to_string(r));
        }
        apply_affine(bank.experts[static_cast<std::size_t>(r - 1)],
                     features.data() + static_cast<std::size_t>(i) * d,
                     out.data() + static_cast<std::size_t>(i) * d);
    }
    return out;
}

std::vector<double> moe_key_projection(const PatchFeatures& features, const RegionMap& map,
                                       const ExpertBank& bank) {
    check_bank(bank);
    const int d = bank.dim;
    if (features.dim != d || static_cast<int>(features.cls.size()) != d) {
        throw Error(ErrorKind::DimMismatch, "cls feature dimension must match the bank");
    }
    if (features.n_patches != map.n_patches) {
        throw Error(ErrorKind::DimMismatch, "patch count must match the region map");
    }
    std::vector<double> keys(static_cast<std::size_t>(features.n_patches + 1) * d, 0.0);
    if (map.cls_policy == ClsPolicy::DedicatedExpert) {
        if (!bank.cls_expert) {
            throw Error(ErrorKind::UnknownRegionId,
                        "cls policy requires a dedicated expert, but none is configured");
        }
        apply_affine(*bank.cls_expert, features.cls.data(), keys.data());
    } else {
        apply_affine(bank.shared_key, features.cls.data(), keys.data());
    }
    const std::vector<double> patch_keys = route(features.patches, map, bank);
    std::copy(patch_keys.begin(), patch_keys.end(), keys.begin() + d);
    return keys;
}

std::vector<int> layer_selection(int total_layers, int n_moe) {
    if (total_layers < 0 || n_moe < 0 || n_moe > total_layers) {
        throw Error(ErrorKind::InvalidCount,
                    "need 0 <= n_moe <= total_layers, got " + std::to_string(n_moe) + " of " +
                        std::to_string(total_layers));
    }
    std::vector<int> layers;
    layers.reserve(static_cast<std::size_t>(n_moe));
    for (int l = total_layers - n_moe; l < total_layers; ++l) layers.push_back(l);
    return layers;
}

std::string serialize_expert_bank(const ExpertBank& bank) {
    check_bank(bank);
    json doc;
    doc["dim"] = bank.dim;
    doc["experts"] = json::array();
    for (const AffineMap& e : bank.experts) doc["experts"].push_back(affine_to_json(e));
    doc["shared_key"] = affine_to_json(bank.shared_key);
    if (bank.cls_expert) doc["cls_expert"] = affine_to_json(*bank.cls_expert);
    return doc.dump(2);
}

ExpertBank parse_expert_bank(const std::string& text) {
    const json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("dim") ||
        !doc.contains("experts") || !doc.contains("shared_key") ||
        !doc["dim"].is_number_integer() || !doc["experts"].is_array()) {
        throw Error(ErrorKind::MalformedFixture, "expert bank document is malformed");
    }
    ExpertBank bank;
    bank.dim = doc["dim"].get<int>();
    for (const json& e : doc["experts"]) {
        bank.experts.push_back(affine_from_json(e, "region expert"));
    }
    bank.shared_key = affine_from_json(doc["shared_key"], "shared key map");
    if (doc.contains("cls_expert") && !doc["cls_expert"].is_null()) {
        bank.cls_expert = affine_from_json(doc["cls_expert"], "cls expert");
    }
    try {
        check_bank(bank);
    } catch (const Error&) {
        throw Error(ErrorKind::MalformedFixture, "expert bank document has inconsistent dims");
    }
    return bank;
}

}  // namespace xauc
