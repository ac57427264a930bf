#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "xauc/augmentation.hpp"
#include "xauc/error.hpp"
#include "xauc/farmoe.hpp"
#include "xauc/image.hpp"
#include "xauc/rng.hpp"

using namespace xauc;

namespace {

// Geometric face for exact coverage anchors on a 64x64 frame: jaw circle of
// radius 28 around (32,32), nose bridge on x=32, eye hexagons, and a mouth
// whose hull is exactly the pixel block [24,32)x[40,48).
LandmarkSet box_face(double dx = 0.0, double dy = 0.0) {
    LandmarkSet lm;
    auto set = [&](int k, double x, double y) {
        lm.points[static_cast<std::size_t>(k)] = {x + dx, y + dy};
    };
    const double pi = 3.14159265358979323846;
    for (int k = 0; k <= 16; ++k) {  // jaw circle
        const double t = 2.0 * pi * k / 17.0;
        set(k, 32.0 + 28.0 * std::cos(t), 32.0 + 28.0 * std::sin(t));
    }
    for (int k = 0; k < 10; ++k) set(17 + k, 10.0 + 4.5 * k, 9.0);  // brows
    for (int k = 0; k < 4; ++k) set(27 + k, 32.0, 18.0 + 4.0 * k);  // bridge -> split x = 32
    for (int k = 0; k < 5; ++k) set(31 + k, 26.0 + 3.0 * k, 33.0);  // nose base
    // eye hexagons big enough to fully contain one 8x8 patch block each
    auto hexagon = [&](int first, double ex, double ey) {
        for (int k = 0; k < 6; ++k) {
            const double t = pi * k / 3.0;
            set(first + k, ex + 7.0 * std::cos(t), ey + 6.0 * std::sin(t));
        }
    };
    hexagon(36, 20.0, 20.0);
    hexagon(42, 44.0, 20.0);
    // mouth: 20 points along the square with corners (24,40) and (32,48)
    for (int k = 0; k < 20; ++k) {
        const double step = 8.0 / 5.0;
        const int side = k / 5;
        const double u = step * (k % 5);
        if (side == 0) set(48 + k, 24.0 + u, 40.0);
        if (side == 1) set(48 + k, 32.0, 40.0 + u);
        if (side == 2) set(48 + k, 32.0 - u, 48.0);
        if (side == 3) set(48 + k, 24.0, 48.0 - u);
    }
    return lm;
}

AffineMap random_affine(Rng& rng, int d) {
    AffineMap m;
    m.dim = d;
    m.weight.resize(static_cast<std::size_t>(d) * d);
    m.bias.resize(static_cast<std::size_t>(d));
    for (double& w : m.weight) w = 2.0 * rng.next_double() - 1.0;
    for (double& b : m.bias) b = 2.0 * rng.next_double() - 1.0;
    return m;
}

ExpertBank random_bank(Rng& rng, int d, int n_experts, bool with_cls = false) {
    ExpertBank bank;
    bank.dim = d;
    for (int k = 0; k < n_experts; ++k) bank.experts.push_back(random_affine(rng, d));
    bank.shared_key = random_affine(rng, d);
    if (with_cls) bank.cls_expert = random_affine(rng, d);
    return bank;
}

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = 2.0 * rng.next_double() - 1.0;
    return v;
}

}  // namespace

TEST_CASE("apply_affine matches a hand computation") {
    AffineMap m;
    m.dim = 2;
    m.weight = {1.0, 2.0, 3.0, 4.0};  // rows (1,2) and (3,4)
    m.bias = {10.0, 20.0};
    const double x[2] = {1.0, -1.0};
    double y[2];
    apply_affine(m, x, y);
    CHECK(y[0] == 10.0 + 1.0 - 2.0);
    CHECK(y[1] == 20.0 + 3.0 - 4.0);

    const AffineMap id = AffineMap::identity(3);
    const double z[3] = {0.25, -7.5, 3.0};
    double out[3];
    apply_affine(id, z, out);
    CHECK(out[0] == z[0]);
    CHECK(out[1] == z[1]);
    CHECK(out[2] == z[2]);
}

TEST_CASE("assign_regions geometric anchors") {
    const LandmarkSet lm = box_face();

    SUBCASE("mouth hull exactly covering one patch labels it Mouth") {
        const RegionMap map = assign_regions(8, 8, 64, 64, lm);
        CHECK(map.n_patches == 64);
        // block row 5, col 3 holds pixels [24,32)x[40,48): the mouth covers
        // all 64 of them, tying the left-half face mask; the lower id wins
        CHECK(map.region_of[5 * 8 + 3] == 4);
    }
    SUBCASE("patches fully inside an eye hull take the eye id by tie-break") {
        const RegionMap map = assign_regions(8, 8, 64, 64, lm);
        CHECK(map.region_of[2 * 8 + 2] == 1);  // block [16,24)^2 inside the left eye
        CHECK(map.region_of[2 * 8 + 5] == 2);  // block [40,48)x[16,24) inside the right eye
        const BinaryMask nose = region_mask_clipped(lm, {Region::Nose}, 64, 64);
        CHECK(nose.popcount() > 0);
    }
    SUBCASE("corner patches outside the face hull are Background") {
        const RegionMap map = assign_regions(8, 8, 64, 64, lm);
        CHECK(map.region_of[0] == kBackgroundRegionId);
        CHECK(map.region_of[7] == kBackgroundRegionId);
        CHECK(map.region_of[63] == kBackgroundRegionId);
    }
    SUBCASE("cheek patches fall back to the face halves") {
        const RegionMap map = assign_regions(8, 8, 64, 64, lm);
        CHECK(map.region_of[4 * 8 + 2] == 5);  // left cheek block [16,24)x[32,40)
        CHECK(map.region_of[4 * 8 + 5] == 6);  // right cheek block [40,48)x[32,40)
    }
    SUBCASE("landmarks entirely off-frame make every patch Background") {
        const RegionMap map = assign_regions(8, 8, 64, 64, box_face(200.0, 0.0));
        for (int r : map.region_of) CHECK(r == kBackgroundRegionId);
    }
    SUBCASE("region ids stay within the taxonomy and cover every patch") {
        const RegionMap map = assign_regions(4, 4, 64, 64, lm);
        CHECK(map.region_of.size() == 16);
        for (int r : map.region_of) {
            CHECK(r >= 1);
            CHECK(r <= kRegionCount);
        }
    }
}

TEST_CASE("assign_regions coverage tie prefers the lower region id") {
    // both eye groups collapsed onto the same square: identical coverage,
    // so the left eye (id 1) must win over the right eye (id 2)
    LandmarkSet lm = box_face();
    for (int k = 0; k < 6; ++k) {
        const int src = 36 + k;
        lm.points[static_cast<std::size_t>(42 + k)] = lm.points[static_cast<std::size_t>(src)];
    }
    const RegionMap map = assign_regions(8, 8, 64, 64, lm);
    bool saw_left = false;
    for (int r : map.region_of) {
        CHECK(r != 2);  // right eye can never out-cover its twin
        saw_left = saw_left || r == 1;
    }
    CHECK(saw_left);
}

TEST_CASE("assign_regions agrees with a direct coverage recomputation") {
    const LandmarkSet lm = box_face();
    const int gh = 8, gw = 8, H = 64, W = 64;
    const RegionMap map = assign_regions(gh, gw, H, W, lm);
    std::vector<BinaryMask> masks;
    for (Region r : kAllRegions) masks.push_back(region_mask_clipped(lm, {r}, H, W));
    for (int gy = 0; gy < gh; ++gy) {
        for (int gx = 0; gx < gw; ++gx) {
            int best_region = kBackgroundRegionId;
            int best_cover = 0;
            for (int t = 0; t < 6; ++t) {
                int cover = 0;
                for (int y = gy * 8; y < gy * 8 + 8; ++y) {
                    for (int x = gx * 8; x < gx * 8 + 8; ++x) cover += masks[static_cast<std::size_t>(t)].at(y, x);
                }
                if (cover > best_cover) {
                    best_cover = cover;
                    best_region = t + 1;
                }
            }
            CHECK(map.region_of[static_cast<std::size_t>(gy) * gw + gx] == best_region);
        }
    }
}

TEST_CASE("assign_regions input validation") {
    const LandmarkSet lm = box_face();
    CHECK_THROWS_AS(assign_regions(0, 8, 64, 64, lm), Error);
    CHECK_THROWS_AS(assign_regions(8, 8, 0, 64, lm), Error);
    try {
        assign_regions(7, 8, 64, 64, lm);  // 64 % 7 != 0
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::IndivisibleDims);
    }
    LandmarkSet bad = lm;
    bad.points[10] = {std::nan(""), 5.0};
    try {
        assign_regions(8, 8, 64, 64, bad);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::OutOfBoundsLandmarks);
    }
}

TEST_CASE("route with identity experts returns the input") {
    Rng rng(500);
    const int d = 5, P = 9;
    ExpertBank bank;
    bank.dim = d;
    for (int k = 0; k < kRegionCount; ++k) bank.experts.push_back(AffineMap::identity(d));
    bank.shared_key = AffineMap::identity(d);
    RegionMap map;
    map.n_patches = P;
    for (int i = 0; i < P; ++i) map.region_of.push_back(1 + static_cast<int>(rng.next_below(7)));
    const std::vector<double> x = random_vec(rng, static_cast<std::size_t>(P) * d);
    CHECK(route(x, map, bank) == x);
}

TEST_CASE("route degenerate single-expert bank applies that map everywhere") {
    Rng rng(501);
    const int d = 4, P = 6;
    ExpertBank bank = random_bank(rng, d, 1);
    RegionMap map;
    map.n_patches = P;
    map.region_of.assign(static_cast<std::size_t>(P), 1);
    const std::vector<double> x = random_vec(rng, static_cast<std::size_t>(P) * d);
    const std::vector<double> out = route(x, map, bank);
    for (int i = 0; i < P; ++i) {
        std::vector<double> expect(static_cast<std::size_t>(d));
        apply_affine(bank.experts[0], x.data() + static_cast<std::size_t>(i) * d, expect.data());
        for (int c = 0; c < d; ++c) {
            CHECK(out[static_cast<std::size_t>(i) * d + c] == expect[static_cast<std::size_t>(c)]);
        }
    }
}

TEST_CASE("route two-region hand oracle at d=4, P=6") {
    const int d = 4, P = 6;
    ExpertBank bank;
    bank.dim = d;
    AffineMap doubler = AffineMap::identity(d);
    for (double& w : doubler.weight) w *= 2.0;
    doubler.bias = {1.0, 0.0, 0.0, 0.0};
    AffineMap negate = AffineMap::identity(d);
    for (double& w : negate.weight) w = -w;
    negate.bias = {0.0, 0.0, 0.0, -3.0};
    bank.experts = {doubler, negate};
    bank.shared_key = AffineMap::identity(d);

    RegionMap map;
    map.n_patches = P;
    map.region_of = {1, 2, 1, 2, 2, 1};
    std::vector<double> x;
    for (int i = 0; i < P * d; ++i) x.push_back(0.25 * i - 2.0);
    const std::vector<double> out = route(x, map, bank);
    for (int i = 0; i < P; ++i) {
        for (int c = 0; c < d; ++c) {
            const double v = x[static_cast<std::size_t>(i) * d + c];
            double expect = map.region_of[static_cast<std::size_t>(i)] == 1 ? 2.0 * v : -v;
            if (map.region_of[static_cast<std::size_t>(i)] == 1 && c == 0) expect += 1.0;
            if (map.region_of[static_cast<std::size_t>(i)] == 2 && c == 3) expect += -3.0;
            CHECK(out[static_cast<std::size_t>(i) * d + c] == expect);
        }
    }
}

TEST_CASE("route is exactly linear for bias-free integer banks") {
    Rng rng(502);
    const int d = 4, P = 5;
    ExpertBank bank;
    bank.dim = d;
    for (int k = 0; k < 3; ++k) {
        AffineMap m;
        m.dim = d;
        for (int i = 0; i < d * d; ++i) {
            m.weight.push_back(static_cast<double>(rng.next_below(7)) - 3.0);
        }
        m.bias.assign(static_cast<std::size_t>(d), 0.0);
        bank.experts.push_back(std::move(m));
    }
    bank.shared_key = AffineMap::identity(d);
    RegionMap map;
    map.n_patches = P;
    for (int i = 0; i < P; ++i) map.region_of.push_back(1 + static_cast<int>(rng.next_below(3)));

    std::vector<double> x, y;
    for (int i = 0; i < P * d; ++i) {
        x.push_back(static_cast<double>(rng.next_below(9)) - 4.0);
        y.push_back(static_cast<double>(rng.next_below(9)) - 4.0);
    }
    const double alpha = 3.0, beta = -2.0;
    std::vector<double> combo(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) combo[i] = alpha * x[i] + beta * y[i];
    const std::vector<double> lhs = route(combo, map, bank);
    const std::vector<double> rx = route(x, map, bank);
    const std::vector<double> ry = route(y, map, bank);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        CHECK(lhs[i] == alpha * rx[i] + beta * ry[i]);  // all-integer arithmetic is exact
    }
}

TEST_CASE("route is equivariant under patch permutation") {
    Rng rng(503);
    const int d = 6, P = 10;
    ExpertBank bank = random_bank(rng, d, kRegionCount);
    RegionMap map;
    map.n_patches = P;
    for (int i = 0; i < P; ++i) map.region_of.push_back(1 + static_cast<int>(rng.next_below(7)));
    const std::vector<double> x = random_vec(rng, static_cast<std::size_t>(P) * d);
    const std::vector<double> base = route(x, map, bank);

    std::vector<int> perm(P);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = P - 1; i > 0; --i) {
        std::swap(perm[static_cast<std::size_t>(i)],
                  perm[rng.next_below(static_cast<std::size_t>(i) + 1)]);
    }
    RegionMap pmap;
    pmap.n_patches = P;
    pmap.region_of.resize(static_cast<std::size_t>(P));
    std::vector<double> px(x.size());
    for (int i = 0; i < P; ++i) {
        const int src = perm[static_cast<std::size_t>(i)];
        pmap.region_of[static_cast<std::size_t>(i)] = map.region_of[static_cast<std::size_t>(src)];
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(src) * d, d,
                    px.begin() + static_cast<std::ptrdiff_t>(i) * d);
    }
    const std::vector<double> pout = route(px, pmap, bank);
    for (int i = 0; i < P; ++i) {
        const int src = perm[static_cast<std::size_t>(i)];
        for (int c = 0; c < d; ++c) {
            CHECK(pout[static_cast<std::size_t>(i) * d + c] ==
                  base[static_cast<std::size_t>(src) * d + c]);
        }
    }
}

TEST_CASE("route validation errors") {
    Rng rng(504);
    const int d = 3;
    ExpertBank bank = random_bank(rng, d, 2);
    RegionMap map;
    map.n_patches = 2;
    map.region_of = {1, 2};
    const std::vector<double> x = random_vec(rng, 2 * 3);

    SUBCASE("unknown region id") {
        map.region_of[1] = 3;  // only 2 experts configured
        try {
            route(x, map, bank);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::UnknownRegionId);
        }
        map.region_of[1] = 0;
        CHECK_THROWS_AS(route(x, map, bank), Error);
    }
    SUBCASE("feature size mismatch") {
        CHECK_THROWS_AS(route(random_vec(rng, 5), map, bank), Error);
    }
    SUBCASE("map length mismatch") {
        map.region_of.push_back(1);
        CHECK_THROWS_AS(route(x, map, bank), Error);
    }
    SUBCASE("ragged expert rejected") {
        bank.experts[0].bias.push_back(0.0);
        try {
            route(x, map, bank);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DimMismatch);
        }
    }
}

TEST_CASE("moe key projection collapses to the shared baseline") {
    Rng rng(505);
    const int d = 8, P = 12;
    ExpertBank bank = random_bank(rng, d, kRegionCount);
    for (AffineMap& e : bank.experts) e = bank.shared_key;  // all experts equal W_k
    RegionMap map;
    map.n_patches = P;
    for (int i = 0; i < P; ++i) map.region_of.push_back(1 + static_cast<int>(rng.next_below(7)));

    PatchFeatures f;
    f.n_patches = P;
    f.dim = d;
    f.cls = random_vec(rng, static_cast<std::size_t>(d));
    f.patches = random_vec(rng, static_cast<std::size_t>(P) * d);

    const std::vector<double> keys = moe_key_projection(f, map, bank);
    REQUIRE(keys.size() == static_cast<std::size_t>(P + 1) * d);
    // baseline: the shared projection applied to cls and every patch
    std::vector<double> expect(static_cast<std::size_t>(d));
    apply_affine(bank.shared_key, f.cls.data(), expect.data());
    double max_diff = 0.0;
    for (int c = 0; c < d; ++c) {
        max_diff = std::max(max_diff, std::fabs(keys[static_cast<std::size_t>(c)] -
                                                expect[static_cast<std::size_t>(c)]));
    }
    for (int i = 0; i < P; ++i) {
        apply_affine(bank.shared_key, f.patch(i), expect.data());
        for (int c = 0; c < d; ++c) {
            max_diff = std::max(
                max_diff, std::fabs(keys[static_cast<std::size_t>(i + 1) * d + c] -
                                    expect[static_cast<std::size_t>(c)]));
        }
    }
    CHECK(max_diff <= 1e-12);
}

TEST_CASE("moe key projection cls policies") {
    Rng rng(506);
    const int d = 4, P = 3;
    ExpertBank bank = random_bank(rng, d, kRegionCount, true);
    RegionMap map;
    map.n_patches = P;
    map.region_of = {1, 4, 7};

    PatchFeatures f;
    f.n_patches = P;
    f.dim = d;
    f.cls = random_vec(rng, static_cast<std::size_t>(d));
    f.patches = random_vec(rng, static_cast<std::size_t>(P) * d);

    SUBCASE("shared policy ignores every expert") {
        map.cls_policy = ClsPolicy::SharedKey;
        std::vector<double> expect(static_cast<std::size_t>(d));
        apply_affine(bank.shared_key, f.cls.data(), expect.data());
        const std::vector<double> keys = moe_key_projection(f, map, bank);
        for (int c = 0; c < d; ++c) CHECK(keys[static_cast<std::size_t>(c)] == expect[static_cast<std::size_t>(c)]);
        // mutating the experts must not move the cls row
        ExpertBank other = bank;
        for (AffineMap& e : other.experts) e = random_affine(rng, d);
        const std::vector<double> keys2 = moe_key_projection(f, map, other);
        for (int c = 0; c < d; ++c) CHECK(keys2[static_cast<std::size_t>(c)] == expect[static_cast<std::size_t>(c)]);
    }
    SUBCASE("dedicated policy applies the cls expert") {
        map.cls_policy = ClsPolicy::DedicatedExpert;
        std::vector<double> expect(static_cast<std::size_t>(d));
        apply_affine(*bank.cls_expert, f.cls.data(), expect.data());
        const std::vector<double> keys = moe_key_projection(f, map, bank);
        for (int c = 0; c < d; ++c) CHECK(keys[static_cast<std::size_t>(c)] == expect[static_cast<std::size_t>(c)]);
    }
    SUBCASE("dedicated policy without a configured expert is an error") {
        map.cls_policy = ClsPolicy::DedicatedExpert;
        bank.cls_expert.reset();
        CHECK_THROWS_AS(moe_key_projection(f, map, bank), Error);
    }
}

TEST_CASE("moe key projection matches an explicit per-row multiply") {
    Rng rng(507);
    const int d = 4, P = 5;
    ExpertBank bank = random_bank(rng, d, kRegionCount);
    RegionMap map;
    map.n_patches = P;
    map.region_of = {2, 7, 1, 5, 3};
    PatchFeatures f;
    f.n_patches = P;
    f.dim = d;
    f.cls = random_vec(rng, static_cast<std::size_t>(d));
    f.patches = random_vec(rng, static_cast<std::size_t>(P) * d);

    const std::vector<double> keys = moe_key_projection(f, map, bank);
    // independent evaluation with explicit index arithmetic
    for (int i = 0; i < P; ++i) {
        const AffineMap& e = bank.experts[static_cast<std::size_t>(map.region_of[static_cast<std::size_t>(i)] - 1)];
        for (int r = 0; r < d; ++r) {
            double acc = e.bias[static_cast<std::size_t>(r)];
            for (int c = 0; c < d; ++c) {
                acc += e.weight[static_cast<std::size_t>(r) * d + c] *
                       f.patches[static_cast<std::size_t>(i) * d + c];
            }
            CHECK(keys[static_cast<std::size_t>(i + 1) * d + r] == doctest::Approx(acc).epsilon(1e-15));
        }
    }
}

TEST_CASE("expert parameters only reach the patches routed to them") {
    Rng rng(508);
    const int d = 3, P = 4;
    ExpertBank bank = random_bank(rng, d, 2);
    RegionMap map;
    map.n_patches = P;
    map.region_of = {1, 2, 1, 2};
    const std::vector<double> x = random_vec(rng, static_cast<std::size_t>(P) * d);
    const std::vector<double> base = route(x, map, bank);

    const double h = 1e-6;
    for (int wi = 0; wi < d * d; ++wi) {
        ExpertBank nudged = bank;
        nudged.experts[1].weight[static_cast<std::size_t>(wi)] += h;
        const std::vector<double> out = route(x, map, nudged);
        for (int i = 0; i < P; ++i) {
            for (int c = 0; c < d; ++c) {
                const std::size_t idx = static_cast<std::size_t>(i) * d + c;
                if (map.region_of[static_cast<std::size_t>(i)] != 2) {
                    CHECK(out[idx] == base[idx]);  // untouched code path, exact
                } else if (c == wi / d) {
                    // d out_c / d W[c][j] = x_j for the routed patches
                    const double fd = (out[idx] - base[idx]) / h;
                    CHECK(fd == doctest::Approx(x[static_cast<std::size_t>(i) * d + wi % d])
                                    .epsilon(1e-6));
                }
            }
        }
    }
    for (int bi = 0; bi < d; ++bi) {
        ExpertBank nudged = bank;
        nudged.experts[0].bias[static_cast<std::size_t>(bi)] += h;
        const std::vector<double> out = route(x, map, nudged);
        for (int i = 0; i < P; ++i) {
            for (int c = 0; c < d; ++c) {
                const std::size_t idx = static_cast<std::size_t>(i) * d + c;
                if (map.region_of[static_cast<std::size_t>(i)] != 1) {
                    CHECK(out[idx] == base[idx]);
                } else if (c == bi) {
                    CHECK((out[idx] - base[idx]) / h == doctest::Approx(1.0).epsilon(1e-6));
                }
            }
        }
    }
}

TEST_CASE("layer selection picks the last n layers") {
    CHECK(layer_selection(12, 0).empty());
    CHECK(layer_selection(12, 6) == std::vector<int>{6, 7, 8, 9, 10, 11});
    CHECK(layer_selection(12, 12) == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
    CHECK(layer_selection(1, 1) == std::vector<int>{0});
    CHECK(layer_selection(0, 0).empty());
    try {
        layer_selection(12, 13);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidCount);
    }
    CHECK_THROWS_AS(layer_selection(12, -1), Error);
    CHECK_THROWS_AS(layer_selection(-1, 0), Error);
}

TEST_CASE("expert bank JSON round trip") {
    Rng rng(509);
    for (const bool with_cls : {false, true}) {
        const ExpertBank bank = random_bank(rng, 5, kRegionCount, with_cls);
        const std::string text = serialize_expert_bank(bank);
        const ExpertBank back = parse_expert_bank(text);
        CHECK(back.dim == bank.dim);
        REQUIRE(back.experts.size() == bank.experts.size());
        for (std::size_t k = 0; k < bank.experts.size(); ++k) {
            CHECK(back.experts[k].weight == bank.experts[k].weight);
            CHECK(back.experts[k].bias == bank.experts[k].bias);
        }
        CHECK(back.shared_key.weight == bank.shared_key.weight);
        CHECK(back.cls_expert.has_value() == with_cls);
        if (with_cls) CHECK(back.cls_expert->weight == bank.cls_expert->weight);
    }
}

TEST_CASE("expert bank parsing rejects malformed documents") {
    const auto expect_malformed = [](const std::string& text) {
        try {
            parse_expert_bank(text);
            FAIL("expected throw for: ", text);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::MalformedFixture);
        }
    };
    expect_malformed("not json at all");
    expect_malformed("[]");
    expect_malformed("{}");
    expect_malformed(R"({"dim": 2, "experts": []})");  // missing shared_key
    expect_malformed(
        R"({"dim": 2, "experts": [], "shared_key": {"dim": 2, "weight": [1,0,0,1], "bias": [0,0]}})");
    expect_malformed(
        R"({"dim": 2,
            "experts": [{"dim": 3, "weight": [1], "bias": [1]}],
            "shared_key": {"dim": 2, "weight": [1,0,0,1], "bias": [0,0]}})");
}
