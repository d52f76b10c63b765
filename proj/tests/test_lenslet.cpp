#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <vector>

#include "lf/lenslet.hpp"
#include "lf/rng.hpp"

using namespace lf;
using namespace lf::lenslet;

// ---------------------------------------------------------------------------
// CFA layout
// ---------------------------------------------------------------------------

TEST_CASE("channel_at matches the four canonical 2x2 cells") {
    // Literal tables: rows are (y,x) = (0,0),(0,1),(1,0),(1,1); 0=R 1=G 2=B.
    struct Case { BayerPattern p; int cell[4]; };
    const Case cases[] = {
        {BayerPattern::RGGB, {0, 1, 1, 2}},
        {BayerPattern::GRBG, {1, 0, 2, 1}},
        {BayerPattern::GBRG, {1, 2, 0, 1}},
        {BayerPattern::BGGR, {2, 1, 1, 0}},
    };
    for (const auto& c : cases) {
        CHECK(channel_at(c.p, 0, 0) == c.cell[0]);
        CHECK(channel_at(c.p, 1, 0) == c.cell[1]);
        CHECK(channel_at(c.p, 0, 1) == c.cell[2]);
        CHECK(channel_at(c.p, 1, 1) == c.cell[3]);
        // 2-periodic in both directions, including far from the origin.
        CHECK(channel_at(c.p, 6, 4) == c.cell[0]);
        CHECK(channel_at(c.p, 129, 77) == c.cell[3]);
    }
    // Every 2x2 cell holds one red, two greens, one blue.
    for (const auto& c : cases) {
        int count[3] = {0, 0, 0};
        for (int i = 0; i < 4; ++i) ++count[c.cell[i]];
        CHECK(count[0] == 1);
        CHECK(count[1] == 2);
        CHECK(count[2] == 1);
    }
}

// ---------------------------------------------------------------------------
// Grid geometry
// ---------------------------------------------------------------------------

TEST_CASE("lenslet_centre places square and hex grids") {
    LensletGrid g;
    g.spacing_x = 10.0;
    g.spacing_y = 8.0;
    g.offset_x = 1.0;
    g.offset_y = 2.0;
    double cx, cy;
    lenslet_centre(g, 2, 3, cx, cy);
    CHECK(cx == doctest::Approx(31.0));
    CHECK(cy == doctest::Approx(18.0));

    g.layout = LensletLayout::HexRowOffset;
    lenslet_centre(g, 1, 3, cx, cy); // odd row: half-spacing shift in x
    CHECK(cx == doctest::Approx(1.0 + 30.0 + 5.0));
    CHECK(cy == doctest::Approx(10.0));
    lenslet_centre(g, 2, 3, cx, cy); // even row: no shift
    CHECK(cx == doctest::Approx(31.0));

    SUBCASE("rotation by 90 degrees maps (x,y) to (-y,x) about the offset") {
        LensletGrid r;
        r.spacing_x = 10.0;
        r.spacing_y = 8.0;
        r.offset_x = 100.0;
        r.offset_y = 50.0;
        r.rotation = 1.5707963267948966;
        lenslet_centre(r, 2, 3, cx, cy); // local (30, 16)
        CHECK(cx == doctest::Approx(100.0 - 16.0).epsilon(1e-9));
        CHECK(cy == doctest::Approx(50.0 + 30.0).epsilon(1e-9));
    }
}

// ---------------------------------------------------------------------------
// Quantile
// ---------------------------------------------------------------------------

// Reference: full sort plus linear interpolation at rank p*(n-1).
static double quantile_oracle(std::vector<float> v, double p) {
    std::sort(v.begin(), v.end());
    double rank = p * (static_cast<double>(v.size()) - 1.0);
    size_t lo = static_cast<size_t>(rank);
    double frac = rank - static_cast<double>(lo);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + frac * (static_cast<double>(v[lo + 1]) - v[lo]);
}

TEST_CASE("quantile agrees with a full-sort reference") {
    Rng rng(101);
    for (int n : {1, 2, 7, 100, 4097}) {
        std::vector<float> v(n);
        for (float& x : v) x = static_cast<float>(rng.uniform());
        for (double p : {0.0, 0.1, 0.5, 0.75, 0.999, 1.0}) {
            CAPTURE(n);
            CAPTURE(p);
            CHECK(quantile(v, p) == doctest::Approx(quantile_oracle(v, p)).epsilon(1e-12));
        }
    }
}

TEST_CASE("high quantile ignores a handful of defective samples") {
    std::vector<float> v(10005, 0.5f);
    for (int i = 0; i < 5; ++i) v[1000 + 997 * i] = 10.0f;
    CHECK(quantile(v, 0.999) == doctest::Approx(0.5));
    CHECK(quantile(v, 1.0) == doctest::Approx(10.0));
}

TEST_CASE("quantile rejects bad arguments") {
    CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(quantile({1.0f}, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(quantile({1.0f}, 1.1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// White-image normalisation
// ---------------------------------------------------------------------------

TEST_CASE("normalize_white_image applies gains per CFA site then scales by the quantile") {
    WhiteImage wi;
    wi.pattern = BayerPattern::RGGB;
    wi.sensor = Image(4, 4, 1);
    Rng rng(7);
    for (float& v : wi.sensor.data) v = static_cast<float>(rng.uniform(0.1, 0.9));
    WhiteBalance wb{2.0, 1.5};

    // Independent expectation.
    std::vector<float> gained(wi.sensor.data.size());
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            int ch = channel_at(wi.pattern, x, y);
            double g = ch == 0 ? wb.r : (ch == 2 ? wb.b : 1.0);
            gained[y * 4 + x] = static_cast<float>(wi.sensor.at(x, y, 0) * g);
        }
    double q = quantile_oracle(gained, 0.9);

    Image norm = normalize_white_image(wi, wb, 0.9);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            CHECK(norm.at(x, y, 0) ==
                  doctest::Approx(gained[y * 4 + x] / q).epsilon(1e-5));
}

TEST_CASE("normalize_white_image rejects degenerate inputs") {
    WhiteImage wi;
    wi.sensor = Image(4, 4, 1); // all zero -> zero quantile
    CHECK_THROWS_AS(normalize_white_image(wi, {1.0, 1.0}, 0.999), std::invalid_argument);
    wi.sensor = Image(4, 4, 1, 0.5f);
    CHECK_THROWS_AS(normalize_white_image(wi, {0.0, 1.0}, 0.999), std::invalid_argument);
    CHECK_THROWS_AS(normalize_white_image(wi, {1.0, -2.0}, 0.999), std::invalid_argument);
    CHECK_THROWS_AS(normalize_white_image(wi, {1.0, 1.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(normalize_white_image(wi, {1.0, 1.0}, 1.5), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Devignetting
// ---------------------------------------------------------------------------

TEST_CASE("devignette divides, clips, and flags unusable sites") {
    PlenopticRaw raw;
    raw.sensor = Image(3, 2, 1);
    float rv[] = {0.2f, 0.9f, 0.1f, 0.4f, 0.0f, 0.3f};
    std::copy(rv, rv + 6, raw.sensor.data.begin());
    Image wi(3, 2, 1);
    float wv[] = {0.5f, 0.6f, 1e-5f, 0.8f, 0.9f, 0.25f};
    std::copy(wv, wv + 6, wi.data.begin());

    DevignetteResult res = devignette(raw, wi, 1e-3);
    CHECK(res.image.data[0] == doctest::Approx(0.4));
    CHECK(res.image.data[1] == 1.0f); // 0.9/0.6 = 1.5 clipped
    CHECK(res.saturated[1] == 1);
    CHECK(res.image.data[2] == 0.0f); // white image below the floor
    CHECK(res.unreliable[2] == 1);
    CHECK(res.image.data[3] == doctest::Approx(0.5));
    CHECK(res.image.data[4] == doctest::Approx(0.0));
    CHECK(res.unreliable[4] == 0); // dark raw over a healthy site is fine
    CHECK(res.image.data[5] == 1.0f); // 0.3/0.25 = 1.2 clipped
    CHECK(res.saturated_count == 2);
    CHECK(res.unreliable_count == 1);
}

TEST_CASE("devignette rejects mismatched shapes") {
    PlenopticRaw raw;
    raw.sensor = Image(4, 4, 1, 0.5f);
    Image wi(5, 4, 1, 1.0f);
    CHECK_THROWS_AS(devignette(raw, wi, 1e-3), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Demosaicing
// ---------------------------------------------------------------------------

namespace {

// Literal 5x5 stencils (times 8) for the gradient-corrected interpolator,
// written out in full as an independent reference implementation.
const double kCross[5][5] = {
    {0, 0, -1, 0, 0},
    {0, 0, 2, 0, 0},
    {-1, 2, 4, 2, -1},
    {0, 0, 2, 0, 0},
    {0, 0, -1, 0, 0},
};
const double kDiag[5][5] = {
    {0, 0, -1.5, 0, 0},
    {0, 2, 0, 2, 0},
    {-1.5, 0, 6, 0, -1.5},
    {0, 2, 0, 2, 0},
    {0, 0, -1.5, 0, 0},
};
const double kHoriz[5][5] = {
    {0, 0, 0.5, 0, 0},
    {0, -1, 0, -1, 0},
    {-1, 4, 5, 4, -1},
    {0, -1, 0, -1, 0},
    {0, 0, 0.5, 0, 0},
};
const double kVert[5][5] = {
    {0, 0, -1, 0, 0},
    {0, -1, 4, -1, 0},
    {0.5, 0, 5, 0, 0.5},
    {0, -1, 4, -1, 0},
    {0, 0, -1, 0, 0},
};

double convolve5(const Image& m, int x, int y, const double k[5][5]) {
    double acc = 0.0;
    for (int j = -2; j <= 2; ++j)
        for (int i = -2; i <= 2; ++i)
            acc += k[j + 2][i + 2] *
                   m.at(mirror_index(x + i, m.width), mirror_index(y + j, m.height), 0);
    return acc / 8.0;
}

Image demosaic_oracle(const Image& m, BayerPattern p) {
    Image out(m.width, m.height, 3);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            double v = m.at(x, y, 0), r, g, b;
            int ch = channel_at(p, x, y);
            if (ch == 1) {
                g = v;
                bool red_row = channel_at(p, x + 1, y) == 0;
                double h = convolve5(m, x, y, kHoriz), vv = convolve5(m, x, y, kVert);
                r = red_row ? h : vv;
                b = red_row ? vv : h;
            } else {
                g = convolve5(m, x, y, kCross);
                double opp = convolve5(m, x, y, kDiag);
                r = ch == 0 ? v : opp;
                b = ch == 2 ? v : opp;
            }
            out.at(x, y, 0) = static_cast<float>(std::clamp(r, 0.0, 1.0));
            out.at(x, y, 1) = static_cast<float>(std::clamp(g, 0.0, 1.0));
            out.at(x, y, 2) = static_cast<float>(std::clamp(b, 0.0, 1.0));
        }
    return out;
}

} // namespace

TEST_CASE("demosaic matches an explicit stencil convolution on random data") {
    Rng rng(31337);
    for (BayerPattern p : {BayerPattern::RGGB, BayerPattern::GRBG,
                           BayerPattern::GBRG, BayerPattern::BGGR}) {
        Image mosaic(17, 13, 1);
        for (float& v : mosaic.data) v = static_cast<float>(rng.uniform());
        Image got = demosaic(mosaic, p);
        Image want = demosaic_oracle(mosaic, p);
        double worst = 0.0;
        for (size_t i = 0; i < got.data.size(); ++i)
            worst = std::max(worst, std::abs(static_cast<double>(got.data[i]) - want.data[i]));
        CAPTURE(static_cast<int>(p));
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("demosaic impulse response reproduces the stencil coefficients") {
    // Flat 0.5 plus a +0.25 impulse at an interior red site (RGGB).
    Image mosaic(16, 16, 1, 0.5f);
    mosaic.at(8, 8, 0) = 0.75f;
    Image out = demosaic(mosaic, BayerPattern::RGGB);

    // At the impulse site: red passes through, green/blue take the DC value
    // plus the impulse scaled by the stencil centre (4/8 and 6/8).
    CHECK(out.at(8, 8, 0) == doctest::Approx(0.75));
    CHECK(out.at(8, 8, 1) == doctest::Approx(0.5 + 0.25 * 0.5));
    CHECK(out.at(8, 8, 2) == doctest::Approx(0.5 + 0.25 * 0.75));
    // One step west: a green site in a red row; impulse is its east neighbour.
    CHECK(out.at(7, 8, 0) == doctest::Approx(0.5 + 0.25 * 4.0 / 8.0));
    CHECK(out.at(7, 8, 1) == doctest::Approx(0.5));
    CHECK(out.at(7, 8, 2) == doctest::Approx(0.5)); // vertical stencil: zero there
    // Two steps west: another red site; impulse sits at lag (2,0).
    CHECK(out.at(6, 8, 0) == doctest::Approx(0.5));
    CHECK(out.at(6, 8, 1) == doctest::Approx(0.5 - 0.25 / 8.0));
    CHECK(out.at(6, 8, 2) == doctest::Approx(0.5 - 0.25 * 1.5 / 8.0));
    // Diagonal neighbour: a blue site; impulse enters only the red estimate.
    CHECK(out.at(7, 7, 0) == doctest::Approx(0.5 + 0.25 * 2.0 / 8.0));
    CHECK(out.at(7, 7, 1) == doctest::Approx(0.5));
    CHECK(out.at(7, 7, 2) == doctest::Approx(0.5));
    // Far away: untouched.
    CHECK(out.at(2, 3, 0) == doctest::Approx(0.5));
}

TEST_CASE("demosaic reproduces constant and affine mosaics") {
    SUBCASE("constant") {
        Image mosaic(12, 10, 1, 0.37f);
        Image out = demosaic(mosaic, BayerPattern::GRBG);
        for (float v : out.data) CHECK(v == doctest::Approx(0.37).epsilon(1e-6));
    }
    SUBCASE("affine interior") {
        Image mosaic(32, 32, 1);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                mosaic.at(x, y, 0) = static_cast<float>(0.1 + 0.007 * x + 0.011 * y);
        Image out = demosaic(mosaic, BayerPattern::BGGR);
        for (int y = 2; y < 30; ++y)
            for (int x = 2; x < 30; ++x) {
                double want = 0.1 + 0.007 * x + 0.011 * y;
                for (int c = 0; c < 3; ++c)
                    CHECK(out.at(x, y, c) == doctest::Approx(want).epsilon(1e-5));
            }
    }
}

TEST_CASE("demosaic validates its input") {
    Image rgb(8, 8, 3);
    CHECK_THROWS_AS(demosaic(rgb, BayerPattern::RGGB), std::invalid_argument);
    Image tiny(1, 1, 1);
    CHECK_THROWS_AS(demosaic(tiny, BayerPattern::RGGB), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// View extraction
// ---------------------------------------------------------------------------

static Image random_rgb(int w, int h, uint64_t seed) {
    Image img(w, h, 3);
    Rng rng(seed);
    for (float& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

TEST_CASE("guided interpolation with a flat white image is bit-identical to plain") {
    Image rgb = random_rgb(48, 48, 99);
    Image wi(48, 48, 1, 1.0f);
    LensletGrid grid;
    grid.spacing_x = grid.spacing_y = 9.7;
    grid.offset_x = 3.3;
    grid.offset_y = 4.1;
    grid.rotation = 0.02;
    grid.lens_rows = grid.lens_cols = 4;
    DecodeParams guided, plain;
    guided.interpolation = Interpolation::WiGuidedBicubic;
    plain.interpolation = Interpolation::Bicubic;
    guided.dark_view_luma_floor = plain.dark_view_luma_floor = 0.0;

    LightField a = extract_views(rgb, wi, grid, guided);
    LightField b = extract_views(rgb, wi, grid, plain);
    REQUIRE(a.views.size() == b.views.size());
    for (size_t i = 0; i < a.views.size(); ++i)
        CHECK(std::memcmp(a.views[i].data.data(), b.views[i].data.data(),
                          a.views[i].data.size() * sizeof(float)) == 0);
}

TEST_CASE("guided interpolation discounts taps the white image marks as dead") {
    // Constant scene with one dead pixel; the white image knows it is dead.
    Image rgb(8, 8, 3, 0.6f);
    Image wi(8, 8, 1, 1.0f);
    for (int c = 0; c < 3; ++c) rgb.at(5, 4, c) = 0.0f;
    wi.at(5, 4, 0) = 1e-4f;

    LensletGrid grid;
    grid.spacing_x = grid.spacing_y = 8.0;
    grid.offset_x = 4.3; // centre view samples at (4.3, 4.0): the dead pixel is a tap
    grid.offset_y = 4.0;
    grid.lens_rows = grid.lens_cols = 1;
    DecodeParams guided, plain;
    guided.interpolation = Interpolation::WiGuidedBicubic;
    plain.interpolation = Interpolation::Bicubic;

    float g = extract_views(rgb, wi, grid, guided).centre_view().at(0, 0, 1);
    float p = extract_views(rgb, wi, grid, plain).centre_view().at(0, 0, 1);
    CHECK(std::abs(g - 0.6f) < 1e-3f);
    CHECK(std::abs(p - 0.6f) > 0.05f);
}

TEST_CASE("bicubic view extraction reproduces a constant scene exactly") {
    Image rgb(40, 40, 3, 0.42f);
    Image wi(40, 40, 1, 1.0f);
    LensletGrid grid;
    grid.spacing_x = grid.spacing_y = 7.3;
    grid.offset_x = 5.1;
    grid.offset_y = 6.2;
    grid.lens_rows = grid.lens_cols = 4;
    DecodeParams params;
    LightField out = extract_views(rgb, wi, grid, params);
    for (const Image& v : out.views)
        for (float x : v.data) CHECK(x == doctest::Approx(0.42).epsilon(1e-6));
}

TEST_CASE("extract_views validates its arguments") {
    Image rgb = random_rgb(32, 32, 5);
    Image wi(32, 32, 1, 1.0f);
    LensletGrid grid;
    grid.spacing_x = grid.spacing_y = 8.0;
    grid.lens_rows = grid.lens_cols = 3;
    DecodeParams params;

    SUBCASE("even view counts") {
        params.num_views_u = 4;
        CHECK_THROWS_AS(extract_views(rgb, wi, grid, params), std::invalid_argument);
    }
    SUBCASE("sub-pixel view pitch") {
        grid.spacing_x = grid.spacing_y = 4.0; // 5 views over 4 pixels
        CHECK_THROWS_AS(extract_views(rgb, wi, grid, params), std::invalid_argument);
    }
    SUBCASE("white image shape mismatch") {
        Image bad(16, 32, 1, 1.0f);
        CHECK_THROWS_AS(extract_views(rgb, bad, grid, params), std::invalid_argument);
    }
    SUBCASE("non-RGB input") {
        Image grey(32, 32, 1, 0.5f);
        CHECK_THROWS_AS(extract_views(grey, wi, grid, params), std::invalid_argument);
    }
    SUBCASE("empty grid") {
        grid.lens_rows = 0;
        CHECK_THROWS_AS(extract_views(rgb, wi, grid, params), std::invalid_argument);
    }
}

TEST_CASE("decode rejects mismatched raw and white captures") {
    PlenopticRaw raw;
    raw.sensor = Image(32, 32, 1, 0.5f);
    raw.pattern = BayerPattern::RGGB;
    WhiteImage wi;
    wi.sensor = Image(32, 32, 1, 0.8f);
    wi.pattern = BayerPattern::GRBG;
    LensletGrid grid;
    grid.spacing_x = grid.spacing_y = 8.0;
    grid.lens_rows = grid.lens_cols = 3;
    DecodeParams params;
    CHECK_THROWS_AS(decode(raw, wi, {1.0, 1.0}, grid, params), std::invalid_argument);
    wi.pattern = BayerPattern::RGGB;
    wi.sensor = Image(16, 32, 1, 0.8f);
    CHECK_THROWS_AS(decode(raw, wi, {1.0, 1.0}, grid, params), std::invalid_argument);
}
