#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lf/color.hpp"
#include "lf/lenslet.hpp"
#include "lf/metrics.hpp"
#include "lf/rng.hpp"
#include "lf/sim.hpp"

using namespace lf;
using namespace lf::metrics;

namespace {

Image uniform_rgb(int w, int h, float r, float g, float b) {
    Image img(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img.at(x, y, 0) = r;
            img.at(x, y, 1) = g;
            img.at(x, y, 2) = b;
        }
    return img;
}

Image uniform_lab(int w, int h, const Lab& c) {
    Image img(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img.at(x, y, 0) = static_cast<float>(c.L);
            img.at(x, y, 1) = static_cast<float>(c.a);
            img.at(x, y, 2) = static_cast<float>(c.b);
        }
    return img;
}

double plain_delta_e(const Lab& a, const Lab& b) {
    return std::sqrt((a.L - b.L) * (a.L - b.L) + (a.a - b.a) * (a.a - b.a) +
                     (a.b - b.b) * (a.b - b.b));
}

// Same-noise-in-every-channel AWGN, so the luminance noise level equals sigma.
void add_grey_noise(Image& img, double sigma, uint64_t seed) {
    Rng rng(seed);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const float n = static_cast<float>(sigma * rng.normal());
            for (int c = 0; c < img.channels; ++c) img.at(x, y, c) += n;
        }
}

Image textured_base(int w, int h) {
    LightField lf = sim::synth_lightfield(sim::SceneKind::TexturedDisparity, 1, 1, w, h);
    return lf.view(0, 0);
}

} // namespace

// ---------------------------------------------------------------------------
// Spatial Lab difference
// ---------------------------------------------------------------------------

TEST_CASE("spatial Lab difference of an image with itself is exactly zero") {
    Image img = textured_base(40, 32);
    CHECK(scielab(img, img) == 0.0);
}

TEST_CASE("uniform images score their plain Lab distance") {
    Image a = uniform_rgb(33, 29, 0.8f, 0.3f, 0.2f);
    Image b = uniform_rgb(33, 29, 0.5f, 0.55f, 0.7f);
    const Lab la = rgb_to_lab_value(a.at(0, 0, 0), a.at(0, 0, 1), a.at(0, 0, 2));
    const Lab lb = rgb_to_lab_value(b.at(0, 0, 0), b.at(0, 0, 1), b.at(0, 0, 2));
    CHECK(scielab(a, b) == doctest::Approx(plain_delta_e(la, lb)).epsilon(1e-4));
}

TEST_CASE("pixel-level chromatic texture is attenuated against its mean colour") {
    const int w = 64, h = 64;
    // Near-isoluminant red/green pair: the checker contrast is chromatic, the
    // band the contrast-sensitivity filters suppress most at fine pitch.
    const float c1[3] = {0.8f, 0.2f, 0.2f}, c2[3] = {0.2f, 0.37763f, 0.2f};
    Image checker(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float* c = ((x + y) & 1) ? c2 : c1;
            for (int ch = 0; ch < 3; ++ch) checker.at(x, y, ch) = c[ch];
        }
    Image mean = uniform_rgb(w, h, 0.5f * (c1[0] + c2[0]), 0.5f * (c1[1] + c2[1]),
                             0.5f * (c1[2] + c2[2]));

    double plain = 0.0;
    const Lab lm = rgb_to_lab_value(mean.at(0, 0, 0), mean.at(0, 0, 1), mean.at(0, 0, 2));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            plain += plain_delta_e(
                rgb_to_lab_value(checker.at(x, y, 0), checker.at(x, y, 1),
                                 checker.at(x, y, 2)),
                lm);
    plain /= w * h;

    const double spatial = scielab(checker, mean);
    CHECK(spatial < plain);
    CHECK(spatial < 0.5 * plain); // the chroma kernels span many pixels at 23 spd
}

TEST_CASE("spatial Lab difference validates its inputs") {
    Image a = uniform_rgb(16, 16, 0.5f, 0.5f, 0.5f);
    Image b = uniform_rgb(17, 16, 0.5f, 0.5f, 0.5f);
    CHECK_THROWS_AS(scielab(a, b), std::invalid_argument);
    CHECK_THROWS_AS(scielab(a, a, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(scielab(a, a, -3.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Histogram distance
// ---------------------------------------------------------------------------

TEST_CASE("histogram distance of identical images is zero") {
    Image img = rgb_to_lab(textured_base(48, 40));
    CHECK(hist_chi2(img, img) == 0.0);
}

TEST_CASE("uniform images in disjoint bins score the maximum distance of two") {
    Image a = uniform_lab(20, 20, {10.0, -100.0, -100.0});
    Image b = uniform_lab(20, 20, {90.0, 100.0, 100.0});
    CHECK(hist_chi2(a, b) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("distance matches a naive double-loop oracle on random images") {
    Rng rng(404);
    Image a(37, 23, 3), b(37, 23, 3);
    auto fill = [&](Image& img) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                // Spill slightly past the nominal ranges to exercise clamping.
                img.at(x, y, 0) = static_cast<float>(rng.uniform(-5.0, 108.0));
                img.at(x, y, 1) = static_cast<float>(rng.uniform(-140.0, 140.0));
                img.at(x, y, 2) = static_cast<float>(rng.uniform(-140.0, 140.0));
            }
    };
    fill(a);
    fill(b);

    const int bins = 25;
    double want = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double lo = c == 0 ? 0.0 : -128.0;
        const double hi = c == 0 ? 100.0 : 127.0;
        std::vector<double> p(bins, 0.0), q(bins, 0.0);
        for (int y = 0; y < a.height; ++y)
            for (int x = 0; x < a.width; ++x) {
                auto slot = [&](double v) {
                    int i = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
                    return std::clamp(i, 0, bins - 1);
                };
                p[slot(a.at(x, y, c))] += 1.0;
                q[slot(b.at(x, y, c))] += 1.0;
            }
        const double n = static_cast<double>(a.width) * a.height;
        double chi = 0.0;
        for (int i = 0; i < bins; ++i) {
            const double pi = p[i] / n, qi = q[i] / n;
            if (pi + qi > 0.0) chi += (pi - qi) * (pi - qi) / (pi + qi);
        }
        want += chi / 3.0;
    }
    CHECK(hist_chi2(a, b, bins) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("histogram distance is bounded by two and rejects empty input") {
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        Image a(16, 16, 3), b(16, 16, 3);
        for (size_t i = 0; i < a.data.size(); ++i) {
            a.data[i] = static_cast<float>(rng.uniform(-128.0, 127.0));
            b.data[i] = static_cast<float>(rng.uniform(-128.0, 127.0));
        }
        const double d = hist_chi2(a, b);
        CHECK(d >= 0.0);
        CHECK(d <= 2.0);
    }
    Image empty;
    Image ok = uniform_lab(8, 8, {50, 0, 0});
    CHECK_THROWS_AS(hist_chi2(empty, ok), std::invalid_argument);
    CHECK_THROWS_AS(hist_chi2(ok, ok, 0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Noise estimation
// ---------------------------------------------------------------------------

TEST_CASE("a clean constant image estimates zero noise") {
    Image img = uniform_rgb(48, 48, 0.5f, 0.5f, 0.5f);
    CHECK(estimate_noise(img) == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("pure Gaussian noise on a constant image is recovered within ten percent") {
    const double sigma = 0.02;
    double mean = 0.0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
        Image img(256, 256, 1, 0.5f);
        add_grey_noise(img, sigma, 500 + static_cast<uint64_t>(t));
        mean += estimate_noise(img);
    }
    mean /= trials;
    CHECK(mean > 0.9 * sigma);
    CHECK(mean < 1.1 * sigma);
}

TEST_CASE("noise on a textured scene is recovered within fifteen percent") {
    const double sigma = 0.05;
    double mean = 0.0;
    const int trials = 5;
    for (int t = 0; t < trials; ++t) {
        Image img = textured_base(256, 256);
        add_grey_noise(img, sigma, 900 + static_cast<uint64_t>(t));
        mean += estimate_noise(img);
    }
    mean /= trials;
    CHECK(mean > 0.85 * sigma);
    CHECK(mean < 1.15 * sigma);
}

TEST_CASE("the estimate is invariant to a constant offset") {
    Image img = textured_base(128, 128);
    add_grey_noise(img, 0.03, 31);
    Image shifted = img;
    for (float& v : shifted.data) v += 0.1f;
    const double a = estimate_noise(img);
    const double b = estimate_noise(shifted);
    CHECK(b == doctest::Approx(a).epsilon(1e-3));
}

TEST_CASE("estimates rank injected noise levels in order") {
    Image base = textured_base(128, 128);
    Image unit(128, 128, 3);
    Rng rng(61);
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x) {
            const float n = static_cast<float>(rng.normal());
            for (int c = 0; c < 3; ++c) unit.at(x, y, c) = n;
        }
    std::vector<double> est;
    for (double sigma : {0.01, 0.02, 0.05, 0.1}) {
        Image img = base;
        for (size_t i = 0; i < img.data.size(); ++i)
            img.data[i] += static_cast<float>(sigma) * unit.data[i];
        est.push_back(estimate_noise(img));
    }
    CHECK(std::is_sorted(est.begin(), est.end()));
    CHECK(est.front() < est.back());
}

TEST_CASE("noise estimation validates its inputs") {
    CHECK_THROWS_AS(estimate_noise(uniform_rgb(31, 64, 0.5f, 0.5f, 0.5f)),
                    std::invalid_argument);
    CHECK_THROWS_AS(estimate_noise(uniform_rgb(64, 64, 0.5f, 0.5f, 0.5f), 2),
                    std::invalid_argument);
    Image two(64, 64, 2);
    CHECK_THROWS_AS(estimate_noise(two), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Noise propagation through the decode chain
// ---------------------------------------------------------------------------

TEST_CASE("decoded-view noise matches a multi-capture propagation oracle") {
    // Flat scene, so every decoded pixel's deviation across re-captures is
    // noise propagated through devignette, demosaic and view extraction.
    sim::SimParams p;
    p.grid.spacing_x = p.grid.spacing_y = 10.0;
    p.grid.offset_x = p.grid.offset_y = 5.0;
    p.grid.lens_rows = p.grid.lens_cols = 96;
    p.vignette_sigma = 0.5;
    p.noise_sigma = 0.02;
    LightField flat = sim::synth_lightfield(sim::SceneKind::FlatGrey, 3, 3, 96, 96);
    lenslet::WhiteImage wi = sim::synth_white_image(p, 960, 960);
    lenslet::DecodeParams dp;
    dp.num_views_u = dp.num_views_v = 3;

    const int captures = 12;
    std::vector<double> mean, m2;
    Image first_centre;
    for (int m = 0; m < captures; ++m) {
        p.seed = 4000 + static_cast<uint64_t>(m);
        lenslet::PlenopticRaw raw = sim::simulate_raw(flat, p, 960, 960);
        LightField got = lenslet::decode(raw, wi, {1.0, 1.0}, p.grid, dp);
        const Image& centre = got.centre_view();
        if (m == 0) {
            first_centre = centre;
            mean.assign(static_cast<size_t>(centre.width) * centre.height, 0.0);
            m2.assign(mean.size(), 0.0);
        }
        for (int y = 0; y < centre.height; ++y)
            for (int x = 0; x < centre.width; ++x) {
                const size_t i = static_cast<size_t>(y) * centre.width + x;
                const double lum =
                    luma709(centre.at(x, y, 0), centre.at(x, y, 1), centre.at(x, y, 2));
                const double delta = lum - mean[i];
                mean[i] += delta / (m + 1);
                m2[i] += delta * (lum - mean[i]);
            }
    }
    double propagated = 0.0;
    for (double v : m2) propagated += std::sqrt(v / (captures - 1));
    propagated /= static_cast<double>(m2.size());
    REQUIRE(propagated > 0.0);

    const double estimated = estimate_noise(first_centre);
    CHECK(estimated > 0.7 * propagated);
    CHECK(estimated < 1.3 * propagated);
}

// ---------------------------------------------------------------------------
// Whole-light-field reports
// ---------------------------------------------------------------------------

TEST_CASE("a light field of identical views reports zero distances") {
    Image base = textured_base(48, 48);
    LightField lf(3, 3, 48, 48, 3);
    for (Image& v : lf.views) v = base;
    std::fill(lf.valid.begin(), lf.valid.end(), uint8_t{1});

    MetricReport r = lightfield_report(lf);
    CHECK(r.per_view.size() == 9);
    CHECK(r.mean_scielab == 0.0);
    CHECK(r.mean_hist_chi2 == 0.0);
    for (const ViewMetrics& vm : r.per_view) {
        CHECK(vm.scielab == 0.0);
        CHECK(vm.hist_chi2 == 0.0);
    }
}

TEST_CASE("aggregates are the means of the per-view rows") {
    Image base = textured_base(48, 48);
    LightField lf(3, 3, 48, 48, 3);
    Rng rng(8);
    for (int u = 0; u < 3; ++u)
        for (int v = 0; v < 3; ++v) {
            Image img = base;
            add_grey_noise(img, 0.01 + 0.01 * rng.uniform(), rng.next());
            lf.view(u, v) = img;
        }
    std::fill(lf.valid.begin(), lf.valid.end(), uint8_t{1});
    lf.set_valid(0, 2, false);

    MetricReport r = lightfield_report(lf);
    CHECK(r.per_view.size() == 8);
    double ds = 0.0, dh = 0.0, dn = 0.0;
    long nd = 0;
    for (const ViewMetrics& vm : r.per_view) {
        dn += vm.noise_sigma;
        if (vm.is_centre) continue;
        ds += vm.scielab;
        dh += vm.hist_chi2;
        ++nd;
    }
    CHECK(r.mean_scielab == doctest::Approx(ds / nd).epsilon(1e-12));
    CHECK(r.mean_hist_chi2 == doctest::Approx(dh / nd).epsilon(1e-12));
    CHECK(r.mean_noise_sigma ==
          doctest::Approx(dn / static_cast<double>(r.per_view.size())).epsilon(1e-12));
}

TEST_CASE("a uniform lightness shift reports the single-pair histogram distance") {
    // All non-centre views share one shifted image, so the aggregate equals
    // any single pair's distance.
    const int w = 48, h = 48;
    Image base_lab(w, h, 3);
    Rng rng(15);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            base_lab.at(x, y, 0) = static_cast<float>(rng.uniform(30.0, 60.0));
            base_lab.at(x, y, 1) = static_cast<float>(rng.uniform(-20.0, 20.0));
            base_lab.at(x, y, 2) = static_cast<float>(rng.uniform(-20.0, 20.0));
        }
    Image shifted_lab = base_lab;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) shifted_lab.at(x, y, 0) += 10.0f;

    const Image base = lab_to_rgb(base_lab);
    const Image shifted = lab_to_rgb(shifted_lab);
    LightField lf(3, 3, w, h, 3);
    for (int u = 0; u < 3; ++u)
        for (int v = 0; v < 3; ++v) lf.view(u, v) = (u == 1 && v == 1) ? base : shifted;
    std::fill(lf.valid.begin(), lf.valid.end(), uint8_t{1});

    MetricReport r = lightfield_report(lf);
    const double pair = hist_chi2(rgb_to_lab(shifted), rgb_to_lab(base));
    CHECK(r.mean_hist_chi2 == doctest::Approx(pair).epsilon(1e-9));
    CHECK(r.mean_scielab > 5.0); // a 10-unit lightness shift is clearly visible
}

TEST_CASE("report renderings carry one row per view") {
    Image base = textured_base(48, 48);
    LightField lf(3, 3, 48, 48, 3);
    for (Image& v : lf.views) v = base;
    std::fill(lf.valid.begin(), lf.valid.end(), uint8_t{1});
    MetricReport r = lightfield_report(lf);

    const std::string text = format_report(r);
    const std::string csv = report_csv(r);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 9 + 1);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 9 + 1);
    CHECK(csv.rfind("row,col,is_centre,", 0) == 0);
}
