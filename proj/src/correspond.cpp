#include "lf/correspond.hpp"

#include "lf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace lf::correspond {

namespace {

Image downsample2(const Image& src) {
    int w = std::max(1, src.width / 2), h = std::max(1, src.height / 2);
    Image out(w, h, src.channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int x0 = 2 * x, y0 = 2 * y;
            int x1 = std::min(x0 + 1, src.width - 1);
            int y1 = std::min(y0 + 1, src.height - 1);
            for (int c = 0; c < src.channels; ++c)
                out.at(x, y, c) =
                    0.25f * (src.at(x0, y0, c) + src.at(x1, y0, c) +
                             src.at(x0, y1, c) + src.at(x1, y1, c));
        }
    return out;
}

double sad(const Image& a, int ax, int ay, const Image& b, int bx, int by,
           int r) {
    double s = 0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            for (int c = 0; c < 3; ++c)
                s += std::abs(a.at_clamped(ax + dx, ay + dy, c) -
                              b.at_clamped(bx + dx, by + dy, c));
    return s;
}

struct Disp {
    int dx = 0, dy = 0;
};

//! Seed-grid displacement field; seed (i, j) sits at (i*stride, j*stride).
struct Field {
    int nx = 0, ny = 0, stride = 8;
    std::vector<Disp> d;
    Disp& at(int i, int j) { return d[static_cast<size_t>(j) * nx + i]; }
};

Field run_direction(const std::vector<Image>& src_pyr,
                    const std::vector<Image>& dst_pyr,
                    const PatchMatchConfig& cfg, Rng rng) {
    Field f;
    f.stride = cfg.seed_stride;
    f.nx = 1 + (src_pyr[0].width - 1) / cfg.seed_stride;
    f.ny = 1 + (src_pyr[0].height - 1) / cfg.seed_stride;
    f.d.assign(static_cast<size_t>(f.nx) * f.ny, {});

    for (int l = static_cast<int>(src_pyr.size()) - 1; l >= 0; --l) {
        const Image& src = src_pyr[l];
        const Image& dst = dst_pyr[l];
        const int scale = 1 << l;
        const int radius =
            std::max(1, static_cast<int>(std::lround(cfg.search_radius / scale)));
        auto seed_pos = [&](int i, int j) {
            return std::pair<int, int>(std::min(i * f.stride / scale, src.width - 1),
                                       std::min(j * f.stride / scale, src.height - 1));
        };
        auto cost_of = [&](int i, int j, Disp cand) {
            auto [x, y] = seed_pos(i, j);
            return sad(src, x, y, dst, x + cand.dx, y + cand.dy, cfg.patch_radius);
        };
        // Matches outside the destination image are meaningless; keeping
        // candidates in-bounds also removes the degenerate attractor where a
        // clamped (constant) off-image patch out-scores any real match.
        auto in_bounds = [&](int i, int j, Disp cand) {
            auto [x, y] = seed_pos(i, j);
            const int mx = x + cand.dx, my = y + cand.dy;
            return mx >= 0 && my >= 0 && mx < dst.width && my < dst.height;
        };

        if (l == static_cast<int>(src_pyr.size()) - 1) {
            // Random initialisation, with the null displacement as a competing
            // candidate so self-similar pairs lock onto the identity at once.
            for (int j = 0; j < f.ny; ++j)
                for (int i = 0; i < f.nx; ++i) {
                    Disp r{rng.uniform_int(-radius, radius),
                           rng.uniform_int(-radius, radius)};
                    f.at(i, j) = in_bounds(i, j, r) &&
                                         cost_of(i, j, r) < cost_of(i, j, {0, 0})
                                     ? r
                                     : Disp{0, 0};
                }
        } else {
            // Doubled displacements can poke out near the borders of the finer
            // level; pull them back inside.
            for (int j = 0; j < f.ny; ++j)
                for (int i = 0; i < f.nx; ++i) {
                    Disp& dd = f.at(i, j);
                    dd.dx *= 2;
                    dd.dy *= 2;
                    auto [x, y] = seed_pos(i, j);
                    dd.dx = std::clamp(dd.dx, -x, dst.width - 1 - x);
                    dd.dy = std::clamp(dd.dy, -y, dst.height - 1 - y);
                }
        }

        for (int pass = 0; pass < 4; ++pass) {
            const bool fwd = pass % 2 == 0;
            for (int jj = 0; jj < f.ny; ++jj)
                for (int ii = 0; ii < f.nx; ++ii) {
                    const int i = fwd ? ii : f.nx - 1 - ii;
                    const int j = fwd ? jj : f.ny - 1 - jj;
                    Disp cur = f.at(i, j);
                    double best = cost_of(i, j, cur);
                    auto consider = [&](Disp cand) {
                        if (!in_bounds(i, j, cand)) return;
                        double c = cost_of(i, j, cand);
                        if (c < best) {
                            best = c;
                            cur = cand;
                        }
                    };
                    // Propagation from the neighbours already visited this pass.
                    const int si = fwd ? -1 : 1;
                    if (i + si >= 0 && i + si < f.nx) consider(f.at(i + si, j));
                    if (j + si >= 0 && j + si < f.ny) consider(f.at(i, j + si));
                    // Exponentially shrinking random search around the best.
                    for (int r = radius; r >= 1; r /= 2)
                        consider({cur.dx + rng.uniform_int(-r, r),
                                  cur.dy + rng.uniform_int(-r, r)});
                    f.at(i, j) = cur;
                }
        }
    }
    return f;
}

Lab mean_lab_3x3(const Image& img, int x, int y) {
    double r = 0, g = 0, b = 0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            r += img.at_clamped(x + dx, y + dy, 0);
            g += img.at_clamped(x + dx, y + dy, 1);
            b += img.at_clamped(x + dx, y + dy, 2);
        }
    return rgb_to_lab_value(r / 9.0, g / 9.0, b / 9.0);
}

} // namespace

CorrespondenceSet patch_match(const Image& target, const Image& palette,
                              const PatchMatchConfig& cfg) {
    if (target.channels != 3 || palette.channels != 3)
        throw std::invalid_argument("patch_match: images must have 3 channels");
    if (!target.same_shape(palette))
        throw std::invalid_argument("patch_match: image dimensions differ");
    if (cfg.levels < 1 || cfg.seed_stride < 1 || cfg.patch_radius < 0)
        throw std::invalid_argument("patch_match: invalid configuration");
    const int window = 2 * cfg.patch_radius + 1;
    if (std::min(target.width, target.height) >> (cfg.levels - 1) < window)
        throw std::invalid_argument(
            "patch_match: images too small for pyramid depth");

    // Gain normalisation so dark views still match on structure; the reported
    // target colours are sampled from the original, unscaled pixels.
    const double lum_t = mean_luma(target), lum_p = mean_luma(palette);
    const double gain = lum_t > 1e-12 ? lum_p / lum_t : 1.0;
    Image scaled = target;
    if (std::abs(gain - 1.0) > 1e-9)
        for (float& v : scaled.data) v = static_cast<float>(v * gain);

    std::vector<Image> tgt_pyr{std::move(scaled)}, pal_pyr{palette};
    for (int l = 1; l < cfg.levels; ++l) {
        tgt_pyr.push_back(downsample2(tgt_pyr.back()));
        pal_pyr.push_back(downsample2(pal_pyr.back()));
    }

    Rng rng(cfg.seed);
    Field fwd = run_direction(tgt_pyr, pal_pyr, cfg, rng.fork(0xf0));
    Field bwd = run_direction(pal_pyr, tgt_pyr, cfg, rng.fork(0xb0));

    CorrespondenceSet out;
    out.width = target.width;
    out.height = target.height;
    for (int j = 0; j < fwd.ny; ++j)
        for (int i = 0; i < fwd.nx; ++i) {
            const int x = i * cfg.seed_stride, y = j * cfg.seed_stride;
            const Disp df = fwd.at(i, j);
            const int mx = x + df.dx, my = y + df.dy;
            if (mx < 0 || my < 0 || mx >= target.width || my >= target.height)
                continue; // match left the palette image
            // Round trip through the nearest backward seed.
            const int bi = std::clamp((mx + cfg.seed_stride / 2) / cfg.seed_stride,
                                      0, bwd.nx - 1);
            const int bj = std::clamp((my + cfg.seed_stride / 2) / cfg.seed_stride,
                                      0, bwd.ny - 1);
            const Disp db = bwd.at(bi, bj);
            if (std::hypot(double(df.dx + db.dx), double(df.dy + db.dy)) >
                cfg.fb_threshold)
                continue;
            Correspondence c;
            c.tx = x;
            c.ty = y;
            c.px = mx;
            c.py = my;
            c.c_t = mean_lab_3x3(target, x, y);
            c.c_p = mean_lab_3x3(palette, mx, my);
            out.pairs.push_back(c);
        }
    return out;
}

CorrespondenceSet merge_correspondences(const CorrespondenceSet& a,
                                        const CorrespondenceSet& b) {
    // A default-constructed empty set is the neutral element.
    if (a.n() == 0 && a.width == 0 && a.height == 0) return b;
    if (b.n() == 0 && b.width == 0 && b.height == 0) return a;
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument(
            "merge_correspondences: target dimensions differ");
    CorrespondenceSet out = a;
    out.pairs.insert(out.pairs.end(), b.pairs.begin(), b.pairs.end());
    return out;
}

} // namespace lf::correspond
