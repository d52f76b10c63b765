#include "lf/denoise.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "lf/parallel.hpp"

namespace lf::denoise {
namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

//! Orthonormal DCT-II basis, rows indexed by frequency.
std::vector<double> dct_matrix(int n) {
    std::vector<double> m(static_cast<size_t>(n) * n);
    const double norm0 = std::sqrt(1.0 / n);
    const double norm = std::sqrt(2.0 / n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            m[static_cast<size_t>(k) * n + i] =
                (k == 0 ? norm0 : norm) *
                std::cos(std::numbers::pi * (2 * i + 1) * k / (2.0 * n));
    return m;
}

//! Multiply every length-n fibre along the axis of the given stride by the
//! matrix (or its transpose, which inverts an orthonormal transform).
void apply_axis(std::vector<double>& d, const std::vector<double>& m, int n,
                size_t stride, bool transpose) {
    if (n == 1) return;
    std::vector<double> tmp(n);
    for (size_t hi = 0; hi < d.size(); hi += stride * n) {
        for (size_t lo = hi; lo < hi + stride; ++lo) {
            for (int i = 0; i < n; ++i) tmp[i] = d[lo + i * stride];
            for (int k = 0; k < n; ++k) {
                double acc = 0.0;
                if (transpose) {
                    for (int i = 0; i < n; ++i) acc += m[static_cast<size_t>(i) * n + k] * tmp[i];
                } else {
                    const double* row = m.data() + static_cast<size_t>(k) * n;
                    for (int i = 0; i < n; ++i) acc += row[i] * tmp[i];
                }
                d[lo + k * stride] = acc;
            }
        }
    }
}

//! Full orthonormal Haar decomposition (averages recurse into the front half).
void haar_axis(std::vector<double>& d, int n, size_t stride, bool inverse) {
    if (n == 1) return;
    constexpr double r = 0.70710678118654752440; // 1/sqrt(2)
    std::vector<double> v(n), buf(n);
    for (size_t hi = 0; hi < d.size(); hi += stride * n) {
        for (size_t lo = hi; lo < hi + stride; ++lo) {
            for (int i = 0; i < n; ++i) v[i] = d[lo + i * stride];
            if (!inverse) {
                for (int len = n; len > 1; len /= 2) {
                    const int half = len / 2;
                    for (int i = 0; i < half; ++i) {
                        buf[i] = (v[2 * i] + v[2 * i + 1]) * r;
                        buf[half + i] = (v[2 * i] - v[2 * i + 1]) * r;
                    }
                    std::copy(buf.begin(), buf.begin() + len, v.begin());
                }
            } else {
                for (int len = 2; len <= n; len *= 2) {
                    const int half = len / 2;
                    for (int i = 0; i < half; ++i) {
                        buf[2 * i] = (v[i] + v[half + i]) * r;
                        buf[2 * i + 1] = (v[i] - v[half + i]) * r;
                    }
                    std::copy(buf.begin(), buf.begin() + len, v.begin());
                }
            }
            for (int i = 0; i < n; ++i) d[lo + i * stride] = v[i];
        }
    }
}

void transform_cascade(std::vector<double>& c, int num, int nu, int nv, int patch,
                       bool inverse) {
    const auto mp = dct_matrix(patch);
    const auto mu = dct_matrix(nu);
    const auto mv = dct_matrix(nv);
    const size_t s_px = 1;
    const size_t s_py = patch;
    const size_t s_v = static_cast<size_t>(patch) * patch;
    const size_t s_u = s_v * nv;
    const size_t s_s = s_u * nu;
    if (!inverse) {
        apply_axis(c, mp, patch, s_px, false);
        apply_axis(c, mp, patch, s_py, false);
        apply_axis(c, mv, nv, s_v, false);
        apply_axis(c, mu, nu, s_u, false);
        haar_axis(c, num, s_s, false);
    } else {
        haar_axis(c, num, s_s, true);
        apply_axis(c, mu, nu, s_u, true);
        apply_axis(c, mv, nv, s_v, true);
        apply_axis(c, mp, patch, s_py, true);
        apply_axis(c, mp, patch, s_px, true);
    }
}

void check_stack(const PatchStack5D& s) {
    if (s.num < 1 || s.nu < 1 || s.nv < 1 || s.patch < 1)
        throw std::invalid_argument("patch stack: empty dimensions");
    if (!is_pow2(s.num))
        throw std::invalid_argument("patch stack: depth must be a power of two");
    if (s.data.size() != s.size() || s.origins.size() != static_cast<size_t>(s.num))
        throw std::invalid_argument("patch stack: inconsistent buffers");
}

void check_window(const LightField& lf, const AngularWindow& win) {
    if (win.nu < 1 || win.nv < 1 || win.u0 < 0 || win.v0 < 0 ||
        win.u0 + win.nu > lf.rows || win.v0 + win.nv > lf.cols)
        throw std::invalid_argument("angular window: outside the view grid");
    if (win.centre_u < win.u0 || win.centre_u >= win.u0 + win.nu ||
        win.centre_v < win.v0 || win.centre_v >= win.v0 + win.nv)
        throw std::invalid_argument("angular window: reference view outside the window");
}

void check_ref_patch(const Image& im, std::pair<int, int> ref, int patch, int channel) {
    if (patch < 1) throw std::invalid_argument("patch size must be positive");
    if (channel < 0 || channel >= im.channels)
        throw std::invalid_argument("channel index out of range");
    if (ref.first < 0 || ref.second < 0 || ref.first > im.width - patch ||
        ref.second > im.height - patch)
        throw std::invalid_argument("reference patch out of bounds");
}

// ---------------------------------------------------------------------------
// Opponent colour handling: an orthogonal luminance/chrominance basis, so
// independent per-pixel RGB noise stays independent per channel with the
// std-dev scaled by each row's norm.

constexpr double kOppScale0 = 0.57735026918962576451; // sqrt(1/3)
constexpr double kOppScale1 = 0.70710678118654752440; // sqrt(1/2)
constexpr double kOppScale2 = 0.61237243569579452455; // sqrt(3/8)

void to_opponent(Image& im) {
    const size_t n = static_cast<size_t>(im.width) * im.height;
    for (size_t i = 0; i < n; ++i) {
        float* p = im.data.data() + i * 3;
        const double r = p[0], g = p[1], b = p[2];
        p[0] = static_cast<float>((r + g + b) / 3.0);
        p[1] = static_cast<float>((r - b) / 2.0);
        p[2] = static_cast<float>((r - 2.0 * g + b) / 4.0);
    }
}

void from_opponent(Image& im) {
    const size_t n = static_cast<size_t>(im.width) * im.height;
    for (size_t i = 0; i < n; ++i) {
        float* p = im.data.data() + i * 3;
        const double y = p[0], u = p[1], v = p[2];
        p[0] = static_cast<float>(y + u + (2.0 / 3.0) * v);
        p[1] = static_cast<float>(y - (4.0 / 3.0) * v);
        p[2] = static_cast<float>(y - u + (2.0 / 3.0) * v);
    }
}

// ---------------------------------------------------------------------------
// Aggregation buffers: per view, one value plane and one weight plane per
// channel, accumulated in double so merge order is the only rounding concern.

struct ViewAccum {
    std::vector<double> val, wgt;
};

size_t plane_index(int w, int h, int c, int y, int x) {
    return (static_cast<size_t>(c) * h + y) * w + x;
}

struct TileContext {
    const LightField* data = nullptr;  // source of the stacks being filtered
    const LightField* guide = nullptr; // source for matching (pilot on 2nd stage)
    bool wiener = false;
    AngularWindow win;                // valid rectangular window for this tile
    std::vector<std::pair<int, int>> refs;
    const DenoiseParams* params = nullptr;
    std::vector<double> sigma_ch;
    int w = 0, h = 0, channels = 0;
};

struct TileBuffers {
    std::vector<double> val, wgt; // ((view*channels + c)*h + y)*w + x
};

size_t tile_index(const TileContext& ctx, int view_linear, int c, int y, int x) {
    return ((static_cast<size_t>(view_linear) * ctx.channels + c) * ctx.h + y) * ctx.w + x;
}

int pow2_floor(int n) {
    int p = 1;
    while (2 * p <= n) p *= 2;
    return p;
}

void fill_stack(const LightField& lf, int channel, PatchStack5D& st) {
    const AngularWindow& win = st.window;
    const int patch = st.patch;
    for (int s = 0; s < st.num; ++s) {
        const double ox = st.origins[s].first;
        const double oy = st.origins[s].second;
        for (int u = 0; u < st.nu; ++u) {
            for (int v = 0; v < st.nv; ++v) {
                const Image& im = lf.view(win.u0 + u, win.v0 + v);
                const double dx = st.disparity * (win.v0 + v - win.centre_v);
                const double dy = st.disparity * (win.u0 + u - win.centre_u);
                const double x0 = std::clamp(ox + dx, 0.0, static_cast<double>(im.width - patch));
                const double y0 = std::clamp(oy + dy, 0.0, static_cast<double>(im.height - patch));
                for (int py = 0; py < patch; ++py)
                    for (int px = 0; px < patch; ++px)
                        st.at(s, u, v, py, px) = bilinear(im, static_cast<float>(x0 + px),
                                                          static_cast<float>(y0 + py), channel);
            }
        }
    }
}

//! Empirical Wiener shrinkage of the noisy coefficients guided by the pilot
//! stack's coefficients; returns the aggregation weight.
double wiener_shrink(const std::vector<double>& pilot, std::vector<double>& noisy,
                     double sigma) {
    const double s2 = sigma * sigma;
    double sum_g2 = 0.0;
    for (size_t i = 0; i < noisy.size(); ++i) {
        const double p2 = pilot[i] * pilot[i];
        const double g = p2 / (p2 + s2);
        noisy[i] *= g;
        sum_g2 += g * g;
    }
    return 1.0 / (1.0 + s2 * sum_g2);
}

//! Scatter one filtered stack into the tile buffers. Fractional positions
//! splat with bilinear weights (the adjoint of the sampling used to build the
//! stack), so integer placements stay exact.
void splat_stack(const TileContext& ctx, const PatchStack5D& st, int channel,
                 double weight, TileBuffers& out) {
    const int patch = st.patch;
    for (int s = 0; s < st.num; ++s) {
        for (int u = 0; u < st.nu; ++u) {
            for (int v = 0; v < st.nv; ++v) {
                const int au = st.window.u0 + u;
                const int av = st.window.v0 + v;
                const int view_linear = (au - ctx.win.u0) * ctx.win.nv + (av - ctx.win.v0);
                const double dx = st.disparity * (av - st.window.centre_v);
                const double dy = st.disparity * (au - st.window.centre_u);
                const double x0 = std::clamp(st.origins[s].first + dx, 0.0,
                                             static_cast<double>(ctx.w - patch));
                const double y0 = std::clamp(st.origins[s].second + dy, 0.0,
                                             static_cast<double>(ctx.h - patch));
                const int ix = static_cast<int>(std::floor(x0));
                const int iy = static_cast<int>(std::floor(y0));
                const double fx = x0 - ix, fy = y0 - iy;
                const double corner[2][2] = {{(1 - fx) * (1 - fy), fx * (1 - fy)},
                                             {(1 - fx) * fy, fx * fy}};
                for (int py = 0; py < patch; ++py) {
                    for (int px = 0; px < patch; ++px) {
                        const double value = st.at(s, u, v, py, px);
                        for (int oy = 0; oy < 2; ++oy) {
                            for (int ox = 0; ox < 2; ++ox) {
                                const double wk = corner[oy][ox];
                                if (wk == 0.0) continue;
                                const size_t idx = tile_index(ctx, view_linear, channel,
                                                              iy + py + oy, ix + px + ox);
                                out.val[idx] += value * weight * wk;
                                out.wgt[idx] += weight * wk;
                            }
                        }
                    }
                }
            }
        }
    }
}

void process_reference(const TileContext& ctx, std::pair<int, int> ref, TileBuffers& out) {
    const DenoiseParams& prm = *ctx.params;
    const int patch = prm.patch_size;
    const double d = select_disparity(*ctx.guide, ctx.win, 0, ref, patch, prm);
    const Image& guide_centre = ctx.guide->view(ctx.win.centre_u, ctx.win.centre_v);
    auto sims = find_similar(guide_centre, 0, ref, patch, prm.num_similar, prm.search_radius);

    // All stacked patches must stay in bounds in every view after
    // compensation, so intersect the shrunken windows of every member.
    AngularWindow sw = shrink_window(ctx.win, ref, patch, d, ctx.w, ctx.h);
    for (const auto& origin : sims) {
        const AngularWindow so = shrink_window(ctx.win, origin, patch, d, ctx.w, ctx.h);
        const int u1 = std::min(sw.u0 + sw.nu, so.u0 + so.nu);
        const int v1 = std::min(sw.v0 + sw.nv, so.v0 + so.nv);
        sw.u0 = std::max(sw.u0, so.u0);
        sw.v0 = std::max(sw.v0, so.v0);
        sw.nu = u1 - sw.u0;
        sw.nv = v1 - sw.v0;
    }

    const int n_use = pow2_floor(static_cast<int>(sims.size()));
    sims.resize(n_use);

    PatchStack5D st;
    st.num = n_use;
    st.nu = sw.nu;
    st.nv = sw.nv;
    st.patch = patch;
    st.disparity = d;
    st.window = sw;
    st.origins = sims;
    st.data.resize(st.size());
    PatchStack5D pilot_st = st;

    for (int c = 0; c < ctx.channels; ++c) {
        fill_stack(*ctx.data, c, st);
        if (!ctx.wiener) {
            FilterOutcome f = filter_stack(st, ctx.sigma_ch[c], prm.hard_threshold);
            splat_stack(ctx, f.stack, c, f.weight, out);
        } else {
            fill_stack(*ctx.guide, c, pilot_st);
            auto noisy_coef = cascade_forward(st);
            const auto pilot_coef = cascade_forward(pilot_st);
            const double weight = wiener_shrink(pilot_coef, noisy_coef, ctx.sigma_ch[c]);
            PatchStack5D filtered = st;
            cascade_inverse(std::move(noisy_coef), filtered);
            splat_stack(ctx, filtered, c, weight, out);
        }
    }
}

//! Process one tile's reference grid. Work is split into a fixed number of
//! chunks with private buffers merged in chunk order, so the result does not
//! depend on how many workers execute the chunks.
void run_tile(const TileContext& ctx, std::vector<ViewAccum>& global, const LightField& lf) {
    const int nrefs = static_cast<int>(ctx.refs.size());
    if (nrefs == 0) return;
    const int nchunks = std::min(8, nrefs);
    const size_t tile_size =
        static_cast<size_t>(ctx.win.nu) * ctx.win.nv * ctx.channels * ctx.w * ctx.h;
    std::vector<TileBuffers> parts(nchunks);
    parallel_for(0, nchunks, [&](int k) {
        parts[k].val.assign(tile_size, 0.0);
        parts[k].wgt.assign(tile_size, 0.0);
        const int lo = static_cast<int>(static_cast<long long>(nrefs) * k / nchunks);
        const int hi = static_cast<int>(static_cast<long long>(nrefs) * (k + 1) / nchunks);
        for (int i = lo; i < hi; ++i) process_reference(ctx, ctx.refs[i], parts[k]);
    });
    const size_t plane = static_cast<size_t>(ctx.channels) * ctx.w * ctx.h;
    for (int u = 0; u < ctx.win.nu; ++u) {
        for (int v = 0; v < ctx.win.nv; ++v) {
            const int view_linear = u * ctx.win.nv + v;
            ViewAccum& acc = global[lf.view_index(ctx.win.u0 + u, ctx.win.v0 + v)];
            if (acc.val.empty()) {
                acc.val.assign(plane, 0.0);
                acc.wgt.assign(plane, 0.0);
            }
            for (int k = 0; k < nchunks; ++k) {
                const double* pv = parts[k].val.data() + view_linear * plane;
                const double* pw = parts[k].wgt.data() + view_linear * plane;
                for (size_t i = 0; i < plane; ++i) {
                    acc.val[i] += pv[i];
                    acc.wgt[i] += pw[i];
                }
            }
        }
    }
}

//! Reference positions on a half-patch stride grid covering the full view,
//! with the final row/column forced so coverage reaches the borders.
std::vector<std::pair<int, int>> reference_grid(int w, int h, int patch) {
    const int stride = std::max(1, patch / 2);
    std::vector<int> xs, ys;
    for (int x = 0; x + patch <= w; x += stride) xs.push_back(x);
    if (xs.back() != w - patch) xs.push_back(w - patch);
    for (int y = 0; y + patch <= h; y += stride) ys.push_back(y);
    if (ys.back() != h - patch) ys.push_back(h - patch);
    std::vector<std::pair<int, int>> refs;
    refs.reserve(xs.size() * ys.size());
    for (int y : ys)
        for (int x : xs) refs.emplace_back(x, y);
    return refs;
}

//! Largest rectangle of valid views around the chosen reference view, grown
//! one row/column at a time in a fixed side order for determinism.
AngularWindow valid_rectangle(const LightField& lf, int r0, int r1, int c0, int c1,
                              int cu, int cv) {
    int ulo = cu, uhi = cu, vlo = cv, vhi = cv;
    auto row_ok = [&](int u) {
        for (int v = vlo; v <= vhi; ++v)
            if (!lf.is_valid(u, v)) return false;
        return true;
    };
    auto col_ok = [&](int v) {
        for (int u = ulo; u <= uhi; ++u)
            if (!lf.is_valid(u, v)) return false;
        return true;
    };
    bool grew = true;
    while (grew) {
        grew = false;
        if (ulo - 1 >= r0 && row_ok(ulo - 1)) { --ulo; grew = true; }
        if (uhi + 1 < r1 && row_ok(uhi + 1)) { ++uhi; grew = true; }
        if (vlo - 1 >= c0 && col_ok(vlo - 1)) { --vlo; grew = true; }
        if (vhi + 1 < c1 && col_ok(vhi + 1)) { ++vhi; grew = true; }
    }
    AngularWindow win;
    win.u0 = ulo;
    win.v0 = vlo;
    win.nu = uhi - ulo + 1;
    win.nv = vhi - vlo + 1;
    win.centre_u = cu;
    win.centre_v = cv;
    return win;
}

//! The valid view of a tile closest to its geometric middle (ties row-major).
bool pick_tile_centre(const LightField& lf, int r0, int r1, int c0, int c1,
                      int& cu, int& cv) {
    const double mu = (r0 + r1 - 1) / 2.0;
    const double mv = (c0 + c1 - 1) / 2.0;
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (int u = r0; u < r1; ++u) {
        for (int v = c0; v < c1; ++v) {
            if (!lf.is_valid(u, v)) continue;
            const double d2 = (u - mu) * (u - mu) + (v - mv) * (v - mv);
            if (d2 < best) {
                best = d2;
                cu = u;
                cv = v;
                found = true;
            }
        }
    }
    return found;
}

//! One full filtering pass over the light field (both fields already in the
//! working colour basis). `guide` supplies matching and, on the Wiener pass,
//! the pilot stacks; `data` supplies the stacks being filtered.
LightField run_stage(const LightField& data, const LightField& guide, bool wiener,
                     const DenoiseParams& prm, const std::vector<double>& sigma_ch) {
    const Image& centre = data.centre_view();
    const int w = centre.width, h = centre.height, channels = centre.channels;
    std::vector<ViewAccum> global(static_cast<size_t>(data.rows) * data.cols);

    const int window = std::max(1, prm.angular_window);
    const int tiles_u = (data.rows + window - 1) / window;
    const int tiles_v = (data.cols + window - 1) / window;
    for (int tu = 0; tu < tiles_u; ++tu) {
        for (int tv = 0; tv < tiles_v; ++tv) {
            const int r0 = tu * window, r1 = std::min(data.rows, r0 + window);
            const int c0 = tv * window, c1 = std::min(data.cols, c0 + window);
            int cu = 0, cv = 0;
            if (!pick_tile_centre(data, r0, r1, c0, c1, cu, cv)) continue;
            TileContext ctx;
            ctx.data = &data;
            ctx.guide = &guide;
            ctx.wiener = wiener;
            ctx.win = valid_rectangle(data, r0, r1, c0, c1, cu, cv);
            ctx.refs = reference_grid(w, h, prm.patch_size);
            ctx.params = &prm;
            ctx.sigma_ch = sigma_ch;
            ctx.w = w;
            ctx.h = h;
            ctx.channels = channels;
            run_tile(ctx, global, data);
        }
    }

    LightField out = data;
    for (int u = 0; u < data.rows; ++u) {
        for (int v = 0; v < data.cols; ++v) {
            const ViewAccum& acc = global[data.view_index(u, v)];
            if (acc.val.empty()) continue;
            Image& im = out.view(u, v);
            for (int c = 0; c < channels; ++c)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        const size_t i = plane_index(w, h, c, y, x);
                        if (acc.wgt[i] > 0.0)
                            im.at(x, y, c) = static_cast<float>(acc.val[i] / acc.wgt[i]);
                    }
        }
    }
    return out;
}

void check_params(const DenoiseParams& p) {
    if (!is_pow2(p.patch_size))
        throw std::invalid_argument("denoise: patch size must be a power of two");
    if (!is_pow2(p.num_similar))
        throw std::invalid_argument("denoise: stack depth must be a power of two");
    if (p.angular_window < 1)
        throw std::invalid_argument("denoise: angular window must be positive");
    if (p.search_radius < 0)
        throw std::invalid_argument("denoise: search radius must be non-negative");
    if (p.disparity_step <= 0.0)
        throw std::invalid_argument("denoise: disparity step must be positive");
    if (p.disparity_range < 0.0)
        throw std::invalid_argument("denoise: disparity range must be non-negative");
    if (p.hard_threshold < 0.0)
        throw std::invalid_argument("denoise: threshold must be non-negative");
    if (p.sigma < 0.0)
        throw std::invalid_argument("denoise: sigma must be non-negative");
}

} // namespace

Patch4D build_4d_patch(const LightField& lf, const AngularWindow& win, int channel,
                       std::pair<int, int> ref, int patch_size, double disparity) {
    check_window(lf, win);
    Patch4D p;
    p.nu = win.nu;
    p.nv = win.nv;
    p.patch = patch_size;
    p.data.resize(static_cast<size_t>(win.nu) * win.nv * patch_size * patch_size);
    for (int u = 0; u < win.nu; ++u) {
        for (int v = 0; v < win.nv; ++v) {
            const int au = win.u0 + u, av = win.v0 + v;
            if (!lf.is_valid(au, av))
                throw std::invalid_argument("build_4d_patch: window contains an invalid view");
            const Image& im = lf.view(au, av);
            check_ref_patch(im, ref, patch_size, channel);
            const double x0 = ref.first + disparity * (av - win.centre_v);
            const double y0 = ref.second + disparity * (au - win.centre_u);
            if (x0 < -1e-9 || y0 < -1e-9 || x0 > im.width - patch_size + 1e-9 ||
                y0 > im.height - patch_size + 1e-9)
                throw std::invalid_argument("build_4d_patch: compensated patch out of bounds");
            const double cx = std::clamp(x0, 0.0, static_cast<double>(im.width - patch_size));
            const double cy = std::clamp(y0, 0.0, static_cast<double>(im.height - patch_size));
            for (int py = 0; py < patch_size; ++py)
                for (int px = 0; px < patch_size; ++px)
                    p.at(u, v, py, px) = bilinear(im, static_cast<float>(cx + px),
                                                  static_cast<float>(cy + py), channel);
        }
    }
    return p;
}

AngularWindow shrink_window(const AngularWindow& win, std::pair<int, int> ref,
                            int patch_size, double disparity, int width, int height) {
    if (win.nu < 1 || win.nv < 1)
        throw std::invalid_argument("shrink_window: empty window");
    if (ref.first < 0 || ref.second < 0 || ref.first > width - patch_size ||
        ref.second > height - patch_size)
        throw std::invalid_argument("shrink_window: reference patch out of bounds");
    auto col_ok = [&](int av) {
        const double x = ref.first + disparity * (av - win.centre_v);
        return x >= -1e-9 && x <= width - patch_size + 1e-9;
    };
    auto row_ok = [&](int au) {
        const double y = ref.second + disparity * (au - win.centre_u);
        return y >= -1e-9 && y <= height - patch_size + 1e-9;
    };
    int vlo = win.centre_v, vhi = win.centre_v;
    while (vlo - 1 >= win.v0 && col_ok(vlo - 1)) --vlo;
    while (vhi + 1 <= win.v0 + win.nv - 1 && col_ok(vhi + 1)) ++vhi;
    int ulo = win.centre_u, uhi = win.centre_u;
    while (ulo - 1 >= win.u0 && row_ok(ulo - 1)) --ulo;
    while (uhi + 1 <= win.u0 + win.nu - 1 && row_ok(uhi + 1)) ++uhi;
    AngularWindow out = win;
    out.u0 = ulo;
    out.nu = uhi - ulo + 1;
    out.v0 = vlo;
    out.nv = vhi - vlo + 1;
    return out;
}

double select_disparity(const LightField& lf, const AngularWindow& win, int channel,
                        std::pair<int, int> ref, int patch_size,
                        const DenoiseParams& params) {
    check_window(lf, win);
    if (params.disparity_step <= 0.0)
        throw std::invalid_argument("select_disparity: step must be positive");
    if (params.disparity_range < 0.0)
        throw std::invalid_argument("select_disparity: range must be non-negative");
    const Image& centre = lf.view(win.centre_u, win.centre_v);
    check_ref_patch(centre, ref, patch_size, channel);

    std::vector<double> centre_patch(static_cast<size_t>(patch_size) * patch_size);
    for (int py = 0; py < patch_size; ++py)
        for (int px = 0; px < patch_size; ++px)
            centre_patch[static_cast<size_t>(py) * patch_size + px] =
                centre.at(ref.first + px, ref.second + py, channel);

    // Candidates nearest zero first, so equal scores resolve toward zero.
    double best = 0.0;
    double best_sad = std::numeric_limits<double>::infinity();
    const int kmax =
        static_cast<int>(std::floor(params.disparity_range / params.disparity_step + 1e-9));
    for (int k = 0; k <= kmax; ++k) {
        for (int sgn : {1, -1}) {
            if (k == 0 && sgn < 0) continue;
            const double d = sgn * k * params.disparity_step;
            const AngularWindow sw =
                shrink_window(win, ref, patch_size, d, centre.width, centre.height);
            double sum = 0.0;
            int compared = 0;
            for (int u = 0; u < sw.nu; ++u) {
                for (int v = 0; v < sw.nv; ++v) {
                    const int au = sw.u0 + u, av = sw.v0 + v;
                    if (au == sw.centre_u && av == sw.centre_v) continue;
                    const Image& im = lf.view(au, av);
                    const double dx = d * (av - sw.centre_v);
                    const double dy = d * (au - sw.centre_u);
                    const double x0 =
                        std::clamp(ref.first + dx, 0.0, static_cast<double>(im.width - patch_size));
                    const double y0 = std::clamp(ref.second + dy, 0.0,
                                                 static_cast<double>(im.height - patch_size));
                    double view_sad = 0.0;
                    for (int py = 0; py < patch_size; ++py)
                        for (int px = 0; px < patch_size; ++px)
                            view_sad += std::abs(bilinear(im, static_cast<float>(x0 + px),
                                                          static_cast<float>(y0 + py), channel) -
                                                 centre_patch[static_cast<size_t>(py) * patch_size + px]);
                    sum += view_sad / (static_cast<double>(patch_size) * patch_size);
                    ++compared;
                }
            }
            if (compared == 0) continue;
            const double sad = sum / compared;
            if (sad < best_sad) {
                best_sad = sad;
                best = d;
            }
        }
    }
    return best;
}

std::vector<std::pair<int, int>> find_similar(const Image& view, int channel,
                                              std::pair<int, int> ref, int patch_size,
                                              int num, int radius) {
    check_ref_patch(view, ref, patch_size, channel);
    if (num < 1) throw std::invalid_argument("find_similar: need at least one patch");
    if (radius < 0) throw std::invalid_argument("find_similar: radius must be non-negative");

    const int xlo = std::max(0, ref.first - radius);
    const int xhi = std::min(view.width - patch_size, ref.first + radius);
    const int ylo = std::max(0, ref.second - radius);
    const int yhi = std::min(view.height - patch_size, ref.second + radius);

    struct Cand {
        double ssd;
        int y, x;
    };
    std::vector<Cand> cands;
    cands.reserve(static_cast<size_t>(xhi - xlo + 1) * (yhi - ylo + 1));
    for (int y = ylo; y <= yhi; ++y) {
        for (int x = xlo; x <= xhi; ++x) {
            if (x == ref.first && y == ref.second) continue;
            double ssd = 0.0;
            for (int py = 0; py < patch_size; ++py)
                for (int px = 0; px < patch_size; ++px) {
                    const double d = static_cast<double>(view.at(x + px, y + py, channel)) -
                                     view.at(ref.first + px, ref.second + py, channel);
                    ssd += d * d;
                }
            cands.push_back({ssd, y, x});
        }
    }
    const size_t keep = std::min(static_cast<size_t>(num - 1), cands.size());
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(),
                      [](const Cand& a, const Cand& b) {
                          return std::tie(a.ssd, a.y, a.x) < std::tie(b.ssd, b.y, b.x);
                      });
    std::vector<std::pair<int, int>> out;
    out.reserve(keep + 1);
    out.push_back(ref);
    for (size_t i = 0; i < keep; ++i) out.emplace_back(cands[i].x, cands[i].y);
    return out;
}

std::vector<double> cascade_forward(const PatchStack5D& stack) {
    check_stack(stack);
    std::vector<double> coef = stack.data;
    transform_cascade(coef, stack.num, stack.nu, stack.nv, stack.patch, false);
    return coef;
}

void cascade_inverse(std::vector<double> coef, PatchStack5D& stack) {
    check_stack(stack);
    if (coef.size() != stack.size())
        throw std::invalid_argument("cascade_inverse: coefficient count mismatch");
    transform_cascade(coef, stack.num, stack.nu, stack.nv, stack.patch, true);
    stack.data = std::move(coef);
}

FilterOutcome filter_stack(const PatchStack5D& stack, double sigma, double lambda_t) {
    if (sigma < 0.0) throw std::invalid_argument("filter_stack: sigma must be non-negative");
    if (lambda_t < 0.0) throw std::invalid_argument("filter_stack: threshold must be non-negative");
    std::vector<double> coef = cascade_forward(stack);
    const double threshold = lambda_t * sigma;
    long retained = 0;
    for (size_t i = 0; i < coef.size(); ++i) {
        if (i != 0 && std::abs(coef[i]) < threshold) coef[i] = 0.0;
        if (coef[i] != 0.0) ++retained;
    }
    FilterOutcome out;
    out.stack = stack;
    cascade_inverse(std::move(coef), out.stack);
    out.retained = retained;
    out.weight = 1.0 / (1.0 + static_cast<double>(retained) * sigma * sigma);
    return out;
}

LightField denoise_lightfield(const LightField& lf, const DenoiseParams& params) {
    lf.check_consistent();
    check_params(params);
    if (params.sigma == 0.0) return lf;
    if (lf.colour_space == ColorSpace::Lab)
        throw std::invalid_argument("denoise_lightfield: expects an RGB light field");
    const Image& centre = lf.centre_view();
    if (centre.width < params.patch_size || centre.height < params.patch_size)
        throw std::invalid_argument("denoise_lightfield: views smaller than the patch");

    const bool opponent = centre.channels == 3;
    LightField work = lf;
    if (opponent) {
        for (int u = 0; u < work.rows; ++u)
            for (int v = 0; v < work.cols; ++v)
                if (work.is_valid(u, v)) to_opponent(work.view(u, v));
    }
    std::vector<double> sigma_ch(centre.channels, params.sigma);
    if (opponent) {
        sigma_ch[0] = params.sigma * kOppScale0;
        sigma_ch[1] = params.sigma * kOppScale1;
        sigma_ch[2] = params.sigma * kOppScale2;
    }

    LightField result = run_stage(work, work, false, params, sigma_ch);
    if (params.stage == Stage::HardPlusWiener)
        result = run_stage(work, result, true, params, sigma_ch);

    for (int u = 0; u < result.rows; ++u) {
        for (int v = 0; v < result.cols; ++v) {
            if (!result.is_valid(u, v)) continue;
            Image& im = result.view(u, v);
            if (opponent) from_opponent(im);
            for (float& x : im.data) x = std::clamp(x, 0.0f, 1.0f);
        }
    }
    return result;
}

} // namespace lf::denoise
