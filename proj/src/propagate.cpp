#include "lf/propagate.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "lf/parallel.hpp"

namespace lf::propagate {

namespace {

bool masked(const std::vector<uint8_t>& mask, int cols, int u, int v) {
    return mask[static_cast<size_t>(u) * cols + v] != 0;
}

//! First usable palette for a target, walking inward past invalid views: a
//! centre-column target walks up/down toward the centre; any other target
//! walks along its row toward the centre column, then falls back to the
//! centre view (always valid by precondition).
PaletteRef inner_palette(int u, int v, int uc, int vc,
                         const std::vector<uint8_t>& mask, int cols) {
    if (v == vc) {
        const int step = u < uc ? 1 : -1;
        for (int uu = u + step; uu != uc; uu += step)
            if (masked(mask, cols, uu, vc)) return {uu, vc, true};
        return {uc, vc, false};
    }
    const int step = v < vc ? 1 : -1;
    for (int vv = v + step; vv != vc; vv += step)
        if (masked(mask, cols, u, vv)) return {u, vv, true};
    if (u != uc && masked(mask, cols, u, vc)) return {u, vc, true};
    return {uc, vc, false};
}

//! Target views in correction order: centre column outward (up before down),
//! then rows by distance from the centre row (centre row first, up before
//! down), each row outward from the centre column (left before right).
std::vector<std::pair<int, int>> target_order(int rows, int cols, int uc, int vc,
                                              const std::vector<uint8_t>& mask) {
    std::vector<std::pair<int, int>> order;
    for (int d = 1; d < rows; ++d)
        for (int sign : {-1, 1}) {
            const int u = uc + sign * d;
            if (u < 0 || u >= rows) continue;
            if (masked(mask, cols, u, vc)) order.emplace_back(u, vc);
        }
    for (int du = 0; du < rows; ++du)
        for (int usign : {-1, 1}) {
            const int u = uc + usign * du;
            if (u < 0 || u >= rows) continue;
            if (du == 0 && usign == 1) continue; // centre row only once
            for (int d = 1; d < cols; ++d)
                for (int vsign : {-1, 1}) {
                    const int v = vc + vsign * d;
                    if (v < 0 || v >= cols) continue;
                    if (masked(mask, cols, u, v)) order.emplace_back(u, v);
                }
        }
    return order;
}

std::vector<PaletteRef> palettes_for(int u, int v, int uc, int vc, Scheme scheme,
                                     const std::vector<uint8_t>& mask, int cols) {
    switch (scheme) {
    case Scheme::Centre:
        return {{uc, vc, false}};
    case Scheme::Prop:
        return {inner_palette(u, v, uc, vc, mask, cols)};
    case Scheme::PropCentre: {
        PaletteRef inner = inner_palette(u, v, uc, vc, mask, cols);
        if (inner.u == uc && inner.v == vc) return {inner};
        return {inner, {uc, vc, false}};
    }
    }
    throw std::logic_error("palettes_for: unknown scheme");
}

uint64_t step_seed(uint64_t base, int step_index, int palette_slot) {
    const uint64_t salt = static_cast<uint64_t>(step_index) * 4 + palette_slot + 1;
    return base ^ (salt * 0x9e3779b97f4a7c15ULL);
}

//! Decoded views are lenslet-count sized, often far smaller than the images
//! the matcher defaults assume. Tighten the seed grid until it can produce
//! about twice the required pair count, and shrink the pyramid so the
//! coarsest level still fits a whole patch. Config values act as caps; they
//! are never exceeded.
correspond::PatchMatchConfig adapted_match(const correspond::PatchMatchConfig& base,
                                           int min_pairs, int w, int h) {
    correspond::PatchMatchConfig m = base;
    const int side =
        std::max(1, static_cast<int>(std::ceil(std::sqrt(2.0 * min_pairs))));
    m.seed_stride = std::clamp(std::min(w, h) / side, 1, base.seed_stride);
    const int window = 2 * m.patch_radius + 1;
    int levels = 1;
    while (levels < base.levels && (std::min(w, h) >> levels) >= window) ++levels;
    m.levels = levels;
    return m;
}

} // namespace

RecolourPlan build_plan(int rows, int cols, const std::vector<uint8_t>& valid_mask,
                        Scheme scheme) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("build_plan: empty grid");
    if (valid_mask.size() != static_cast<size_t>(rows) * cols)
        throw std::invalid_argument("build_plan: mask does not match the grid");
    const int uc = rows / 2, vc = cols / 2;
    if (!masked(valid_mask, cols, uc, vc))
        throw std::invalid_argument("build_plan: centre view is invalid");

    RecolourPlan plan;
    plan.rows = rows;
    plan.cols = cols;
    plan.scheme = scheme;

    std::unordered_map<int, int> depth_of; // view index -> dependency depth
    depth_of[uc * cols + vc] = 0;

    for (const auto& [u, v] : target_order(rows, cols, uc, vc, valid_mask)) {
        PlanStep step;
        step.target_u = u;
        step.target_v = v;
        step.palettes = palettes_for(u, v, uc, vc, scheme, valid_mask, cols);
        int depth = 0;
        for (const PaletteRef& p : step.palettes)
            depth = std::max(depth, depth_of.at(p.u * cols + p.v) + 1);
        step.depth = depth;
        depth_of[u * cols + v] = depth;
        plan.steps.push_back(std::move(step));
    }
    return plan;
}

std::string format_plan(const RecolourPlan& plan) {
    std::ostringstream out;
    const char* name = plan.scheme == Scheme::Centre ? "centre"
                       : plan.scheme == Scheme::Prop ? "prop"
                                                     : "prop-centre";
    out << "scheme=" << name << " views=" << plan.rows << "x" << plan.cols
        << " steps=" << plan.steps.size() << "\n";
    char line[128];
    for (const PlanStep& s : plan.steps) {
        std::snprintf(line, sizeof(line), "(%d,%d) <-", s.target_u, s.target_v);
        out << line;
        for (const PaletteRef& p : s.palettes) {
            std::snprintf(line, sizeof(line), " (%d,%d)%s", p.u, p.v,
                          p.corrected ? "*" : "");
            out << line;
        }
        std::snprintf(line, sizeof(line), " [depth %d]\n", s.depth);
        out << line;
    }
    return out.str();
}

RecolourResult recolour_lightfield(const LightField& lf,
                                   const PropagationConfig& cfg) {
    lf.check_consistent();
    if (lf.colour_space != ColorSpace::LinearRGB)
        throw std::invalid_argument("recolour_lightfield: expected linear RGB views");

    RecolourResult result;
    result.lf = lf;
    LightField& out = result.lf;
    const int uc = out.centre_row(), vc = out.centre_col();

    const RecolourPlan plan = build_plan(out.rows, out.cols, out.valid, cfg.scheme);

    // Per-step outcome slots written concurrently within a depth group.
    std::vector<ViewTransform> fitted(plan.steps.size());
    std::vector<uint8_t> ok(plan.steps.size(), 0);

    auto run_step = [&](int si) {
        const PlanStep& step = plan.steps[static_cast<size_t>(si)];
        const int u = step.target_u, v = step.target_v;
        const Image& target = out.view(u, v);

        std::vector<PaletteRef> resolved;
        for (PaletteRef p : step.palettes) {
            // A palette that failed its own fit was runtime-invalidated; walk
            // further inward (strictly earlier depths, so already settled).
            if (!out.is_valid(p.u, p.v))
                p = inner_palette(u, v, uc, vc, out.valid, out.cols);
            bool seen = false;
            for (const PaletteRef& q : resolved)
                seen = seen || (q.u == p.u && q.v == p.v);
            if (!seen) resolved.push_back(p);
        }

        const int min_pairs =
            std::max(cfg.min_pairs, correspond::CorrespondenceSet::kMinPairs);
        correspond::PatchMatchConfig mcfg =
            adapted_match(cfg.match, min_pairs, target.width, target.height);
        try {
            correspond::CorrespondenceSet corr;
            int slot = 0;
            for (const PaletteRef& p : resolved) {
                mcfg.seed = step_seed(cfg.match.seed, si, slot++);
                corr = merge_correspondences(
                    corr, correspond::patch_match(target, out.view(p.u, p.v), mcfg));
            }

            if (!corr.sufficient(min_pairs))
                return; // leave ok[si] unset; the view is invalidated below

            ViewTransform& vt = fitted[static_cast<size_t>(si)];
            vt.u = u;
            vt.v = v;
            vt.tps = transfer::fit_transfer(corr, cfg.transfer);
            out.view(u, v) = transfer::recolour_image(target, vt.tps);
            ok[static_cast<size_t>(si)] = 1;
        } catch (const std::invalid_argument&) {
            // a view too small or degenerate to match is failed, not fatal
        }
    };

    // Steps of one dependency depth only read views of smaller depths, so each
    // group is safe to run concurrently and the result is schedule-independent.
    size_t group_begin = 0;
    while (group_begin < plan.steps.size()) {
        size_t group_end = group_begin;
        while (group_end < plan.steps.size() &&
               plan.steps[group_end].depth == plan.steps[group_begin].depth)
            ++group_end;
        parallel_for(static_cast<int>(group_begin), static_cast<int>(group_end),
                     run_step);
        for (size_t si = group_begin; si < group_end; ++si)
            if (!ok[si]) {
                const PlanStep& step = plan.steps[si];
                out.set_valid(step.target_u, step.target_v, false);
                result.failed.emplace_back(step.target_u, step.target_v);
            }
        group_begin = group_end;
    }

    for (size_t si = 0; si < plan.steps.size(); ++si)
        if (ok[si]) result.transforms.push_back(std::move(fitted[si]));
    return result;
}

} // namespace lf::propagate
