// lfpipe — batch front end for the lenslet light-field pipeline.
//
// Subcommands: simulate | decode | recolour | denoise | report | pipeline.
// Stages exchange data through light-field directories on disk; the canonical
// interchange format is linear-light 16-bit PPM, with sRGB used only for
// optional preview images. Every run writes a run_manifest.json holding the
// fully resolved parameters, sufficient to reproduce the run.
//
// Exit codes: 0 success, 1 stage execution failure, 2 invalid input
// (bad flags, malformed config, missing files, rejected parameters).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lf/color.hpp"
#include "lf/denoise.hpp"
#include "lf/lenslet.hpp"
#include "lf/lightfield.hpp"
#include "lf/metrics.hpp"
#include "lf/parallel.hpp"
#include "lf/pnm.hpp"
#include "lf/propagate.hpp"
#include "lf/sim.hpp"
#include "lf/transfer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

//! Thrown for anything the operator got wrong; mapped to exit code 2.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void info(const std::string& line) { std::cout << "lfpipe: " << line << "\n"; }
void warn(const std::string& line) { std::cerr << "lfpipe: warning: " << line << "\n"; }

// ---------------------------------------------------------------------------
// Enumeration <-> string maps
// ---------------------------------------------------------------------------

lf::propagate::Scheme parse_scheme(const std::string& s) {
    if (s == "centre" || s == "center") return lf::propagate::Scheme::Centre;
    if (s == "prop") return lf::propagate::Scheme::Prop;
    if (s == "prop+centre" || s == "prop-centre" || s == "prop+center" ||
        s == "prop-center") {
        return lf::propagate::Scheme::PropCentre;
    }
    throw InputError("unknown scheme '" + s +
                     "' (expected centre, prop, or prop+centre)");
}

std::string scheme_name(lf::propagate::Scheme s) {
    switch (s) {
    case lf::propagate::Scheme::Centre: return "centre";
    case lf::propagate::Scheme::Prop: return "prop";
    default: return "prop+centre";
    }
}

lf::lenslet::Interpolation parse_interpolation(const std::string& s) {
    if (s == "bicubic") return lf::lenslet::Interpolation::Bicubic;
    if (s == "wi-guided") return lf::lenslet::Interpolation::WiGuidedBicubic;
    throw InputError("unknown interpolation '" + s +
                     "' (expected bicubic or wi-guided)");
}

std::string interpolation_name(lf::lenslet::Interpolation i) {
    return i == lf::lenslet::Interpolation::Bicubic ? "bicubic" : "wi-guided";
}

lf::lenslet::BayerPattern parse_pattern(const std::string& s) {
    if (s == "rggb") return lf::lenslet::BayerPattern::RGGB;
    if (s == "grbg") return lf::lenslet::BayerPattern::GRBG;
    if (s == "gbrg") return lf::lenslet::BayerPattern::GBRG;
    if (s == "bggr") return lf::lenslet::BayerPattern::BGGR;
    throw InputError("unknown Bayer pattern '" + s +
                     "' (expected rggb, grbg, gbrg, or bggr)");
}

std::string pattern_name(lf::lenslet::BayerPattern p) {
    switch (p) {
    case lf::lenslet::BayerPattern::RGGB: return "rggb";
    case lf::lenslet::BayerPattern::GRBG: return "grbg";
    case lf::lenslet::BayerPattern::GBRG: return "gbrg";
    default: return "bggr";
    }
}

lf::lenslet::LensletLayout parse_layout(const std::string& s) {
    if (s == "square") return lf::lenslet::LensletLayout::Square;
    if (s == "hex") return lf::lenslet::LensletLayout::HexRowOffset;
    throw InputError("unknown lenslet layout '" + s + "' (expected square or hex)");
}

std::string layout_name(lf::lenslet::LensletLayout l) {
    return l == lf::lenslet::LensletLayout::Square ? "square" : "hex";
}

lf::sim::SceneKind parse_scene(const std::string& s) {
    if (s == "flat-grey" || s == "flat-gray") return lf::sim::SceneKind::FlatGrey;
    if (s == "smooth-gradient") return lf::sim::SceneKind::SmoothGradient;
    if (s == "textured") return lf::sim::SceneKind::TexturedDisparity;
    if (s == "colour-chart" || s == "color-chart") return lf::sim::SceneKind::ColorChart;
    throw InputError("unknown scene '" + s +
                     "' (expected flat-grey, smooth-gradient, textured, or colour-chart)");
}

std::string scene_name(lf::sim::SceneKind k) {
    switch (k) {
    case lf::sim::SceneKind::FlatGrey: return "flat-grey";
    case lf::sim::SceneKind::SmoothGradient: return "smooth-gradient";
    case lf::sim::SceneKind::TexturedDisparity: return "textured";
    default: return "colour-chart";
    }
}

// ---------------------------------------------------------------------------
// Filesystem and JSON helpers
// ---------------------------------------------------------------------------

void require_exists(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw InputError(what + " not found: " + p.string());
}

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p)) {
        throw InputError("cannot create directory " + p.string() +
                         (ec ? ": " + ec.message() : ""));
    }
}

json read_json_file(const fs::path& p, const std::string& what) {
    require_exists(p, what);
    std::ifstream in(p);
    if (!in) throw InputError("cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(what + " " + p.string() + " is not valid JSON: " + e.what());
    }
}

void write_text_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + p.string());
    out << text;
    if (!out) throw std::runtime_error("short write to " + p.string());
}

//! Resolved-parameter record; nlohmann objects keep sorted keys and the dump
//! is timestamp-free, so identical runs produce byte-identical manifests.
void write_manifest(const fs::path& dir, const json& manifest) {
    write_text_file(dir / "run_manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Config file: JSON sections named after subcommands/parameter groups; values
// become flag defaults, and explicit command-line flags still win.
// ---------------------------------------------------------------------------

class ConfigFile {
public:
    void load(const fs::path& p) {
        root_ = read_json_file(p, "config file");
        if (!root_.is_object()) throw InputError("config file must hold a JSON object");
        path_ = p.string();
    }

    bool loaded() const { return !path_.empty(); }
    const std::string& path() const { return path_; }

    template <typename T>
    void get(const char* section, const char* key, T& out) const {
        const json* v = find(section, key);
        if (!v) return;
        try {
            out = v->get<T>();
        } catch (const json::exception&) {
            throw InputError(std::string("config: bad value for ") + section + "." + key);
        }
    }

    //! Accepts either a JSON string or a number (rendered to text).
    void get_text(const char* section, const char* key, std::string& out) const {
        const json* v = find(section, key);
        if (!v) return;
        if (v->is_string()) {
            out = v->get<std::string>();
        } else if (v->is_number()) {
            out = v->dump();
        } else {
            throw InputError(std::string("config: bad value for ") + section + "." + key);
        }
    }

private:
    const json* find(const char* section, const char* key) const {
        if (!loaded() || !root_.contains(section)) return nullptr;
        const json& s = root_.at(section);
        if (!s.is_object()) {
            throw InputError(std::string("config: section '") + section +
                             "' must be an object");
        }
        if (!s.contains(key)) return nullptr;
        return &s.at(key);
    }

    json root_ = json::object();
    std::string path_;
};

//! --config must be honoured before CLI11 parses the remaining flags, so the
//! path is pre-scanned straight from argv.
std::string scan_config_path(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--config") {
            if (i + 1 >= argc) throw InputError("--config requires a path");
            return argv[i + 1];
        }
        if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
    }
    return {};
}

// ---------------------------------------------------------------------------
// Shared parameter groups
// ---------------------------------------------------------------------------

struct MatchOpts {
    lf::correspond::PatchMatchConfig cfg;
    bool seed_overridden = false;

    void apply_config(const ConfigFile& c) {
        c.get("match", "seed_stride", cfg.seed_stride);
        c.get("match", "patch_radius", cfg.patch_radius);
        c.get("match", "levels", cfg.levels);
        c.get("match", "search_radius", cfg.search_radius);
        c.get("match", "fb_threshold", cfg.fb_threshold);
        uint64_t seed = cfg.seed;
        c.get("match", "seed", seed);
        if (seed != cfg.seed) {
            cfg.seed = seed;
            seed_overridden = true;
        }
    }

    json to_json() const {
        return {{"seed_stride", cfg.seed_stride},
                {"patch_radius", cfg.patch_radius},
                {"levels", cfg.levels},
                {"search_radius", cfg.search_radius},
                {"fb_threshold", cfg.fb_threshold},
                {"seed", cfg.seed}};
    }
};

struct TransferOpts {
    lf::transfer::TransferConfig cfg;

    void apply_config(const ConfigFile& c) {
        c.get("transfer", "h_schedule", cfg.h_schedule);
        c.get("transfer", "inner_iters", cfg.inner_iters);
        std::vector<int> grid(cfg.control_grid.begin(), cfg.control_grid.end());
        c.get("transfer", "control_grid", grid);
        if (grid.size() != 3) {
            throw InputError("config: transfer.control_grid must hold 3 entries");
        }
        std::copy(grid.begin(), grid.end(), cfg.control_grid.begin());
        c.get("transfer", "lambda_reg", cfg.lambda_reg);
    }

    json to_json() const {
        return {{"h_schedule", cfg.h_schedule},
                {"inner_iters", cfg.inner_iters},
                {"control_grid", cfg.control_grid},
                {"lambda_reg", cfg.lambda_reg}};
    }
};

struct ReportCfgOpts {
    lf::metrics::MetricConfig cfg;

    void apply_config(const ConfigFile& c) {
        c.get("report", "samples_per_degree", cfg.samples_per_degree);
        c.get("report", "hist_bins", cfg.hist_bins);
        c.get("report", "noise_patch", cfg.noise_patch);
    }

    json to_json() const {
        return {{"samples_per_degree", cfg.samples_per_degree},
                {"hist_bins", cfg.hist_bins},
                {"noise_patch", cfg.noise_patch}};
    }
};

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

constexpr double kWhiteScale = 16.0; //!< PGM scale; hot pixels sit at 10.0

struct SimulateOpts {
    std::string out;
    std::string scene = "textured";
    int views = 5;
    int views_u = 0; //!< 0 = use `views`
    int views_v = 0;
    int lenses = 64;
    int lens_rows = 0; //!< 0 = use `lenses`
    int lens_cols = 0;
    double spacing = 10.0;
    double disparity = 1.0;
    double gain_r = 1.0;
    double gain_b = 1.0;
    double vignette_sigma = 0.35;
    double noise_sigma = 0.0;
    int hot_pixels = 0;
    std::string pattern = "rggb";
    std::string layout = "square";
    uint64_t seed = 1;

    void apply_config(const ConfigFile& c) {
        c.get("simulate", "scene", scene);
        c.get("simulate", "views", views);
        c.get("simulate", "views_u", views_u);
        c.get("simulate", "views_v", views_v);
        c.get("simulate", "lenses", lenses);
        c.get("simulate", "lens_rows", lens_rows);
        c.get("simulate", "lens_cols", lens_cols);
        c.get("simulate", "spacing", spacing);
        c.get("simulate", "disparity", disparity);
        c.get("simulate", "gain_r", gain_r);
        c.get("simulate", "gain_b", gain_b);
        c.get("simulate", "vignette_sigma", vignette_sigma);
        c.get("simulate", "noise_sigma", noise_sigma);
        c.get("simulate", "hot_pixels", hot_pixels);
        c.get("simulate", "pattern", pattern);
        c.get("simulate", "layout", layout);
        c.get("simulate", "out", out);
    }
};

int run_simulate(const SimulateOpts& o) {
    const int vu = o.views_u > 0 ? o.views_u : o.views;
    const int vv = o.views_v > 0 ? o.views_v : o.views;
    const int lr = o.lens_rows > 0 ? o.lens_rows : o.lenses;
    const int lc = o.lens_cols > 0 ? o.lens_cols : o.lenses;
    if (o.spacing < 4.0) throw InputError("lenslet spacing must be at least 4 pixels");
    if (lr < 8 || lc < 8) throw InputError("lens grid must be at least 8x8");

    lf::sim::SimParams params;
    params.grid.spacing_x = o.spacing;
    params.grid.spacing_y = o.spacing;
    params.grid.offset_x = std::floor(o.spacing / 2.0);
    params.grid.offset_y = std::floor(o.spacing / 2.0);
    params.grid.layout = parse_layout(o.layout);
    params.grid.lens_rows = lr;
    params.grid.lens_cols = lc;
    params.pattern = parse_pattern(o.pattern);
    params.wb_gains_applied.r = o.gain_r;
    params.wb_gains_applied.b = o.gain_b;
    params.vignette_sigma = o.vignette_sigma;
    params.noise_sigma = o.noise_sigma;
    params.hot_pixel_count = o.hot_pixels;
    params.seed = o.seed;

    const int sensor_w = static_cast<int>(std::lround(lc * o.spacing));
    const int sensor_h = static_cast<int>(std::lround(lr * o.spacing));

    lf::LightField truth;
    lf::lenslet::PlenopticRaw raw;
    lf::lenslet::WhiteImage wi;
    try {
        truth = lf::sim::synth_lightfield(parse_scene(o.scene), vu, vv, lc, lr,
                                          o.disparity);
        raw = lf::sim::simulate_raw(truth, params, sensor_w, sensor_h);
        wi = lf::sim::synth_white_image(params, sensor_w, sensor_h);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }

    ensure_dir(o.out);
    const fs::path out(o.out);
    lf::write_pnm16((out / "raw.pgm").string(), raw.sensor, 1.0);
    lf::write_pnm16((out / "white.pgm").string(), wi.sensor, kWhiteScale);
    lf::save_lightfield(truth, (out / "truth").string(), "ground-truth");

    json capture = {
        {"pattern", pattern_name(params.pattern)},
        {"black_level", raw.black_level},
        {"saturation_level", raw.saturation_level},
        {"grid",
         {{"spacing_x", params.grid.spacing_x},
          {"spacing_y", params.grid.spacing_y},
          {"offset_x", params.grid.offset_x},
          {"offset_y", params.grid.offset_y},
          {"rotation", params.grid.rotation},
          {"layout", layout_name(params.grid.layout)},
          {"lens_rows", lr},
          {"lens_cols", lc}}},
        {"wb_gains", {{"r", o.gain_r}, {"b", o.gain_b}}},
        {"sensor_width", sensor_w},
        {"sensor_height", sensor_h},
        {"views_u", vu},
        {"views_v", vv},
        {"scene", scene_name(parse_scene(o.scene))},
        {"disparity", o.disparity},
        {"vignette_sigma", o.vignette_sigma},
        {"noise_sigma", o.noise_sigma},
        {"hot_pixels", o.hot_pixels},
        {"seed", o.seed},
        {"raw_scale", 1.0},
        {"white_scale", kWhiteScale},
    };
    write_text_file(out / "capture.json", capture.dump(2) + "\n");

    json manifest = {{"command", "simulate"},
                     {"parameters", capture},
                     {"outputs",
                      {{"raw", "raw.pgm"},
                       {"white", "white.pgm"},
                       {"truth", "truth"},
                       {"capture", "capture.json"}}}};
    write_manifest(out, manifest);

    std::ostringstream msg;
    msg << "simulate: wrote " << o.out << " (scene " << scene_name(parse_scene(o.scene))
        << ", views " << vu << "x" << vv << ", lenses " << lr << "x" << lc
        << ", sensor " << sensor_w << "x" << sensor_h << ", seed " << o.seed << ")";
    info(msg.str());
    return 0;
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

struct DecodeOpts {
    std::string raw_dir;
    std::string out;
    std::string interpolation = "wi-guided";
    int views = 0; //!< 0 = take the view count from capture.json
    bool previews = false;
    bool ignore_wb = false;
    lf::lenslet::DecodeParams dp;

    void apply_config(const ConfigFile& c) {
        c.get("decode", "interpolation", interpolation);
        c.get("decode", "views", views);
        c.get("decode", "previews", previews);
        c.get("decode", "ignore_wb", ignore_wb);
        c.get("decode", "wi_percentile", dp.wi_percentile);
        c.get("decode", "epsilon_wi", dp.epsilon_wi);
        c.get("decode", "epsilon_w", dp.epsilon_w);
        c.get("decode", "dark_view_luma_floor", dp.dark_view_luma_floor);
        c.get("decode", "raw", raw_dir);
        c.get("decode", "out", out);
    }
};

int run_decode(const DecodeOpts& o) {
    const fs::path bundle(o.raw_dir);
    require_exists(bundle, "capture bundle");
    require_exists(bundle / "raw.pgm", "raw sensor image");
    require_exists(bundle / "white.pgm", "white image");
    const json capture = read_json_file(bundle / "capture.json", "capture metadata");

    lf::lenslet::PlenopticRaw raw;
    lf::lenslet::WhiteImage wi;
    lf::lenslet::LensletGrid grid;
    lf::lenslet::WhiteBalance wb;
    int views_u = 0;
    int views_v = 0;
    try {
        raw.pattern = parse_pattern(capture.at("pattern").get<std::string>());
        raw.black_level = capture.at("black_level").get<double>();
        raw.saturation_level = capture.at("saturation_level").get<double>();
        const json& g = capture.at("grid");
        grid.spacing_x = g.at("spacing_x").get<double>();
        grid.spacing_y = g.at("spacing_y").get<double>();
        grid.offset_x = g.at("offset_x").get<double>();
        grid.offset_y = g.at("offset_y").get<double>();
        grid.rotation = g.at("rotation").get<double>();
        grid.layout = parse_layout(g.at("layout").get<std::string>());
        grid.lens_rows = g.at("lens_rows").get<int>();
        grid.lens_cols = g.at("lens_cols").get<int>();
        wb.r = capture.at("wb_gains").at("r").get<double>();
        wb.b = capture.at("wb_gains").at("b").get<double>();
        views_u = capture.at("views_u").get<int>();
        views_v = capture.at("views_v").get<int>();
        raw.sensor = lf::read_pnm16((bundle / "raw.pgm").string(),
                                    capture.at("raw_scale").get<double>());
        wi.sensor = lf::read_pnm16((bundle / "white.pgm").string(),
                                   capture.at("white_scale").get<double>());
        wi.pattern = raw.pattern;
    } catch (const json::exception& e) {
        throw InputError("capture metadata is incomplete: " + std::string(e.what()));
    }

    const int sw = capture.at("sensor_width").get<int>();
    const int sh = capture.at("sensor_height").get<int>();
    if (raw.sensor.width != sw || raw.sensor.height != sh) {
        throw InputError("raw.pgm size does not match capture metadata");
    }
    if (wi.sensor.width != sw || wi.sensor.height != sh) {
        throw InputError("white.pgm size does not match capture metadata");
    }

    lf::lenslet::DecodeParams dp = o.dp;
    dp.num_views_u = o.views > 0 ? o.views : views_u;
    dp.num_views_v = o.views > 0 ? o.views : views_v;
    dp.interpolation = parse_interpolation(o.interpolation);
    if (o.ignore_wb) wb = lf::lenslet::WhiteBalance{};

    lf::LightField decoded;
    try {
        decoded = lf::lenslet::decode(raw, wi, wb, grid, dp);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }

    ensure_dir(o.out);
    lf::save_lightfield(decoded, o.out, "decoded");

    if (o.previews) {
        const fs::path pdir = fs::path(o.out) / "preview";
        ensure_dir(pdir);
        for (int u = 0; u < decoded.rows; ++u) {
            for (int v = 0; v < decoded.cols; ++v) {
                if (!decoded.is_valid(u, v)) continue;
                char name[32];
                std::snprintf(name, sizeof(name), "view_%02d_%02d.ppm", u, v);
                lf::write_pnm16((pdir / name).string(),
                                lf::srgb_encode(decoded.view(u, v)));
            }
        }
    }

    int valid = 0;
    for (uint8_t f : decoded.valid) valid += f != 0;

    json manifest = {{"command", "decode"},
                     {"parameters",
                      {{"raw", o.raw_dir},
                       {"out", o.out},
                       {"interpolation", interpolation_name(dp.interpolation)},
                       {"views_u", dp.num_views_u},
                       {"views_v", dp.num_views_v},
                       {"ignore_wb", o.ignore_wb},
                       {"previews", o.previews},
                       {"wi_percentile", dp.wi_percentile},
                       {"epsilon_wi", dp.epsilon_wi},
                       {"epsilon_w", dp.epsilon_w},
                       {"dark_view_luma_floor", dp.dark_view_luma_floor}}},
                     {"results",
                      {{"valid_views", valid},
                       {"view_width", decoded.views.empty() ? 0 : decoded.views[0].width},
                       {"view_height", decoded.views.empty() ? 0 : decoded.views[0].height}}}};
    write_manifest(o.out, manifest);

    std::ostringstream msg;
    msg << "decode: " << o.raw_dir << " -> " << o.out << " ("
        << interpolation_name(dp.interpolation) << ", " << dp.num_views_u << "x"
        << dp.num_views_v << " views, " << valid << " valid)";
    info(msg.str());
    return 0;
}

// ---------------------------------------------------------------------------
// stage-tag bookkeeping for recolour/denoise ordering
// ---------------------------------------------------------------------------

lf::LoadedLightField load_stage_input(const std::string& dir,
                                      const std::vector<std::string>& accepted,
                                      bool force) {
    require_exists(dir, "input light field");
    lf::LoadedLightField loaded;
    try {
        loaded = lf::load_lightfield(dir);
    } catch (const std::exception& e) {
        throw InputError("cannot load light field from " + dir + ": " + e.what());
    }
    const bool ok = std::find(accepted.begin(), accepted.end(), loaded.stage) !=
                    accepted.end();
    if (!ok) {
        std::string expect;
        for (size_t i = 0; i < accepted.size(); ++i) {
            expect += (i ? " or '" : "'") + accepted[i] + "'";
        }
        if (!force) {
            throw InputError("input " + dir + " has stage '" + loaded.stage +
                             "', expected " + expect + " (use --force to override)");
        }
        warn("processing " + dir + " with stage '" + loaded.stage +
             "' out of the usual order");
    }
    return loaded;
}

// ---------------------------------------------------------------------------
// recolour
// ---------------------------------------------------------------------------

struct RecolourOpts {
    std::string in;
    std::string out;
    std::string scheme = "prop";
    int min_pairs = lf::correspond::CorrespondenceSet::kMinPairs;
    bool force = false;
    MatchOpts match;
    TransferOpts transfer;

    void apply_config(const ConfigFile& c) {
        c.get("recolour", "scheme", scheme);
        c.get("recolour", "min_pairs", min_pairs);
        c.get("recolour", "in", in);
        c.get("recolour", "out", out);
        match.apply_config(c);
        transfer.apply_config(c);
    }
};

int run_recolour(const RecolourOpts& o) {
    lf::LoadedLightField loaded = load_stage_input(o.in, {"decoded"}, o.force);

    lf::propagate::PropagationConfig cfg;
    cfg.scheme = parse_scheme(o.scheme);
    cfg.match = o.match.cfg;
    cfg.transfer = o.transfer.cfg;
    cfg.min_pairs = o.min_pairs;

    lf::propagate::RecolourResult result;
    try {
        result = lf::propagate::recolour_lightfield(loaded.lf, cfg);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }

    ensure_dir(o.out);
    lf::save_lightfield(result.lf, o.out, "recoloured");

    json failed = json::array();
    for (const auto& [u, v] : result.failed) failed.push_back({{"u", u}, {"v", v}});

    json manifest = {{"command", "recolour"},
                     {"parameters",
                      {{"in", o.in},
                       {"out", o.out},
                       {"scheme", scheme_name(cfg.scheme)},
                       {"min_pairs", cfg.min_pairs},
                       {"match", o.match.to_json()},
                       {"transfer", o.transfer.to_json()}}},
                     {"results",
                      {{"corrected_views", result.transforms.size()},
                       {"failed_views", failed}}}};
    write_manifest(o.out, manifest);

    std::ostringstream msg;
    msg << "recolour: " << o.in << " -> " << o.out << " (scheme "
        << scheme_name(cfg.scheme) << ", corrected " << result.transforms.size()
        << " views, " << result.failed.size() << " failed)";
    info(msg.str());
    return 0;
}

// ---------------------------------------------------------------------------
// denoise
// ---------------------------------------------------------------------------

struct DenoiseOpts {
    std::string in;
    std::string out;
    std::string sigma = "auto";
    std::string filter = "hard-wiener";
    bool force = false;
    lf::denoise::DenoiseParams params;

    void apply_config(const ConfigFile& c) {
        c.get_text("denoise", "sigma", sigma);
        c.get("denoise", "filter", filter);
        c.get("denoise", "patch_size", params.patch_size);
        c.get("denoise", "angular_window", params.angular_window);
        c.get("denoise", "num_similar", params.num_similar);
        c.get("denoise", "search_radius", params.search_radius);
        c.get("denoise", "disparity_range", params.disparity_range);
        c.get("denoise", "disparity_step", params.disparity_step);
        c.get("denoise", "hard_threshold", params.hard_threshold);
        c.get("denoise", "in", in);
        c.get("denoise", "out", out);
    }
};

int run_denoise(const DenoiseOpts& o) {
    lf::LoadedLightField loaded =
        load_stage_input(o.in, {"decoded", "recoloured"}, o.force);

    lf::denoise::DenoiseParams params = o.params;
    if (o.filter == "hard") {
        params.stage = lf::denoise::Stage::HardOnly;
    } else if (o.filter == "hard-wiener") {
        params.stage = lf::denoise::Stage::HardPlusWiener;
    } else {
        throw InputError("unknown filter '" + o.filter +
                         "' (expected hard or hard-wiener)");
    }

    const bool autosigma = o.sigma == "auto";
    if (autosigma) {
        params.sigma = lf::metrics::estimate_noise(loaded.lf.centre_view());
    } else {
        try {
            size_t used = 0;
            params.sigma = std::stod(o.sigma, &used);
            if (used != o.sigma.size()) throw std::invalid_argument(o.sigma);
        } catch (const std::exception&) {
            throw InputError("--sigma expects 'auto' or a number, got '" + o.sigma + "'");
        }
    }
    {
        std::ostringstream msg;
        msg << "denoise: resolved sigma = " << params.sigma
            << (autosigma ? " (auto, estimated from the centre view)" : " (fixed)");
        info(msg.str());
    }

    lf::LightField cleaned;
    try {
        cleaned = lf::denoise::denoise_lightfield(loaded.lf, params);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }

    ensure_dir(o.out);
    lf::save_lightfield(cleaned, o.out, "denoised");

    json manifest = {{"command", "denoise"},
                     {"parameters",
                      {{"in", o.in},
                       {"out", o.out},
                       {"sigma_mode", autosigma ? "auto" : "fixed"},
                       {"sigma_resolved", params.sigma},
                       {"filter", o.filter},
                       {"patch_size", params.patch_size},
                       {"angular_window", params.angular_window},
                       {"num_similar", params.num_similar},
                       {"search_radius", params.search_radius},
                       {"disparity_range", params.disparity_range},
                       {"disparity_step", params.disparity_step},
                       {"hard_threshold", params.hard_threshold}}}};
    write_manifest(o.out, manifest);

    info("denoise: " + o.in + " -> " + o.out);
    return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportOpts {
    std::vector<std::string> inputs;
    std::string out;
    ReportCfgOpts metric;

    void apply_config(const ConfigFile& c) {
        c.get("report", "inputs", inputs);
        c.get("report", "out", out);
        metric.apply_config(c);
    }
};

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

int run_report(const ReportOpts& o) {
    if (o.inputs.empty()) throw InputError("report needs at least one --in directory");
    ensure_dir(o.out);

    std::ostringstream txt;
    std::ostringstream csv;
    csv << "input,stage,valid_views,mean_scielab,mean_hist_chi2,mean_noise_sigma\n";

    json rows = json::array();
    for (const std::string& dir : o.inputs) {
        require_exists(dir, "report input");
        lf::LoadedLightField loaded;
        try {
            loaded = lf::load_lightfield(dir);
        } catch (const std::exception& e) {
            throw InputError("cannot load light field from " + dir + ": " + e.what());
        }
        const lf::metrics::MetricReport rep =
            lf::metrics::lightfield_report(loaded.lf, o.metric.cfg);

        txt << "== " << dir << " (stage: " << loaded.stage << ") ==\n"
            << lf::metrics::format_report(rep) << "\n";
        csv << dir << "," << loaded.stage << "," << rep.per_view.size() << ","
            << format_double(rep.mean_scielab) << ","
            << format_double(rep.mean_hist_chi2) << ","
            << format_double(rep.mean_noise_sigma) << "\n";
        rows.push_back({{"input", dir},
                        {"stage", loaded.stage},
                        {"valid_views", rep.per_view.size()},
                        {"mean_scielab", rep.mean_scielab},
                        {"mean_hist_chi2", rep.mean_hist_chi2},
                        {"mean_noise_sigma", rep.mean_noise_sigma}});
    }

    const fs::path out(o.out);
    write_text_file(out / "report.txt", txt.str());
    write_text_file(out / "report.csv", csv.str());

    json manifest = {{"command", "report"},
                     {"parameters",
                      {{"inputs", o.inputs},
                       {"out", o.out},
                       {"metric", o.metric.to_json()}}},
                     {"results", rows}};
    write_manifest(o.out, manifest);

    std::cout << txt.str();
    info("report: wrote " + (out / "report.txt").string() + " and " +
         (out / "report.csv").string());
    return 0;
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

const std::vector<std::string> kCanonicalOrder = {"decode", "recolour", "denoise",
                                                  "report"};

struct PipelineOpts {
    std::string raw_dir;
    std::string out;
    std::string order; //!< empty = canonical decode,recolour,denoise,report
    DecodeOpts decode;
    RecolourOpts recolour;
    DenoiseOpts denoise;
    ReportOpts report;

    void apply_config(const ConfigFile& c) {
        c.get("pipeline", "raw", raw_dir);
        c.get("pipeline", "out", out);
        c.get("pipeline", "order", order);
        decode.apply_config(c);
        recolour.apply_config(c);
        denoise.apply_config(c);
        report.apply_config(c);
    }
};

std::vector<std::string> parse_order(const std::string& order) {
    if (order.empty()) return kCanonicalOrder;
    std::vector<std::string> stages;
    std::stringstream ss(order);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if (std::find(kCanonicalOrder.begin(), kCanonicalOrder.end(), item) ==
            kCanonicalOrder.end()) {
            throw InputError("unknown pipeline stage '" + item + "'");
        }
        if (std::find(stages.begin(), stages.end(), item) != stages.end()) {
            throw InputError("pipeline stage '" + item + "' listed twice");
        }
        stages.push_back(item);
    }
    if (stages.empty()) throw InputError("--order lists no stages");
    return stages;
}

int run_pipeline(PipelineOpts o) {
    const std::vector<std::string> stages = parse_order(o.order);
    const bool overridden = stages != kCanonicalOrder;
    if (overridden) {
        std::string listed;
        for (size_t i = 0; i < stages.size(); ++i) listed += (i ? "," : "") + stages[i];
        warn("pipeline order overridden to " + listed +
             " (canonical order is decode,recolour,denoise,report)");
    }

    require_exists(o.raw_dir, "capture bundle");
    ensure_dir(o.out);
    const fs::path out(o.out);

    std::string current; // light-field directory produced by the last stage
    std::vector<std::string> report_inputs;

    for (const std::string& stage : stages) {
        if (stage == "decode") {
            o.decode.raw_dir = o.raw_dir;
            o.decode.out = (out / "decoded").string();
            run_decode(o.decode);
            current = o.decode.out;
            report_inputs.push_back(current);
        } else if (stage == "recolour") {
            if (current.empty()) {
                throw InputError("pipeline stage 'recolour' has no upstream light field"
                                 " (run decode first)");
            }
            o.recolour.in = current;
            o.recolour.out = (out / "recoloured").string();
            o.recolour.force = overridden;
            run_recolour(o.recolour);
            current = o.recolour.out;
            report_inputs.push_back(current);
        } else if (stage == "denoise") {
            if (current.empty()) {
                throw InputError("pipeline stage 'denoise' has no upstream light field"
                                 " (run decode first)");
            }
            o.denoise.in = current;
            o.denoise.out = (out / "denoised").string();
            o.denoise.force = overridden;
            run_denoise(o.denoise);
            current = o.denoise.out;
            report_inputs.push_back(current);
        } else { // report
            if (report_inputs.empty()) {
                throw InputError("pipeline stage 'report' has nothing to score"
                                 " (run decode first)");
            }
            o.report.inputs = report_inputs;
            o.report.out = (out / "report").string();
            run_report(o.report);
        }
    }

    json manifest = {{"command", "pipeline"},
                     {"parameters",
                      {{"raw", o.raw_dir},
                       {"out", o.out},
                       {"order", stages},
                       {"decode",
                        {{"interpolation", o.decode.interpolation},
                         {"views", o.decode.views},
                         {"ignore_wb", o.decode.ignore_wb},
                         {"previews", o.decode.previews}}},
                       {"recolour",
                        {{"scheme", scheme_name(parse_scheme(o.recolour.scheme))},
                         {"min_pairs", o.recolour.min_pairs},
                         {"match", o.recolour.match.to_json()},
                         {"transfer", o.recolour.transfer.to_json()}}},
                       {"denoise",
                        {{"sigma", o.denoise.sigma},
                         {"filter", o.denoise.filter},
                         {"patch_size", o.denoise.params.patch_size},
                         {"angular_window", o.denoise.params.angular_window},
                         {"num_similar", o.denoise.params.num_similar},
                         {"search_radius", o.denoise.params.search_radius},
                         {"disparity_range", o.denoise.params.disparity_range},
                         {"disparity_step", o.denoise.params.disparity_step},
                         {"hard_threshold", o.denoise.params.hard_threshold}}},
                       {"report", o.report.metric.to_json()}}},
                     {"stages", report_inputs}};
    write_manifest(out, manifest);

    info("pipeline: complete, outputs under " + o.out);
    return 0;
}

} // namespace

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
    SimulateOpts sim;
    DecodeOpts dec;
    RecolourOpts rec;
    DenoiseOpts den;
    ReportOpts rep;
    PipelineOpts pipe;
    std::string config_path;
    int workers = 0;
    uint64_t seed = 0;

    try {
        ConfigFile config;
        const std::string scanned = scan_config_path(argc, argv);
        if (!scanned.empty()) config.load(scanned);
        config.get("common", "workers", workers);

        sim.apply_config(config);
        dec.apply_config(config);
        rec.apply_config(config);
        den.apply_config(config);
        pipe.apply_config(config);

        CLI::App app{"lenslet light-field pipeline: simulate, decode, recolour,"
                     " denoise, report"};
        app.require_subcommand(1);
        app.add_option("--config", config_path,
                       "JSON config file; sections set flag defaults");
        auto* workers_opt =
            app.add_option("--workers", workers, "worker threads (0 = hardware)");
        auto* seed_opt = app.add_option("--seed", seed, "RNG seed");
        app.get_formatter()->column_width(34);

        auto add_stage = [&app](const std::string& name, const std::string& desc) {
            CLI::App* sub = app.add_subcommand(name, desc);
            sub->fallthrough(); // let --seed/--workers/--config follow the subcommand
            return sub;
        };

        CLI::App* c_sim = add_stage("simulate", "synthesise a capture bundle");
        c_sim->add_option("--out", sim.out, "output bundle directory")->required();
        c_sim->add_option("--scene", sim.scene,
                          "flat-grey | smooth-gradient | textured | colour-chart");
        c_sim->add_option("--views", sim.views, "views per axis (odd)");
        c_sim->add_option("--views-u", sim.views_u, "view rows (overrides --views)");
        c_sim->add_option("--views-v", sim.views_v, "view columns (overrides --views)");
        c_sim->add_option("--lenses", sim.lenses, "lenslets per axis");
        c_sim->add_option("--lens-rows", sim.lens_rows, "lens rows (overrides --lenses)");
        c_sim->add_option("--lens-cols", sim.lens_cols, "lens cols (overrides --lenses)");
        c_sim->add_option("--spacing", sim.spacing, "lenslet pitch in sensor pixels");
        c_sim->add_option("--disparity", sim.disparity, "per-view shift in pixels");
        c_sim->add_option("--gain-r", sim.gain_r, "red white-balance gain to bake in");
        c_sim->add_option("--gain-b", sim.gain_b, "blue white-balance gain to bake in");
        c_sim->add_option("--vignette-sigma", sim.vignette_sigma,
                          "vignette spread, fraction of micro-image radius");
        c_sim->add_option("--noise-sigma", sim.noise_sigma, "sensor AWGN std-dev");
        c_sim->add_option("--hot-pixels", sim.hot_pixels, "defective white-image pixels");
        c_sim->add_option("--pattern", sim.pattern, "rggb | grbg | gbrg | bggr");
        c_sim->add_option("--layout", sim.layout, "square | hex");

        CLI::App* c_dec = add_stage("decode", "decode a bundle into views");
        c_dec->add_option("--raw", dec.raw_dir, "capture bundle directory")->required();
        c_dec->add_option("--out", dec.out, "output light-field directory")->required();
        c_dec->add_option("--interpolation", dec.interpolation, "bicubic | wi-guided");
        c_dec->add_option("--views", dec.views, "views per axis (0 = from metadata)");
        c_dec->add_flag("--previews", dec.previews, "also write sRGB preview images");
        c_dec->add_flag("--ignore-wb", dec.ignore_wb, "skip white-balance gains");

        CLI::App* c_rec = add_stage("recolour", "homogenise colours across views");
        c_rec->add_option("--in", rec.in, "input light-field directory")->required();
        c_rec->add_option("--out", rec.out, "output light-field directory")->required();
        c_rec->add_option("--scheme", rec.scheme, "centre | prop | prop+centre");
        c_rec->add_option("--min-pairs", rec.min_pairs, "correspondence floor per view");
        c_rec->add_flag("--force", rec.force, "accept inputs from an unexpected stage");

        CLI::App* c_den = add_stage("denoise", "collaborative 5D filtering");
        c_den->add_option("--in", den.in, "input light-field directory")->required();
        c_den->add_option("--out", den.out, "output light-field directory")->required();
        c_den->add_option("--sigma", den.sigma, "noise level: auto | <float>");
        c_den->add_option("--filter", den.filter, "hard | hard-wiener");
        c_den->add_flag("--force", den.force, "accept inputs from an unexpected stage");

        CLI::App* c_rep = add_stage("report", "score light-field directories");
        c_rep->add_option("--in", rep.inputs, "light-field directory (repeatable)")
            ->required();
        c_rep->add_option("--out", rep.out, "output report directory")->required();

        CLI::App* c_pipe =
            add_stage("pipeline", "decode -> recolour -> denoise -> report in one run");
        c_pipe->add_option("--raw", pipe.raw_dir, "capture bundle directory")->required();
        c_pipe->add_option("--out", pipe.out, "output tree")->required();
        c_pipe->add_option("--order", pipe.order,
                           "comma-separated stage list overriding the canonical order");
        c_pipe->add_option("--scheme", pipe.recolour.scheme, "centre | prop | prop+centre");
        c_pipe->add_option("--interpolation", pipe.decode.interpolation,
                           "bicubic | wi-guided");
        c_pipe->add_option("--sigma", pipe.denoise.sigma, "noise level: auto | <float>");
        c_pipe->add_option("--filter", pipe.denoise.filter, "hard | hard-wiener");
        c_pipe->add_flag("--previews", pipe.decode.previews,
                         "also write sRGB preview images");

        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e); // prints help, exits 0
        } catch (const CLI::ParseError& e) {
            app.exit(e);
            return 2;
        }

        if (workers_opt->count() > 0 || workers != 0) {
            if (workers < 0) throw InputError("--workers must be >= 0");
            lf::set_max_workers(workers);
        }
        if (seed_opt->count() > 0) {
            sim.seed = seed;
            rec.match.cfg.seed = seed;
            pipe.recolour.match.cfg.seed = seed;
        }

        if (c_sim->parsed()) return run_simulate(sim);
        if (c_dec->parsed()) return run_decode(dec);
        if (c_rec->parsed()) return run_recolour(rec);
        if (c_den->parsed()) return run_denoise(den);
        if (c_rep->parsed()) return run_report(rep);
        if (c_pipe->parsed()) return run_pipeline(pipe);
        return 2; // unreachable: require_subcommand(1)
    } catch (const InputError& e) {
        std::cerr << "lfpipe: error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "lfpipe: error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "lfpipe: stage failure: " << e.what() << "\n";
        return 1;
    }
}
