#include "lf/lightfield.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "lf/pnm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lf {

LightField::LightField(int u, int v, int width, int height, int channels)
    : rows(u), cols(v) {
    if (u <= 0 || v <= 0)
        throw std::invalid_argument("LightField: non-positive grid");
    views.assign(static_cast<size_t>(u) * v, Image(width, height, channels));
    valid.assign(static_cast<size_t>(u) * v, 1);
}

void LightField::check_consistent() const {
    if (rows <= 0 || cols <= 0 || views.size() != static_cast<size_t>(rows) * cols ||
        valid.size() != views.size())
        throw std::invalid_argument("LightField: inconsistent grid");
    if (!is_valid(centre_row(), centre_col()))
        throw std::invalid_argument("LightField: centre view must be valid");
    const Image& c = centre_view();
    for (size_t i = 0; i < views.size(); ++i)
        if (valid[i] && !views[i].same_shape(c))
            throw std::invalid_argument("LightField: views differ in shape");
}

static std::string view_filename(int u, int v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "view_%02d_%02d.ppm", u, v);
    return buf;
}

static std::string space_name(ColorSpace cs) {
    switch (cs) {
        case ColorSpace::LinearRGB: return "linear_rgb";
        case ColorSpace::SRGB: return "srgb";
        case ColorSpace::Lab: return "lab";
    }
    throw std::logic_error("unknown colour space");
}

static ColorSpace space_from_name(const std::string& s) {
    if (s == "linear_rgb") return ColorSpace::LinearRGB;
    if (s == "srgb") return ColorSpace::SRGB;
    if (s == "lab") return ColorSpace::Lab;
    throw std::runtime_error("manifest: unknown colour_space '" + s + "'");
}

// Lab channels are packed into [0,1] for 16-bit storage.
static Image pack_lab(const Image& lab) {
    Image out = lab;
    for (size_t i = 0; i < out.data.size(); i += 3) {
        out.data[i] = static_cast<float>(out.data[i] / 100.0);
        out.data[i + 1] = static_cast<float>((out.data[i + 1] + 128.0) / 255.0);
        out.data[i + 2] = static_cast<float>((out.data[i + 2] + 128.0) / 255.0);
    }
    return out;
}

static Image unpack_lab(const Image& packed) {
    Image out = packed;
    for (size_t i = 0; i < out.data.size(); i += 3) {
        out.data[i] = static_cast<float>(out.data[i] * 100.0);
        out.data[i + 1] = static_cast<float>(out.data[i + 1] * 255.0 - 128.0);
        out.data[i + 2] = static_cast<float>(out.data[i + 2] * 255.0 - 128.0);
    }
    return out;
}

void save_lightfield(const LightField& lf, const std::string& dir,
                     const std::string& stage) {
    lf.check_consistent();
    fs::create_directories(dir);
    const Image& c = lf.centre_view();
    json m;
    m["rows"] = lf.rows;
    m["cols"] = lf.cols;
    m["width"] = c.width;
    m["height"] = c.height;
    m["channels"] = c.channels;
    m["colour_space"] = space_name(lf.colour_space);
    m["white_point"] = {lf.white_point.x, lf.white_point.y, lf.white_point.z};
    m["valid"] = std::vector<int>(lf.valid.begin(), lf.valid.end());
    m["format"] = "ppm16";
    if (!stage.empty()) m["stage"] = stage;
    std::ofstream f(fs::path(dir) / "manifest.json");
    if (!f) throw std::runtime_error("save_lightfield: cannot write manifest in " + dir);
    f << m.dump(2) << "\n";
    for (int u = 0; u < lf.rows; ++u) {
        for (int v = 0; v < lf.cols; ++v) {
            if (!lf.is_valid(u, v)) continue;
            const Image& img = lf.view(u, v);
            Image packed = lf.colour_space == ColorSpace::Lab ? pack_lab(img) : img;
            write_pnm16((fs::path(dir) / view_filename(u, v)).string(), packed);
        }
    }
}

LoadedLightField load_lightfield(const std::string& dir) {
    fs::path mp = fs::path(dir) / "manifest.json";
    std::ifstream f(mp);
    if (!f) throw std::runtime_error("load_lightfield: missing manifest " + mp.string());
    json m;
    try {
        f >> m;
    } catch (const json::exception& e) {
        throw std::runtime_error("load_lightfield: bad manifest: " + std::string(e.what()));
    }
    int rows = m.at("rows").get<int>();
    int cols = m.at("cols").get<int>();
    int width = m.at("width").get<int>();
    int height = m.at("height").get<int>();
    int channels = m.at("channels").get<int>();
    if (rows <= 0 || cols <= 0 || width <= 0 || height <= 0 || channels != 3)
        throw std::runtime_error("load_lightfield: invalid dimensions in manifest");
    LoadedLightField out;
    LightField& lf = out.lf;
    lf = LightField(rows, cols, width, height, channels);
    lf.colour_space = space_from_name(m.at("colour_space").get<std::string>());
    if (m.contains("white_point")) {
        auto wp = m.at("white_point");
        lf.white_point = {wp.at(0).get<double>(), wp.at(1).get<double>(),
                          wp.at(2).get<double>()};
    }
    auto valid = m.at("valid").get<std::vector<int>>();
    if (valid.size() != lf.valid.size())
        throw std::runtime_error("load_lightfield: validity mask size mismatch");
    for (size_t i = 0; i < valid.size(); ++i) lf.valid[i] = valid[i] ? 1 : 0;
    out.stage = m.value("stage", "");
    for (int u = 0; u < rows; ++u) {
        for (int v = 0; v < cols; ++v) {
            if (!lf.is_valid(u, v)) continue;
            fs::path vp = fs::path(dir) / view_filename(u, v);
            if (!fs::exists(vp))
                throw std::runtime_error("load_lightfield: view flagged valid but missing: " +
                                         vp.string());
            Image img = read_pnm16(vp.string());
            if (img.width != width || img.height != height || img.channels != channels)
                throw std::runtime_error("load_lightfield: view shape mismatch: " + vp.string());
            lf.view(u, v) = lf.colour_space == ColorSpace::Lab ? unpack_lab(img) : img;
        }
    }
    lf.check_consistent();
    return out;
}

double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
    double mse = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = static_cast<double>(a.data[i]) - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse <= 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double mean_view_psnr(const LightField& a, const LightField& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument("mean_view_psnr: grid mismatch");
    double acc = 0;
    int n = 0;
    for (int u = 0; u < a.rows; ++u)
        for (int v = 0; v < a.cols; ++v)
            if (a.is_valid(u, v) && b.is_valid(u, v)) {
                acc += psnr(a.view(u, v), b.view(u, v));
                ++n;
            }
    if (n == 0) throw std::invalid_argument("mean_view_psnr: no common valid views");
    return acc / n;
}

} // namespace lf
