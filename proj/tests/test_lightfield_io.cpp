#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "lf/lightfield.hpp"
#include "lf/pnm.hpp"
#include "lf/rng.hpp"

using namespace lf;
namespace fs = std::filesystem;

static LightField make_random_lf(int rows, int cols, int w, int h, uint64_t seed) {
    LightField lf(rows, cols, w, h, 3);
    Rng rng(seed);
    for (auto& view : lf.views)
        for (float& v : view.data) v = static_cast<float>(rng.uniform());
    return lf;
}

static fs::path temp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("lf_io_" + name);
    fs::remove_all(p);
    return p;
}

TEST_CASE("pnm 16-bit round trip is exact at quantised values") {
    Image img(17, 9, 3);
    Rng rng(5);
    for (float& v : img.data) v = static_cast<float>(rng.uniform());
    fs::path p = temp_dir("pnm") ;
    fs::create_directories(p);
    std::string file = (p / "img.ppm").string();
    write_pnm16(file, img);
    Image back = read_pnm16(file);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(img.data[i] - back.data[i]) <= 0.5 / 65535.0);
    // Re-writing the loaded image reproduces the file byte for byte.
    std::string file2 = (p / "img2.ppm").string();
    write_pnm16(file2, back);
    std::ifstream a(file, std::ios::binary), b(file2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
    fs::remove_all(p);
}

TEST_CASE("pnm scale carries above-unity samples") {
    Image img(4, 3, 1);
    img.at(1, 1, 0) = 10.0f;
    img.at(2, 2, 0) = 0.25f;
    fs::path p = temp_dir("pnm_scale");
    fs::create_directories(p);
    std::string file = (p / "wi.pgm").string();
    write_pnm16(file, img, 16.0);
    Image back = read_pnm16(file, 16.0);
    CHECK(std::abs(back.at(1, 1, 0) - 10.0f) < 16.0 / 65535.0);
    CHECK(std::abs(back.at(2, 2, 0) - 0.25f) < 16.0 / 65535.0);
    fs::remove_all(p);
}

TEST_CASE("light field directory round trip") {
    LightField lf = make_random_lf(5, 5, 12, 7, 42);
    lf.set_valid(0, 0, false);
    fs::path dir = temp_dir("roundtrip");
    save_lightfield(lf, dir.string(), "decoded");

    CHECK(fs::exists(dir / "manifest.json"));
    int files = 0;
    for (auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".ppm") ++files;
    CHECK(files == 24); // 25 views minus the invalid one

    LoadedLightField loaded = load_lightfield(dir.string());
    CHECK(loaded.stage == "decoded");
    CHECK(loaded.lf.rows == 5);
    CHECK(loaded.lf.cols == 5);
    CHECK_FALSE(loaded.lf.is_valid(0, 0));
    for (int u = 0; u < 5; ++u)
        for (int v = 0; v < 5; ++v) {
            if (!lf.is_valid(u, v)) continue;
            const Image& a = lf.view(u, v);
            const Image& b = loaded.lf.view(u, v);
            for (size_t i = 0; i < a.data.size(); ++i)
                CHECK(std::abs(a.data[i] - b.data[i]) <= 0.5 / 65535.0);
        }
    fs::remove_all(dir);
}

TEST_CASE("lab light fields round trip through the packed encoding") {
    LightField lf(3, 3, 6, 4, 3);
    lf.colour_space = ColorSpace::Lab;
    Rng rng(9);
    for (auto& view : lf.views)
        for (size_t i = 0; i < view.data.size(); i += 3) {
            view.data[i] = static_cast<float>(rng.uniform(0.0, 100.0));
            view.data[i + 1] = static_cast<float>(rng.uniform(-128.0, 127.0));
            view.data[i + 2] = static_cast<float>(rng.uniform(-128.0, 127.0));
        }
    fs::path dir = temp_dir("lab");
    save_lightfield(lf, dir.string());
    LoadedLightField loaded = load_lightfield(dir.string());
    CHECK(loaded.lf.colour_space == ColorSpace::Lab);
    for (int i = 0; i < 9; ++i)
        for (size_t j = 0; j < lf.views[i].data.size(); ++j) {
            double tol = (j % 3 == 0 ? 100.0 : 255.0) / 65535.0;
            CHECK(std::abs(lf.views[i].data[j] - loaded.lf.views[i].data[j]) <= tol);
        }
    fs::remove_all(dir);
}

TEST_CASE("loader rejects broken directories") {
    LightField lf = make_random_lf(3, 3, 5, 5, 1);
    fs::path dir = temp_dir("broken");
    save_lightfield(lf, dir.string());

    SUBCASE("missing view file flagged valid") {
        fs::remove(dir / "view_01_02.ppm");
        CHECK_THROWS_AS(load_lightfield(dir.string()), std::runtime_error);
    }
    SUBCASE("missing manifest") {
        fs::remove(dir / "manifest.json");
        CHECK_THROWS_AS(load_lightfield(dir.string()), std::runtime_error);
    }
    SUBCASE("corrupt manifest") {
        std::ofstream f(dir / "manifest.json");
        f << "{ not json";
        f.close();
        CHECK_THROWS_AS(load_lightfield(dir.string()), std::runtime_error);
    }
    fs::remove_all(dir);
}

TEST_CASE("centre view must be valid") {
    LightField lf = make_random_lf(3, 3, 5, 5, 2);
    lf.set_valid(1, 1, false);
    CHECK_THROWS_AS(lf.check_consistent(), std::invalid_argument);
}

TEST_CASE("psnr basics") {
    Image a(8, 8, 3, 0.5f), b(8, 8, 3, 0.5f);
    CHECK(std::isinf(psnr(a, b)));
    b.data[0] += 0.1f;
    CHECK(psnr(a, b) < 60.0);
    Image c(4, 4, 3);
    CHECK_THROWS_AS(psnr(a, c), std::invalid_argument);
}
