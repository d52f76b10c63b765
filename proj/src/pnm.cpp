#include "lf/pnm.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

namespace lf {

void write_pnm16(const std::string& path, const Image& img, double scale) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("write_pnm16: 1 or 3 channels required");
    if (scale <= 0) throw std::invalid_argument("write_pnm16: scale must be positive");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pnm16: cannot open " + path);
    f << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n65535\n";
    std::vector<unsigned char> row(static_cast<size_t>(img.width) * img.channels * 2);
    for (int y = 0; y < img.height; ++y) {
        size_t o = 0;
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                double v = std::clamp(img.at(x, y, c) / scale, 0.0, 1.0);
                auto q = static_cast<uint16_t>(std::lround(v * 65535.0));
                row[o++] = static_cast<unsigned char>(q >> 8);
                row[o++] = static_cast<unsigned char>(q & 0xff);
            }
        }
        f.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!f) throw std::runtime_error("write_pnm16: write failed for " + path);
}

static int read_pnm_token(std::istream& f) {
    // Skip whitespace and '#' comments, then parse a non-negative integer.
    int ch;
    while ((ch = f.get()) != EOF) {
        if (ch == '#') {
            while ((ch = f.get()) != EOF && ch != '\n') {}
        } else if (!std::isspace(ch)) {
            break;
        }
    }
    if (ch == EOF) throw std::runtime_error("read_pnm16: truncated header");
    int v = 0;
    bool any = false;
    while (ch != EOF && std::isdigit(ch)) {
        v = v * 10 + (ch - '0');
        any = true;
        ch = f.get();
    }
    if (!any) throw std::runtime_error("read_pnm16: malformed header");
    return v;
}

Image read_pnm16(const std::string& path, double scale) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_pnm16: cannot open " + path);
    char magic[2];
    f.read(magic, 2);
    if (!f || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
        throw std::runtime_error("read_pnm16: not a binary PGM/PPM: " + path);
    int channels = magic[1] == '5' ? 1 : 3;
    int w = read_pnm_token(f);
    int h = read_pnm_token(f);
    int maxval = read_pnm_token(f);
    if (maxval != 65535)
        throw std::runtime_error("read_pnm16: expected 16-bit maxval in " + path);
    Image img(w, h, channels);
    std::vector<unsigned char> row(static_cast<size_t>(w) * channels * 2);
    for (int y = 0; y < h; ++y) {
        f.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!f) throw std::runtime_error("read_pnm16: truncated data in " + path);
        size_t o = 0;
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                uint16_t q = static_cast<uint16_t>((row[o] << 8) | row[o + 1]);
                o += 2;
                img.at(x, y, c) = static_cast<float>(q / 65535.0 * scale);
            }
        }
    }
    return img;
}

} // namespace lf
