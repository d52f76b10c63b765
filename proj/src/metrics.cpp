#include "lf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/gamma.hpp>

#include "lf/color.hpp"
#include "lf/parallel.hpp"

namespace lf::metrics {

namespace {

// ---------------------------------------------------------------------------
// Spatial CIELAB
// ---------------------------------------------------------------------------

// Opponent decomposition of XYZ into luminance, red-green and blue-yellow
// axes (Poirson & Wandell pattern-colour separable model).
constexpr double kOpp[3][3] = {
    {0.279, 0.72, -0.107},
    {-0.449, 0.29, -0.077},
    {0.086, -0.59, 0.501},
};

struct CsfGaussian {
    double weight;
    double halfwidth_deg; // full width at half amplitude, in visual degrees
};

// Contrast-sensitivity blur per opponent channel as a weighted sum of
// Gaussians; the luminance channel carries a wide negative surround.
const std::vector<std::vector<CsfGaussian>> kCsf = {
    {{0.921, 0.0283}, {0.105, 0.133}, {-0.108, 4.336}},
    {{0.531, 0.0392}, {0.330, 0.494}},
    {{0.488, 0.0536}, {0.371, 0.386}},
};

struct Plane {
    int width = 0, height = 0;
    std::vector<double> v;
    Plane(int w, int h) : width(w), height(h), v(static_cast<size_t>(w) * h) {}
    double& at(int x, int y) { return v[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return v[static_cast<size_t>(y) * width + x]; }
};

// Normalized 1D Gaussian taps for a full width at half amplitude of `fwhm`
// samples, truncated at three standard deviations.
std::vector<double> gaussian_taps(double fwhm) {
    const double sigma = std::max(fwhm, 1e-9) / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        taps[i + radius] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        sum += taps[i + radius];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

// Separable clamp-to-edge convolution with the same 1D taps on both axes.
Plane blur(const Plane& src, const std::vector<double>& taps) {
    const int r = static_cast<int>(taps.size() / 2);
    Plane tmp(src.width, src.height), out(src.width, src.height);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i)
                acc += taps[i + r] * src.at(std::clamp(x + i, 0, src.width - 1), y);
            tmp.at(x, y) = acc;
        }
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i)
                acc += taps[i + r] * tmp.at(x, std::clamp(y + i, 0, src.height - 1));
            out.at(x, y) = acc;
        }
    return out;
}

// Linear RGB image -> three CSF-filtered opponent planes.
std::array<Plane, 3> filtered_opponent(const Image& img, double spd) {
    std::array<Plane, 3> opp{Plane(img.width, img.height),
                             Plane(img.width, img.height),
                             Plane(img.width, img.height)};
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const Xyz c = rgb_to_xyz(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
            for (int o = 0; o < 3; ++o)
                opp[o].at(x, y) = kOpp[o][0] * c.x + kOpp[o][1] * c.y + kOpp[o][2] * c.z;
        }
    std::array<Plane, 3> out{Plane(img.width, img.height),
                             Plane(img.width, img.height),
                             Plane(img.width, img.height)};
    for (int o = 0; o < 3; ++o) {
        double wsum = 0.0;
        for (const CsfGaussian& g : kCsf[o]) wsum += g.weight;
        for (const CsfGaussian& g : kCsf[o]) {
            const Plane b = blur(opp[o], gaussian_taps(g.halfwidth_deg * spd));
            const double w = g.weight / wsum; // unit DC gain overall
            for (size_t i = 0; i < b.v.size(); ++i) out[o].v[i] += w * b.v[i];
        }
    }
    return out;
}

Lab opponent_to_lab(double o1, double o2, double o3, const Eigen::Matrix3d& inv) {
    const Eigen::Vector3d xyz = inv * Eigen::Vector3d(o1, o2, o3);
    return xyz_to_lab({xyz(0), xyz(1), xyz(2)});
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

int bin_of(double v, double lo, double hi, int bins) {
    const int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
    return std::clamp(b, 0, bins - 1); // out-of-range values join the edge bins
}

std::vector<double> channel_hist(const Image& lab, int c, int bins) {
    const double lo = c == 0 ? 0.0 : -128.0;
    const double hi = c == 0 ? 100.0 : 127.0;
    std::vector<double> h(bins, 0.0);
    for (int y = 0; y < lab.height; ++y)
        for (int x = 0; x < lab.width; ++x) h[bin_of(lab.at(x, y, c), lo, hi, bins)] += 1.0;
    const double n = static_cast<double>(lab.width) * lab.height;
    for (double& v : h) v /= n;
    return h;
}

// ---------------------------------------------------------------------------
// Noise estimation
// ---------------------------------------------------------------------------

Eigen::VectorXd luminance_plane(const Image& img) {
    Eigen::VectorXd lum(static_cast<Eigen::Index>(img.width) * img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const Eigen::Index i = static_cast<Eigen::Index>(y) * img.width + x;
            lum(i) = img.channels == 1
                         ? img.at(x, y, 0)
                         : luma709(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
        }
    return lum;
}

// Minimum eigenvalue of the sample covariance of the selected patch columns.
double min_cov_eigenvalue(const Eigen::MatrixXd& patches, const std::vector<int>& sel) {
    if (sel.size() < 2) return -1.0;
    Eigen::MatrixXd sub(patches.rows(), static_cast<Eigen::Index>(sel.size()));
    for (size_t j = 0; j < sel.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = patches.col(sel[j]);
    const Eigen::VectorXd mu = sub.rowwise().mean();
    sub.colwise() -= mu;
    const Eigen::MatrixXd cov = sub * sub.transpose() / static_cast<double>(sel.size() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

} // namespace

double scielab(const Image& a, const Image& b, double samples_per_degree) {
    if (!a.same_shape(b)) throw std::invalid_argument("scielab: shape mismatch");
    if (a.channels != 3) throw std::invalid_argument("scielab: expected 3 channels");
    if (a.empty()) throw std::invalid_argument("scielab: empty image");
    if (!(samples_per_degree > 0.0))
        throw std::invalid_argument("scielab: samples_per_degree must be positive");

    const std::array<Plane, 3> fa = filtered_opponent(a, samples_per_degree);
    const std::array<Plane, 3> fb = filtered_opponent(b, samples_per_degree);

    Eigen::Matrix3d opp;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) opp(i, j) = kOpp[i][j];
    const Eigen::Matrix3d inv = opp.inverse();

    double acc = 0.0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            const Lab la = opponent_to_lab(fa[0].at(x, y), fa[1].at(x, y), fa[2].at(x, y), inv);
            const Lab lb = opponent_to_lab(fb[0].at(x, y), fb[1].at(x, y), fb[2].at(x, y), inv);
            acc += std::sqrt((la.L - lb.L) * (la.L - lb.L) + (la.a - lb.a) * (la.a - lb.a) +
                             (la.b - lb.b) * (la.b - lb.b));
        }
    return acc / (static_cast<double>(a.width) * a.height);
}

double hist_chi2(const Image& lab_a, const Image& lab_b, int bins) {
    if (lab_a.empty() || lab_b.empty()) throw std::invalid_argument("hist_chi2: empty image");
    if (lab_a.channels != 3 || lab_b.channels != 3)
        throw std::invalid_argument("hist_chi2: expected 3 channels");
    if (bins < 1) throw std::invalid_argument("hist_chi2: bins must be positive");

    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const std::vector<double> p = channel_hist(lab_a, c, bins);
        const std::vector<double> q = channel_hist(lab_b, c, bins);
        double chi = 0.0;
        for (int i = 0; i < bins; ++i) {
            const double s = p[i] + q[i];
            if (s > 0.0) chi += (p[i] - q[i]) * (p[i] - q[i]) / s;
        }
        total += chi;
    }
    return total / 3.0;
}

double estimate_noise(const Image& img, int patch_size) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("estimate_noise: expected 1 or 3 channels");
    if (img.width < 32 || img.height < 32)
        throw std::invalid_argument("estimate_noise: image must be at least 32x32");
    if (patch_size < 3 || patch_size > std::min(img.width, img.height))
        throw std::invalid_argument("estimate_noise: bad patch size");

    const int p = patch_size;
    const int d = p * p;
    const int nx = img.width - p + 1, ny = img.height - p + 1;
    const Eigen::Index n = static_cast<Eigen::Index>(nx) * ny;
    const Eigen::VectorXd lum = luminance_plane(img);

    Eigen::MatrixXd patches(d, n);
    for (int py = 0; py < ny; ++py)
        for (int px = 0; px < nx; ++px) {
            const Eigen::Index col = static_cast<Eigen::Index>(py) * nx + px;
            for (int y = 0; y < p; ++y)
                for (int x = 0; x < p; ++x)
                    patches(y * p + x, col) =
                        lum(static_cast<Eigen::Index>(py + y) * img.width + (px + x));
        }

    // Quadratic form measuring per-patch gradient energy: central horizontal
    // and vertical differences with [-1/2, 0, 1/2] taps.
    Eigen::MatrixXd dd = Eigen::MatrixXd::Zero(d, d);
    auto add_pair = [&](int i1, int i2) {
        dd(i1, i1) += 0.25;
        dd(i2, i2) += 0.25;
        dd(i1, i2) -= 0.25;
        dd(i2, i1) -= 0.25;
    };
    for (int y = 0; y < p; ++y)
        for (int x = 1; x < p - 1; ++x) add_pair(y * p + x - 1, y * p + x + 1);
    for (int y = 1; y < p - 1; ++y)
        for (int x = 0; x < p; ++x) add_pair((y - 1) * p + x, (y + 1) * p + x);

    const double rank = static_cast<double>(Eigen::FullPivLU<Eigen::MatrixXd>(dd).rank());
    const double trace = dd.trace();
    // Gradient energy of a flat patch carrying only variance-sigma^2 noise is
    // approximately Gamma(rank/2, 2*sigma^2*trace/rank); patches below this
    // high quantile of that law count as low-texture.
    const boost::math::gamma_distribution<double> gam(rank / 2.0, 2.0 * trace / rank);
    const double tau0 = boost::math::quantile(gam, 1.0 - 1e-6);

    const Eigen::RowVectorXd energy = (dd * patches).cwiseProduct(patches).colwise().sum();

    std::vector<int> all(static_cast<size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    double sigma2 = std::max(min_cov_eigenvalue(patches, all), 0.0);
    for (int iter = 0; iter < 10; ++iter) {
        const double tau = sigma2 * tau0;
        std::vector<int> sel;
        for (Eigen::Index j = 0; j < n; ++j)
            if (energy(j) <= tau) sel.push_back(static_cast<int>(j));
        const double next = min_cov_eigenvalue(patches, sel);
        if (next < 0.0) break; // selection collapsed; keep the last estimate
        const double clamped = std::max(next, 0.0);
        const bool settled = std::abs(clamped - sigma2) < 1e-15;
        sigma2 = clamped;
        if (settled) break;
    }
    return std::sqrt(sigma2);
}

MetricReport lightfield_report(const LightField& lf, const MetricConfig& cfg) {
    lf.check_consistent();
    struct Slot {
        int u, v;
    };
    std::vector<Slot> slots;
    for (int u = 0; u < lf.rows; ++u)
        for (int v = 0; v < lf.cols; ++v)
            if (lf.is_valid(u, v)) slots.push_back({u, v});

    const Image& centre = lf.centre_view();
    const Image centre_lab = rgb_to_lab(centre);

    MetricReport report;
    report.per_view.resize(slots.size());
    parallel_for(0, static_cast<int>(slots.size()), [&](int i) {
        const auto [u, v] = slots[static_cast<size_t>(i)];
        ViewMetrics& vm = report.per_view[static_cast<size_t>(i)];
        vm.u = u;
        vm.v = v;
        vm.is_centre = (u == lf.centre_row() && v == lf.centre_col());
        const Image& view = lf.view(u, v);
        if (!vm.is_centre) {
            vm.scielab = scielab(view, centre, cfg.samples_per_degree);
            vm.hist_chi2 = hist_chi2(rgb_to_lab(view), centre_lab, cfg.hist_bins);
        }
        vm.noise_sigma = estimate_noise(view, cfg.noise_patch);
    });

    long n_dist = 0;
    for (const ViewMetrics& vm : report.per_view) {
        report.mean_noise_sigma += vm.noise_sigma;
        if (vm.is_centre) continue;
        report.mean_scielab += vm.scielab;
        report.mean_hist_chi2 += vm.hist_chi2;
        ++n_dist;
    }
    if (n_dist > 0) {
        report.mean_scielab /= static_cast<double>(n_dist);
        report.mean_hist_chi2 /= static_cast<double>(n_dist);
    }
    if (!report.per_view.empty())
        report.mean_noise_sigma /= static_cast<double>(report.per_view.size());
    return report;
}

std::string format_report(const MetricReport& report) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%4s %4s %7s %12s %12s %12s\n", "row", "col",
                  "centre", "scielab", "hist_chi2", "noise_sigma");
    out << line;
    for (const ViewMetrics& vm : report.per_view) {
        std::snprintf(line, sizeof(line), "%4d %4d %7s %12.6f %12.6f %12.6f\n", vm.u,
                      vm.v, vm.is_centre ? "yes" : "", vm.scielab, vm.hist_chi2,
                      vm.noise_sigma);
        out << line;
    }
    std::snprintf(line, sizeof(line),
                  "mean over views: scielab %.6f  hist_chi2 %.6f  noise_sigma %.6f\n",
                  report.mean_scielab, report.mean_hist_chi2, report.mean_noise_sigma);
    out << line;
    return out.str();
}

std::string report_csv(const MetricReport& report) {
    std::ostringstream out;
    out << "row,col,is_centre,scielab,hist_chi2,noise_sigma\n";
    char line[160];
    for (const ViewMetrics& vm : report.per_view) {
        std::snprintf(line, sizeof(line), "%d,%d,%d,%.9g,%.9g,%.9g\n", vm.u, vm.v,
                      vm.is_centre ? 1 : 0, vm.scielab, vm.hist_chi2, vm.noise_sigma);
        out << line;
    }
    std::snprintf(line, sizeof(line), "-1,-1,0,%.9g,%.9g,%.9g\n", report.mean_scielab,
                  report.mean_hist_chi2, report.mean_noise_sigma);
    out << line;
    return out.str();
}

} // namespace lf::metrics
