#include "lf/transfer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace lf::transfer {

namespace {

constexpr double kPi = 3.14159265358979323846;

using Eigen::Matrix3d;
using Eigen::Matrix4d;
using Eigen::MatrixXd;
using Eigen::RowVector3d;
using Eigen::Vector3d;

//! Dense view of the parameters for the optimizer.
struct Packed {
    MatrixXd W; // m x 3
    Matrix3d A;
    Vector3d t;
};

//! k(r) = -r between rows of X (n x 3) and rows of C (m x 3).
MatrixXd kernel_matrix(const MatrixXd& X, const MatrixXd& C) {
    MatrixXd K(X.rows(), C.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < C.rows(); ++j)
            K(i, j) = -(X.row(i) - C.row(j)).norm();
    return K;
}

MatrixXd residuals(const MatrixXd& ct, const MatrixXd& cp, const MatrixXd& ktc,
                   const Packed& th) {
    MatrixXd r = ct * th.A.transpose();
    r.rowwise() += th.t.transpose();
    if (th.W.rows() > 0) r += ktc * th.W;
    return r - cp;
}

double cost_eval(const MatrixXd& ct, const MatrixXd& cp, const MatrixXd& ktc,
                 const MatrixXd& kcc, const Packed& th, double h,
                 double lambda) {
    const double n = static_cast<double>(ct.rows());
    const MatrixXd r = residuals(ct, cp, ktc, th);
    const double beta = std::pow(4.0 * kPi * h * h, -1.5) / (n * n);
    double acc = 0;
    for (Eigen::Index k = 0; k < r.rows(); ++k)
        acc += std::exp(-r.row(k).squaredNorm() / (4.0 * h * h));
    double c = -beta * acc;
    if (lambda > 0 && th.W.rows() > 0)
        c += lambda * (th.W.transpose() * kcc * th.W).trace();
    return c;
}

Packed grad_eval(const MatrixXd& ct, const MatrixXd& cp, const MatrixXd& ktc,
                 const MatrixXd& kcc, const Packed& th, double h,
                 double lambda) {
    const double n = static_cast<double>(ct.rows());
    const MatrixXd r = residuals(ct, cp, ktc, th);
    const double beta = std::pow(4.0 * kPi * h * h, -1.5) / (n * n);
    MatrixXd g(r.rows(), 3);
    for (Eigen::Index k = 0; k < r.rows(); ++k)
        g.row(k) = beta * std::exp(-r.row(k).squaredNorm() / (4.0 * h * h)) /
                   (2.0 * h * h) * r.row(k);
    Packed out;
    out.t = g.colwise().sum().transpose();
    out.A = g.transpose() * ct;
    out.W = ktc.transpose() * g;
    if (lambda > 0 && th.W.rows() > 0) out.W += 2.0 * lambda * kcc * th.W;
    return out;
}

MatrixXd colours_to_matrix(const std::vector<Lab>& v) {
    MatrixXd m(static_cast<Eigen::Index>(v.size()), 3);
    for (size_t i = 0; i < v.size(); ++i)
        m.row(static_cast<Eigen::Index>(i)) << v[i].L, v[i].a, v[i].b;
    return m;
}

void corr_matrices(const correspond::CorrespondenceSet& corr, MatrixXd& ct,
                   MatrixXd& cp) {
    ct.resize(corr.n(), 3);
    cp.resize(corr.n(), 3);
    for (int k = 0; k < corr.n(); ++k) {
        const correspond::Correspondence& c = corr.pairs[k];
        ct.row(k) << c.c_t.L, c.c_t.a, c.c_t.b;
        cp.row(k) << c.c_p.L, c.c_p.a, c.c_p.b;
    }
}

Packed pack(const TpsTransform& tps) {
    Packed p;
    p.W = MatrixXd::Zero(static_cast<Eigen::Index>(tps.weights.size()), 3);
    for (size_t i = 0; i < tps.weights.size(); ++i)
        p.W.row(static_cast<Eigen::Index>(i)) << tps.weights[i][0],
            tps.weights[i][1], tps.weights[i][2];
    for (int j = 0; j < 3; ++j) {
        p.t(j) = tps.translation[j];
        for (int l = 0; l < 3; ++l) p.A(j, l) = tps.affine[j][l];
    }
    return p;
}

void check_cost_args(const TpsTransform& tps,
                     const correspond::CorrespondenceSet& corr, double h,
                     double lambda) {
    if (corr.n() < 1)
        throw std::invalid_argument("gmm_cost: empty correspondence set");
    if (h <= 0)
        throw std::invalid_argument("gmm_cost: bandwidth must be positive");
    if (lambda < 0)
        throw std::invalid_argument("gmm_cost: negative regularization weight");
    if (tps.weights.size() != tps.control_points.size())
        throw std::invalid_argument(
            "gmm_cost: weight/control-point count mismatch");
}

} // namespace

Lab tps_apply(const TpsTransform& tps, const Lab& c) {
    const double in[3] = {c.L, c.a, c.b};
    double out[3];
    for (int j = 0; j < 3; ++j) {
        out[j] = tps.translation[j];
        for (int l = 0; l < 3; ++l) out[j] += tps.affine[j][l] * in[l];
    }
    for (size_t i = 0; i < tps.control_points.size(); ++i) {
        const Lab& q = tps.control_points[i];
        const double k = -std::sqrt((c.L - q.L) * (c.L - q.L) +
                                    (c.a - q.a) * (c.a - q.a) +
                                    (c.b - q.b) * (c.b - q.b));
        for (int j = 0; j < 3; ++j) out[j] += tps.weights[i][j] * k;
    }
    return {out[0], out[1], out[2]};
}

double gmm_cost(const TpsTransform& tps,
                const correspond::CorrespondenceSet& corr, double h,
                double lambda_reg) {
    check_cost_args(tps, corr, h, lambda_reg);
    MatrixXd ct, cp;
    corr_matrices(corr, ct, cp);
    const MatrixXd c = colours_to_matrix(tps.control_points);
    const MatrixXd ktc = kernel_matrix(ct, c);
    const MatrixXd kcc = kernel_matrix(c, c);
    return cost_eval(ct, cp, ktc, kcc, pack(tps), h, lambda_reg);
}

TpsGradient gmm_cost_gradient(const TpsTransform& tps,
                              const correspond::CorrespondenceSet& corr,
                              double h, double lambda_reg) {
    check_cost_args(tps, corr, h, lambda_reg);
    MatrixXd ct, cp;
    corr_matrices(corr, ct, cp);
    const MatrixXd c = colours_to_matrix(tps.control_points);
    const MatrixXd ktc = kernel_matrix(ct, c);
    const MatrixXd kcc = kernel_matrix(c, c);
    const Packed g = grad_eval(ct, cp, ktc, kcc, pack(tps), h, lambda_reg);

    TpsGradient out;
    out.weights.resize(tps.weights.size());
    for (size_t i = 0; i < tps.weights.size(); ++i)
        for (int j = 0; j < 3; ++j)
            out.weights[i][j] = g.W(static_cast<Eigen::Index>(i), j);
    for (int j = 0; j < 3; ++j) {
        out.translation[j] = g.t(j);
        for (int l = 0; l < 3; ++l) out.affine[j][l] = g.A(j, l);
    }
    return out;
}

TpsTransform fit_transfer(const correspond::CorrespondenceSet& corr,
                          const TransferConfig& cfg, FitTrace* trace) {
    if (!corr.sufficient())
        throw std::invalid_argument("fit_transfer: insufficient correspondences");
    if (cfg.h_schedule.empty() || cfg.h_schedule.front() <= 0)
        throw std::invalid_argument("fit_transfer: empty or invalid bandwidth schedule");
    for (size_t i = 1; i < cfg.h_schedule.size(); ++i)
        if (cfg.h_schedule[i] <= 0 || cfg.h_schedule[i] >= cfg.h_schedule[i - 1])
            throw std::invalid_argument(
                "fit_transfer: bandwidth schedule must be strictly decreasing");
    if (cfg.inner_iters < 1)
        throw std::invalid_argument("fit_transfer: inner_iters must be positive");
    if (cfg.lambda_reg < 0)
        throw std::invalid_argument("fit_transfer: negative regularization weight");
    for (int g : cfg.control_grid)
        if (g < 2)
            throw std::invalid_argument(
                "fit_transfer: control grid needs at least 2 nodes per axis");

    const int n = corr.n();
    MatrixXd ct, cp;
    corr_matrices(corr, ct, cp);

    // Centred, isotropically rescaled colour frame for conditioning: the
    // kernel values, affine entries, and translation then share one scale.
    const RowVector3d mu = (ct.colwise().sum() + cp.colwise().sum()) / (2.0 * n);
    const double var = ((ct.rowwise() - mu).squaredNorm() +
                        (cp.rowwise() - mu).squaredNorm()) /
                       (2.0 * n * 3.0);
    const double s = std::sqrt(std::max(var, 1e-12));

    // Control lattice over the observed box, minimum extent 1 LAB unit so a
    // degenerate (e.g. achromatic) axis still yields distinct nodes.
    RowVector3d lo = ct.colwise().minCoeff().cwiseMin(cp.colwise().minCoeff());
    RowVector3d hi = ct.colwise().maxCoeff().cwiseMax(cp.colwise().maxCoeff());
    for (int a = 0; a < 3; ++a)
        if (hi(a) - lo(a) < 1.0) {
            const double mid = 0.5 * (hi(a) + lo(a));
            lo(a) = mid - 0.5;
            hi(a) = mid + 0.5;
        }
    const int gx = cfg.control_grid[0], gy = cfg.control_grid[1],
              gz = cfg.control_grid[2];
    const Eigen::Index m = static_cast<Eigen::Index>(gx) * gy * gz;
    MatrixXd c_raw(m, 3);
    {
        Eigen::Index row = 0;
        for (int i = 0; i < gx; ++i)
            for (int j = 0; j < gy; ++j)
                for (int k = 0; k < gz; ++k)
                    c_raw.row(row++) << lo(0) + i * (hi(0) - lo(0)) / (gx - 1),
                        lo(1) + j * (hi(1) - lo(1)) / (gy - 1),
                        lo(2) + k * (hi(2) - lo(2)) / (gz - 1);
    }

    const MatrixXd ctn = (ct.rowwise() - mu) / s;
    const MatrixXd cpn = (cp.rowwise() - mu) / s;
    const MatrixXd cn = (c_raw.rowwise() - mu) / s;
    const MatrixXd ktc = kernel_matrix(ctn, cn);
    const MatrixXd kcc = kernel_matrix(cn, cn);

    // Orthogonality conditions P^T W = 0 with P = [1 | controls].
    MatrixXd p(m, 4);
    p.col(0).setOnes();
    p.rightCols<3>() = cn;
    const Eigen::LDLT<Matrix4d> ptp((p.transpose() * p).eval());
    auto project = [&](MatrixXd& w) { w -= p * ptp.solve(p.transpose() * w); };

    Packed th{MatrixXd::Zero(m, 3), Matrix3d::Identity(), Vector3d::Zero()};
    const double lambda_n = cfg.lambda_reg * s * s * s * s;

    // The spline weights sit in a much steeper cost valley than the affine
    // part (the bending energy's curvature dwarfs the mixture densities), so
    // a single shared step size would strangle the affine progress. Each block
    // therefore line-searches with its own adaptive step; every accepted step
    // still lowers the full cost, keeping the per-stage trace monotone.
    for (double h_raw : cfg.h_schedule) {
        const double h = h_raw / s;
        double cur = cost_eval(ctn, cpn, ktc, kcc, th, h, lambda_n);
        if (trace) trace->stage_costs.push_back({cur});
        double alpha_at = -1.0, alpha_w = -1.0;
        for (int it = 0; it < cfg.inner_iters; ++it) {
            bool moved = false;
            { // affine + translation block
                const Packed g = grad_eval(ctn, cpn, ktc, kcc, th, h, lambda_n);
                const double gn =
                    std::sqrt(g.A.squaredNorm() + g.t.squaredNorm());
                if (gn >= 1e-16) {
                    // First step of a stage moves a quarter unit in the
                    // normalized frame; afterwards the accepted step grows.
                    if (alpha_at <= 0) alpha_at = 0.25 / gn;
                    bool ok = false;
                    for (int bt = 0; bt < 60 && !ok; ++bt) {
                        Packed cand{th.W, th.A - alpha_at * g.A,
                                    th.t - alpha_at * g.t};
                        const double trial =
                            cost_eval(ctn, cpn, ktc, kcc, cand, h, lambda_n);
                        if (trial < cur) {
                            th = std::move(cand);
                            cur = trial;
                            alpha_at = std::min(alpha_at * 1.5, 1e14);
                            ok = moved = true;
                        } else {
                            alpha_at *= 0.5;
                        }
                    }
                    if (!ok) alpha_at = -1.0;
                }
            }
            { // spline weight block, kept on the orthogonality manifold
                Packed g = grad_eval(ctn, cpn, ktc, kcc, th, h, lambda_n);
                project(g.W);
                const double gn = g.W.norm();
                if (gn >= 1e-16) {
                    if (alpha_w <= 0) alpha_w = 0.25 / gn;
                    bool ok = false;
                    for (int bt = 0; bt < 60 && !ok; ++bt) {
                        Packed cand{th.W - alpha_w * g.W, th.A, th.t};
                        project(cand.W);
                        const double trial =
                            cost_eval(ctn, cpn, ktc, kcc, cand, h, lambda_n);
                        if (trial < cur) {
                            th = std::move(cand);
                            cur = trial;
                            alpha_w = std::min(alpha_w * 1.5, 1e14);
                            ok = moved = true;
                        } else {
                            alpha_w *= 0.5;
                        }
                    }
                    if (!ok) alpha_w = -1.0;
                }
            }
            if (trace) trace->stage_costs.back().push_back(cur);
            if (!moved) break; // stationary at this bandwidth
        }
    }

    // Back to the plain LAB frame: A and W carry over, the translation picks
    // up the centring, and the control points are the raw lattice.
    TpsTransform out;
    out.control_points.resize(static_cast<size_t>(m));
    out.weights.resize(static_cast<size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
        out.control_points[static_cast<size_t>(i)] = {c_raw(i, 0), c_raw(i, 1),
                                                      c_raw(i, 2)};
        for (int j = 0; j < 3; ++j)
            out.weights[static_cast<size_t>(i)][j] = th.W(i, j);
    }
    const Vector3d t_raw = mu.transpose() - th.A * mu.transpose() + s * th.t;
    for (int j = 0; j < 3; ++j) {
        out.translation[j] = t_raw(j);
        for (int l = 0; l < 3; ++l) out.affine[j][l] = th.A(j, l);
    }
    return out;
}

Image recolour_image(const Image& linear_rgb, const TpsTransform& tps,
                     GamutStats* stats) {
    if (linear_rgb.channels != 3)
        throw std::invalid_argument("recolour_image: image must have 3 channels");
    const Image lab = rgb_to_lab(linear_rgb);

    constexpr int kN = 33;
    constexpr double kLo[3] = {0.0, -128.0, -128.0};
    constexpr double kHi[3] = {100.0, 127.0, 127.0};
    std::vector<std::array<double, 3>> table(
        static_cast<size_t>(kN) * kN * kN);
    for (int i = 0; i < kN; ++i)
        for (int j = 0; j < kN; ++j)
            for (int k = 0; k < kN; ++k) {
                const Lab node{kLo[0] + i * (kHi[0] - kLo[0]) / (kN - 1),
                               kLo[1] + j * (kHi[1] - kLo[1]) / (kN - 1),
                               kLo[2] + k * (kHi[2] - kLo[2]) / (kN - 1)};
                const Lab v = tps_apply(tps, node);
                table[(static_cast<size_t>(i) * kN + j) * kN + k] = {v.L, v.a,
                                                                     v.b};
            }

    Image out(lab.width, lab.height, 3);
    for (int y = 0; y < lab.height; ++y)
        for (int x = 0; x < lab.width; ++x) {
            int idx[3];
            double frac[3];
            for (int a = 0; a < 3; ++a) {
                const double v =
                    std::clamp(static_cast<double>(lab.at(x, y, a)), kLo[a],
                               kHi[a]);
                const double u = (v - kLo[a]) / (kHi[a] - kLo[a]) * (kN - 1);
                idx[a] = std::min(static_cast<int>(u), kN - 2);
                frac[a] = u - idx[a];
            }
            for (int c = 0; c < 3; ++c) {
                double acc = 0;
                for (int di = 0; di < 2; ++di)
                    for (int dj = 0; dj < 2; ++dj)
                        for (int dk = 0; dk < 2; ++dk) {
                            const double w =
                                (di ? frac[0] : 1 - frac[0]) *
                                (dj ? frac[1] : 1 - frac[1]) *
                                (dk ? frac[2] : 1 - frac[2]);
                            acc += w * table[(static_cast<size_t>(idx[0] + di) *
                                                  kN +
                                              (idx[1] + dj)) *
                                                 kN +
                                             (idx[2] + dk)][c];
                        }
                out.at(x, y, c) = static_cast<float>(acc);
            }
        }
    return lab_to_rgb(out, kD65, stats);
}

void save_transfer(std::ostream& os, const TpsTransform& tps) {
    os << "tps1 " << tps.control_points.size() << "\n"
       << std::setprecision(17);
    for (const Lab& c : tps.control_points)
        os << c.L << " " << c.a << " " << c.b << "\n";
    for (const std::array<double, 3>& w : tps.weights)
        os << w[0] << " " << w[1] << " " << w[2] << "\n";
    for (int j = 0; j < 3; ++j)
        os << tps.affine[j][0] << " " << tps.affine[j][1] << " "
           << tps.affine[j][2] << "\n";
    os << tps.translation[0] << " " << tps.translation[1] << " "
       << tps.translation[2] << "\n";
}

TpsTransform load_transfer(std::istream& is) {
    std::string tag;
    size_t m = 0;
    if (!(is >> tag >> m) || tag != "tps1")
        throw std::runtime_error("load_transfer: not a transform stream");
    TpsTransform tps;
    tps.control_points.resize(m);
    tps.weights.resize(m);
    for (Lab& c : tps.control_points) is >> c.L >> c.a >> c.b;
    for (std::array<double, 3>& w : tps.weights) is >> w[0] >> w[1] >> w[2];
    for (int j = 0; j < 3; ++j)
        is >> tps.affine[j][0] >> tps.affine[j][1] >> tps.affine[j][2];
    is >> tps.translation[0] >> tps.translation[1] >> tps.translation[2];
    if (!is) throw std::runtime_error("load_transfer: malformed transform");
    return tps;
}

} // namespace lf::transfer
