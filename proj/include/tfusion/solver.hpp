#pragma once

#include "tfusion/geometry.hpp"
#include "tfusion/operators.hpp"
#include "tfusion/types.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <vector>

namespace tfusion {

enum class NormMode {
    Unsquared, // cone form: || A_tau i - d ||_2 etc., as printed
    Squared    // least-squares form
};

struct SolverConfig {
    double alpha = 1.0;  // CCD similarity weight
    double beta = 0.0;   // per-bin histogram similarity weight
    double gamma = 0.0;  // elementwise L1 weight
    double delta = 0.0;  // anisotropic 2D TV weight
    NormMode norm_mode = NormMode::Unsquared;
    std::uint32_t max_iters = 2000;
    double tol = 1e-5;       // relative primal change
    double step_ratio = 1.0; // dual step = step_ratio / L
    bool record_trace = false;

    void validate() const {
        if (alpha < 0 || beta < 0 || gamma < 0 || delta < 0)
            throw std::invalid_argument("weights must be >= 0");
        if (max_iters < 1)
            throw std::invalid_argument("max_iters must be >= 1");
        if (!(tol > 0))
            throw std::invalid_argument("tol must be > 0");
        if (!(step_ratio > 0))
            throw std::invalid_argument("step_ratio must be > 0");
    }

    static SolverConfig lidar_preset() {
        SolverConfig c;
        c.alpha = 1.0;
        c.beta = 1e-4;
        c.gamma = 1e-2;
        c.delta = 0.0;
        return c;
    }

    static SolverConfig flim_preset() {
        SolverConfig c;
        c.alpha = 1.0;
        c.beta = 1e-3;
        c.gamma = 1e-7;
        c.delta = 1e-5;
        return c;
    }
};

struct ObjectiveTerms {
    double data = 0.0; // ||A_tau i - d||
    double ccd = 0.0;  // ||T i - c||
    double hist = 0.0; // ||K_h i - K_l d||
    double l1 = 0.0;   // ||i||_1
    double tv = 0.0;   // ||grad_2D i||_1
    double total = 0.0;
};

struct SolveReport {
    std::uint32_t iterations = 0;
    ObjectiveTerms objective;
    double relative_change = 0.0;
    double wall_time_s = 0.0;
    bool converged = false;
    std::vector<std::pair<std::uint32_t, double>> trace;
};

struct SolverDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline IntensityImage normalize_ccd(const IntensityImage& c,
                                    const SpadMeasurement& d) {
    double sum_c = 0.0, sum_d = 0.0;
    for (float v : c.values)
        sum_c += v;
    for (float v : d.values)
        sum_d += v;
    if (!(sum_c > 0.0) || !(sum_d > 0.0))
        throw std::invalid_argument("normalize_ccd: zero-sum input");
    double s = sum_d / sum_c;
    std::vector<float> scaled(c.values.size());
    for (std::size_t i = 0; i < scaled.size(); ++i)
        scaled[i] = static_cast<float>(c.values[i] * s);
    return IntensityImage(c.rows, c.cols, std::move(scaled));
}

namespace detail {

inline double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

// residual norm term: ||x - t||_2, squared or not
inline double residual_term(const std::vector<double>& x,
                            const std::vector<double>& target, NormMode mode) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = x[i] - target[i];
        s += r * r;
    }
    return mode == NormMode::Squared ? s : std::sqrt(s);
}

} // namespace detail

inline ObjectiveTerms objective_terms(const std::vector<double>& x,
                                      std::uint32_t rows, std::uint32_t cols,
                                      std::uint32_t bins,
                                      const std::vector<double>& d_vec,
                                      const std::vector<double>& c_vec,
                                      const std::vector<double>& kl_d,
                                      const FusionGeometry& g,
                                      const SolverConfig& cfg,
                                      unsigned threads = 1) {
    ObjectiveTerms t;
    auto ax = apply_A_tau_raw(x, bins, g, threads);
    t.data = detail::residual_term(ax, d_vec, cfg.norm_mode);
    auto ti = integrate_time_raw(x, rows, cols, bins);
    t.ccd = detail::residual_term(ti, c_vec, cfg.norm_mode);
    auto kh = integrate_space_raw(x, rows, cols, bins);
    t.hist = detail::residual_term(kh, kl_d, cfg.norm_mode);
    for (double v : x)
        t.l1 += std::abs(v);
    auto grad = gradient_2d_raw(x, rows, cols, bins);
    for (std::size_t i = 0; i < grad.drow.size(); ++i)
        t.tv += std::abs(grad.drow[i]) + std::abs(grad.dcol[i]);
    t.total = t.data + cfg.alpha * t.ccd + cfg.beta * t.hist +
              cfg.gamma * t.l1 + cfg.delta * t.tv;
    return t;
}

// Convenience overload on domain types; c is used as given (normalize_ccd
// is the caller's decision).
inline ObjectiveTerms objective(const TransientCube& i,
                                const SpadMeasurement& d,
                                const IntensityImage& c,
                                const FusionGeometry& g,
                                const SolverConfig& cfg, unsigned threads = 1) {
    if (i.rows != g.high_rows || i.cols != g.high_cols ||
        d.rows != g.low_rows || d.cols != g.low_cols || d.bins != i.bins ||
        c.rows != g.high_rows || c.cols != g.high_cols)
        throw std::invalid_argument("objective: shape mismatch");
    std::vector<double> x(i.values.begin(), i.values.end());
    std::vector<double> dv(d.values.begin(), d.values.end());
    std::vector<double> cv(c.values.begin(), c.values.end());
    auto kl = integrate_space_raw(dv, d.rows, d.cols, d.bins);
    return objective_terms(x, i.rows, i.cols, i.bins, dv, cv, kl, g, cfg,
                           threads);
}

namespace detail {

// Stacked operator K = [A_tau; T; K_h; grad] with zero-weight components
// dropped. Duals are stored concatenated per component.
struct StackedOp {
    const FusionGeometry* g;
    std::uint32_t rows, cols, bins;
    bool use_ccd, use_hist, use_tv;
    unsigned threads;

    std::size_t n_primal() const {
        return static_cast<std::size_t>(rows) * cols * bins;
    }
    std::size_t n_data() const {
        return static_cast<std::size_t>(g->low_rows) * g->low_cols * bins;
    }
    std::size_t n_ccd() const {
        return use_ccd ? static_cast<std::size_t>(rows) * cols : 0;
    }
    std::size_t n_hist() const { return use_hist ? bins : 0; }
    std::size_t n_tv() const { return use_tv ? 2 * n_primal() : 0; }
    std::size_t n_dual() const {
        return n_data() + n_ccd() + n_hist() + n_tv();
    }

    void forward(const std::vector<double>& x, std::vector<double>& y) const {
        auto ax = apply_A_tau_raw(x, bins, *g, threads);
        std::size_t off = 0;
        std::copy(ax.begin(), ax.end(), y.begin() + off);
        off += ax.size();
        if (use_ccd) {
            auto ti = integrate_time_raw(x, rows, cols, bins);
            std::copy(ti.begin(), ti.end(), y.begin() + off);
            off += ti.size();
        }
        if (use_hist) {
            auto kh = integrate_space_raw(x, rows, cols, bins);
            std::copy(kh.begin(), kh.end(), y.begin() + off);
            off += kh.size();
        }
        if (use_tv) {
            auto gr = gradient_2d_raw(x, rows, cols, bins);
            std::copy(gr.drow.begin(), gr.drow.end(), y.begin() + off);
            off += gr.drow.size();
            std::copy(gr.dcol.begin(), gr.dcol.end(), y.begin() + off);
            off += gr.dcol.size();
        }
    }

    void adjoint(const std::vector<double>& y, std::vector<double>& x) const {
        std::size_t off = 0;
        std::vector<double> part(y.begin(), y.begin() + n_data());
        auto acc = adjoint_A_tau_raw(part, bins, *g, threads);
        off += n_data();
        if (use_ccd) {
            std::vector<double> img(y.begin() + off,
                                    y.begin() + off + n_ccd());
            auto back = integrate_time_adjoint_raw(img, rows, cols, bins);
            for (std::size_t i = 0; i < acc.size(); ++i)
                acc[i] += back[i];
            off += n_ccd();
        }
        if (use_hist) {
            std::vector<double> per_bin(y.begin() + off,
                                        y.begin() + off + n_hist());
            auto back = integrate_space_adjoint_raw(per_bin, rows, cols, bins);
            for (std::size_t i = 0; i < acc.size(); ++i)
                acc[i] += back[i];
            off += n_hist();
        }
        if (use_tv) {
            Gradient2D<double> gr;
            std::size_t n = n_primal();
            gr.drow.assign(y.begin() + off, y.begin() + off + n);
            gr.dcol.assign(y.begin() + off + n, y.begin() + off + 2 * n);
            auto back = gradient_2d_adjoint_raw(gr, rows, cols, bins);
            for (std::size_t i = 0; i < acc.size(); ++i)
                acc[i] += back[i];
        }
        x = std::move(acc);
    }

    // Largest singular value via power iteration on K^T K.
    double operator_norm(std::uint32_t iters = 30, double tol = 1e-4) const {
        std::mt19937_64 rng(0x746675736eULL);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::vector<double> x(n_primal());
        for (double& v : x)
            v = u(rng);
        std::vector<double> y(n_dual()), back;
        double norm = 0.0, prev = 0.0;
        for (std::uint32_t it = 0; it < iters; ++it) {
            double nx = l2_norm(x);
            if (nx == 0.0)
                return 0.0;
            for (double& v : x)
                v /= nx;
            forward(x, y);
            adjoint(y, back);
            norm = std::sqrt(l2_norm(back));
            x = back;
            if (it > 0 && std::abs(norm - prev) <= tol * std::max(norm, 1e-30))
                break;
            prev = norm;
        }
        return norm;
    }
};

// prox of sigma * F* for a term  w * ||y - t||  (unsquared: project onto the
// radius-w ball after the translation step) or  w * ||y - t||^2  (squared).
inline void prox_dual_l2(std::vector<double>& y, std::size_t off,
                         std::size_t len, const std::vector<double>& target,
                         double sigma, double weight, NormMode mode) {
    if (mode == NormMode::Unsquared) {
        double norm = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            y[off + i] -= sigma * target[i];
            norm += y[off + i] * y[off + i];
        }
        norm = std::sqrt(norm);
        if (norm > weight) {
            double s = weight / norm;
            for (std::size_t i = 0; i < len; ++i)
                y[off + i] *= s;
        }
    } else {
        double denom = 1.0 + sigma / (2.0 * weight);
        for (std::size_t i = 0; i < len; ++i)
            y[off + i] = (y[off + i] - sigma * target[i]) / denom;
    }
}

} // namespace detail

// First-order primal-dual solve of the fusion objective over the stacked
// operator [A_tau; T; K_h; grad_2D], with the nonnegativity constraint
// enforced by projection every iteration. Returns the best-objective iterate
// seen, so the exit objective never exceeds the initializer's.
inline std::pair<TransientCube, SolveReport>
reconstruct(const SpadMeasurement& d, const IntensityImage& c,
            const FusionGeometry& g, const SolverConfig& cfg,
            unsigned threads = 1) {
    cfg.validate();
    g.validate();
    if (d.rows != g.low_rows || d.cols != g.low_cols ||
        c.rows != g.high_rows || c.cols != g.high_cols)
        throw std::invalid_argument("reconstruct: shape mismatch");
    auto t_start = std::chrono::steady_clock::now();

    std::uint32_t rows = g.high_rows, cols = g.high_cols, bins = d.bins;
    std::vector<double> d_vec(d.values.begin(), d.values.end());
    std::vector<double> c_vec(c.values.begin(), c.values.end());
    auto kl_d = integrate_space_raw(d_vec, d.rows, d.cols, bins);

    detail::StackedOp op{&g,          rows,          cols,
                         bins,        cfg.alpha > 0, cfg.beta > 0,
                         cfg.delta > 0, threads};

    double L = op.operator_norm();
    if (L == 0.0)
        throw SolverDivergence("stacked operator norm is zero");
    L *= 1.001; // safety margin on the power-iteration estimate
    double sigma = cfg.step_ratio / L;
    double tau = 1.0 / (cfg.step_ratio * L);

    // data-driven initializer, rescaled to the measured photon count
    std::vector<double> x;
    {
        auto x0 = adjoint_A_tau_raw(d_vec, bins, g, threads);
        double s0 = 0.0, sd = 0.0;
        for (double v : x0)
            s0 += v;
        for (double v : d_vec)
            sd += v;
        if (s0 > 0.0) {
            double s = sd / s0;
            for (double& v : x0)
                v = std::max(0.0, v * s);
        }
        x = std::move(x0);
    }

    auto eval = [&](const std::vector<double>& xv) {
        return objective_terms(xv, rows, cols, bins, d_vec, c_vec, kl_d, g,
                               cfg, threads);
    };

    SolveReport report;
    std::vector<double> best_x = x;
    ObjectiveTerms best_obj = eval(x);
    if (cfg.record_trace)
        report.trace.emplace_back(0, best_obj.total);

    std::vector<double> y(op.n_dual(), 0.0);
    std::vector<double> x_bar = x;
    std::vector<double> kx(op.n_dual()), kty(op.n_primal());

    const std::uint32_t check_every = 25;
    double rel_change = std::numeric_limits<double>::infinity();
    std::uint32_t iter = 0;
    for (; iter < cfg.max_iters; ++iter) {
        // dual ascent + prox
        op.forward(x_bar, kx);
        for (std::size_t i = 0; i < y.size(); ++i)
            y[i] += sigma * kx[i];
        std::size_t off = 0;
        detail::prox_dual_l2(y, off, op.n_data(), d_vec, sigma, 1.0,
                             cfg.norm_mode);
        off += op.n_data();
        if (op.use_ccd) {
            detail::prox_dual_l2(y, off, op.n_ccd(), c_vec, sigma, cfg.alpha,
                                 cfg.norm_mode);
            off += op.n_ccd();
        }
        if (op.use_hist) {
            detail::prox_dual_l2(y, off, op.n_hist(), kl_d, sigma, cfg.beta,
                                 cfg.norm_mode);
            off += op.n_hist();
        }
        if (op.use_tv) {
            // L1 dual: clamp to [-delta, delta] in both norm modes
            for (std::size_t i = off; i < y.size(); ++i)
                y[i] = std::clamp(y[i], -cfg.delta, cfg.delta);
        }

        // primal descent + prox of gamma*||.||_1 + indicator(x >= 0)
        op.adjoint(y, kty);
        double diff2 = 0.0, xnorm2 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double xn = x[i] - tau * kty[i] - tau * cfg.gamma;
            xn = std::max(0.0, xn);
            double dxi = xn - x[i];
            diff2 += dxi * dxi;
            xnorm2 += x[i] * x[i];
            x_bar[i] = 2.0 * xn - x[i]; // extrapolation
            x[i] = xn;
        }
        rel_change = std::sqrt(diff2) / std::max(std::sqrt(xnorm2), 1e-12);
        if (!std::isfinite(rel_change))
            throw SolverDivergence("non-finite iterate; step sizes diverged");

        if ((iter + 1) % check_every == 0 || iter + 1 == cfg.max_iters ||
            rel_change < cfg.tol) {
            auto obj = eval(x);
            if (!std::isfinite(obj.total))
                throw SolverDivergence("non-finite objective");
            if (cfg.record_trace)
                report.trace.emplace_back(iter + 1, obj.total);
            if (obj.total < best_obj.total) {
                best_obj = obj;
                best_x = x;
            }
        }
        if (rel_change < cfg.tol) {
            report.converged = true;
            ++iter;
            break;
        }
    }

    report.iterations = iter;
    report.objective = best_obj;
    report.relative_change = rel_change;
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      t_start)
            .count();

    std::vector<float> out(best_x.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(std::max(0.0, best_x[i]));
    TransientCube cube(rows, cols, bins, d.bin_width_ps, std::move(out));
    return {std::move(cube), std::move(report)};
}

} // namespace tfusion
