#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <vector>

namespace treexp {

struct LbfgsOptions {
    int max_iterations = 600;
    double grad_tol = 1e-11;  // infinity norm
    int history = 10;
    int max_line_search = 60;
};

struct LbfgsResult {
    std::vector<double> x;
    double f = 0.0;
    double grad_inf_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Limited-memory BFGS with Armijo backtracking.  `fg` evaluates the
/// objective at x and fills grad; dimensions are small here (the free
/// parameters of a 3- or 4-variable probability table), so simplicity
/// beats sophistication in the line search.
template <typename FG>
LbfgsResult minimize_lbfgs(FG&& fg, std::vector<double> x0, const LbfgsOptions& opt = {}) {
    const std::size_t n = x0.size();
    LbfgsResult res;
    res.x = std::move(x0);
    std::vector<double> g(n), gn(n), xn(n), q(n), r(n), d(n);
    res.f = fg(res.x, g);

    std::deque<std::vector<double>> S, Y;
    std::deque<double> rho;

    auto inf_norm = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    };
    auto dot = [n](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
        return s;
    };

    for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
        res.grad_inf_norm = inf_norm(g);
        if (res.grad_inf_norm <= opt.grad_tol) {
            res.converged = true;
            return res;
        }

        // two-loop recursion
        q = g;
        std::vector<double> alpha(S.size());
        for (std::size_t i = S.size(); i-- > 0;) {
            alpha[i] = rho[i] * dot(S[i], q);
            for (std::size_t j = 0; j < n; ++j) q[j] -= alpha[i] * Y[i][j];
        }
        double scale = 1.0;
        if (!S.empty()) scale = dot(S.back(), Y.back()) / dot(Y.back(), Y.back());
        for (std::size_t j = 0; j < n; ++j) r[j] = scale * q[j];
        for (std::size_t i = 0; i < S.size(); ++i) {
            const double beta = rho[i] * dot(Y[i], r);
            for (std::size_t j = 0; j < n; ++j) r[j] += (alpha[i] - beta) * S[i][j];
        }
        for (std::size_t j = 0; j < n; ++j) d[j] = -r[j];

        double gd = dot(g, d);
        if (!(gd < 0.0)) {  // not a descent direction; fall back to steepest descent
            for (std::size_t j = 0; j < n; ++j) d[j] = -g[j];
            gd = -dot(g, g);
        }

        // Armijo backtracking
        double t = 1.0, fn = res.f;
        bool accepted = false;
        for (int ls = 0; ls < opt.max_line_search; ++ls) {
            for (std::size_t j = 0; j < n; ++j) xn[j] = res.x[j] + t * d[j];
            fn = fg(xn, gn);
            if (std::isfinite(fn) && fn <= res.f + 1e-4 * t * gd) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // no progress possible at machine precision
            res.converged = res.grad_inf_norm <= 1e3 * opt.grad_tol;
            return res;
        }

        // curvature update
        double sy = 0.0, ss = 0.0, yy = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double s = xn[j] - res.x[j];
            const double y = gn[j] - g[j];
            sy += s * y;
            ss += s * s;
            yy += y * y;
        }
        if (sy > 1e-14 * std::sqrt(ss) * std::sqrt(yy) && sy > 0.0) {
            std::vector<double> s(n), y(n);
            for (std::size_t j = 0; j < n; ++j) {
                s[j] = xn[j] - res.x[j];
                y[j] = gn[j] - g[j];
            }
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > opt.history) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }

        const bool stalled = std::abs(fn - res.f) <= 1e-16 * (1.0 + std::abs(res.f)) && ss < 1e-28;
        res.x.swap(xn);
        res.f = fn;
        g.swap(gn);
        if (stalled) {
            res.grad_inf_norm = inf_norm(g);
            res.converged = true;
            return res;
        }
    }
    res.grad_inf_norm = inf_norm(g);
    return res;
}

}  // namespace treexp
