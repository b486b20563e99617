#include "stablesem/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stablesem {

namespace {

double relative_change(double before, double after)
{
    const double scale = std::max(std::abs(before), std::abs(after));
    if (scale == 0.0) return 0.0;
    return std::abs(before - after) / scale;
}

} // namespace

Vector central_difference_gradient(const Objective& f, const Vector& x, double h)
{
    Vector g(x.size());
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = f(probe, nullptr);
        probe[i] = x[i] - h;
        const double down = f(probe, nullptr);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

MinimizeResult minimize_bfgs(const Objective& f, Vector x0, const MinimizeOptions& options)
{
    constexpr double c1 = 1e-4;
    const auto n = x0.size();

    MinimizeResult out;
    out.x = std::move(x0);
    out.gradient = Vector::Zero(n);
    out.value = f(out.x, &out.gradient);
    if (!std::isfinite(out.value)) {
        out.reason = StopReason::infeasible_start;
        out.hit_infeasible = true;
        return out;
    }
    if (n == 0 || out.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
        out.converged = true;
        out.reason = StopReason::gradient;
        return out;
    }

    Matrix h = Matrix::Identity(n, n);
    bool fresh_hessian = true;
    Vector trial(n);
    Vector trial_gradient(n);

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        Vector direction = -(h * out.gradient);
        double slope = out.gradient.dot(direction);
        if (!(slope < 0.0)) {
            h.setIdentity();
            fresh_hessian = true;
            direction = -out.gradient;
            slope = out.gradient.dot(direction);
        }

        // first step along steepest descent is scaled to unit length
        double alpha = fresh_hessian && iter == 0 ? std::min(1.0, 1.0 / direction.norm()) : 1.0;
        bool accepted = false;
        double trial_value = 0.0;
        for (int ls = 0; ls < 60; ++ls) {
            trial = out.x + alpha * direction;
            trial_value = f(trial, nullptr);
            if (!std::isfinite(trial_value)) {
                out.hit_infeasible = true;
                alpha *= 0.25;
                continue;
            }
            if (trial_value <= out.value + c1 * alpha * slope) {
                accepted = true;
                break;
            }
            // safeguarded quadratic interpolation
            const double denom = 2.0 * (trial_value - out.value - alpha * slope);
            double next = denom > 0.0 ? -slope * alpha * alpha / denom : 0.5 * alpha;
            alpha = std::clamp(next, 0.1 * alpha, 0.5 * alpha);
        }

        if (!accepted) {
            if (!fresh_hessian) {
                h.setIdentity();
                fresh_hessian = true;
                continue;
            }
            out.iterations = iter;
            out.reason = StopReason::line_search;
            out.converged = out.gradient.lpNorm<Eigen::Infinity>() < 1e-3;
            return out;
        }

        trial_value = f(trial, &trial_gradient);
        const Vector s = trial - out.x;
        const Vector y = trial_gradient - out.gradient;
        const double previous = out.value;
        out.x = trial;
        out.value = trial_value;
        out.gradient = trial_gradient;
        out.iterations = iter + 1;

        if (out.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
            out.converged = true;
            out.reason = StopReason::gradient;
            return out;
        }
        if (relative_change(previous, out.value) < options.relative_tolerance) {
            out.converged = true;
            out.reason = StopReason::relative_change;
            return out;
        }

        const double ys = y.dot(s);
        if (ys > 1e-12 * y.norm() * s.norm()) {
            if (fresh_hessian) {
                h = Matrix::Identity(n, n) * (ys / y.squaredNorm());
                fresh_hessian = false;
            }
            const double rho = 1.0 / ys;
            const Vector hy = h * y;
            // H <- (I - rho s y') H (I - rho y s') + rho s s'
            h += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
        }
    }
    out.reason = StopReason::max_iterations;
    return out;
}

} // namespace stablesem
