#include "quest/scaling.hpp"

#include "quest/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace quest {

namespace {

struct Problem {
    Eigen::VectorXd x;
    Eigen::VectorXd y;

    Eigen::VectorXd residuals(const Eigen::Vector3d& theta) const
    {
        return (theta(0) * (-theta(1) * x.array()).exp() + theta(2) - y.array()).matrix();
    }

    Eigen::MatrixXd jacobian(const Eigen::Vector3d& theta) const
    {
        Eigen::MatrixXd j(x.size(), 3);
        const Eigen::ArrayXd e = (-theta(1) * x.array()).exp();
        j.col(0) = e.matrix();
        j.col(1) = (-theta(0) * x.array() * e).matrix();
        j.col(2).setOnes();
        return j;
    }
};

double sse(const Eigen::VectorXd& r)
{
    const double s = r.squaredNorm();
    return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
}

} // namespace

ScalingFit fit_scaling(std::span<const ScalingPoint> points, std::string model_label, const ScalingFitOptions& options)
{
    if (points.size() < 4)
        throw DomainError("fit_scaling: at least 4 points are required");
    std::vector<ScalingPoint> sorted(points.begin(), points.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.tokens < b.tokens; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (!std::isfinite(sorted[i].tokens) || !std::isfinite(sorted[i].loss))
            throw DomainError("fit_scaling: non-finite point");
        if (i > 0 && sorted[i].tokens == sorted[i - 1].tokens)
            throw DomainError("fit_scaling: duplicate D value");
    }

    const auto n = static_cast<Eigen::Index>(sorted.size());
    double scale = 0.0;
    for (const auto& p : sorted)
        scale = std::max(scale, std::abs(p.tokens));
    Problem problem{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        problem.x(i) = sorted[static_cast<std::size_t>(i)].tokens / scale;
        problem.y(i) = sorted[static_cast<std::size_t>(i)].loss;
    }

    ScalingFit fit;
    fit.model_label = std::move(model_label);
    const double min_loss = problem.y.minCoeff();
    const double max_loss = problem.y.maxCoeff();
    if (max_loss - min_loss < 1e-9) {
        fit.gamma = problem.y.mean();
        fit.alpha = 0.0;
        fit.beta = 0.0;
        fit.identifiable = false;
        fit.converged = true;
        fit.rmse = std::sqrt((problem.y.array() - fit.gamma).square().mean());
        return fit;
    }

    const double gamma0 = min_loss - 1e-6;
    const double alpha0 = problem.y(0) - gamma0;
    const Eigen::ArrayXd logs = (problem.y.array() - gamma0).log();
    const double xm = problem.x.mean();
    const double lm = logs.mean();
    const double slope = ((problem.x.array() - xm) * (logs - lm)).sum() / (problem.x.array() - xm).square().sum();
    double beta0 = -slope;
    if (!std::isfinite(beta0) || beta0 <= 0.0)
        beta0 = 1.0;

    Eigen::Vector3d theta(alpha0, beta0, gamma0);
    Eigen::VectorXd r = problem.residuals(theta);
    double cost = sse(r);
    double lambda = 1e-3;
    bool converged = false;
    std::size_t iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        const Eigen::MatrixXd j = problem.jacobian(theta);
        const Eigen::Matrix3d jtj = j.transpose() * j;
        const Eigen::Vector3d grad = j.transpose() * r;
        if (grad.lpNorm<Eigen::Infinity>() == 0.0) {
            converged = true;
            break;
        }
        Eigen::Matrix3d damped = jtj;
        damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
        const Eigen::Vector3d step = damped.ldlt().solve(-grad);
        const Eigen::Vector3d candidate = theta + step;
        const Eigen::VectorXd r_new = problem.residuals(candidate);
        const double cost_new = sse(r_new);
        const double rel_change = step.norm() / std::max(theta.norm(), 1e-300);
        if (cost_new <= cost) {
            theta = candidate;
            r = r_new;
            cost = cost_new;
            lambda = std::max(lambda / 10.0, 1e-12);
            if (rel_change < options.relative_tolerance) {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            // No descent left at machine precision: a stationary point.
            if (lambda > 1e16 || rel_change < options.relative_tolerance * 1e-3) {
                converged = true;
                break;
            }
        }
    }

    fit.alpha = theta(0);
    fit.beta = theta(1) / scale;
    fit.gamma = theta(2);
    fit.rmse = std::sqrt(cost / static_cast<double>(n));
    fit.iterations = iter;
    fit.converged = converged && fit.beta >= 0.0 && std::isfinite(cost);
    return fit;
}

double predict_loss(const ScalingFit& fit, double tokens)
{
    if (!fit.converged)
        throw DomainError("predict_loss: fit did not converge");
    if (std::isinf(tokens) && tokens > 0)
        return fit.gamma;
    return fit.alpha * std::exp(-fit.beta * tokens) + fit.gamma;
}

double relative_error(const ScalingFit& fit, double tokens, double observed)
{
    if (observed == 0.0)
        throw DomainError("relative_error: observed loss is zero");
    return (observed - predict_loss(fit, tokens)) / observed;
}

std::vector<ScalingPoint> read_scaling_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read scaling csv: " + path);
    std::vector<ScalingPoint> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw DataError("scaling csv line " + std::to_string(line_no) + ": expected D_tokens,loss");
        try {
            std::size_t used_a = 0;
            std::size_t used_b = 0;
            const std::string a = line.substr(0, comma);
            const std::string b = line.substr(comma + 1);
            ScalingPoint p{std::stod(a, &used_a), std::stod(b, &used_b)};
            if (a.find_first_not_of(" \t", used_a) != std::string::npos ||
                b.find_first_not_of(" \t", used_b) != std::string::npos)
                throw std::invalid_argument("trailing characters");
            out.push_back(p);
        } catch (const std::invalid_argument&) {
            if (line_no == 1 && out.empty())
                continue;
            throw DataError("scaling csv line " + std::to_string(line_no) + ": not numeric");
        }
    }
    return out;
}

} // namespace quest
