#pragma once

#include <span>
#include <string>
#include <vector>

namespace quest {

struct ScalingPoint {
    double tokens = 0.0; // D
    double loss = 0.0;   // L(D)
};

// L(D) = alpha * exp(-beta * D) + gamma
struct ScalingFit {
    std::string model_label;
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double rmse = 0.0;
    bool converged = false;
    // False when the losses are flat (range < 1e-9) and beta is undetermined.
    bool identifiable = true;
    std::size_t iterations = 0;
};

struct ScalingFitOptions {
    std::size_t max_iterations = 10000;
    double relative_tolerance = 1e-10;
};

// Damped Gauss-Newton (Levenberg-Marquardt) least squares. D is rescaled by
// its largest magnitude internally. Initialization: gamma0 = min L - 1e-6,
// alpha0 = L(D_min) - gamma0, beta0 from regressing ln(L - gamma0) on D.
// Throws DomainError for fewer than 4 points or duplicate D.
ScalingFit fit_scaling(std::span<const ScalingPoint> points, std::string model_label = {},
                       const ScalingFitOptions& options = {});

// Throws DomainError when the fit did not converge.
double predict_loss(const ScalingFit& fit, double tokens);
// (observed - predicted) / observed
double relative_error(const ScalingFit& fit, double tokens, double observed);

// Rows "D_tokens,loss"; a non-numeric first row is treated as a header.
std::vector<ScalingPoint> read_scaling_csv(const std::string& path);

} // namespace quest
