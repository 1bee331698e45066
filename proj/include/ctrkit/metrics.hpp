#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ctrkit/errors.hpp"

namespace ctrkit {

// Probability that a random positive outscores a random negative, ties
// counted half. Sort-and-rank, O(n log n). Throws MetricError when labels
// contain a single class.
double auc(std::span<const std::uint8_t> labels, std::span<const double> scores);

// Mean binary cross entropy; scores are clamped to [1e-7, 1 - 1e-7].
double logloss(std::span<const std::uint8_t> labels, std::span<const double> scores);

struct WelchResult {
    double t = 0.0;
    double dof = 0.0;
    double p = 1.0;  // two-tailed
};

// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of freedom.
WelchResult welch_t(std::span<const double> a, std::span<const double> b);

// m x m Pearson correlation matrix of the columns of a row-major n x m
// matrix. Columns with zero variance get 0 everywhere (diagonal included).
std::vector<double> feature_correlation(std::span<const double> rows, std::size_t n, std::size_t m);

// Regularized incomplete beta function I_x(a, b); exposed for tests.
double incomplete_beta(double a, double b, double x);

}  // namespace ctrkit
