#pragma once

#include <ahofm/core.hpp>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ahofm {

/// phi^(d)_{j,f} on a grid: one row per grid value, one column per factor.
Eigen::MatrixXd factor_curves(const Model& model, int degree, int feature, std::span<const double> grid);

/// Univariate smooth B_j(x)^T beta_j on a grid.
Eigen::VectorXd univariate_effect(const Model& model, int feature, std::span<const double> grid);

/// sum_f phi_{k,f}(x_k) phi_{l,f}(x_l) from the degree-d latent tensor.
Eigen::MatrixXd pairwise_surface(const Model& model, int k, int l, std::span<const double> grid_k,
                                 std::span<const double> grid_l, int degree = 2);

/// Reconstructed |J|-variate effect sum_f prod_{t in J} phi^(|J|)_{t,f}(x_t);
/// values are given in subset order.
double term_effect(const Model& model, std::span<const int> subset, std::span<const double> values);

/// Radical inverse of index in the given base (Halton coordinate).
double halton(std::uint64_t index, int base);

struct MarginalRow
{
    double grid_value = 0.0;
    double mean = 0.0;
    double q05 = 0.0;
    double q95 = 0.0;
};

/// For each grid value of the feature, averages the term effect over
/// mc_draws Halton points of the other subset coordinates (inside their
/// training domains) and reports the 5% and 95% quantiles of the spread.
std::vector<MarginalRow> marginal_summary(const Model& model, std::span<const int> subset, int feature,
                                          std::span<const double> grid, int mc_draws = 256);

/// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> values, double prob);

/// Evenly spaced grid over the feature's training domain.
std::vector<double> domain_grid(const SplineSpec& spec, int size);

std::string term_name(const Model& model, std::span<const int> subset);

void write_marginal_header(std::ostream& out);
void write_marginal_rows(std::ostream& out, const std::string& term, const std::string& feature,
                         std::span<const MarginalRow> rows);

} // namespace ahofm
