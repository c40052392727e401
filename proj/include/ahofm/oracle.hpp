#pragma once

#include <ahofm/basis.hpp>
#include <ahofm/dataset.hpp>
#include <ahofm/smoothing.hpp>

#include <span>
#include <vector>

namespace ahofm {

/// Row-wise Kronecker design and Kronecker-sum penalty of one tensor
/// product term. The first feature of the subset varies slowest.
struct TpsDesign
{
    std::vector<int> subset;
    Eigen::MatrixXd design;
    Eigen::MatrixXd penalty;
};

constexpr Eigen::Index kMaxTpsColumns = 10'000;
constexpr Eigen::Index kMaxGamColumns = 20'000;

Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Kronecker product of one row from each basis (in subset order).
Eigen::RowVectorXd kronecker_row(std::span<const Eigen::VectorXd> rows);

/// bases/penalties are indexed by feature; lambdas holds one value per
/// member of the subset.
TpsDesign tps_design(std::span<const BasisMatrix> bases, std::span<const PenaltyMatrix> penalties,
                     std::span<const double> lambdas, std::vector<int> subset);

/// Penalized least-squares GAM with an intercept and one tensor product
/// (or univariate) smooth per subset.
struct ExactGam
{
    double intercept = 0.0;
    std::vector<std::vector<int>> subsets;
    std::vector<Eigen::VectorXd> coefficients;
    std::vector<SplineSpec> specs;
    double normal_residual = 0.0;
    bool ridged = false;

    /// Term value at the subset's feature values (in subset order).
    double term_value(std::size_t term, std::span<const double> values) const;
    double predict_row(std::span<const double> x) const;
    /// Surface of a two-feature term on grid_a x grid_b.
    Eigen::MatrixXd pair_surface(std::size_t term, std::span<const double> grid_a, std::span<const double> grid_b) const;
};

/// Solves (X^T X + P) beta = X^T y. Each subset of size d takes the
/// marginal lambdas lambda(d, j, 0) from the table. Every term is
/// constrained to sum to zero over the training rows, so the constant lives
/// in the intercept; overlapping terms that still leave the system singular
/// get a 1e-8 ridge and a warning.
ExactGam fit_exact_gam(const Dataset& data, const std::vector<std::vector<int>>& subsets,
                       const SmoothingTable& table, std::span<const SplineSpec> specs);

/// Mean squared difference of two grids after centering each to mean zero.
double surface_mse(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth);

} // namespace ahofm
