#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace ahofm {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Clamped B-spline basis for one feature.
///
/// Knots are stored in full (boundary knots repeated degree+1 times), so a
/// spec is self-contained and can be persisted and re-evaluated exactly.
struct SplineSpec
{
    int feature_index = 0;
    int degree = 3;
    int num_basis = 10;
    int penalty_order = 2;
    std::vector<double> knots;
    double domain_lo = 0.0;
    double domain_hi = 1.0;

    /// Throws ahofm::Error when any invariant is violated.
    void validate() const;

    bool operator==(const SplineSpec&) const = default;
};

/// n x M_j matrix of basis evaluations for one data column. Rows are
/// contiguous so a row can be handed out as a span.
struct BasisMatrix
{
    RowMatrix values;
    SplineSpec spec;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
    std::span<const double> row(Eigen::Index i) const
    {
        return {values.data() + i * values.cols(), static_cast<std::size_t>(values.cols())};
    }
    std::size_t bytes() const { return static_cast<std::size_t>(values.size()) * sizeof(double); }
};

/// Difference penalty P = D^T D.
struct PenaltyMatrix
{
    Eigen::MatrixXd values;
    int order = 2;
};

/// Equidistant interior knots over [min(column), max(column)] with
/// coincident boundary knots.
SplineSpec make_spec(std::span<const double> column, int num_basis, int degree = 3,
                     int penalty_order = 2, int feature_index = 0);

/// Writes the M_j basis values at x into out. x is clamped to the domain.
void eval_basis_into(double x, const SplineSpec& spec, std::span<double> out);

Eigen::VectorXd eval_basis(double x, const SplineSpec& spec);

BasisMatrix eval_basis_matrix(std::span<const double> column, const SplineSpec& spec);

PenaltyMatrix diff_penalty(int num_basis, int order);

} // namespace ahofm
