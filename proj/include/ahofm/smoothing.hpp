#pragma once

#include <ahofm/basis.hpp>

#include <map>
#include <span>
#include <vector>

namespace ahofm {

/// Demmler-Reinsch singular values of one feature's (basis, penalty) pair,
/// sorted descending. Values below a relative threshold are snapped to zero
/// so that the zero count equals the penalty null-space dimension.
struct DroSingularValues
{
    Eigen::VectorXd s;
    int feature_index = 0;

    int size() const { return static_cast<int>(s.size()); }
    int null_space_dim() const;
};

/// Smoothing parameters lambda(d, j, f). Degree 1 holds the univariate
/// smooths (a single "factor" per feature).
struct SmoothingTable
{
    std::map<int, double> df_targets;
    std::map<int, std::vector<std::vector<double>>> lambda; // [d][j][f]

    double at(int degree, int feature, int factor) const;
    int num_features() const;
    int num_factors(int degree) const;

    bool operator==(const SmoothingTable&) const = default;
};

DroSingularValues dro(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& penalty);
DroSingularValues dro(const BasisMatrix& basis, const PenaltyMatrix& penalty);

/// Trace of the smoother matrix, sum_j 1 / (1 + lambda s_j).
double dffun(const DroSingularValues& s, double lambda);

/// Inverts dffun by bisection on log10(lambda).
double sv2la(const DroSingularValues& s, double df);

/// Per feature: one DRO, one sv2la per degree, replicated across factors.
/// factor_counts covers degrees >= 2; degree 1 always gets one entry.
SmoothingTable homogeneous_smoothing(std::span<const BasisMatrix> bases,
                                     std::span<const PenaltyMatrix> penalties,
                                     const std::map<int, double>& df_targets,
                                     const std::map<int, int>& factor_counts);

/// tr(2H - H^T H) with H = B (B^T B + lambda P)^{-1} B^T. Evaluated in the
/// M x M space; not used when fitting.
double df_exact(const BasisMatrix& basis, const PenaltyMatrix& penalty, double lambda);

} // namespace ahofm
