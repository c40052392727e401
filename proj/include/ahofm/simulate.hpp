#pragma once

#include <ahofm/basis.hpp>
#include <ahofm/dataset.hpp>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ahofm {

enum class SimulationKind { bivariate_study, scaling, interp3d };

SimulationKind parse_simulation_kind(const std::string& name);
std::string to_string(SimulationKind kind);

/// One ground-truth tensor product spline term.
struct TruthTerm
{
    std::vector<int> subset;
    std::vector<SplineSpec> specs; // one per subset member
    Eigen::VectorXd coefficients;

    double value(std::span<const double> member_values) const;
    double evaluate_row(std::span<const double> x) const;
};

struct SimulationParams
{
    int n = 0;        // 0 selects the kind's default size
    int p = 0;        // 0 selects the kind's default feature count
    int n_test = 0;
    int grid_size = 25;
    double snr = 0.5;
    double grid_lo = -2.0;
    double grid_hi = 2.0;
};

struct Simulation
{
    SimulationKind kind = SimulationKind::bivariate_study;
    Dataset data;
    Dataset test;
    std::vector<TruthTerm> terms;
    Eigen::VectorXd signal;      // noiseless mean of data rows
    Eigen::VectorXd test_signal;
    double noise_sd = 0.0;
    std::vector<double> grid;
    std::vector<Eigen::MatrixXd> truth_grids; // per two-feature term, grid x grid
};

/// bivariate_study: standard normal features, one random tensor product
/// surface per feature pair, gaussian noise scaled to the requested
/// signal-to-noise ratio. scaling: standard normal features with a smooth
/// additive plus pairwise signal. interp3d: four named uniform features,
/// every 3-way tensor product effect, noise sd 0.1.
Simulation simulate(SimulationKind kind, const SimulationParams& params, std::uint64_t seed);

/// Long-form CSV: term,x_a,x_b,value.
void write_truth_grids_csv(std::ostream& out, const Simulation& sim);

} // namespace ahofm
