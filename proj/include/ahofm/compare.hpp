#pragma once

#include <ahofm/config.hpp>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace ahofm {

struct CompareOptions
{
    std::vector<int> n_list{2000};
    std::vector<int> factor_list{1, 5, 15};
    int seeds = 5;
    std::uint64_t base_seed = 1;
    int p = 5;
    int n_test = 2000;
    int grid_size = 25;
    RunConfig run; // degree is forced to 2; factors come from factor_list
};

/// One AFM fit against the exact GAM on the same simulated data. Surface
/// MSEs are averaged over all feature pairs; test MSEs are against noisy
/// held-out responses.
struct CompareRow
{
    int n = 0;
    int replicate = 0;
    std::uint64_t seed = 0;
    int factors = 0;
    double afm_surface_mse = 0.0;
    double gam_surface_mse = 0.0;
    double afm_test_mse = 0.0;
    double gam_test_mse = 0.0;
};

std::vector<CompareRow> run_compare(const CompareOptions& options);

void write_compare_csv(std::ostream& out, std::span<const CompareRow> rows);

} // namespace ahofm
