#pragma once

#include <ahofm/core.hpp>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace ahofm {

struct BenchOptions
{
    std::vector<int> p_list{3, 6, 9, 12};
    std::vector<int> n_list{6000, 12000, 18000};
    int epochs = 3;
    int repeats = 3;
    int batch_size = 128;
    ModelConfig config; // degree/factors default to D=2, F=5
    std::uint64_t seed = 1;
    std::size_t memory_ceiling_bytes = std::size_t{2} << 30;
};

/// seconds is the median wall time of init + training over the repeats.
/// basis_bytes counts the cached basis matrices (n x sum_j M_j doubles);
/// peak_bytes adds the phi cache and the optimizer's parameter-sized buffers.
struct BenchRow
{
    int p = 0;
    int n = 0;
    double seconds = 0.0;
    std::size_t peak_bytes = 0;
    std::size_t basis_bytes = 0;
};

/// Accounted storage for one configuration, before anything is allocated.
std::size_t estimate_bench_bytes(const ModelConfig& config, int p, int n);

std::vector<BenchRow> run_bench(const BenchOptions& options);

void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows);

} // namespace ahofm
