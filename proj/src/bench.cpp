#include <ahofm/bench.hpp>
#include <ahofm/error.hpp>
#include <ahofm/simulate.hpp>
#include <ahofm/train.hpp>

#include <algorithm>
#include <chrono>
#include <ostream>

namespace ahofm {
namespace {

constexpr std::size_t kOptimizerCopies = 5; // params, best, gradient, two moments

std::size_t parameter_count(const ModelConfig& config, int p)
{
    std::size_t basis = 0;
    for (int j = 0; j < p; ++j) basis += static_cast<std::size_t>(config.basis_size(j));
    std::size_t count = 1 + basis;
    for (int d = 2; d <= config.max_degree; ++d) count += basis * static_cast<std::size_t>(config.factors(d));
    return count;
}

} // namespace

std::size_t estimate_bench_bytes(const ModelConfig& config, int p, int n)
{
    std::size_t basis = 0;
    for (int j = 0; j < p; ++j) basis += static_cast<std::size_t>(config.basis_size(j));
    std::size_t bytes = static_cast<std::size_t>(n) * basis * sizeof(double);
    for (int d = 2; d <= config.max_degree; ++d)
        bytes += static_cast<std::size_t>(n) * static_cast<std::size_t>(config.factors(d)) *
                 static_cast<std::size_t>(p + d) * sizeof(double);
    return bytes + kOptimizerCopies * parameter_count(config, p) * sizeof(double);
}

std::vector<BenchRow> run_bench(const BenchOptions& options)
{
    if (options.repeats < 1 || options.epochs < 1) throw Error("bench needs at least one repeat and one epoch");
    ModelConfig config = options.config;
    config.validate();

    TrainOptions train;
    train.max_epochs = options.epochs;
    train.patience = options.epochs + 1;
    train.batch_size = options.batch_size;
    train.seed = options.seed;

    std::vector<BenchRow> rows;
    for (int n : options.n_list) {
        for (int p : options.p_list) {
            if (p < 1 || n < 4) throw Error("bench sizes must be positive");
            const auto estimate = estimate_bench_bytes(config, p, n);
            if (estimate > options.memory_ceiling_bytes)
                throw Error("bench configuration p=" + std::to_string(p) + ", n=" + std::to_string(n) + " needs about " +
                            std::to_string(estimate) + " bytes, above the memory ceiling of " +
                            std::to_string(options.memory_ceiling_bytes));

            SimulationParams sp;
            sp.n = n;
            sp.p = p;
            const auto sim = simulate(SimulationKind::scaling, sp, options.seed);

            std::vector<double> times;
            BenchRow row;
            row.p = p;
            row.n = n;
            for (int r = 0; r < options.repeats; ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                const auto state = fit_adam(sim.data, config, train);
                times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
                std::size_t basis = 0;
                for (const auto& spec : state.model.specs) basis += static_cast<std::size_t>(spec.num_basis);
                row.basis_bytes = static_cast<std::size_t>(n) * basis * sizeof(double);
                row.peak_bytes = row.basis_bytes + state.phi_cache.bytes() +
                                 kOptimizerCopies * state.model.params.size() * sizeof(double);
            }
            std::sort(times.begin(), times.end());
            row.seconds = times[times.size() / 2];
            rows.push_back(row);
        }
    }
    return rows;
}

void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows)
{
    out << "p,n,seconds,peak_bytes,basis_bytes\n";
    out.precision(6);
    for (const auto& r : rows)
        out << r.p << ',' << r.n << ',' << std::fixed << r.seconds << std::defaultfloat << ',' << r.peak_bytes << ','
            << r.basis_bytes << '\n';
}

} // namespace ahofm
