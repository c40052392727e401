#include <ahofm/compare.hpp>
#include <ahofm/effects.hpp>
#include <ahofm/error.hpp>
#include <ahofm/oracle.hpp>
#include <ahofm/simulate.hpp>

#include <ostream>

namespace ahofm {
namespace {

template <class Predict>
double test_mse(const Dataset& test, Predict&& predict)
{
    double total = 0.0;
    std::vector<double> x(static_cast<std::size_t>(test.cols()));
    for (Eigen::Index i = 0; i < test.rows(); ++i) {
        for (Eigen::Index j = 0; j < test.cols(); ++j) x[static_cast<std::size_t>(j)] = test.features(i, j);
        const double r = test.response(i) - predict(x);
        total += r * r;
    }
    return total / static_cast<double>(test.rows());
}

} // namespace

std::vector<CompareRow> run_compare(const CompareOptions& options)
{
    if (options.seeds < 1) throw Error("compare needs at least one seed");
    if (options.n_test < 1) throw Error("compare needs a test set");

    ModelConfig config = options.run.model;
    config.max_degree = 2;
    config.loss = LossFamily::gaussian;

    std::vector<CompareRow> rows;
    for (int n : options.n_list) {
        for (int r = 0; r < options.seeds; ++r) {
            const std::uint64_t seed = options.base_seed + static_cast<std::uint64_t>(r);
            SimulationParams sp;
            sp.n = n;
            sp.p = options.p;
            sp.n_test = options.n_test;
            sp.grid_size = options.grid_size;
            const auto sim = simulate(SimulationKind::bivariate_study, sp, seed);

            // exact GAM with every pairwise tensor product
            std::vector<SplineSpec> specs;
            std::vector<BasisMatrix> bases;
            for (int j = 0; j < options.p; ++j) {
                specs.push_back(make_spec(sim.data.column(j), config.basis_size(j), config.spline_degree,
                                          config.penalty_order, j));
                bases.push_back(eval_basis_matrix(sim.data.column(j), specs.back()));
            }
            const auto table = homogeneous_smoothing(bases, make_penalties(specs), {{2, config.df(2)}}, {{2, 1}});
            std::vector<std::vector<int>> pairs;
            for (const auto& t : sim.terms) pairs.push_back(t.subset);
            const auto gam = fit_exact_gam(sim.data, pairs, table, specs);

            double gam_surface = 0.0;
            for (std::size_t k = 0; k < pairs.size(); ++k)
                gam_surface += surface_mse(gam.pair_surface(k, sim.grid, sim.grid), sim.truth_grids[k]);
            gam_surface /= static_cast<double>(pairs.size());
            const double gam_test = test_mse(sim.test, [&](std::span<const double> x) { return gam.predict_row(x); });

            for (int factors : options.factor_list) {
                ModelConfig c = config;
                c.factor_counts[2] = factors;
                TrainOptions train = options.run.train;
                train.optimizer = Optimizer::adam;
                train.seed = seed;
                const auto state = fit_adam(sim.data, c, train);

                CompareRow row;
                row.n = n;
                row.replicate = r;
                row.seed = seed;
                row.factors = factors;
                row.gam_surface_mse = gam_surface;
                row.gam_test_mse = gam_test;
                for (std::size_t k = 0; k < pairs.size(); ++k) {
                    const auto est = pairwise_surface(state.model, pairs[k][0], pairs[k][1], sim.grid, sim.grid);
                    row.afm_surface_mse += surface_mse(est, sim.truth_grids[k]);
                }
                row.afm_surface_mse /= static_cast<double>(pairs.size());
                row.afm_test_mse = test_mse(sim.test, [&](std::span<const double> x) { return predict_row(x, state.model); });
                rows.push_back(row);
            }
        }
    }
    return rows;
}

void write_compare_csv(std::ostream& out, std::span<const CompareRow> rows)
{
    out << "n,replicate,seed,F,afm_surface_mse,gam_surface_mse,afm_test_mse,gam_test_mse\n";
    out.precision(10);
    for (const auto& r : rows)
        out << r.n << ',' << r.replicate << ',' << r.seed << ',' << r.factors << ',' << r.afm_surface_mse << ','
            << r.gam_surface_mse << ',' << r.afm_test_mse << ',' << r.gam_test_mse << '\n';
}

} // namespace ahofm
