#include <ahofm/error.hpp>
#include <ahofm/oracle.hpp>
#include <ahofm/simulate.hpp>

#include <cmath>
#include <ostream>
#include <random>

namespace ahofm {
namespace {

constexpr int kTruthBasis = 6;
constexpr double kInterpNoiseSd = 0.1;

SplineSpec truth_spec(double lo, double hi, int num_basis)
{
    const double ends[] = {lo, hi};
    return make_spec(ends, num_basis, 3, 2);
}

Eigen::VectorXd draw_normal(Eigen::Index n, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
}

Eigen::VectorXd evaluate_terms(const std::vector<TruthTerm>& terms, const Eigen::MatrixXd& x)
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
        for (const auto& t : terms) out(i) += t.evaluate_row(row);
    }
    return out;
}

double population_variance(const Eigen::VectorXd& v)
{
    return (v.array() - v.mean()).square().mean();
}

std::vector<std::string> default_names(int p)
{
    std::vector<std::string> names;
    for (int j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
    return names;
}

} // namespace

SimulationKind parse_simulation_kind(const std::string& name)
{
    if (name == "bivariate_study") return SimulationKind::bivariate_study;
    if (name == "scaling") return SimulationKind::scaling;
    if (name == "interp3d") return SimulationKind::interp3d;
    throw Error("unknown simulation kind '" + name + "' (expected bivariate_study, scaling or interp3d)");
}

std::string to_string(SimulationKind kind)
{
    switch (kind) {
    case SimulationKind::bivariate_study: return "bivariate_study";
    case SimulationKind::scaling: return "scaling";
    case SimulationKind::interp3d: return "interp3d";
    }
    return "unknown";
}

double TruthTerm::value(std::span<const double> member_values) const
{
    std::vector<Eigen::VectorXd> rows;
    for (std::size_t t = 0; t < subset.size(); ++t) rows.push_back(eval_basis(member_values[t], specs[t]));
    return kronecker_row(rows).dot(coefficients);
}

double TruthTerm::evaluate_row(std::span<const double> x) const
{
    double values[16];
    for (std::size_t t = 0; t < subset.size(); ++t) values[t] = x[static_cast<std::size_t>(subset[t])];
    return value({values, subset.size()});
}

Simulation simulate(SimulationKind kind, const SimulationParams& params, std::uint64_t seed)
{
    if (params.n < 0 || params.p < 0 || params.n_test < 0) throw Error("simulation sizes must be non-negative");
    if (!(params.snr > 0.0)) throw Error("signal-to-noise ratio must be positive");
    std::mt19937_64 rng(seed);
    Simulation sim;
    sim.kind = kind;

    int n = params.n;
    int p = params.p;
    const int n_test = params.n_test;
    Eigen::MatrixXd x_all;

    switch (kind) {
    case SimulationKind::bivariate_study: {
        if (n == 0) n = 2000;
        if (p == 0) p = 5;
        if (p < 2) throw Error("bivariate_study needs at least 2 features");
        if (params.grid_size < 2) throw Error("grid size must be at least 2");
        x_all.resize(n + n_test, p);
        for (Eigen::Index j = 0; j < p; ++j) x_all.col(j) = draw_normal(n + n_test, rng);
        const auto spec = truth_spec(-3.0, 3.0, kTruthBasis);
        for (int k = 0; k < p; ++k) {
            for (int l = k + 1; l < p; ++l) {
                TruthTerm t;
                t.subset = {k, l};
                t.specs = {spec, spec};
                t.coefficients = draw_normal(kTruthBasis * kTruthBasis, rng);
                sim.terms.push_back(std::move(t));
            }
        }
        sim.data.column_names = default_names(p);
        for (int g = 0; g < params.grid_size; ++g)
            sim.grid.push_back(params.grid_lo + (params.grid_hi - params.grid_lo) * g / (params.grid_size - 1));
        break;
    }
    case SimulationKind::scaling: {
        if (n == 0) n = 6000;
        if (p == 0) p = 3;
        x_all.resize(n + n_test, p);
        for (Eigen::Index j = 0; j < p; ++j) x_all.col(j) = draw_normal(n + n_test, rng);
        sim.data.column_names = default_names(p);
        break;
    }
    case SimulationKind::interp3d: {
        if (n == 0) n = 10'000;
        p = 4;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        x_all.resize(n + n_test, p);
        for (Eigen::Index i = 0; i < x_all.rows(); ++i)
            for (Eigen::Index j = 0; j < p; ++j) x_all(i, j) = unif(rng);
        const int sizes[] = {4, 5, 7, 5};
        const std::vector<std::vector<int>> subsets = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
        for (const auto& subset : subsets) {
            TruthTerm t;
            t.subset = subset;
            Eigen::Index m = 1;
            for (int j : subset) {
                t.specs.push_back(truth_spec(0.0, 1.0, sizes[j]));
                m *= sizes[j];
            }
            t.coefficients = draw_normal(m, rng);
            sim.terms.push_back(std::move(t));
        }
        sim.data.column_names = {"time", "lat", "lon", "rate"};
        break;
    }
    }
    if (n < 2) throw Error("simulation needs at least 2 rows");

    Eigen::VectorXd signal_all;
    if (kind == SimulationKind::scaling) {
        signal_all = Eigen::VectorXd::Zero(x_all.rows());
        for (Eigen::Index j = 0; j < p; ++j) {
            signal_all.array() += x_all.col(j).array().sin();
            if (p > 1) signal_all.array() += 0.5 * x_all.col(j).array() * x_all.col((j + 1) % p).array();
        }
    } else {
        signal_all = evaluate_terms(sim.terms, x_all);
    }

    sim.signal = signal_all.head(n);
    sim.test_signal = signal_all.tail(n_test);
    Eigen::VectorXd noise = draw_normal(n, rng);
    Eigen::VectorXd test_noise = draw_normal(n_test, rng);
    switch (kind) {
    case SimulationKind::bivariate_study: {
        // realized noise is rescaled so the empirical ratio is exact
        sim.noise_sd = std::sqrt(population_variance(sim.signal) / params.snr);
        noise.array() -= noise.mean();
        noise /= std::sqrt(population_variance(noise));
        break;
    }
    case SimulationKind::scaling: sim.noise_sd = 0.5; break;
    case SimulationKind::interp3d: sim.noise_sd = kInterpNoiseSd; break;
    }

    sim.data.features = x_all.topRows(n);
    sim.data.response = sim.signal + sim.noise_sd * noise;
    sim.test.column_names = sim.data.column_names;
    sim.test.features = x_all.bottomRows(n_test);
    sim.test.response = sim.test_signal + sim.noise_sd * test_noise;

    for (const auto& t : sim.terms) {
        if (t.subset.size() != 2 || sim.grid.empty()) continue;
        const auto g = static_cast<Eigen::Index>(sim.grid.size());
        Eigen::MatrixXd surface(g, g);
        for (Eigen::Index a = 0; a < g; ++a)
            for (Eigen::Index b = 0; b < g; ++b) {
                const double v[] = {sim.grid[static_cast<std::size_t>(a)], sim.grid[static_cast<std::size_t>(b)]};
                surface(a, b) = t.value(v);
            }
        sim.truth_grids.push_back(std::move(surface));
    }
    return sim;
}

void write_truth_grids_csv(std::ostream& out, const Simulation& sim)
{
    out << "term,x_a,x_b,value\n";
    out.precision(17);
    std::size_t k = 0;
    for (const auto& t : sim.terms) {
        if (t.subset.size() != 2 || k >= sim.truth_grids.size()) continue;
        const auto name = sim.data.column_names[static_cast<std::size_t>(t.subset[0])] + ":" +
                          sim.data.column_names[static_cast<std::size_t>(t.subset[1])];
        const auto& surface = sim.truth_grids[k++];
        for (Eigen::Index a = 0; a < surface.rows(); ++a)
            for (Eigen::Index b = 0; b < surface.cols(); ++b)
                out << name << ',' << sim.grid[static_cast<std::size_t>(a)] << ',' << sim.grid[static_cast<std::size_t>(b)]
                    << ',' << surface(a, b) << '\n';
    }
}

} // namespace ahofm
