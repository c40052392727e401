#include <ahofm/effects.hpp>
#include <ahofm/error.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace ahofm {
namespace {

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

void check_feature(const Model& model, int feature)
{
    if (feature < 0 || feature >= model.num_features()) throw Error("feature index " + std::to_string(feature) + " out of range");
}

} // namespace

Eigen::MatrixXd factor_curves(const Model& model, int degree, int feature, std::span<const double> grid)
{
    check_feature(model, feature);
    const auto& spec = model.specs[static_cast<std::size_t>(feature)];
    const auto& gamma = model.latent(degree).gamma[static_cast<std::size_t>(feature)];
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(grid.size()), spec.num_basis);
    for (std::size_t r = 0; r < grid.size(); ++r) basis.row(static_cast<Eigen::Index>(r)) = eval_basis(grid[r], spec).transpose();
    return basis * gamma;
}

Eigen::VectorXd univariate_effect(const Model& model, int feature, std::span<const double> grid)
{
    check_feature(model, feature);
    const auto& spec = model.specs[static_cast<std::size_t>(feature)];
    const auto& beta = model.params.theta.beta[static_cast<std::size_t>(feature)];
    Eigen::VectorXd out(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t r = 0; r < grid.size(); ++r) out(static_cast<Eigen::Index>(r)) = eval_basis(grid[r], spec).dot(beta);
    return out;
}

Eigen::MatrixXd pairwise_surface(const Model& model, int k, int l, std::span<const double> grid_k,
                                 std::span<const double> grid_l, int degree)
{
    if (k == l) throw Error("pairwise surface needs two distinct features");
    return factor_curves(model, degree, k, grid_k) * factor_curves(model, degree, l, grid_l).transpose();
}

double term_effect(const Model& model, std::span<const int> subset, std::span<const double> values)
{
    if (subset.size() != values.size()) throw Error("one value per subset member is required");
    const auto& latent = model.latent(static_cast<int>(subset.size()));
    Eigen::VectorXd prod = Eigen::VectorXd::Ones(latent.num_factors());
    for (std::size_t t = 0; t < subset.size(); ++t) {
        const auto j = static_cast<std::size_t>(subset[t]);
        prod.array() *= (eval_basis(values[t], model.specs[j]).transpose() * latent.gamma[j]).transpose().array();
    }
    return prod.sum();
}

double halton(std::uint64_t index, int base)
{
    double result = 0.0;
    double f = 1.0;
    while (index > 0) {
        f /= base;
        result += f * static_cast<double>(index % static_cast<std::uint64_t>(base));
        index /= static_cast<std::uint64_t>(base);
    }
    return result;
}

double quantile(std::vector<double> values, double prob)
{
    if (values.empty()) throw Error("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<MarginalRow> marginal_summary(const Model& model, std::span<const int> subset, int feature,
                                          std::span<const double> grid, int mc_draws)
{
    if (mc_draws < 2) throw Error("marginal summary needs at least 2 draws");
    const auto pos = std::find(subset.begin(), subset.end(), feature);
    if (pos == subset.end()) throw Error("feature not in term");
    for (int j : subset) check_feature(model, j);
    if (subset.size() - 1 > std::size(kPrimes)) throw Error("term has too many features for the Halton sampler");
    const auto fixed = static_cast<std::size_t>(pos - subset.begin());

    // quasi-random points of the complementary coordinates, shared by all grid values
    std::vector<std::vector<double>> draws(static_cast<std::size_t>(mc_draws), std::vector<double>(subset.size()));
    for (int r = 0; r < mc_draws; ++r) {
        std::size_t dim = 0;
        for (std::size_t t = 0; t < subset.size(); ++t) {
            if (t == fixed) continue;
            const auto& spec = model.specs[static_cast<std::size_t>(subset[t])];
            const double u = halton(static_cast<std::uint64_t>(r + 1), kPrimes[dim++]);
            draws[static_cast<std::size_t>(r)][t] = spec.domain_lo + u * (spec.domain_hi - spec.domain_lo);
        }
    }

    std::vector<MarginalRow> out;
    std::vector<double> values(static_cast<std::size_t>(mc_draws));
    for (double g : grid) {
        for (int r = 0; r < mc_draws; ++r) {
            auto& point = draws[static_cast<std::size_t>(r)];
            point[fixed] = g;
            values[static_cast<std::size_t>(r)] = term_effect(model, subset, point);
        }
        MarginalRow row;
        row.grid_value = g;
        double sum = 0.0;
        for (double v : values) sum += v;
        row.mean = sum / mc_draws;
        row.q05 = quantile(values, 0.05);
        row.q95 = quantile(values, 0.95);
        out.push_back(row);
    }
    return out;
}

std::vector<double> domain_grid(const SplineSpec& spec, int size)
{
    if (size < 2) throw Error("grid needs at least 2 points");
    std::vector<double> grid(static_cast<std::size_t>(size));
    for (int k = 0; k < size; ++k)
        grid[static_cast<std::size_t>(k)] = spec.domain_lo + (spec.domain_hi - spec.domain_lo) * k / (size - 1);
    return grid;
}

std::string term_name(const Model& model, std::span<const int> subset)
{
    std::string name;
    for (int j : subset) {
        if (!name.empty()) name += ':';
        name += model.feature_names.empty() ? "x" + std::to_string(j + 1) : model.feature_names[static_cast<std::size_t>(j)];
    }
    return name;
}

void write_marginal_header(std::ostream& out)
{
    out << "term,feature,grid_value,mean,q05,q95\n";
}

void write_marginal_rows(std::ostream& out, const std::string& term, const std::string& feature,
                         std::span<const MarginalRow> rows)
{
    out.precision(10);
    for (const auto& r : rows)
        out << term << ',' << feature << ',' << r.grid_value << ',' << r.mean << ',' << r.q05 << ',' << r.q95 << '\n';
}

} // namespace ahofm
