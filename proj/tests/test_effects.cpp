#include "oracles.hpp"

#include <ahofm/effects.hpp>

#include <doctest.h>

#include <random>
#include <sstream>

using namespace ahofm;

namespace {

/// Coefficients that make a clamped B-spline reproduce x exactly.
Eigen::VectorXd greville(const SplineSpec& s)
{
    Eigen::VectorXd g(s.num_basis);
    for (int m = 0; m < s.num_basis; ++m) {
        double sum = 0.0;
        for (int t = 1; t <= s.degree; ++t) sum += s.knots[static_cast<std::size_t>(m + t)];
        g(m) = sum / s.degree;
    }
    return g;
}

Dataset uniform_dataset(int n, int p, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Dataset d;
    d.features.resize(n, p);
    d.response.resize(n);
    for (int j = 0; j < p; ++j) d.column_names.push_back("x" + std::to_string(j + 1));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) d.features(i, j) = u(rng);
        d.response(i) = u(rng);
    }
    d.features(0, 0) = d.features(0, 1) = d.features(0, 2) = -1.0;
    d.features(1, 0) = d.features(1, 1) = d.features(1, 2) = 1.0;
    return d;
}

} // namespace

TEST_CASE("halton and quantile")
{
    CHECK(halton(1, 2) == 0.5);
    CHECK(halton(2, 2) == 0.25);
    CHECK(halton(3, 2) == 0.75);
    CHECK(halton(1, 3) == doctest::Approx(1.0 / 3.0));
    CHECK(halton(4, 3) == doctest::Approx(1.0 / 3.0 + 1.0 / 9.0));
    CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(quantile({4, 1, 3, 2}, 0.05) == doctest::Approx(1.15));
    CHECK(quantile({7}, 0.95) == 7.0);
    CHECK_THROWS_AS(quantile({}, 0.5), Error);
}

TEST_CASE("pairwise surfaces")
{
    const auto data = oracle::random_dataset(100, 3, 1);
    ModelConfig cfg;
    cfg.num_basis = 6;
    cfg.factor_counts[2] = 3;
    const auto state = oracle::random_state(data, cfg, 1);
    const auto& model = state.model;
    const std::vector<double> gk{-1.0, 0.0, 0.7}, gl{-0.5, 0.2, 1.1, 1.5};

    const auto s = pairwise_surface(model, 0, 2, gk, gl);
    REQUIRE(s.rows() == 3);
    REQUIRE(s.cols() == 4);
    const auto& g = model.latent(2).gamma;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) {
            const auto bk = eval_basis(gk[static_cast<std::size_t>(r)], model.specs[0]);
            const auto bl = eval_basis(gl[static_cast<std::size_t>(c)], model.specs[2]);
            double loop = 0.0;
            for (int m = 0; m < 6; ++m)
                for (int o = 0; o < 6; ++o)
                    for (int f = 0; f < 3; ++f) loop += bk(m) * bl(o) * g[0](m, f) * g[2](o, f);
            CHECK(std::abs(s(r, c) - loop) <= 1e-10);
        }

    Model zero = model;
    zero.params = model.params.zeros_like();
    CHECK(pairwise_surface(zero, 0, 1, gk, gl).isZero(0.0));

    ModelConfig one = cfg;
    one.factor_counts[2] = 1;
    const auto rank1 = oracle::random_state(data, one, 2);
    const auto s1 = pairwise_surface(rank1.model, 1, 2, gk, gl);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(s1);
    CHECK(svd.singularValues()(1) <= 1e-12 * svd.singularValues()(0));

    CHECK_THROWS_AS(pairwise_surface(model, 1, 1, gk, gl), Error);
}

TEST_CASE("effects reassemble the predictor of a degree-2 model")
{
    const auto data = oracle::random_dataset(60, 4, 3);
    ModelConfig cfg;
    cfg.num_basis = 7;
    const auto state = oracle::random_state(data, cfg, 3);
    const auto& model = state.model;
    for (Eigen::Index i = 0; i < 10; ++i) {
        std::vector<double> x(4);
        for (int j = 0; j < 4; ++j) x[static_cast<std::size_t>(j)] = data.features(i, j);
        double eta = model.params.theta.alpha0;
        for (int j = 0; j < 4; ++j) eta += univariate_effect(model, j, std::span(x).subspan(static_cast<std::size_t>(j), 1))(0);
        for (int k = 0; k < 4; ++k)
            for (int l = k + 1; l < 4; ++l)
                eta += pairwise_surface(model, k, l, std::span(x).subspan(static_cast<std::size_t>(k), 1),
                                        std::span(x).subspan(static_cast<std::size_t>(l), 1))(0, 0);
        CHECK(std::abs(eta - predict_row(x, model)) <= 1e-9);
    }
}

TEST_CASE("factor curves and term effects")
{
    const auto data = oracle::random_dataset(60, 3, 4);
    ModelConfig cfg;
    cfg.max_degree = 3;
    cfg.num_basis = 6;
    const auto state = oracle::random_state(data, cfg, 4);
    const auto& model = state.model;
    const std::vector<double> grid{-1.0, 0.25, 2.0};
    const auto curves = factor_curves(model, 3, 1, grid);
    CHECK(curves.rows() == 3);
    CHECK(curves.cols() == cfg.factors(3));
    const auto b = eval_basis(0.25, model.specs[1]);
    CHECK(curves(1, 2) == doctest::Approx(b.dot(model.latent(3).gamma[1].col(2))).epsilon(1e-14));

    const std::vector<int> subset{0, 1, 2};
    const std::vector<double> vals{0.1, -0.4, 0.9};
    double expect = 0.0;
    for (int f = 0; f < cfg.factors(3); ++f) {
        double prod = 1.0;
        for (int t = 0; t < 3; ++t)
            prod *= eval_basis(vals[static_cast<std::size_t>(t)], model.specs[static_cast<std::size_t>(t)])
                        .dot(model.latent(3).gamma[static_cast<std::size_t>(t)].col(f));
        expect += prod;
    }
    CHECK(term_effect(model, subset, vals) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(term_name(model, subset) == "x1:x2:x3");
}

TEST_CASE("marginal summary")
{
    const auto data = uniform_dataset(200, 3, 5);
    ModelConfig cfg;
    cfg.num_basis = 6;
    cfg.factor_counts[2] = 1;
    auto state = init(data, cfg, 5);
    auto& model = state.model;
    model.params = model.params.zeros_like();
    auto& g = model.latent(2).gamma;
    const auto grid = domain_grid(model.specs[0], 9);
    CHECK(grid.front() == model.specs[0].domain_lo);
    CHECK(grid.back() == model.specs[0].domain_hi);

    SUBCASE("multiplicative effect averages to zero")
    {
        g[0].col(0) = greville(model.specs[0]);
        g[1].col(0) = greville(model.specs[1]);
        const std::vector<int> subset{0, 1};
        CHECK(term_effect(model, subset, std::vector<double>{0.5, -0.6}) == doctest::Approx(-0.3).epsilon(1e-12));
        const auto rows = marginal_summary(model, subset, 0, grid, 256);
        REQUIRE(rows.size() == grid.size());
        for (const auto& r : rows) {
            CHECK(std::abs(r.mean) <= 1e-2);
            CHECK(r.q05 <= r.mean);
            CHECK(r.q95 >= r.mean);
        }
        CHECK(rows.back().q95 - rows.back().q05 > 1.0);
        const auto again = marginal_summary(model, subset, 0, grid, 256);
        for (std::size_t k = 0; k < rows.size(); ++k) CHECK(again[k].mean == rows[k].mean);
    }

    SUBCASE("no dependence on the other coordinate collapses the band")
    {
        g[0].col(0) = Eigen::VectorXd::LinSpaced(6, -1.0, 2.0);
        g[2].col(0).setConstant(0.8);
        const std::vector<int> subset{0, 2};
        for (const auto& r : marginal_summary(model, subset, 0, grid, 64)) {
            CHECK(std::abs(r.q05 - r.mean) <= 1e-9);
            CHECK(std::abs(r.q95 - r.mean) <= 1e-9);
        }
    }

    const std::vector<int> subset{0, 1};
    CHECK_THROWS_WITH_AS(marginal_summary(model, subset, 2, grid, 16), doctest::Contains("feature not in term"), Error);
    CHECK_THROWS_AS(marginal_summary(model, subset, 0, grid, 1), Error);
}

TEST_CASE("marginal csv layout")
{
    std::ostringstream os;
    write_marginal_header(os);
    const std::vector<MarginalRow> rows{{0.5, 1.0, 0.5, 1.5}};
    write_marginal_rows(os, "a:b", "a", rows);
    const auto text = os.str();
    CHECK(text.rfind("term,feature,grid_value,mean,q05,q95\n", 0) == 0);
    CHECK(text.find("a:b,a,0.5,1,0.5,1.5\n") != std::string::npos);
}
