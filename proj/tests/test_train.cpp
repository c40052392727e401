#include "oracles.hpp"

#include <ahofm/train.hpp>

#include <doctest.h>

#include <numeric>
#include <random>
#include <sstream>

using namespace ahofm;

namespace {

std::vector<double> row_of(const Dataset& d, Eigen::Index i)
{
    std::vector<double> x(static_cast<std::size_t>(d.cols()));
    for (Eigen::Index j = 0; j < d.cols(); ++j) x[static_cast<std::size_t>(j)] = d.features(i, j);
    return x;
}

std::vector<Eigen::Index> all_rows(const Dataset& d)
{
    std::vector<Eigen::Index> r(static_cast<std::size_t>(d.rows()));
    std::iota(r.begin(), r.end(), Eigen::Index{0});
    return r;
}

double max_gradient_error(const FitState& state, const Dataset& data, std::span<const Eigen::Index> batch,
                          double scale)
{
    const auto g = gradient(state, data, batch, scale);
    std::vector<double> analytic(g.grad.size());
    g.grad.pack(analytic);
    Model probe = state.model;
    const auto f = [&](const Parameters& p) {
        probe.params = p;
        double total = 0.0;
        for (Eigen::Index i : batch)
            total += pointwise_loss(probe.config.loss, data.response(i), predict_row(row_of(data, i), probe));
        return total + 0.5 * scale * penalty_value(p, probe.table, state.penalties);
    };
    const auto fd = oracle::finite_diff(state.model.params, f);
    double worst = 0.0;
    for (std::size_t k = 0; k < fd.size(); ++k) worst = std::max(worst, oracle::rel_err(analytic[k], fd[k]));
    return worst;
}

double roughness(const FitState& s)
{
    double r = 0.0;
    for (std::size_t j = 0; j < s.penalties.size(); ++j) {
        const auto& P = s.penalties[j].values;
        r += s.model.params.theta.beta[j].dot(P * s.model.params.theta.beta[j]);
        for (const auto& lt : s.model.params.latents)
            for (Eigen::Index f = 0; f < lt.gamma[j].cols(); ++f) r += lt.gamma[j].col(f).dot(P * lt.gamma[j].col(f));
    }
    return r;
}

} // namespace

TEST_CASE("init is seeded and sets the intercept")
{
    auto data = oracle::random_dataset(150, 3, 1);
    ModelConfig cfg;
    cfg.num_basis = 6;
    const auto a = init(data, cfg, 42);
    const auto b = init(data, cfg, 42);
    const auto c = init(data, cfg, 43);
    CHECK(a.model.params == b.model.params);
    CHECK(a.eta_hat == b.eta_hat);
    CHECK_FALSE(a.model.params == c.model.params);
    CHECK(a.model.params.theta.alpha0 == doctest::Approx(data.response.mean()).epsilon(1e-14));
    for (const auto& beta : a.model.params.theta.beta) CHECK(beta.isZero(0.0));
    CHECK(a.bases.size() == 3);
    CHECK(a.bases[0].rows() == 150);

    data.response.array() -= data.response.mean();
    ModelConfig quiet = cfg;
    quiet.gamma_init_sd = 0.0;
    const auto z = init(data, quiet, 1);
    CHECK(std::abs(z.model.params.theta.alpha0) <= 1e-12);
    CHECK(z.eta_hat.cwiseAbs().maxCoeff() <= 1e-12);

    auto bin = oracle::random_dataset(200, 2, 2, true);
    ModelConfig bcfg = cfg;
    bcfg.loss = LossFamily::bernoulli;
    const auto bs = init(bin, bcfg, 3);
    const double rate = bin.response.mean();
    CHECK(bs.model.params.theta.alpha0 == doctest::Approx(std::log(rate / (1.0 - rate))).epsilon(1e-12));
}

TEST_CASE("synchronize keeps eta_hat equal to predict_row")
{
    const auto data = oracle::random_dataset(80, 4, 4);
    ModelConfig cfg;
    cfg.max_degree = 3;
    cfg.num_basis = 6;
    const auto state = oracle::random_state(data, cfg, 4);
    for (Eigen::Index i = 0; i < data.rows(); ++i)
        CHECK(std::abs(state.eta_hat(i) - predict_row(row_of(data, i), state.model)) <= 1e-9);
}

TEST_CASE("gradient matches central finite differences")
{
    oracle::QuietWarnings quiet;
    for (int r = 0; r < 8; ++r) {
        const int p = 2 + r % 3;
        const bool binary = r % 4 == 3;
        const auto data = oracle::random_dataset(20 + 4 * r, p, 100 + r, binary);
        ModelConfig cfg;
        cfg.max_degree = 1 + r % 3;
        cfg.factor_counts = {{2, 2}, {3, 2}};
        cfg.num_basis = 5 + r % 2;
        cfg.df_targets = {{1, 4.0}, {2, 4.0}, {3, 4.0}};
        cfg.loss = binary ? LossFamily::bernoulli : LossFamily::gaussian;
        const auto state = oracle::random_state(data, cfg, 200 + r, 0.4);
        const auto rows = all_rows(data);
        CHECK(max_gradient_error(state, data, rows, 1.0) <= 1e-5);
        const std::span<const Eigen::Index> batch(rows.data() + 3, 7);
        CHECK(max_gradient_error(state, data, batch, 7.0 / static_cast<double>(data.rows())) <= 1e-5);
    }
}

TEST_CASE("gradient vanishes at an interpolated, unpenalized fit")
{
    auto data = oracle::random_dataset(30, 2, 5);
    ModelConfig cfg;
    cfg.num_basis = 5;
    auto state = oracle::random_state(data, cfg, 5);
    for (Eigen::Index i = 0; i < data.rows(); ++i) data.response(i) = state.eta_hat(i);
    for (auto& [d, per] : state.model.table.lambda)
        for (auto& fs : per)
            for (auto& l : fs) l = 0.0;
    const auto rows = all_rows(data);
    const auto g = gradient(state, data, rows, 1.0);
    std::vector<double> flat(g.grad.size());
    g.grad.pack(flat);
    for (double v : flat) CHECK(std::abs(v) <= 1e-12);
    CHECK(g.loss <= 1e-24);
}

TEST_CASE("adam fits a noiseless quadratic")
{
    Dataset d;
    d.features.resize(200, 1);
    d.response.resize(200);
    d.column_names = {"x"};
    for (int i = 0; i < 200; ++i) {
        const double x = -1.0 + 2.0 * i / 199.0;
        d.features(i, 0) = x;
        d.response(i) = x * x;
    }
    ModelConfig cfg;
    cfg.max_degree = 1;
    cfg.df_targets[1] = 8.0;
    TrainOptions opt;
    opt.max_epochs = 500;
    opt.learning_rate = 0.02;
    opt.batch_size = 32;
    opt.patience = 500;
    const auto state = fit_adam(d, cfg, opt);
    double mse = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double r = d.response(i) - predict_row(row_of(d, i), state.model);
        mse += r * r / 200.0;
    }
    CHECK(mse < 1e-3);
}

TEST_CASE("adam early stopping with patience 1")
{
    auto d = oracle::random_dataset(300, 2, 6);
    d.response.setZero();
    ModelConfig cfg;
    cfg.num_basis = 6;
    cfg.gamma_init_sd = 0.5;
    TrainOptions opt;
    opt.patience = 1;
    opt.max_epochs = 400;
    opt.learning_rate = 0.05;
    const auto state = fit_adam(d, cfg, opt);
    REQUIRE(state.converged);
    CHECK(state.epoch == state.best_epoch + 1);
    CHECK(state.history.size() == static_cast<std::size_t>(state.epoch));
    const auto& last = state.history.back();
    // with patience 1 every epoch before the last one improved
    for (std::size_t e = 1; e + 1 < state.history.size(); ++e)
        CHECK(state.history[e].valid_loss < state.history[e - 1].valid_loss);
    if (state.best_epoch > 0)
        CHECK(last.valid_loss >= state.history[static_cast<std::size_t>(state.best_epoch - 1)].valid_loss);
}

TEST_CASE("adam is deterministic and restores the best epoch")
{
    const auto d = oracle::random_dataset(400, 3, 7);
    ModelConfig cfg;
    cfg.num_basis = 6;
    TrainOptions opt;
    opt.max_epochs = 25;
    opt.patience = 3;
    opt.learning_rate = 0.03;
    const auto a = fit_adam(d, cfg, opt);
    const auto b = fit_adam(d, cfg, opt);
    CHECK(a.model.params == b.model.params);
    CHECK(a.history.size() == b.history.size());
    opt.seed = 8;
    const auto c = fit_adam(d, cfg, opt);
    CHECK_FALSE(a.model.params == c.model.params);
    for (const auto& rec : a.history) {
        CHECK(std::isfinite(rec.train_loss));
        CHECK(rec.penalty >= 0.0);
    }
}

TEST_CASE("adam reports divergence")
{
    const auto d = oracle::random_dataset(200, 3, 9);
    ModelConfig cfg;
    cfg.max_degree = 3;
    cfg.num_basis = 6;
    TrainOptions opt;
    opt.learning_rate = 1e120;
    opt.max_epochs = 5;
    CHECK_THROWS_WITH_AS(fit_adam(d, cfg, opt), doctest::Contains("diverged at epoch"), Error);
}

TEST_CASE("train options validation")
{
    TrainOptions opt;
    CHECK_NOTHROW(opt.validate());
    opt.validation_fraction = 1.0;
    CHECK_THROWS_AS(opt.validate(), Error);
    opt.validation_fraction = 0.2;
    opt.patience = 0;
    CHECK_THROWS_AS(opt.validate(), Error);
    CHECK(parse_optimizer("bcd") == Optimizer::bcd);
    CHECK_THROWS_AS(parse_optimizer("sgd"), Error);
}

TEST_CASE("bcd fiber update reaches the exact blockwise minimizer")
{
    const auto data = oracle::random_dataset(150, 3, 10);
    ModelConfig cfg;
    cfg.max_degree = 3;
    cfg.factor_counts = {{2, 2}, {3, 2}};
    cfg.num_basis = 6;
    for (int d : {2, 3}) {
        auto state = oracle::random_state(data, cfg, 10 + d);
        const int j = 1, f = 1, M = 6;
        // eta is affine in the fiber: build its design from unit probes
        Model probe = state.model;
        auto& fiber = probe.latent(d).gamma[j];
        fiber.col(f).setZero();
        Eigen::VectorXd c(data.rows());
        for (Eigen::Index i = 0; i < data.rows(); ++i) c(i) = predict_row(row_of(data, i), probe);
        Eigen::MatrixXd X(data.rows(), M);
        for (int m = 0; m < M; ++m) {
            fiber.col(f).setZero();
            fiber(m, f) = 1.0;
            for (Eigen::Index i = 0; i < data.rows(); ++i) X(i, m) = predict_row(row_of(data, i), probe) - c(i);
        }
        const double lambda = state.model.table.at(d, j, f);
        const auto& P = state.penalties[j].values;
        const Eigen::MatrixXd A = 2.0 * X.transpose() * X + lambda * P;
        const Eigen::VectorXd direct = A.ldlt().solve(2.0 * X.transpose() * (data.response - c));

        bcd_update_fiber(state, data, d, f, j);
        const Eigen::VectorXd got = state.model.latent(d).gamma[j].col(f);
        CHECK((got - direct).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, direct.cwiseAbs().maxCoeff()));
        for (Eigen::Index i = 0; i < data.rows(); ++i)
            CHECK(std::abs(state.eta_hat(i) - predict_row(row_of(data, i), state.model)) <= 1e-9);
    }
}

TEST_CASE("bcd objective is non-increasing per block")
{
    for (bool binary : {false, true}) {
        const auto data = oracle::random_dataset(200, 3, 11, binary);
        ModelConfig cfg;
        cfg.max_degree = 3;
        cfg.factor_counts = {{2, 3}, {3, 2}};
        cfg.num_basis = 6;
        cfg.loss = binary ? LossFamily::bernoulli : LossFamily::gaussian;
        auto state = oracle::random_state(data, cfg, 11, 0.3);
        double prev = state_objective(state, data);
        const auto step = [&] {
            const double cur = state_objective(state, data);
            CHECK(cur <= prev + 1e-10 * std::abs(prev));
            prev = cur;
        };
        for (int sweep = 0; sweep < 4; ++sweep) {
            bcd_update_intercept(state, data);
            step();
            for (int j = 0; j < 3; ++j) {
                bcd_update_beta(state, data, j);
                step();
            }
            for (int d = 2; d <= 3; ++d)
                for (int f = 0; f < cfg.factors(d); ++f)
                    for (int j = 0; j < 3; ++j) {
                        bcd_update_fiber(state, data, d, f, j);
                        step();
                    }
        }
        const double cached = state_objective(state, data);
        CHECK(cached == doctest::Approx(objective(data, state.model, state.penalties)).epsilon(1e-9));
    }
}

TEST_CASE("fit_bcd converges or flags slow convergence")
{
    const auto data = oracle::random_dataset(300, 2, 12);
    ModelConfig cfg;
    cfg.num_basis = 6;
    TrainOptions opt;
    opt.optimizer = Optimizer::bcd;
    opt.max_epochs = 3;
    oracle::CaptureWarnings cap;
    const auto bcd = fit(data, cfg, opt);
    TrainOptions aopt;
    aopt.max_epochs = 3;
    const auto adam = fit(data, cfg, aopt);
    const double bcd_obj = objective(data, bcd.model, bcd.penalties);
    const double adam_obj = objective(data, adam.model, bcd.penalties);
    CHECK((bcd_obj <= adam_obj || cap.contains("slow convergence")));
    for (std::size_t k = 1; k < bcd.history.size(); ++k) CHECK(bcd.history[k].seconds >= 0.0);

    opt.max_epochs = 3000; // factor rebalancing takes ~1500 sweeps here
    opt.bcd_tolerance = 1e-6;
    const auto done = fit_bcd(data, cfg, opt);
    CHECK(done.converged);
}

TEST_CASE("lower df gives smoother fits")
{
    oracle::QuietWarnings quiet;
    int smoother = 0;
    for (int seed = 0; seed < 3; ++seed) {
        const auto data = oracle::random_dataset(300, 2, 20 + seed);
        ModelConfig lo, hi;
        lo.num_basis = hi.num_basis = 8;
        lo.default_df = 3.0;
        hi.default_df = 7.0;
        TrainOptions opt;
        opt.optimizer = Optimizer::bcd;
        opt.max_epochs = 60;
        opt.seed = static_cast<std::uint64_t>(seed);
        smoother += roughness(fit_bcd(data, lo, opt)) <= roughness(fit_bcd(data, hi, opt));
    }
    CHECK(smoother >= 2);
}

TEST_CASE("history csv header")
{
    std::vector<EpochRecord> h(2);
    h[0].epoch = 1;
    h[1].epoch = 2;
    std::ostringstream os;
    write_history_csv(os, h);
    const auto text = os.str();
    CHECK(text.rfind("epoch,train_loss,valid_loss,penalty,seconds\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}
