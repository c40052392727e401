#include <ahofm/error.hpp>
#include <ahofm/train.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace ahofm {

std::string to_string(Optimizer optimizer)
{
    return optimizer == Optimizer::adam ? "adam" : "bcd";
}

Optimizer parse_optimizer(const std::string& name)
{
    if (name == "adam") return Optimizer::adam;
    if (name == "bcd") return Optimizer::bcd;
    throw Error("unknown optimizer '" + name + "' (expected adam or bcd)");
}

void TrainOptions::validate() const
{
    if (batch_size < 1) throw Error("batch size must be at least 1");
    if (max_epochs < 1) throw Error("max epochs must be at least 1");
    if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
    if (patience < 1) throw Error("patience must be at least 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw Error("validation fraction must lie in (0, 1)");
}

namespace {

std::span<const double> col_span(const Eigen::MatrixXd& g, Eigen::Index f)
{
    return {g.data() + f * g.rows(), static_cast<std::size_t>(g.rows())};
}

double initial_intercept(LossFamily family, const Eigen::VectorXd& y)
{
    const double mean = y.mean();
    if (family == LossFamily::gaussian) return mean;
    const double rate = std::clamp(mean, 1e-6, 1.0 - 1e-6);
    return std::log(rate / (1.0 - rate));
}

/// Solves (h + ridge) x = rhs; falls back to a small ridge on failure.
Eigen::VectorXd solve_block(Eigen::MatrixXd h, const Eigen::VectorXd& rhs, const char* what)
{
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() == Eigen::Success && llt.rcond() > 1e-14) return llt.solve(rhs);
    const double scale = std::max(1.0, h.diagonal().cwiseAbs().mean());
    h.diagonal().array() += 1e-8 * scale;
    warn(std::string("singular block system in ") + what + "; added 1e-8 ridge");
    llt.compute(h);
    if (llt.info() != Eigen::Success) throw Error(std::string("block system in ") + what + " is not positive definite");
    return llt.solve(rhs);
}

double curvature(LossFamily family)
{
    // gaussian: exact second derivative of (y - eta)^2; bernoulli: 1/4 bound
    return family == LossFamily::gaussian ? 2.0 : 0.25;
}

} // namespace

FitState init(const Dataset& data, const ModelConfig& config, std::uint64_t seed)
{
    config.validate();
    data.validate();
    if (config.loss == LossFamily::bernoulli && ((data.response.array() < 0.0) || (data.response.array() > 1.0)).any())
        throw Error("bernoulli responses must lie in [0, 1]");

    FitState state;
    state.rng_seed = seed;
    Model& model = state.model;
    model.config = config;
    model.feature_names = data.column_names;
    if (model.feature_names.empty())
        for (Eigen::Index j = 0; j < data.cols(); ++j) model.feature_names.push_back("x" + std::to_string(j + 1));

    const int p = static_cast<int>(data.cols());
    for (int j = 0; j < p; ++j) {
        try {
            model.specs.push_back(make_spec(data.column(j), config.basis_size(j), config.spline_degree,
                                            config.penalty_order, j));
        } catch (const Error& e) {
            throw Error("feature '" + model.feature_names[static_cast<std::size_t>(j)] + "': " + e.what());
        }
        state.bases.push_back(eval_basis_matrix(data.column(j), model.specs.back()));
    }
    state.penalties = make_penalties(model.specs);
    model.table = homogeneous_smoothing(state.bases, state.penalties, config.resolved_df(), config.resolved_factors());

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    model.params.theta.alpha0 = initial_intercept(config.loss, data.response);
    for (const auto& spec : model.specs) model.params.theta.beta.push_back(Eigen::VectorXd::Zero(spec.num_basis));
    for (int d = 2; d <= config.max_degree; ++d) {
        LatentTensor t;
        t.degree = d;
        for (const auto& spec : model.specs) {
            Eigen::MatrixXd g(spec.num_basis, config.factors(d));
            for (Eigen::Index k = 0; k < g.size(); ++k) g.data()[k] = config.gamma_init_sd * normal(rng);
            t.gamma.push_back(std::move(g));
        }
        model.params.latents.push_back(std::move(t));
    }

    synchronize(state, data);
    return state;
}

void synchronize(FitState& state, const Dataset& data)
{
    const Model& model = state.model;
    const Eigen::Index n = data.rows();
    const int p = model.num_features();
    if (static_cast<int>(state.bases.size()) != p || (p > 0 && state.bases.front().rows() != n))
        throw Error("fit state caches do not match the dataset");

    state.eta_hat = Eigen::VectorXd::Constant(n, model.params.theta.alpha0);
    for (int j = 0; j < p; ++j)
        state.eta_hat.noalias() += state.bases[static_cast<std::size_t>(j)].values * model.params.theta.beta[static_cast<std::size_t>(j)];

    state.phi_cache.phi.clear();
    state.phi_cache.powers.clear();
    for (const auto& latent : model.params.latents) {
        const int d = latent.degree;
        const int factors = latent.num_factors();
        RowMatrix phi(n, static_cast<Eigen::Index>(p) * factors);
        for (int j = 0; j < p; ++j)
            phi.middleCols(static_cast<Eigen::Index>(j) * factors, factors) =
                state.bases[static_cast<std::size_t>(j)].values * latent.gamma[static_cast<std::size_t>(j)];

        RowMatrix powers = RowMatrix::Zero(n, static_cast<Eigen::Index>(factors) * d);
        std::vector<double> full(static_cast<std::size_t>(d + 1));
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int f = 0; f < factors; ++f) {
                full[0] = p;
                std::fill(full.begin() + 1, full.end(), 0.0);
                for (int j = 0; j < p; ++j) {
                    const double v = phi(i, static_cast<Eigen::Index>(j) * factors + f);
                    double pw = 1.0;
                    for (int t = 1; t <= d; ++t) {
                        pw *= v;
                        full[static_cast<std::size_t>(t)] += pw;
                    }
                }
                for (int t = 1; t <= d; ++t) powers(i, static_cast<Eigen::Index>(f) * d + t - 1) = full[static_cast<std::size_t>(t)];
                state.eta_hat(i) += d > p ? 0.0 : ahot_recursion(d, full)[static_cast<std::size_t>(d)];
            }
        }
        state.phi_cache.phi.push_back(std::move(phi));
        state.phi_cache.powers.push_back(std::move(powers));
    }
}

GradientResult gradient(const FitState& state, const Dataset& data, std::span<const Eigen::Index> batch,
                        double penalty_scale)
{
    const Model& model = state.model;
    const auto& params = model.params;
    const int p = model.num_features();
    const LossFamily family = model.config.loss;

    GradientResult out;
    out.grad = params.zeros_like();

    // per-degree scratch: phi[f*p + j], powers[f*(d+1) + t], ahots[f*(d+1) + k]
    struct Scratch
    {
        std::vector<double> phi, powers, ahots;
    };
    std::vector<Scratch> scratch(params.latents.size());
    for (std::size_t k = 0; k < params.latents.size(); ++k) {
        const int d = params.latents[k].degree;
        const auto factors = static_cast<std::size_t>(params.latents[k].num_factors());
        scratch[k].phi.resize(factors * static_cast<std::size_t>(p));
        scratch[k].powers.resize(factors * static_cast<std::size_t>(d + 1));
        scratch[k].ahots.resize(factors * static_cast<std::size_t>(d + 1));
    }
    std::vector<double> partials(static_cast<std::size_t>(p));

    for (const Eigen::Index i : batch) {
        double eta = params.theta.alpha0;
        for (int j = 0; j < p; ++j) {
            const auto& beta = params.theta.beta[static_cast<std::size_t>(j)];
            eta += phi_eval(state.bases[static_cast<std::size_t>(j)].row(i), {beta.data(), static_cast<std::size_t>(beta.size())});
        }
        for (std::size_t k = 0; k < params.latents.size(); ++k) {
            const auto& latent = params.latents[k];
            const int d = latent.degree;
            const int factors = latent.num_factors();
            auto& s = scratch[k];
            for (int f = 0; f < factors; ++f) {
                double* phi = s.phi.data() + static_cast<std::size_t>(f * p);
                for (int j = 0; j < p; ++j)
                    phi[j] = phi_eval(state.bases[static_cast<std::size_t>(j)].row(i),
                                      col_span(latent.gamma[static_cast<std::size_t>(j)], f));
                const std::span<double> pw(s.powers.data() + f * (d + 1), static_cast<std::size_t>(d + 1));
                const std::span<double> ah(s.ahots.data() + f * (d + 1), static_cast<std::size_t>(d + 1));
                power_sums_into({phi, static_cast<std::size_t>(p)}, pw);
                ahot_recursion_into(pw, ah);
                if (d <= p) eta += ah[static_cast<std::size_t>(d)];
            }
        }

        const double y = data.response(i);
        out.loss += pointwise_loss(family, y, eta);
        const double dl = loss_derivative(family, y, eta);

        out.grad.theta.alpha0 += dl;
        for (int j = 0; j < p; ++j) {
            auto row = state.bases[static_cast<std::size_t>(j)].row(i);
            auto& g = out.grad.theta.beta[static_cast<std::size_t>(j)];
            for (std::size_t m = 0; m < row.size(); ++m) g(static_cast<Eigen::Index>(m)) += dl * row[m];
        }
        for (std::size_t k = 0; k < params.latents.size(); ++k) {
            const auto& latent = params.latents[k];
            const int d = latent.degree;
            const int factors = latent.num_factors();
            const auto& s = scratch[k];
            auto& gl = out.grad.latents[k];
            for (int f = 0; f < factors; ++f) {
                const std::size_t off = static_cast<std::size_t>(f * (d + 1));
                ahot_partials(d, {s.phi.data() + f * p, static_cast<std::size_t>(p)},
                              {s.powers.data() + off, static_cast<std::size_t>(d + 1)},
                              {s.ahots.data() + off, static_cast<std::size_t>(d + 1)}, partials);
                for (int j = 0; j < p; ++j) {
                    const double c = dl * partials[static_cast<std::size_t>(j)];
                    if (c == 0.0) continue;
                    auto row = state.bases[static_cast<std::size_t>(j)].row(i);
                    double* g = gl.gamma[static_cast<std::size_t>(j)].col(f).data();
                    for (std::size_t m = 0; m < row.size(); ++m) g[m] += c * row[m];
                }
            }
        }
    }

    if (penalty_scale != 0.0) {
        const auto& table = model.table;
        for (int j = 0; j < p; ++j) {
            const double lambda = table.at(1, j, 0);
            if (lambda == 0.0) continue;
            const auto& P = state.penalties[static_cast<std::size_t>(j)].values;
            out.grad.theta.beta[static_cast<std::size_t>(j)].noalias() +=
                penalty_scale * lambda * (P * params.theta.beta[static_cast<std::size_t>(j)]);
        }
        for (std::size_t k = 0; k < params.latents.size(); ++k) {
            const auto& latent = params.latents[k];
            for (int j = 0; j < p; ++j) {
                const auto& P = state.penalties[static_cast<std::size_t>(j)].values;
                const auto& g = latent.gamma[static_cast<std::size_t>(j)];
                for (Eigen::Index f = 0; f < g.cols(); ++f) {
                    const double lambda = table.at(latent.degree, j, static_cast<int>(f));
                    if (lambda == 0.0) continue;
                    out.grad.latents[k].gamma[static_cast<std::size_t>(j)].col(f).noalias() +=
                        penalty_scale * lambda * (P * g.col(f));
                }
            }
        }
    }
    return out;
}

double state_objective(const FitState& state, const Dataset& data)
{
    double loss = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i)
        loss += pointwise_loss(state.model.config.loss, data.response(i), state.eta_hat(i));
    return loss + 0.5 * penalty_value(state.model.params, state.model.table, state.penalties);
}

FitState fit_adam(const Dataset& data, const ModelConfig& config, const TrainOptions& options)
{
    options.validate();
    data.validate();
    const Eigen::Index n = data.rows();
    auto n_valid = static_cast<Eigen::Index>(std::llround(options.validation_fraction * static_cast<double>(n)));
    n_valid = std::clamp<Eigen::Index>(n_valid, 1, n - 2);

    std::mt19937_64 rng(options.seed);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    const std::span<const Eigen::Index> all(order);
    const Dataset train = data.subset(all.first(static_cast<std::size_t>(n - n_valid)));
    const Dataset valid = data.subset(all.last(static_cast<std::size_t>(n_valid)));

    FitState state = init(train, config, options.seed);
    Model& model = state.model;
    std::vector<BasisMatrix> valid_bases;
    for (int j = 0; j < model.num_features(); ++j)
        valid_bases.push_back(eval_basis_matrix(valid.column(j), model.specs[static_cast<std::size_t>(j)]));

    const auto valid_loss = [&] {
        double total = 0.0;
        for (Eigen::Index i = 0; i < valid.rows(); ++i)
            total += pointwise_loss(config.loss, valid.response(i), eta_from_bases(model, valid_bases, i));
        return total / static_cast<double>(valid.rows());
    };

    const std::size_t dim = model.params.size();
    std::vector<double> theta(dim), grad(dim), m1(dim, 0.0), m2(dim, 0.0);
    model.params.pack(theta);

    Parameters best = model.params;
    double best_loss = valid_loss();
    int best_epoch = 0;
    int since_best = 0;
    long step = 0;

    const Eigen::Index n_train = train.rows();
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n_train));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});

    for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(rows.begin(), rows.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < rows.size(); start += static_cast<std::size_t>(options.batch_size)) {
            const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(options.batch_size), rows.size() - start);
            const std::span<const Eigen::Index> batch(rows.data() + start, len);
            const auto g = gradient(state, train, batch, static_cast<double>(len) / static_cast<double>(n_train));
            epoch_loss += g.loss;
            g.grad.pack(grad);

            ++step;
            const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(step));
            for (std::size_t k = 0; k < dim; ++k) {
                m1[k] = options.beta1 * m1[k] + (1.0 - options.beta1) * grad[k];
                m2[k] = options.beta2 * m2[k] + (1.0 - options.beta2) * grad[k] * grad[k];
                theta[k] -= options.learning_rate * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + options.epsilon);
            }
            model.params.unpack(theta);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(n_train);
        rec.valid_loss = valid_loss();
        rec.penalty = penalty_value(model.params, model.table, state.penalties);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        state.history.push_back(rec);
        state.epoch = epoch;
        if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.valid_loss))
            throw Error("diverged at epoch " + std::to_string(epoch));

        if (rec.valid_loss < best_loss) {
            best_loss = rec.valid_loss;
            best = model.params;
            best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= options.patience) {
            state.converged = true;
            break;
        }
    }

    model.params = std::move(best);
    state.best_epoch = best_epoch;
    synchronize(state, train);
    return state;
}

void bcd_update_intercept(FitState& state, const Dataset& data)
{
    const LossFamily family = state.model.config.loss;
    const Eigen::Index n = data.rows();
    double g = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) g += loss_derivative(family, data.response(i), state.eta_hat(i));
    const double delta = -g / (curvature(family) * static_cast<double>(n));
    state.model.params.theta.alpha0 += delta;
    state.eta_hat.array() += delta;
}

void bcd_update_beta(FitState& state, const Dataset& data, int feature)
{
    const auto j = static_cast<std::size_t>(feature);
    const LossFamily family = state.model.config.loss;
    const auto& basis = state.bases[j].values;
    auto& beta = state.model.params.theta.beta[j];
    const auto& P = state.penalties[j].values;
    const double lambda = state.model.table.at(1, feature, 0);

    Eigen::VectorXd dl(data.rows());
    for (Eigen::Index i = 0; i < data.rows(); ++i) dl(i) = loss_derivative(family, data.response(i), state.eta_hat(i));

    Eigen::MatrixXd h = curvature(family) * (basis.transpose() * basis);
    h += lambda * P;
    const Eigen::VectorXd g = basis.transpose() * dl + lambda * (P * beta);
    const Eigen::VectorXd delta = -solve_block(std::move(h), g, "univariate block");
    beta += delta;
    state.eta_hat.noalias() += basis * delta;
}

void bcd_update_fiber(FitState& state, const Dataset& data, int degree, int factor, int feature)
{
    auto& latent = state.model.latent(degree);
    const auto k = static_cast<std::size_t>(degree - 2);
    const auto j = static_cast<std::size_t>(feature);
    const int factors = latent.num_factors();
    const int p = state.model.num_features();
    const LossFamily family = state.model.config.loss;
    const auto& basis = state.bases[j].values;
    const auto& P = state.penalties[j].values;
    const double lambda = state.model.table.at(degree, feature, factor);
    auto& phi = state.phi_cache.phi[k];
    auto& powers = state.phi_cache.powers[k];
    const Eigen::Index n = data.rows();
    const Eigen::Index phi_col = static_cast<Eigen::Index>(feature) * factors + factor;

    // eta is affine in the fiber: eta_i = const + zeta_i * B_j(x_ij)^T gamma
    Eigen::VectorXd zeta(n);
    std::vector<double> pw(static_cast<std::size_t>(degree + 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        pw[0] = p;
        for (int t = 1; t <= degree; ++t) pw[static_cast<std::size_t>(t)] = powers(i, static_cast<Eigen::Index>(factor) * degree + t - 1);
        zeta(i) = multilinearity_split(degree, phi(i, phi_col), pw).second;
    }

    const double c = curvature(family);
    Eigen::MatrixXd h = lambda * P;
    Eigen::VectorXd g = lambda * (P * latent.gamma[j].col(factor));
    Eigen::MatrixXd weighted(n, basis.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double dl = loss_derivative(family, data.response(i), state.eta_hat(i));
        weighted.row(i) = zeta(i) * basis.row(i);
        g.noalias() += dl * weighted.row(i).transpose();
    }
    h.noalias() += c * (weighted.transpose() * weighted);

    const Eigen::VectorXd delta = -solve_block(std::move(h), g, "latent fiber block");
    latent.gamma[j].col(factor) += delta;

    const Eigen::VectorXd dphi = basis * delta;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double old_v = phi(i, phi_col);
        const double new_v = old_v + dphi(i);
        phi(i, phi_col) = new_v;
        double po = 1.0, pn = 1.0;
        for (int t = 1; t <= degree; ++t) {
            po *= old_v;
            pn *= new_v;
            powers(i, static_cast<Eigen::Index>(factor) * degree + t - 1) += pn - po;
        }
        state.eta_hat(i) += zeta(i) * dphi(i);
    }
}

void bcd_sweep(FitState& state, const Dataset& data)
{
    bcd_update_intercept(state, data);
    const int p = state.model.num_features();
    for (int j = 0; j < p; ++j) bcd_update_beta(state, data, j);
    for (int d = 2; d <= state.model.config.max_degree; ++d) {
        const int factors = state.model.latent(d).num_factors();
        for (int f = 0; f < factors; ++f)
            for (int j = 0; j < p; ++j) bcd_update_fiber(state, data, d, f, j);
    }
}

FitState fit_bcd(const Dataset& data, const ModelConfig& config, const TrainOptions& options)
{
    options.validate();
    FitState state = init(data, config, options.seed);
    double previous = state_objective(state, data);
    for (int sweep = 1; sweep <= options.max_epochs; ++sweep) {
        const auto t0 = std::chrono::steady_clock::now();
        bcd_sweep(state, data);
        const double current = state_objective(state, data);
        EpochRecord rec;
        rec.epoch = sweep;
        rec.penalty = penalty_value(state.model.params, state.model.table, state.penalties);
        rec.train_loss = (current - 0.5 * rec.penalty) / static_cast<double>(data.rows());
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        state.history.push_back(rec);
        state.epoch = sweep;
        state.best_epoch = sweep;
        if (!std::isfinite(current)) throw Error("diverged at epoch " + std::to_string(sweep));
        if (previous - current <= options.bcd_tolerance * std::abs(previous)) {
            state.converged = true;
            break;
        }
        previous = current;
    }
    if (!state.converged)
        warn("BCD: slow convergence, objective still decreasing after " + std::to_string(state.epoch) + " sweeps");
    // clears drift accumulated by the incremental cache updates
    synchronize(state, data);
    return state;
}

FitState fit(const Dataset& data, const ModelConfig& config, const TrainOptions& options)
{
    return options.optimizer == Optimizer::adam ? fit_adam(data, config, options) : fit_bcd(data, config, options);
}

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history)
{
    out << "epoch,train_loss,valid_loss,penalty,seconds\n";
    out.precision(10);
    for (const auto& r : history) {
        out << r.epoch << ',' << r.train_loss << ',';
        if (std::isfinite(r.valid_loss)) out << r.valid_loss;
        out << ',' << r.penalty << ',' << r.seconds << '\n';
    }
}

} // namespace ahofm
