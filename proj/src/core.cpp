#include <ahofm/core.hpp>
#include <ahofm/error.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace ahofm {

std::string to_string(LossFamily family)
{
    return family == LossFamily::gaussian ? "gaussian" : "bernoulli";
}

LossFamily parse_loss_family(const std::string& name)
{
    if (name == "gaussian") return LossFamily::gaussian;
    if (name == "bernoulli") return LossFamily::bernoulli;
    throw Error("unknown loss family '" + name + "' (expected gaussian or bernoulli)");
}

int ModelConfig::factors(int degree) const
{
    auto it = factor_counts.find(degree);
    return it == factor_counts.end() ? default_factors : it->second;
}

double ModelConfig::df(int degree) const
{
    auto it = df_targets.find(degree);
    return it == df_targets.end() ? default_df : it->second;
}

int ModelConfig::basis_size(int feature) const
{
    auto it = num_basis_overrides.find(feature);
    return it == num_basis_overrides.end() ? num_basis : it->second;
}

std::map<int, double> ModelConfig::resolved_df() const
{
    std::map<int, double> out;
    for (int d = 1; d <= max_degree; ++d) out[d] = df(d);
    return out;
}

std::map<int, int> ModelConfig::resolved_factors() const
{
    std::map<int, int> out;
    for (int d = 2; d <= max_degree; ++d) out[d] = factors(d);
    return out;
}

void ModelConfig::validate() const
{
    if (max_degree < 1) throw Error("interaction degree must be at least 1");
    for (int d = 2; d <= max_degree; ++d) {
        if (factors(d) < 1) throw Error("factor count for degree " + std::to_string(d) + " must be at least 1");
    }
    for (int d = 1; d <= max_degree; ++d) {
        if (!(df(d) > 0.0)) throw Error("df target for degree " + std::to_string(d) + " must be positive");
    }
    if (spline_degree < 0) throw Error("spline degree must be non-negative");
    if (penalty_order < 1) throw Error("penalty order must be at least 1");
    if (num_basis < spline_degree + 1 || num_basis < penalty_order + 1)
        throw Error("num_basis " + std::to_string(num_basis) + " too small for spline degree and penalty order");
    if (gamma_init_sd < 0.0) throw Error("gamma init scale must be non-negative");
}

std::size_t Parameters::size() const
{
    std::size_t n = 1;
    for (const auto& b : theta.beta) n += static_cast<std::size_t>(b.size());
    for (const auto& t : latents)
        for (const auto& g : t.gamma) n += static_cast<std::size_t>(g.size());
    return n;
}

void Parameters::pack(std::span<double> out) const
{
    if (out.size() != size()) throw Error("parameter buffer has wrong size");
    std::size_t k = 0;
    out[k++] = theta.alpha0;
    for (const auto& b : theta.beta)
        for (Eigen::Index m = 0; m < b.size(); ++m) out[k++] = b(m);
    for (const auto& t : latents)
        for (const auto& g : t.gamma)
            for (Eigen::Index m = 0; m < g.size(); ++m) out[k++] = g.data()[m];
}

void Parameters::unpack(std::span<const double> in)
{
    if (in.size() != size()) throw Error("parameter buffer has wrong size");
    std::size_t k = 0;
    theta.alpha0 = in[k++];
    for (auto& b : theta.beta)
        for (Eigen::Index m = 0; m < b.size(); ++m) b(m) = in[k++];
    for (auto& t : latents)
        for (auto& g : t.gamma)
            for (Eigen::Index m = 0; m < g.size(); ++m) g.data()[m] = in[k++];
}

Parameters Parameters::zeros_like() const
{
    Parameters z = *this;
    z.theta.alpha0 = 0.0;
    for (auto& b : z.theta.beta) b.setZero();
    for (auto& t : z.latents)
        for (auto& g : t.gamma) g.setZero();
    return z;
}

const LatentTensor& Model::latent(int degree) const
{
    const auto idx = static_cast<std::size_t>(degree - 2);
    if (degree < 2 || idx >= params.latents.size()) throw Error("model has no latent tensor of degree " + std::to_string(degree));
    return params.latents[idx];
}

LatentTensor& Model::latent(int degree)
{
    return const_cast<LatentTensor&>(std::as_const(*this).latent(degree));
}

std::size_t PhiCache::bytes() const
{
    std::size_t total = 0;
    for (const auto& m : phi) total += static_cast<std::size_t>(m.size()) * sizeof(double);
    for (const auto& m : powers) total += static_cast<std::size_t>(m.size()) * sizeof(double);
    return total;
}

std::vector<PenaltyMatrix> make_penalties(std::span<const SplineSpec> specs)
{
    std::vector<PenaltyMatrix> out;
    out.reserve(specs.size());
    for (const auto& s : specs) out.push_back(diff_penalty(s.num_basis, s.penalty_order));
    return out;
}

double phi_eval(std::span<const double> basis_row, std::span<const double> gamma_fiber)
{
    if (basis_row.size() != gamma_fiber.size())
        throw Error("basis row has length " + std::to_string(basis_row.size()) + " but fiber has length " +
                    std::to_string(gamma_fiber.size()));
    double acc = 0.0;
    for (std::size_t m = 0; m < basis_row.size(); ++m) acc += basis_row[m] * gamma_fiber[m];
    return acc;
}

double afm_pairwise(const Eigen::MatrixXd& phi)
{
    double total = 0.0;
    for (Eigen::Index f = 0; f < phi.cols(); ++f) {
        const double sum = phi.col(f).sum();
        total += sum * sum - phi.col(f).squaredNorm();
    }
    return 0.5 * total;
}

void power_sums_into(std::span<const double> phi, std::span<double> out)
{
    std::fill(out.begin(), out.end(), 0.0);
    out[0] = static_cast<double>(phi.size());
    const std::size_t max_t = out.size() - 1;
    for (double v : phi) {
        double pw = 1.0;
        for (std::size_t t = 1; t <= max_t; ++t) {
            pw *= v;
            out[t] += pw;
        }
    }
}

std::vector<double> power_sums(std::span<const double> phi, int max_t)
{
    std::vector<double> out(static_cast<std::size_t>(max_t + 1), 0.0);
    power_sums_into(phi, out);
    return out;
}

void ahot_recursion_into(std::span<const double> powers, std::span<double> out)
{
    if (powers.size() < out.size()) throw Error("not enough power sums for AHOT degree");
    out[0] = 1.0;
    for (std::size_t k = 1; k < out.size(); ++k) {
        double acc = 0.0;
        double sign = 1.0;
        for (std::size_t t = 1; t <= k; ++t) {
            acc += sign * out[k - t] * powers[t];
            sign = -sign;
        }
        out[k] = acc / static_cast<double>(k);
    }
}

std::vector<double> ahot_recursion(int degree, std::span<const double> powers)
{
    if (degree < 0) throw Error("AHOT degree must be non-negative");
    std::vector<double> out(static_cast<std::size_t>(degree + 1), 0.0);
    ahot_recursion_into(powers, out);
    return out;
}

double ahot(int degree, std::span<const double> phi)
{
    if (degree < 0) throw Error("AHOT degree must be non-negative");
    if (degree == 0) return 1.0;
    if (static_cast<std::size_t>(degree) > phi.size()) return 0.0;
    const auto powers = power_sums(phi, degree);
    return ahot_recursion(degree, powers)[static_cast<std::size_t>(degree)];
}

void ahot_partials(int degree, std::span<const double> phi, std::span<const double> powers,
                   std::span<const double> ahots, std::span<double> out)
{
    if (out.size() != phi.size()) throw Error("partials buffer has wrong size");
    double dphi[16];
    std::vector<double> heap;
    double* d_ahot = dphi;
    if (degree + 1 > 16) {
        heap.resize(static_cast<std::size_t>(degree + 1));
        d_ahot = heap.data();
    }
    for (std::size_t j = 0; j < phi.size(); ++j) {
        const double v = phi[j];
        d_ahot[0] = 0.0;
        for (int k = 1; k <= degree; ++k) {
            double acc = 0.0;
            double sign = 1.0;
            double v_pow = 1.0; // v^(t-1)
            for (int t = 1; t <= k; ++t) {
                acc += sign * (d_ahot[k - t] * powers[static_cast<std::size_t>(t)] +
                               ahots[static_cast<std::size_t>(k - t)] * t * v_pow);
                v_pow *= v;
                sign = -sign;
            }
            d_ahot[k] = acc / k;
        }
        out[j] = d_ahot[degree];
    }
}

std::pair<double, double> multilinearity_split(int degree, int factor, int feature, const Eigen::MatrixXd& phi)
{
    if (degree < 1) throw Error("multilinearity split needs degree >= 1");
    if (feature < 0 || feature >= phi.rows()) throw Error("feature index out of range");
    if (factor < 0 || factor >= phi.cols()) throw Error("factor index out of range");
    std::vector<double> rest;
    rest.reserve(static_cast<std::size_t>(phi.rows() - 1));
    for (Eigen::Index k = 0; k < phi.rows(); ++k)
        if (k != feature) rest.push_back(phi(k, factor));
    return {ahot(degree, rest), ahot(degree - 1, rest)};
}

std::pair<double, double> multilinearity_split(int degree, double phi_j, std::span<const double> powers)
{
    if (degree < 1) throw Error("multilinearity split needs degree >= 1");
    double reduced[16];
    std::vector<double> heap;
    double* r = reduced;
    if (degree + 1 > 16) {
        heap.resize(static_cast<std::size_t>(degree + 1));
        r = heap.data();
    }
    r[0] = powers[0] - 1.0;
    double pw = 1.0;
    for (int t = 1; t <= degree; ++t) {
        pw *= phi_j;
        r[t] = powers[static_cast<std::size_t>(t)] - pw;
    }
    const auto rest = ahot_recursion(degree, {r, static_cast<std::size_t>(degree + 1)});
    return {rest[static_cast<std::size_t>(degree)], rest[static_cast<std::size_t>(degree - 1)]};
}

namespace {

/// eta given a callable returning feature j's basis row.
template <class RowFn>
double assemble_eta(const Model& model, RowFn&& basis_row)
{
    const int p = model.num_features();
    double eta = model.params.theta.alpha0;
    for (int j = 0; j < p; ++j) {
        const auto& beta = model.params.theta.beta[static_cast<std::size_t>(j)];
        eta += phi_eval(basis_row(j), {beta.data(), static_cast<std::size_t>(beta.size())});
    }
    std::vector<double> phi(static_cast<std::size_t>(p));
    for (const auto& latent : model.params.latents) {
        const int d = latent.degree;
        const int factors = latent.num_factors();
        for (int f = 0; f < factors; ++f) {
            for (int j = 0; j < p; ++j) {
                const auto& g = latent.gamma[static_cast<std::size_t>(j)];
                phi[static_cast<std::size_t>(j)] =
                    phi_eval(basis_row(j), {g.col(f).data(), static_cast<std::size_t>(g.rows())});
            }
            eta += ahot(d, phi);
        }
    }
    return eta;
}

} // namespace

double predict_row(std::span<const double> x, const Model& model)
{
    const int p = model.num_features();
    if (static_cast<int>(x.size()) != p)
        throw Error("row has " + std::to_string(x.size()) + " features but the model expects " + std::to_string(p));
    std::vector<Eigen::VectorXd> rows(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j)
        rows[static_cast<std::size_t>(j)] = eval_basis(x[static_cast<std::size_t>(j)], model.specs[static_cast<std::size_t>(j)]);
    return assemble_eta(model, [&](int j) {
        const auto& r = rows[static_cast<std::size_t>(j)];
        return std::span<const double>(r.data(), static_cast<std::size_t>(r.size()));
    });
}

double response_scale(LossFamily family, double eta)
{
    if (family == LossFamily::gaussian) return eta;
    return 1.0 / (1.0 + std::exp(-eta));
}

double predict_response(std::span<const double> x, const Model& model)
{
    return response_scale(model.config.loss, predict_row(x, model));
}

double eta_from_bases(const Model& model, std::span<const BasisMatrix> bases, Eigen::Index i)
{
    return assemble_eta(model, [&](int j) { return bases[static_cast<std::size_t>(j)].row(i); });
}

double penalty_value(const Parameters& params, const SmoothingTable& table, std::span<const PenaltyMatrix> penalties)
{
    double total = 0.0;
    for (std::size_t j = 0; j < params.theta.beta.size(); ++j) {
        const auto& b = params.theta.beta[j];
        const double lambda = table.at(1, static_cast<int>(j), 0);
        if (lambda != 0.0) total += lambda * b.dot(penalties[j].values * b);
    }
    for (const auto& latent : params.latents) {
        for (std::size_t j = 0; j < latent.gamma.size(); ++j) {
            const auto& g = latent.gamma[j];
            for (Eigen::Index f = 0; f < g.cols(); ++f) {
                const double lambda = table.at(latent.degree, static_cast<int>(j), static_cast<int>(f));
                if (lambda != 0.0) total += lambda * g.col(f).dot(penalties[j].values * g.col(f));
            }
        }
    }
    return total;
}

double pointwise_loss(LossFamily family, double y, double eta)
{
    if (family == LossFamily::gaussian) {
        const double r = y - eta;
        return r * r;
    }
    // log(1 + e^eta) - y eta
    const double softplus = std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta)));
    return softplus - y * eta;
}

double loss_derivative(LossFamily family, double y, double eta)
{
    if (family == LossFamily::gaussian) return 2.0 * (eta - y);
    return response_scale(LossFamily::bernoulli, eta) - y;
}

double objective(const Dataset& data, const Model& model, std::span<const PenaltyMatrix> penalties)
{
    double loss = 0.0;
    std::vector<double> x(static_cast<std::size_t>(data.cols()));
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.cols(); ++j) x[static_cast<std::size_t>(j)] = data.features(i, j);
        loss += pointwise_loss(model.config.loss, data.response(i), predict_row(x, model));
    }
    return loss + 0.5 * penalty_value(model.params, model.table, penalties);
}

} // namespace ahofm
