#pragma once
// Independent reference computations used only by the tests. Everything here
// is written the slow, obvious way so it shares no code paths with the
// library.

#include <ahofm/core.hpp>
#include <ahofm/error.hpp>
#include <ahofm/train.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

/// Sum over all increasing index tuples j_1 < ... < j_d of prod phi_{j_t}.
inline double ahot_brute(int d, const std::vector<double>& phi)
{
    const int p = static_cast<int>(phi.size());
    if (d == 0) return 1.0;
    if (d > p) return 0.0;
    std::vector<int> idx(static_cast<std::size_t>(d));
    for (int t = 0; t < d; ++t) idx[static_cast<std::size_t>(t)] = t;
    double total = 0.0;
    while (true) {
        double prod = 1.0;
        for (int t : idx) prod *= phi[static_cast<std::size_t>(t)];
        total += prod;
        int t = d - 1;
        while (t >= 0 && idx[static_cast<std::size_t>(t)] == p - d + t) --t;
        if (t < 0) break;
        ++idx[static_cast<std::size_t>(t)];
        for (int u = t + 1; u < d; ++u) idx[static_cast<std::size_t>(u)] = idx[static_cast<std::size_t>(u - 1)] + 1;
    }
    return total;
}

/// sum_{k<l} sum_f phi(k,f) phi(l,f)
inline double pairwise_brute(const Eigen::MatrixXd& phi)
{
    double total = 0.0;
    for (Eigen::Index k = 0; k < phi.rows(); ++k)
        for (Eigen::Index l = k + 1; l < phi.rows(); ++l)
            for (Eigen::Index f = 0; f < phi.cols(); ++f) total += phi(k, f) * phi(l, f);
    return total;
}

inline double dot_loop(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (std::size_t m = 0; m < a.size(); ++m) s += a[m] * b[m];
    return s;
}

inline double rel_err(double a, double b)
{
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// Eta assembled term by term from the definition, with every d-way product
/// enumerated explicitly.
inline double eta_brute(const ahofm::Model& model, const std::vector<double>& x)
{
    const int p = model.num_features();
    double eta = model.params.theta.alpha0;
    std::vector<Eigen::VectorXd> rows;
    for (int j = 0; j < p; ++j) {
        rows.push_back(ahofm::eval_basis(x[static_cast<std::size_t>(j)], model.specs[static_cast<std::size_t>(j)]));
        eta += rows.back().dot(model.params.theta.beta[static_cast<std::size_t>(j)]);
    }
    for (const auto& lt : model.params.latents) {
        for (int f = 0; f < lt.num_factors(); ++f) {
            std::vector<double> phi;
            for (int j = 0; j < p; ++j) phi.push_back(rows[static_cast<std::size_t>(j)].dot(lt.gamma[static_cast<std::size_t>(j)].col(f)));
            eta += ahot_brute(lt.degree, phi);
        }
    }
    return eta;
}

inline ahofm::Dataset random_dataset(int n, int p, std::uint64_t seed, bool binary = false)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    ahofm::Dataset d;
    d.features.resize(n, p);
    d.response.resize(n);
    for (int j = 0; j < p; ++j) d.column_names.push_back("x" + std::to_string(j + 1));
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < p; ++j) {
            d.features(i, j) = z(rng);
            s += std::sin(d.features(i, j));
        }
        if (binary)
            d.response(i) = (s + z(rng) > 0.0) ? 1.0 : 0.0;
        else
            d.response(i) = s + 0.3 * z(rng);
    }
    return d;
}

/// Initialized state with every parameter perturbed to a generic value.
inline ahofm::FitState random_state(const ahofm::Dataset& data, const ahofm::ModelConfig& config, std::uint64_t seed,
                                    double scale = 0.5)
{
    auto state = ahofm::init(data, config, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> z(0.0, scale);
    auto& params = state.model.params;
    params.theta.alpha0 = z(rng);
    for (auto& b : params.theta.beta)
        for (auto& v : b) v = z(rng);
    for (auto& lt : params.latents)
        for (auto& g : lt.gamma) g = g.unaryExpr([&](double) { return z(rng); });
    ahofm::synchronize(state, data);
    return state;
}

/// Central finite differences of f over the packed parameter vector.
inline std::vector<double> finite_diff(const ahofm::Parameters& at,
                                       const std::function<double(const ahofm::Parameters&)>& f, double h = 1e-6)
{
    std::vector<double> theta(at.size());
    at.pack(theta);
    std::vector<double> out(theta.size());
    ahofm::Parameters probe = at;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const double keep = theta[k];
        theta[k] = keep + h;
        probe.unpack(theta);
        const double up = f(probe);
        theta[k] = keep - h;
        probe.unpack(theta);
        const double down = f(probe);
        theta[k] = keep;
        out[k] = (up - down) / (2.0 * h);
    }
    return out;
}

/// Silences library warnings for the lifetime of the object.
struct QuietWarnings
{
    ahofm::WarningSink previous;
    QuietWarnings() : previous(ahofm::set_warning_sink({})) {}
    ~QuietWarnings() { ahofm::set_warning_sink(previous); }
};

/// Collects warnings for inspection.
struct CaptureWarnings
{
    std::vector<std::string> messages;
    ahofm::WarningSink previous;
    CaptureWarnings()
        : previous(ahofm::set_warning_sink([this](std::string_view m) { messages.emplace_back(m); }))
    {}
    ~CaptureWarnings() { ahofm::set_warning_sink(previous); }
    bool contains(std::string_view needle) const
    {
        return std::any_of(messages.begin(), messages.end(),
                           [&](const std::string& m) { return m.find(needle) != std::string::npos; });
    }
};

} // namespace oracle
