#pragma once

#include <ahofm/basis.hpp>
#include <ahofm/dataset.hpp>
#include <ahofm/smoothing.hpp>

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ahofm {

enum class LossFamily { gaussian, bernoulli };

std::string to_string(LossFamily family);
LossFamily parse_loss_family(const std::string& name);

/// Model structure: interaction degree, latent factor counts, df targets and
/// spline defaults. Per-degree maps override the defaults.
struct ModelConfig
{
    int max_degree = 2;
    int default_factors = 5;
    double default_df = 5.0;
    std::map<int, int> factor_counts;  // degree >= 2
    std::map<int, double> df_targets;  // degree >= 1
    LossFamily loss = LossFamily::gaussian;
    int num_basis = 10;
    int spline_degree = 3;
    int penalty_order = 2;
    std::map<int, int> num_basis_overrides; // feature index -> M_j
    double gamma_init_sd = 0.1;

    int factors(int degree) const;
    double df(int degree) const;
    int basis_size(int feature) const;
    std::map<int, double> resolved_df() const;
    std::map<int, int> resolved_factors() const;
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

/// Latent coefficients of one interaction degree. gamma[j] is M_j x F_d and
/// its columns are the fibers gamma_{j,f}.
struct LatentTensor
{
    int degree = 2;
    std::vector<Eigen::MatrixXd> gamma;

    int num_factors() const { return gamma.empty() ? 0 : static_cast<int>(gamma.front().cols()); }
    bool operator==(const LatentTensor&) const = default;
};

struct ThetaParams
{
    double alpha0 = 0.0;
    std::vector<Eigen::VectorXd> beta;

    bool operator==(const ThetaParams&) const = default;
};

/// Everything the optimizer touches.
struct Parameters
{
    ThetaParams theta;
    std::vector<LatentTensor> latents; // latents[d - 2]

    std::size_t size() const;
    void pack(std::span<double> out) const;
    void unpack(std::span<const double> in);
    /// Same shapes, all zeros.
    Parameters zeros_like() const;

    bool operator==(const Parameters&) const = default;
};

struct Model
{
    ModelConfig config;
    std::vector<SplineSpec> specs;
    std::vector<std::string> feature_names;
    SmoothingTable table;
    Parameters params;

    int num_features() const { return static_cast<int>(specs.size()); }
    const LatentTensor& latent(int degree) const;
    LatentTensor& latent(int degree);
};

/// Cached factor curves phi_{j,f}(x_ij) and their power sums.
/// phi[d-2] is n x (p*F_d) with column j*F_d + f; powers[d-2] is
/// n x (F_d*d) with column f*d + (t-1) holding sum_j phi^t.
struct PhiCache
{
    std::vector<RowMatrix> phi;
    std::vector<RowMatrix> powers;

    std::size_t bytes() const;
};

std::vector<PenaltyMatrix> make_penalties(std::span<const SplineSpec> specs);

double phi_eval(std::span<const double> basis_row, std::span<const double> gamma_fiber);

/// Pairwise factorized interaction of a p x F matrix of factor curves.
double afm_pairwise(const Eigen::MatrixXd& phi);

/// out[t] = sum_j phi_j^t for t = 1..max_t; out[0] = p.
std::vector<double> power_sums(std::span<const double> phi, int max_t);

void power_sums_into(std::span<const double> phi, std::span<double> out);

/// Phi^(0..degree) from power sums (powers[t] for t = 1..degree).
std::vector<double> ahot_recursion(int degree, std::span<const double> powers);
void ahot_recursion_into(std::span<const double> powers, std::span<double> out);

/// Degree-d additive higher-order term of one factor.
double ahot(int degree, std::span<const double> phi);

/// out[j] = dPhi^(d) / dphi_j via the differentiated recursion.
void ahot_partials(int degree, std::span<const double> phi, std::span<const double> powers,
                   std::span<const double> ahots, std::span<double> out);

/// (Phi^(d)_{not j}, Phi^(d-1)_{not j}) for factor f of a p x F matrix.
std::pair<double, double> multilinearity_split(int degree, int factor, int feature, const Eigen::MatrixXd& phi);

/// Same split computed from the full power sums of one factor by removing
/// feature j's contribution.
std::pair<double, double> multilinearity_split(int degree, double phi_j, std::span<const double> powers);

double predict_row(std::span<const double> x, const Model& model);

/// h(eta): identity for gaussian, logistic for bernoulli.
double response_scale(LossFamily family, double eta);
double predict_response(std::span<const double> x, const Model& model);

/// eta at row i, reading basis rows from cached matrices.
double eta_from_bases(const Model& model, std::span<const BasisMatrix> bases, Eigen::Index i);

double penalty_value(const Parameters& params, const SmoothingTable& table,
                     std::span<const PenaltyMatrix> penalties);

double pointwise_loss(LossFamily family, double y, double eta);
double loss_derivative(LossFamily family, double y, double eta);

/// sum_i loss(y_i, eta_i) + penalty / 2, with eta from predict_row.
double objective(const Dataset& data, const Model& model, std::span<const PenaltyMatrix> penalties);

} // namespace ahofm
