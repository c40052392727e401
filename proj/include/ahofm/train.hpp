#pragma once

#include <ahofm/core.hpp>

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace ahofm {

enum class Optimizer { adam, bcd };

std::string to_string(Optimizer optimizer);
Optimizer parse_optimizer(const std::string& name);

struct TrainOptions
{
    Optimizer optimizer = Optimizer::adam;
    int batch_size = 128;
    int max_epochs = 1000;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    int patience = 50;
    double validation_fraction = 0.15;
    std::uint64_t seed = 1;
    /// BCD stops once a sweep lowers the objective by less than this
    /// fraction of its value.
    double bcd_tolerance = 1e-9;

    void validate() const;
};

struct EpochRecord
{
    int epoch = 0;
    double train_loss = 0.0;
    double valid_loss = std::numeric_limits<double>::quiet_NaN();
    double penalty = 0.0;
    double seconds = 0.0;
};

/// A model together with the training-set caches it was fitted on. After
/// synchronize(), eta_hat[i] matches predict_row on training row i.
struct FitState
{
    Model model;
    std::vector<BasisMatrix> bases;
    std::vector<PenaltyMatrix> penalties;
    PhiCache phi_cache;
    Eigen::VectorXd eta_hat;
    int epoch = 0;
    int best_epoch = 0;
    bool converged = false;
    std::uint64_t rng_seed = 0;
    std::vector<EpochRecord> history;
};

struct GradientResult
{
    Parameters grad;
    double loss = 0.0; // unpenalized batch loss
};

FitState init(const Dataset& data, const ModelConfig& config, std::uint64_t seed);

/// Recomputes the phi cache and eta_hat from the current parameters.
void synchronize(FitState& state, const Dataset& data);

/// Gradient of sum_{i in batch} loss_i + penalty_scale * penalty / 2.
GradientResult gradient(const FitState& state, const Dataset& data, std::span<const Eigen::Index> batch,
                        double penalty_scale);

/// Full penalized objective from the cached eta_hat.
double state_objective(const FitState& state, const Dataset& data);

FitState fit_adam(const Dataset& data, const ModelConfig& config, const TrainOptions& options);
FitState fit_bcd(const Dataset& data, const ModelConfig& config, const TrainOptions& options);
FitState fit(const Dataset& data, const ModelConfig& config, const TrainOptions& options);

/// Exact (gaussian) or majorized (bernoulli) minimization over one block.
/// Each keeps the phi cache and eta_hat in sync.
void bcd_update_intercept(FitState& state, const Dataset& data);
void bcd_update_beta(FitState& state, const Dataset& data, int feature);
void bcd_update_fiber(FitState& state, const Dataset& data, int degree, int factor, int feature);
/// Intercept, univariate smooths, then degrees ascending, factors, features.
void bcd_sweep(FitState& state, const Dataset& data);

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history);

} // namespace ahofm
