#pragma once

#include <ahofm/core.hpp>
#include <ahofm/train.hpp>

#include <string>
#include <vector>

namespace ahofm {

struct RunConfig
{
    ModelConfig model;
    TrainOptions train;
};

/// Applies one key=value setting. Recognized keys:
///   degree, factors, factors.<d>, df, df.<d>, num_basis, num_basis.<j>,
///   spline_degree, penalty_order, loss, init_sd, optimizer, batch_size,
///   epochs, learning_rate, patience, validation_fraction, seed,
///   bcd_tolerance
void apply_config_value(RunConfig& config, const std::string& key, const std::string& value);

/// Flat key=value text; '#' starts a comment.
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig load_config_file(const std::string& path, RunConfig base = {});

} // namespace ahofm
