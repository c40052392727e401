#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ahofm {

/// Feature matrix (column-major, so each feature column is contiguous) and
/// response.
struct Dataset
{
    Eigen::MatrixXd features;
    Eigen::VectorXd response;
    std::vector<std::string> column_names;
    std::string target_name = "y";

    Eigen::Index rows() const { return features.rows(); }
    Eigen::Index cols() const { return features.cols(); }

    std::span<const double> column(Eigen::Index j) const
    {
        return {features.data() + j * features.rows(), static_cast<std::size_t>(features.rows())};
    }

    /// Copies the listed rows, in order.
    Dataset subset(std::span<const Eigen::Index> rows) const;

    void validate() const;
};

/// Reads a headered CSV. The target column becomes the response; every other
/// column becomes a feature in header order. Rows with a missing value
/// (empty, NA, NaN) are dropped with a warning.
Dataset ingest_csv(const std::string& path, const std::string& target_column);

/// Reads the named feature columns from a headered CSV (for prediction).
/// Missing values are an error here since rows cannot be dropped silently.
Eigen::MatrixXd read_feature_columns(const std::string& path, const std::vector<std::string>& names);

void write_dataset_csv(std::ostream& out, const Dataset& data);

std::vector<std::string> split_csv_line(const std::string& line);

/// Parses a finite double; returns false for anything else.
bool parse_double(std::string_view text, double& value);

} // namespace ahofm
