#include <ahofm/dataset.hpp>
#include <ahofm/error.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace ahofm {
namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n\"");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n\"");
    return std::string(s.substr(b, e - b + 1));
}

bool is_missing_token(const std::string& s)
{
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "NAN" || s == "null";
}

struct RawTable
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

RawTable read_table(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    RawTable table;
    std::string line;
    if (!std::getline(in, line)) throw Error("'" + path + "' is empty");
    table.header = split_csv_line(line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != table.header.size())
            throw Error("'" + path + "' line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " fields, expected " +
                        std::to_string(table.header.size()));
        table.rows.push_back(std::move(cells));
    }
    return table;
}

} // namespace

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(std::string_view text, double& value)
{
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    return ec == std::errc() && ptr == end && std::isfinite(value);
}

Dataset Dataset::subset(std::span<const Eigen::Index> rows) const
{
    Dataset out;
    out.column_names = column_names;
    out.target_name = target_name;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.response.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        out.features.row(i) = features.row(rows[r]);
        out.response(i) = response(rows[r]);
    }
    return out;
}

void Dataset::validate() const
{
    if (features.rows() < 2) throw Error("dataset needs at least 2 rows");
    if (features.cols() < 1) throw Error("dataset needs at least 1 feature");
    if (response.size() != features.rows()) throw Error("response length does not match feature rows");
    if (!features.allFinite() || !response.allFinite()) throw Error("non-finite input");
    if (!column_names.empty() && static_cast<Eigen::Index>(column_names.size()) != features.cols())
        throw Error("column name count does not match feature count");
}

Dataset ingest_csv(const std::string& path, const std::string& target_column)
{
    const auto table = read_table(path);
    const auto target_it = std::find(table.header.begin(), table.header.end(), target_column);
    if (target_it == table.header.end()) {
        std::string names;
        for (const auto& h : table.header) names += (names.empty() ? "" : ", ") + h;
        throw Error("target column '" + target_column + "' not found; available columns: " + names);
    }
    const auto target = static_cast<std::size_t>(target_it - table.header.begin());

    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (c != target) feature_cols.push_back(c);

    std::vector<std::vector<double>> values;
    values.reserve(table.rows.size());
    std::size_t dropped = 0;
    for (const auto& row : table.rows) {
        std::vector<double> parsed(table.header.size());
        bool missing = false;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (is_missing_token(row[c])) {
                missing = true;
                continue;
            }
            if (!parse_double(row[c], parsed[c])) {
                if (c == target) throw Error("non-numeric value '" + row[c] + "' in target column '" +
                                             table.header[c] + "'");
                throw Error("non-numeric feature column '" + table.header[c] + "' (value '" + row[c] + "')");
            }
        }
        if (missing) {
            ++dropped;
            continue;
        }
        values.push_back(std::move(parsed));
    }
    if (dropped > 0) warn("dropped " + std::to_string(dropped) + " row(s) with missing values from '" + path + "'");
    if (values.empty()) throw Error("no usable rows in '" + path + "'");

    Dataset data;
    data.target_name = target_column;
    const auto n = static_cast<Eigen::Index>(values.size());
    data.features.resize(n, static_cast<Eigen::Index>(feature_cols.size()));
    data.response.resize(n);
    for (auto c : feature_cols) data.column_names.push_back(table.header[c]);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = values[static_cast<std::size_t>(i)];
        data.response(i) = row[target];
        for (std::size_t k = 0; k < feature_cols.size(); ++k)
            data.features(i, static_cast<Eigen::Index>(k)) = row[feature_cols[k]];
    }
    return data;
}

Eigen::MatrixXd read_feature_columns(const std::string& path, const std::vector<std::string>& names)
{
    const auto table = read_table(path);
    std::vector<std::size_t> cols;
    for (const auto& name : names) {
        auto it = std::find(table.header.begin(), table.header.end(), name);
        if (it == table.header.end()) throw Error("feature column '" + name + "' not found in '" + path + "'");
        cols.push_back(static_cast<std::size_t>(it - table.header.begin()));
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
            double v = 0.0;
            const auto& cell = table.rows[r][cols[k]];
            if (!parse_double(cell, v))
                throw Error("row " + std::to_string(r + 1) + " of '" + path + "' has unusable value '" + cell +
                            "' in column '" + names[k] + "'");
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v;
        }
    }
    return x;
}

void write_dataset_csv(std::ostream& out, const Dataset& data)
{
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        out << (data.column_names.empty() ? "x" + std::to_string(j + 1) : data.column_names[static_cast<std::size_t>(j)])
            << ',';
    }
    out << data.target_name << '\n';
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.cols(); ++j) out << data.features(i, j) << ',';
        out << data.response(i) << '\n';
    }
}

} // namespace ahofm
