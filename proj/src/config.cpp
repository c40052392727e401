#include <ahofm/config.hpp>
#include <ahofm/error.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace ahofm {
namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value)
{
    T out{};
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) throw Error("invalid value '" + value + "' for key '" + key + "'");
    return out;
}

/// Splits "name.<int>" into its parts; index is -1 without a suffix.
std::pair<std::string, int> split_key(const std::string& key)
{
    const auto dot = key.find('.');
    if (dot == std::string::npos) return {key, -1};
    return {key.substr(0, dot), parse_number<int>(key, key.substr(dot + 1))};
}

} // namespace

void apply_config_value(RunConfig& config, const std::string& raw_key, const std::string& raw_value)
{
    const auto key = trim(raw_key);
    const auto value = trim(raw_value);
    const auto [name, index] = split_key(key);
    auto& m = config.model;
    auto& t = config.train;

    if (name == "factors") {
        const int v = parse_number<int>(key, value);
        if (index < 0)
            m.default_factors = v;
        else
            m.factor_counts[index] = v;
    } else if (name == "df") {
        const double v = parse_number<double>(key, value);
        if (index < 0)
            m.default_df = v;
        else
            m.df_targets[index] = v;
    } else if (name == "num_basis") {
        const int v = parse_number<int>(key, value);
        if (index < 0)
            m.num_basis = v;
        else
            m.num_basis_overrides[index] = v;
    } else if (index >= 0) {
        throw Error("key '" + key + "' does not take an index");
    } else if (name == "degree") {
        m.max_degree = parse_number<int>(key, value);
    } else if (name == "spline_degree") {
        m.spline_degree = parse_number<int>(key, value);
    } else if (name == "penalty_order") {
        m.penalty_order = parse_number<int>(key, value);
    } else if (name == "loss") {
        m.loss = parse_loss_family(value);
    } else if (name == "init_sd") {
        m.gamma_init_sd = parse_number<double>(key, value);
    } else if (name == "optimizer") {
        t.optimizer = parse_optimizer(value);
    } else if (name == "batch_size") {
        t.batch_size = parse_number<int>(key, value);
    } else if (name == "epochs") {
        t.max_epochs = parse_number<int>(key, value);
    } else if (name == "learning_rate") {
        t.learning_rate = parse_number<double>(key, value);
    } else if (name == "patience") {
        t.patience = parse_number<int>(key, value);
    } else if (name == "validation_fraction") {
        t.validation_fraction = parse_number<double>(key, value);
    } else if (name == "seed") {
        t.seed = parse_number<std::uint64_t>(key, value);
    } else if (name == "bcd_tolerance") {
        t.bcd_tolerance = parse_number<double>(key, value);
    } else {
        throw Error("unknown config key '" + key + "'");
    }
}

RunConfig parse_config_text(const std::string& text, RunConfig base)
{
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error("config line " + std::to_string(line_no) + ": expected key=value");
        try {
            apply_config_value(base, line.substr(0, eq), line.substr(eq + 1));
        } catch (const Error& e) {
            throw Error("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), std::move(base));
}

} // namespace ahofm
