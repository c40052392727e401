#include <ahofm/bench.hpp>
#include <ahofm/compare.hpp>
#include <ahofm/config.hpp>
#include <ahofm/dataset.hpp>
#include <ahofm/effects.hpp>
#include <ahofm/error.hpp>
#include <ahofm/model_io.hpp>
#include <ahofm/simulate.hpp>
#include <ahofm/train.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

namespace {

using namespace ahofm;

/// Flags that map one-to-one onto config keys. A flag given on the command
/// line wins over the same key in --config.
struct ConfigFlags
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::map<std::string, std::string> values;
    std::vector<std::string> sets;

    void attach(CLI::App* cmd, bool training)
    {
        cmd->add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed, "random seed");
        cmd->add_option("--set", sets, "extra key=value setting (repeatable)");
        add(cmd, "degree", "--degree", "maximum interaction degree D");
        add(cmd, "factors", "--factors", "latent factors per degree");
        add(cmd, "df", "--df", "degrees of freedom per term");
        add(cmd, "num_basis", "--num-basis", "B-spline basis size per feature");
        add(cmd, "loss", "--loss", "gaussian or bernoulli");
        if (!training) return;
        add(cmd, "optimizer", "--optimizer", "adam or bcd");
        add(cmd, "epochs", "--epochs", "maximum epochs (adam) or sweeps (bcd)");
        add(cmd, "batch_size", "--batch-size", "minibatch size");
        add(cmd, "learning_rate", "--learning-rate", "Adam step size");
        add(cmd, "patience", "--patience", "early stopping patience in epochs");
        add(cmd, "validation_fraction", "--validation-fraction", "held-out fraction for early stopping");
    }

    void add(CLI::App* cmd, const std::string& key, const std::string& flag, const std::string& help)
    {
        cmd->add_option_function<std::string>(flag, [this, key](const std::string& v) { values[key] = v; }, help);
    }

    RunConfig resolve() const
    {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config_file(config_path, cfg);
        for (const auto& [k, v] : values) apply_config_value(cfg, k, v);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw Error("--set expects key=value, got '" + s + "'");
            apply_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        if (seed) cfg.train.seed = *seed;
        cfg.model.validate();
        cfg.train.validate();
        return cfg;
    }
};

/// Writes to the named file, or stdout when the name is empty or "-".
class Output
{
public:
    explicit Output(const std::string& path)
    {
        if (path.empty() || path == "-") return;
        file_ = std::make_unique<std::ofstream>(path);
        if (!*file_) throw Error("cannot open '" + path + "' for writing");
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::vector<int> parse_int_list(const std::string& text)
{
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0.0;
        if (!parse_double(item, v) || v != static_cast<int>(v)) throw Error("invalid integer list '" + text + "'");
        out.push_back(static_cast<int>(v));
    }
    if (out.empty()) throw Error("empty integer list");
    return out;
}

int feature_index(const Model& model, const std::string& name)
{
    for (std::size_t j = 0; j < model.feature_names.size(); ++j)
        if (model.feature_names[j] == name) return static_cast<int>(j);
    double v = 0.0;
    if (parse_double(name, v) && v >= 0 && v < model.num_features() && v == static_cast<int>(v))
        return static_cast<int>(v);
    throw Error("unknown feature '" + name + "'");
}

void combinations(int p, int k, int start, std::vector<int>& cur, std::vector<std::vector<int>>& out)
{
    if (static_cast<int>(cur.size()) == k) {
        out.push_back(cur);
        return;
    }
    for (int j = start; j < p; ++j) {
        cur.push_back(j);
        combinations(p, k, j + 1, cur, out);
        cur.pop_back();
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Additive higher-order factorization machines over tensor-product splines"};
    app.require_subcommand(1);

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "fit a model to a CSV file");
    ConfigFlags fit_flags;
    std::string fit_data, fit_target = "y", fit_model = "model.json", fit_log;
    fit_cmd->add_option("--data", fit_data, "training CSV with a header row")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--target", fit_target, "response column name");
    fit_cmd->add_option("--model", fit_model, "output model file (JSON)");
    fit_cmd->add_option("--log", fit_log, "training log CSV (default: <model>.log.csv)");
    fit_flags.attach(fit_cmd, true);

    // predict
    auto* predict_cmd = app.add_subcommand(
        "predict", "predict from a fitted model; inputs outside the training range are clamped to its boundary");
    std::string pred_model, pred_data, pred_out;
    predict_cmd->add_option("--model", pred_model, "model file")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--data", pred_data, "CSV containing the model's feature columns")
        ->required()
        ->check(CLI::ExistingFile);
    predict_cmd->add_option("--out", pred_out, "output CSV (default stdout)");
    std::optional<std::uint64_t> pred_seed;
    predict_cmd->add_option("--seed", pred_seed, "accepted for uniformity; prediction is deterministic");

    // smooth
    auto* smooth_cmd = app.add_subcommand("smooth", "print the smoothing-parameter table for a data set");
    ConfigFlags smooth_flags;
    std::string smooth_data, smooth_target = "y", smooth_out;
    smooth_cmd->add_option("--data", smooth_data, "CSV with a header row")->required()->check(CLI::ExistingFile);
    smooth_cmd->add_option("--target", smooth_target, "response column name");
    smooth_cmd->add_option("--out", smooth_out, "output CSV (default stdout)");
    smooth_flags.attach(smooth_cmd, false);

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic data set");
    std::string sim_kind = "bivariate_study", sim_out, sim_truth, sim_test_out;
    std::uint64_t sim_seed = 1;
    SimulationParams sim_params;
    sim_cmd->add_option("--kind", sim_kind, "bivariate_study, scaling or interp3d");
    sim_cmd->add_option("--n", sim_params.n, "rows (0 = kind default)");
    sim_cmd->add_option("--p", sim_params.p, "features (0 = kind default)");
    sim_cmd->add_option("--n-test", sim_params.n_test, "extra held-out rows");
    sim_cmd->add_option("--snr", sim_params.snr, "signal-to-noise ratio (bivariate_study)");
    sim_cmd->add_option("--grid-size", sim_params.grid_size, "truth grid resolution");
    sim_cmd->add_option("--seed", sim_seed, "random seed");
    sim_cmd->add_option("--out", sim_out, "data CSV (default stdout)");
    sim_cmd->add_option("--test-out", sim_test_out, "held-out CSV");
    sim_cmd->add_option("--truth", sim_truth, "truth surface grids CSV");
    std::string sim_config;
    sim_cmd->add_option("--config", sim_config, "accepted for uniformity; unused")->check(CLI::ExistingFile);

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "time training across feature counts and sample sizes");
    ConfigFlags bench_flags;
    std::string bench_p = "3,6,9,12", bench_n = "6000,12000,18000", bench_out;
    int bench_epochs = 3, bench_repeats = 3;
    double bench_ceiling_mb = 2048.0;
    bench_cmd->add_option("--p-list", bench_p, "comma-separated feature counts");
    bench_cmd->add_option("--n-list", bench_n, "comma-separated sample sizes");
    bench_cmd->add_option("--bench-epochs", bench_epochs, "epochs per timed run");
    bench_cmd->add_option("--repeats", bench_repeats, "timed repeats (median reported)");
    bench_cmd->add_option("--memory-ceiling-mb", bench_ceiling_mb, "refuse configurations above this");
    bench_cmd->add_option("--out", bench_out, "output CSV (default stdout)");
    bench_flags.attach(bench_cmd, true);

    // compare
    auto* cmp_cmd = app.add_subcommand("compare", "AFM versus exact tensor-product GAM on simulated surfaces");
    ConfigFlags cmp_flags;
    std::string cmp_n = "2000", cmp_f = "1,5,15", cmp_out;
    int cmp_seeds = 5, cmp_test = 2000;
    cmp_cmd->add_option("--n-list", cmp_n, "comma-separated sample sizes");
    cmp_cmd->add_option("--factor-list", cmp_f, "comma-separated factor counts");
    cmp_cmd->add_option("--replicates", cmp_seeds, "seeds per sample size");
    cmp_cmd->add_option("--n-test", cmp_test, "held-out rows per replicate");
    cmp_cmd->add_option("--out", cmp_out, "output CSV (default stdout)");
    cmp_flags.attach(cmp_cmd, true);

    // effects
    auto* eff_cmd = app.add_subcommand("effects", "export marginal effect summaries and pair surfaces");
    std::string eff_model, eff_out, eff_surface, eff_surface_out;
    std::vector<std::string> eff_terms;
    int eff_degree = 2, eff_grid = 50, eff_draws = 256;
    std::optional<std::uint64_t> eff_seed;
    eff_cmd->add_option("--model", eff_model, "model file")->required()->check(CLI::ExistingFile);
    eff_cmd->add_option("--degree", eff_degree, "term degree when --term is not given (all subsets)");
    eff_cmd->add_option("--term", eff_terms, "term as colon-joined feature names (repeatable)");
    eff_cmd->add_option("--grid-size", eff_grid, "grid points per feature");
    eff_cmd->add_option("--draws", eff_draws, "quasi-random draws per grid value");
    eff_cmd->add_option("--out", eff_out, "marginal CSV (default stdout)");
    eff_cmd->add_option("--surface", eff_surface, "pair a:b whose surface to export");
    eff_cmd->add_option("--surface-out", eff_surface_out, "surface CSV (x_a,x_b,value)");
    eff_cmd->add_option("--seed", eff_seed, "accepted for uniformity; Halton draws are deterministic");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*fit_cmd) {
            const auto cfg = fit_flags.resolve();
            const auto data = ingest_csv(fit_data, fit_target);
            const auto state = fit(data, cfg.model, cfg.train);
            save_model(state.model, fit_model);
            Output log(fit_log.empty() ? fit_model + ".log.csv" : fit_log);
            write_history_csv(log.stream(), state.history);
            std::cerr << "fitted " << state.epoch << " epochs (best " << state.best_epoch << "), model written to "
                      << fit_model << '\n';
        } else if (*predict_cmd) {
            const auto model = load_model(pred_model);
            const auto x = read_feature_columns(pred_data, model.feature_names);
            Output out(pred_out);
            auto& os = out.stream();
            os.precision(17);
            os << "eta,prediction\n";
            std::vector<double> row(static_cast<std::size_t>(x.cols()));
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
                for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
                const double eta = predict_row(row, model);
                os << eta << ',' << response_scale(model.config.loss, eta) << '\n';
            }
        } else if (*smooth_cmd) {
            const auto cfg = smooth_flags.resolve();
            const auto data = ingest_csv(smooth_data, smooth_target);
            std::vector<SplineSpec> specs;
            std::vector<BasisMatrix> bases;
            for (Eigen::Index j = 0; j < data.cols(); ++j) {
                const int jj = static_cast<int>(j);
                specs.push_back(make_spec(data.column(j), cfg.model.basis_size(jj), cfg.model.spline_degree,
                                          cfg.model.penalty_order, jj));
                bases.push_back(eval_basis_matrix(data.column(j), specs.back()));
            }
            const auto table = homogeneous_smoothing(bases, make_penalties(specs), cfg.model.resolved_df(),
                                                     cfg.model.resolved_factors());
            Output out(smooth_out);
            auto& os = out.stream();
            os.precision(12);
            os << "degree,feature,factor,lambda,df_target\n";
            for (const auto& [d, per_feature] : table.lambda)
                for (std::size_t j = 0; j < per_feature.size(); ++j)
                    for (std::size_t f = 0; f < per_feature[j].size(); ++f)
                        os << d << ',' << data.column_names[j] << ',' << f << ',' << per_feature[j][f] << ','
                           << table.df_targets.at(d) << '\n';
        } else if (*sim_cmd) {
            const auto sim = simulate(parse_simulation_kind(sim_kind), sim_params, sim_seed);
            {
                Output out(sim_out);
                write_dataset_csv(out.stream(), sim.data);
            }
            if (!sim_test_out.empty()) {
                if (sim.test.rows() == 0) throw Error("--test-out needs --n-test > 0");
                Output out(sim_test_out);
                write_dataset_csv(out.stream(), sim.test);
            }
            if (!sim_truth.empty()) {
                Output out(sim_truth);
                write_truth_grids_csv(out.stream(), sim);
            }
        } else if (*bench_cmd) {
            const auto cfg = bench_flags.resolve();
            BenchOptions opts;
            opts.p_list = parse_int_list(bench_p);
            opts.n_list = parse_int_list(bench_n);
            opts.epochs = bench_epochs;
            opts.repeats = bench_repeats;
            opts.config = cfg.model;
            opts.batch_size = cfg.train.batch_size;
            opts.seed = cfg.train.seed;
            opts.memory_ceiling_bytes = static_cast<std::size_t>(bench_ceiling_mb * 1024.0 * 1024.0);
            const auto rows = run_bench(opts);
            Output out(bench_out);
            write_bench_csv(out.stream(), rows);
        } else if (*cmp_cmd) {
            CompareOptions opts;
            opts.run = cmp_flags.resolve();
            opts.n_list = parse_int_list(cmp_n);
            opts.factor_list = parse_int_list(cmp_f);
            opts.seeds = cmp_seeds;
            opts.n_test = cmp_test;
            opts.base_seed = opts.run.train.seed;
            const auto rows = run_compare(opts);
            Output out(cmp_out);
            write_compare_csv(out.stream(), rows);
        } else if (*eff_cmd) {
            const auto model = load_model(eff_model);
            std::vector<std::vector<int>> terms;
            for (const auto& t : eff_terms) {
                std::vector<int> subset;
                std::stringstream ss(t);
                std::string name;
                while (std::getline(ss, name, ':')) subset.push_back(feature_index(model, name));
                terms.push_back(subset);
            }
            if (terms.empty()) {
                if (eff_degree < 2 || eff_degree > model.config.max_degree)
                    throw Error("--degree must lie in [2, " + std::to_string(model.config.max_degree) + "]");
                std::vector<int> cur;
                combinations(model.num_features(), eff_degree, 0, cur, terms);
            }
            Output out(eff_out);
            write_marginal_header(out.stream());
            for (const auto& subset : terms) {
                const auto name = term_name(model, subset);
                for (int j : subset) {
                    const auto grid = domain_grid(model.specs[static_cast<std::size_t>(j)], eff_grid);
                    const auto rows = marginal_summary(model, subset, j, grid, eff_draws);
                    write_marginal_rows(out.stream(), name, model.feature_names[static_cast<std::size_t>(j)], rows);
                }
            }
            if (!eff_surface.empty()) {
                const auto colon = eff_surface.find(':');
                if (colon == std::string::npos) throw Error("--surface expects a:b");
                const int a = feature_index(model, eff_surface.substr(0, colon));
                const int b = feature_index(model, eff_surface.substr(colon + 1));
                const auto ga = domain_grid(model.specs[static_cast<std::size_t>(a)], eff_grid);
                const auto gb = domain_grid(model.specs[static_cast<std::size_t>(b)], eff_grid);
                const auto surface = pairwise_surface(model, a, b, ga, gb);
                Output sout(eff_surface_out);
                auto& os = sout.stream();
                os.precision(12);
                os << "x_a,x_b,value\n";
                for (std::size_t r = 0; r < ga.size(); ++r)
                    for (std::size_t c = 0; c < gb.size(); ++c)
                        os << ga[r] << ',' << gb[c] << ',' << surface(static_cast<Eigen::Index>(r),
                                                                        static_cast<Eigen::Index>(c))
                           << '\n';
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
