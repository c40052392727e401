#include <ahofm/error.hpp>
#include <ahofm/model_io.hpp>

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace ahofm {
namespace {

using nlohmann::json;

template <class K, class V>
json map_to_pairs(const std::map<K, V>& m)
{
    json out = json::array();
    for (const auto& [k, v] : m) out.push_back(json::array({k, v}));
    return out;
}

template <class K, class V>
std::map<K, V> pairs_to_map(const json& j)
{
    std::map<K, V> out;
    for (const auto& pair : j) out[pair.at(0).get<K>()] = pair.at(1).get<V>();
    return out;
}

json vector_to_json(const Eigen::VectorXd& v)
{
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j)
{
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json config_to_json(const ModelConfig& c)
{
    return json{{"max_degree", c.max_degree},
                {"default_factors", c.default_factors},
                {"default_df", c.default_df},
                {"factor_counts", map_to_pairs(c.factor_counts)},
                {"df_targets", map_to_pairs(c.df_targets)},
                {"loss", to_string(c.loss)},
                {"num_basis", c.num_basis},
                {"spline_degree", c.spline_degree},
                {"penalty_order", c.penalty_order},
                {"num_basis_overrides", map_to_pairs(c.num_basis_overrides)},
                {"gamma_init_sd", c.gamma_init_sd}};
}

ModelConfig config_from_json(const json& j)
{
    ModelConfig c;
    c.max_degree = j.at("max_degree").get<int>();
    c.default_factors = j.at("default_factors").get<int>();
    c.default_df = j.at("default_df").get<double>();
    c.factor_counts = pairs_to_map<int, int>(j.at("factor_counts"));
    c.df_targets = pairs_to_map<int, double>(j.at("df_targets"));
    c.loss = parse_loss_family(j.at("loss").get<std::string>());
    c.num_basis = j.at("num_basis").get<int>();
    c.spline_degree = j.at("spline_degree").get<int>();
    c.penalty_order = j.at("penalty_order").get<int>();
    c.num_basis_overrides = pairs_to_map<int, int>(j.at("num_basis_overrides"));
    c.gamma_init_sd = j.at("gamma_init_sd").get<double>();
    return c;
}

json spec_to_json(const SplineSpec& s)
{
    return json{{"feature_index", s.feature_index}, {"degree", s.degree},       {"num_basis", s.num_basis},
                {"penalty_order", s.penalty_order}, {"knots", s.knots},         {"domain_lo", s.domain_lo},
                {"domain_hi", s.domain_hi}};
}

SplineSpec spec_from_json(const json& j)
{
    SplineSpec s;
    s.feature_index = j.at("feature_index").get<int>();
    s.degree = j.at("degree").get<int>();
    s.num_basis = j.at("num_basis").get<int>();
    s.penalty_order = j.at("penalty_order").get<int>();
    s.knots = j.at("knots").get<std::vector<double>>();
    s.domain_lo = j.at("domain_lo").get<double>();
    s.domain_hi = j.at("domain_hi").get<double>();
    s.validate();
    return s;
}

json table_to_json(const SmoothingTable& t)
{
    json lambda = json::array();
    for (const auto& [d, per_feature] : t.lambda) lambda.push_back(json{{"degree", d}, {"values", per_feature}});
    return json{{"df_targets", map_to_pairs(t.df_targets)}, {"lambda", lambda}};
}

SmoothingTable table_from_json(const json& j)
{
    SmoothingTable t;
    t.df_targets = pairs_to_map<int, double>(j.at("df_targets"));
    for (const auto& entry : j.at("lambda"))
        t.lambda[entry.at("degree").get<int>()] = entry.at("values").get<std::vector<std::vector<double>>>();
    return t;
}

json params_to_json(const Parameters& p)
{
    json beta = json::array();
    for (const auto& b : p.theta.beta) beta.push_back(vector_to_json(b));
    json latents = json::array();
    for (const auto& t : p.latents) {
        json gamma = json::array();
        for (const auto& g : t.gamma) {
            json fibers = json::array();
            for (Eigen::Index f = 0; f < g.cols(); ++f) fibers.push_back(vector_to_json(g.col(f)));
            gamma.push_back(std::move(fibers));
        }
        latents.push_back(json{{"degree", t.degree}, {"gamma", std::move(gamma)}});
    }
    return json{{"alpha0", p.theta.alpha0}, {"beta", beta}, {"latents", latents}};
}

Parameters params_from_json(const json& j)
{
    Parameters p;
    p.theta.alpha0 = j.at("alpha0").get<double>();
    for (const auto& b : j.at("beta")) p.theta.beta.push_back(vector_from_json(b));
    for (const auto& entry : j.at("latents")) {
        LatentTensor t;
        t.degree = entry.at("degree").get<int>();
        for (const auto& fibers : entry.at("gamma")) {
            if (fibers.empty()) throw Error("latent tensor has a feature without fibers");
            const auto m = static_cast<Eigen::Index>(fibers.front().size());
            Eigen::MatrixXd g(m, static_cast<Eigen::Index>(fibers.size()));
            for (std::size_t f = 0; f < fibers.size(); ++f) {
                const auto col = vector_from_json(fibers[f]);
                if (col.size() != m) throw Error("latent fibers of one feature differ in length");
                g.col(static_cast<Eigen::Index>(f)) = col;
            }
            t.gamma.push_back(std::move(g));
        }
        p.latents.push_back(std::move(t));
    }
    return p;
}

void check_shapes(const Model& m)
{
    const auto p = m.specs.size();
    if (m.feature_names.size() != p || m.params.theta.beta.size() != p)
        throw Error("model file is inconsistent: feature count mismatch");
    for (std::size_t j = 0; j < p; ++j)
        if (m.params.theta.beta[j].size() != m.specs[j].num_basis) throw Error("model file is inconsistent: beta length");
    if (static_cast<int>(m.params.latents.size()) != std::max(0, m.config.max_degree - 1))
        throw Error("model file is inconsistent: latent tensor count");
    for (const auto& t : m.params.latents) {
        if (t.gamma.size() != p) throw Error("model file is inconsistent: latent feature count");
        for (std::size_t j = 0; j < p; ++j)
            if (t.gamma[j].rows() != m.specs[j].num_basis) throw Error("model file is inconsistent: fiber length");
    }
}

} // namespace

std::string serialize_model(const Model& model)
{
    const json j{{"format_version", kModelFormatVersion},
                 {"config", config_to_json(model.config)},
                 {"feature_names", model.feature_names},
                 {"specs", [&] {
                      json s = json::array();
                      for (const auto& spec : model.specs) s.push_back(spec_to_json(spec));
                      return s;
                  }()},
                 {"smoothing", table_to_json(model.table)},
                 {"params", params_to_json(model.params)}};
    return j.dump(2) + "\n";
}

Model deserialize_model(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion)
            throw Error("unsupported model format_version " + std::to_string(version) + " (expected " +
                        std::to_string(kModelFormatVersion) + ")");
        Model m;
        m.config = config_from_json(j.at("config"));
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        for (const auto& s : j.at("specs")) m.specs.push_back(spec_from_json(s));
        m.table = table_from_json(j.at("smoothing"));
        m.params = params_from_json(j.at("params"));
        check_shapes(m);
        return m;
    } catch (const json::exception& e) {
        throw Error(std::string("malformed model file: ") + e.what());
    }
}

void save_model(const Model& model, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write model file '" + path + "'");
    out << serialize_model(model);
    if (!out) throw Error("failed writing model file '" + path + "'");
}

Model load_model(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_model(buf.str());
}

} // namespace ahofm
