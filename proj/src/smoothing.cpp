#include <ahofm/error.hpp>
#include <ahofm/smoothing.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace ahofm {
namespace {

constexpr double kZeroSnap = 1e-10;
constexpr double kDfTolerance = 1e-8;
constexpr int kMaxBisection = 200;

} // namespace

int DroSingularValues::null_space_dim() const
{
    return static_cast<int>((s.array() == 0.0).count());
}

double SmoothingTable::at(int degree, int feature, int factor) const
{
    auto it = lambda.find(degree);
    if (it == lambda.end()) throw Error("smoothing table has no entry for degree " + std::to_string(degree));
    const auto& per_feature = it->second;
    if (feature < 0 || feature >= static_cast<int>(per_feature.size()))
        throw Error("smoothing table has no feature " + std::to_string(feature));
    const auto& per_factor = per_feature[static_cast<std::size_t>(feature)];
    if (factor < 0 || factor >= static_cast<int>(per_factor.size()))
        throw Error("smoothing table has no factor " + std::to_string(factor) + " at degree " +
                    std::to_string(degree));
    return per_factor[static_cast<std::size_t>(factor)];
}

int SmoothingTable::num_features() const
{
    return lambda.empty() ? 0 : static_cast<int>(lambda.begin()->second.size());
}

int SmoothingTable::num_factors(int degree) const
{
    auto it = lambda.find(degree);
    if (it == lambda.end() || it->second.empty()) return 0;
    return static_cast<int>(it->second.front().size());
}

DroSingularValues dro(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& penalty)
{
    const Eigen::Index m = basis.cols();
    if (penalty.rows() != m || penalty.cols() != m) throw Error("penalty does not match basis width");

    Eigen::MatrixXd gram = basis.transpose() * basis;
    Eigen::LLT<Eigen::MatrixXd> chol(gram);
    if (chol.info() != Eigen::Success) {
        gram.diagonal() *= 1.0 + 1e-10;
        chol.compute(gram);
        if (chol.info() != Eigen::Success) throw Error("singular design");
    }

    // L^{-1} P L^{-T} == R^{-T} P R^{-1} with R = L^T
    Eigen::MatrixXd a = chol.matrixL().solve(penalty);
    a = chol.matrixL().solve(a.transpose()).eval();
    a = 0.5 * (a + a.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw Error("eigen decomposition failed in DRO");

    DroSingularValues out;
    out.s = eig.eigenvalues().reverse().cwiseMax(0.0);

    // The null space of L^{-1} P L^{-T} has the dimension of P's null space.
    // Counting it on P is robust even when B^T B is badly conditioned and
    // the remaining values span many orders of magnitude.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> peig(penalty, Eigen::EigenvaluesOnly);
    const double ptop = peig.eigenvalues().size() > 0 ? peig.eigenvalues().maxCoeff() : 0.0;
    Eigen::Index nulls = 0;
    for (double v : peig.eigenvalues()) nulls += v <= kZeroSnap * ptop;
    if (ptop <= 0.0) nulls = m;
    out.s.tail(nulls).setZero();
    return out;
}

DroSingularValues dro(const BasisMatrix& basis, const PenaltyMatrix& penalty)
{
    auto out = dro(Eigen::MatrixXd(basis.values), penalty.values);
    out.feature_index = basis.spec.feature_index;
    return out;
}

double dffun(const DroSingularValues& s, double lambda)
{
    double df = 0.0;
    for (double v : s.s) df += 1.0 / (1.0 + lambda * v);
    return df;
}

double sv2la(const DroSingularValues& s, double df)
{
    const int m = s.size();
    const int null_dim = s.null_space_dim();
    if (!(df > null_dim) || df > m) {
        std::ostringstream msg;
        msg << "unreachable df " << df << " for feature " << s.feature_index << ": achievable interval is ("
            << null_dim << ", " << m << "]";
        throw Error(msg.str());
    }
    if (df == m) return 0.0;

    double lo = -12.0;
    double hi = 12.0;
    while (dffun(s, std::pow(10.0, hi)) > df && hi < 300.0) hi += 4.0;
    while (dffun(s, std::pow(10.0, lo)) < df && lo > -300.0) lo -= 4.0;

    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < kMaxBisection; ++it) {
        mid = 0.5 * (lo + hi);
        const double value = dffun(s, std::pow(10.0, mid));
        if (std::abs(value - df) <= kDfTolerance) break;
        // dffun decreases in lambda
        if (value > df)
            lo = mid;
        else
            hi = mid;
    }
    return std::pow(10.0, mid);
}

SmoothingTable homogeneous_smoothing(std::span<const BasisMatrix> bases,
                                     std::span<const PenaltyMatrix> penalties,
                                     const std::map<int, double>& df_targets,
                                     const std::map<int, int>& factor_counts)
{
    if (bases.size() != penalties.size()) throw Error("one penalty per basis is required");
    SmoothingTable table;
    table.df_targets = df_targets;
    for (const auto& [d, df] : df_targets) {
        int factors = 1;
        if (d >= 2) {
            auto it = factor_counts.find(d);
            if (it == factor_counts.end())
                throw Error("no factor count given for degree " + std::to_string(d));
            factors = it->second;
        }
        table.lambda[d].assign(bases.size(), std::vector<double>(static_cast<std::size_t>(factors), 0.0));
    }

    for (std::size_t j = 0; j < bases.size(); ++j) {
        auto s = dro(bases[j], penalties[j]);
        s.feature_index = static_cast<int>(j);
        for (const auto& [d, df] : df_targets) {
            double lambda = 0.0;
            try {
                lambda = sv2la(s, df);
            } catch (const Error& e) {
                throw Error("degree " + std::to_string(d) + ": " + e.what());
            }
            auto& row = table.lambda[d][j];
            std::fill(row.begin(), row.end(), lambda);
        }
    }
    return table;
}

double df_exact(const BasisMatrix& basis, const PenaltyMatrix& penalty, double lambda)
{
    const Eigen::MatrixXd gram = basis.values.transpose() * basis.values;
    const Eigen::MatrixXd system = gram + lambda * penalty.values;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-15) throw Error("singular system in df_exact");
    // tr(H) = tr(A G), tr(H^T H) = tr(A G A G) with A = (G + lambda P)^{-1}
    const Eigen::MatrixXd ag = ldlt.solve(gram);
    return 2.0 * ag.trace() - (ag * ag).trace();
}

} // namespace ahofm
