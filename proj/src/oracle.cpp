#include <ahofm/core.hpp>
#include <ahofm/error.hpp>
#include <ahofm/oracle.hpp>

#include <algorithm>
#include <string>

namespace ahofm {

Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Eigen::RowVectorXd kronecker_row(std::span<const Eigen::VectorXd> rows)
{
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Ones(1);
    for (const auto& r : rows) {
        Eigen::RowVectorXd next(out.size() * r.size());
        for (Eigen::Index a = 0; a < out.size(); ++a) next.segment(a * r.size(), r.size()) = out(a) * r.transpose();
        out = std::move(next);
    }
    return out;
}

TpsDesign tps_design(std::span<const BasisMatrix> bases, std::span<const PenaltyMatrix> penalties,
                     std::span<const double> lambdas, std::vector<int> subset)
{
    if (subset.size() < 2) throw Error("tensor product design needs at least two features");
    if (lambdas.size() != subset.size()) throw Error("one lambda per subset member is required");
    Eigen::Index cols = 1;
    for (int j : subset) {
        if (j < 0 || static_cast<std::size_t>(j) >= bases.size()) throw Error("subset feature out of range");
        cols *= bases[static_cast<std::size_t>(j)].cols();
        if (cols > kMaxTpsColumns)
            throw Error("tensor product design exceeds " + std::to_string(kMaxTpsColumns) + " columns");
    }

    TpsDesign out;
    out.subset = subset;
    const Eigen::Index n = bases[static_cast<std::size_t>(subset.front())].rows();
    out.design.resize(n, cols);
    std::vector<Eigen::VectorXd> rows(subset.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < subset.size(); ++t)
            rows[t] = bases[static_cast<std::size_t>(subset[t])].values.row(i).transpose();
        out.design.row(i) = kronecker_row(rows);
    }

    // sum_t lambda_t (I x ... x P_t x ... x I)
    out.penalty = Eigen::MatrixXd::Zero(cols, cols);
    for (std::size_t t = 0; t < subset.size(); ++t) {
        if (lambdas[t] == 0.0) continue;
        Eigen::MatrixXd term = Eigen::MatrixXd::Identity(1, 1);
        for (std::size_t u = 0; u < subset.size(); ++u) {
            const auto m = bases[static_cast<std::size_t>(subset[u])].cols();
            term = kronecker(term, u == t ? penalties[static_cast<std::size_t>(subset[u])].values
                                          : Eigen::MatrixXd::Identity(m, m));
        }
        out.penalty += lambdas[t] * term;
    }
    return out;
}

double ExactGam::term_value(std::size_t term, std::span<const double> values) const
{
    const auto& subset = subsets[term];
    std::vector<Eigen::VectorXd> rows;
    for (std::size_t t = 0; t < subset.size(); ++t)
        rows.push_back(eval_basis(values[t], specs[static_cast<std::size_t>(subset[t])]));
    return kronecker_row(rows).dot(coefficients[term]);
}

double ExactGam::predict_row(std::span<const double> x) const
{
    double eta = intercept;
    std::vector<double> values;
    for (std::size_t k = 0; k < subsets.size(); ++k) {
        values.clear();
        for (int j : subsets[k]) values.push_back(x[static_cast<std::size_t>(j)]);
        eta += term_value(k, values);
    }
    return eta;
}

Eigen::MatrixXd ExactGam::pair_surface(std::size_t term, std::span<const double> grid_a, std::span<const double> grid_b) const
{
    if (subsets[term].size() != 2) throw Error("pair_surface needs a two-feature term");
    const auto& sa = specs[static_cast<std::size_t>(subsets[term][0])];
    const auto& sb = specs[static_cast<std::size_t>(subsets[term][1])];
    const Eigen::Map<const Eigen::MatrixXd> coef(coefficients[term].data(), sb.num_basis, sa.num_basis);
    Eigen::MatrixXd ba(static_cast<Eigen::Index>(grid_a.size()), sa.num_basis);
    Eigen::MatrixXd bb(static_cast<Eigen::Index>(grid_b.size()), sb.num_basis);
    for (std::size_t r = 0; r < grid_a.size(); ++r) ba.row(static_cast<Eigen::Index>(r)) = eval_basis(grid_a[r], sa).transpose();
    for (std::size_t r = 0; r < grid_b.size(); ++r) bb.row(static_cast<Eigen::Index>(r)) = eval_basis(grid_b[r], sb).transpose();
    // coefficient index a*Mb + b maps to coef(b, a) in column-major storage
    return ba * coef.transpose() * bb.transpose();
}

ExactGam fit_exact_gam(const Dataset& data, const std::vector<std::vector<int>>& subsets, const SmoothingTable& table,
                       std::span<const SplineSpec> specs)
{
    data.validate();
    if (static_cast<Eigen::Index>(specs.size()) != data.cols()) throw Error("one spline spec per feature is required");

    std::vector<BasisMatrix> bases;
    for (Eigen::Index j = 0; j < data.cols(); ++j)
        bases.push_back(eval_basis_matrix(data.column(j), specs[static_cast<std::size_t>(j)]));
    const auto penalties = make_penalties(specs);

    std::vector<Eigen::MatrixXd> designs;
    std::vector<Eigen::MatrixXd> blocks;
    std::vector<Eigen::MatrixXd> constraints;
    Eigen::Index total = 1;
    for (const auto& subset : subsets) {
        std::vector<double> lambdas;
        const int d = static_cast<int>(subset.size());
        for (int j : subset) lambdas.push_back(table.at(d, j, 0));
        if (subset.size() == 1) {
            const auto j = static_cast<std::size_t>(subset.front());
            designs.emplace_back(bases[j].values);
            blocks.push_back(lambdas.front() * penalties[j].values);
        } else {
            auto tps = tps_design(bases, penalties, lambdas, subset);
            designs.push_back(std::move(tps.design));
            blocks.push_back(std::move(tps.penalty));
        }
        // Sum-to-zero constraint over the data: beta = Z beta~ with Z spanning
        // the complement of the design's column sums. The intercept carries
        // the constant that every term's basis could otherwise absorb.
        const Eigen::VectorXd sums = designs.back().colwise().sum().transpose();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(sums);
        const Eigen::Index m = sums.size();
        Eigen::MatrixXd z = qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
        z = z.rightCols(m - 1).eval();
        designs.back() = designs.back() * z;
        blocks.back() = z.transpose() * blocks.back() * z;
        constraints.push_back(std::move(z));
        total += designs.back().cols();
        if (total > kMaxGamColumns) throw Error("exact GAM exceeds " + std::to_string(kMaxGamColumns) + " columns");
    }

    const Eigen::Index n = data.rows();
    Eigen::MatrixXd x(n, total);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(total, total);
    x.col(0).setOnes();
    Eigen::Index offset = 1;
    for (std::size_t k = 0; k < designs.size(); ++k) {
        x.middleCols(offset, designs[k].cols()) = designs[k];
        a.block(offset, offset, blocks[k].rows(), blocks[k].cols()) = blocks[k];
        offset += designs[k].cols();
    }
    designs.clear();
    a.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    a.triangularView<Eigen::StrictlyUpper>() = a.transpose();
    const Eigen::VectorXd b = x.transpose() * data.response;

    ExactGam gam;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-13) {
        a.diagonal().array() += 1e-8 * a.diagonal().mean();
        gam.ridged = true;
        warn("exact GAM normal equations are singular; added 1e-8 ridge");
        llt.compute(a);
        if (llt.info() != Eigen::Success) throw Error("exact GAM normal equations could not be factorized");
    }
    const Eigen::VectorXd beta = llt.solve(b);
    gam.normal_residual = (a * beta - b).norm() / std::max(b.norm(), 1e-300);

    gam.intercept = beta(0);
    gam.subsets = subsets;
    gam.specs.assign(specs.begin(), specs.end());
    offset = 1;
    for (const auto& z : constraints) {
        gam.coefficients.push_back(z * beta.segment(offset, z.cols()));
        offset += z.cols();
    }
    return gam;
}

double surface_mse(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth)
{
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
        throw Error("surface grids have different shapes");
    if (estimate.size() == 0) throw Error("empty surface grid");
    const Eigen::ArrayXXd a = estimate.array() - estimate.mean();
    const Eigen::ArrayXXd b = truth.array() - truth.mean();
    return (a - b).square().mean();
}

} // namespace ahofm
