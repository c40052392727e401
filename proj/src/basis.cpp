#include <ahofm/basis.hpp>
#include <ahofm/error.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace ahofm {

void SplineSpec::validate() const
{
    if (degree < 0) throw Error("spline degree must be non-negative");
    if (num_basis < degree + 1)
        throw Error("num_basis " + std::to_string(num_basis) + " must be at least degree+1 = " +
                    std::to_string(degree + 1));
    if (penalty_order < 1) throw Error("penalty order must be at least 1");
    if (num_basis < penalty_order + 1)
        throw Error("num_basis " + std::to_string(num_basis) +
                    " leaves an empty difference matrix for penalty order " +
                    std::to_string(penalty_order));
    if (knots.size() != static_cast<std::size_t>(num_basis + degree + 1))
        throw Error("spline spec has " + std::to_string(knots.size()) + " knots, expected " +
                    std::to_string(num_basis + degree + 1));
    if (!std::is_sorted(knots.begin(), knots.end())) throw Error("knots must be non-decreasing");
    if (!(domain_lo < domain_hi)) throw Error("degenerate feature");
}

SplineSpec make_spec(std::span<const double> column, int num_basis, int degree, int penalty_order,
                     int feature_index)
{
    if (column.empty()) throw Error("degenerate feature");
    for (double v : column) {
        if (!std::isfinite(v)) throw Error("non-finite input");
    }
    const auto [lo_it, hi_it] = std::minmax_element(column.begin(), column.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(lo < hi)) throw Error("degenerate feature");

    SplineSpec spec;
    spec.feature_index = feature_index;
    spec.degree = degree;
    spec.num_basis = num_basis;
    spec.penalty_order = penalty_order;
    spec.domain_lo = lo;
    spec.domain_hi = hi;

    if (degree < 0 || num_basis < degree + 1)
        throw Error("num_basis " + std::to_string(num_basis) + " must be at least degree+1 = " +
                    std::to_string(degree + 1));

    const int interior = num_basis - degree - 1;
    spec.knots.reserve(static_cast<std::size_t>(num_basis + degree + 1));
    spec.knots.insert(spec.knots.end(), static_cast<std::size_t>(degree + 1), lo);
    const double width = (hi - lo) / (interior + 1);
    for (int k = 1; k <= interior; ++k) spec.knots.push_back(lo + k * width);
    spec.knots.insert(spec.knots.end(), static_cast<std::size_t>(degree + 1), hi);

    spec.validate();
    return spec;
}

void eval_basis_into(double x, const SplineSpec& spec, std::span<double> out)
{
    if (!std::isfinite(x)) throw Error("non-finite input");
    const int p = spec.degree;
    const int m = spec.num_basis;
    if (out.size() != static_cast<std::size_t>(m)) throw Error("basis output has wrong length");
    const auto& t = spec.knots;

    x = std::clamp(x, spec.domain_lo, spec.domain_hi);

    // knot span k with t[k] <= x < t[k+1]; the right boundary belongs to the last span
    int k;
    if (x >= t[static_cast<std::size_t>(m)]) {
        k = m - 1;
    } else {
        auto it = std::upper_bound(t.begin() + p, t.begin() + m + 1, x);
        k = static_cast<int>(it - t.begin()) - 1;
    }

    // Cox-de Boor in triangular form (de Boor / Piegl-Tiller A2.2)
    double local[32];
    double left[32];
    double right[32];
    std::vector<double> heap;
    double* n = local;
    double* l = left;
    double* r = right;
    if (p + 1 > 32) {
        heap.assign(static_cast<std::size_t>(3 * (p + 1)), 0.0);
        n = heap.data();
        l = n + p + 1;
        r = l + p + 1;
    }
    n[0] = 1.0;
    for (int deg = 1; deg <= p; ++deg) {
        l[deg] = x - t[static_cast<std::size_t>(k + 1 - deg)];
        r[deg] = t[static_cast<std::size_t>(k + deg)] - x;
        double saved = 0.0;
        for (int s = 0; s < deg; ++s) {
            const double tmp = n[s] / (r[s + 1] + l[deg - s]);
            n[s] = saved + r[s + 1] * tmp;
            saved = l[deg - s] * tmp;
        }
        n[deg] = saved;
    }

    std::fill(out.begin(), out.end(), 0.0);
    for (int s = 0; s <= p; ++s) out[static_cast<std::size_t>(k - p + s)] = n[s];
}

Eigen::VectorXd eval_basis(double x, const SplineSpec& spec)
{
    Eigen::VectorXd out(spec.num_basis);
    eval_basis_into(x, spec, {out.data(), static_cast<std::size_t>(out.size())});
    return out;
}

BasisMatrix eval_basis_matrix(std::span<const double> column, const SplineSpec& spec)
{
    BasisMatrix b;
    b.spec = spec;
    const auto n = static_cast<Eigen::Index>(column.size());
    b.values.resize(n, spec.num_basis);
    for (Eigen::Index i = 0; i < n; ++i) {
        eval_basis_into(column[static_cast<std::size_t>(i)], spec,
                        {b.values.data() + i * spec.num_basis, static_cast<std::size_t>(spec.num_basis)});
    }
    return b;
}

PenaltyMatrix diff_penalty(int num_basis, int order)
{
    if (order < 1) throw Error("penalty order must be at least 1");
    if (order >= num_basis)
        throw Error("penalty order " + std::to_string(order) + " requires more than " +
                    std::to_string(order) + " basis functions, got " + std::to_string(num_basis));

    Eigen::MatrixXd d = Eigen::MatrixXd::Identity(num_basis, num_basis);
    for (int k = 0; k < order; ++k) {
        const Eigen::Index rows = d.rows() - 1;
        d = (d.bottomRows(rows) - d.topRows(rows)).eval();
    }
    PenaltyMatrix p;
    p.order = order;
    p.values = d.transpose() * d;
    return p;
}

} // namespace ahofm
