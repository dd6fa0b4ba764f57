#include "mars/eqp.hpp"

#include <limits>
#include <sstream>
#include <vector>

namespace mars
{

namespace
{

constexpr double kResidualTol = 1e-9;

} // namespace

QpResult solve_equality_qp(const MatX &H, const VecX &g, const MatX &A, const VecX &b)
{
    const Eigen::Index n = H.rows();
    const Eigen::Index m = A.rows();
    if (H.cols() != n || g.size() != n || (m > 0 && A.cols() != n) || b.size() != m)
        throw InvalidArgument("solve_equality_qp: inconsistent problem dimensions");

    // Constraint consistency first, so that an inconsistent A x = b is
    // reported as infeasible rather than as a KKT failure.
    if (m > 0)
    {
        Eigen::CompleteOrthogonalDecomposition<MatX> cod(A);
        const VecX xp = cod.solve(b);
        const double res = (A * xp - b).norm();
        if (res > kResidualTol * std::max(1.0, b.norm()))
        {
            std::ostringstream msg;
            msg << "equality constraints are inconsistent (residual " << res << ")";
            throw Infeasible(msg.str());
        }
    }

    MatX K = MatX::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = H;
    if (m > 0)
    {
        K.topRightCorner(n, m) = A.transpose();
        K.bottomLeftCorner(m, n) = A;
    }
    VecX rhs(n + m);
    rhs << -g, b;

    Eigen::CompleteOrthogonalDecomposition<MatX> kkt(K);
    const VecX sol = kkt.solve(rhs);
    const double res = (K * sol - rhs).norm();
    if (!sol.allFinite() || res > 1e-7 * std::max(1.0, rhs.norm()))
    {
        std::ostringstream msg;
        msg << "KKT system is singular (residual " << res << ")";
        throw Error(msg.str());
    }

    // Rank deficiency of K that is not explained by redundant rows of A means
    // the objective is flat along a feasible direction.
    const Eigen::Index rank_A = m > 0 ? Eigen::CompleteOrthogonalDecomposition<MatX>(A).rank() : 0;
    if (kkt.rank() < n + rank_A)
        throw Error("KKT system is singular: reduced Hessian is not positive definite");

    QpResult out;
    out.x = sol.head(n);
    out.multipliers = sol.tail(m);
    out.iterations = 1;
    return out;
}

QpResult solve_bounded_qp(const BoundedQp &qp, int max_iterations)
{
    const Eigen::Index n = qp.H.rows();
    const Eigen::Index m = qp.A.rows();
    const VecX lb = qp.lb.size() ? qp.lb : VecX::Constant(n, -std::numeric_limits<double>::infinity());
    const VecX ub = qp.ub.size() ? qp.ub : VecX::Constant(n, std::numeric_limits<double>::infinity());
    if (lb.size() != n || ub.size() != n)
        throw InvalidArgument("solve_bounded_qp: bound vectors have wrong length");
    if ((lb.array() > ub.array()).any())
        throw Infeasible("lower bound exceeds upper bound");

    // -1: pinned at lower bound, +1: pinned at upper bound, 0: free.
    std::vector<int> pinned(n, 0);
    constexpr double tol = 1e-10;

    for (int iter = 1; iter <= max_iterations; ++iter)
    {
        int n_pinned = 0;
        for (int s : pinned)
            n_pinned += s != 0;

        MatX A(m + n_pinned, n);
        VecX b(m + n_pinned);
        if (m > 0)
        {
            A.topRows(m) = qp.A;
            b.head(m) = qp.b;
        }
        std::vector<Eigen::Index> rows_of_pin;
        Eigen::Index row = m;
        for (Eigen::Index k = 0; k < n; ++k)
        {
            if (pinned[k] == 0)
                continue;
            A.row(row).setZero();
            A(row, k) = 1.0;
            b(row) = pinned[k] < 0 ? lb(k) : ub(k);
            rows_of_pin.push_back(k);
            ++row;
        }

        QpResult eq = solve_equality_qp(qp.H, qp.g, A, b);

        // Most violated bound among the free variables.
        Eigen::Index worst = -1;
        double worst_violation = tol;
        int worst_side = 0;
        for (Eigen::Index k = 0; k < n; ++k)
        {
            if (pinned[k] != 0)
                continue;
            const double below = lb(k) - eq.x(k);
            const double above = eq.x(k) - ub(k);
            if (below > worst_violation)
            {
                worst = k;
                worst_violation = below;
                worst_side = -1;
            }
            if (above > worst_violation)
            {
                worst = k;
                worst_violation = above;
                worst_side = 1;
            }
        }
        if (worst >= 0)
        {
            pinned[worst] = worst_side;
            continue;
        }

        // Release the pinned bound whose multiplier has the wrong sign.
        Eigen::Index release = -1;
        double release_score = tol;
        for (std::size_t p = 0; p < rows_of_pin.size(); ++p)
        {
            const Eigen::Index k = rows_of_pin[p];
            const double lambda = eq.multipliers(m + static_cast<Eigen::Index>(p));
            // Stationarity: H x + g + A' lambda = 0, so the objective gradient
            // along x_k is -lambda. A lower bound is correct when it is >= 0.
            const double score = pinned[k] < 0 ? lambda : -lambda;
            if (score > release_score)
            {
                release = k;
                release_score = score;
            }
        }
        if (release >= 0)
        {
            pinned[release] = 0;
            continue;
        }

        QpResult out;
        out.x = eq.x.cwiseMax(lb).cwiseMin(ub);
        out.multipliers = eq.multipliers.head(m);
        out.iterations = iter;
        out.active_bounds = static_cast<int>(rows_of_pin.size());
        return out;
    }
    throw Error("bounded QP active set did not converge");
}

} // namespace mars
