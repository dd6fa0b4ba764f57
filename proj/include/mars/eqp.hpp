#pragma once

#include "mars/common.hpp"

namespace mars
{

/// min 1/2 x'Hx + g'x  s.t.  A x = b,  lb <= x <= ub.
///
/// Sized for the small dense problems of thrust allocation (a few dozen
/// variables at most). Bounds may be +-infinity.
struct BoundedQp
{
    MatX H;
    VecX g;
    MatX A;
    VecX b;
    VecX lb;
    VecX ub;
};

struct QpResult
{
    VecX x;
    VecX multipliers; // one per equality row of A
    int iterations = 0;
    int active_bounds = 0;
};

/// Solves the equality-only problem through its KKT system. Redundant but
/// consistent equality rows are tolerated. Throws Infeasible when the rows
/// are inconsistent and Error when the reduced Hessian is singular.
QpResult solve_equality_qp(const MatX &H, const VecX &g, const MatX &A, const VecX &b);

/// Active-set loop on the bounds around solve_equality_qp. Violated bounds
/// are pinned one at a time (most violated first) and released when their
/// multiplier has the wrong sign. Throws Infeasible when no point satisfies
/// the equalities inside the bounds.
QpResult solve_bounded_qp(const BoundedQp &qp, int max_iterations = 100);

} // namespace mars
