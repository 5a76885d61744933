// Small dense linear-program solver (two-phase tableau simplex, Bland's rule).
// Sized for per-network region checks: a few hundred rows at most.
#pragma once

#include <string>
#include <vector>

namespace transitmp {

enum class RowSense { LessEqual, Equal, GreaterEqual };

/// maximize objective·x subject to rows, x >= 0 except for indices listed in `free_vars`.
struct LpProblem {
    std::vector<double> objective;
    std::vector<std::vector<double>> rows;
    std::vector<RowSense> sense;
    std::vector<double> rhs;
    std::vector<std::size_t> free_vars;

    std::size_t add_row(std::vector<double> coefficients, RowSense s, double b);
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    double value = 0.0;
    std::vector<double> x;
    std::string diagnostic;
};

LpResult solve_lp(const LpProblem& problem, int max_iterations = 100000);

}  // namespace transitmp
