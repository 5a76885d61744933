#include "transitmp/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace transitmp {

std::size_t LpProblem::add_row(std::vector<double> coefficients, RowSense s, double b) {
    rows.push_back(std::move(coefficients));
    sense.push_back(s);
    rhs.push_back(b);
    return rows.size() - 1;
}

namespace {

constexpr double kEps = 1e-10;

// Tableau in canonical form: rows_ x (cols_ + 1), last column is the RHS.
class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : cols_(cols), a_(rows, std::vector<double>(cols + 1, 0.0)), basis_(rows) {}

    double& at(std::size_t r, std::size_t c) { return a_[r][c]; }
    double rhs(std::size_t r) const { return a_[r][cols_]; }
    double& rhs(std::size_t r) { return a_[r][cols_]; }
    std::size_t rows() const { return a_.size(); }
    std::size_t cols() const { return cols_; }
    std::vector<std::size_t>& basis() { return basis_; }

    void pivot(std::size_t pr, std::size_t pc) {
        auto& prow = a_[pr];
        const double inv = 1.0 / prow[pc];
        for (auto& v : prow) v *= inv;
        prow[pc] = 1.0;
        for (std::size_t r = 0; r < a_.size(); ++r) {
            if (r == pr) continue;
            const double f = a_[r][pc];
            if (f == 0.0) continue;
            for (std::size_t c = 0; c <= cols_; ++c) a_[r][c] -= f * prow[c];
            a_[r][pc] = 0.0;
        }
        basis_[pr] = pc;
    }

    // Maximizes cost·x over the columns allowed by `allowed`. Returns false when unbounded.
    LpStatus optimize(const std::vector<double>& cost, const std::vector<char>& allowed, int& budget) {
        while (true) {
            if (budget-- <= 0) return LpStatus::IterationLimit;
            // Reduced costs: cost_j - sum_r cost_{basis_r} a_rj. Bland: first improving column.
            std::size_t enter = cols_;
            for (std::size_t c = 0; c < cols_ && enter == cols_; ++c) {
                if (!allowed[c]) continue;
                double reduced = cost[c];
                for (std::size_t r = 0; r < a_.size(); ++r) reduced -= cost[basis_[r]] * a_[r][c];
                if (reduced > kEps) enter = c;
            }
            if (enter == cols_) return LpStatus::Optimal;
            std::size_t leave = a_.size();
            double best = 0.0;
            for (std::size_t r = 0; r < a_.size(); ++r) {
                if (a_[r][enter] <= kEps) continue;
                const double ratio = rhs(r) / a_[r][enter];
                if (leave == a_.size() || ratio < best - kEps ||
                    (std::abs(ratio - best) <= kEps && basis_[r] < basis_[leave])) {
                    best = ratio;
                    leave = r;
                }
            }
            if (leave == a_.size()) return LpStatus::Unbounded;
            pivot(leave, enter);
        }
    }

private:
    std::size_t cols_;
    std::vector<std::vector<double>> a_;
    std::vector<std::size_t> basis_;
};

}  // namespace

LpResult solve_lp(const LpProblem& problem, int max_iterations) {
    const std::size_t n = problem.objective.size();
    const std::size_t m = problem.rows.size();
    if (problem.sense.size() != m || problem.rhs.size() != m)
        throw std::invalid_argument("LP rows, senses and right-hand sides differ in length");
    for (const auto& row : problem.rows)
        if (row.size() != n) throw std::invalid_argument("LP row length differs from objective length");

    // Column layout: x+ (n), x- for free vars, one slack per inequality, one artificial per row.
    std::vector<char> is_free(n, 0);
    for (auto j : problem.free_vars) is_free.at(j) = 1;
    std::vector<std::size_t> neg_col(n, 0);
    std::size_t cols = n;
    for (std::size_t j = 0; j < n; ++j)
        if (is_free[j]) neg_col[j] = cols++;
    std::vector<std::size_t> slack_col(m, 0);
    for (std::size_t r = 0; r < m; ++r)
        if (problem.sense[r] != RowSense::Equal) slack_col[r] = cols++;
    const std::size_t first_artificial = cols;
    cols += m;

    Tableau t(m, cols);
    for (std::size_t r = 0; r < m; ++r) {
        const double sign = problem.rhs[r] < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            t.at(r, j) = sign * problem.rows[r][j];
            if (is_free[j]) t.at(r, neg_col[j]) = -sign * problem.rows[r][j];
        }
        if (problem.sense[r] == RowSense::LessEqual) t.at(r, slack_col[r]) = sign;
        if (problem.sense[r] == RowSense::GreaterEqual) t.at(r, slack_col[r]) = -sign;
        t.at(r, first_artificial + r) = 1.0;
        t.rhs(r) = sign * problem.rhs[r];
        t.basis()[r] = first_artificial + r;
    }

    int budget = max_iterations;
    LpResult result;

    // Phase 1: drive artificials to zero.
    std::vector<double> phase1(cols, 0.0);
    for (std::size_t r = 0; r < m; ++r) phase1[first_artificial + r] = -1.0;
    std::vector<char> all(cols, 1);
    auto status = t.optimize(phase1, all, budget);
    if (status == LpStatus::IterationLimit) {
        result.status = status;
        result.diagnostic = "iteration limit reached in phase 1";
        return result;
    }
    double infeasibility = 0.0;
    for (std::size_t r = 0; r < m; ++r)
        if (t.basis()[r] >= first_artificial) infeasibility += t.rhs(r);
    if (infeasibility > 1e-8) {
        result.status = LpStatus::Infeasible;
        result.diagnostic = "constraints are infeasible (phase-1 residual " + std::to_string(infeasibility) + ")";
        return result;
    }
    // Pivot remaining zero-level artificials out of the basis where possible.
    for (std::size_t r = 0; r < m; ++r) {
        if (t.basis()[r] < first_artificial) continue;
        for (std::size_t c = 0; c < first_artificial; ++c) {
            if (std::abs(t.at(r, c)) > 1e-9) {
                t.pivot(r, c);
                break;
            }
        }
    }

    // Phase 2 over the original columns.
    std::vector<double> cost(cols, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        cost[j] = problem.objective[j];
        if (is_free[j]) cost[neg_col[j]] = -problem.objective[j];
    }
    std::vector<char> allowed(cols, 1);
    for (std::size_t c = first_artificial; c < cols; ++c) allowed[c] = 0;
    status = t.optimize(cost, allowed, budget);
    if (status != LpStatus::Optimal) {
        result.status = status;
        result.diagnostic = status == LpStatus::Unbounded ? "objective is unbounded" : "iteration limit reached in phase 2";
        return result;
    }

    std::vector<double> full(cols, 0.0);
    for (std::size_t r = 0; r < m; ++r) full[t.basis()[r]] = t.rhs(r);
    result.x.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) result.x[j] = full[j] - (is_free[j] ? full[neg_col[j]] : 0.0);
    result.value = 0.0;
    for (std::size_t j = 0; j < n; ++j) result.value += problem.objective[j] * result.x[j];
    result.status = LpStatus::Optimal;
    return result;
}

}  // namespace transitmp
