#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace lln {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Error taxonomy. CLI exit codes: 1 verification failure, 2 usage/infeasible,
// 3 I/O; see tools/lln_main.cpp.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct DegenerateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
    double residual;
    ConvergenceError(const std::string& msg, double resid)
        : std::runtime_error(msg), residual(resid) {}
};

struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_finite(const Mat& m, const char* name);

void require_same_shape(const Mat& a, const Mat& b, const char* what);

// Row-stochastic within tol: entries in [0,1] and row sums equal to 1.
bool is_row_stochastic(const Mat& w, double tol = 1e-9);
void require_row_stochastic(const Mat& w, double tol = 1e-9);

}  // namespace lln
