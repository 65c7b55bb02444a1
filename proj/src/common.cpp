#include "lln/common.hpp"

#include <cmath>
#include <sstream>

namespace lln {

void require_finite(const Mat& m, const char* name) {
    if (!m.allFinite()) {
        std::ostringstream os;
        os << name << " contains a non-finite entry";
        throw DomainError(os.str());
    }
}

void require_same_shape(const Mat& a, const Mat& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        std::ostringstream os;
        os << what << ": shape mismatch (" << a.rows() << "x" << a.cols()
           << " vs " << b.rows() << "x" << b.cols() << ")";
        throw ShapeError(os.str());
    }
}

bool is_row_stochastic(const Mat& w, double tol) {
    if (w.rows() < 1 || w.cols() < 1) return false;
    if ((w.array() < -tol).any() || (w.array() > 1.0 + tol).any()) return false;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        if (std::abs(w.row(i).sum() - 1.0) > tol) return false;
    }
    return true;
}

void require_row_stochastic(const Mat& w, double tol) {
    if (!is_row_stochastic(w, tol)) {
        throw DomainError("matrix is not row-stochastic within tolerance");
    }
}

}  // namespace lln
