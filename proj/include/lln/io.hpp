#pragma once

#include "lln/common.hpp"

#include <string>

namespace lln {

// Matrix files are headerless CSV, row-major, one token per line, floats
// with 17 significant digits.
void write_matrix_csv(const std::string& path, const Mat& m);
Mat read_matrix_csv(const std::string& path);

std::string format_double(double v);  // %.17g

}  // namespace lln
