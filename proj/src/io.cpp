#include "lln/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace lln {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_matrix_csv(const std::string& path, const Mat& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

Mat read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError("parse failure in " + path + ": '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw IoError("ragged rows in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError("empty matrix file: " + path);
    Mat m(static_cast<Eigen::Index>(rows.size()),
          static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                rows[i][j];
    return m;
}

}  // namespace lln
