#pragma once

#include <vector>

#include <Eigen/Dense>

namespace nlz {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Slope of ln|y| against ln|x|.
LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

Eigen::VectorXd least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& y);
Eigen::VectorXcd least_squares(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& y);

}  // namespace nlz
