#pragma once

#include <Eigen/Dense>
#include <functional>

namespace cutpost {

/// Objective returning f(x) and writing the gradient into `grad`.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct BfgsOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;   // on the inf-norm of the gradient
  double relative_f_tolerance = 1e-12;
  /// Stop once an iteration no longer reduces f by the relative tolerance,
  /// even if the gradient is not yet small.
  bool stop_on_stall = false;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Unconstrained BFGS minimization with Armijo backtracking. A non-finite
/// objective value is treated as "step too long".
BfgsResult minimize_bfgs(const Objective& objective, Eigen::VectorXd x0,
                         const BfgsOptions& options = {});

/// Central-difference gradient of a scalar function.
Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x);

/// Central-difference Hessian with per-coordinate step cbrt(eps)*max(1,|x_i|).
Eigen::MatrixXd numeric_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                                const Eigen::VectorXd& x);

}  // namespace cutpost
