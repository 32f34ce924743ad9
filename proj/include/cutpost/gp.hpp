#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace cutpost {

struct GpOptions {
  int restarts = 8;
  /// Nugget relative to the target variance. Escalated x10 up to max_nugget
  /// when the kernel matrix cannot be factorized.
  double nugget = 1e-8;
  double max_nugget = 1e-4;
  /// Treat the nugget as a hyperparameter (noisy targets, duplicate inputs).
  bool estimate_noise = false;
  double min_lengthscale = 1e-2;  // standardized units
  double max_lengthscale = 1e2;
};

struct GpPrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  std::vector<bool> extrapolated;
};

/// Squared-exponential GP with anisotropic lengthscales, fitted by maximum
/// marginal likelihood. Immutable once fitted.
class GpModel {
 public:
  GpModel() = default;

  static GpModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpOptions& options = {});

  GpPrediction predict(const Eigen::MatrixXd& X_new) const;
  Eigen::VectorXd predict_mean(const Eigen::MatrixXd& X_new) const;
  double predict_mean(const Eigen::VectorXd& x) const;

  /// Lengthscales in the original input units.
  Eigen::VectorXd lengthscales() const;
  /// Lengthscales in standardized input units.
  const Eigen::VectorXd& standardized_lengthscales() const { return lengthscales_; }
  double signal_variance() const { return signal_variance_; }
  /// Nugget relative to the signal variance.
  double nugget() const { return nugget_; }
  double log_likelihood() const { return log_likelihood_; }
  double target_mean() const { return y_mean_; }
  Eigen::Index training_size() const { return Xs_.rows(); }
  Eigen::Index input_dim() const { return Xs_.cols(); }
  /// FNV-1a hash of the training inputs and targets.
  std::uint64_t design_hash() const { return design_hash_; }
  /// Hyperparameters and provenance as a JSON object.
  std::string to_json() const;

 private:
  Eigen::RowVectorXd standardize(const Eigen::VectorXd& x) const;
  Eigen::VectorXd kernel_column(const Eigen::RowVectorXd& xs) const;
  using VectorXld = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  VectorXld kernel_column_ld(const Eigen::RowVectorXd& xs) const;
  double mean_at(const Eigen::RowVectorXd& xs) const;

  Eigen::MatrixXd Xs_;             // standardized training inputs
  Eigen::RowVectorXd x_center_;
  Eigen::RowVectorXd x_scale_;
  Eigen::RowVectorXd x_lo_, x_hi_;  // standardized training range
  double y_mean_ = 0.0;
  Eigen::VectorXd lengthscales_;
  double signal_variance_ = 0.0;
  double nugget_ = 0.0;
  double log_likelihood_ = 0.0;
  bool estimate_noise_ = false;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  // R^{-1} (y - mean). Extended precision: with long lengthscales R is close
  // to singular and the weights are large.
  VectorXld weights_;
  std::uint64_t design_hash_ = 0;
};

inline GpModel gp_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpOptions& options = {}) {
  return GpModel::fit(X, y, options);
}
inline GpPrediction gp_predict(const GpModel& model, const Eigen::MatrixXd& X_new) {
  return model.predict(X_new);
}

/// Frobenius-nearest positive semi-definite matrix: symmetrize, clip negative
/// eigenvalues to zero, reassemble.
Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& M);

/// True when the symmetric matrix has no eigenvalue below -tol*max(1,|M|).
bool is_psd(const Eigen::MatrixXd& M, double tol = 1e-12);

}  // namespace cutpost
