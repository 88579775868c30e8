#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace piic {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Thrown for malformed inputs, bad configuration, unusable files.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a computation fails numerically (non-convergence, singular
// matrix, underflow of every predictive term, ...).
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ResponseKind { gaussian, binomial };

// Regression sample z_i = (y_i, x_i), held column-major as a design matrix
// plus a response vector. Immutable after construction.
class Dataset {
 public:
  static Dataset gaussian(Mat X, Vec y);
  static Dataset binomial(Mat X, Vec y, int trials);

  int n() const { return static_cast<int>(X_.rows()); }
  int p() const { return static_cast<int>(X_.cols()); }
  const Mat& X() const { return X_; }
  const Vec& y() const { return y_; }
  ResponseKind kind() const { return kind_; }
  int trials() const { return trials_; }

  // 64-bit content hash; used to verify paired-seed discipline across
  // criterion arms that must see identical data.
  std::uint64_t hash() const;

 private:
  Dataset(Mat X, Vec y, ResponseKind kind, int trials);
  Mat X_;
  Vec y_;
  ResponseKind kind_;
  int trials_;  // binomial m; 0 for gaussian
};

struct LikelihoodModel {
  enum class Kind { linear_gaussian, logistic_binomial };
  Kind kind;
  double sigma2 = 1.0;  // linear_gaussian only
  int trials = 1;       // logistic_binomial only

  static LikelihoodModel linear(double sigma2);
  static LikelihoodModel logistic(int trials);
  void check_compatible(const Dataset& data) const;
};

enum class PriorFamily { normal, laplace };

// Zero-mean prior over the regression coefficients. xi holds one
// hyper-parameter per group: the variance zeta_g for the normal family, the
// rate xi_g for the Laplace family (density (xi/2) exp(-xi |theta|); the
// Laplace(0, zeta) notation used in some references maps to rate 1/zeta).
// The joint density used downstream is pi(theta; xi)^(n/n0).
class PriorSpec {
 public:
  PriorSpec(PriorFamily family, std::vector<int> group_of, int n0, Vec xi);

  PriorFamily family() const { return family_; }
  int p() const { return static_cast<int>(group_of_.size()); }
  int q() const { return static_cast<int>(xi_.size()); }
  int group(int j) const { return group_of_[static_cast<std::size_t>(j)]; }
  const std::vector<int>& group_map() const { return group_of_; }
  int n0() const { return n0_; }
  const Vec& xi() const { return xi_; }
  double xi_of(int j) const { return xi_[group(j)]; }

  PriorSpec with_xi(Vec xi) const;
  PriorSpec with_n0(int n0) const;

  // All coefficients in one group.
  static std::vector<int> single_group(int p) { return std::vector<int>(static_cast<std::size_t>(p), 0); }
  // p/k consecutive blocks of equal size.
  static std::vector<int> block_groups(int p, int k);

 private:
  PriorFamily family_;
  std::vector<int> group_of_;
  int n0_;
  Vec xi_;
};

struct ParameterPoint {
  Vec theta;
  ParameterPoint() = default;
  explicit ParameterPoint(Vec t) : theta(std::move(t)) {
    if (!theta.allFinite()) throw numeric_error("ParameterPoint: non-finite component");
  }
  int p() const { return static_cast<int>(theta.size()); }
};

// Indices j with |theta_hat_j| > tol, kept sorted.
class ActiveSet {
 public:
  ActiveSet() = default;
  ActiveSet(std::vector<int> indices, double tol, int p);

  const std::vector<int>& indices() const { return indices_; }
  double tol() const { return tol_; }
  int size() const { return static_cast<int>(indices_.size()); }
  bool empty() const { return indices_.empty(); }
  bool contains(int j) const;
  int full_dim() const { return p_; }

 private:
  std::vector<int> indices_;
  double tol_ = 0.0;
  int p_ = 0;
};

ActiveSet active_set(const ParameterPoint& theta_hat, double tol = 0.0);

// Gathers the active coordinates of a full-length vector.
Vec restrict_to(const ActiveSet& active, const Vec& full);
// Scatters an active-length vector back into a zero-padded full vector.
Vec embed_from(const ActiveSet& active, const Vec& reduced);

}  // namespace piic
