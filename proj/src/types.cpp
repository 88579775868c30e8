#include "piic/types.hpp"

#include <algorithm>
#include <cstring>

namespace piic {

Dataset::Dataset(Mat X, Vec y, ResponseKind kind, int trials)
    : X_(std::move(X)), y_(std::move(y)), kind_(kind), trials_(trials) {
  if (X_.rows() == 0 || X_.cols() == 0) throw config_error("Dataset: empty design matrix");
  if (y_.size() != X_.rows()) throw config_error("Dataset: response/design row mismatch");
  if (!X_.allFinite() || !y_.allFinite()) throw config_error("Dataset: non-finite entries");
  if (kind_ == ResponseKind::binomial) {
    if (trials_ < 1) throw config_error("Dataset: binomial trials must be >= 1");
    for (int i = 0; i < y_.size(); ++i) {
      const double yi = y_[i];
      if (yi < 0.0 || yi > trials_ || yi != std::floor(yi))
        throw config_error("Dataset: binomial response out of range at row " + std::to_string(i));
    }
  }
}

Dataset Dataset::gaussian(Mat X, Vec y) { return Dataset(std::move(X), std::move(y), ResponseKind::gaussian, 0); }

Dataset Dataset::binomial(Mat X, Vec y, int trials) {
  return Dataset(std::move(X), std::move(y), ResponseKind::binomial, trials);
}

std::uint64_t Dataset::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix_double = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffULL;
      h *= 1099511628211ULL;
    }
  };
  mix_double(static_cast<double>(n()));
  mix_double(static_cast<double>(p()));
  mix_double(static_cast<double>(trials_));
  for (int i = 0; i < y_.size(); ++i) mix_double(y_[i]);
  for (int j = 0; j < X_.cols(); ++j)
    for (int i = 0; i < X_.rows(); ++i) mix_double(X_(i, j));
  return h;
}

LikelihoodModel LikelihoodModel::linear(double sigma2) {
  if (!(sigma2 > 0.0)) throw config_error("LikelihoodModel: sigma2 must be positive");
  LikelihoodModel m;
  m.kind = Kind::linear_gaussian;
  m.sigma2 = sigma2;
  return m;
}

LikelihoodModel LikelihoodModel::logistic(int trials) {
  if (trials < 1) throw config_error("LikelihoodModel: trials must be >= 1");
  LikelihoodModel m;
  m.kind = Kind::logistic_binomial;
  m.trials = trials;
  return m;
}

void LikelihoodModel::check_compatible(const Dataset& data) const {
  if (kind == Kind::linear_gaussian && data.kind() != ResponseKind::gaussian)
    throw config_error("model/data mismatch: gaussian likelihood needs gaussian responses");
  if (kind == Kind::logistic_binomial) {
    if (data.kind() != ResponseKind::binomial)
      throw config_error("model/data mismatch: logistic likelihood needs binomial responses");
    if (data.trials() != trials)
      throw config_error("model/data mismatch: binomial trial counts differ");
  }
}

PriorSpec::PriorSpec(PriorFamily family, std::vector<int> group_of, int n0, Vec xi)
    : family_(family), group_of_(std::move(group_of)), n0_(n0), xi_(std::move(xi)) {
  if (group_of_.empty()) throw config_error("PriorSpec: empty group map");
  if (n0_ < 1) throw config_error("PriorSpec: n0 must be >= 1");
  const int q = static_cast<int>(xi_.size());
  if (q < 1 || q > p()) throw config_error("PriorSpec: need 1 <= q <= p hyper-parameters");
  std::vector<bool> seen(static_cast<std::size_t>(q), false);
  for (int g : group_of_) {
    if (g < 0 || g >= q) throw config_error("PriorSpec: group index out of range");
    seen[static_cast<std::size_t>(g)] = true;
  }
  for (bool s : seen)
    if (!s) throw config_error("PriorSpec: some group has no parameters");
  for (int g = 0; g < q; ++g)
    if (!(xi_[g] > 0.0)) throw config_error("PriorSpec: xi components must be strictly positive");
}

PriorSpec PriorSpec::with_xi(Vec xi) const { return PriorSpec(family_, group_of_, n0_, std::move(xi)); }

PriorSpec PriorSpec::with_n0(int n0) const { return PriorSpec(family_, group_of_, n0, xi_); }

std::vector<int> PriorSpec::block_groups(int p, int k) {
  if (k < 1 || p % k != 0) throw config_error("block_groups: p must be divisible by k");
  std::vector<int> g(static_cast<std::size_t>(p));
  const int block = p / k;
  for (int j = 0; j < p; ++j) g[static_cast<std::size_t>(j)] = j / block;
  return g;
}

ActiveSet::ActiveSet(std::vector<int> indices, double tol, int p) : indices_(std::move(indices)), tol_(tol), p_(p) {
  if (tol_ < 0.0) throw config_error("ActiveSet: negative tolerance");
  std::sort(indices_.begin(), indices_.end());
  for (int j : indices_)
    if (j < 0 || j >= p_) throw config_error("ActiveSet: index out of range");
}

bool ActiveSet::contains(int j) const { return std::binary_search(indices_.begin(), indices_.end(), j); }

ActiveSet active_set(const ParameterPoint& theta_hat, double tol) {
  std::vector<int> idx;
  for (int j = 0; j < theta_hat.p(); ++j)
    if (std::abs(theta_hat.theta[j]) > tol) idx.push_back(j);
  return ActiveSet(std::move(idx), tol, theta_hat.p());
}

Vec restrict_to(const ActiveSet& active, const Vec& full) {
  Vec r(active.size());
  int k = 0;
  for (int j : active.indices()) r[k++] = full[j];
  return r;
}

Vec embed_from(const ActiveSet& active, const Vec& reduced) {
  Vec full = Vec::Zero(active.full_dim());
  int k = 0;
  for (int j : active.indices()) full[j] = reduced[k++];
  return full;
}

}  // namespace piic
