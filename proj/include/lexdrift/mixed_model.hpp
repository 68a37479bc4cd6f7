#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lexdrift/records.hpp"

// Linear probability model with crossed participant and item random intercepts,
//   y = beta + u[participant] + v[item] + e,
// fitted by REML. V = s2e I + s2u Zu Zu' + s2v Zv Zv'.
namespace lexdrift::mixed {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Observations with factor levels mapped to 0-based indices.
template <typename Scalar>
struct CrossedDesign {
  Vector<Scalar> y;
  std::vector<int> user;
  std::vector<int> item;
  int nUsers = 0;
  int nItems = 0;
  std::vector<std::string> userIds;
  std::vector<std::string> itemIds;

  Eigen::Index size() const { return y.size(); }
};

/// y = 1 when the high variant was chosen. Throws ValidationError on non-binary choices.
CrossedDesign<double> makeDesign(const std::vector<Rating>& ratings);

template <typename Scalar>
struct VarianceComponents {
  Scalar user = 0;
  Scalar item = 0;
  Scalar resid = 1;
};

template <typename Scalar>
struct RemlValue {
  Scalar loglik = 0;
  Scalar beta = 0;
  Scalar se = 0;
};

/// Reference path: forms V explicitly and factors it. O(n^3); meant for validation on small designs.
template <typename Scalar>
RemlValue<Scalar> remlDense(const CrossedDesign<Scalar>& d, const VarianceComponents<Scalar>& vc) {
  const Eigen::Index n = d.size();
  Matrix<Scalar> v = Matrix<Scalar>::Identity(n, n) * vc.resid;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (d.user[i] == d.user[j]) v(i, j) += vc.user;
      if (d.item[i] == d.item[j]) v(i, j) += vc.item;
    }
  }
  const Eigen::LLT<Matrix<Scalar>> llt(v);
  const Vector<Scalar> ones = Vector<Scalar>::Ones(n);
  const Vector<Scalar> vinv1 = llt.solve(ones);
  const Vector<Scalar> vinvY = llt.solve(d.y);
  const Scalar s11 = ones.dot(vinv1);
  const Scalar s1y = ones.dot(vinvY);
  const Scalar beta = s1y / s11;
  const Vector<Scalar> r = d.y - ones * beta;
  const Scalar quad = r.dot(llt.solve(r));
  const Scalar logdet = Scalar(2) * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  using std::log;
  using std::sqrt;
  RemlValue<Scalar> out;
  out.beta = beta;
  out.se = Scalar(1) / sqrt(s11);
  out.loglik = Scalar(-0.5) * (logdet + log(s11) + quad +
                               Scalar(n - 1) * log(Scalar(2) * std::numbers::pi_v<Scalar>));
  return out;
}

/// Structured path. With L = diag(sqrt(s2)) per factor, the determinant lemma and Woodbury identity
/// reduce everything to M = I + L Z'Z L / s2e. Z'Z has diagonal factor blocks, so M is solved by a
/// Schur complement on the smaller factor: O(nP * nQ^2) per evaluation.
template <typename Scalar>
class RemlProblem {
 public:
  explicit RemlProblem(const CrossedDesign<Scalar>& d) : n_(d.size()) {
    // Eliminate the factor with more levels through its diagonal block.
    usersEliminated_ = d.nUsers >= d.nItems;
    const int nP = usersEliminated_ ? d.nUsers : d.nItems;
    const int nQ = usersEliminated_ ? d.nItems : d.nUsers;
    countP_ = Vector<Scalar>::Zero(nP);
    countQ_ = Vector<Scalar>::Zero(nQ);
    sumYP_ = Vector<Scalar>::Zero(nP);
    sumYQ_ = Vector<Scalar>::Zero(nQ);
    cross_ = Matrix<Scalar>::Zero(nP, nQ);
    for (Eigen::Index i = 0; i < n_; ++i) {
      const int p = usersEliminated_ ? d.user[i] : d.item[i];
      const int q = usersEliminated_ ? d.item[i] : d.user[i];
      countP_(p) += 1;
      countQ_(q) += 1;
      sumYP_(p) += d.y(i);
      sumYQ_(q) += d.y(i);
      cross_(p, q) += 1;
    }
    sumY_ = d.y.sum();
    sumYY_ = d.y.squaredNorm();
  }

  Eigen::Index size() const { return n_; }

  RemlValue<Scalar> evaluate(const VarianceComponents<Scalar>& vc) const {
    using std::log;
    using std::sqrt;
    const Scalar s2e = vc.resid;
    const Scalar lamP = sqrt(usersEliminated_ ? vc.user : vc.item);
    const Scalar lamQ = sqrt(usersEliminated_ ? vc.item : vc.user);

    const Vector<Scalar> dP = (countP_.array() * (lamP * lamP / s2e) + Scalar(1)).matrix();
    const Vector<Scalar> dQ = (countQ_.array() * (lamQ * lamQ / s2e) + Scalar(1)).matrix();
    const Matrix<Scalar> b = cross_ * (lamP * lamQ / s2e);
    const Matrix<Scalar> bScaled = dP.cwiseInverse().asDiagonal() * b;
    Matrix<Scalar> schur = -b.transpose() * bScaled;
    schur.diagonal() += dQ;
    const Eigen::LLT<Matrix<Scalar>> llt(schur);
    const Scalar logdetM =
        dP.array().log().sum() + Scalar(2) * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();

    // x' M^-1 x for x = [xP; xQ].
    auto quadM = [&](const Vector<Scalar>& xP, const Vector<Scalar>& xQ, const Vector<Scalar>& wP,
                     const Vector<Scalar>& wQ) {
      const Vector<Scalar> solQ = llt.solve(wQ - bScaled.transpose() * wP);
      const Vector<Scalar> solP = (wP - b * solQ).cwiseQuotient(dP);
      return xP.dot(solP) + xQ.dot(solQ);
    };
    const Vector<Scalar> aP = countP_ * lamP, aQ = countQ_ * lamQ;
    const Vector<Scalar> yP = sumYP_ * lamP, yQ = sumYQ_ * lamQ;

    const Scalar n = Scalar(n_);
    const Scalar s11 = (n - quadM(aP, aQ, aP, aQ) / s2e) / s2e;
    const Scalar s1y = (sumY_ - quadM(aP, aQ, yP, yQ) / s2e) / s2e;
    const Scalar syy = (sumYY_ - quadM(yP, yQ, yP, yQ) / s2e) / s2e;
    const Scalar beta = s1y / s11;
    const Scalar quad = syy - s1y * s1y / s11;
    const Scalar logdetV = n * log(s2e) + logdetM;

    RemlValue<Scalar> out;
    out.beta = beta;
    out.se = Scalar(1) / sqrt(s11);
    out.loglik = Scalar(-0.5) * (logdetV + log(s11) + quad +
                                 (n - Scalar(1)) * log(Scalar(2) * std::numbers::pi_v<Scalar>));
    return out;
  }

 private:
  Eigen::Index n_;
  bool usersEliminated_ = true;
  Vector<Scalar> countP_, countQ_, sumYP_, sumYQ_;
  Matrix<Scalar> cross_;
  Scalar sumY_ = 0, sumYY_ = 0;
};

struct SimplexOptions {
  double initialStep = 1.0;
  double tolerance = 1e-8;
  int maxIterations = 5000;
  double lowerBound = -1e300;
  double upperBound = 1e300;
};

struct SimplexResult {
  Eigen::VectorXd x;
  double value = 0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Derivative-free Nelder-Mead minimizer with box clamping. Converged means the simplex spread in
/// both x and f fell below `tolerance` relative to the best vertex.
SimplexResult nelderMead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                         const SimplexOptions& options = {});

struct FitOptions {
  bool pinUserZero = false;
  bool pinItemZero = false;
  int starts = 5;
  int maxRestarts = 3;
  double tolerance = 1e-8;
  int maxIterations = 5000;
  double varianceFloor = 1e-10;  // regularizes s2e (and the random-effect variances) away from 0
  bool dense = false;            // use the O(n^3) reference path
};

struct ModelFit {
  double beta = 0;
  double se = 0;
  double z = 0;
  double p = 1;
  double sigma2Item = 0;
  double sigma2User = 0;
  double sigma2Resid = 0;
  double loglik = 0;
  std::size_t nObs = 0;
  int nUsers = 0;
  int nItems = 0;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  double bestStartLoglik = 0;  // highest log-likelihood among the initial points
};

ModelFit fitMixedLpm(const std::vector<Rating>& ratings, const FitOptions& options = {});
ModelFit fitMixedLpm(const CrossedDesign<double>& design, const FitOptions& options = {});

/// "β = 0.524, z = 33.20, p < 0.001" style rendering plus variance components and log-likelihood.
std::string render(const ModelFit& fit);

}  // namespace lexdrift::mixed
