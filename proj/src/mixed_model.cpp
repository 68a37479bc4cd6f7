#include "lexdrift/mixed_model.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <numeric>

#include "lexdrift/error.hpp"
#include "lexdrift/stats.hpp"
#include "lexdrift/text.hpp"

namespace lexdrift::mixed {

CrossedDesign<double> makeDesign(const std::vector<Rating>& ratings) {
  std::map<std::string, int> users, items;
  for (const auto& r : ratings) {
    users.emplace(r.participantId, 0);
    items.emplace(r.itemId, 0);
  }
  CrossedDesign<double> d;
  for (auto& [id, idx] : users) {
    idx = d.nUsers++;
    d.userIds.push_back(id);
  }
  for (auto& [id, idx] : items) {
    idx = d.nItems++;
    d.itemIds.push_back(id);
  }
  d.y.resize(static_cast<Eigen::Index>(ratings.size()));
  d.user.reserve(ratings.size());
  d.item.reserve(ratings.size());
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    const auto& r = ratings[i];
    if (r.choice != ChoiceVariant::Low && r.choice != ChoiceVariant::High) {
      throw ValidationError("mixed model needs binary low/high responses; got '" + std::string(toString(r.choice)) +
                            "' for item '" + r.itemId + "'");
    }
    d.y(static_cast<Eigen::Index>(i)) = r.choice == ChoiceVariant::High ? 1.0 : 0.0;
    d.user.push_back(users.at(r.participantId));
    d.item.push_back(items.at(r.itemId));
  }
  return d;
}

SimplexResult nelderMead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                         const SimplexOptions& opt) {
  const Eigen::Index dim = x0.size();
  auto clamp = [&](Eigen::VectorXd x) {
    for (Eigen::Index i = 0; i < dim; ++i) x(i) = std::clamp(x(i), opt.lowerBound, opt.upperBound);
    return x;
  };
  SimplexResult res;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };

  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(dim + 1));
  std::vector<double> vals(pts.size());
  pts[0] = clamp(x0);
  for (Eigen::Index i = 0; i < dim; ++i) {
    Eigen::VectorXd x = pts[0];
    x(i) += opt.initialStep;
    if (x(i) > opt.upperBound) x(i) = pts[0](i) - opt.initialStep;
    pts[static_cast<std::size_t>(i + 1)] = clamp(x);
  }
  for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(pts.size());
  auto sortSimplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    std::vector<Eigen::VectorXd> p2;
    std::vector<double> v2;
    for (auto i : order) {
      p2.push_back(pts[i]);
      v2.push_back(vals[i]);
    }
    pts = std::move(p2);
    vals = std::move(v2);
  };
  auto spreadSmall = [&] {
    const double xScale = 1.0 + pts[0].cwiseAbs().maxCoeff();
    double xSpread = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) xSpread = std::max(xSpread, (pts[i] - pts[0]).cwiseAbs().maxCoeff());
    const double fSpread = vals.back() - vals.front();
    return xSpread <= opt.tolerance * xScale && fSpread <= opt.tolerance * (1.0 + std::fabs(vals.front()));
  };

  sortSimplex();
  while (res.iterations < opt.maxIterations) {
    if (spreadSmall()) {
      res.converged = true;
      break;
    }
    ++res.iterations;
    const std::size_t worst = pts.size() - 1;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i < worst; ++i) centroid += pts[i];
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd xr = clamp(centroid + (centroid - pts[worst]));
    const double fr = eval(xr);
    if (fr < vals[0]) {
      const Eigen::VectorXd xe = clamp(centroid + 2.0 * (centroid - pts[worst]));
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
    } else if (fr < vals[worst - 1]) {
      pts[worst] = xr;
      vals[worst] = fr;
    } else {
      const bool outside = fr < vals[worst];
      const Eigen::VectorXd xc =
          outside ? clamp(centroid + 0.5 * (xr - centroid)) : clamp(centroid + 0.5 * (pts[worst] - centroid));
      const double fc = eval(xc);
      if (fc < (outside ? fr : vals[worst])) {
        pts[worst] = xc;
        vals[worst] = fc;
      } else {
        for (std::size_t i = 1; i < pts.size(); ++i) {
          pts[i] = clamp(pts[0] + 0.5 * (pts[i] - pts[0]));
          vals[i] = eval(pts[i]);
        }
      }
    }
    sortSimplex();
  }
  if (!res.converged && spreadSmall()) res.converged = true;
  res.x = pts[0];
  res.value = vals[0];
  return res;
}

namespace {

enum Component { kUser = 0, kItem = 1, kResid = 2 };

}  // namespace

ModelFit fitMixedLpm(const std::vector<Rating>& ratings, const FitOptions& options) {
  return fitMixedLpm(makeDesign(ratings), options);
}

ModelFit fitMixedLpm(const CrossedDesign<double>& design, const FitOptions& options) {
  const Eigen::Index n = design.size();
  if (n < 2) throw ValidationError("mixed model needs at least 2 observations");

  const RemlProblem<double> problem(design);
  std::vector<int> free;
  if (!options.pinUserZero) free.push_back(kUser);
  if (!options.pinItemZero) free.push_back(kItem);
  free.push_back(kResid);

  const double mean = design.y.mean();
  const double var = std::max((design.y.array() - mean).square().sum() / static_cast<double>(n - 1), 1e-4);
  const double lower = std::log(options.varianceFloor);
  const double upper = std::log(1e3 * var);

  auto components = [&](const Eigen::VectorXd& theta) {
    VarianceComponents<double> vc{0, 0, 0};
    std::array<double*, 3> slot = {&vc.user, &vc.item, &vc.resid};
    for (std::size_t i = 0; i < free.size(); ++i) {
      *slot[static_cast<std::size_t>(free[i])] = std::exp(std::clamp(theta(static_cast<Eigen::Index>(i)), lower, upper));
    }
    return vc;
  };
  auto evaluate = [&](const VarianceComponents<double>& vc) {
    return options.dense ? remlDense(design, vc) : problem.evaluate(vc);
  };
  auto objective = [&](const Eigen::VectorXd& theta) { return -evaluate(components(theta)).loglik; };

  // Deterministic start grid: shares of the response variance for (user, item, residual).
  static constexpr std::array<std::array<double, 3>, 5> kGrid = {{{0.1, 0.01, 0.9},
                                                                  {0.3, 0.1, 0.6},
                                                                  {0.05, 0.05, 0.5},
                                                                  {0.5, 0.02, 0.5},
                                                                  {0.02, 0.3, 0.7}}};

  SimplexOptions so;
  so.tolerance = options.tolerance;
  so.maxIterations = options.maxIterations;
  so.lowerBound = lower;
  so.upperBound = upper;

  ModelFit fit;
  SimplexResult best;
  best.value = std::numeric_limits<double>::infinity();
  fit.bestStartLoglik = -std::numeric_limits<double>::infinity();
  const int starts = std::max(1, options.starts);
  for (int s = 0; s < starts; ++s) {
    const auto& share = kGrid[static_cast<std::size_t>(s) % kGrid.size()];
    const double scale = 1.0 + static_cast<double>(s / static_cast<int>(kGrid.size()));
    Eigen::VectorXd x0(static_cast<Eigen::Index>(free.size()));
    for (std::size_t i = 0; i < free.size(); ++i) {
      x0(static_cast<Eigen::Index>(i)) = std::log(share[static_cast<std::size_t>(free[i])] * var * scale);
    }
    fit.bestStartLoglik = std::max(fit.bestStartLoglik, -objective(x0));
    auto r = nelderMead(objective, x0, so);
    fit.iterations += r.iterations;
    fit.evaluations += r.evaluations;
    if (r.value < best.value || (r.value == best.value && r.converged && !best.converged)) best = std::move(r);
  }
  for (int restart = 0; !best.converged && restart < options.maxRestarts; ++restart) {
    auto r = nelderMead(objective, best.x, so);
    fit.iterations += r.iterations;
    fit.evaluations += r.evaluations;
    if (r.value <= best.value) best = std::move(r);
  }

  const auto vc = components(best.x);
  const auto value = evaluate(vc);
  fit.beta = value.beta;
  fit.se = value.se;
  fit.z = value.beta / value.se;
  fit.p = 2.0 * normalSf(std::fabs(fit.z));
  fit.sigma2User = vc.user;
  fit.sigma2Item = vc.item;
  fit.sigma2Resid = vc.resid;
  fit.loglik = value.loglik;
  fit.nObs = static_cast<std::size_t>(n);
  fit.nUsers = design.nUsers;
  fit.nItems = design.nItems;
  fit.converged = best.converged;
  return fit;
}

std::string render(const ModelFit& fit) {
  return "Mixed-effects model (REML, N = " + std::to_string(fit.nObs) +
         ", log-likelihood = " + text::fixed(fit.loglik, 2) + "): β = " + text::fixed(fit.beta, 3) +
         ", z = " + text::fixed(fit.z, 2) + ", " + formatP(fit.p) + "; σ²_item = " + text::fixed(fit.sigma2Item, 3) +
         ", σ²_user = " + text::fixed(fit.sigma2User, 3) + ", σ²_resid = " + text::fixed(fit.sigma2Resid, 3) +
         (fit.converged ? "" : " [not converged]");
}

}  // namespace lexdrift::mixed
