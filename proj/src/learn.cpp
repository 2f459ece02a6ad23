#include "gazeforge/learn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "gazeforge/rng.hpp"
#include "text_util.hpp"

namespace gazeforge {

using json = nlohmann::json;

const char* family_name(Family family) {
  switch (family) {
    case Family::KNN: return "knn";
    case Family::GNB: return "gnb";
    case Family::LOGREG: return "logreg";
    case Family::SVM_LINEAR: return "svm_linear";
    case Family::RANDOM_FOREST: return "random_forest";
  }
  throw std::logic_error("bad family tag");
}

Family family_from(const std::string& name) {
  if (name == "knn") return Family::KNN;
  if (name == "gnb") return Family::GNB;
  if (name == "logreg" || name == "lr") return Family::LOGREG;
  if (name == "svm_linear" || name == "svm") return Family::SVM_LINEAR;
  if (name == "random_forest" || name == "rf") return Family::RANDOM_FOREST;
  throw std::invalid_argument("unknown classifier family '" + name + "'");
}

namespace {

void require_rectangular(const std::vector<std::vector<double>>& rows,
                         const std::vector<Label>& labels) {
  if (rows.empty()) throw std::invalid_argument("no training rows");
  if (rows.size() != labels.size())
    throw std::invalid_argument("row/label count mismatch");
  const std::size_t d = rows[0].size();
  if (d == 0) throw std::invalid_argument("rows have no features");
  for (const auto& r : rows)
    if (r.size() != d) throw std::invalid_argument("ragged feature rows");
}

void require_both_classes(const std::vector<Label>& labels) {
  bool text = false, image = false;
  for (auto l : labels) (l == Label::TEXT ? text : image) = true;
  if (!text || !image) throw std::invalid_argument("training data has a single class");
}

}  // namespace

Standardizer standardize_fit(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("cannot standardize zero rows");
  const std::size_t d = rows[0].size();
  Standardizer s;
  s.means.assign(d, 0.0);
  s.stds.assign(d, 1.0);
  for (std::size_t f = 0; f < d; ++f) {
    double lo = rows[0][f], hi = rows[0][f], sum = 0.0;
    for (const auto& r : rows) {
      sum += r[f];
      lo = std::min(lo, r[f]);
      hi = std::max(hi, r[f]);
    }
    const double mean = sum / double(rows.size());
    s.means[f] = mean;
    if (lo == hi) continue;  // constant column keeps std 1
    double ss = 0.0;
    for (const auto& r : rows) ss += (r[f] - mean) * (r[f] - mean);
    const double var = ss / double(rows.size());
    s.stds[f] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

std::vector<double> standardize_row(const std::vector<double>& row, const Standardizer& s) {
  if (row.size() != s.means.size()) throw std::invalid_argument("feature count mismatch");
  std::vector<double> z(row.size());
  for (std::size_t f = 0; f < row.size(); ++f) z[f] = (row[f] - s.means[f]) / s.stds[f];
  return z;
}

std::vector<std::vector<double>> standardize_apply(const std::vector<std::vector<double>>& rows,
                                                   const Standardizer& s) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(standardize_row(r, s));
  return out;
}

TrainedModel train_knn(const std::vector<std::vector<double>>& rows,
                       const std::vector<Label>& labels, int k) {
  require_rectangular(rows, labels);
  if (k < 1 || std::size_t(k) > rows.size())
    throw std::invalid_argument("knn: k must be in [1, n]");
  TrainedModel m;
  m.family = Family::KNN;
  m.scaler = standardize_fit(rows);
  m.k = k;
  m.train_rows = standardize_apply(rows, m.scaler);
  m.train_labels = labels;
  return m;
}

TrainedModel train_gnb(const std::vector<std::vector<double>>& rows,
                       const std::vector<Label>& labels, double var_floor) {
  require_rectangular(rows, labels);
  require_both_classes(labels);
  if (var_floor <= 0) throw std::invalid_argument("gnb: variance floor must be positive");

  TrainedModel m;
  m.family = Family::GNB;
  m.scaler = standardize_fit(rows);
  const auto z = standardize_apply(rows, m.scaler);
  const std::size_t d = z[0].size();
  const std::size_t n = z.size();

  std::size_t n_text = 0;
  for (auto l : labels)
    if (l == Label::TEXT) ++n_text;
  m.prior_text = double(n_text) / double(n);
  m.prior_image = double(n - n_text) / double(n);

  auto per_class = [&](Label cls, std::vector<double>& means, std::vector<double>& vars) {
    means.assign(d, 0.0);
    vars.assign(d, 0.0);
    std::size_t cn = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] == cls) {
        ++cn;
        for (std::size_t f = 0; f < d; ++f) means[f] += z[i][f];
      }
    for (auto& v : means) v /= double(cn);
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] == cls)
        for (std::size_t f = 0; f < d; ++f) {
          const double dv = z[i][f] - means[f];
          vars[f] += dv * dv;
        }
    for (auto& v : vars) v /= double(cn);
  };
  per_class(Label::TEXT, m.gnb_mean_text, m.gnb_var_text);
  per_class(Label::IMAGE, m.gnb_mean_image, m.gnb_var_image);

  // floor variances at var_floor x the largest overall feature variance
  double max_var = 0.0;
  for (std::size_t f = 0; f < d; ++f) {
    double mean = 0.0, ss = 0.0;
    for (const auto& r : z) mean += r[f];
    mean /= double(n);
    for (const auto& r : z) ss += (r[f] - mean) * (r[f] - mean);
    max_var = std::max(max_var, ss / double(n));
  }
  const double eps = max_var > 0.0 ? var_floor * max_var : var_floor;
  for (auto* vs : {&m.gnb_var_text, &m.gnb_var_image})
    for (auto& v : *vs) v = std::max(v, eps);
  return m;
}

namespace {

double logistic(double t) { return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

double log1pexp(double t) { return t > 35.0 ? t : std::log1p(std::exp(t)); }

// Cholesky solve of a dense SPD system, row-major.
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> g, std::size_t m) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * m + j];
      for (std::size_t p = 0; p < j; ++p) s -= a[i * m + p] * a[j * m + p];
      if (i == j) {
        if (s <= 0) throw std::runtime_error("normal equations not positive definite");
        a[i * m + i] = std::sqrt(s);
      } else {
        a[i * m + j] = s / a[j * m + j];
      }
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    double s = g[i];
    for (std::size_t p = 0; p < i; ++p) s -= a[i * m + p] * g[p];
    g[i] = s / a[i * m + i];
  }
  for (std::size_t ii = m; ii-- > 0;) {
    double s = g[ii];
    for (std::size_t p = ii + 1; p < m; ++p) s -= a[p * m + ii] * g[p];
    g[ii] = s / a[ii * m + ii];
  }
  return g;
}

}  // namespace

TrainedModel train_logreg(const std::vector<std::vector<double>>& rows,
                          const std::vector<Label>& labels, double c, double tol,
                          int max_iter) {
  require_rectangular(rows, labels);
  require_both_classes(labels);
  if (c <= 0) throw std::invalid_argument("logreg: C must be positive");
  if (max_iter <= 0) max_iter = 100;

  TrainedModel m;
  m.family = Family::LOGREG;
  m.scaler = standardize_fit(rows);
  m.c = c;
  const auto z = standardize_apply(rows, m.scaler);
  const std::size_t n = z.size();
  const std::size_t d = z[0].size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == Label::TEXT ? 1.0 : -1.0;

  // theta = (w, b); b unregularized
  std::vector<double> theta(d + 1, 0.0);
  auto margin = [&](const std::vector<double>& th, std::size_t i) {
    double zi = th[d];
    for (std::size_t f = 0; f < d; ++f) zi += th[f] * z[i][f];
    return zi;
  };
  auto objective = [&](const std::vector<double>& th) {
    double obj = 0.0;
    for (std::size_t f = 0; f < d; ++f) obj += th[f] * th[f];
    obj *= 0.5 / c;
    for (std::size_t i = 0; i < n; ++i) obj += log1pexp(-y[i] * margin(th, i));
    return obj;
  };

  bool converged = false;
  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<double> grad(d + 1, 0.0);
    std::vector<double> hess((d + 1) * (d + 1), 0.0);
    for (std::size_t f = 0; f < d; ++f) {
      grad[f] = theta[f] / c;
      hess[f * (d + 1) + f] = 1.0 / c;
    }
    hess[d * (d + 1) + d] = 1e-12;  // keeps the bias row factorable when every weight saturates
    for (std::size_t i = 0; i < n; ++i) {
      const double zi = margin(theta, i);
      const double s = logistic(-y[i] * zi);  // d loss / d(-y z)
      const double gi = -y[i] * s;
      const double di = logistic(zi) * (1.0 - logistic(zi));
      for (std::size_t f = 0; f < d; ++f) grad[f] += gi * z[i][f];
      grad[d] += gi;
      for (std::size_t f = 0; f < d; ++f) {
        for (std::size_t g2 = 0; g2 <= f; ++g2) hess[f * (d + 1) + g2] += di * z[i][f] * z[i][g2];
        hess[f * (d + 1) + d] += di * z[i][f];
      }
      hess[d * (d + 1) + d] += di;
    }
    for (std::size_t f = 0; f < d + 1; ++f)
      for (std::size_t g2 = f + 1; g2 < d + 1; ++g2) hess[f * (d + 1) + g2] = hess[g2 * (d + 1) + f];

    double gnorm = 0.0;
    for (double g2 : grad) gnorm += g2 * g2;
    gnorm = std::sqrt(gnorm);
    if (gnorm <= tol) {
      converged = true;
      break;
    }

    auto step = solve_spd(hess, grad, d + 1);
    double dir_dot_grad = 0.0;
    for (std::size_t f = 0; f < d + 1; ++f) dir_dot_grad += step[f] * grad[f];

    const double f0 = objective(theta);
    double t = 1.0;
    std::vector<double> trial(d + 1);
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t f = 0; f < d + 1; ++f) trial[f] = theta[f] - t * step[f];
      if (objective(trial) <= f0 - 1e-4 * t * dir_dot_grad) break;
      t *= 0.5;
    }
    theta = trial;
  }
  if (!converged) throw std::runtime_error("logreg did not converge");

  m.w.assign(theta.begin(), theta.begin() + long(d));
  m.b = theta[d];
  return m;
}

TrainedModel train_svm_linear(const std::vector<std::vector<double>>& rows,
                              const std::vector<Label>& labels, double c, double tol,
                              int max_iter) {
  require_rectangular(rows, labels);
  require_both_classes(labels);
  if (c <= 0) throw std::invalid_argument("svm: C must be positive");
  if (max_iter <= 0) max_iter = 100000;

  TrainedModel m;
  m.family = Family::SVM_LINEAR;
  m.scaler = standardize_fit(rows);
  m.c = c;
  const auto z = standardize_apply(rows, m.scaler);
  const std::size_t n = z.size();
  const std::size_t d = z[0].size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == Label::TEXT ? 1.0 : -1.0;

  // dual coordinate descent on the hinge-loss dual; the bias rides along as a
  // constant 1 feature, so it is regularized like the weights
  std::vector<double> qii(n);
  for (std::size_t i = 0; i < n; ++i) {
    double q = 1.0;  // the bias feature
    for (std::size_t f = 0; f < d; ++f) q += z[i][f] * z[i][f];
    qii[i] = q;
  }
  std::vector<double> alpha(n, 0.0), w(d + 1, 0.0);
  bool converged = false;
  for (int epoch = 0; epoch < max_iter; ++epoch) {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double zi = w[d];
      for (std::size_t f = 0; f < d; ++f) zi += w[f] * z[i][f];
      const double g = y[i] * zi - 1.0;
      double pg = g;
      if (alpha[i] <= 0.0)
        pg = std::min(g, 0.0);
      else if (alpha[i] >= c)
        pg = std::max(g, 0.0);
      worst = std::max(worst, std::abs(pg));
      if (pg != 0.0) {
        const double next = std::clamp(alpha[i] - g / qii[i], 0.0, c);
        const double delta = (next - alpha[i]) * y[i];
        if (delta != 0.0) {
          for (std::size_t f = 0; f < d; ++f) w[f] += delta * z[i][f];
          w[d] += delta;
        }
        alpha[i] = next;
      }
    }
    if (worst <= tol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw std::runtime_error("svm did not converge");

  m.w.assign(w.begin(), w.begin() + long(d));
  m.b = w[d];
  m.alpha = std::move(alpha);
  return m;
}

namespace {

double gini_of(long a, long b) {
  const double n = double(a + b);
  if (n == 0) return 0.0;
  const double pa = double(a) / n, pb = double(b) / n;
  return 1.0 - pa * pa - pb * pb;
}

struct TreeBuilder {
  const std::vector<std::vector<double>>& z;
  const std::vector<Label>& labels;
  int max_features;
  Rng& rng;
  Tree tree;

  int build(std::vector<std::size_t>& samples) {
    TreeNode node;
    for (auto i : samples) (labels[i] == Label::TEXT ? node.count_text : node.count_image)++;
    const int self = int(tree.nodes.size());
    tree.nodes.push_back(node);

    if (node.count_text == 0 || node.count_image == 0 || samples.size() < 2) return self;

    const std::size_t d = z[0].size();
    // a partial shuffle picks max_features distinct feature indices
    std::vector<std::size_t> feats(d);
    std::iota(feats.begin(), feats.end(), 0);
    const std::size_t mf = std::min<std::size_t>(std::size_t(max_features), d);
    for (std::size_t j = 0; j < mf; ++j)
      std::swap(feats[j], feats[j + rng.below(std::uint64_t(d - j))]);

    const double parent = gini_of(node.count_text, node.count_image);
    double best_gain = 0.0, best_thr = 0.0;
    std::size_t best_feat = d;

    std::vector<std::pair<double, Label>> vals;
    for (std::size_t j = 0; j < mf; ++j) {
      const std::size_t f = feats[j];
      vals.clear();
      for (auto i : samples) vals.push_back({z[i][f], labels[i]});
      std::sort(vals.begin(), vals.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      long lt = 0, li = 0;
      const long nt = node.count_text, ni = node.count_image;
      for (std::size_t p = 0; p + 1 < vals.size(); ++p) {
        (vals[p].second == Label::TEXT ? lt : li)++;
        if (vals[p].first == vals[p + 1].first) continue;
        const double thr = (vals[p].first + vals[p + 1].first) / 2.0;
        const double nl = double(lt + li), nr = double(nt + ni) - nl;
        const double child = (nl * gini_of(lt, li) + nr * gini_of(nt - lt, ni - li)) /
                             double(nt + ni);
        const double gain = parent - child;
        const bool better =
            gain > best_gain ||
            (gain == best_gain && best_feat < d &&
             (f < best_feat || (f == best_feat && thr < best_thr)));
        if (better && gain > 0.0) {
          best_gain = gain;
          best_feat = f;
          best_thr = thr;
        }
      }
    }
    if (best_feat == d) return self;  // nothing the sampled features can split

    std::vector<std::size_t> left, right;
    for (auto i : samples)
      (z[i][best_feat] <= best_thr ? left : right).push_back(i);
    samples.clear();
    samples.shrink_to_fit();

    tree.nodes[std::size_t(self)].feature = int(best_feat);
    tree.nodes[std::size_t(self)].threshold = best_thr;
    const int l = build(left);
    tree.nodes[std::size_t(self)].left = l;
    const int r = build(right);
    tree.nodes[std::size_t(self)].right = r;
    return self;
  }
};

}  // namespace

TrainedModel train_random_forest(const std::vector<std::vector<double>>& rows,
                                 const std::vector<Label>& labels, int n_trees,
                                 int max_features, std::uint64_t seed) {
  require_rectangular(rows, labels);
  // single-class input is allowed: every tree is one pure leaf
  if (n_trees < 1) throw std::invalid_argument("forest needs at least one tree");
  if (max_features < 1) throw std::invalid_argument("forest needs at least one feature per split");

  TrainedModel m;
  m.family = Family::RANDOM_FOREST;
  m.scaler = standardize_fit(rows);
  m.rf_seed = seed;
  const auto z = standardize_apply(rows, m.scaler);
  const std::size_t n = z.size();

  const Rng base(seed);
  m.trees.reserve(std::size_t(n_trees));
  for (int t = 0; t < n_trees; ++t) {
    Rng rng = base.fork(std::uint64_t(t));
    std::vector<std::size_t> boot(n);
    for (auto& i : boot) i = std::size_t(rng.below(std::uint64_t(n)));
    TreeBuilder builder{z, labels, max_features, rng, {}};
    builder.build(boot);
    m.trees.push_back(std::move(builder.tree));
  }
  return m;
}

TrainedModel train_model(Family family, const std::vector<std::vector<double>>& rows,
                         const std::vector<Label>& labels, const HyperParams& hp) {
  switch (family) {
    case Family::KNN: return train_knn(rows, labels, hp.knn_k);
    case Family::GNB: return train_gnb(rows, labels, hp.gnb_var_floor);
    case Family::LOGREG:
      return train_logreg(rows, labels, hp.c, hp.tol, hp.max_iter ? hp.max_iter : 100);
    case Family::SVM_LINEAR:
      return train_svm_linear(rows, labels, hp.c, hp.tol, hp.max_iter ? hp.max_iter : 100000);
    case Family::RANDOM_FOREST:
      return train_random_forest(rows, labels, hp.rf_trees, hp.rf_features, hp.rf_seed);
  }
  throw std::logic_error("bad family tag");
}

namespace {

double knn_text_fraction(const TrainedModel& m, const std::vector<double>& zrow) {
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(m.train_rows.size());
  for (std::size_t i = 0; i < m.train_rows.size(); ++i) {
    double d2 = 0.0;
    for (std::size_t f = 0; f < zrow.size(); ++f) {
      const double dv = zrow[f] - m.train_rows[i][f];
      d2 += dv * dv;
    }
    dist.push_back({d2, i});
  }
  // equal distances rank by the earlier training row
  std::sort(dist.begin(), dist.end());
  long votes = 0;
  for (int j = 0; j < m.k; ++j)
    if (m.train_labels[dist[std::size_t(j)].second] == Label::TEXT) ++votes;
  return double(votes) / double(m.k);
}

double gnb_text_probability(const TrainedModel& m, const std::vector<double>& zrow) {
  auto loglik = [&](double prior, const std::vector<double>& means,
                    const std::vector<double>& vars) {
    double ll = std::log(prior);
    for (std::size_t f = 0; f < zrow.size(); ++f) {
      const double dv = zrow[f] - means[f];
      ll += -0.5 * std::log(2.0 * std::numbers::pi * vars[f]) - dv * dv / (2.0 * vars[f]);
    }
    return ll;
  };
  const double lt = loglik(m.prior_text, m.gnb_mean_text, m.gnb_var_text);
  const double li = loglik(m.prior_image, m.gnb_mean_image, m.gnb_var_image);
  const double peak = std::max(lt, li);
  const double et = std::exp(lt - peak), ei = std::exp(li - peak);
  return et / (et + ei);
}

double forest_text_probability(const TrainedModel& m, const std::vector<double>& zrow) {
  double sum = 0.0;
  for (const auto& tree : m.trees) {
    std::size_t node = 0;
    while (tree.nodes[node].feature >= 0) {
      const auto& nd = tree.nodes[node];
      node = std::size_t(zrow[std::size_t(nd.feature)] <= nd.threshold ? nd.left : nd.right);
    }
    const auto& leaf = tree.nodes[node];
    sum += double(leaf.count_text) / double(leaf.count_text + leaf.count_image);
  }
  return sum / double(m.trees.size());
}

double linear_decision(const TrainedModel& m, const std::vector<double>& zrow) {
  double zv = m.b;
  for (std::size_t f = 0; f < zrow.size(); ++f) zv += m.w[f] * zrow[f];
  return zv;
}

}  // namespace

double score(const TrainedModel& model, const std::vector<double>& row) {
  for (double v : row)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
  const auto zrow = standardize_row(row, model.scaler);
  switch (model.family) {
    case Family::KNN: return knn_text_fraction(model, zrow);
    case Family::GNB: return gnb_text_probability(model, zrow);
    case Family::LOGREG: return linear_decision(model, zrow);
    case Family::SVM_LINEAR: return linear_decision(model, zrow);
    case Family::RANDOM_FOREST: return forest_text_probability(model, zrow);
  }
  throw std::logic_error("bad family tag");
}

double predict_proba(const TrainedModel& model, const std::vector<double>& row) {
  if (model.family == Family::SVM_LINEAR)
    throw std::invalid_argument("svm margins are not probabilities");
  if (model.family == Family::LOGREG) return logistic(score(model, row));
  return score(model, row);
}

double decision_value(const TrainedModel& model, const std::vector<double>& row) {
  if (model.family != Family::LOGREG && model.family != Family::SVM_LINEAR)
    throw std::invalid_argument("decision values exist only for linear models");
  return score(model, row);
}

Label predict(const TrainedModel& model, const std::vector<double>& row) {
  const double s = score(model, row);
  const double cut =
      (model.family == Family::LOGREG || model.family == Family::SVM_LINEAR) ? 0.0 : 0.5;
  return s >= cut ? Label::TEXT : Label::IMAGE;
}

std::vector<double> gini_importance(const TrainedModel& model) {
  if (model.family != Family::RANDOM_FOREST)
    throw std::invalid_argument("importances exist only for forest models");
  const std::size_t d = model.scaler.means.size();
  std::vector<double> acc(d, 0.0);
  for (const auto& tree : model.trees) {
    const auto& root = tree.nodes[0];
    const double n_root = double(root.count_text + root.count_image);
    for (const auto& nd : tree.nodes) {
      if (nd.feature < 0) continue;
      const auto& l = tree.nodes[std::size_t(nd.left)];
      const auto& r = tree.nodes[std::size_t(nd.right)];
      const double nn = double(nd.count_text + nd.count_image);
      const double nl = double(l.count_text + l.count_image);
      const double nr = double(r.count_text + r.count_image);
      const double drop = gini_of(nd.count_text, nd.count_image) -
                          (nl * gini_of(l.count_text, l.count_image) +
                           nr * gini_of(r.count_text, r.count_image)) /
                              nn;
      acc[std::size_t(nd.feature)] += (nn / n_root) * drop;
    }
  }
  for (auto& v : acc) v /= double(model.trees.size());
  const double total = std::accumulate(acc.begin(), acc.end(), 0.0);
  if (total > 0.0)
    for (auto& v : acc) v /= total;
  return acc;
}

CvPlan make_cv_plan(const std::vector<Label>& labels, int k, int repeats, std::uint64_t seed) {
  if (k < 1 || repeats < 1) throw std::invalid_argument("cv plan needs k >= 1 and repeats >= 1");
  std::vector<std::size_t> text_idx, image_idx;
  for (std::size_t i = 0; i < labels.size(); ++i)
    (labels[i] == Label::TEXT ? text_idx : image_idx).push_back(i);
  if (text_idx.size() < std::size_t(k) || image_idx.size() < std::size_t(k))
    throw std::invalid_argument("class smaller than k: need at least k rows of each label");

  CvPlan plan;
  plan.k = k;
  plan.repeats = repeats;
  plan.seed = seed;
  const Rng base(seed);
  for (int rep = 0; rep < repeats; ++rep) {
    Rng rng = base.fork(std::uint64_t(rep));
    auto text = text_idx;
    auto image = image_idx;
    rng.shuffle(text);
    rng.shuffle(image);
    std::vector<int> fold(labels.size(), 0);
    for (std::size_t j = 0; j < text.size(); ++j) fold[text[j]] = int(j % std::size_t(k));
    for (std::size_t j = 0; j < image.size(); ++j) fold[image[j]] = int(j % std::size_t(k));
    plan.fold_of.push_back(std::move(fold));
  }
  return plan;
}

std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<Label>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores/labels mismatch");
  long n_pos = 0, n_neg = 0;
  for (auto l : labels) (l == Label::TEXT ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) return {{0.0, 0.0}, {1.0, 1.0}};

  std::vector<std::pair<double, Label>> pts;
  pts.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw std::invalid_argument("non-finite score");
    pts.push_back({scores[i], labels[i]});
  }
  std::sort(pts.begin(), pts.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<RocPoint> roc{{0.0, 0.0}};
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < pts.size()) {
    const double v = pts[i].first;
    // every sample sharing a score crosses the threshold together
    while (i < pts.size() && pts[i].first == v) {
      (pts[i].second == Label::TEXT ? tp : fp)++;
      ++i;
    }
    roc.push_back({double(fp) / double(n_neg), double(tp) / double(n_pos)});
  }
  return roc;
}

double roc_auc(const std::vector<RocPoint>& roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i)
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
  return area;
}

MetricSet compute_metrics(const Confusion& cm, const std::vector<double>& scores,
                          const std::vector<Label>& labels) {
  if (cm.total() < 1) throw std::invalid_argument("empty confusion matrix");
  if (scores.size() != labels.size()) throw std::invalid_argument("scores/labels mismatch");

  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  MetricSet ms;
  ms.accuracy = double(cm.tp + cm.tn) / double(cm.total());

  const double prec_text = ratio(double(cm.tp), double(cm.tp + cm.fp));
  const double rec_text = ratio(double(cm.tp), double(cm.tp + cm.fn));
  const double prec_image = ratio(double(cm.tn), double(cm.tn + cm.fn));
  const double rec_image = ratio(double(cm.tn), double(cm.tn + cm.fp));
  auto f1_of = [&](double p, double r) { return ratio(2.0 * p * r, p + r); };
  ms.precision = (prec_text + prec_image) / 2.0;
  ms.recall = (rec_text + rec_image) / 2.0;
  ms.f1 = (f1_of(prec_text, rec_text) + f1_of(prec_image, rec_image)) / 2.0;
  ms.tpr = rec_text;
  ms.fpr = ratio(double(cm.fp), double(cm.fp + cm.tn));

  if (!scores.empty()) {
    ms.roc = roc_curve(scores, labels);
    ms.auc = roc_auc(ms.roc);
  } else {
    ms.roc = {{0.0, 0.0}, {1.0, 1.0}};
    ms.auc = 0.5;
  }
  return ms;
}

namespace {

double staircase_tpr(const std::vector<RocPoint>& roc, double fpr) {
  double best = 0.0;
  for (const auto& p : roc) {
    if (p.fpr > fpr) break;
    best = std::max(best, p.tpr);
  }
  return best;
}

struct Moments {
  std::vector<double> values;
  void add(double v) { values.push_back(v); }
  double mean() const {
    return std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
  }
  double popstd() const {
    const double m = mean();
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return std::sqrt(ss / double(values.size()));
  }
};

}  // namespace

EvalReport evaluate(Family family, const HyperParams& hp,
                    const std::vector<std::vector<double>>& rows,
                    const std::vector<Label>& labels, const CvPlan& plan) {
  require_rectangular(rows, labels);
  if (plan.fold_of.empty() || plan.fold_of[0].size() != rows.size())
    throw std::invalid_argument("cv plan does not match the dataset");

  EvalReport report;
  report.family = family;
  report.params = hp;

  Moments acc, auc, prec, rec, f1;
  std::vector<double> pooled_scores;
  std::vector<Label> pooled_labels;
  std::vector<std::vector<RocPoint>> fold_rocs;
  double infer_ns = 0.0;
  long infer_count = 0;

  for (int rep = 0; rep < plan.repeats; ++rep) {
    for (int fold = 0; fold < plan.k; ++fold) {
      std::vector<std::vector<double>> train_rows;
      std::vector<Label> train_labels;
      std::vector<std::size_t> test_idx;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (plan.fold_of[std::size_t(rep)][i] == fold) {
          test_idx.push_back(i);
        } else {
          train_rows.push_back(rows[i]);
          train_labels.push_back(labels[i]);
        }
      }
      if (test_idx.empty() || train_rows.empty())
        throw std::invalid_argument("cv plan produced an empty split");

      const auto model = train_model(family, train_rows, train_labels, hp);
      const double cut =
          (family == Family::LOGREG || family == Family::SVM_LINEAR) ? 0.0 : 0.5;

      Confusion cm;
      std::vector<double> fold_scores;
      std::vector<Label> fold_labels;
      for (auto i : test_idx) {
        const auto t0 = std::chrono::steady_clock::now();
        const double s = score(model, rows[i]);
        const auto t1 = std::chrono::steady_clock::now();
        infer_ns += double(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
        ++infer_count;

        const Label got = s >= cut ? Label::TEXT : Label::IMAGE;
        const bool is_text = labels[i] == Label::TEXT;
        if (is_text)
          (got == Label::TEXT ? cm.tp : cm.fn)++;
        else
          (got == Label::TEXT ? cm.fp : cm.tn)++;
        fold_scores.push_back(s);
        fold_labels.push_back(labels[i]);
      }

      const auto ms = compute_metrics(cm, fold_scores, fold_labels);
      acc.add(ms.accuracy);
      auc.add(ms.auc);
      prec.add(ms.precision);
      rec.add(ms.recall);
      f1.add(ms.f1);
      fold_rocs.push_back(ms.roc);
      report.totals.tp += cm.tp;
      report.totals.fp += cm.fp;
      report.totals.tn += cm.tn;
      report.totals.fn += cm.fn;
      pooled_scores.insert(pooled_scores.end(), fold_scores.begin(), fold_scores.end());
      pooled_labels.insert(pooled_labels.end(), fold_labels.begin(), fold_labels.end());
    }
  }

  report.n_folds = long(acc.values.size());
  report.mean_accuracy = acc.mean();
  report.std_accuracy = acc.popstd();
  report.mean_auc = auc.mean();
  report.std_auc = auc.popstd();
  report.mean_precision = prec.mean();
  report.std_precision = prec.popstd();
  report.mean_recall = rec.mean();
  report.std_recall = rec.popstd();
  report.mean_f1 = f1.mean();
  report.std_f1 = f1.popstd();
  report.pooled_roc = roc_curve(pooled_scores, pooled_labels);
  report.pooled_auc = roc_auc(report.pooled_roc);

  report.mean_roc.reserve(102);
  report.mean_roc.push_back({0.0, 0.0});
  for (int g = 0; g <= 100; ++g) {
    const double fpr = double(g) / 100.0;
    double sum = 0.0;
    for (const auto& rc : fold_rocs) sum += staircase_tpr(rc, fpr);
    report.mean_roc.push_back({fpr, sum / double(fold_rocs.size())});
  }
  report.inference_ms_per_sample = infer_count ? infer_ns / double(infer_count) / 1e6 : 0.0;
  return report;
}

GridSearchResult grid_search(Family family, const std::vector<HyperParams>& grid,
                             const std::vector<std::vector<double>>& rows,
                             const std::vector<Label>& labels, const CvPlan& plan) {
  if (grid.empty()) throw std::invalid_argument("empty hyper-parameter grid");
  GridSearchResult result;
  for (const auto& hp : grid)
    result.mean_accuracy.push_back(evaluate(family, hp, rows, labels, plan).mean_accuracy);
  result.best_index = std::size_t(
      std::max_element(result.mean_accuracy.begin(), result.mean_accuracy.end()) -
      result.mean_accuracy.begin());
  return result;
}

std::pair<std::vector<std::vector<double>>, std::vector<Label>> to_matrix(const GazeDataset& ds) {
  std::vector<std::vector<double>> rows;
  std::vector<Label> labels;
  for (const auto& r : ds.rows) {
    if (!r.label) throw std::invalid_argument("dataset row carries no label");
    rows.emplace_back(r.values.begin(), r.values.end());
    labels.push_back(*r.label);
  }
  return {std::move(rows), std::move(labels)};
}

namespace {

json labels_to_json(const std::vector<Label>& labels) {
  json arr = json::array();
  for (auto l : labels) arr.push_back(label_name(l));
  return arr;
}

std::vector<Label> labels_from_json(const json& arr) {
  std::vector<Label> out;
  for (const auto& v : arr) out.push_back(label_from(v.get<std::string>()));
  return out;
}

json trees_to_json(const std::vector<Tree>& trees) {
  json arr = json::array();
  for (const auto& tree : trees) {
    json nodes = json::array();
    for (const auto& nd : tree.nodes)
      nodes.push_back(json::array(
          {nd.feature, nd.threshold, nd.left, nd.right, nd.count_text, nd.count_image}));
    arr.push_back(std::move(nodes));
  }
  return arr;
}

std::vector<Tree> trees_from_json(const json& arr) {
  std::vector<Tree> trees;
  for (const auto& jt : arr) {
    Tree tree;
    for (const auto& jn : jt) {
      TreeNode nd;
      nd.feature = jn.at(0).get<int>();
      nd.threshold = jn.at(1).get<double>();
      nd.left = jn.at(2).get<int>();
      nd.right = jn.at(3).get<int>();
      nd.count_text = jn.at(4).get<long>();
      nd.count_image = jn.at(5).get<long>();
      tree.nodes.push_back(nd);
    }
    trees.push_back(std::move(tree));
  }
  return trees;
}

}  // namespace

std::string model_to_json(const TrainedModel& model) {
  json j;
  j["family"] = family_name(model.family);
  j["scaler"] = {{"means", model.scaler.means}, {"stds", model.scaler.stds}};
  switch (model.family) {
    case Family::KNN:
      j["k"] = model.k;
      j["rows"] = model.train_rows;
      j["labels"] = labels_to_json(model.train_labels);
      break;
    case Family::GNB:
      j["prior_text"] = model.prior_text;
      j["prior_image"] = model.prior_image;
      j["mean_text"] = model.gnb_mean_text;
      j["mean_image"] = model.gnb_mean_image;
      j["var_text"] = model.gnb_var_text;
      j["var_image"] = model.gnb_var_image;
      break;
    case Family::LOGREG:
    case Family::SVM_LINEAR:
      j["w"] = model.w;
      j["b"] = model.b;
      j["c"] = model.c;
      if (model.family == Family::SVM_LINEAR) j["alpha"] = model.alpha;
      break;
    case Family::RANDOM_FOREST:
      j["seed"] = model.rf_seed;
      j["trees"] = trees_to_json(model.trees);
      break;
  }
  return j.dump(2) + "\n";
}

TrainedModel model_from_json(const std::string& text) {
  const json j = json::parse(text);
  TrainedModel m;
  m.family = family_from(j.at("family").get<std::string>());
  m.scaler.means = j.at("scaler").at("means").get<std::vector<double>>();
  m.scaler.stds = j.at("scaler").at("stds").get<std::vector<double>>();
  switch (m.family) {
    case Family::KNN:
      m.k = j.at("k").get<int>();
      m.train_rows = j.at("rows").get<std::vector<std::vector<double>>>();
      m.train_labels = labels_from_json(j.at("labels"));
      break;
    case Family::GNB:
      m.prior_text = j.at("prior_text").get<double>();
      m.prior_image = j.at("prior_image").get<double>();
      m.gnb_mean_text = j.at("mean_text").get<std::vector<double>>();
      m.gnb_mean_image = j.at("mean_image").get<std::vector<double>>();
      m.gnb_var_text = j.at("var_text").get<std::vector<double>>();
      m.gnb_var_image = j.at("var_image").get<std::vector<double>>();
      break;
    case Family::LOGREG:
    case Family::SVM_LINEAR:
      m.w = j.at("w").get<std::vector<double>>();
      m.b = j.at("b").get<double>();
      m.c = j.at("c").get<double>();
      if (m.family == Family::SVM_LINEAR) m.alpha = j.at("alpha").get<std::vector<double>>();
      break;
    case Family::RANDOM_FOREST:
      m.rf_seed = j.at("seed").get<std::uint64_t>();
      m.trees = trees_from_json(j.at("trees"));
      break;
  }
  return m;
}

void save_model(const TrainedModel& model, const std::string& path) {
  textio::write_text_file(path, model_to_json(model));
}

TrainedModel load_model(const std::string& path) {
  return model_from_json(textio::read_text_file(path));
}

namespace {

json roc_to_json(const std::vector<RocPoint>& roc) {
  json arr = json::array();
  for (const auto& p : roc) arr.push_back(json::array({p.fpr, p.tpr}));
  return arr;
}

}  // namespace

std::string report_to_json(const EvalReport& report, bool include_timing) {
  json j;
  j["family"] = family_name(report.family);
  j["params"] = {{"knn_k", report.params.knn_k},
                 {"c", report.params.c},
                 {"rf_trees", report.params.rf_trees},
                 {"rf_features", report.params.rf_features},
                 {"rf_seed", report.params.rf_seed}};
  j["n_folds"] = report.n_folds;
  j["accuracy"] = {{"mean", report.mean_accuracy}, {"std", report.std_accuracy}};
  j["auc"] = {{"mean", report.mean_auc}, {"std", report.std_auc}};
  j["precision"] = {{"mean", report.mean_precision}, {"std", report.std_precision}};
  j["recall"] = {{"mean", report.mean_recall}, {"std", report.std_recall}};
  j["f1"] = {{"mean", report.mean_f1}, {"std", report.std_f1}};
  j["confusion"] = {{"tp", report.totals.tp},
                    {"fp", report.totals.fp},
                    {"tn", report.totals.tn},
                    {"fn", report.totals.fn}};
  j["pooled_roc"] = roc_to_json(report.pooled_roc);
  j["pooled_auc"] = report.pooled_auc;
  j["mean_roc"] = roc_to_json(report.mean_roc);
  j["inference_ms_per_sample"] = include_timing ? report.inference_ms_per_sample : 0.0;
  return j.dump(2) + "\n";
}

void save_report(const EvalReport& report, const std::string& path, bool include_timing) {
  textio::write_text_file(path, report_to_json(report, include_timing));
}

}  // namespace gazeforge
