#include "gridstart/regress.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "gridstart/rng.hpp"
#include "gridstart/textio.hpp"

namespace gridstart {

namespace {
constexpr double kTinyScale = 1e-12;
constexpr double kInfScore = std::numeric_limits<double>::infinity();
}  // namespace

void validate_dataset(const Dataset& data) {
  if (data.rows() < 1) throw std::invalid_argument("dataset: empty");
  if (data.y.rows() != data.x.rows()) throw std::invalid_argument("dataset: X/Y row mismatch");
  if (!data.x.allFinite() || !data.y.allFinite())
    throw std::invalid_argument("dataset: non-finite entries");
  if (static_cast<int>(data.feature_names.size()) != data.features() ||
      static_cast<int>(data.target_names.size()) != data.targets())
    throw std::invalid_argument("dataset: name labels do not match matrix shape");
  std::vector<std::string> all = data.feature_names;
  all.insert(all.end(), data.target_names.begin(), data.target_names.end());
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end())
    throw std::invalid_argument("dataset: duplicate column names");
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& m) {
  Standardizer s;
  s.mean = m.colwise().mean();
  Eigen::MatrixXd centered = m.rowwise() - s.mean.transpose();
  s.scale = (centered.array().square().colwise().mean()).sqrt();
  for (int j = 0; j < s.scale.size(); ++j)
    if (s.scale(j) < kTinyScale) s.scale(j) = 1.0;
  return s;
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& m) const {
  return (m.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Eigen::VectorXd Standardizer::transform_row(const Eigen::VectorXd& v) const {
  return (v - mean).cwiseQuotient(scale);
}

Eigen::VectorXd Standardizer::inverse_row(const Eigen::VectorXd& v) const {
  return v.cwiseProduct(scale) + mean;
}

Eigen::MatrixXd Model::predict_batch(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out;
  for (int i = 0; i < x.rows(); ++i) {
    Eigen::VectorXd p = predict(x.row(i).transpose());
    if (i == 0) out.resize(x.rows(), p.size());
    out.row(i) = p.transpose();
  }
  return out;
}

// ---------------------------------------------------------------- linear

LinearModel fit_linear(const Dataset& data) {
  validate_dataset(data);
  if (data.rows() <= data.features())
    throw std::invalid_argument("fit_linear: need more rows than features");
  LinearModel m;
  m.feature_names = data.feature_names;
  m.target_names = data.target_names;
  m.xs = Standardizer::fit(data.x);
  Eigen::MatrixXd z = m.xs.transform(data.x);
  Eigen::MatrixXd design(z.rows(), z.cols() + 1);
  design << z, Eigen::VectorXd::Ones(z.rows());
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  Eigen::MatrixXd coef;
  if (qr.rank() < design.cols()) {
    m.note = "rank-deficient design, pseudo-inverse solution";
    coef = design.completeOrthogonalDecomposition().solve(data.y);
  } else {
    coef = qr.solve(data.y);
  }
  m.weights = coef.topRows(z.cols()).transpose();
  m.intercepts = coef.row(z.cols()).transpose();
  return m;
}

Eigen::VectorXd LinearModel::predict(const Eigen::VectorXd& x) const {
  return weights * xs.transform_row(x) + intercepts;
}

// ---------------------------------------------------------------- knn

KnnModel fit_knn(const Dataset& data, int k, KnnWeighting weighting) {
  validate_dataset(data);
  if (k < 1 || k > data.rows()) throw std::invalid_argument("fit_knn: k out of range");
  KnnModel m;
  m.feature_names = data.feature_names;
  m.target_names = data.target_names;
  m.k = k;
  m.weighting = weighting;
  m.xs = Standardizer::fit(data.x);
  m.train_x = m.xs.transform(data.x);
  m.train_y = data.y;
  return m;
}

Eigen::VectorXd KnnModel::predict(const Eigen::VectorXd& x) const {
  Eigen::VectorXd q = xs.transform_row(x);
  int n = static_cast<int>(train_x.rows());
  std::vector<std::pair<double, int>> dist(n);
  for (int i = 0; i < n; ++i)
    dist[i] = {(train_x.row(i).transpose() - q).norm(), i};
  std::sort(dist.begin(), dist.end());  // ties fall to the lowest index
  int kk = std::min(k, n);
  if (weighting == KnnWeighting::inverse_distance && dist[0].first < kTinyScale)
    return train_y.row(dist[0].second).transpose();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(train_y.cols());
  double wsum = 0.0;
  for (int i = 0; i < kk; ++i) {
    double w = weighting == KnnWeighting::uniform ? 1.0 : 1.0 / dist[i].first;
    acc += w * train_y.row(dist[i].second).transpose();
    wsum += w;
  }
  return acc / wsum;
}

// ---------------------------------------------------------------- tree

namespace {

double subset_sse(const Eigen::MatrixXd& y, const std::vector<int>& idx) {
  if (idx.empty()) return 0.0;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(y.cols());
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(y.cols());
  for (int i : idx) {
    sum += y.row(i).transpose();
    sq += y.row(i).transpose().cwiseProduct(y.row(i).transpose());
  }
  double n = static_cast<double>(idx.size());
  return (sq - sum.cwiseProduct(sum) / n).sum();
}

struct TreeBuilder {
  const Dataset& data;
  int max_depth;
  int min_leaf;
  std::vector<TreeModel::Node> nodes;

  int build(std::vector<int> idx, int depth) {
    int my = static_cast<int>(nodes.size());
    nodes.emplace_back();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(data.targets());
    for (int i : idx) mean += data.y.row(i).transpose();
    mean /= static_cast<double>(idx.size());
    nodes[my].value = mean;

    bool depth_ok = max_depth < 0 || depth < max_depth;
    if (!depth_ok || static_cast<int>(idx.size()) < 2 * min_leaf) return my;

    double parent_sse = subset_sse(data.y, idx);
    double best_gain = 1e-12;
    int best_f = -1;
    double best_thr = 0.0;

    for (int f = 0; f < data.features(); ++f) {
      std::vector<int> order = idx;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (data.x(a, f) != data.x(b, f)) return data.x(a, f) < data.x(b, f);
        return a < b;
      });
      int n = static_cast<int>(order.size());
      Eigen::MatrixXd pre_sum(n + 1, data.targets());
      Eigen::MatrixXd pre_sq(n + 1, data.targets());
      pre_sum.row(0).setZero();
      pre_sq.row(0).setZero();
      for (int i = 0; i < n; ++i) {
        pre_sum.row(i + 1) = pre_sum.row(i) + data.y.row(order[i]);
        pre_sq.row(i + 1) = pre_sq.row(i) + data.y.row(order[i]).cwiseProduct(data.y.row(order[i]));
      }
      for (int cut = min_leaf; cut <= n - min_leaf; ++cut) {
        double a = data.x(order[cut - 1], f);
        double b = data.x(order[cut], f);
        if (a == b) continue;
        double nl = cut, nr = n - cut;
        Eigen::RowVectorXd sl = pre_sum.row(cut);
        Eigen::RowVectorXd sr = pre_sum.row(n) - sl;
        Eigen::RowVectorXd ql = pre_sq.row(cut);
        Eigen::RowVectorXd qr = pre_sq.row(n) - ql;
        double sse = (ql - sl.cwiseProduct(sl) / nl).sum() + (qr - sr.cwiseProduct(sr) / nr).sum();
        double gain = parent_sse - sse;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = f;
          best_thr = (a + b) / 2.0;
        }
      }
    }

    if (best_f < 0) return my;

    std::vector<int> li, ri;
    for (int i : idx) (data.x(i, best_f) <= best_thr ? li : ri).push_back(i);
    nodes[my].leaf = false;
    nodes[my].feature = best_f;
    nodes[my].threshold = best_thr;
    nodes[my].left = build(std::move(li), depth + 1);
    nodes[my].right = build(std::move(ri), depth + 1);
    return my;
  }
};

}  // namespace

TreeModel fit_tree(const Dataset& data, int max_depth, int min_samples_leaf) {
  validate_dataset(data);
  if (min_samples_leaf < 1) throw std::invalid_argument("fit_tree: min_samples_leaf < 1");
  if (data.rows() < 2 * min_samples_leaf)
    throw std::invalid_argument("fit_tree: too few rows for min_samples_leaf");
  TreeModel m;
  m.feature_names = data.feature_names;
  m.target_names = data.target_names;
  m.max_depth = max_depth;
  m.min_samples_leaf = min_samples_leaf;
  TreeBuilder tb{data, max_depth, min_samples_leaf, {}};
  std::vector<int> all(data.rows());
  std::iota(all.begin(), all.end(), 0);
  tb.build(std::move(all), 0);
  m.nodes = std::move(tb.nodes);
  return m;
}

Eigen::VectorXd TreeModel::predict(const Eigen::VectorXd& x) const {
  int at = 0;
  while (!nodes[at].leaf)
    at = x(nodes[at].feature) <= nodes[at].threshold ? nodes[at].left : nodes[at].right;
  return nodes[at].value;
}

// ---------------------------------------------------------------- svr

namespace {

constexpr double kKktTol = 1e-3;
constexpr int kSmoCap = 200000;

// SMO on the beta = alpha - alpha* form: maximize
//   -1/2 b'Kb + b'y - eps*sum|b|  subject to sum b = 0, |b_i| <= C.
// Each i restricts the admissible bias to an interval; the pair with the
// widest interval gap is updated along the sum-preserving direction.
struct SmoResult {
  Eigen::VectorXd beta;
  double bias = 0.0;
  double violation = 0.0;
  int iterations = 0;
};

SmoResult smo_fit(const Eigen::MatrixXd& kmat, const Eigen::VectorXd& y, double c, double eps) {
  int n = static_cast<int>(y.size());
  SmoResult r;
  r.beta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = y;  // g_i = y_i - (K beta)_i

  // Admissible bias interval per point, from the KKT conditions at beta_i:
  //   at upper box C:        b <= G_i - eps
  //   positive interior:     b  = G_i - eps
  //   at zero:               G_i - eps <= b <= G_i + eps
  //   negative interior:     b  = G_i + eps
  //   at lower box -C:       b >= G_i + eps
  double box_tol = 1e-9 * std::max(1.0, c);
  auto interval = [&](int i, double& lo, double& hi) {
    double bi = r.beta(i);
    if (bi >= c - box_tol) {
      lo = -kInfScore;
      hi = g(i) - eps;
    } else if (bi > kTinyScale) {
      lo = hi = g(i) - eps;
    } else if (bi >= -kTinyScale) {
      lo = g(i) - eps;
      hi = g(i) + eps;
    } else if (bi > -c + box_tol) {
      lo = hi = g(i) + eps;
    } else {
      lo = g(i) + eps;
      hi = kInfScore;
    }
  };

  while (r.iterations < kSmoCap) {
    int imax = -1, imin = -1;
    double lomax = -kInfScore, himin = kInfScore;
    for (int i = 0; i < n; ++i) {
      double lo, hi;
      interval(i, lo, hi);
      if (lo > lomax) { lomax = lo; imax = i; }
      if (hi < himin) { himin = hi; imin = i; }
    }
    r.violation = lomax - himin;
    r.bias = (std::isfinite(lomax) && std::isfinite(himin)) ? (lomax + himin) / 2.0
             : std::isfinite(lomax)                         ? lomax
             : std::isfinite(himin)                         ? himin
                                                            : 0.0;
    if (r.violation < kKktTol || imax < 0 || imin < 0 || imax == imin) break;

    int i = imax, j = imin;
    double eta = kmat(i, i) + kmat(j, j) - 2.0 * kmat(i, j);
    double dmax = std::min(c - r.beta(i), r.beta(j) + c);
    if (dmax <= 0.0) break;

    // Piecewise-quadratic line search over delta in (0, dmax]: the epsilon
    // term kinks where beta_i or beta_j crosses zero.
    std::vector<double> cuts{dmax};
    if (r.beta(i) < 0.0 && -r.beta(i) < dmax) cuts.push_back(-r.beta(i));
    if (r.beta(j) > 0.0 && r.beta(j) < dmax) cuts.push_back(r.beta(j));
    std::sort(cuts.begin(), cuts.end());
    double best = 0.0;
    double start = 0.0;
    for (double end : cuts) {
      if (end <= start) continue;
      double mid = (start + end) / 2.0;
      double si = (r.beta(i) + mid) >= 0.0 ? 1.0 : -1.0;
      double sj = (r.beta(j) - mid) >= 0.0 ? 1.0 : -1.0;
      double slope0 = g(i) - g(j) - eta * start - eps * si + eps * sj;
      if (slope0 <= 0.0) break;
      double take = end;
      if (eta > kTinyScale) {
        double root = start + slope0 / eta;
        if (root < end) take = root;
      }
      best = take;
      if (take < end) break;
      start = end;
    }
    if (best <= 0.0) break;

    r.beta(i) += best;
    r.beta(j) -= best;
    g -= kmat.col(i) * best;
    g += kmat.col(j) * best;
    ++r.iterations;
  }
  return r;
}

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma) {
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.rows(); ++j)
      k(i, j) = std::exp(-gamma * (a.row(i) - b.row(j)).squaredNorm());
  return k;
}

}  // namespace

SvrModel fit_svr(const Dataset& data, double c, double epsilon, double gamma) {
  validate_dataset(data);
  if (c <= 0.0 || epsilon < 0.0 || gamma <= 0.0)
    throw std::invalid_argument("fit_svr: require C > 0, epsilon >= 0, gamma > 0");
  SvrModel m;
  m.feature_names = data.feature_names;
  m.target_names = data.target_names;
  m.c = c;
  m.epsilon = epsilon;
  m.gamma = gamma;
  m.xs = Standardizer::fit(data.x);
  m.ys = Standardizer::fit(data.y);
  Eigen::MatrixXd z = m.xs.transform(data.x);
  Eigen::MatrixXd yz = m.ys.transform(data.y);
  Eigen::MatrixXd kmat = rbf_kernel(z, z, gamma);

  for (int t = 0; t < data.targets(); ++t) {
    SmoResult sr = smo_fit(kmat, yz.col(t), c, epsilon);
    SvrModel::TargetFit tf;
    tf.bias = sr.bias;
    tf.kkt_violation = sr.violation;
    tf.iterations = sr.iterations;
    std::vector<int> sv;
    for (int i = 0; i < z.rows(); ++i)
      if (std::abs(sr.beta(i)) > kTinyScale) sv.push_back(i);
    tf.sv_x.resize(sv.size(), z.cols());
    tf.beta.resize(sv.size());
    for (size_t i = 0; i < sv.size(); ++i) {
      tf.sv_x.row(i) = z.row(sv[i]);
      tf.beta(i) = sr.beta(sv[i]);
    }
    m.fits.push_back(std::move(tf));
  }
  return m;
}

Eigen::VectorXd SvrModel::predict(const Eigen::VectorXd& x) const {
  Eigen::VectorXd q = xs.transform_row(x);
  Eigen::VectorXd out(fits.size());
  for (size_t t = 0; t < fits.size(); ++t) {
    const TargetFit& tf = fits[t];
    double acc = tf.bias;
    for (int i = 0; i < tf.beta.size(); ++i)
      acc += tf.beta(i) * std::exp(-gamma * (tf.sv_x.row(i).transpose() - q).squaredNorm());
    out(t) = acc;
  }
  return ys.inverse_row(out);
}

// ---------------------------------------------------------------- mlp

namespace {

Eigen::VectorXd mlp_forward(const MlpModel::Net& net, const Eigen::MatrixXd& xs) {
  Eigen::MatrixXd pre = (xs * net.w1.transpose()).rowwise() + net.b1.transpose();
  Eigen::MatrixXd h = pre.array().tanh();
  return (h * net.w2).array() + net.b2;
}

}  // namespace

double mlp_loss(const MlpModel::Net& net, const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys) {
  Eigen::VectorXd out = mlp_forward(net, xs);
  return (out - ys).squaredNorm() / static_cast<double>(xs.rows());
}

MlpModel::Net mlp_gradient(const MlpModel::Net& net, const Eigen::MatrixXd& xs,
                           const Eigen::VectorXd& ys) {
  double n = static_cast<double>(xs.rows());
  Eigen::MatrixXd pre = (xs * net.w1.transpose()).rowwise() + net.b1.transpose();
  Eigen::MatrixXd h = pre.array().tanh();
  Eigen::VectorXd out = (h * net.w2).array() + net.b2;
  Eigen::VectorXd dout = 2.0 * (out - ys) / n;
  MlpModel::Net g;
  g.w2 = h.transpose() * dout;
  g.b2 = dout.sum();
  Eigen::MatrixXd dh = dout * net.w2.transpose();            // n x hidden
  Eigen::MatrixXd dz = dh.array() * (1.0 - h.array().square());
  g.w1 = dz.transpose() * xs;
  g.b1 = dz.colwise().sum().transpose();
  return g;
}

MlpModel fit_mlp(const Dataset& data, int hidden, double learning_rate, int epochs,
                 std::uint64_t seed) {
  validate_dataset(data);
  if (hidden < 1 || learning_rate <= 0.0 || epochs < 0)
    throw std::invalid_argument("fit_mlp: bad hyperparameters");
  MlpModel m;
  m.feature_names = data.feature_names;
  m.target_names = data.target_names;
  m.hidden = hidden;
  m.learning_rate = learning_rate;
  m.epochs = epochs;
  m.seed = seed;
  m.xs = Standardizer::fit(data.x);
  m.ys = Standardizer::fit(data.y);
  Eigen::MatrixXd z = m.xs.transform(data.x);
  Eigen::MatrixXd yz = m.ys.transform(data.y);

  double init = 1.0 / std::sqrt(static_cast<double>(data.features()));
  for (int t = 0; t < data.targets(); ++t) {
    Rng rng(seed + 0x9e3779b9u * static_cast<std::uint64_t>(t + 1));
    MlpModel::Net net;
    net.w1.resize(hidden, data.features());
    for (int i = 0; i < hidden; ++i)
      for (int j = 0; j < data.features(); ++j) net.w1(i, j) = rng.uniform(-init, init);
    net.b1 = Eigen::VectorXd::Zero(hidden);
    net.w2 = Eigen::VectorXd::Zero(hidden);  // bias-only start: predicts the target mean
    net.b2 = 0.0;

    double lr = learning_rate;
    double loss = mlp_loss(net, z, yz.col(t));
    for (int e = 0; e < epochs && lr > 1e-14; ++e) {
      MlpModel::Net g = mlp_gradient(net, z, yz.col(t));
      MlpModel::Net cand = net;
      cand.w1 -= lr * g.w1;
      cand.b1 -= lr * g.b1;
      cand.w2 -= lr * g.w2;
      cand.b2 -= lr * g.b2;
      double cl = mlp_loss(cand, z, yz.col(t));
      if (cl > loss) {
        lr *= 0.5;  // reject the step so the loss stays non-increasing
      } else {
        net = cand;
        loss = cl;
      }
      if (loss > 1e6) throw std::runtime_error("fit_mlp: training diverged (loss > 1e6)");
    }
    m.nets.push_back(std::move(net));
  }
  return m;
}

Eigen::VectorXd MlpModel::predict(const Eigen::VectorXd& x) const {
  Eigen::VectorXd q = xs.transform_row(x);
  Eigen::VectorXd out(nets.size());
  for (size_t t = 0; t < nets.size(); ++t) {
    const Net& net = nets[t];
    Eigen::VectorXd h = ((net.w1 * q) + net.b1).array().tanh();
    out(t) = net.w2.dot(h) + net.b2;
  }
  return ys.inverse_row(out);
}

// ---------------------------------------------------------------- scoring

double r2_score(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
  if (y_true.size() < 2) throw std::invalid_argument("r2_score: need at least 2 points");
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("r2_score: length mismatch");
  double mean = y_true.mean();
  double ss_tot = (y_true.array() - mean).square().sum();
  if (ss_tot < kTinyScale) throw std::invalid_argument("r2_score: constant y_true");
  double ss_res = (y_true - y_pred).squaredNorm();
  return 100.0 * (1.0 - ss_res / ss_tot);
}

// ---------------------------------------------------------------- save/load

namespace {

void write_vector(std::ostringstream& os, const std::string& tag, const Eigen::VectorXd& v) {
  os << tag;
  for (int i = 0; i < v.size(); ++i) os << " " << format_double(v(i));
  os << "\n";
}

void write_names(std::ostringstream& os, const std::string& tag,
                 const std::vector<std::string>& names) {
  os << tag << " " << names.size();
  for (const auto& n : names) os << " " << n;
  os << "\n";
}

void write_header(std::ostringstream& os, const Model& m) {
  os << "gridstart-model v1\n";
  os << "family " << m.family() << "\n";
  write_names(os, "features", m.feature_names);
  write_names(os, "targets", m.target_names);
}

struct TokenReader {
  std::vector<std::vector<std::string>> lines;
  size_t pos = 0;

  explicit TokenReader(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      auto t = trim(line);
      if (t.empty()) continue;
      std::vector<std::string> toks;
      std::istringstream ls{std::string(t)};
      std::string tok;
      while (ls >> tok) toks.push_back(tok);
      lines.push_back(std::move(toks));
    }
  }

  const std::vector<std::string>& next(const std::string& expect_tag = "") {
    if (pos >= lines.size()) throw std::runtime_error("model file: unexpected end");
    const auto& l = lines[pos++];
    if (!expect_tag.empty() && l[0] != expect_tag)
      throw std::runtime_error("model file: expected '" + expect_tag + "', got '" + l[0] + "'");
    return l;
  }

  Eigen::VectorXd vec(const std::string& tag) {
    const auto& l = next(tag);
    Eigen::VectorXd v(l.size() - 1);
    for (size_t i = 1; i < l.size(); ++i) v(i - 1) = parse_double(l[i], tag);
    return v;
  }

  std::vector<std::string> names(const std::string& tag) {
    const auto& l = next(tag);
    int n = parse_int(l[1], tag);
    if (static_cast<int>(l.size()) != n + 2) throw std::runtime_error("model file: bad name list");
    return std::vector<std::string>(l.begin() + 2, l.end());
  }
};

}  // namespace

std::string LinearModel::save_text() const {
  std::ostringstream os;
  write_header(os, *this);
  write_vector(os, "xmean", xs.mean);
  write_vector(os, "xscale", xs.scale);
  os << "weights " << weights.rows() << " " << weights.cols() << "\n";
  for (int t = 0; t < weights.rows(); ++t) {
    os << " ";
    for (int j = 0; j < weights.cols(); ++j) os << " " << format_double(weights(t, j));
    os << "\n";
  }
  write_vector(os, "intercepts", intercepts);
  if (!note.empty()) os << "note " << note << "\n";
  os << "end\n";
  return os.str();
}

std::string KnnModel::save_text() const {
  std::ostringstream os;
  write_header(os, *this);
  os << "k " << k << "\n";
  os << "weighting " << (weighting == KnnWeighting::uniform ? "uniform" : "inverse_distance")
     << "\n";
  write_vector(os, "xmean", xs.mean);
  write_vector(os, "xscale", xs.scale);
  os << "data " << train_x.rows() << " " << train_x.cols() << " " << train_y.cols() << "\n";
  for (int i = 0; i < train_x.rows(); ++i) {
    os << " ";
    for (int j = 0; j < train_x.cols(); ++j) os << " " << format_double(train_x(i, j));
    for (int j = 0; j < train_y.cols(); ++j) os << " " << format_double(train_y(i, j));
    os << "\n";
  }
  os << "end\n";
  return os.str();
}

std::string TreeModel::save_text() const {
  std::ostringstream os;
  write_header(os, *this);
  os << "max_depth " << max_depth << "\n";
  os << "min_samples_leaf " << min_samples_leaf << "\n";
  os << "nodes " << nodes.size() << "\n";
  for (const auto& nd : nodes) {
    if (nd.leaf) {
      os << "leaf";
      for (int j = 0; j < nd.value.size(); ++j) os << " " << format_double(nd.value(j));
      os << "\n";
    } else {
      os << "split " << nd.feature << " " << format_double(nd.threshold) << " " << nd.left << " "
         << nd.right << "\n";
    }
  }
  os << "end\n";
  return os.str();
}

std::string SvrModel::save_text() const {
  std::ostringstream os;
  write_header(os, *this);
  os << "c " << format_double(c) << "\n";
  os << "epsilon " << format_double(epsilon) << "\n";
  os << "gamma " << format_double(gamma) << "\n";
  write_vector(os, "xmean", xs.mean);
  write_vector(os, "xscale", xs.scale);
  write_vector(os, "ymean", ys.mean);
  write_vector(os, "yscale", ys.scale);
  for (size_t t = 0; t < fits.size(); ++t) {
    const TargetFit& tf = fits[t];
    os << "target " << t << " " << format_double(tf.bias) << " " << format_double(tf.kkt_violation)
       << " " << tf.iterations << " " << tf.beta.size() << "\n";
    for (int i = 0; i < tf.beta.size(); ++i) {
      os << "  " << format_double(tf.beta(i));
      for (int j = 0; j < tf.sv_x.cols(); ++j) os << " " << format_double(tf.sv_x(i, j));
      os << "\n";
    }
  }
  os << "end\n";
  return os.str();
}

std::string MlpModel::save_text() const {
  std::ostringstream os;
  write_header(os, *this);
  os << "hidden " << hidden << "\n";
  os << "learning_rate " << format_double(learning_rate) << "\n";
  os << "epochs " << epochs << "\n";
  os << "seed " << seed << "\n";
  write_vector(os, "xmean", xs.mean);
  write_vector(os, "xscale", xs.scale);
  write_vector(os, "ymean", ys.mean);
  write_vector(os, "yscale", ys.scale);
  for (size_t t = 0; t < nets.size(); ++t) {
    const Net& net = nets[t];
    os << "net " << t << "\n";
    for (int i = 0; i < net.w1.rows(); ++i) {
      os << " ";
      for (int j = 0; j < net.w1.cols(); ++j) os << " " << format_double(net.w1(i, j));
      os << "\n";
    }
    write_vector(os, "b1", net.b1);
    write_vector(os, "w2", net.w2);
    os << "b2 " << format_double(net.b2) << "\n";
  }
  os << "end\n";
  return os.str();
}

std::unique_ptr<Model> load_model_text(const std::string& text) {
  TokenReader tr(text);
  const auto& head = tr.next("gridstart-model");
  if (head.size() < 2 || head[1] != "v1") throw std::runtime_error("model file: unknown version");
  std::string family = tr.next("family").at(1);
  auto features = tr.names("features");
  auto targets = tr.names("targets");
  int d = static_cast<int>(features.size());
  int t = static_cast<int>(targets.size());

  std::unique_ptr<Model> out;
  if (family == "lr") {
    auto m = std::make_unique<LinearModel>();
    m->xs.mean = tr.vec("xmean");
    m->xs.scale = tr.vec("xscale");
    const auto& wl = tr.next("weights");
    int rows = parse_int(wl[1], "weights"), cols = parse_int(wl[2], "weights");
    m->weights.resize(rows, cols);
    for (int i = 0; i < rows; ++i) {
      const auto& l = tr.next();
      for (int j = 0; j < cols; ++j) m->weights(i, j) = parse_double(l[j], "weights");
    }
    m->intercepts = tr.vec("intercepts");
    if (tr.pos < tr.lines.size() && tr.lines[tr.pos][0] == "note") {
      const auto& l = tr.next("note");
      for (size_t i = 1; i < l.size(); ++i) m->note += (i > 1 ? " " : "") + l[i];
    }
    out = std::move(m);
  } else if (family == "knn") {
    auto m = std::make_unique<KnnModel>();
    m->k = parse_int(tr.next("k").at(1), "k");
    std::string w = tr.next("weighting").at(1);
    m->weighting = w == "uniform" ? KnnWeighting::uniform : KnnWeighting::inverse_distance;
    m->xs.mean = tr.vec("xmean");
    m->xs.scale = tr.vec("xscale");
    const auto& dl = tr.next("data");
    int n = parse_int(dl[1], "data");
    m->train_x.resize(n, d);
    m->train_y.resize(n, t);
    for (int i = 0; i < n; ++i) {
      const auto& l = tr.next();
      for (int j = 0; j < d; ++j) m->train_x(i, j) = parse_double(l[j], "data");
      for (int j = 0; j < t; ++j) m->train_y(i, j) = parse_double(l[d + j], "data");
    }
    out = std::move(m);
  } else if (family == "dtr") {
    auto m = std::make_unique<TreeModel>();
    m->max_depth = parse_int(tr.next("max_depth").at(1), "max_depth");
    m->min_samples_leaf = parse_int(tr.next("min_samples_leaf").at(1), "min_samples_leaf");
    int count = parse_int(tr.next("nodes").at(1), "nodes");
    for (int i = 0; i < count; ++i) {
      const auto& l = tr.next();
      TreeModel::Node nd;
      if (l[0] == "leaf") {
        nd.value.resize(l.size() - 1);
        for (size_t j = 1; j < l.size(); ++j) nd.value(j - 1) = parse_double(l[j], "leaf");
      } else if (l[0] == "split") {
        nd.leaf = false;
        nd.feature = parse_int(l[1], "split");
        nd.threshold = parse_double(l[2], "split");
        nd.left = parse_int(l[3], "split");
        nd.right = parse_int(l[4], "split");
      } else {
        throw std::runtime_error("model file: bad tree node");
      }
      m->nodes.push_back(std::move(nd));
    }
    out = std::move(m);
  } else if (family == "svm") {
    auto m = std::make_unique<SvrModel>();
    m->c = parse_double(tr.next("c").at(1), "c");
    m->epsilon = parse_double(tr.next("epsilon").at(1), "epsilon");
    m->gamma = parse_double(tr.next("gamma").at(1), "gamma");
    m->xs.mean = tr.vec("xmean");
    m->xs.scale = tr.vec("xscale");
    m->ys.mean = tr.vec("ymean");
    m->ys.scale = tr.vec("yscale");
    for (int ti = 0; ti < t; ++ti) {
      const auto& l = tr.next("target");
      SvrModel::TargetFit tf;
      tf.bias = parse_double(l[2], "target");
      tf.kkt_violation = parse_double(l[3], "target");
      tf.iterations = parse_int(l[4], "target");
      int nsv = parse_int(l[5], "target");
      tf.beta.resize(nsv);
      tf.sv_x.resize(nsv, d);
      for (int i = 0; i < nsv; ++i) {
        const auto& r = tr.next();
        tf.beta(i) = parse_double(r[0], "sv");
        for (int j = 0; j < d; ++j) tf.sv_x(i, j) = parse_double(r[1 + j], "sv");
      }
      m->fits.push_back(std::move(tf));
    }
    out = std::move(m);
  } else if (family == "nn") {
    auto m = std::make_unique<MlpModel>();
    m->hidden = parse_int(tr.next("hidden").at(1), "hidden");
    m->learning_rate = parse_double(tr.next("learning_rate").at(1), "learning_rate");
    m->epochs = parse_int(tr.next("epochs").at(1), "epochs");
    m->seed = static_cast<std::uint64_t>(std::stoull(tr.next("seed").at(1)));
    m->xs.mean = tr.vec("xmean");
    m->xs.scale = tr.vec("xscale");
    m->ys.mean = tr.vec("ymean");
    m->ys.scale = tr.vec("yscale");
    for (int ti = 0; ti < t; ++ti) {
      tr.next("net");
      MlpModel::Net net;
      net.w1.resize(m->hidden, d);
      for (int i = 0; i < m->hidden; ++i) {
        const auto& l = tr.next();
        for (int j = 0; j < d; ++j) net.w1(i, j) = parse_double(l[j], "w1");
      }
      net.b1 = tr.vec("b1");
      net.w2 = tr.vec("w2");
      net.b2 = parse_double(tr.next("b2").at(1), "b2");
      m->nets.push_back(std::move(net));
    }
    out = std::move(m);
  } else {
    throw std::runtime_error("model file: unknown family '" + family + "'");
  }
  tr.next("end");
  out->feature_names = features;
  out->target_names = targets;
  return out;
}

void save_model(const Model& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << model.save_text();
}

std::unique_ptr<Model> load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return load_model_text(ss.str());
}

// ---------------------------------------------------------------- grid search

GridSearchSpec default_grid(const std::string& family, std::uint64_t seed) {
  GridSearchSpec spec;
  spec.family = family;
  spec.seed = seed;
  if (family == "lr") {
    // no hyperparameters
  } else if (family == "knn") {
    GridAxis k{"k", {}};
    for (int i = 1; i <= 15; ++i) k.values.push_back(i);
    spec.axes.push_back(k);
    spec.axes.push_back({"weighting", {0.0, 1.0}});  // 0 uniform, 1 inverse-distance
  } else if (family == "dtr") {
    spec.axes.push_back({"max_depth", {2, 4, 6, 8, 12, -1}});  // -1: unlimited
  } else if (family == "svm") {
    spec.axes.push_back({"c", {1, 10, 100}});
    spec.axes.push_back({"gamma", {0.1, 1, 10}});
    spec.axes.push_back({"epsilon", {0.001, 0.01}});
  } else if (family == "nn") {
    spec.axes.push_back({"hidden", {8, 32}});
    spec.axes.push_back({"learning_rate", {0.01, 0.001}});
  } else {
    throw std::invalid_argument("unknown estimator family: " + family);
  }
  return spec;
}

std::unique_ptr<Model> fit_family(const std::string& family, const Dataset& data,
                                  const ParamMap& params) {
  auto get = [&](const std::string& name, double def) {
    auto it = params.find(name);
    return it == params.end() ? def : it->second;
  };
  if (family == "lr") {
    return std::make_unique<LinearModel>(fit_linear(data));
  } else if (family == "knn") {
    int k = static_cast<int>(get("k", 5));
    KnnWeighting w = get("weighting", 0) < 0.5 ? KnnWeighting::uniform
                                               : KnnWeighting::inverse_distance;
    return std::make_unique<KnnModel>(fit_knn(data, k, w));
  } else if (family == "dtr") {
    return std::make_unique<TreeModel>(fit_tree(data, static_cast<int>(get("max_depth", -1)),
                                                static_cast<int>(get("min_samples_leaf", 1))));
  } else if (family == "svm") {
    return std::make_unique<SvrModel>(
        fit_svr(data, get("c", 1.0), get("epsilon", 0.01), get("gamma", 1.0)));
  } else if (family == "nn") {
    return std::make_unique<MlpModel>(fit_mlp(
        data, static_cast<int>(get("hidden", 8)), get("learning_rate", 0.01),
        static_cast<int>(get("epochs", 4000)), static_cast<std::uint64_t>(get("seed", 0))));
  }
  throw std::invalid_argument("unknown estimator family: " + family);
}

namespace {

Dataset subset_rows(const Dataset& data, const std::vector<int>& idx) {
  Dataset out;
  out.feature_names = data.feature_names;
  out.target_names = data.target_names;
  out.x.resize(idx.size(), data.features());
  out.y.resize(idx.size(), data.targets());
  for (size_t i = 0; i < idx.size(); ++i) {
    out.x.row(i) = data.x.row(idx[i]);
    out.y.row(i) = data.y.row(idx[i]);
  }
  return out;
}

}  // namespace

GridSearchResult grid_search(const GridSearchSpec& spec, const Dataset& data) {
  validate_dataset(data);
  if (spec.folds < 2) throw std::invalid_argument("grid_search: folds must be at least 2");
  if (spec.folds > data.rows()) throw std::invalid_argument("grid_search: folds exceed samples");
  for (const auto& ax : spec.axes)
    if (ax.values.empty()) throw std::invalid_argument("grid_search: empty axis " + ax.name);

  // Seeded deterministic fold assignment: shuffle once, then contiguous chunks.
  std::vector<int> order(data.rows());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(order);
  std::vector<std::vector<int>> folds(spec.folds);
  int base = data.rows() / spec.folds, extra = data.rows() % spec.folds;
  int at = 0;
  for (int f = 0; f < spec.folds; ++f) {
    int len = base + (f < extra ? 1 : 0);
    folds[f].assign(order.begin() + at, order.begin() + at + len);
    at += len;
  }

  // Enumerate the cartesian product with the last axis fastest.
  std::vector<ParamMap> combos;
  std::vector<int> odo(spec.axes.size(), 0);
  while (true) {
    ParamMap p;
    for (size_t a = 0; a < spec.axes.size(); ++a) p[spec.axes[a].name] = spec.axes[a].values[odo[a]];
    combos.push_back(p);
    int a = static_cast<int>(spec.axes.size()) - 1;
    while (a >= 0 && ++odo[a] == static_cast<int>(spec.axes[a].values.size())) odo[a--] = 0;
    if (a < 0) break;
  }

  GridSearchResult res;
  res.combos.resize(combos.size());
  for (size_t ci = 0; ci < combos.size(); ++ci) {
    res.combos[ci].params = combos[ci];
    double total = 0.0;
    int scored_folds = 0;
    bool failed = false;
    for (int f = 0; f < spec.folds && !failed; ++f) {
      std::vector<int> tr_idx;
      for (int g = 0; g < spec.folds; ++g)
        if (g != f) tr_idx.insert(tr_idx.end(), folds[g].begin(), folds[g].end());
      Dataset tr = subset_rows(data, tr_idx);
      Dataset va = subset_rows(data, folds[f]);
      try {
        auto model = fit_family(spec.family, tr, combos[ci]);
        Eigen::MatrixXd pred = model->predict_batch(va.x);
        double sum = 0.0;
        int cnt = 0;
        for (int t = 0; t < va.targets(); ++t) {
          Eigen::VectorXd yt = va.y.col(t);
          if ((yt.maxCoeff() - yt.minCoeff()) < kTinyScale) continue;  // constant in this fold
          sum += r2_score(yt, pred.col(t));
          ++cnt;
        }
        if (cnt > 0) {
          total += sum / cnt;
          ++scored_folds;
        }
      } catch (const std::exception&) {
        failed = true;
      }
    }
    res.combos[ci].cv_score =
        (failed || scored_folds == 0) ? -kInfScore : total / scored_folds;
  }

  for (size_t ci = 0; ci < res.combos.size(); ++ci)
    if (res.best_index < 0 || res.combos[ci].cv_score > res.combos[res.best_index].cv_score)
      res.best_index = static_cast<int>(ci);
  return res;
}

}  // namespace gridstart
