#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace gridstart {

struct Dataset {
  Eigen::MatrixXd x;  // n x d
  Eigen::MatrixXd y;  // n x t
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;

  int rows() const { return static_cast<int>(x.rows()); }
  int features() const { return static_cast<int>(x.cols()); }
  int targets() const { return static_cast<int>(y.cols()); }
};

void validate_dataset(const Dataset& data);

// Zero-mean unit-variance scaling fitted on training data; near-constant
// columns keep scale 1 so transforms stay finite.
struct Standardizer {
  Eigen::VectorXd mean, scale;
  static Standardizer fit(const Eigen::MatrixXd& m);
  Eigen::MatrixXd transform(const Eigen::MatrixXd& m) const;
  Eigen::VectorXd transform_row(const Eigen::VectorXd& v) const;
  Eigen::VectorXd inverse_row(const Eigen::VectorXd& v) const;
};

class Model {
 public:
  virtual ~Model() = default;
  virtual Eigen::VectorXd predict(const Eigen::VectorXd& x) const = 0;
  virtual std::string family() const = 0;
  virtual std::string save_text() const = 0;

  Eigen::MatrixXd predict_batch(const Eigen::MatrixXd& x) const;

  std::vector<std::string> feature_names, target_names;
};

class LinearModel : public Model {
 public:
  Standardizer xs;
  Eigen::MatrixXd weights;     // t x d, on standardized features
  Eigen::VectorXd intercepts;  // t
  std::string note;            // set when the design was rank-deficient

  Eigen::VectorXd predict(const Eigen::VectorXd& x) const override;
  std::string family() const override { return "lr"; }
  std::string save_text() const override;
};

enum class KnnWeighting { uniform, inverse_distance };

class KnnModel : public Model {
 public:
  int k = 1;
  KnnWeighting weighting = KnnWeighting::uniform;
  Standardizer xs;
  Eigen::MatrixXd train_x;  // standardized
  Eigen::MatrixXd train_y;

  Eigen::VectorXd predict(const Eigen::VectorXd& x) const override;
  std::string family() const override { return "knn"; }
  std::string save_text() const override;
};

class TreeModel : public Model {
 public:
  struct Node {
    bool leaf = true;
    int feature = -1;
    double threshold = 0.0;
    int left = -1, right = -1;
    Eigen::VectorXd value;  // leaf mean target vector
  };
  int max_depth = -1;  // -1: unlimited
  int min_samples_leaf = 1;
  std::vector<Node> nodes;  // nodes[0] is the root

  Eigen::VectorXd predict(const Eigen::VectorXd& x) const override;
  std::string family() const override { return "dtr"; }
  std::string save_text() const override;
};

class SvrModel : public Model {
 public:
  struct TargetFit {
    Eigen::MatrixXd sv_x;    // support vectors, standardized
    Eigen::VectorXd beta;    // dual coefficients, |beta| <= C
    double bias = 0.0;
    double kkt_violation = 0.0;  // achieved at the end of training
    int iterations = 0;
  };
  double c = 1.0, epsilon = 0.1, gamma = 1.0;
  Standardizer xs, ys;
  std::vector<TargetFit> fits;  // one per target

  Eigen::VectorXd predict(const Eigen::VectorXd& x) const override;
  std::string family() const override { return "svm"; }
  std::string save_text() const override;
};

class MlpModel : public Model {
 public:
  struct Net {
    Eigen::MatrixXd w1;  // hidden x d
    Eigen::VectorXd b1;  // hidden
    Eigen::VectorXd w2;  // hidden
    double b2 = 0.0;
  };
  int hidden = 8;
  double learning_rate = 0.01;
  int epochs = 0;
  std::uint64_t seed = 0;
  Standardizer xs, ys;
  std::vector<Net> nets;  // one per target

  Eigen::VectorXd predict(const Eigen::VectorXd& x) const override;
  std::string family() const override { return "nn"; }
  std::string save_text() const override;
};

LinearModel fit_linear(const Dataset& data);
KnnModel fit_knn(const Dataset& data, int k, KnnWeighting weighting);
TreeModel fit_tree(const Dataset& data, int max_depth, int min_samples_leaf);
SvrModel fit_svr(const Dataset& data, double c, double epsilon, double gamma);
MlpModel fit_mlp(const Dataset& data, int hidden, double learning_rate, int epochs,
                 std::uint64_t seed);

// Mean squared loss of one per-target net on standardized data, plus its
// gradient; exposed so tests can check backprop against finite differences.
double mlp_loss(const MlpModel::Net& net, const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys);
MlpModel::Net mlp_gradient(const MlpModel::Net& net, const Eigen::MatrixXd& xs,
                           const Eigen::VectorXd& ys);

// 100 * (1 - SS_res / SS_tot); rejects constant y_true.
double r2_score(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred);

std::unique_ptr<Model> load_model_text(const std::string& text);
void save_model(const Model& model, const std::string& path);
std::unique_ptr<Model> load_model(const std::string& path);

using ParamMap = std::map<std::string, double>;

struct GridAxis {
  std::string name;
  std::vector<double> values;
};

struct GridSearchSpec {
  std::string family;  // lr, svm, knn, dtr, nn
  std::vector<GridAxis> axes;
  int folds = 5;
  std::uint64_t seed = 0;
};

struct GridCombo {
  ParamMap params;
  double cv_score = 0.0;  // mean validation R2 across folds, -inf on failure
};

struct GridSearchResult {
  std::vector<GridCombo> combos;  // in grid enumeration order
  int best_index = -1;
};

GridSearchSpec default_grid(const std::string& family, std::uint64_t seed);

std::unique_ptr<Model> fit_family(const std::string& family, const Dataset& data,
                                  const ParamMap& params);

GridSearchResult grid_search(const GridSearchSpec& spec, const Dataset& data);

}  // namespace gridstart
