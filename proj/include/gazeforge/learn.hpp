#pragma once

// Five classifier families over the 8-feature gaze vectors, plus the
// surrounding machinery: z-score standardization, repeated stratified
// cross-validation, threshold-swept ROC metrics, grid search, and Gini
// feature importance for the forest.  TEXT is the positive class throughout.

#include <cstdint>
#include <string>
#include <vector>

#include "gazeforge/gazefeat.hpp"

namespace gazeforge {

enum class Family { KNN, GNB, LOGREG, SVM_LINEAR, RANDOM_FOREST };

const char* family_name(Family family);
Family family_from(const std::string& name);

struct Standardizer {
  std::vector<double> means;
  std::vector<double> stds;  // zero-variance features carry 1
};

Standardizer standardize_fit(const std::vector<std::vector<double>>& rows);
std::vector<double> standardize_row(const std::vector<double>& row, const Standardizer& s);
std::vector<std::vector<double>> standardize_apply(const std::vector<std::vector<double>>& rows,
                                                   const Standardizer& s);

// One node of a forest tree.  feature < 0 marks a leaf; children index into
// the tree's node vector.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  long count_text = 0;
  long count_image = 0;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct HyperParams {
  int knn_k = 5;
  double c = 1.0;  // SVM_LINEAR / LOGREG regularization
  double tol = 1e-6;
  int max_iter = 0;  // 0 picks the family default
  double gnb_var_floor = 1e-9;
  int rf_trees = 200;
  int rf_features = 2;
  std::uint64_t rf_seed = 1;
};

struct TrainedModel {
  Family family = Family::KNN;
  Standardizer scaler;

  // KNN
  int k = 5;
  std::vector<std::vector<double>> train_rows;  // standardized
  std::vector<Label> train_labels;

  // GNB
  double prior_text = 0.0;
  double prior_image = 0.0;
  std::vector<double> gnb_mean_text, gnb_mean_image;
  std::vector<double> gnb_var_text, gnb_var_image;

  // LOGREG / SVM_LINEAR
  std::vector<double> w;
  double b = 0.0;
  double c = 1.0;
  std::vector<double> alpha;  // SVM dual multipliers, training order

  // RANDOM_FOREST
  std::vector<Tree> trees;
  std::uint64_t rf_seed = 0;
};

TrainedModel train_knn(const std::vector<std::vector<double>>& rows,
                       const std::vector<Label>& labels, int k = 5);
TrainedModel train_gnb(const std::vector<std::vector<double>>& rows,
                       const std::vector<Label>& labels, double var_floor = 1e-9);
TrainedModel train_logreg(const std::vector<std::vector<double>>& rows,
                          const std::vector<Label>& labels, double c = 1.0, double tol = 1e-6,
                          int max_iter = 100);
TrainedModel train_svm_linear(const std::vector<std::vector<double>>& rows,
                              const std::vector<Label>& labels, double c = 1.0,
                              double tol = 1e-6, int max_iter = 100000);
TrainedModel train_random_forest(const std::vector<std::vector<double>>& rows,
                                 const std::vector<Label>& labels, int n_trees = 200,
                                 int max_features = 2, std::uint64_t seed = 1);

TrainedModel train_model(Family family, const std::vector<std::vector<double>>& rows,
                         const std::vector<Label>& labels, const HyperParams& hp = {});

// TEXT-positive score: decision value for SVM/LOGREG, TEXT fraction for KNN,
// TEXT probability for GNB and the forest.
double score(const TrainedModel& model, const std::vector<double>& row);
// P(TEXT); defined for every family except SVM_LINEAR, whose margins are not
// probabilities.
double predict_proba(const TrainedModel& model, const std::vector<double>& row);
// w.z + b for the linear families.
double decision_value(const TrainedModel& model, const std::vector<double>& row);
Label predict(const TrainedModel& model, const std::vector<double>& row);

// Normalized mean impurity decrease per feature; forest models only.
std::vector<double> gini_importance(const TrainedModel& model);

struct CvPlan {
  int k = 10;
  int repeats = 5;
  std::uint64_t seed = 1;
  std::vector<std::vector<int>> fold_of;  // [repeat][row] -> fold id
};

CvPlan make_cv_plan(const std::vector<Label>& labels, int k = 10, int repeats = 5,
                    std::uint64_t seed = 1);

struct Confusion {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  long total() const { return tp + fp + tn + fn; }
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct MetricSet {
  double accuracy = 0.0;
  double precision = 0.0;  // macro over both classes
  double recall = 0.0;
  double f1 = 0.0;
  double tpr = 0.0;  // sensitivity of the TEXT class
  double fpr = 0.0;
  double auc = 0.0;
  std::vector<RocPoint> roc;
};

std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<Label>& labels);
double roc_auc(const std::vector<RocPoint>& roc);
MetricSet compute_metrics(const Confusion& cm, const std::vector<double>& scores,
                          const std::vector<Label>& labels);

struct EvalReport {
  Family family = Family::KNN;
  HyperParams params;
  long n_folds = 0;
  double mean_accuracy = 0, std_accuracy = 0;
  double mean_auc = 0, std_auc = 0;
  double mean_precision = 0, std_precision = 0;
  double mean_recall = 0, std_recall = 0;
  double mean_f1 = 0, std_f1 = 0;
  Confusion totals;
  std::vector<RocPoint> pooled_roc;  // single curve over all held-out scores
  double pooled_auc = 0.0;
  std::vector<RocPoint> mean_roc;  // vertical average of the per-fold curves
  double inference_ms_per_sample = 0.0;
};

EvalReport evaluate(Family family, const HyperParams& hp,
                    const std::vector<std::vector<double>>& rows,
                    const std::vector<Label>& labels, const CvPlan& plan);

struct GridSearchResult {
  std::size_t best_index = 0;
  std::vector<double> mean_accuracy;  // one entry per grid point, grid order
};

GridSearchResult grid_search(Family family, const std::vector<HyperParams>& grid,
                             const std::vector<std::vector<double>>& rows,
                             const std::vector<Label>& labels, const CvPlan& plan);

// Feature matrix + labels out of a dataset; throws on unlabeled rows.
std::pair<std::vector<std::vector<double>>, std::vector<Label>> to_matrix(const GazeDataset& ds);

std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text);
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

// include_timing=false zeroes the wall-clock field so byte-compares of rerun
// reports stay meaningful.
std::string report_to_json(const EvalReport& report, bool include_timing = true);
void save_report(const EvalReport& report, const std::string& path, bool include_timing = true);

}  // namespace gazeforge
