#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vitality {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Seeds -------------------------------------------------------------------

/// splitmix64 finalizer over (master, stream, index): independent per-task
/// seeds that do not depend on execution order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

// Box-Cox ------------------------------------------------------------------

/// (x^λ − 1)/λ, or ln x when λ is 0, elementwise. Requires x > 0.
template <typename Derived>
VectorXd box_cox_transform(const Eigen::DenseBase<Derived>& x, double lambda) {
  if ((x.derived().array() <= 0.0).any()) throw std::domain_error("Box-Cox input must be positive");
  const auto logx = x.derived().array().template cast<double>().log();
  if (std::abs(lambda) < 1e-12) return logx.matrix();
  return ((lambda * logx).unaryExpr([](double v) { return std::expm1(v); }) / lambda).matrix();
}

/// Profile log-likelihood of λ (up to a constant).
double box_cox_log_likelihood(const VectorXd& x, double lambda);

struct BoxCoxResult {
  VectorXd y;
  double lambda = 1.0;
};

/// λ maximizing the log-likelihood over [−5, 5] by golden-section search
/// (tolerance 1e-6). Throws std::domain_error on non-positive input.
BoxCoxResult box_cox(const VectorXd& x);
BoxCoxResult box_cox(const VectorXd& x, double fixed_lambda);

// OLS ----------------------------------------------------------------------

class RankDeficientError : public std::runtime_error {
 public:
  RankDeficientError(std::vector<std::string> columns);
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

struct Term {
  std::string name;
  double beta = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p = 1.0;
  std::string stars;
};

/// "***", "**", "*" at p below 0.001, 0.01, 0.05.
std::string significance_stars(double p);

struct CvSummary {
  double mean_r2 = std::nan("");
  double sd_r2 = std::nan("");
  std::size_t splits = 0;   // requested
  std::size_t skipped = 0;  // degenerate test sets or rank loss
  std::vector<double> trace;  // per split in index order; NaN when skipped
};

struct RegressionReport {
  std::string model;
  bool available = true;
  std::string note;  // reason when unavailable, or warnings
  std::size_t n = 0;
  std::size_t p = 0;  // predictors, intercept excluded
  Term intercept;
  std::vector<Term> terms;
  double r2 = std::nan("");
  double adj_r2 = std::nan("");
  double sigma2 = std::nan("");
  VectorXd residuals;
  std::optional<CvSummary> cv;
};

/// OLS with an intercept. Columns of X are named by `names`. Requires
/// n > p + 1 and full column rank, otherwise throws (RankDeficientError names
/// the collinear columns).
RegressionReport ols_fit(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& names);

/// Out-of-sample R² using the test-set mean.
double r2_score(const VectorXd& y, const VectorXd& yhat);

// Cross-validation and selection ------------------------------------------

struct CvOptions {
  std::size_t splits = 1000;
  double train_frac = 0.75;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

CvSummary shuffle_split_cv(const MatrixXd& X, const VectorXd& y, const CvOptions& opts);

enum class PenaltyFloor {
  /// The full 3-decade grid.
  None,
  /// Grid truncated below σ̂·sqrt(2 ln p / m) (σ̂ from full-data OLS residuals,
  /// m the subsample size).
  Universal,
};

struct StabilityOptions {
  std::size_t subsamples = 200;
  double threshold = 0.6;
  std::size_t grid = 50;
  double decades = 3.0;
  PenaltyFloor floor = PenaltyFloor::Universal;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

struct StabilityResult {
  VectorXd frequency;                 // per column
  std::vector<std::size_t> selected;  // ascending column index
};

StabilityResult stability_selection(const MatrixXd& X, const VectorXd& y, const StabilityOptions& opts);

/// Lasso path on columns scaled to unit mean square: minimizes
/// ‖y − Xb‖²/(2m) + λ‖b‖₁ for each λ (descending). Returns, per column,
/// whether it was ever nonzero along the path.
std::vector<bool> lasso_path_support(const MatrixXd& X, const VectorXd& y, const std::vector<double>& lambdas);

struct RfeResult {
  std::vector<std::size_t> selected;  // ascending column index
  std::vector<std::size_t> eliminated;  // in elimination order
  std::vector<std::string> log;
};

/// Recursive feature elimination by smallest |standardized β|, ties broken by
/// column name.
RfeResult rfe(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& names, std::size_t keep_k);

/// Pearson correlation of average ranks; nullopt for constant input.
std::optional<double> spearman(const VectorXd& x, const VectorXd& y);
VectorXd average_ranks(const VectorXd& x);

// Design -------------------------------------------------------------------

/// Named columns with missing cells, one row per district.
struct DataTable {
  std::vector<std::int64_t> ids;
  std::map<std::string, std::vector<std::optional<double>>> columns;

  std::size_t rows() const { return ids.size(); }
};

enum class TransformKind { BoxCox, Log, None };

struct ColumnTransform {
  TransformKind kind = TransformKind::BoxCox;
  double shift = 0.0;   // added before transforming
  double lambda = 1.0;  // Box-Cox only
  double mean = 0.0;    // of the transformed values
  double sd = 1.0;      // population sd of the transformed values; 1 when not standardized
};

struct Interaction {
  std::string a, b;
  std::string name() const { return a + "*" + b; }
};

struct DesignSpec {
  std::vector<std::string> columns;
  std::string response = "activity_density";
  std::map<std::string, TransformKind> transforms;  // default BoxCox
  TransformKind response_transform = TransformKind::Log;
  bool standardize = true;
  bool standardize_response = true;
  std::vector<Interaction> interactions;
};

struct DesignMatrix {
  std::vector<std::int64_t> ids;  // ascending
  std::vector<std::string> names;  // columns then interactions
  MatrixXd raw;      // selected columns before transformation
  MatrixXd transformed;  // after shift and transform, before standardization
  MatrixXd X;
  VectorXd y;
  std::vector<ColumnTransform> transforms;  // one per non-interaction column
  ColumnTransform response;
  std::vector<Interaction> interactions;
  std::size_t dropped_rows = 0;
};

/// Complete-case rows, sorted by id. Throws std::invalid_argument for unknown
/// columns and for columns with zero spread.
DesignMatrix build_design(const DataTable& table, const DesignSpec& spec);

/// Fits the shift, transform and (optionally) standardization of one column;
/// `transformed` receives the values before standardization. Throws
/// std::invalid_argument when the transformed values have zero spread.
ColumnTransform fit_column_transform(const std::string& name, const VectorXd& raw, TransformKind kind,
                                     bool standardize, VectorXd& transformed);

/// Applies a fitted column transform to new raw values.
VectorXd apply_transform(const ColumnTransform& t, const VectorXd& raw);

// Model suite --------------------------------------------------------------

struct ModelGroup {
  std::string name;
  std::vector<std::string> columns;
};

/// Land use, Small blocks, Aged buildings, Concentration, Vacuums.
std::vector<ModelGroup> default_groups();

enum class CombineRule { Union, Intersection };

struct SuiteOptions {
  std::vector<ModelGroup> groups = default_groups();
  std::vector<Interaction> interactions{{"third_places", "closeness_highways"},
                                        {"closeness_small_parks", "closeness_highways"}};
  CombineRule combine = CombineRule::Union;
  std::size_t rfe_keep = 5;
  StabilityOptions stability;
  CvOptions cv;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::map<std::string, TransformKind> transforms;
  bool standardize_response = true;
};

struct CombinedSelection {
  std::vector<std::string> stability;
  std::map<std::string, double> frequency;
  std::vector<std::string> rfe;
  std::vector<std::string> chosen;
};

struct SuiteReport {
  std::vector<RegressionReport> models;  // five groups then "Combined"
  CombinedSelection selection;
  std::map<std::string, std::size_t> dropped_rows;  // per model
};

SuiteReport run_model_suite(const DataTable& table, const SuiteOptions& opts);

void write_report_json(const std::filesystem::path& path, const SuiteReport& report, std::uint64_t seed);
/// Reads a report written by write_report_json (residuals and CV traces are
/// not stored). Throws ValidationError when the file is malformed.
SuiteReport read_report_json(const std::filesystem::path& path);
/// Long format: model,term,beta,se,t,p,stars,adj_r2,n,cv_mean_r2,cv_sd_r2.
void write_report_csv(const std::filesystem::path& path, const SuiteReport& report);
/// Table-4 layout: one row per term, one column per model, "β stars" cells,
/// led by Adj R² rows.
void write_table4_csv(const std::filesystem::path& path, const SuiteReport& report);
/// Per-split CV test R² for every model.
void write_cv_trace(const std::filesystem::path& path, const SuiteReport& report);

}  // namespace vitality
