#include "vitality/stats.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "vitality/csv.hpp"
#include "vitality/model.hpp"
#include "vitality/parallel.hpp"

namespace vitality {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double population_variance(const VectorXd& v) {
  if (v.size() == 0) return kNaN;
  return (v.array() - v.mean()).square().mean();
}

MatrixXd select_rows(const MatrixXd& X, const std::vector<Eigen::Index>& rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  return out;
}

VectorXd select_rows(const VectorXd& y, const std::vector<Eigen::Index>& rows) {
  VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(rows[i]);
  return out;
}

MatrixXd select_cols(const MatrixXd& X, const std::vector<std::size_t>& cols) {
  MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(cols[j]));
  return out;
}

std::vector<Eigen::Index> shuffled_indices(Eigen::Index n, std::uint64_t seed) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

// Box-Cox ------------------------------------------------------------------

double box_cox_log_likelihood(const VectorXd& x, double lambda) {
  // Dividing by the geometric mean makes Σ ln x vanish, so the Jacobian term
  // drops out and λ̂ is unchanged.
  const double log_gm = x.array().log().mean();
  const VectorXd scaled = (x.array().log() - log_gm).exp().matrix();
  const double var = population_variance(box_cox_transform(scaled, lambda));
  if (!(var > 0.0)) return -std::numeric_limits<double>::infinity();
  return -0.5 * static_cast<double>(x.size()) * std::log(var);
}

BoxCoxResult box_cox(const VectorXd& x) {
  if ((x.array() <= 0.0).any()) throw std::domain_error("Box-Cox input must be positive");
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = -5.0, b = 5.0;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = box_cox_log_likelihood(x, c), fd = box_cox_log_likelihood(x, d);
  while (b - a > 1e-6) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = box_cox_log_likelihood(x, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = box_cox_log_likelihood(x, d);
    }
  }
  const double lambda = (a + b) / 2.0;
  return {box_cox_transform(x, lambda), lambda};
}

BoxCoxResult box_cox(const VectorXd& x, double fixed_lambda) { return {box_cox_transform(x, fixed_lambda), fixed_lambda}; }

// OLS ----------------------------------------------------------------------

RankDeficientError::RankDeficientError(std::vector<std::string> columns)
    : std::runtime_error([&] {
        std::string msg = "design matrix is rank deficient; collinear columns:";
        for (const auto& c : columns) msg += " " + c;
        return msg;
      }()),
      columns_(std::move(columns)) {}

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

RegressionReport ols_fit(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& names) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (static_cast<Eigen::Index>(names.size()) != p) throw std::invalid_argument("one name per column required");
  if (y.size() != n) throw std::invalid_argument("X and y row counts differ");
  if (n <= p + 1)
    throw std::invalid_argument("OLS needs n > p + 1 (n = " + std::to_string(n) + ", p = " + std::to_string(p) + ")");

  MatrixXd A(n, p + 1);
  A.col(0).setOnes();
  A.rightCols(p) = X;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < p + 1) {
    std::vector<std::string> cols;
    for (Eigen::Index k = qr.rank(); k < p + 1; ++k) {
      const Eigen::Index j = qr.colsPermutation().indices()(k);
      cols.push_back(j == 0 ? "(intercept)" : names[static_cast<std::size_t>(j - 1)]);
    }
    throw RankDeficientError(std::move(cols));
  }

  const VectorXd coef = qr.solve(y);
  RegressionReport r;
  r.n = static_cast<std::size_t>(n);
  r.p = static_cast<std::size_t>(p);
  r.residuals = y - A * coef;
  const double rss = r.residuals.squaredNorm();
  const double tss = (y.array() - y.mean()).square().sum();
  const double df = static_cast<double>(n - p - 1);
  r.sigma2 = rss / df;
  r.r2 = tss > 0.0 ? 1.0 - rss / tss : kNaN;
  r.adj_r2 = 1.0 - (1.0 - r.r2) * static_cast<double>(n - 1) / df;

  // (AᵀA)⁻¹ = P R⁻¹ R⁻ᵀ Pᵀ.
  const MatrixXd R = qr.matrixR().topLeftCorner(p + 1, p + 1).triangularView<Eigen::Upper>();
  const MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(p + 1, p + 1));
  const MatrixXd Cp = Rinv * Rinv.transpose();
  const auto& perm = qr.colsPermutation().indices();
  VectorXd diag(p + 1);
  for (Eigen::Index k = 0; k < p + 1; ++k) diag(perm(k)) = Cp(k, k);

  const boost::math::students_t dist(df);
  auto term = [&](Eigen::Index j, std::string name) {
    Term t;
    t.name = std::move(name);
    t.beta = coef(j);
    t.se = std::sqrt(r.sigma2 * diag(j));
    if (t.se > 0.0) {
      t.t = t.beta / t.se;
      t.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t.t)));
    } else {
      t.t = t.beta == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), t.beta);
      t.p = t.beta == 0.0 ? 1.0 : 0.0;
    }
    t.stars = significance_stars(t.p);
    return t;
  };
  r.intercept = term(0, "(intercept)");
  for (Eigen::Index j = 0; j < p; ++j) r.terms.push_back(term(j + 1, names[static_cast<std::size_t>(j)]));
  return r;
}

double r2_score(const VectorXd& y, const VectorXd& yhat) {
  const double sst = (y.array() - y.mean()).square().sum();
  if (!(sst > 0.0)) return kNaN;
  return 1.0 - (y - yhat).squaredNorm() / sst;
}

// Cross-validation ---------------------------------------------------------

CvSummary shuffle_split_cv(const MatrixXd& X, const VectorXd& y, const CvOptions& opts) {
  const Eigen::Index n = X.rows();
  if (n < 8) throw std::invalid_argument("shuffle-split CV needs at least 8 rows");
  const auto n_train = static_cast<Eigen::Index>(std::floor(opts.train_frac * static_cast<double>(n)));
  if (n_train < 2 || n - n_train < 2) throw std::invalid_argument("train fraction leaves an empty side");
  std::vector<std::string> names(static_cast<std::size_t>(X.cols()));
  for (std::size_t j = 0; j < names.size(); ++j) names[j] = "x" + std::to_string(j);

  CvSummary out;
  out.splits = opts.splits;
  out.trace.assign(opts.splits, kNaN);
  parallel_for(opts.splits, opts.jobs, [&](std::size_t s) {
    const auto idx = shuffled_indices(n, derive_seed(opts.seed, 1, s));
    const std::vector<Eigen::Index> train(idx.begin(), idx.begin() + n_train), test(idx.begin() + n_train, idx.end());
    const VectorXd yt = select_rows(y, test);
    if (!((yt.array() - yt.mean()).square().sum() > 0.0)) return;
    try {
      const auto fit = ols_fit(select_rows(X, train), select_rows(y, train), names);
      VectorXd coef(X.cols());
      for (Eigen::Index j = 0; j < X.cols(); ++j) coef(j) = fit.terms[static_cast<std::size_t>(j)].beta;
      const VectorXd pred = (select_rows(X, test) * coef).array() + fit.intercept.beta;
      out.trace[s] = r2_score(yt, pred);
    } catch (const std::exception&) {
      // Rank loss on this training subset: the split is skipped.
    }
  });

  std::vector<double> ok;
  for (double v : out.trace)
    if (!std::isnan(v)) ok.push_back(v);
  out.skipped = opts.splits - ok.size();
  if (!ok.empty()) {
    const double mean = std::accumulate(ok.begin(), ok.end(), 0.0) / static_cast<double>(ok.size());
    double ss = 0.0;
    for (double v : ok) ss += (v - mean) * (v - mean);
    out.mean_r2 = mean;
    out.sd_r2 = ok.size() > 1 ? std::sqrt(ss / static_cast<double>(ok.size() - 1)) : 0.0;
  }
  return out;
}

// Stability selection ------------------------------------------------------

std::vector<bool> lasso_path_support(const MatrixXd& X, const VectorXd& y, const std::vector<double>& lambdas) {
  const Eigen::Index m = X.rows(), p = X.cols();
  const double md = static_cast<double>(m);
  const VectorXd scale = X.colwise().squaredNorm().transpose() / md;
  VectorXd b = VectorXd::Zero(p);
  VectorXd r = y;
  std::vector<bool> ever(static_cast<std::size_t>(p), false);
  for (double lambda : lambdas) {
    for (int sweep = 0; sweep < 10000; ++sweep) {
      double max_change = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (scale(j) == 0.0) continue;
        const double rho = X.col(j).dot(r) / md + scale(j) * b(j);
        const double next = (rho > lambda ? rho - lambda : rho < -lambda ? rho + lambda : 0.0) / scale(j);
        const double delta = next - b(j);
        if (delta != 0.0) {
          r.noalias() -= delta * X.col(j);
          b(j) = next;
          max_change = std::max(max_change, std::abs(delta) * std::sqrt(scale(j)));
        }
      }
      if (max_change < 1e-9) break;
    }
    for (Eigen::Index j = 0; j < p; ++j)
      if (b(j) != 0.0) ever[static_cast<std::size_t>(j)] = true;
  }
  return ever;
}

StabilityResult stability_selection(const MatrixXd& X, const VectorXd& y, const StabilityOptions& opts) {
  const Eigen::Index n = X.rows(), p = X.cols();
  const Eigen::Index m = n / 2;
  if (m < 2) throw std::invalid_argument("stability selection needs at least 4 rows");
  StabilityResult out;
  out.frequency = VectorXd::Zero(p);
  if (p == 0 || opts.subsamples == 0) return out;

  double floor = 0.0;
  if (opts.floor == PenaltyFloor::Universal) {
    double sigma = std::sqrt(population_variance(y));
    if (n > p + 1) {
      try {
        std::vector<std::string> names(static_cast<std::size_t>(p));
        for (std::size_t j = 0; j < names.size(); ++j) names[j] = "x" + std::to_string(j);
        sigma = std::sqrt(ols_fit(X, y, names).sigma2);
      } catch (const RankDeficientError&) {
      }
    }
    floor = sigma * std::sqrt(2.0 * std::log(static_cast<double>(p)) / static_cast<double>(m));
  }

  std::vector<std::vector<bool>> hits(opts.subsamples);
  parallel_for(opts.subsamples, opts.jobs, [&](std::size_t k) {
    auto idx = shuffled_indices(n, derive_seed(opts.seed, 2, k));
    idx.resize(static_cast<std::size_t>(m));
    std::sort(idx.begin(), idx.end());
    MatrixXd Xs = select_rows(X, idx);
    VectorXd ys = select_rows(y, idx);
    ys.array() -= ys.mean();
    for (Eigen::Index j = 0; j < p; ++j) {
      auto col = Xs.col(j);
      col.array() -= col.mean();
      const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(m));
      if (sd > 0.0) col /= sd;
      else col.setZero();
    }
    const double lambda_max = (Xs.transpose() * ys).cwiseAbs().maxCoeff() / static_cast<double>(m);
    std::vector<double> grid;
    for (std::size_t i = 0; i < opts.grid; ++i) {
      const double frac = opts.grid > 1 ? static_cast<double>(i) / static_cast<double>(opts.grid - 1) : 0.0;
      const double lambda = lambda_max * std::pow(10.0, -opts.decades * frac);
      if (lambda < floor) break;
      grid.push_back(lambda);
    }
    hits[k] = grid.empty() ? std::vector<bool>(static_cast<std::size_t>(p), false) : lasso_path_support(Xs, ys, grid);
  });

  for (const auto& h : hits)
    for (Eigen::Index j = 0; j < p; ++j)
      if (h[static_cast<std::size_t>(j)]) out.frequency(j) += 1.0;
  out.frequency /= static_cast<double>(opts.subsamples);
  for (Eigen::Index j = 0; j < p; ++j)
    if (out.frequency(j) >= opts.threshold) out.selected.push_back(static_cast<std::size_t>(j));
  return out;
}

// RFE ----------------------------------------------------------------------

RfeResult rfe(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& names, std::size_t keep_k) {
  const auto p = static_cast<std::size_t>(X.cols());
  if (keep_k > p) throw std::invalid_argument("rfe: keep_k exceeds the number of columns");
  RfeResult out;
  std::vector<std::size_t> active(p);
  std::iota(active.begin(), active.end(), 0);

  auto drop = [&](std::size_t pos, const std::string& why) {
    out.eliminated.push_back(active[pos]);
    out.log.push_back("dropped " + names[active[pos]] + ": " + why);
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(pos));
  };

  while (active.size() > keep_k) {
    std::vector<std::string> sub;
    for (auto j : active) sub.push_back(names[j]);
    RegressionReport fit;
    try {
      fit = ols_fit(select_cols(X, active), y, sub);
    } catch (const RankDeficientError& e) {
      // Drop the first collinear column by name.
      std::size_t victim = active.size();
      for (std::size_t k = 0; k < active.size(); ++k)
        if (std::find(e.columns().begin(), e.columns().end(), sub[k]) != e.columns().end() &&
            (victim == active.size() || sub[k] < sub[victim]))
          victim = k;
      if (victim == active.size()) throw;
      drop(victim, "collinear");
      continue;
    }
    std::size_t victim = 0;
    for (std::size_t k = 1; k < active.size(); ++k) {
      const double a = std::abs(fit.terms[k].beta), b = std::abs(fit.terms[victim].beta);
      // Near-equal magnitudes count as ties so rounding cannot decide.
      const bool tie = std::abs(a - b) <= 1e-12 * std::max(a, b);
      if ((!tie && a < b) || (tie && sub[k] < sub[victim])) victim = k;
    }
    drop(victim, "smallest |beta| " + format_number(fit.terms[victim].beta));
  }
  out.selected = active;
  return out;
}

// Spearman -----------------------------------------------------------------

VectorXd average_ranks(const VectorXd& x) {
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x(a) < x(b); });
  VectorXd ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && x(order[static_cast<std::size_t>(j + 1)]) == x(order[static_cast<std::size_t>(i)])) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) ranks(order[static_cast<std::size_t>(k)]) = r;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> spearman(const VectorXd& x, const VectorXd& y) {
  if (x.size() != y.size() || x.size() < 3) throw std::invalid_argument("spearman needs equal lengths >= 3");
  const VectorXd rx = average_ranks(x), ry = average_ranks(y);
  const VectorXd dx = rx.array() - rx.mean(), dy = ry.array() - ry.mean();
  const double sxx = dx.squaredNorm(), syy = dy.squaredNorm();
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return dx.dot(dy) / std::sqrt(sxx * syy);
}

// Design -------------------------------------------------------------------

VectorXd apply_transform(const ColumnTransform& t, const VectorXd& raw) {
  const VectorXd shifted = raw.array() + t.shift;
  VectorXd v;
  switch (t.kind) {
    case TransformKind::BoxCox: v = box_cox_transform(shifted, t.lambda); break;
    case TransformKind::Log: v = box_cox_transform(shifted, 0.0); break;
    case TransformKind::None: v = shifted; break;
  }
  return (v.array() - t.mean) / t.sd;
}

ColumnTransform fit_column_transform(const std::string& name, const VectorXd& raw, TransformKind kind,
                                     bool standardize, VectorXd& transformed) {
  ColumnTransform t;
  t.kind = kind;
  const double lo = raw.minCoeff();
  if (kind != TransformKind::None && lo <= 0.0) t.shift = 1.0 - lo;
  const VectorXd shifted = raw.array() + t.shift;
  switch (kind) {
    case TransformKind::BoxCox: {
      auto bc = box_cox(shifted);
      t.lambda = bc.lambda;
      transformed = std::move(bc.y);
      break;
    }
    case TransformKind::Log: transformed = box_cox_transform(shifted, 0.0); break;
    case TransformKind::None: transformed = shifted; break;
  }
  const double mean = transformed.mean();
  const double sd = std::sqrt(population_variance(transformed));
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
    throw std::invalid_argument("column '" + name + "' has zero spread after transformation");
  if (standardize) {
    t.mean = mean;
    t.sd = sd;
  }
  return t;
}

DesignMatrix build_design(const DataTable& table, const DesignSpec& spec) {
  std::vector<std::string> needed = spec.columns;
  for (const auto& it : spec.interactions)
    for (const auto& f : {it.a, it.b})
      if (std::find(needed.begin(), needed.end(), f) == needed.end()) needed.push_back(f);
  auto column = [&](const std::string& name) -> const std::vector<std::optional<double>>& {
    const auto it = table.columns.find(name);
    if (it == table.columns.end()) throw std::invalid_argument("unknown column '" + name + "'");
    if (it->second.size() != table.rows()) throw std::invalid_argument("column '" + name + "' has the wrong length");
    return it->second;
  };
  const auto& response = column(spec.response);
  for (const auto& c : needed) column(c);

  DesignMatrix d;
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    bool ok = response[r].has_value() && (spec.response_transform != TransformKind::Log || *response[r] > 0.0);
    for (const auto& c : needed) ok = ok && column(c)[r].has_value();
    if (ok) rows.push_back(r);
    else ++d.dropped_rows;
  }
  std::sort(rows.begin(), rows.end(), [&](auto a, auto b) { return table.ids[a] < table.ids[b]; });
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (table.ids[rows[k]] == table.ids[rows[k - 1]])
      throw std::invalid_argument("duplicate district id " + std::to_string(table.ids[rows[k]]));

  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n < 2) throw std::invalid_argument("fewer than 2 complete rows");
  for (auto r : rows) d.ids.push_back(table.ids[r]);

  auto gather = [&](const std::vector<std::optional<double>>& col) {
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = *col[rows[static_cast<std::size_t>(i)]];
    return v;
  };

  std::map<std::string, VectorXd> z;
  const auto pc = static_cast<Eigen::Index>(spec.columns.size());
  d.raw.resize(n, pc);
  d.transformed.resize(n, pc);
  for (const auto& c : needed) {
    const VectorXd raw = gather(column(c));
    const auto it = spec.transforms.find(c);
    const TransformKind kind = it == spec.transforms.end() ? TransformKind::BoxCox : it->second;
    VectorXd tv;
    const ColumnTransform t = fit_column_transform(c, raw, kind, spec.standardize, tv);
    z[c] = (tv.array() - t.mean) / t.sd;
    const auto pos = std::find(spec.columns.begin(), spec.columns.end(), c) - spec.columns.begin();
    if (pos < pc) {
      d.raw.col(pos) = raw;
      d.transformed.col(pos) = tv;
      d.transforms.push_back(t);
    }
  }

  d.names = spec.columns;
  d.interactions = spec.interactions;
  d.X.resize(n, pc + static_cast<Eigen::Index>(spec.interactions.size()));
  for (Eigen::Index j = 0; j < pc; ++j) d.X.col(j) = z[spec.columns[static_cast<std::size_t>(j)]];
  for (std::size_t k = 0; k < spec.interactions.size(); ++k) {
    const auto& it = spec.interactions[k];
    VectorXd prod = z[it.a].cwiseProduct(z[it.b]);
    if (spec.standardize) {
      const double sd = std::sqrt(population_variance(prod));
      if (!(sd > 0.0)) throw std::invalid_argument("interaction '" + it.name() + "' has zero spread");
      prod = (prod.array() - prod.mean()) / sd;
    }
    d.X.col(pc + static_cast<Eigen::Index>(k)) = prod;
    d.names.push_back(it.name());
  }

  VectorXd ty;
  d.response = fit_column_transform(spec.response, gather(response), spec.response_transform, spec.standardize_response, ty);
  // The response is never shifted: a log response requires positive values.
  d.y = (ty.array() - d.response.mean) / d.response.sd;
  return d;
}

// Model suite --------------------------------------------------------------

std::vector<ModelGroup> default_groups() {
  return {
      {"Land use",
       {"lum", "closeness_small_parks", "rnr", "housing_types", "commercial", "nightlife", "nightlife_density", "daily",
        "third_places"}},
      {"Small blocks", {"mean_block_area", "intersection_density", "anisotropicity"}},
      {"Aged buildings", {"avg_building_age", "std_building_age", "employees_per_company"}},
      {"Concentration",
       {"population_density", "employment_density", "pop_emp_ratio", "apartments_per_building",
        "density_daily_places", "density_nondaily_places"}},
      {"Vacuums", {"closeness_large_parks", "closeness_railways", "closeness_highways", "closeness_water"}},
  };
}

namespace {

/// At least two distinct present values.
bool usable_column(const DataTable& t, const std::string& name) {
  const auto it = t.columns.find(name);
  if (it == t.columns.end()) return false;
  std::optional<double> first;
  for (const auto& v : it->second) {
    if (!v) continue;
    if (!first) first = v;
    else if (*v != *first) return true;
  }
  return false;
}

RegressionReport unavailable(const std::string& model, std::string why) {
  RegressionReport r;
  r.model = model;
  r.available = false;
  r.note = std::move(why);
  return r;
}

RegressionReport fit_model(const std::string& model, const DesignMatrix& d, const CvOptions& cv) {
  RegressionReport r;
  try {
    r = ols_fit(d.X, d.y, d.names);
  } catch (const std::exception& e) {
    return unavailable(model, e.what());
  }
  r.model = model;
  if (d.X.rows() >= 8 && cv.splits > 0) r.cv = shuffle_split_cv(d.X, d.y, cv);
  return r;
}

}  // namespace

SuiteReport run_model_suite(const DataTable& table, const SuiteOptions& opts) {
  SuiteReport out;
  DesignSpec base;
  base.transforms = opts.transforms;
  base.standardize_response = opts.standardize_response;

  std::size_t model_index = 0;
  auto cv_for = [&](std::size_t k) {
    CvOptions cv = opts.cv;
    cv.seed = derive_seed(opts.seed, 100, k);
    cv.jobs = opts.jobs;
    return cv;
  };

  for (const auto& g : opts.groups) {
    const std::size_t k = model_index++;
    DesignSpec spec = base;
    std::vector<std::string> skipped;
    for (const auto& c : g.columns) (usable_column(table, c) ? spec.columns : skipped).push_back(c);
    if (spec.columns.empty()) {
      out.models.push_back(unavailable(g.name, "no usable features"));
      continue;
    }
    try {
      const DesignMatrix d = build_design(table, spec);
      out.dropped_rows[g.name] = d.dropped_rows;
      auto r = fit_model(g.name, d, cv_for(k));
      if (!skipped.empty() && r.available) {
        r.note = "constant or empty columns skipped:";
        for (const auto& s : skipped) r.note += " " + s;
      }
      out.models.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.models.push_back(unavailable(g.name, e.what()));
    }
  }

  const std::string combined = "Combined";
  const std::size_t kc = model_index;
  DesignSpec all = base;
  std::set<std::string> seen;
  for (const auto& g : opts.groups)
    for (const auto& c : g.columns)
      if (seen.insert(c).second && usable_column(table, c)) all.columns.push_back(c);
  try {
    if (all.columns.empty()) throw std::invalid_argument("no usable features");
    const DesignMatrix d = build_design(table, all);
    StabilityOptions so = opts.stability;
    so.seed = derive_seed(opts.seed, 200, 0);
    so.jobs = opts.jobs;
    const auto stab = stability_selection(d.X, d.y, so);
    const auto keep = std::min(opts.rfe_keep, all.columns.size());
    const auto elim = rfe(d.X, d.y, d.names, keep);

    std::set<std::size_t> s(stab.selected.begin(), stab.selected.end()), r(elim.selected.begin(), elim.selected.end());
    for (std::size_t j = 0; j < all.columns.size(); ++j) {
      out.selection.frequency[all.columns[j]] = stab.frequency(static_cast<Eigen::Index>(j));
      if (s.contains(j)) out.selection.stability.push_back(all.columns[j]);
      if (r.contains(j)) out.selection.rfe.push_back(all.columns[j]);
      const bool take = opts.combine == CombineRule::Union ? (s.contains(j) || r.contains(j))
                                                           : (s.contains(j) && r.contains(j));
      if (take) out.selection.chosen.push_back(all.columns[j]);
    }

    DesignSpec cs = base;
    cs.columns = out.selection.chosen;
    for (const auto& it : opts.interactions)
      if (usable_column(table, it.a) && usable_column(table, it.b)) cs.interactions.push_back(it);
    if (cs.columns.empty() && cs.interactions.empty()) throw std::invalid_argument("selection chose no features");
    const DesignMatrix dc = build_design(table, cs);
    out.dropped_rows[combined] = dc.dropped_rows;
    out.models.push_back(fit_model(combined, dc, cv_for(kc)));
  } catch (const std::exception& e) {
    out.models.push_back(unavailable(combined, e.what()));
  }
  return out;
}

// Report output ------------------------------------------------------------

namespace {

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json term_json(const Term& t) {
  return {{"term", t.name}, {"beta", number(t.beta)}, {"se", number(t.se)}, {"t", number(t.t)},
          {"p", number(t.p)}, {"stars", t.stars}};
}

std::string cell(double v) { return std::isfinite(v) ? format_number(v) : std::string(); }

}  // namespace

void write_report_json(const std::filesystem::path& path, const SuiteReport& report, std::uint64_t seed) {
  nlohmann::json doc;
  doc["seed"] = seed;
  doc["models"] = nlohmann::json::array();
  for (const auto& m : report.models) {
    nlohmann::json j{{"model", m.model}, {"available", m.available}, {"note", m.note}};
    if (m.available) {
      j["n"] = m.n;
      j["p"] = m.p;
      j["r2"] = number(m.r2);
      j["adj_r2"] = number(m.adj_r2);
      j["intercept"] = term_json(m.intercept);
      j["terms"] = nlohmann::json::array();
      for (const auto& t : m.terms) j["terms"].push_back(term_json(t));
      if (m.cv)
        j["cv"] = {{"mean_r2", number(m.cv->mean_r2)}, {"sd_r2", number(m.cv->sd_r2)},
                   {"splits", m.cv->splits}, {"skipped", m.cv->skipped}};
    }
    const auto it = report.dropped_rows.find(m.model);
    if (it != report.dropped_rows.end()) j["dropped_rows"] = it->second;
    doc["models"].push_back(std::move(j));
  }
  nlohmann::json sel;
  sel["stability_selected"] = report.selection.stability;
  sel["rfe_selected"] = report.selection.rfe;
  sel["chosen"] = report.selection.chosen;
  sel["stability_frequency"] = nlohmann::json::object();
  for (const auto& [k, v] : report.selection.frequency) sel["stability_frequency"][k] = v;
  doc["selection"] = std::move(sel);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

SuiteReport read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string(), std::nullopt, "cannot open report");
  auto value = [](const nlohmann::json& j, const char* key) {
    const auto it = j.find(key);
    return it == j.end() || it->is_null() ? std::nan("") : it->get<double>();
  };
  auto term = [&](const nlohmann::json& j) {
    return Term{j.at("term").get<std::string>(), value(j, "beta"), value(j, "se"), value(j, "t"), value(j, "p"),
                j.at("stars").get<std::string>()};
  };
  SuiteReport report;
  try {
    const auto doc = nlohmann::json::parse(in);
    for (const auto& j : doc.at("models")) {
      RegressionReport m;
      m.model = j.at("model").get<std::string>();
      m.available = j.at("available").get<bool>();
      m.note = j.at("note").get<std::string>();
      if (m.available) {
        m.n = j.at("n").get<std::size_t>();
        m.p = j.at("p").get<std::size_t>();
        m.r2 = value(j, "r2");
        m.adj_r2 = value(j, "adj_r2");
        m.intercept = term(j.at("intercept"));
        for (const auto& t : j.at("terms")) m.terms.push_back(term(t));
        if (const auto cv = j.find("cv"); cv != j.end()) {
          CvSummary s;
          s.mean_r2 = value(*cv, "mean_r2");
          s.sd_r2 = value(*cv, "sd_r2");
          s.splits = cv->at("splits").get<std::size_t>();
          s.skipped = cv->at("skipped").get<std::size_t>();
          m.cv = s;
        }
      }
      if (const auto d = j.find("dropped_rows"); d != j.end()) report.dropped_rows[m.model] = d->get<std::size_t>();
      report.models.push_back(std::move(m));
    }
    const auto& sel = doc.at("selection");
    report.selection.stability = sel.at("stability_selected").get<std::vector<std::string>>();
    report.selection.rfe = sel.at("rfe_selected").get<std::vector<std::string>>();
    report.selection.chosen = sel.at("chosen").get<std::vector<std::string>>();
    for (const auto& [k, v] : sel.at("stability_frequency").items()) report.selection.frequency[k] = v.get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string(), std::nullopt, std::string("malformed report: ") + e.what());
  }
  return report;
}

void write_report_csv(const std::filesystem::path& path, const SuiteReport& report) {
  CsvTable t;
  t.header = {"model", "term", "beta", "se", "t", "p", "stars", "adj_r2", "n", "cv_mean_r2", "cv_sd_r2"};
  for (const auto& m : report.models) {
    if (!m.available) {
      t.rows.push_back({m.model, "", "", "", "", "", "", "", "0", "", ""});
      continue;
    }
    const std::string cvm = m.cv ? cell(m.cv->mean_r2) : "", cvs = m.cv ? cell(m.cv->sd_r2) : "";
    for (const auto& term : m.terms)
      t.rows.push_back({m.model, term.name, cell(term.beta), cell(term.se), cell(term.t), cell(term.p), term.stars,
                        cell(m.adj_r2), std::to_string(m.n), cvm, cvs});
  }
  write_csv(path, t);
}

void write_table4_csv(const std::filesystem::path& path, const SuiteReport& report) {
  CsvTable t;
  t.header.push_back("term");
  for (const auto& m : report.models) t.header.push_back(m.model);
  auto fixed = [](double v) {
    if (!std::isfinite(v)) return std::string();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  std::vector<std::string> adj{"Adj R2"}, cvr{"CV mean R2"}, n{"n"};
  for (const auto& m : report.models) {
    adj.push_back(m.available ? fixed(m.adj_r2) : "unavailable");
    cvr.push_back(m.available && m.cv ? fixed(m.cv->mean_r2) : "");
    n.push_back(m.available ? std::to_string(m.n) : "");
  }
  t.rows = {adj, cvr, n};
  std::vector<std::string> terms;
  for (const auto& m : report.models)
    for (const auto& term : m.terms)
      if (std::find(terms.begin(), terms.end(), term.name) == terms.end()) terms.push_back(term.name);
  for (const auto& name : terms) {
    std::vector<std::string> row{name};
    for (const auto& m : report.models) {
      std::string c;
      for (const auto& term : m.terms)
        if (term.name == name) c = fixed(term.beta) + term.stars;
      row.push_back(c);
    }
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

void write_cv_trace(const std::filesystem::path& path, const SuiteReport& report) {
  CsvTable t;
  t.header = {"model", "split", "test_r2"};
  for (const auto& m : report.models) {
    if (!m.cv) continue;
    for (std::size_t s = 0; s < m.cv->trace.size(); ++s)
      t.rows.push_back({m.model, std::to_string(s), cell(m.cv->trace[s])});
  }
  write_csv(path, t);
}

}  // namespace vitality
