#include "smurf/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "smurf/family.hpp"
#include "smurf/parallel.hpp"
#include "smurf/random.hpp"

namespace smurf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void shuffle_indices(std::vector<Index>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(draw_below(rng, i));
    std::swap(idx[i - 1], idx[j]);
  }
}

// Response strata: distinct values for binomial and Poisson, quintile bins
// for Gaussian.
std::vector<std::vector<Index>> strata(const Vector& y, Family family) {
  const Index n = y.size();
  std::vector<std::vector<Index>> out;
  if (family == Family::Gaussian) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return y[a] < y[b]; });
    const int bins = static_cast<int>(std::min<Index>(5, n));
    out.resize(static_cast<std::size_t>(bins));
    for (Index r = 0; r < n; ++r) out[static_cast<std::size_t>(r * bins / n)].push_back(order[static_cast<std::size_t>(r)]);
    for (auto& s : out) std::sort(s.begin(), s.end());
    return out;
  }
  std::vector<double> levels(y.data(), y.data() + n);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  out.resize(levels.size());
  for (Index i = 0; i < n; ++i) {
    const auto pos = std::lower_bound(levels.begin(), levels.end(), y[i]) - levels.begin();
    out[static_cast<std::size_t>(pos)].push_back(i);
  }
  return out;
}

DesignMatrix select_rows(const DesignMatrix& d, const std::vector<Index>& rows) {
  DesignMatrix out;
  out.values.resize(static_cast<Index>(rows.size()), d.cols());
  out.offset.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Index>(i)) = d.values.row(rows[i]);
    out.offset[static_cast<Index>(i)] = d.offset.size() == d.rows() ? d.offset[rows[i]] : 0.0;
  }
  out.columns = d.columns;
  return out;
}

Vector select_values(const Vector& v, const std::vector<Index>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Index>(i)] = v[rows[i]];
  return out;
}

double residual_mean_square(const Vector& y, const Vector& mu) {
  return y.size() == 0 ? 1.0 : (y - mu).squaredNorm() / static_cast<double>(y.size());
}

std::vector<double> resolve_grid(const ModelSpec& spec, const PenaltySet& penalties, const TuningOptions& options) {
  if (options.lambdas) {
    const auto& v = *options.lambdas;
    if (v.empty()) throw InputError("lambda grid is empty");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!(v[i] >= 0.0) || !std::isfinite(v[i])) throw InputError("lambda values must be finite and nonnegative");
      if (i > 0 && !(v[i] < v[i - 1])) throw InputError("lambda grid must be strictly decreasing");
    }
    return v;
  }
  return default_lambda_grid(spec, penalties, options.grid, options.solver).values;
}

CriterionFn resolve_criterion(TuningMethod method, const ModelSpec& spec, const TuningOptions& options) {
  if (options.custom_criterion) return options.custom_criterion;
  switch (method) {
    case TuningMethod::InAIC: return criterion_fn(CriterionKind::AIC, spec.family());
    case TuningMethod::InBIC: return criterion_fn(CriterionKind::BIC, spec.family());
    case TuningMethod::OutDeviance: return criterion_fn(CriterionKind::Deviance, spec.family());
    case TuningMethod::OutMSPE: return criterion_fn(CriterionKind::MSPE, spec.family());
    case TuningMethod::OutDSS: return criterion_fn(CriterionKind::DSS, spec.family());
    case TuningMethod::CV:
    case TuningMethod::CV1se: return criterion_fn(options.cv_criterion, spec.family());
  }
  return criterion_fn(CriterionKind::Deviance, spec.family());
}

SolverSettings path_settings(const TuningOptions& options) {
  SolverSettings s = options.solver;
  s.record_trace = false;
  return s;
}

// Evaluation of one training path on held-out rows.
struct PathScore {
  std::vector<double> value;
  std::vector<int> df;
  std::vector<char> ok;
};

PathScore score_path(const ModelSpec& train, const std::vector<FitResult>& path, const DesignMatrix& eval_design,
                     const Vector& eval_y, const CriterionFn& crit) {
  PathScore s;
  for (const auto& fit : path) {
    const Vector& beta = fit.coefficients.beta;
    const int df = df_estimate(beta, train.blocks(), train.layout());
    const Vector mu_train = predict_mean(beta, train.design(), train.family());
    const double sigma2 = residual_mean_square(train.response(), mu_train);
    const Vector mu = predict_mean(beta, eval_design, train.family());
    s.value.push_back(crit(eval_y, mu, df, sigma2));
    s.df.push_back(df);
    s.ok.push_back(fit.converged ? 1 : 0);
  }
  return s;
}

TuningResult finish(const ModelSpec& spec, const PenaltySet& penalties, TuningResult result,
                    const TuningOptions& options) {
  select_lambda(result);
  result.selected_lambda = result.method == TuningMethod::CV1se ? result.lambda_1se : result.lambda_min;
  const std::size_t idx = result.method == TuningMethod::CV1se ? result.index_1se : result.index_min;
  SolverSettings s = options.solver;
  auto path = fit_path(spec, penalties, result.lambdas, path_settings(options), idx);
  // The selected fit is refit with the caller's trace setting, warm-started.
  std::optional<Vector> warm;
  if (idx > 0) warm = path[idx - 1].coefficients.beta;
  result.final_fit = smurf_fit(spec, penalties, result.lambdas[idx], s, warm);
  if (!result.final_fit.converged) result.warnings.push_back("final fit did not converge");
  return result;
}

}  // namespace

LambdaGrid make_lambda_grid(double lambda_max, int count, double ratio) {
  if (!(lambda_max > 0.0) || !std::isfinite(lambda_max)) throw InputError("lambda_max must be positive and finite");
  if (count < 2) throw InputError("a lambda grid needs at least 2 values");
  if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("grid ratio must lie in (0, 1)");
  LambdaGrid g;
  g.lambda_max = lambda_max;
  g.ratio = ratio;
  g.count = count;
  const double step = std::log(ratio) / static_cast<double>(count - 1);
  for (int k = 0; k < count; ++k) g.values.push_back(lambda_max * std::exp(step * static_cast<double>(k)));
  g.values.back() = lambda_max * ratio;
  return g;
}

bool is_collapsed(const Vector& beta_std, const std::vector<PredictorBlock>& blocks,
                  const std::vector<BlockSlice>& layout, double tol) {
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto& b = blocks[j];
    const auto seg = beta_std.segment(layout[j].offset, layout[j].size);
    if (b.penalty == PenaltyKind::None) continue;
    if (is_fusion(b.penalty) && b.graph) {
      const Vector levels = expand_levels(b, seg);
      const auto comp = fusion_components(levels, *b.graph, tol);
      if (*std::max_element(comp.begin(), comp.end()) != 0) return false;
    } else if (seg.size() > 0 && seg.cwiseAbs().maxCoeff() > tol) {
      return false;
    }
  }
  return true;
}

LambdaGrid default_lambda_grid(const ModelSpec& spec, const PenaltySet& penalties, const GridOptions& options,
                               const SolverSettings& settings) {
  if (options.count < 2) throw InputError("a lambda grid needs at least 2 values");
  if (!(options.ratio > 0.0 && options.ratio < 1.0)) throw InputError("grid ratio must lie in (0, 1)");

  const auto null = irls_fit(spec.family(), Matrix(spec.n(), 0), spec.response(), spec.offset(), 0.0);
  Vector beta0 = Vector::Zero(spec.coefficient_count());
  beta0[0] = null.beta[0];
  const Vector g = gradient(beta0, spec);
  const auto& rec = spec.standardization();
  double gmax = 0.0;
  double wmin = kInf;
  for (std::size_t j = 0; j < spec.blocks().size(); ++j) {
    if (spec.blocks()[j].penalty == PenaltyKind::None) continue;
    const auto& sl = spec.layout()[j];
    for (Index k = 0; k < sl.size; ++k) {
      const Index c = sl.offset + k - 1;
      gmax = std::max(gmax, std::abs((g[sl.offset + k] - rec.mean[c] * g[0]) / rec.scale[c]));
    }
    if (penalties[j].weights.size() > 0) wmin = std::min(wmin, penalties[j].weights.minCoeff());
  }
  if (!(gmax > 0.0)) throw InputError("gradient at the intercept-only fit is zero; no lambda grid can be built");
  if (!std::isfinite(wmin)) throw InputError("no penalized predictors to build a lambda grid for");

  SolverSettings probe_settings = settings;
  probe_settings.record_trace = false;
  auto collapsed = [&](double lambda) {
    const auto fit = smurf_fit(spec, penalties, lambda, probe_settings, beta0);
    return is_collapsed(fit.beta_standardized, spec.blocks(), spec.layout());
  };

  double lambda = gmax / wmin;
  if (collapsed(lambda)) {
    for (int k = 0; k < 60 && collapsed(lambda / 2.0); ++k) lambda /= 2.0;
  } else {
    int k = 0;
    for (; k < 60; ++k) {
      lambda *= 2.0;
      if (collapsed(lambda)) break;
    }
    if (k == 60) throw NumericError("no lambda collapsing all penalized predictors was found");
  }
  return make_lambda_grid(lambda, options.count, options.ratio);
}

std::string_view to_string(CriterionKind kind) {
  switch (kind) {
    case CriterionKind::AIC: return "AIC";
    case CriterionKind::BIC: return "BIC";
    case CriterionKind::Deviance: return "deviance";
    case CriterionKind::MSPE: return "MSPE";
    case CriterionKind::DSS: return "DSS";
  }
  return "?";
}

CriterionKind parse_criterion(std::string_view name) {
  if (name == "AIC" || name == "aic") return CriterionKind::AIC;
  if (name == "BIC" || name == "bic") return CriterionKind::BIC;
  if (name == "deviance" || name == "dev") return CriterionKind::Deviance;
  if (name == "MSPE" || name == "mspe") return CriterionKind::MSPE;
  if (name == "DSS" || name == "dss") return CriterionKind::DSS;
  throw InputError("unknown criterion '" + std::string(name) + "'");
}

double criterion(CriterionKind kind, Family family, const Vector& y, const Vector& mu, int df,
                 double gaussian_variance) {
  if (y.size() != mu.size()) throw InputError("response and prediction lengths differ");
  const double n = static_cast<double>(y.size());
  switch (kind) {
    case CriterionKind::AIC: return deviance(family, y, mu) + 2.0 * df;
    case CriterionKind::BIC: return deviance(family, y, mu) + std::log(n) * df;
    case CriterionKind::Deviance: return deviance(family, y, mu);
    case CriterionKind::MSPE: return std::sqrt((y - mu).squaredNorm()) / n;
    case CriterionKind::DSS: {
      double total = 0.0;
      for (Index i = 0; i < y.size(); ++i) {
        double var = gaussian_variance;
        if (family == Family::Binomial) var = mu[i] * (1.0 - mu[i]);
        if (family == Family::Poisson) var = mu[i];
        if (!(var > 0.0) || !std::isfinite(var)) continue;
        const double r = y[i] - mu[i];
        total += r * r / var + std::log(var);
      }
      return total;
    }
  }
  return kInf;
}

CriterionFn criterion_fn(CriterionKind kind, Family family) {
  return [kind, family](const Vector& y, const Vector& mu, int df, double var) {
    return criterion(kind, family, y, mu, df, var);
  };
}

std::vector<int> stratified_kfold(const Vector& y, Family family, int K, std::uint64_t seed) {
  if (K < 2) throw InputError("cross-validation needs at least 2 folds");
  if (K > y.size()) throw InputError("more folds than observations");
  Rng rng(seed);
  std::vector<int> fold(static_cast<std::size_t>(y.size()), 0);
  int next = 0;
  for (auto& s : strata(y, family)) {
    shuffle_indices(s, rng);
    for (Index i : s) {
      fold[static_cast<std::size_t>(i)] = next;
      next = (next + 1) % K;
    }
  }
  return fold;
}

std::vector<bool> stratified_split(const Vector& y, Family family, double validation_fraction, std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw InputError("validation fraction must lie in (0, 1)");
  Rng rng(seed);
  std::vector<bool> val(static_cast<std::size_t>(y.size()), false);
  double carry = 0.0;
  for (auto& s : strata(y, family)) {
    shuffle_indices(s, rng);
    // carry keeps the overall validation share on target across small strata
    const double want = validation_fraction * static_cast<double>(s.size()) + carry;
    const auto take = static_cast<std::size_t>(std::min<double>(std::floor(want + 0.5), static_cast<double>(s.size())));
    carry = want - static_cast<double>(take);
    for (std::size_t i = 0; i < take; ++i) val[static_cast<std::size_t>(s[i])] = true;
  }
  const auto nval = std::count(val.begin(), val.end(), true);
  if (nval == 0 || nval == static_cast<long>(val.size())) throw InputError("split leaves an empty sample");
  return val;
}

std::vector<FitResult> fit_path(const ModelSpec& spec, const PenaltySet& penalties, const std::vector<double>& lambdas,
                                const SolverSettings& settings, std::optional<std::size_t> last) {
  std::vector<FitResult> out;
  const std::size_t end = last ? std::min(*last + 1, lambdas.size()) : lambdas.size();
  out.reserve(end);
  std::optional<Vector> warm;
  for (std::size_t k = 0; k < end; ++k) {
    out.push_back(smurf_fit(spec, penalties, lambdas[k], settings, warm));
    warm = out.back().coefficients.beta;
  }
  return out;
}

std::string_view to_string(TuningMethod method) {
  switch (method) {
    case TuningMethod::InAIC: return "in.AIC";
    case TuningMethod::InBIC: return "in.BIC";
    case TuningMethod::OutDeviance: return "out.dev";
    case TuningMethod::OutMSPE: return "out.MSPE";
    case TuningMethod::OutDSS: return "out.DSS";
    case TuningMethod::CV: return "cv";
    case TuningMethod::CV1se: return "cv.1se";
  }
  return "?";
}

TuningMethod parse_tuning_method(std::string_view name) {
  if (name == "in.AIC") return TuningMethod::InAIC;
  if (name == "in.BIC") return TuningMethod::InBIC;
  if (name == "out.dev") return TuningMethod::OutDeviance;
  if (name == "out.MSPE") return TuningMethod::OutMSPE;
  if (name == "out.DSS") return TuningMethod::OutDSS;
  if (name == "cv") return TuningMethod::CV;
  if (name == "cv.1se") return TuningMethod::CV1se;
  throw InputError("unknown tuning method '" + std::string(name) +
                   "' (expected in.AIC, in.BIC, out.dev, out.MSPE, out.DSS, cv or cv.1se)");
}

void select_lambda(TuningResult& r) {
  const std::size_t m = r.lambdas.size();
  if (m == 0 || r.value.size() != m) throw InputError("criterion curve does not match the grid");
  if (r.sd.size() != m) r.sd.assign(m, 0.0);
  if (r.valid.size() != m) r.valid.assign(m, 1);
  std::size_t best = m;
  for (std::size_t k = 0; k < m; ++k) {
    if (r.valid[k] <= 0 || !std::isfinite(r.value[k])) continue;
    if (best == m || r.value[k] < r.value[best]) best = k;
  }
  if (best == m) throw NumericError("no lambda produced a usable criterion value");
  const double bound = r.value[best] + (std::isfinite(r.sd[best]) ? r.sd[best] : 0.0);
  std::size_t one_se = best;
  for (std::size_t k = 0; k < best; ++k) {
    if (r.valid[k] <= 0 || !std::isfinite(r.value[k])) continue;
    if (r.value[k] <= bound) {
      one_se = k;
      break;
    }
  }
  r.index_min = best;
  r.index_1se = one_se;
  r.lambda_min = r.lambdas[best];
  r.lambda_1se = r.lambdas[one_se];
}

TuningResult in_sample_tune(const ModelSpec& spec, TuningMethod method, const TuningOptions& options) {
  TuningResult result;
  result.method = method;
  result.weights = compute_weights(spec, options.scheme, options.weight_options);
  const PenaltySet penalties = make_penalties(spec, result.weights);
  result.lambdas = resolve_grid(spec, penalties, options);
  const auto crit = resolve_criterion(method, spec, options);
  const auto path = fit_path(spec, penalties, result.lambdas, path_settings(options));
  const auto score = score_path(spec, path, spec.design(), spec.response(), crit);
  for (std::size_t k = 0; k < path.size(); ++k) {
    result.value.push_back(score.value[k]);
    result.df.push_back(score.df[k]);
    result.valid.push_back(score.ok[k]);
    if (!score.ok[k]) ++result.nonconverged_fits;
  }
  result.sd.assign(path.size(), 0.0);
  select_lambda(result);
  result.selected_lambda = result.lambda_min;
  result.final_fit = path[result.index_min];
  if (!result.final_fit.converged) result.warnings.push_back("final fit did not converge");
  return result;
}

TuningResult out_of_sample_tune(const ModelSpec& spec, TuningMethod method, const TuningOptions& options) {
  TuningResult result;
  result.method = method;
  result.weights = compute_weights(spec, options.scheme, options.weight_options);
  const PenaltySet penalties = make_penalties(spec, result.weights);
  result.lambdas = resolve_grid(spec, penalties, options);
  const auto crit = resolve_criterion(method, spec, options);

  const auto val = stratified_split(spec.response(), spec.family(), options.validation_fraction, options.seed);
  std::vector<Index> train_rows, val_rows;
  for (std::size_t i = 0; i < val.size(); ++i) (val[i] ? val_rows : train_rows).push_back(static_cast<Index>(i));
  const ModelSpec train = spec.subset(train_rows);
  const PenaltySet train_pen = make_penalties(train, compute_weights(train, options.scheme, options.weight_options));
  const auto path = fit_path(train, train_pen, result.lambdas, path_settings(options));
  const auto score =
      score_path(train, path, select_rows(spec.design(), val_rows), select_values(spec.response(), val_rows), crit);
  for (std::size_t k = 0; k < path.size(); ++k) {
    result.value.push_back(score.ok[k] ? score.value[k] : kInf);
    result.df.push_back(score.df[k]);
    result.valid.push_back(score.ok[k]);
    if (!score.ok[k]) ++result.nonconverged_fits;
  }
  result.sd.assign(path.size(), 0.0);
  return finish(spec, penalties, std::move(result), options);
}

TuningResult cross_validate(const ModelSpec& spec, TuningMethod method, const TuningOptions& options) {
  TuningResult result;
  result.method = method;
  result.weights = compute_weights(spec, options.scheme, options.weight_options);
  const PenaltySet penalties = make_penalties(spec, result.weights);
  result.lambdas = resolve_grid(spec, penalties, options);
  const auto crit = resolve_criterion(method, spec, options);
  const int K = options.folds;
  const auto fold = stratified_kfold(spec.response(), spec.family(), K, options.seed);

  std::vector<PathScore> scores(static_cast<std::size_t>(K));
  parallel_for(static_cast<std::size_t>(K), options.jobs, [&](std::size_t k) {
    std::vector<Index> train_rows, test_rows;
    for (std::size_t i = 0; i < fold.size(); ++i)
      (fold[i] == static_cast<int>(k) ? test_rows : train_rows).push_back(static_cast<Index>(i));
    const ModelSpec train = spec.subset(train_rows);
    const PenaltySet pen = make_penalties(train, compute_weights(train, options.scheme, options.weight_options));
    const auto path = fit_path(train, pen, result.lambdas, path_settings(options));
    scores[k] = score_path(train, path, select_rows(spec.design(), test_rows),
                           select_values(spec.response(), test_rows), crit);
  });

  const std::size_t m = result.lambdas.size();
  for (std::size_t l = 0; l < m; ++l) {
    std::vector<double> vals;
    double df_sum = 0.0;
    for (const auto& s : scores) {
      df_sum += s.df[l];
      if (s.ok[l])
        vals.push_back(s.value[l]);
      else
        ++result.nonconverged_fits;
    }
    const double mean = vals.empty() ? kInf : std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    result.value.push_back(mean);
    result.sd.push_back(vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1)) : 0.0);
    result.df.push_back(df_sum / static_cast<double>(K));
    result.valid.push_back(static_cast<int>(vals.size()));
  }
  if (result.nonconverged_fits > 0)
    result.warnings.push_back(std::to_string(result.nonconverged_fits) +
                              " fold fits did not converge and were left out of the criterion means");
  return finish(spec, penalties, std::move(result), options);
}

TuningResult tune(const ModelSpec& spec, TuningMethod method, const TuningOptions& options) {
  switch (method) {
    case TuningMethod::InAIC:
    case TuningMethod::InBIC: return in_sample_tune(spec, method, options);
    case TuningMethod::OutDeviance:
    case TuningMethod::OutMSPE:
    case TuningMethod::OutDSS: return out_of_sample_tune(spec, method, options);
    case TuningMethod::CV:
    case TuningMethod::CV1se: return cross_validate(spec, method, options);
  }
  throw InputError("unknown tuning method");
}

}  // namespace smurf
