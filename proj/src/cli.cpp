#include "smurf/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include "smurf/config.hpp"
#include "smurf/family.hpp"
#include "smurf/parallel.hpp"
#include "smurf/reestimate.hpp"
#include "smurf/simulation.hpp"
#include "smurf/tuning.hpp"

namespace smurf {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kInterceptName = "(Intercept)";

std::string level_label(const PredictorBlock& b, int level) {
  if (static_cast<int>(b.level_labels.size()) > level) return b.level_labels[static_cast<std::size_t>(level)];
  return std::to_string(level);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory '" + dir.string() + "'");
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

void write_table(const fs::path& path, const Table& t) {
  std::ostringstream s;
  t.write_csv(s);
  write_file(path, s.str());
}

void write_json(const fs::path& path, const json& doc) { write_file(path, doc.dump(2) + "\n"); }

Table trace_table(const FitResult& fit) {
  Table t({"iteration", "objective", "step", "restarts"});
  for (const auto& r : fit.trace)
    t.add_row({std::to_string(r.iteration), format_number(r.objective), format_number(r.step),
               std::to_string(r.restarts)});
  return t;
}

json fit_diagnostics(const ModelSpec& spec, const FitResult& fit, const ModelConfig& cfg) {
  json d;
  const Vector& beta = fit.coefficients.beta;
  const Vector mu = predict_mean(beta, spec.design(), spec.family());
  d["family"] = std::string(to_string(spec.family()));
  d["observations"] = spec.n();
  d["coefficients"] = spec.coefficient_count();
  d["weights"] = std::string(to_string(cfg.weights));
  d["lambda"] = fit.lambda;
  d["objective"] = fit.objective;
  d["converged"] = fit.converged;
  d["iterations"] = fit.iterations;
  d["restarts"] = fit.restarts;
  d["step"] = fit.step;
  d["df"] = df_estimate(beta, spec.blocks(), spec.layout());
  d["log_likelihood"] = log_likelihood(spec.family(), spec.response(), mu);
  d["deviance"] = deviance(spec.family(), spec.response(), mu);
  d["admm"] = {{"calls", fit.admm_calls},
               {"nonconverged", fit.admm_nonconverged},
               {"max_iterations", fit.admm_max_iterations}};
  json pen = json::object();
  for (std::size_t j = 0; j < spec.blocks().size() && j < fit.block_penalties.size(); ++j)
    if (spec.blocks()[j].penalty != PenaltyKind::None) pen[spec.blocks()[j].id] = fit.block_penalties[j];
  d["block_penalties"] = pen;
  json trace = json::array();
  for (const auto& r : fit.trace) trace.push_back(r.objective);
  d["objective_trace"] = trace;
  return d;
}

struct Loaded {
  ModelConfig config;
  ModelSpec spec;
};

Loaded load(const std::string& data, const std::string& config) {
  ModelConfig cfg = load_config(config);
  Table table = Table::read_csv_file(data);
  ModelSpec spec = build_spec(table, cfg);
  return {std::move(cfg), std::move(spec)};
}

void write_reestimate(const fs::path& dir, const ModelSpec& spec, const FitResult& fit, json& diag, std::ostream& err) {
  const auto re = reestimate(spec, fit);
  write_table(dir / "reestimated.csv", coefficient_table(spec, re.coefficients.beta));
  diag["reestimate"] = {{"log_likelihood", re.log_likelihood},
                        {"regularized_log_likelihood", re.regularized_log_likelihood},
                        {"df", re.df},
                        {"parameters", re.plan.groups.size() + 1},
                        {"ridge_fallback", re.ridge_fallback},
                        {"warnings", re.warnings}};
  for (const auto& w : re.warnings) err << "warning: " << w << "\n";
}

int cmd_fit(const std::string& data, const std::string& config, double lambda, const fs::path& out_dir,
            bool reest, std::ostream& out, std::ostream& err) {
  auto [cfg, spec] = load(data, config);
  const auto weights = compute_weights(spec, cfg.weights, cfg.weight_options);
  const auto penalties = make_penalties(spec, weights);
  const FitResult fit = smurf_fit(spec, penalties, lambda, cfg.solver);
  ensure_dir(out_dir);
  write_table(out_dir / "coefficients.csv", coefficient_table(spec, fit.coefficients.beta));
  write_table(out_dir / "trace.csv", trace_table(fit));
  json diag = fit_diagnostics(spec, fit, cfg);
  diag["command"] = "fit";
  if (reest) write_reestimate(out_dir, spec, fit, diag, err);
  write_json(out_dir / "diagnostics.json", diag);
  out << "lambda " << format_number(lambda) << ": objective " << format_number(fit.objective) << ", df "
      << diag["df"].get<int>() << ", " << fit.iterations << " iterations"
      << (fit.converged ? "" : " (not converged)") << "\n";
  if (!fit.converged) {
    err << "error: the solver did not converge within " << cfg.solver.max_iter << " iterations\n";
    return kExitNonConvergence;
  }
  return kExitOk;
}

int cmd_tune(const std::string& data, const std::string& config, const std::optional<std::string>& method_name,
             const std::optional<int>& folds, const std::optional<std::uint64_t>& seed, int jobs,
             const fs::path& out_dir, bool reest, std::ostream& out, std::ostream& err) {
  auto [cfg, spec] = load(data, config);
  const TuningMethod method =
      method_name ? parse_tuning_method(*method_name) : cfg.method.value_or(TuningMethod::CV1se);
  TuningOptions opt = cfg.tuning;
  if (folds) opt.folds = *folds;
  if (seed) opt.seed = *seed;
  opt.jobs = jobs;
  if ((method == TuningMethod::CV || method == TuningMethod::CV1se) && opt.folds < 2)
    throw InputError("cross-validation needs K >= 2 folds");
  const TuningResult r = tune(spec, method, opt);

  ensure_dir(out_dir);
  Table path({"lambda", "criterion", "sd", "df", "valid"});
  for (std::size_t k = 0; k < r.lambdas.size(); ++k)
    path.add_row({format_number(r.lambdas[k]), format_number(r.value[k]), format_number(r.sd[k]),
                  format_number(r.df[k]), std::to_string(r.valid[k])});
  write_table(out_dir / "path.csv", path);
  write_table(out_dir / "coefficients.csv", coefficient_table(spec, r.final_fit.coefficients.beta));
  write_table(out_dir / "trace.csv", trace_table(r.final_fit));
  json diag = fit_diagnostics(spec, r.final_fit, cfg);
  diag["command"] = "tune";
  diag["method"] = std::string(to_string(method));
  diag["folds"] = opt.folds;
  diag["seed"] = opt.seed;
  diag["selected_lambda"] = r.selected_lambda;
  diag["lambda_min"] = r.lambda_min;
  diag["lambda_1se"] = r.lambda_1se;
  diag["index_min"] = r.index_min;
  diag["index_1se"] = r.index_1se;
  diag["nonconverged_fits"] = r.nonconverged_fits;
  diag["warnings"] = r.warnings;
  for (const auto& w : r.warnings) err << "warning: " << w << "\n";
  if (reest) write_reestimate(out_dir, spec, r.final_fit, diag, err);
  write_json(out_dir / "diagnostics.json", diag);
  out << to_string(method) << ": selected lambda " << format_number(r.selected_lambda) << " (min "
      << format_number(r.lambda_min) << ", 1se " << format_number(r.lambda_1se) << "), df "
      << diag["df"].get<int>() << "\n";
  if (!r.final_fit.converged) {
    err << "error: the final fit did not converge\n";
    return kExitNonConvergence;
  }
  return kExitOk;
}

int cmd_simulate(Index n, std::uint64_t seed, const fs::path& out_dir, std::ostream& out) {
  const CreditData data = simulate_credit_data({n, seed});
  ensure_dir(out_dir);
  write_table(out_dir / "data.csv", credit_table(data));
  write_json(out_dir / "config.json", to_json(credit_config()));
  const ModelSpec spec = credit_spec(data);
  write_table(out_dir / "truth.csv", coefficient_table(spec, SimulationScenario::true_beta()));
  out << "wrote " << n << " observations (late payments " << format_number(1.0 - data.paid.mean()) << ") to "
      << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_study(StudyOptions opt, const std::vector<std::string>& settings, const fs::path& out_dir,
              std::ostream& out) {
  if (!settings.empty()) {
    opt.settings.clear();
    for (const auto& s : settings) opt.settings.push_back(parse_study_setting(s));
  }
  ensure_dir(out_dir);
  const StudyReport report = run_study(opt, [&](const ReplicateRecord& r) {
    out << r.setting << " replicate " << r.replicate;
    if (r.ok)
      out << ": mse " << format_number(r.mse) << ", auc " << format_number(r.auc) << ", df " << r.df << " ("
          << static_cast<int>(r.seconds) << " s)\n";
    else
      out << ": failed: " << r.error << "\n";
    out.flush();
  });
  write_study_report(report, out_dir);
  out << "oracle auc " << format_number(report.oracle_auc) << "; report in " << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_report(const fs::path& in_dir, const fs::path& out_dir, std::ostream& out) {
  const fs::path coef = in_dir / "coefficients.csv";
  const fs::path reest = in_dir / "reestimated.csv";
  const fs::path path = in_dir / "path.csv";
  if (!fs::exists(coef) && !fs::exists(path))
    throw InputError("no coefficients.csv or path.csv in '" + in_dir.string() + "'");
  ensure_dir(out_dir);
  if (fs::exists(coef)) {
    const Table c = Table::read_csv_file(coef);
    std::optional<Table> r;
    if (fs::exists(reest)) r = Table::read_csv_file(reest);
    if (r && r->rows() != c.rows()) throw InputError("reestimated.csv does not match coefficients.csv");
    Table t({"predictor", "level", "regularized", "reestimated", "fused_group", "zero"});
    const auto& pred = c.column("predictor");
    const auto& lev = c.column("level");
    const auto& val = c.column("coefficient");
    const auto& grp = c.column("fused_group");
    const auto& zero = c.column("zero");
    for (std::size_t i = 0; i < c.rows(); ++i) {
      std::string re = "";
      if (r) {
        if (r->column("predictor")[i] != pred[i] || r->column("level")[i] != lev[i])
          throw InputError("reestimated.csv rows are not aligned with coefficients.csv");
        re = r->column("coefficient")[i];
      }
      t.add_row({pred[i], lev[i], val[i], re, grp[i], zero[i]});
    }
    write_table(out_dir / "report_coefficients.csv", t);
    out << "report_coefficients.csv: " << t.rows() << " levels\n";
  }
  if (fs::exists(path)) {
    const Table p = Table::read_csv_file(path);
    Table t({"lambda", "measure", "value"});
    const auto& lambda = p.column("lambda");
    for (const char* m : {"criterion", "sd", "df"}) {
      const auto& col = p.column(m);
      for (std::size_t i = 0; i < p.rows(); ++i) t.add_row({lambda[i], m, col[i]});
    }
    write_table(out_dir / "report_path.csv", t);
    out << "report_path.csv: " << p.rows() << " lambda values\n";
  }
  return kExitOk;
}

}  // namespace

Table coefficient_table(const ModelSpec& spec, const Vector& beta, double tol) {
  if (beta.size() != spec.coefficient_count()) throw InputError("coefficient vector does not match the model");
  Table t({"predictor", "level", "coefficient", "fused_group", "zero"});
  for (std::size_t j = 0; j < spec.blocks().size(); ++j) {
    const auto& b = spec.blocks()[j];
    const auto& sl = spec.layout()[j];
    if (sl.offset == 0) {
      t.add_row({kInterceptName, "", format_number(beta[0]), "0", std::abs(beta[0]) <= tol ? "1" : "0"});
      continue;
    }
    const Vector levels = expand_levels(b, beta.segment(sl.offset, sl.size));
    std::vector<int> group(static_cast<std::size_t>(levels.size()));
    if (is_fusion(b.penalty) && b.graph)
      group = fusion_components(levels, *b.graph, tol);
    else
      std::iota(group.begin(), group.end(), 0);
    for (int l = 0; l < levels.size(); ++l)
      t.add_row({b.id, level_label(b, l), format_number(levels[l]), std::to_string(group[static_cast<std::size_t>(l)]),
                 std::abs(levels[l]) <= tol ? "1" : "0"});
  }
  return t;
}

Vector coefficients_from_table(const Table& table, const ModelSpec& spec) {
  std::map<std::pair<std::string, std::string>, double> values;
  const auto& pred = table.column("predictor");
  const auto& lev = table.column("level");
  const Vector coef = table.numeric("coefficient");
  for (std::size_t i = 0; i < table.rows(); ++i) values[{pred[i], lev[i]}] = coef[static_cast<Index>(i)];
  auto get = [&](const std::string& p, const std::string& l) {
    const auto it = values.find({p, l});
    if (it == values.end()) throw InputError("coefficient table has no row for " + p + " level '" + l + "'");
    return it->second;
  };
  Vector beta(spec.coefficient_count());
  beta[0] = get(kInterceptName, "");
  for (std::size_t j = 0; j < spec.blocks().size(); ++j) {
    const auto& b = spec.blocks()[j];
    const auto& sl = spec.layout()[j];
    if (sl.offset == 0) continue;
    for (Index k = 0; k < sl.size; ++k) beta[sl.offset + k] = get(b.id, level_label(b, b.level_of_column(k)));
  }
  return beta;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse multi-type regularized GLMs: fit, tune, simulate, study, report"};
  app.require_subcommand(1);

  std::string data, config;
  fs::path out_dir = ".";
  double lambda = 0.0;
  bool reest = false;
  int jobs = default_jobs();
  std::optional<std::string> method;
  std::optional<int> folds;
  std::optional<std::uint64_t> seed;

  auto* fit = app.add_subcommand("fit", "fit at one lambda");
  fit->add_option("--data", data, "CSV data file with a header line")->required();
  fit->add_option("--config", config, "JSON model configuration")->required();
  fit->add_option("--lambda", lambda, "regularization strength")->required()->check(CLI::NonNegativeNumber);
  fit->add_option("--out", out_dir, "output directory");
  fit->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  fit->add_flag("--reestimate", reest, "also write unpenalized re-estimated coefficients");

  auto* tun = app.add_subcommand("tune", "select lambda and fit");
  tun->add_option("--data", data, "CSV data file with a header line")->required();
  tun->add_option("--config", config, "JSON model configuration")->required();
  tun->add_option("--method", method, "in.AIC, in.BIC, out.dev, out.MSPE, out.DSS, cv or cv.1se");
  tun->add_option("--folds", folds, "cross-validation folds");
  tun->add_option("--seed", seed, "fold and split seed");
  tun->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  tun->add_option("--out", out_dir, "output directory");
  tun->add_flag("--reestimate", reest, "also write unpenalized re-estimated coefficients");

  Index sim_n = 10000;
  std::uint64_t sim_seed = 1;
  auto* sim = app.add_subcommand("simulate", "write a simulated credit-scoring data set");
  sim->add_option("--n", sim_n, "observations")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "generator seed");
  sim->add_option("--out", out_dir, "output directory");

  StudyOptions study;
  std::vector<std::string> settings;
  bool no_baseline = false;
  auto* stu = app.add_subcommand("study", "run the simulation study");
  stu->add_option("--replicates", study.replicates, "simulated training sets")->check(CLI::PositiveNumber);
  stu->add_option("--n", study.n, "training observations per replicate")->check(CLI::PositiveNumber);
  stu->add_option("--holdout", study.holdout, "hold-out observations")->check(CLI::PositiveNumber);
  stu->add_option("--settings", settings, "weights|tuning settings, e.g. ad.st|cv.1se")->delimiter(',');
  stu->add_option("--folds", study.folds, "cross-validation folds");
  stu->add_option("--grid-count", study.grid.count, "lambda grid length");
  stu->add_option("--grid-ratio", study.grid.ratio, "smallest over largest lambda");
  stu->add_option("--seed", study.seed, "study seed");
  stu->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  stu->add_option("--out", out_dir, "report directory");
  stu->add_flag("--no-baseline", no_baseline, "skip the ridge GLM baseline");

  fs::path in_dir, report_dir;
  auto* rep = app.add_subcommand("report", "plot-ready tables from fit or tune output");
  rep->add_option("--in", in_dir, "directory written by fit or tune")->required();
  rep->add_option("--out", report_dir, "output directory (default: the input directory)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*fit) return cmd_fit(data, config, lambda, out_dir, reest, out, err);
    if (*tun) return cmd_tune(data, config, method, folds, seed, jobs, out_dir, reest, out, err);
    if (*sim) return cmd_simulate(sim_n, sim_seed, out_dir, out);
    if (*stu) {
      study.jobs = jobs;
      study.baseline = !no_baseline;
      return cmd_study(study, settings, out_dir, out);
    }
    if (*rep) return cmd_report(in_dir, report_dir.empty() ? in_dir : report_dir, out);
  } catch (const SpecError& e) {
    err << "error: invalid model:\n";
    for (const auto& issue : e.issues()) err << "  " << issue << "\n";
    return kExitInput;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericError& e) {
    err << "error: numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitInput;
}

}  // namespace smurf
