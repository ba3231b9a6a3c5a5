#include "smurf/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>

#include "smurf/family.hpp"
#include "smurf/parallel.hpp"
#include "smurf/random.hpp"
#include "smurf/reestimate.hpp"

namespace smurf {

namespace {

enum : std::size_t { kAge, kStability, kSalary, kLoan, kSex, kProf, kDrink, kSalxLoan, kPredictorCount };

constexpr int kSalaryBands = 7;
constexpr int kLoanBands = 10;
const char* const kSalaryBandLabels[kSalaryBands] = {"1000-1400", "1500-1900", "2000-2400", "2500-2900",
                                                     "3000-3400", "3500-3900", "4000-5000"};
const char* const kLoanBandLabels[kLoanBands] = {"100-400",   "500-700",   "800-1000",  "1100-1300", "1400-1600",
                                                 "1700-1900", "2000-2200", "2300-2500", "2600-2800", "2900-3000"};

std::vector<std::string> numbered(int first, int count, int step) {
  std::vector<std::string> out;
  for (int k = 0; k < count; ++k) out.push_back(std::to_string(first + k * step));
  return out;
}

std::vector<CreditPredictor> make_predictors() {
  std::vector<CreditPredictor> p(kPredictorCount);

  auto& age = p[kAge];
  age.name = "age";
  age.levels = numbered(20, 51, 1);
  age.reference = 0;
  for (int a = 20; a <= 70; ++a) age.truth.push_back(a <= 25 ? 0.0 : a <= 40 ? 0.25 : a <= 60 ? 0.5 : 0.75);

  auto& stab = p[kStability];
  stab.name = "stability";
  stab.levels = numbered(0, 21, 1);
  stab.reference = 0;
  for (int s = 0; s <= 20; ++s) stab.truth.push_back(s <= 2 ? 0.0 : s <= 6 ? 0.3 : 0.5);

  auto& sal = p[kSalary];
  sal.name = "salary";
  sal.levels = numbered(1000, 41, 100);
  sal.reference = 0;
  for (int i = 0; i < 41; ++i) sal.truth.push_back(i < 10 ? 0.0 : i < 20 ? 0.4 : i < 30 ? 0.6 : 1.0);

  auto& loan = p[kLoan];
  loan.name = "loan";
  loan.levels = numbered(100, 30, 100);
  loan.reference = 0;
  for (int i = 0; i < 30; ++i) loan.truth.push_back(-0.2 * static_cast<double>(i / 5));

  for (auto* q : {&age, &stab, &sal, &loan}) {
    q->penalty = PenaltyKind::FusedLasso;
    q->graph = Graph::chain(static_cast<int>(q->levels.size()));
  }

  auto& sex = p[kSex];
  sex.name = "sex";
  sex.levels = {"female", "male"};
  sex.penalty = PenaltyKind::Lasso;
  sex.reference = 0;
  sex.truth = {0.0, -0.3};

  auto& prof = p[kProf];
  prof.name = "prof";
  prof.levels = numbered(1, 10, 1);
  prof.penalty = PenaltyKind::GeneralizedFusedLasso;
  prof.graph = Graph::complete(10);
  prof.reference = 0;
  //            1    2    3    4     5     6    7    8     9    10
  prof.truth = {0.0, 0.5, 0.0, 0.25, 0.25, 0.5, 0.0, 0.25, 0.5, 0.25};

  auto& drink = p[kDrink];
  drink.name = "drink";
  drink.levels = numbered(1, 5, 1);
  drink.penalty = PenaltyKind::GroupLasso;
  drink.truth.assign(5, 0.0);

  auto& inter = p[kSalxLoan];
  inter.name = "salxloan";
  inter.penalty = PenaltyKind::GeneralizedFusedLasso;
  inter.graph = Graph::grid(kSalaryBands, kLoanBands);
  for (int r = 0; r < kSalaryBands; ++r)
    for (int c = 0; c < kLoanBands; ++c) {
      inter.levels.push_back(std::string(kSalaryBandLabels[r]) + ":" + kLoanBandLabels[c]);
      // high income (>= 3500) with high loan payments (>= 2000)
      inter.truth.push_back(r >= 5 && c >= 6 ? 0.5 : 0.0);
    }
  return p;
}

int column_count(const CreditPredictor& p) {
  return static_cast<int>(p.levels.size()) - (p.reference ? 1 : 0);
}

int column_of(const CreditPredictor& p, int level) {
  if (!p.reference) return level;
  return level > *p.reference ? level - 1 : level;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

ReplicateRecord make_record(std::string setting, int replicate) {
  ReplicateRecord r;
  r.setting = std::move(setting);
  r.replicate = replicate;
  return r;
}

void open_for_write(std::ofstream& out, const std::filesystem::path& path) {
  out.open(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
}

}  // namespace

const std::vector<CreditPredictor>& SimulationScenario::predictors() {
  static const std::vector<CreditPredictor> p = make_predictors();
  return p;
}

int SimulationScenario::salary_band(int salary_level) { return std::min(salary_level / 5, kSalaryBands - 1); }

int SimulationScenario::loan_band(int loan_level) {
  if (loan_level < 4) return 0;
  return std::min((loan_level - 4) / 3 + 1, kLoanBands - 1);
}

Vector SimulationScenario::true_beta() {
  const auto& preds = predictors();
  Index total = 1;
  for (const auto& p : preds) total += column_count(p);
  Vector beta = Vector::Zero(total);
  Index offset = 1;
  for (const auto& p : preds) {
    for (int l = 0; l < static_cast<int>(p.levels.size()); ++l)
      if (!p.reference || l != *p.reference) beta[offset + column_of(p, l)] = p.truth[static_cast<std::size_t>(l)];
    offset += column_count(p);
  }
  return beta;
}

CreditData simulate_credit_data(const SimulationScenario& scenario) {
  if (scenario.n < 1) throw InputError("simulation needs at least one observation");
  const auto& preds = SimulationScenario::predictors();
  Rng rng(scenario.seed);
  CreditData d;
  d.levels.assign(kPredictorCount, std::vector<int>(static_cast<std::size_t>(scenario.n)));
  d.paid.resize(scenario.n);
  auto draw = [&](std::size_t j) { return static_cast<int>(draw_below(rng, preds[j].levels.size())); };
  for (Index i = 0; i < scenario.n; ++i) {
    const auto row = static_cast<std::size_t>(i);
    const int age = draw(kAge);
    int stab = draw(kStability);
    // nobody works before 18: stability <= age - 18
    while (stab > age + 2) stab = draw(kStability);
    const int sal = draw(kSalary);
    const int loan = draw(kLoan);
    const int levels[kPredictorCount] = {
        age, stab, sal, loan, draw(kSex), draw(kProf), draw(kDrink),
        SimulationScenario::salary_band(sal) * kLoanBands + SimulationScenario::loan_band(loan)};
    double eta = 0.0;
    for (std::size_t j = 0; j < kPredictorCount; ++j) {
      d.levels[j][row] = levels[j];
      eta += preds[j].truth[static_cast<std::size_t>(levels[j])];
    }
    const double p = 1.0 / (1.0 + std::exp(-eta));
    d.paid[i] = uniform01(rng) < p ? 1.0 : 0.0;
  }
  return d;
}

std::vector<PredictorBlock> credit_blocks() {
  std::vector<PredictorBlock> blocks{PredictorBlock::intercept()};
  Index first = 0;
  for (const auto& p : SimulationScenario::predictors()) {
    PredictorBlock b;
    b.id = p.name;
    b.first_column = first;
    b.column_count = column_count(p);
    b.penalty = p.penalty;
    b.graph = p.graph;
    b.reference_level = p.reference;
    b.dummy_coded = true;
    b.level_labels = p.levels;
    blocks.push_back(std::move(b));
    first += column_count(p);
  }
  return blocks;
}

DesignMatrix credit_design(const CreditData& data) {
  const auto& preds = SimulationScenario::predictors();
  if (data.levels.size() != kPredictorCount) throw InputError("credit data needs one level vector per predictor");
  Index p = 0;
  for (const auto& q : preds) p += column_count(q);
  DesignMatrix d;
  d.values = Matrix::Zero(data.n(), p);
  d.offset = Vector::Zero(data.n());
  Index first = 0;
  for (std::size_t j = 0; j < kPredictorCount; ++j) {
    const auto& q = preds[j];
    for (int l = 0; l < static_cast<int>(q.levels.size()); ++l)
      if (!q.reference || l != *q.reference) d.columns.push_back({q.name, q.levels[static_cast<std::size_t>(l)]});
    for (Index i = 0; i < data.n(); ++i) {
      const int l = data.levels[j][static_cast<std::size_t>(i)];
      if (q.reference && l == *q.reference) continue;
      d.values(i, first + column_of(q, l)) = 1.0;
    }
    first += column_count(q);
  }
  return d;
}

ModelSpec credit_spec(const CreditData& data) {
  return validate_spec(credit_design(data), data.paid, Family::Binomial, credit_blocks());
}

std::pair<DesignMatrix, Vector> simulate_credit_dataset(const SimulationScenario& scenario) {
  auto data = simulate_credit_data(scenario);
  return {credit_design(data), std::move(data.paid)};
}

Table credit_table(const CreditData& data) {
  const auto& preds = SimulationScenario::predictors();
  std::vector<std::string> header;
  for (const auto& q : preds) header.push_back(q.name);
  header.push_back("paid");
  Table t(header);
  for (Index i = 0; i < data.n(); ++i) {
    std::vector<std::string> row;
    for (std::size_t j = 0; j < preds.size(); ++j)
      row.push_back(preds[j].levels[static_cast<std::size_t>(data.levels[j][static_cast<std::size_t>(i)])]);
    row.push_back(data.paid[i] > 0.5 ? "1" : "0");
    t.add_row(std::move(row));
  }
  return t;
}

ModelConfig credit_config() {
  ModelConfig c;
  c.family = Family::Binomial;
  c.response = "paid";
  c.weights = WeightScheme::Combined;
  c.method = TuningMethod::CV1se;
  c.tuning.scheme = c.weights;
  for (const auto& q : SimulationScenario::predictors()) {
    PredictorConfig p;
    p.name = q.name;
    p.type = PredictorConfig::Type::Factor;
    p.column = q.name;
    p.levels = q.levels;
    p.penalty = q.penalty;
    if (q.reference) p.reference = q.levels[static_cast<std::size_t>(*q.reference)];
    if (q.graph) {
      GraphConfig g;
      if (q.graph->kind() == Graph::Kind::Grid) {
        g.type = "grid";
        g.rows = q.graph->grid_rows();
        g.cols = q.graph->grid_cols();
      } else {
        g.type = q.graph->kind() == Graph::Kind::Complete ? "complete" : "chain";
      }
      p.graph = g;
    }
    c.predictors.push_back(std::move(p));
  }
  return c;
}

double coefficient_mse(const Vector& beta_hat, const Vector& beta_true) {
  if (beta_hat.size() != beta_true.size() || beta_true.size() == 0)
    throw InputError("coefficient vectors differ in length");
  return (beta_hat - beta_true).squaredNorm() / static_cast<double>(beta_true.size());
}

std::vector<SelectionRates> fpr_fnr(const Vector& beta_hat, const Vector& beta_true,
                                    const std::vector<PredictorBlock>& blocks, const std::vector<BlockSlice>& layout,
                                    double tol) {
  if (beta_hat.size() != beta_true.size()) throw InputError("coefficient vectors differ in length");
  std::vector<SelectionRates> out;
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto& b = blocks[j];
    if (b.penalty == PenaltyKind::None) continue;
    const auto& sl = layout[j];
    std::vector<double> est, truth;
    if (is_fusion(b.penalty) && b.graph) {
      const Vector e = expand_levels(b, beta_hat.segment(sl.offset, sl.size));
      const Vector t = expand_levels(b, beta_true.segment(sl.offset, sl.size));
      for (const auto& edge : b.graph->edges()) {
        est.push_back(e[edge.second] - e[edge.first]);
        truth.push_back(t[edge.second] - t[edge.first]);
      }
    } else {
      for (Index k = 0; k < sl.size; ++k) {
        est.push_back(beta_hat[sl.offset + k]);
        truth.push_back(beta_true[sl.offset + k]);
      }
    }
    SelectionRates r;
    r.predictor = b.id;
    int fp = 0, fn = 0;
    for (std::size_t k = 0; k < est.size(); ++k) {
      const bool true_zero = std::abs(truth[k]) <= tol;
      const bool est_zero = std::abs(est[k]) <= tol;
      if (true_zero) {
        ++r.true_zero;
        if (!est_zero) ++fp;
      } else {
        ++r.true_nonzero;
        if (est_zero) ++fn;
      }
    }
    r.fpr = r.true_zero > 0 ? static_cast<double>(fp) / r.true_zero : 0.0;
    r.fnr = r.true_nonzero > 0 ? static_cast<double>(fn) / r.true_nonzero : 0.0;
    out.push_back(r);
  }
  return out;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw InputError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  double pos = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] != 0) {
        rank_sum += midrank;
        pos += 1.0;
      }
    i = j;
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) throw InputError("AUC needs both classes");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double lorenz_aucc(const std::vector<double>& predictions, const std::vector<double>& observed) {
  if (predictions.size() != observed.size()) throw InputError("predictions and counts differ in length");
  if (predictions.empty()) throw InputError("no observations");
  double total = 0.0;
  for (double y : observed) {
    if (!(y >= 0.0)) throw InputError("observed counts must be nonnegative");
    total += y;
  }
  if (!(total > 0.0)) throw InputError("observed counts are all zero");
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return predictions[a] > predictions[b]; });
  const double step = 1.0 / static_cast<double>(order.size());
  double area = 0.0, captured = 0.0;
  for (std::size_t i : order) {
    const double next = captured + observed[i] / total;
    area += 0.5 * step * (captured + next);
    captured = next;
  }
  return area;
}

std::string StudySetting::label() const {
  return std::string(to_string(scheme)) + "|" + std::string(to_string(method));
}

StudySetting parse_study_setting(std::string_view label) {
  const auto bar = label.find('|');
  if (bar == std::string_view::npos) throw InputError("setting '" + std::string(label) + "' is not of the form w|t");
  return {parse_weight_scheme(label.substr(0, bar)), parse_tuning_method(label.substr(bar + 1))};
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<double> StudyReport::metric(const std::string& setting,
                                        const std::function<double(const ReplicateRecord&)>& f) const {
  std::vector<double> out;
  for (const auto& r : records)
    if (r.ok && r.setting == setting) out.push_back(f(r));
  return out;
}

StudyReport run_study(const StudyOptions& options, const StudyProgress& progress) {
  if (options.replicates < 1) throw InputError("a study needs at least one replicate");
  if (options.n < 2 || options.holdout < 2) throw InputError("study sample sizes are too small");
  StudyReport report;
  report.options = options;

  const auto holdout = simulate_credit_data({options.holdout, mix_seed(options.seed, 0)});
  const DesignMatrix hold_design = credit_design(holdout);
  std::vector<int> hold_labels(static_cast<std::size_t>(holdout.n()));
  for (Index i = 0; i < holdout.n(); ++i) hold_labels[static_cast<std::size_t>(i)] = holdout.paid[i] > 0.5;
  const Vector truth = SimulationScenario::true_beta();
  auto holdout_auc = [&](const Vector& beta) {
    const Vector mu = predict_mean(beta, hold_design, Family::Binomial);
    return roc_auc(std::vector<double>(mu.data(), mu.data() + mu.size()), hold_labels);
  };
  report.oracle_auc = holdout_auc(truth);

  const int inner_jobs = std::max(1, options.jobs / options.replicates);
  std::mutex mutex;
  auto record = [&](ReplicateRecord r) {
    std::lock_guard<std::mutex> lock(mutex);
    if (!r.ok) report.log.push_back(r.setting + " replicate " + std::to_string(r.replicate) + ": " + r.error);
    if (progress) progress(r);
    report.records.push_back(std::move(r));
  };

  parallel_for(static_cast<std::size_t>(options.replicates), options.jobs, [&](std::size_t rep) {
    const int replicate = static_cast<int>(rep) + 1;
    std::optional<ModelSpec> spec;
    try {
      spec = credit_spec(simulate_credit_data({options.n, mix_seed(options.seed, static_cast<std::uint64_t>(replicate))}));
    } catch (const std::exception& e) {
      for (const auto& s : options.settings) {
        auto r = make_record(s.label(), replicate);
        r.error = e.what();
        record(std::move(r));
      }
      return;
    }

    if (options.baseline) {
      auto r = make_record(kBaselineLabel, replicate);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const Vector beta = irls_fit(*spec, options.baseline_ridge).beta;
        r.mse = coefficient_mse(beta, truth);
        r.auc = holdout_auc(beta);
        r.df = static_cast<double>(truth.size());
        r.lambda = options.baseline_ridge;
        r.rates = fpr_fnr(beta, truth, spec->blocks(), spec->layout());
        r.ok = true;
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      record(std::move(r));
    }

    for (const auto& setting : options.settings) {
      auto r = make_record(setting.label(), replicate);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        TuningOptions t;
        t.scheme = setting.scheme;
        t.grid = options.grid;
        t.folds = options.folds;
        t.seed = mix_seed(options.seed, 1000 + static_cast<std::uint64_t>(replicate));
        t.solver = options.solver;
        t.solver.record_trace = false;
        t.jobs = inner_jobs;
        const auto tuned = tune(*spec, setting.method, t);
        const auto re = reestimate(*spec, tuned.final_fit);
        const Vector& regularized = tuned.final_fit.coefficients.beta;
        r.mse = coefficient_mse(re.coefficients.beta, truth);
        r.auc = holdout_auc(re.coefficients.beta);
        r.df = df_estimate(regularized, spec->blocks(), spec->layout());
        r.lambda = tuned.selected_lambda;
        r.nonconverged = tuned.nonconverged_fits + (tuned.final_fit.converged ? 0 : 1);
        r.rates = fpr_fnr(regularized, truth, spec->blocks(), spec->layout());
        r.ok = true;
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      record(std::move(r));
    }
  });

  std::vector<std::string> order;
  if (options.baseline) order.push_back(kBaselineLabel);
  for (const auto& s : options.settings) order.push_back(s.label());
  auto rank = [&](const std::string& label) { return std::find(order.begin(), order.end(), label) - order.begin(); };
  std::stable_sort(report.records.begin(), report.records.end(), [&](const ReplicateRecord& a, const ReplicateRecord& b) {
    if (rank(a.setting) != rank(b.setting)) return rank(a.setting) < rank(b.setting);
    return a.replicate < b.replicate;
  });
  return report;
}

void write_study_report(const StudyReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create '" + dir.string() + "': " + ec.message());
  const auto& o = report.options;

  {
    std::ofstream out;
    open_for_write(out, dir / "study.txt");
    out << "credit scoring simulation study\n"
        << "training observations per replicate: " << o.n << "\n"
        << "hold-out observations: " << o.holdout << "\n"
        << "replicates: " << o.replicates << "\n"
        << "full scale of the reference study: 80000 training, 20000 hold-out, 100 replicates\n"
        << "folds: " << o.folds << ", lambda grid: " << o.grid.count << " values, ratio " << o.grid.ratio << "\n"
        << "seed: " << o.seed << "\n"
        << "oracle hold-out AUC (true coefficients): " << format_double(report.oracle_auc) << "\n";
  }

  auto scalar_file = [&](const char* name, const std::function<double(const ReplicateRecord&)>& f) {
    std::ofstream out;
    open_for_write(out, dir / name);
    out << "setting,replicate,value\n";
    for (const auto& r : report.records)
      if (r.ok) out << r.setting << "," << r.replicate << "," << format_double(f(r)) << "\n";
  };
  scalar_file("mse.csv", [](const ReplicateRecord& r) { return r.mse; });
  scalar_file("auc.csv", [](const ReplicateRecord& r) { return r.auc; });
  scalar_file("df.csv", [](const ReplicateRecord& r) { return r.df; });
  scalar_file("lambda.csv", [](const ReplicateRecord& r) { return r.lambda; });
  scalar_file("seconds.csv", [](const ReplicateRecord& r) { return r.seconds; });

  auto rate_file = [&](const char* name, bool fpr) {
    std::ofstream out;
    open_for_write(out, dir / name);
    out << "setting,replicate,predictor,value\n";
    for (const auto& r : report.records)
      if (r.ok)
        for (const auto& s : r.rates)
          out << r.setting << "," << r.replicate << "," << s.predictor << "," << format_double(fpr ? s.fpr : s.fnr)
              << "\n";
  };
  rate_file("fpr.csv", true);
  rate_file("fnr.csv", false);

  {
    std::ofstream out;
    open_for_write(out, dir / "summary.csv");
    out << "setting,metric,median,replicates\n";
    std::vector<std::string> settings;
    for (const auto& r : report.records)
      if (std::find(settings.begin(), settings.end(), r.setting) == settings.end()) settings.push_back(r.setting);
    for (const auto& s : settings) {
      auto line = [&](const std::string& metric, const std::vector<double>& v) {
        out << s << "," << metric << "," << format_double(median(v)) << "," << v.size() << "\n";
      };
      line("mse", report.metric(s, [](const ReplicateRecord& r) { return r.mse; }));
      line("auc", report.metric(s, [](const ReplicateRecord& r) { return r.auc; }));
      line("df", report.metric(s, [](const ReplicateRecord& r) { return r.df; }));
      std::vector<std::string> names;
      for (const auto& r : report.records)
        if (r.ok && r.setting == s)
          for (const auto& x : r.rates)
            if (std::find(names.begin(), names.end(), x.predictor) == names.end()) names.push_back(x.predictor);
      for (const auto& name : names) {
        auto rate = [&](bool fpr) {
          return report.metric(s, [&](const ReplicateRecord& r) {
            for (const auto& x : r.rates)
              if (x.predictor == name) return fpr ? x.fpr : x.fnr;
            return std::nan("");
          });
        };
        line("fpr_" + name, rate(true));
        line("fnr_" + name, rate(false));
      }
    }
    out << "oracle,auc," << format_double(report.oracle_auc) << ",1\n";
  }

  {
    std::ofstream out;
    open_for_write(out, dir / "failures.csv");
    out << "setting,replicate,error\n";
    for (const auto& r : report.records)
      if (!r.ok) {
        std::string msg = r.error;
        std::replace(msg.begin(), msg.end(), '"', '\'');
        out << r.setting << "," << r.replicate << ",\"" << msg << "\"\n";
      }
  }
}

}  // namespace smurf
