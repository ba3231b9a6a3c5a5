#include "smurf/solver.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "smurf/family.hpp"

namespace smurf {

namespace {

// Standardized design applied through the raw matrix: X_std u = X (u / s) - (m . u / s).
// Mostly-zero designs (dummy coding) are held sparse.
class GlmOperator {
 public:
  explicit GlmOperator(const ModelSpec& spec)
      : family_(spec.family()),
        y_(spec.response()),
        offset_(spec.offset()),
        mean_(spec.standardization().mean),
        scale_(spec.standardization().scale),
        n_(spec.n()),
        p_(spec.p()),
        dense_(spec.X()) {
    const double nnz = static_cast<double>((spec.X().array() != 0.0).count());
    if (n_ > 0 && p_ > 0 && nnz < 0.25 * static_cast<double>(n_) * static_cast<double>(p_)) {
      sparse_ = spec.X().sparseView();
      sparse_.makeCompressed();
      use_sparse_ = true;
    }
    constant_ = loss_constant(family_, y_);
  }

  void eta(const Vector& beta, Vector& out) const {
    const Vector u = beta.tail(p_).cwiseQuotient(scale_);
    if (use_sparse_)
      out.noalias() = sparse_ * u;
    else
      out.noalias() = dense_ * u;
    out.array() += beta[0] - mean_.dot(u);
    if (offset_.size() == n_) out += offset_;
  }

  double loss(const Vector& eta) const { return loss_kernel(family_, y_, eta) + constant_; }

  void gradient(const Vector& eta, Vector& out) const {
    const Vector resid = mean_from_eta(family_, eta) - y_;
    const double inv_n = 1.0 / static_cast<double>(n_);
    const double rsum = resid.sum();
    out.resize(p_ + 1);
    out[0] = rsum * inv_n;
    if (use_sparse_)
      out.tail(p_).noalias() = sparse_.transpose() * resid;
    else
      out.tail(p_).noalias() = dense_.transpose() * resid;
    out.tail(p_) = ((out.tail(p_) - rsum * mean_).cwiseQuotient(scale_)) * inv_n;
  }

  Index n() const { return n_; }

 private:
  Family family_;
  const Vector& y_;
  const Vector& offset_;
  const Vector& mean_;
  const Vector& scale_;
  Index n_;
  Index p_;
  const Matrix& dense_;
  Eigen::SparseMatrix<double> sparse_;
  bool use_sparse_ = false;
  double constant_ = 0.0;
};

struct ProxStats {
  int calls = 0;
  int nonconverged = 0;
  int max_iterations = 0;
};

void apply_prox(const Vector& beta_tilde, const Vector& warm, double slambda, const PenaltySet& penalties,
                const std::vector<BlockSlice>& layout, const AdmmSettings& admm, Vector& out, ProxStats& stats) {
  out.resize(beta_tilde.size());
  for (std::size_t j = 0; j < penalties.size(); ++j) {
    const auto& pen = penalties[j];
    const Index off = layout[j].offset;
    const Index size = layout[j].size;
    switch (pen.kind) {
      case PenaltyKind::None:
        out.segment(off, size) = beta_tilde.segment(off, size);
        break;
      case PenaltyKind::Lasso:
        for (Index i = 0; i < size; ++i)
          out[off + i] = soft_threshold(beta_tilde[off + i], slambda * pen.weights[i]);
        break;
      case PenaltyKind::GroupLasso:
        out.segment(off, size) = group_soft_threshold(beta_tilde.segment(off, size), slambda * pen.weights[0]);
        break;
      case PenaltyKind::FusedLasso:
      case PenaltyKind::GeneralizedFusedLasso: {
        auto res = prox_gen_fused(beta_tilde.segment(off, size), pen.matrix, slambda, *pen.cache, admm,
                                  warm.segment(off, size));
        ++stats.calls;
        if (!res.report.converged) ++stats.nonconverged;
        stats.max_iterations = std::max(stats.max_iterations, res.report.iterations);
        out.segment(off, size) = res.x;
        break;
      }
    }
  }
}

void check_penalties(const ModelSpec& spec, const PenaltySet& penalties) {
  if (penalties.size() != spec.blocks().size()) throw InputError("penalty set does not match the spec's blocks");
  for (std::size_t j = 0; j < penalties.size(); ++j)
    if (penalties[j].kind != spec.blocks()[j].penalty)
      throw InputError("penalty kind mismatch for predictor '" + spec.blocks()[j].id + "'");
}

}  // namespace

void SolverSettings::validate() const {
  if (!(eps > 0.0)) throw InputError("solver eps must be positive");
  if (max_iter < 1) throw InputError("solver max_iter must be positive");
  if (!(tau > 0.0 && tau < 1.0)) throw InputError("backtracking factor tau must lie in (0, 1)");
  if (step_init && !(*step_init > 0.0 && std::isfinite(*step_init)))
    throw InputError("initial step size must be positive");
  if (!(step_floor >= 0.0)) throw InputError("step floor must be nonnegative");
  if (!(snap_tolerance >= 0.0)) throw InputError("snap tolerance must be nonnegative");
  admm.validate();
}

bool restart_check(double candidate_objective, double previous_objective, double eps) {
  return candidate_objective > previous_objective * (1.0 + eps);
}

bool restart_check(const SolverState& state, double candidate_objective, double eps) {
  if (state.objective_trace.empty()) return false;
  return restart_check(candidate_objective, state.objective_trace.back(), eps);
}

double next_alpha(double alpha) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * alpha * alpha)); }

double accelerate(SolverState& state) {
  const double alpha_next = next_alpha(state.alpha_curr);
  const double c = (state.alpha_curr - 1.0) / alpha_next;
  state.theta = state.beta_curr + c * (state.beta_curr - state.beta_prev);
  state.alpha_curr = alpha_next;
  return c;
}

double objective(const Vector& beta, const ModelSpec& spec, const PenaltySet& penalties, double lambda) {
  if (!beta.allFinite()) throw InputError("coefficients must be finite");
  if (beta.size() != spec.coefficient_count()) throw InputError("coefficient vector has the wrong length");
  check_penalties(spec, penalties);
  const Vector beta_std = standardize_coefficients(beta, spec.standardization());
  return loss(beta, spec) + lambda * penalties.total(beta_std, spec.layout());
}

FitResult smurf_fit(const ModelSpec& spec, const PenaltySet& penalties, double lambda,
                    const SolverSettings& settings, const std::optional<Vector>& beta_init) {
  settings.validate();
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be finite and nonnegative");
  check_penalties(spec, penalties);
  const Index q = spec.coefficient_count();
  const auto& layout = spec.layout();

  Vector start = Vector::Zero(q);
  if (beta_init) {
    if (beta_init->size() != q) throw InputError("initial coefficients have the wrong length");
    if (!beta_init->allFinite()) throw InputError("initial coefficients must be finite");
    start = standardize_coefficients(*beta_init, spec.standardization());
  }

  const GlmOperator op(spec);
  auto penalized = [&](const Vector& b, double f) { return f + lambda * penalties.total(b, layout); };
  auto fail = [&](int k, double s, const char* what) {
    std::ostringstream msg;
    msg << "non-finite " << what << " at iteration " << k << " (lambda " << lambda << ", step " << s << ")";
    throw NumericError(msg.str());
  };

  SolverState state;
  state.beta_curr = start;
  state.beta_prev = start;
  state.theta = start;
  state.alpha_curr = 1.0;
  state.step = settings.step_init.value_or(0.1 * static_cast<double>(spec.n()));

  Vector eta_curr, eta_prev, eta_theta, eta_new, grad, beta_tilde, beta_new, diff;
  op.eta(state.beta_curr, eta_curr);
  eta_theta = eta_curr;
  double obj_curr = penalized(state.beta_curr, op.loss(eta_curr));
  if (!std::isfinite(obj_curr)) fail(0, state.step, "objective");
  state.objective_trace.push_back(obj_curr);

  FitResult result;
  ProxStats stats;
  if (settings.record_trace) result.trace.push_back({0, obj_curr, state.step, 0});
  bool last_restarted = false;
  int k = 0;
  for (k = 1; k <= settings.max_iter; ++k) {
    const double f_theta = op.loss(eta_theta);
    op.gradient(eta_theta, grad);
    if (!std::isfinite(f_theta) || !grad.allFinite()) fail(k, state.step, "gradient");
    double f_new = 0.0;
    for (;;) {
      beta_tilde = state.theta - state.step * grad;
      apply_prox(beta_tilde, state.beta_curr, state.step * lambda, penalties, layout, settings.admm, beta_new, stats);
      op.eta(beta_new, eta_new);
      f_new = op.loss(eta_new);
      if (state.step < settings.step_floor) break;
      diff = beta_new - state.theta;
      const double model = f_theta + diff.dot(grad) + diff.squaredNorm() / (2.0 * state.step);
      // Slack of a few ulps keeps round-off from shrinking the step near convergence.
      const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(f_theta), 1.0);
      if (std::isfinite(f_new) && f_new <= model + slack) break;
      state.step *= settings.tau;
    }
    double obj_new = penalized(beta_new, f_new);
    if (!std::isfinite(obj_new)) fail(k, state.step, "objective");

    const bool restarted = restart_check(state, obj_new, settings.eps);
    if (restarted) {
      beta_new = state.beta_curr;
      eta_new = eta_curr;
      obj_new = obj_curr;
      state.alpha_curr = 0.0;
      ++state.restart_count;
    }
    const double rel = std::abs(obj_new - obj_curr) / std::max(std::abs(obj_curr), 1e-12);

    state.beta_prev.swap(state.beta_curr);
    state.beta_curr = beta_new;
    eta_prev.swap(eta_curr);
    eta_curr = eta_new;
    obj_curr = obj_new;
    state.objective_trace.push_back(obj_curr);
    if (settings.record_trace) result.trace.push_back({k, obj_curr, state.step, state.restart_count});

    // A restart iteration repeats the previous objective, so it cannot signal convergence.
    if (!restarted && rel <= settings.eps) {
      state.converged = true;
      break;
    }
    // Two restarts in a row: even a plain proximal step no longer decreases the objective.
    if (restarted && last_restarted) break;
    last_restarted = restarted;

    const double c = accelerate(state);
    eta_theta = eta_curr + c * (eta_curr - eta_prev);
  }

  Vector beta_std = state.beta_curr;
  if (settings.snap_tolerance > 0.0) beta_std = snap_coefficients(beta_std, spec.blocks(), layout, settings.snap_tolerance);
  center_free_blocks(beta_std, spec.blocks(), layout);
  op.eta(beta_std, eta_new);

  result.lambda = lambda;
  result.beta_standardized = beta_std;
  result.coefficients.beta = destandardize_coefficients(beta_std, spec.standardization());
  result.coefficients.layout = layout;
  result.objective = penalized(beta_std, op.loss(eta_new));
  result.iterations = std::min(k, settings.max_iter);
  result.converged = state.converged;
  result.step = state.step;
  result.block_penalties = penalties.block_values(beta_std, layout);
  result.restarts = state.restart_count;
  result.admm_calls = stats.calls;
  result.admm_nonconverged = stats.nonconverged;
  result.admm_max_iterations = stats.max_iterations;
  return result;
}

FitResult smurf_fit(const ModelSpec& spec, double lambda, const std::vector<Vector>& weights,
                    const SolverSettings& settings, const std::optional<Vector>& beta_init) {
  return smurf_fit(spec, make_penalties(spec, weights), lambda, settings, beta_init);
}

}  // namespace smurf
