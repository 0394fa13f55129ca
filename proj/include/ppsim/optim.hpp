#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ppsim/types.hpp"

namespace ppsim {

// ----------------------------------------------------------------------------
// Synthetic objectives: smooth, bounded below, with a certified smoothness
// constant so step-size preconditions are checkable rather than assumed.

struct Objective {
  enum class Kind { Quadratic, SmoothNonconvex };

  Kind kind = Kind::Quadratic;
  int dimension = 1;
  std::vector<double> matrix;  // Quadratic: row-major symmetric PSD, F = x'Ax/2
  double smoothness = 1.0;     // L
  double lower_bound = 0.0;    // F*

  static Objective quadratic(std::vector<double> diag) {
    Objective o;
    o.kind = Kind::Quadratic;
    o.dimension = static_cast<int>(diag.size());
    o.matrix.assign(static_cast<std::size_t>(o.dimension) *
                        static_cast<std::size_t>(o.dimension),
                    0.0);
    double mx = 0.0;
    for (int k = 0; k < o.dimension; ++k) {
      if (diag[static_cast<std::size_t>(k)] <= 0.0)
        throw std::invalid_argument("quadratic spectrum must be positive");
      o.matrix[static_cast<std::size_t>(k) * static_cast<std::size_t>(o.dimension) +
               static_cast<std::size_t>(k)] = diag[static_cast<std::size_t>(k)];
      mx = std::max(mx, diag[static_cast<std::size_t>(k)]);
    }
    o.smoothness = mx;
    o.lower_bound = 0.0;
    return o;
  }

  static Objective quadratic_identity(int p) {
    return quadratic(std::vector<double>(static_cast<std::size_t>(p), 1.0));
  }

  // F(x) = sum_k log cosh(x_k) + 0.1 ||x||^2 / 2: globally smooth with
  // L = 1.1 (sech^2 <= 1 plus the 0.1 ridge), minimized at 0 with F* = 0.
  static Objective smooth_nonconvex(int p) {
    Objective o;
    o.kind = Kind::SmoothNonconvex;
    o.dimension = p;
    o.smoothness = 1.1;
    o.lower_bound = 0.0;
    return o;
  }

  double value(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != dimension)
      throw std::invalid_argument("objective dimension mismatch");
    if (kind == Kind::Quadratic) {
      double s = 0.0;
      for (int r = 0; r < dimension; ++r) {
        double row = 0.0;
        for (int c = 0; c < dimension; ++c)
          row += matrix[static_cast<std::size_t>(r) * static_cast<std::size_t>(dimension) +
                        static_cast<std::size_t>(c)] *
                 x[static_cast<std::size_t>(c)];
        s += x[static_cast<std::size_t>(r)] * row;
      }
      return 0.5 * s;
    }
    double s = 0.0;
    for (double v : x) s += std::log(std::cosh(v)) + 0.05 * v * v;
    return s;
  }

  void gradient(const std::vector<double>& x, std::vector<double>& out) const {
    if (static_cast<int>(x.size()) != dimension)
      throw std::invalid_argument("objective dimension mismatch");
    out.assign(static_cast<std::size_t>(dimension), 0.0);
    if (kind == Kind::Quadratic) {
      for (int r = 0; r < dimension; ++r) {
        double row = 0.0;
        for (int c = 0; c < dimension; ++c)
          row += matrix[static_cast<std::size_t>(r) * static_cast<std::size_t>(dimension) +
                        static_cast<std::size_t>(c)] *
                 x[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = row;
      }
      return;
    }
    for (int k = 0; k < dimension; ++k)
      out[static_cast<std::size_t>(k)] =
          std::tanh(x[static_cast<std::size_t>(k)]) + 0.1 * x[static_cast<std::size_t>(k)];
  }
};

// ----------------------------------------------------------------------------
// Reproducible Gaussian gradient noise. Draws are indexed by (step,
// coordinate) through a fixed-order Box-Muller stream, so two runs built from
// the same model consume bit-identical noise at the same step regardless of
// where they evaluate the gradient (common random numbers).

struct NoiseModel {
  double variance = 0.0;  // sigma^2
  std::uint64_t seed = 0;
};

class NoiseStream {
 public:
  explicit NoiseStream(const NoiseModel& m) : rng_(m.seed), sigma_(std::sqrt(m.variance)) {}

  double next() {
    if (sigma_ == 0.0) return 0.0;
    if (have_spare_) {
      have_spare_ = false;
      return spare_ * sigma_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a) * sigma_;
  }

  void fill(std::vector<double>& buf) {
    for (double& v : buf) v = next();
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  double sigma_ = 0.0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// ----------------------------------------------------------------------------
// Optimizer family: theta' = theta - eta * P * m, covering plain SGD
// (m = g, P = I), EMA momentum, and clamped adaptive preconditioning.

struct OptimizerSpec {
  enum class Kind { SGD, Momentum, AdamType };

  Kind kind = Kind::SGD;
  double eta = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-3;
  double clamp_min = 1e-8;  // preconditioner diagonal bounds [c_min, c_max]
  double clamp_max = 1e6;
  std::optional<double> clip_norm;  // optional gradient-norm cap

  static OptimizerSpec sgd(double eta) {
    OptimizerSpec s;
    s.kind = Kind::SGD;
    s.eta = eta;
    return s;
  }
  static OptimizerSpec momentum(double eta, double beta1 = 0.9) {
    OptimizerSpec s;
    s.kind = Kind::Momentum;
    s.eta = eta;
    s.beta1 = beta1;
    return s;
  }
  static OptimizerSpec adam_type(double eta, double beta1 = 0.9, double beta2 = 0.999,
                                 double epsilon = 1e-3) {
    OptimizerSpec s;
    s.kind = Kind::AdamType;
    s.eta = eta;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    return s;
  }
};

struct OptRunTrace {
  std::vector<std::vector<double>> iterates;  // theta_0 .. theta_T
  std::vector<double> grad_sq;                // ||grad F(theta_t)||^2, t = 0..T-1
  std::vector<double> objective;              // F(theta_t), t = 0..T-1
  std::vector<double> delta_norm;             // filled for paired runs
  bool diverged = false;
  int steps = 0;
  double precond_min_seen = 0.0;
  double precond_max_seen = 0.0;
};

using DelaySchedule = std::function<int(int)>;

inline DelaySchedule unit_delay() {
  return [](int t) { return t >= 1 ? 1 : 0; };
}
inline DelaySchedule zero_delay() {
  return [](int) { return 0; };
}

namespace detail {

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

struct OptState {
  std::vector<double> m, v;

  void init(int p) {
    m.assign(static_cast<std::size_t>(p), 0.0);
    v.assign(static_cast<std::size_t>(p), 0.0);
  }
};

// One update from gradient g; returns the step applied to theta in place and
// tracks the preconditioner range actually used.
inline void apply_update(const OptimizerSpec& opt, OptState& st, std::vector<double>& theta,
                         std::vector<double> g, double& pmin_seen, double& pmax_seen) {
  if (opt.clip_norm) {
    const double n = norm2(g);
    if (n > *opt.clip_norm && n > 0.0)
      for (double& x : g) x *= *opt.clip_norm / n;
  }
  const std::size_t p = theta.size();
  switch (opt.kind) {
    case OptimizerSpec::Kind::SGD:
      for (std::size_t k = 0; k < p; ++k) theta[k] -= opt.eta * g[k];
      pmin_seen = std::min(pmin_seen, 1.0);
      pmax_seen = std::max(pmax_seen, 1.0);
      break;
    case OptimizerSpec::Kind::Momentum:
      for (std::size_t k = 0; k < p; ++k) {
        st.m[k] = opt.beta1 * st.m[k] + (1.0 - opt.beta1) * g[k];
        theta[k] -= opt.eta * st.m[k];
      }
      pmin_seen = std::min(pmin_seen, 1.0);
      pmax_seen = std::max(pmax_seen, 1.0);
      break;
    case OptimizerSpec::Kind::AdamType:
      for (std::size_t k = 0; k < p; ++k) {
        st.m[k] = opt.beta1 * st.m[k] + (1.0 - opt.beta1) * g[k];
        st.v[k] = opt.beta2 * st.v[k] + (1.0 - opt.beta2) * g[k] * g[k];
        double pre = 1.0 / (std::sqrt(st.v[k]) + opt.epsilon);
        pre = std::clamp(pre, opt.clamp_min, opt.clamp_max);
        pmin_seen = std::min(pmin_seen, pre);
        pmax_seen = std::max(pmax_seen, pre);
        theta[k] -= opt.eta * pre * st.m[k];
      }
      break;
  }
}

inline OptRunTrace run_impl(const Objective& obj, const NoiseModel& noise,
                            const OptimizerSpec& opt, const std::vector<double>& theta0, int T,
                            const DelaySchedule* delay) {
  if (opt.eta <= 0.0) throw std::invalid_argument("step size must be positive");
  if (T < 0) throw std::invalid_argument("step count must be nonnegative");
  if (delay && (*delay)(0) != 0)
    throw std::invalid_argument("delay schedule must start at zero");
  const double guard = 1e6 * norm2(theta0) + 1e6;
  NoiseStream stream(noise);
  OptRunTrace tr;
  tr.precond_min_seen = 1e300;
  tr.precond_max_seen = -1e300;
  tr.iterates.reserve(static_cast<std::size_t>(T) + 1);
  tr.iterates.push_back(theta0);
  OptState st;
  st.init(obj.dimension);
  std::vector<double> g, noisy(static_cast<std::size_t>(obj.dimension));
  for (int t = 0; t < T; ++t) {
    const std::vector<double>& cur = tr.iterates.back();
    obj.gradient(cur, g);
    double gs = 0.0;
    for (double x : g) gs += x * x;
    tr.grad_sq.push_back(gs);
    tr.objective.push_back(obj.value(cur));
    int tau = 0;
    if (delay) {
      tau = (*delay)(t);
      if (tau != 0 && tau != 1)
        throw std::invalid_argument("delay schedule must return 0 or 1");
      if (tau > t) tau = t;
    }
    if (tau != 0) {
      const auto& past = tr.iterates[static_cast<std::size_t>(t - tau)];
      obj.gradient(past, g);
    }
    stream.fill(noisy);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += noisy[k];
    std::vector<double> next = cur;
    apply_update(opt, st, next, g, tr.precond_min_seen, tr.precond_max_seen);
    if (norm2(next) > guard) {
      tr.diverged = true;
      break;
    }
    tr.iterates.push_back(std::move(next));
    ++tr.steps;
  }
  return tr;
}

}  // namespace detail

// T steps of theta' = theta - eta P m using the gradient at the current
// iterate (the synchronous reference trajectory).
inline OptRunTrace run_sync(const Objective& obj, const NoiseModel& noise,
                            const OptimizerSpec& opt, const std::vector<double>& theta0,
                            int T) {
  return detail::run_impl(obj, noise, opt, theta0, T, nullptr);
}

// Same recursions, but step t evaluates the gradient at theta_{t - tau(t)}
// while consuming the same noise draw index t as the paired synchronous run.
inline OptRunTrace run_delayed(const Objective& obj, const NoiseModel& noise,
                               const OptimizerSpec& opt, const std::vector<double>& theta0,
                               int T, const DelaySchedule& delay) {
  return detail::run_impl(obj, noise, opt, theta0, T, &delay);
}

// Paired run: shared noise, delayed minus sync discrepancy norms per step.
inline std::pair<OptRunTrace, OptRunTrace> run_paired(const Objective& obj,
                                                      const NoiseModel& noise,
                                                      const OptimizerSpec& opt,
                                                      const std::vector<double>& theta0, int T,
                                                      const DelaySchedule& delay) {
  OptRunTrace sync = run_sync(obj, noise, opt, theta0, T);
  OptRunTrace del = run_delayed(obj, noise, opt, theta0, T, delay);
  const std::size_t n = std::min(sync.iterates.size(), del.iterates.size());
  del.delta_norm.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    double s = 0.0;
    for (std::size_t k = 0; k < sync.iterates[t].size(); ++k) {
      const double dlt = del.iterates[t][k] - sync.iterates[t][k];
      s += dlt * dlt;
    }
    del.delta_norm[t] = std::sqrt(s);
  }
  return {std::move(sync), std::move(del)};
}

struct ScalingFit {
  double slope = 0.0;
  double residual = 0.0;  // RMS of log-space fit residuals
  bool exact_zero = false;
  std::vector<std::pair<double, double>> points;          // (eta, mean max ||Delta||)
  std::vector<std::pair<double, std::uint64_t>> excluded;  // diverged (eta, seed)
};

// One-step-delay discrepancy versus step size: runs paired trajectories per
// (eta, seed) with shared noise, averages max_t ||Delta_t|| over seeds, and
// fits the log-log slope. A slope near 1 matches the squared-discrepancy
// growing as the square of the step size.
inline ScalingFit discrepancy_scaling(const Objective& obj, const OptimizerSpec& family,
                                      const std::vector<double>& etas, int T,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::vector<double>& theta0, double sigma2,
                                      const DelaySchedule& delay = unit_delay()) {
  if (etas.size() < 3) throw std::invalid_argument("need at least 3 step sizes");
  if (seeds.empty()) throw std::invalid_argument("need at least one seed");
  double lo = etas[0], hi = etas[0];
  for (double e : etas) {
    if (e <= 0.0 || e * obj.smoothness > 1.0 + 1e-12)
      throw std::invalid_argument("every step size must be positive with eta*L <= 1");
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  if (hi < 4.0 * lo) throw std::invalid_argument("step sizes must span at least a 4x range");
  ScalingFit fit;
  bool all_zero = true;
  for (double eta : etas) {
    OptimizerSpec opt = family;
    opt.eta = eta;
    double acc = 0.0;
    int used = 0;
    for (std::uint64_t seed : seeds) {
      NoiseModel nm{sigma2, seed};
      auto [sync, del] = run_paired(obj, nm, opt, theta0, T, delay);
      if (sync.diverged || del.diverged) {
        fit.excluded.push_back({eta, seed});
        continue;
      }
      double mx = 0.0;
      for (double v : del.delta_norm) mx = std::max(mx, v);
      acc += mx;
      ++used;
    }
    const double mean = used > 0 ? acc / used : 0.0;
    if (mean > 0.0) all_zero = false;
    fit.points.push_back({eta, mean});
  }
  if (all_zero) {
    fit.exact_zero = true;
    return fit;
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (const auto& [eta, y] : fit.points) {
    if (y <= 0.0) continue;
    const double lx = std::log(eta), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) throw std::runtime_error("not enough usable points for a fit");
  const double denom = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - fit.slope * sx) / n;
  double ss = 0.0;
  for (const auto& [eta, y] : fit.points) {
    if (y <= 0.0) continue;
    const double r = std::log(y) - (intercept + fit.slope * std::log(eta));
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double constant_c = 0.0;  // calibrated second-order coefficient
  bool pass = false;
};

// Averaged-gradient-norm bound for the one-step-delayed run:
//   (1/T) sum E||grad F(theta_t)||^2 <= 2(F(theta_0)-F*)/(eta T)
//                                        + eta L sigma^2 + C eta^2.
// The second-order coefficient C is not specified analytically; it is
// calibrated once as 10x the largest eta-normalized residual the synchronous
// baseline shows on the calibration grid, then held fixed for the check.
inline BoundCheck check_convergence_bound(const Objective& obj, const NoiseModel& noise,
                                          const OptimizerSpec& opt,
                                          const std::vector<double>& theta0, double eta, int T,
                                          int num_seeds = 20) {
  if (eta <= 0.0 || eta * obj.smoothness > 1.0 + 1e-12)
    throw std::invalid_argument("requires a positive step size with eta*L <= 1");
  if (T <= 0) throw std::invalid_argument("requires at least one step");
  if (num_seeds < 1) throw std::invalid_argument("requires at least one seed");
  const double f_gap = obj.value(theta0) - obj.lower_bound;
  auto mean_grad_sq = [&](double step, bool delayed) {
    double acc = 0.0;
    for (int s = 0; s < num_seeds; ++s) {
      OptimizerSpec o = opt;
      o.eta = step;
      NoiseModel nm{noise.variance, noise.seed + static_cast<std::uint64_t>(s)};
      OptRunTrace tr = delayed ? run_delayed(obj, nm, o, theta0, T, unit_delay())
                               : run_sync(obj, nm, o, theta0, T);
      if (tr.diverged) throw std::runtime_error("trajectory diverged during bound check");
      double sum = 0.0;
      for (double v : tr.grad_sq) sum += v;
      acc += sum / static_cast<double>(tr.grad_sq.size());
    }
    return acc / num_seeds;
  };
  BoundCheck out;
  double c = 0.0;
  for (double cal : {0.2, 0.1, 0.05, 0.025}) {
    if (cal * obj.smoothness > 1.0 + 1e-12) continue;
    const double base = 2.0 * f_gap / (cal * T) + cal * obj.smoothness * noise.variance;
    const double resid = mean_grad_sq(cal, false) - base;
    c = std::max(c, resid / (cal * cal));
  }
  out.constant_c = 10.0 * std::max(c, 0.0);
  out.lhs = mean_grad_sq(eta, true);
  out.rhs = 2.0 * f_gap / (eta * T) + eta * obj.smoothness * noise.variance +
            out.constant_c * eta * eta;
  out.pass = out.lhs <= out.rhs;
  return out;
}

struct LipschitzReport {
  Verdict verdict;
  double l_phi = 0.0;  // smallest constant covering the momentum divergence
  double l_psi = 0.0;  // same for the preconditioner diagonal
};

// Feeds a fixed gradient tape and a perturbed copy through the momentum and
// preconditioner recursions, reporting the observed Lipschitz constants
// max_t ||state_t - state~_t|| / max_k ||g_k - g~_k|| and checking that the
// divergence scales (sub)linearly with the perturbation.
inline LipschitzReport check_lipschitz_recursions(const OptimizerSpec& opt,
                                                  const std::vector<double>& perturbations) {
  if (opt.kind != OptimizerSpec::Kind::AdamType)
    throw std::invalid_argument("recursion check applies to the adaptive optimizer");
  const int T = 64, p = 4;
  // Deterministic, bounded gradient tape.
  auto tape = [&](int t, int k, double bump) {
    return std::sin(0.7 * t + 1.3 * k) + 0.25 * std::cos(2.1 * t) + bump;
  };
  LipschitzReport rep;
  bool zero_ok = true;
  for (double delta : perturbations) {
    std::vector<double> m(p, 0.0), mt(p, 0.0), v(p, 0.0), vt(p, 0.0);
    double m_div = 0.0, p_div = 0.0;
    for (int t = 0; t < T; ++t) {
      double mdiff = 0.0, pdiff = 0.0;
      for (int k = 0; k < p; ++k) {
        const double g = tape(t, k, 0.0);
        const double gt = tape(t, k, delta);
        m[static_cast<std::size_t>(k)] =
            opt.beta1 * m[static_cast<std::size_t>(k)] + (1.0 - opt.beta1) * g;
        mt[static_cast<std::size_t>(k)] =
            opt.beta1 * mt[static_cast<std::size_t>(k)] + (1.0 - opt.beta1) * gt;
        v[static_cast<std::size_t>(k)] =
            opt.beta2 * v[static_cast<std::size_t>(k)] + (1.0 - opt.beta2) * g * g;
        vt[static_cast<std::size_t>(k)] =
            opt.beta2 * vt[static_cast<std::size_t>(k)] + (1.0 - opt.beta2) * gt * gt;
        const double md = m[static_cast<std::size_t>(k)] - mt[static_cast<std::size_t>(k)];
        mdiff += md * md;
        const double pre = std::clamp(1.0 / (std::sqrt(v[static_cast<std::size_t>(k)]) + opt.epsilon),
                                      opt.clamp_min, opt.clamp_max);
        const double pret = std::clamp(
            1.0 / (std::sqrt(vt[static_cast<std::size_t>(k)]) + opt.epsilon), opt.clamp_min,
            opt.clamp_max);
        pdiff = std::max(pdiff, std::abs(pre - pret));
      }
      m_div = std::max(m_div, std::sqrt(mdiff));
      p_div = std::max(p_div, pdiff);
    }
    // max_k ||g_k - g~_k|| over the tape: the bump is constant per coordinate,
    // so the per-step gradient gap is delta * sqrt(p).
    const double g_gap = std::abs(delta) * std::sqrt(static_cast<double>(p));
    if (delta == 0.0) {
      if (m_div != 0.0 || p_div != 0.0) zero_ok = false;
      continue;
    }
    rep.l_phi = std::max(rep.l_phi, m_div / g_gap);
    rep.l_psi = std::max(rep.l_psi, p_div / g_gap);
  }
  const bool bounded = rep.l_phi <= 1.0 + 1e-9;
  std::ostringstream os;
  os << "observed momentum constant " << rep.l_phi << ", preconditioner constant " << rep.l_psi;
  if (!zero_ok) os << "; zero perturbation produced nonzero divergence";
  if (!bounded) os << "; momentum recursion exceeded unit Lipschitz constant";
  rep.verdict = {zero_ok && bounded, os.str()};
  return rep;
}

}  // namespace ppsim
