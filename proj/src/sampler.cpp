#include "cuepref/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "cuepref/error.hpp"
#include "cuepref/random.hpp"

namespace cuepref {

namespace {

constexpr double kDivergenceThreshold = 1000.0;
constexpr double kStepJitter = 0.1;

// Dual averaging of the log step size (Hoffman and Gelman).
class DualAveraging {
 public:
  DualAveraging(double initial_step, double target) : target_(target) { restart(initial_step); }

  void restart(double step) {
    mu_ = std::log(10.0 * step);
    h_bar_ = 0.0;
    log_step_ = std::log(step);
    log_step_bar_ = 0.0;
    count_ = 0;
  }

  void update(double accept_prob) {
    ++count_;
    const double m = count_;
    const double w = 1.0 / (m + kT0);
    h_bar_ = (1.0 - w) * h_bar_ + w * (target_ - accept_prob);
    log_step_ = mu_ - std::sqrt(m) / kGamma * h_bar_;
    const double eta = std::pow(m, -kKappa);
    log_step_bar_ = eta * log_step_ + (1.0 - eta) * log_step_bar_;
  }

  double step() const { return std::exp(log_step_); }
  double final_step() const { return count_ > 0 ? std::exp(log_step_bar_) : std::exp(log_step_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double target_;
  double mu_ = 0.0;
  double h_bar_ = 0.0;
  double log_step_ = 0.0;
  double log_step_bar_ = 0.0;
  int count_ = 0;
};

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

// Leapfrog from a point whose gradient is already known.
void integrate(LeapfrogResult& s, double eps, int n_steps, const Eigen::VectorXd& inv_mass,
               const LogDensityGradient& f) {
  s.divergent = false;
  for (int i = 0; i < n_steps; ++i) {
    s.momentum += 0.5 * eps * s.gradient;
    s.position += eps * inv_mass.cwiseProduct(s.momentum);
    s.log_density = f(s.position, s.gradient);
    if (!std::isfinite(s.log_density) || !all_finite(s.gradient)) {
      s.divergent = true;
      return;
    }
    s.momentum += 0.5 * eps * s.gradient;
  }
}

double accept_probability(double delta_h) {
  if (!std::isfinite(delta_h)) return 0.0;
  return delta_h <= 0 ? 1.0 : std::exp(-delta_h);
}

Eigen::VectorXd draw_momentum(Rng& rng, const Eigen::VectorXd& inv_mass) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd p(inv_mass.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = normal(rng) / std::sqrt(inv_mass[i]);
  return p;
}

// Heuristic initial step: double or halve until a single leapfrog step has
// acceptance probability crossing 1/2.
double find_reasonable_step(const Target& target, const Eigen::VectorXd& q, double lp,
                            const Eigen::VectorXd& grad, const Eigen::VectorXd& inv_mass,
                            double eps, Rng& rng) {
  const Eigen::VectorXd p = draw_momentum(rng, inv_mass);
  const double h0 = hamiltonian(lp, p, inv_mass);
  auto log_accept = [&](double e) {
    LeapfrogResult s{q, p, lp, grad, false};
    integrate(s, e, 1, inv_mass, target.log_density_gradient);
    if (s.divergent) return -std::numeric_limits<double>::infinity();
    const double dh = hamiltonian(s.log_density, s.momentum, inv_mass) - h0;
    return std::isfinite(dh) ? -dh : -std::numeric_limits<double>::infinity();
  };
  double la = log_accept(eps);
  const double direction = la > std::log(0.5) ? 1.0 : -1.0;
  for (int i = 0; i < 50; ++i) {
    if (direction * la <= direction * std::log(0.5)) break;
    eps *= std::pow(2.0, direction);
    la = log_accept(eps);
  }
  return std::clamp(eps, 1e-8, 1e3);
}

}  // namespace

void SamplerConfig::validate() const {
  if (samples < 1) throw ValidationError("sampler needs at least one retained draw");
  if (warmup < 1) throw ValidationError("sampler needs at least one warmup draw");
  if (chains < 1) throw ValidationError("sampler needs at least one chain");
  if (leapfrog_steps < 1) throw ValidationError("leapfrog steps must be positive");
  if (!(step_size > 0)) throw ValidationError("step size must be positive");
  if (!(target_accept > 0 && target_accept < 1)) {
    throw ValidationError("target acceptance must lie in (0, 1)");
  }
}

double hamiltonian(double log_density, const Eigen::VectorXd& momentum,
                   const Eigen::VectorXd& inv_mass) {
  return -log_density + 0.5 * momentum.cwiseProduct(inv_mass).dot(momentum);
}

LeapfrogResult leapfrog(const Eigen::VectorXd& position, const Eigen::VectorXd& momentum,
                        double step_size, int n_steps, const Eigen::VectorXd& inv_mass,
                        const LogDensityGradient& f) {
  LeapfrogResult s{position, momentum, 0.0, Eigen::VectorXd(), false};
  s.log_density = f(position, s.gradient);
  if (!std::isfinite(s.log_density) || !all_finite(s.gradient)) {
    s.divergent = true;
    return s;
  }
  integrate(s, step_size, n_steps, inv_mass, f);
  return s;
}

ChainResult run_chain(const Target& target, const SamplerConfig& config, std::uint64_t chain_seed,
                      const Eigen::VectorXd& init) {
  config.validate();
  const auto dim = static_cast<Eigen::Index>(target.dim);
  if (init.size() != dim) throw ValidationError("initial point has the wrong dimension");
  Rng rng(chain_seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  ChainResult out;
  out.draws.resize(config.samples, dim);
  out.inv_mass = Eigen::VectorXd::Ones(dim);
  out.adaptation_trace.reserve(static_cast<std::size_t>(config.warmup));

  Eigen::VectorXd q = init;
  Eigen::VectorXd grad;
  double lp = target.log_density_gradient(q, grad);
  if (!std::isfinite(lp) || !all_finite(grad)) {
    throw ConvergenceError("log density is not finite at the initial point");
  }

  double eps = find_reasonable_step(target, q, lp, grad, out.inv_mass, config.step_size, rng);
  DualAveraging adapt(eps, config.target_accept);

  const bool adapt_mass = config.warmup >= 20;
  const int window_begin = config.warmup / 2;
  const int window_end = (4 * config.warmup) / 5;
  Eigen::VectorXd welford_mean = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd welford_m2 = Eigen::VectorXd::Zero(dim);
  int welford_n = 0;

  double accept_sum = 0.0;
  const int total = config.warmup + config.samples;
  for (int it = 0; it < total; ++it) {
    const bool warming = it < config.warmup;
    double step = warming ? eps : out.step_size;
    if (!warming) step *= 1.0 + kStepJitter * (2.0 * unif(rng) - 1.0);

    LeapfrogResult s{q, draw_momentum(rng, out.inv_mass), lp, grad, false};
    const double h0 = hamiltonian(lp, s.momentum, out.inv_mass);
    integrate(s, step, config.leapfrog_steps, out.inv_mass, target.log_density_gradient);
    double delta_h = std::numeric_limits<double>::infinity();
    if (!s.divergent) delta_h = hamiltonian(s.log_density, s.momentum, out.inv_mass) - h0;
    const bool divergent = s.divergent || !std::isfinite(delta_h) ||
                           std::abs(delta_h) > kDivergenceThreshold;
    const double accept = divergent ? 0.0 : accept_probability(delta_h);
    if (divergent) {
      (warming ? out.warmup_divergences : out.divergences) += 1;
    } else if (unif(rng) < accept) {
      q = std::move(s.position);
      lp = s.log_density;
      grad = std::move(s.gradient);
    }

    if (warming) {
      adapt.update(accept);
      eps = adapt.step();
      if (adapt_mass && it >= window_begin && it < window_end) {
        ++welford_n;
        const Eigen::VectorXd d = q - welford_mean;
        welford_mean += d / welford_n;
        welford_m2 += d.cwiseProduct(q - welford_mean);
      }
      if (adapt_mass && it == window_end - 1 && welford_n >= 2) {
        const double n = welford_n;
        const Eigen::VectorXd var = welford_m2 / (n - 1.0);
        // Shrink toward a small constant, as in Stan's windowed adaptation.
        out.inv_mass = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
        eps = find_reasonable_step(target, q, lp, grad, out.inv_mass, eps, rng);
        adapt.restart(eps);
      }
      out.adaptation_trace.push_back(eps);
      if (it == config.warmup - 1) out.step_size = adapt.final_step();
    } else {
      accept_sum += accept;
      out.draws.row(it - config.warmup) = q.transpose();
    }
  }
  out.accept_rate = accept_sum / config.samples;
  if (out.divergences > config.samples / 10) {
    throw ConvergenceError(std::to_string(out.divergences) + " of " +
                           std::to_string(config.samples) +
                           " transitions diverged; raise the warmup length or the target "
                           "acceptance rate, or check the data for extreme durations");
  }
  return out;
}

std::vector<ChainResult> sample_target(const Target& target, const SamplerConfig& config,
                                       const std::vector<Eigen::VectorXd>& inits) {
  config.validate();
  if (inits.size() != static_cast<std::size_t>(config.chains)) {
    throw ValidationError("need one starting point per chain");
  }
  std::vector<ChainResult> results(inits.size());
  std::vector<std::exception_ptr> errors(inits.size());
  auto work = [&](std::size_t c) {
    try {
      results[c] = run_chain(target, config, derive_seed(config.seed, {c}), inits[c]);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (config.parallel && inits.size() > 1) {
    std::vector<std::jthread> threads;
    for (std::size_t c = 0; c < inits.size(); ++c) threads.emplace_back(work, c);
  } else {
    for (std::size_t c = 0; c < inits.size(); ++c) work(c);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

Eigen::VectorXd jittered_start(const PosteriorModel& model, std::uint64_t chain_seed) {
  Eigen::VectorXd x = model.unconstrain(model.initial_state());
  Rng rng(chain_seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += jitter(rng);
  return x;
}

SampleSet sample_posterior(const PosteriorModel& model, const SamplerConfig& config,
                           const std::function<void(int)>& on_chain_done) {
  config.validate();
  Target target{model.dim(), [&model](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
                  return model.log_density_gradient(x, g);
                }};
  std::vector<Eigen::VectorXd> inits;
  for (int c = 0; c < config.chains; ++c) {
    inits.push_back(jittered_start(model, derive_seed(config.seed, {static_cast<std::uint64_t>(c), 0x1717})));
  }

  SampleSet out;
  out.config = config;
  out.gamma = model.gamma();
  out.k = model.k();
  out.draws.resize(inits.size());
  out.accept_rates.resize(inits.size());
  out.divergences.resize(inits.size());
  out.step_sizes.resize(inits.size());
  out.adaptation_traces.resize(inits.size());

  std::atomic<int> finished{0};
  std::vector<std::exception_ptr> errors(inits.size());
  auto work = [&](std::size_t c) {
    try {
      ChainResult r = run_chain(target, config, derive_seed(config.seed, {c}), inits[c]);
      auto& draws = out.draws[c];
      draws.reserve(static_cast<std::size_t>(r.draws.rows()));
      for (Eigen::Index i = 0; i < r.draws.rows(); ++i) {
        draws.push_back(model.constrain(r.draws.row(i).transpose()));
      }
      out.accept_rates[c] = r.accept_rate;
      out.divergences[c] = r.divergences;
      out.step_sizes[c] = r.step_size;
      out.adaptation_traces[c] = std::move(r.adaptation_trace);
    } catch (...) {
      errors[c] = std::current_exception();
    }
    const int done = ++finished;
    if (on_chain_done) on_chain_done(done);
  };
  if (config.parallel && inits.size() > 1) {
    std::vector<std::jthread> threads;
    for (std::size_t c = 0; c < inits.size(); ++c) threads.emplace_back(work, c);
  } else {
    for (std::size_t c = 0; c < inits.size(); ++c) work(c);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

Eigen::MatrixXd SampleSet::pooled_u() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(num_chains() * draws_per_chain()), gamma);
  Eigen::Index row = 0;
  for (const auto& chain : draws) {
    for (const auto& s : chain) out.row(row++) = s.u.transpose();
  }
  return out;
}

std::vector<std::vector<double>> SampleSet::u_series(int entry) const {
  std::vector<std::vector<double>> out;
  for (const auto& chain : draws) {
    std::vector<double> series;
    series.reserve(chain.size());
    for (const auto& s : chain) series.push_back(s.u[entry]);
    out.push_back(std::move(series));
  }
  return out;
}

}  // namespace cuepref
