#pragma once

// Probability terms of the joint posterior over (u, c, mu, Sigma):
// Bradley-Terry choices, response-time and attention-duration models in
// three families, the Dirichlet / hierarchical Gaussian / inverse-Wishart
// priors, and the compiled posterior used by the sampler.

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cuepref/domain.hpp"
#include "cuepref/valuefn.hpp"

namespace cuepref {

enum class Channels { kPcOnly, kPcRt, kPcAtt, kPcRtAtt };
enum class Family { kExponential, kGamma, kPoisson };

/// Which information channels enter the likelihood, and the duration family.
struct VariantSpec {
  Channels channels = Channels::kPcRtAtt;
  Family family = Family::kExponential;

  bool uses_response_time() const {
    return channels == Channels::kPcRt || channels == Channels::kPcRtAtt;
  }
  bool uses_attention() const {
    return channels == Channels::kPcAtt || channels == Channels::kPcRtAtt;
  }
  bool pairwise_only() const { return channels == Channels::kPcOnly; }
  /// Regression coefficient count; 0 when no duration channel is used.
  int k() const { return pairwise_only() ? 0 : family_coefficients(family); }

  /// "bor", "i1".."iii3": roman numeral = channels (i: RT+ATT, ii: RT,
  /// iii: ATT), digit = family (1 gamma, 2 exponential, 3 poisson).
  static VariantSpec parse(std::string_view name);
  std::string name() const;
  /// All ten variants in table order: bor, i1, i2, i3, ii1, ..., iii3.
  static std::vector<VariantSpec> all();

  static int family_coefficients(Family f) { return f == Family::kGamma ? 4 : 2; }

  bool operator==(const VariantSpec& o) const {
    return channels == o.channels && (pairwise_only() || family == o.family);
  }
};

std::string family_name(Family f);
Family parse_family(std::string_view name);

struct Hyperparams {
  Eigen::VectorXd tau;        // Dirichlet concentration, length gamma
  Eigen::VectorXd zeta;       // mean of mu, length k
  Eigen::MatrixXd gamma_cov;  // covariance of mu, k x k
  double epsilon = 0.0;       // inverse-Wishart degrees of freedom
  Eigen::MatrixXd psi;        // inverse-Wishart scale, k x k

  /// tau = 1, zeta = 0, Gamma = 100 I, epsilon = k + 2, Psi = 0.01 I.
  static Hyperparams defaults(int gamma, int k);
  /// Throws ValidationError when dimensions or definiteness are wrong.
  void validate(int gamma, int k) const;
};

struct LatentState {
  Eigen::VectorXd u;
  Eigen::VectorXd c;
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
};

/// log P(winner beats loser) under Bradley-Terry on comprehensive values.
double bt_log_prob(const Eigen::VectorXd& u, const Eigen::VectorXd& v_winner,
                   const Eigen::VectorXd& v_loser);
/// Same, from the value difference U(winner) - U(loser).
double bt_log_prob(double value_gap);

struct DurationTerm {
  double value = 0.0;
  double d_delta = 0.0;                // derivative in the value difference
  std::array<double, 4> d_c{};         // derivative in c_1..c_k
};

/// Log density (log mass for Poisson, on ceil(t)) of a duration t given the
/// regression coefficients and a value difference in [0, 1].
///   exponential: rate exp(c1 d + c2)
///   gamma:       shape exp(c1 d + c2), scale exp(c3 d + c4)  (mean = shape*scale)
///   poisson:     ceil(t) ~ Poisson(exp(c1 d + c2))
double duration_log_prob(Family family, const Eigen::VectorXd& c, double delta, double t);
DurationTerm duration_term(Family family, const double* c, double delta, double t);

double log_dirichlet(const Eigen::VectorXd& u, const Eigen::VectorXd& tau);
double log_mvnormal(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                    const Eigen::MatrixXd& cov);
double log_inverse_wishart(const Eigen::MatrixXd& sigma, double dof, const Eigen::MatrixXd& scale);
double log_multivariate_gamma(int k, double a);

/// Dirichlet prior, plus for duration variants the hyperpriors on mu and
/// Sigma and the Gaussian on c.
double prior_log_prob(const LatentState& state, const Hyperparams& hyper, const VariantSpec& spec);

/// The unnormalized posterior for one dataset, compiled into per-record
/// difference vectors. Works on two parameterizations:
///  - constrained LatentState (log_posterior),
///  - an unconstrained vector x = [z (gamma-1), c (k), mu (k), l (k(k+1)/2)]
///    where u = stick-breaking(z) and Sigma = L L^T with L lower triangular,
///    diag(L) = exp(diag entries of l), entries stored row by row. The
///    unconstrained density includes both transform log-Jacobians.
class PosteriorModel {
 public:
  PosteriorModel(const Problem& problem, const Dataset& dataset, PiecewiseConfig config,
                 VariantSpec spec, Hyperparams hyper);
  /// Default hyperparameters.
  PosteriorModel(const Problem& problem, const Dataset& dataset, PiecewiseConfig config,
                 VariantSpec spec);

  int gamma() const { return config_.total(); }
  int k() const { return spec_.k(); }
  std::size_t dim() const;
  const VariantSpec& spec() const { return spec_; }
  const PiecewiseConfig& config() const { return config_; }
  const Hyperparams& hyper() const { return hyper_; }
  std::size_t num_records() const { return records_.size(); }

  double log_posterior(const LatentState& state) const;
  double log_density(const Eigen::VectorXd& x) const;
  /// Log density and its gradient at x. `grad` is resized as needed.
  double log_density_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;

  LatentState constrain(const Eigen::VectorXd& x) const;
  Eigen::VectorXd unconstrain(const LatentState& state) const;
  /// u uniform; c = mu with zero slopes and intercepts fitted to the mean
  /// observed duration (zero without duration data); Sigma at the
  /// inverse-Wishart prior mean.
  LatentState initial_state() const;

 private:
  struct Record {
    Eigen::VectorXd diff;             // v(winner) - v(loser)
    double response_time = 0.0;
    std::vector<double> attention;    // per criterion; negative = missing
    double log_rt = 0.0;
    std::vector<double> log_attention;
  };

  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const;

  PiecewiseConfig config_;
  VariantSpec spec_;
  Hyperparams hyper_;
  std::vector<Record> records_;
  // Cached hyperparameter algebra.
  Eigen::MatrixXd gamma_inv_;
  double log_det_gamma_ = 0.0;
  double log_det_psi_ = 0.0;
  double lgamma_tau_sum_ = 0.0;
  double lgamma_tau_each_ = 0.0;
};

}  // namespace cuepref
