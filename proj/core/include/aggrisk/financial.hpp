#pragma once

#include <utility>

#include "aggrisk/tables.hpp"

namespace aggrisk {

/// Beta distribution shape parameters; both must be finite and positive.
struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;
};

/// Running aggregate-term state of one (trial, layer).
/// Invariant: paid == min(agg_lim, max(0, cumulative - agg_ret)).
struct AggregateState {
  double cumulative = 0.0;  // sum of post-occurrence payouts so far
  double paid = 0.0;        // payout already released by the aggregate terms
};

/// Per-occurrence terms: share * min(occ_lim, max(0, loss - occ_ret)).
/// Retention and limit clip the gross layer loss; the share applies last.
double apply_occurrence_terms(double loss, const LayerTerms& terms);

/// Advances the aggregate state by one occurrence payout and returns the
/// incremental payout released: f(cum + payout) - f(cum) with
/// f(x) = min(agg_lim, max(0, x - agg_ret)). The increment is never negative.
std::pair<AggregateState, double> apply_aggregate_terms(const AggregateState& state,
                                                        double occurrence_payout,
                                                        const LayerTerms& terms);

/// Regularized incomplete beta function I_x(alpha, beta), evaluated with a
/// modified-Lentz continued fraction and the symmetry switch at
/// x > (alpha+1)/(alpha+beta+2). Absolute error <= 1e-12 on [0,1].
/// Throws ParamError for non-finite or non-positive shapes or x outside [0,1].
double regularized_incomplete_beta(double x, const BetaParams& p);

/// Inverse of the above: returns x in [0,1] with |I_x(alpha,beta) - u| <= 1e-10,
/// via Newton iteration safeguarded by bisection.
double inverse_incomplete_beta(double u, const BetaParams& p);

/// Samples the loss of one event occurrence.
///
/// With secondary uncertainty disabled the mean loss is returned. Enabled,
/// the loss is max_loss * InvBeta(u) where u = frac(z_pe + z_e) and the beta
/// shapes come from the method-of-moments fit of (mean, sigma, max):
///   m  = mean_loss / max_loss          (clamped to [1e-9, 1-1e-9])
///   s  = sqrt(sigma_i^2 + sigma_c^2) / max_loss, clamped to 0.99*sqrt(m(1-m))
///   nu = m(1-m)/s^2 - 1,  alpha = m*nu,  beta = (1-m)*nu
/// max_loss == 0 yields 0; s == 0 degenerates to the mean.
double sample_event_loss(const EeltEntry& entry, double z_pe, bool secondary_uncertainty);

}  // namespace aggrisk
