#include "aggrisk/financial.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aggrisk/errors.hpp"

namespace aggrisk {

namespace {

void check_params(const BetaParams& p) {
  if (!std::isfinite(p.alpha) || !std::isfinite(p.beta) || p.alpha <= 0.0 || p.beta <= 0.0) {
    throw ParamError("beta shape parameters must be finite and positive (alpha=" +
                     std::to_string(p.alpha) + ", beta=" + std::to_string(p.beta) + ")");
  }
}

// Aggregate clip: payout released once cumulative losses pass the retention,
// capped at the limit.
double aggregate_clip(double cumulative, const LayerTerms& terms) {
  return std::min(terms.agg_lim, std::max(0.0, cumulative - terms.agg_ret));
}

// Continued fraction for the incomplete beta, evaluated with the modified
// Lentz scheme. Converges for x < (a+1)/(a+b+2); the caller applies the
// symmetry switch for the other half of the domain.
double beta_cf(double x, double a, double b) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;

  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;

  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    // Even step.
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    // Odd step.
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double apply_occurrence_terms(double loss, const LayerTerms& terms) {
  return terms.share * std::min(terms.occ_lim, std::max(0.0, loss - terms.occ_ret));
}

std::pair<AggregateState, double> apply_aggregate_terms(const AggregateState& state,
                                                        double occurrence_payout,
                                                        const LayerTerms& terms) {
  AggregateState next;
  next.cumulative = state.cumulative + occurrence_payout;
  next.paid = aggregate_clip(next.cumulative, terms);
  const double increment = next.paid - aggregate_clip(state.cumulative, terms);
  return {next, increment};
}

double regularized_incomplete_beta(double x, const BetaParams& p) {
  check_params(p);
  if (!(x >= 0.0 && x <= 1.0)) {
    throw ParamError("incomplete beta argument must lie in [0,1], got " + std::to_string(x));
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  const double a = p.alpha;
  const double b = p.beta;
  const double log_front =
      a * std::log(x) + b * std::log1p(-x) - (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
  const double front = std::exp(log_front);

  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(x, a, b) / a;
  }
  return 1.0 - front * beta_cf(1.0 - x, b, a) / b;
}

namespace {

// Root of I_x(a,b) = u for u in (0, 0.5]: Newton safeguarded by a shrinking
// bracket, stopping once the bracket pins x to ~1e-15. Small u keeps full
// relative precision here, which is why the public entry point flips to the
// complementary tail for u > 1/2.
double invert_lower_half(double u, double a, double b) {
  const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  double lo = 0.0;
  double hi = 1.0;
  double x = 0.5;

  for (int iter = 0; iter < 300; ++iter) {
    const double f = regularized_incomplete_beta(x, {a, b}) - u;
    if (f == 0.0) break;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    if (hi - lo <= 1e-15) break;

    const double log_pdf = (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta;
    const double pdf = std::exp(log_pdf);
    double next;
    if (pdf > 0.0 && std::isfinite(pdf)) {
      next = x - f / pdf;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    } else {
      next = 0.5 * (lo + hi);
    }
    if (next == x) break;
    x = next;
  }
  return x;
}

}  // namespace

double inverse_incomplete_beta(double u, const BetaParams& p) {
  check_params(p);
  if (!(u >= 0.0 && u <= 1.0)) {
    throw ParamError("inverse incomplete beta argument must lie in [0,1], got " +
                     std::to_string(u));
  }
  if (u == 0.0) return 0.0;
  if (u == 1.0) return 1.0;
  if (u <= 0.5) return invert_lower_half(u, p.alpha, p.beta);
  // 1-u is exact for u >= 1/2, so the upper tail inverts by symmetry without
  // losing the tail's relative precision.
  return 1.0 - invert_lower_half(1.0 - u, p.beta, p.alpha);
}

double sample_event_loss(const EeltEntry& entry, double z_pe, bool secondary_uncertainty) {
  if (!secondary_uncertainty) return entry.mean_loss;
  if (entry.max_loss <= 0.0) return 0.0;

  // Both draws live in [0,1), so the fractional sum needs a single wrap.
  double u = z_pe + entry.z_e;
  if (u >= 1.0) u -= 1.0;

  double m = entry.mean_loss / entry.max_loss;
  m = std::clamp(m, 1e-9, 1.0 - 1e-9);

  double s = std::sqrt(entry.sigma_i * entry.sigma_i + entry.sigma_c * entry.sigma_c) /
             entry.max_loss;
  const double s_cap = 0.99 * std::sqrt(m * (1.0 - m));
  if (s <= 0.0) return entry.mean_loss;  // degenerate spread: point mass at the mean
  s = std::min(s, s_cap);

  const double nu = m * (1.0 - m) / (s * s) - 1.0;
  const BetaParams shape{m * nu, (1.0 - m) * nu};
  return entry.max_loss * inverse_incomplete_beta(u, shape);
}

}  // namespace aggrisk
