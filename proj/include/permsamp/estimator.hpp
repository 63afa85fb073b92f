#ifndef PERMSAMP_ESTIMATOR_HPP
#define PERMSAMP_ESTIMATOR_HPP

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "permsamp/matrix.hpp"
#include "permsamp/rng.hpp"
#include "permsamp/sampler.hpp"

namespace permsamp {

// Point estimate of log per(A) with a high-probability interval. All
// permanent-scale quantities are natural logs. With zero accepted trials the
// point estimate and lower bound are absent and only log_upper is meaningful.
struct EstimateReport {
    enum class Method { ClopperPearson, Bootstrap };

    long trials = 0;
    long accepted = 0;
    std::optional<double> log_point_estimate;
    std::optional<double> log_lower;
    double log_upper = 0.0;
    double confidence = 0.0;
    Method method = Method::ClopperPearson;
    std::vector<double> per_trial_root_log_ub; // retained for audit
};

// Exact binomial confidence interval by direct tail inversion:
//   p_lo = inf{p : P(Bin(T,p) >= a) >= alpha/2}   (0 when a = 0)
//   p_hi = sup{p : P(Bin(T,p) <= a) >= alpha/2}   (1 when a = T)
std::pair<double, double> clopper_pearson(long a, long trials, double alpha);

// Eq.-style fixed-envelope estimator: acceptance trials against the constant
// root bound, Clopper-Pearson interval mapped through it.
EstimateReport estimate_fixed_bound(const NonNegativeMatrix& m, long trials, double alpha, Rng& rng);

// Same estimator with trials split across threads; per-trial rng streams are
// derived from the seed, so results do not depend on the thread count.
EstimateReport estimate_fixed_bound_parallel(const NonNegativeMatrix& m, long trials, double alpha,
                                             std::uint64_t seed, int threads);

struct TighteningEstimateOptions {
    long trials = 0;                    // fixed trial count, or
    std::optional<long> target_accepts; // run until this many acceptances
    double alpha = 0.05;
    long bootstrap_replicates = 100000;
};

// Tightened-envelope estimator: Z-hat = a / sum_i exp(-root_log_ub_i) with a
// nonparametric bootstrap interval over the per-trial (indicator, bound)
// pairs. Runs trials sequentially; the cache evolves between trials.
EstimateReport estimate_tightening(const NonNegativeMatrix& m, const TighteningEstimateOptions& opts, Rng& rng);

// Convenience overload matching the fixed-trials call shape.
EstimateReport estimate_tightening(const NonNegativeMatrix& m, long trials, double alpha, Rng& rng,
                                   long bootstrap_replicates = 100000);

// exp(final root bound - initial root bound) after num_draws accepted draws
// with tightening on; 1.0 when the bound was already exact.
double bound_improvement_ratio(const NonNegativeMatrix& m, long num_draws, Rng& rng);

} // namespace permsamp

#endif
