#include "permsamp/estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

namespace permsamp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log P(Bin(T,p) = k), stable for large T.
double log_binom_pmf(long k, long trials, double p) {
    if (p <= 0.0) return k == 0 ? 0.0 : kNegInf;
    if (p >= 1.0) return k == trials ? 0.0 : kNegInf;
    const double lchoose = std::lgamma(static_cast<double>(trials) + 1.0) -
                           std::lgamma(static_cast<double>(k) + 1.0) -
                           std::lgamma(static_cast<double>(trials - k) + 1.0);
    return lchoose + k * std::log(p) + (trials - k) * std::log1p(-p);
}

double upper_tail(long a, long trials, double p) { // P(X >= a)
    double hi = kNegInf;
    std::vector<double> terms;
    terms.reserve(trials - a + 1);
    for (long k = a; k <= trials; ++k) {
        terms.push_back(log_binom_pmf(k, trials, p));
        hi = std::max(hi, terms.back());
    }
    if (hi == kNegInf) return 0.0;
    double s = 0.0;
    for (const double t : terms) s += std::exp(t - hi);
    return std::min(1.0, std::exp(hi) * s);
}

double lower_tail(long a, long trials, double p) { // P(X <= a)
    double hi = kNegInf;
    std::vector<double> terms;
    terms.reserve(a + 1);
    for (long k = 0; k <= a; ++k) {
        terms.push_back(log_binom_pmf(k, trials, p));
        hi = std::max(hi, terms.back());
    }
    if (hi == kNegInf) return 0.0;
    double s = 0.0;
    for (const double t : terms) s += std::exp(t - hi);
    return std::min(1.0, std::exp(hi) * s);
}

double logsumexp_neg(const std::vector<double>& ubs) { // log sum_i exp(-ubs[i])
    double hi = kNegInf;
    for (const double u : ubs) hi = std::max(hi, -u);
    if (hi == kNegInf) return kNegInf;
    double s = 0.0;
    for (const double u : ubs) s += std::exp(-u - hi);
    return hi + std::log(s);
}

} // namespace

std::pair<double, double> clopper_pearson(long a, long trials, double alpha) {
    if (trials < 1 || a < 0 || a > trials || !(alpha > 0.0) || !(alpha < 1.0)) {
        throw InvalidArgs("clopper_pearson: need 0 <= a <= T, T >= 1, 0 < alpha < 1");
    }
    const double half = alpha / 2.0;

    double p_lo = 0.0;
    if (a > 0) {
        // P(X >= a) increases from 0 to 1 in p; find where it crosses half.
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
            const double mid = 0.5 * (lo + hi);
            (upper_tail(a, trials, mid) < half ? lo : hi) = mid;
        }
        p_lo = 0.5 * (lo + hi);
    }

    double p_hi = 1.0;
    if (a < trials) {
        // P(X <= a) decreases from 1 to 0 in p; find where it crosses half.
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
            const double mid = 0.5 * (lo + hi);
            (lower_tail(a, trials, mid) >= half ? lo : hi) = mid;
        }
        p_hi = 0.5 * (lo + hi);
    }
    return {p_lo, p_hi};
}

namespace {

EstimateReport fixed_bound_report(long trials, long accepted, double alpha, std::vector<double> per_trial_ub) {
    const double root = per_trial_ub.front();
    EstimateReport rep;
    rep.trials = trials;
    rep.accepted = accepted;
    rep.confidence = 1.0 - alpha;
    rep.method = EstimateReport::Method::ClopperPearson;
    rep.per_trial_root_log_ub = std::move(per_trial_ub);
    const auto [p_lo, p_hi] = clopper_pearson(accepted, trials, alpha);
    rep.log_upper = std::log(p_hi) + root;
    if (accepted > 0) {
        rep.log_point_estimate = std::log(static_cast<double>(accepted) / trials) + root;
        rep.log_lower = std::log(p_lo) + root;
    }
    return rep;
}

} // namespace

EstimateReport estimate_fixed_bound(const NonNegativeMatrix& m, long trials, double alpha, Rng& rng) {
    PermutationSampler sampler(m, SamplerOptions{});
    const AcceptanceProbe probe = sampler.acceptance_probe(trials, rng);
    return fixed_bound_report(probe.trials, probe.accepted, alpha, probe.per_trial_root_log_ub);
}

EstimateReport estimate_fixed_bound_parallel(const NonNegativeMatrix& m, long trials, double alpha,
                                             std::uint64_t seed, int threads) {
    if (trials < 1) throw InvalidArgs("estimate needs trials >= 1");
    threads = std::max(1, threads);
    PermutationSampler probe_sampler(m, SamplerOptions{}); // validates + root bound
    const double root = probe_sampler.raw_root_log_upper_bound();

    std::atomic<long> accepted{0};
    std::atomic<long> next{0};
    auto worker = [&]() {
        PermutationSampler sampler(m, SamplerOptions{});
        long local = 0;
        for (;;) {
            const long t = next.fetch_add(1);
            if (t >= trials) break;
            Rng rng(split_seed(seed, static_cast<std::uint64_t>(t)));
            local += sampler.acceptance_probe(1, rng).accepted;
        }
        accepted.fetch_add(local);
    };
    std::vector<std::thread> pool;
    for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    return fixed_bound_report(trials, accepted.load(), alpha, std::vector<double>(trials, root));
}

EstimateReport estimate_tightening(const NonNegativeMatrix& m, const TighteningEstimateOptions& opts, Rng& rng) {
    if (!opts.target_accepts && opts.trials < 1) throw InvalidArgs("estimate needs trials >= 1 or a target accept count");
    if (opts.target_accepts && *opts.target_accepts < 1) throw InvalidArgs("target accept count must be >= 1");
    if (opts.bootstrap_replicates < 1) throw InvalidArgs("bootstrap replicate count must be >= 1");

    SamplerOptions sopts;
    sopts.tighten = true;
    PermutationSampler sampler(m, sopts);

    // Trials run one at a time so the bootstrap sees paired per-trial
    // (indicator, bound) observations while the cache tightens between them.
    std::vector<char> indicator;
    std::vector<double> ubs;
    long accepted = 0;
    const auto done = [&]() {
        return opts.target_accepts ? accepted >= *opts.target_accepts
                                   : static_cast<long>(ubs.size()) >= opts.trials;
    };
    while (!done()) {
        const AcceptanceProbe p = sampler.acceptance_probe(1, rng);
        indicator.push_back(static_cast<char>(p.accepted));
        ubs.push_back(p.per_trial_root_log_ub.front());
        accepted += p.accepted;
    }

    const long trials = static_cast<long>(ubs.size());
    EstimateReport rep;
    rep.trials = trials;
    rep.accepted = accepted;
    rep.confidence = 1.0 - opts.alpha;
    rep.method = EstimateReport::Method::Bootstrap;
    rep.per_trial_root_log_ub = ubs;

    if (accepted == 0) {
        // Degenerate bootstrap: only an upper bound is reported, mapped
        // through the loosest bound seen (conservative).
        const double worst = *std::max_element(ubs.begin(), ubs.end());
        const auto [p_lo, p_hi] = clopper_pearson(0, trials, opts.alpha);
        (void)p_lo;
        rep.log_upper = std::log(p_hi) + worst;
        return rep;
    }

    rep.log_point_estimate = std::log(static_cast<double>(accepted)) - logsumexp_neg(ubs);

    // Nonparametric bootstrap over the per-trial (indicator, bound) pairs.
    std::vector<double> replicates;
    replicates.reserve(opts.bootstrap_replicates);
    std::vector<double> neg_ub(ubs.size());
    for (std::size_t i = 0; i < ubs.size(); ++i) neg_ub[i] = -ubs[i];
    const double scale = *std::max_element(neg_ub.begin(), neg_ub.end());
    for (long b = 0; b < opts.bootstrap_replicates; ++b) {
        long a_star = 0;
        double denom = 0.0;
        for (long t = 0; t < trials; ++t) {
            auto idx = static_cast<std::size_t>(uniform01(rng) * trials);
            if (idx >= ubs.size()) idx = ubs.size() - 1;
            a_star += indicator[idx];
            denom += std::exp(neg_ub[idx] - scale);
        }
        replicates.push_back(a_star == 0 ? kNegInf : std::log(static_cast<double>(a_star)) - (scale + std::log(denom)));
    }
    std::sort(replicates.begin(), replicates.end());
    const auto quantile = [&](double q) {
        const auto idx = static_cast<std::size_t>(q * (replicates.size() - 1));
        return replicates[idx];
    };
    rep.log_lower = quantile(opts.alpha / 2.0);
    rep.log_upper = quantile(1.0 - opts.alpha / 2.0);
    return rep;
}

EstimateReport estimate_tightening(const NonNegativeMatrix& m, long trials, double alpha, Rng& rng,
                                   long bootstrap_replicates) {
    TighteningEstimateOptions opts;
    opts.trials = trials;
    opts.alpha = alpha;
    opts.bootstrap_replicates = bootstrap_replicates;
    return estimate_tightening(m, opts, rng);
}

double bound_improvement_ratio(const NonNegativeMatrix& m, long num_draws, Rng& rng) {
    if (num_draws < 1) throw InvalidArgs("bound_improvement_ratio needs num_draws >= 1");
    SamplerOptions sopts;
    sopts.tighten = true;
    PermutationSampler sampler(m, sopts);
    for (long i = 0; i < num_draws; ++i) sampler.draw(rng);
    return std::exp(sampler.root_log_upper_bound() - sampler.raw_root_log_upper_bound());
}

} // namespace permsamp
