// Acceptance suite: one test case per release criterion, each printing a
// single PASS/FAIL line. Run via `ctest -R acceptance` or directly.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "permsamp/bounds.hpp"
#include "permsamp/estimator.hpp"
#include "permsamp/exact.hpp"
#include "permsamp/matrix_market.hpp"
#include "permsamp/sampler.hpp"
#include "permsamp/tracking.hpp"
#include "support/oracles.hpp"
#include "support/stats.hpp"

using namespace permsamp;

namespace {

void report(int criterion, bool ok, const std::string& what) {
    std::cout << "[criterion " << criterion << "] " << (ok ? "PASS" : "FAIL") << " - " << what << std::endl;
}

std::vector<int> all_indices(int n) {
    std::vector<int> v(n);
    for (int i = 0; i < n; ++i) v[i] = i;
    return v;
}

double full_log_bound(const NonNegativeMatrix& m) {
    const auto idx = all_indices(m.n());
    return soules_upper_bound(m, idx, idx).log_value;
}

} // namespace

TEST_CASE("criterion 1: exact sampling correctness") {
    const long draws = 200000;
    const double alpha = 0.001;
    bool ok = true;
    double min_p = 1.0;

    std::vector<NonNegativeMatrix> matrices;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        matrices.push_back(generate({GeneratorKind::Uniform, 4, 1, seed}));
        matrices.push_back(generate({GeneratorKind::BlockDiagonal, 4, 2, seed}));
    }

    for (std::size_t mi = 0; mi < matrices.size(); ++mi) {
        const auto& m = matrices[mi];
        const auto perms = test_oracles::all_permutations(4);
        const double per = permanent_ryser(m);
        std::vector<double> probs(perms.size());
        for (std::size_t i = 0; i < perms.size(); ++i) {
            probs[i] = test_oracles::permutation_weight(m, perms[i]) / per;
        }
        for (int method = 0; method < 3; ++method) {
            PermutationSampler sampler(m);
            Rng rng(9000 + 31 * mi + method);
            std::vector<long> counts(perms.size(), 0);
            for (long d = 0; d < draws; ++d) {
                const DrawResult r = method == 0   ? sampler.draw(rng)
                                     : method == 1 ? sampler.draw_fixed(rng)
                                                   : sampler.draw_guaranteed(rng);
                ++counts[test_oracles::permutation_index(r.permutation)];
            }
            const double p = test_stats::chi_square_gof_pvalue(counts, probs, draws);
            min_p = std::min(min_p, p);
            ok = ok && p > alpha;
        }
    }
    report(1, ok, "20 4x4 matrices x 3 samplers x 200k draws match w/per; min chi-square p = " + std::to_string(min_p));
    CHECK(ok);
}

TEST_CASE("criterion 2: bound validity and tightness") {
    bool valid = true;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const int n = 2 + static_cast<int>(seed % 6); // 2..7
        const auto m = seed % 4 == 0 ? generate({GeneratorKind::BlockDiagonal, n, 2, seed})
                                     : generate({GeneratorKind::Uniform, n, 1, seed});
        const double per = permanent_ryser(m);
        valid = valid && std::exp(full_log_bound(m)) >= per * (1.0 - 1e-9);
    }

    bool factorial_exact = true;
    for (int n = 1; n <= 12; ++n) {
        const double b = full_log_bound(NonNegativeMatrix::all_ones(n));
        factorial_exact = factorial_exact && std::abs(b - std::lgamma(n + 1.0)) <= 1e-9 * std::max(1.0, std::abs(b));
    }

    bool minc_bregman = true;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const int n = 2 + static_cast<int>(seed % 10);
        Rng rng(seed);
        std::vector<double> e(static_cast<std::size_t>(n) * n, 0.0);
        for (int i = 0; i < n; ++i) {
            bool any = false;
            for (int j = 0; j < n; ++j) {
                if (uniform01(rng) < 0.45) {
                    e[static_cast<std::size_t>(i) * n + j] = 1.0;
                    any = true;
                }
            }
            if (!any) e[static_cast<std::size_t>(i) * n + static_cast<int>(uniform01(rng) * n)] = 1.0;
        }
        const NonNegativeMatrix m(n, e);
        double expect = 0.0;
        for (int i = 0; i < n; ++i) {
            int degree = 0;
            for (int j = 0; j < n; ++j) degree += m(i, j) == 1.0;
            expect += std::lgamma(degree + 1.0) / degree;
        }
        const double b = full_log_bound(m);
        minc_bregman = minc_bregman && std::abs(b - expect) <= 1e-12 * std::max(1.0, std::abs(expect));
    }

    const bool ok = valid && factorial_exact && minc_bregman;
    report(2, ok,
           std::string("bound >= permanent on 1000 matrices (") + (valid ? "yes" : "NO") +
               "), equals n! on all-ones (" + (factorial_exact ? "yes" : "NO") + "), Minc-Bregman on 0/1 (" +
               (minc_bregman ? "yes" : "NO") + ")");
    CHECK(ok);
}

TEST_CASE("criterion 3: estimator coverage") {
    const auto m = generate({GeneratorKind::Uniform, 8, 1, 12345});
    const double truth = std::log(permanent_ryser(m));
    int covered = 0;
    for (int run = 0; run < 100; ++run) {
        Rng rng(split_seed(777, static_cast<std::uint64_t>(run)));
        const auto rep = estimate_fixed_bound(m, 1000, 0.05, rng);
        if (rep.log_lower && *rep.log_lower <= truth && truth <= rep.log_upper) ++covered;
    }
    const bool ok = covered >= 90;
    report(3, ok, "95% Clopper-Pearson interval covered the Ryser value in " + std::to_string(covered) + "/100 runs");
    CHECK(ok);
}

TEST_CASE("criterion 4: block-diagonal ground truth bracketing at desk scale") {
    // A single 95% interval misses 1 time in 20 by construction, so each size
    // gets ten independent estimates with the same binomial slack style as
    // the coverage criterion: at least 8 of 10 must contain the truth.
    bool ok = true;
    std::string detail;
    for (const int n : {20, 30, 40}) {
        const auto m = generate({GeneratorKind::BlockDiagonal, n, 10, 500 + static_cast<std::uint64_t>(n)});
        const double truth = std::log(permanent_block_diagonal(m, 10));
        int contains = 0;
        bool narrow = true;
        for (int run = 0; run < 10; ++run) {
            TighteningEstimateOptions opts;
            opts.target_accepts = 10;
            opts.alpha = 0.05;
            opts.bootstrap_replicates = 100000;
            Rng rng(split_seed(600 + static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(run)));
            const auto rep = estimate_tightening(m, opts, rng);
            if (rep.log_lower && *rep.log_lower <= truth && truth <= rep.log_upper) ++contains;
            const double width = rep.log_upper - (rep.log_lower ? *rep.log_lower : rep.log_upper);
            narrow = narrow && width <= std::log(25.0);
        }
        ok = ok && contains >= 8 && narrow;
        detail += "n=" + std::to_string(n) + " contains " + std::to_string(contains) + "/10" +
                  (narrow ? "" : " TOO-WIDE") + "; ";
    }
    report(4, ok, "10-accept tightened intervals vs block-product permanents: " + detail);
    CHECK(ok);
}

TEST_CASE("criterion 5: adaptive partitioning rejects no more than fixed order") {
    // Both samplers share the bound family, so their acceptance probability is
    // the same per(A)/exp(root bound); the ordering is asserted up to three
    // standard errors of the rejection-count difference.
    const auto m = generate({GeneratorKind::BlockDiagonal, 40, 10, 77});
    const long draws = 200;
    PermutationSampler adaptive(m), fixed(m);
    Rng ra(1), rf(1);
    double sum_a = 0.0, sumsq_a = 0.0, sum_f = 0.0, sumsq_f = 0.0;
    for (long i = 0; i < draws; ++i) {
        const double r = static_cast<double>(adaptive.draw(ra).rejections);
        sum_a += r;
        sumsq_a += r * r;
    }
    for (long i = 0; i < draws; ++i) {
        const double r = static_cast<double>(fixed.draw_fixed(rf).rejections);
        sum_f += r;
        sumsq_f += r * r;
    }
    const double mean_a = sum_a / draws, mean_f = sum_f / draws;
    const double var_a = sumsq_a / draws - mean_a * mean_a;
    const double var_f = sumsq_f / draws - mean_f * mean_f;
    const double se_diff = std::sqrt((var_a + var_f) / draws);
    const bool ok = mean_a <= mean_f + 3.0 * se_diff;
    report(5, ok,
           "mean rejections over 200 draws on block-diag n=40 k=10: adaptive " + std::to_string(mean_a) +
               " vs fixed " + std::to_string(mean_f) + " (3-sigma margin " + std::to_string(3.0 * se_diff) + ")");
    CHECK(ok);
}

TEST_CASE("criterion 6: nesting holds on the first refinement") {
    long visits = 0;
    long retried = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const int n = 5 + static_cast<int>(seed % 26); // 5..30
        const int k = std::min(n, 3 + static_cast<int>(seed % 8));
        NonNegativeMatrix m = seed % 2 == 0 ? generate({GeneratorKind::Uniform, n, 1, seed})
                                            : generate({GeneratorKind::BlockDiagonal, n, k, seed});
        PermutationSampler sampler(m);
        Rng rng(seed);
        const DrawResult d = sampler.draw(rng);
        visits += d.node_visits;
        retried += d.nodes_with_retries;
    }
    const double rate = static_cast<double>(retried) / visits;
    const bool ok = rate <= 0.01;
    report(6, ok,
           "repeat-until needed a second refine at " + std::to_string(retried) + "/" + std::to_string(visits) +
               " node visits (rate " + std::to_string(rate) + ")");
    CHECK(ok);
}

TEST_CASE("criterion 7: dense-matrix scaling stays polynomial") {
    const int sizes[] = {10, 20, 40, 80};
    const long draws[] = {4000, 1000, 200, 40};
    bool zero_slack = true;
    double lx[4], ly[4];
    std::string detail;
    for (int i = 0; i < 4; ++i) {
        const auto m = NonNegativeMatrix::all_ones(sizes[i]);
        PermutationSampler sampler(m);
        Rng rng(1);
        const auto probe = sampler.acceptance_probe(50, rng);
        zero_slack = zero_slack && probe.accepted == probe.trials;
        sampler.draw(rng); // warm
        const auto t0 = std::chrono::steady_clock::now();
        for (long d = 0; d < draws[i]; ++d) sampler.draw(rng);
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        const double per_draw = dt.count() / draws[i];
        lx[i] = std::log(sizes[i]);
        ly[i] = std::log(per_draw);
        detail += std::to_string(sizes[i]) + ":" + std::to_string(per_draw) + "s ";
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < 4; ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double slope = (4 * sxy - sx * sy) / (4 * sxx - sx * sx);
    const bool ok = zero_slack && slope <= 3.0;
    report(7, ok,
           "all-ones acceptance is 1 (" + std::string(zero_slack ? "yes" : "NO") + "), per-draw log-log slope " +
               std::to_string(slope) + " [" + detail + "]");
    CHECK(ok);
}

TEST_CASE("criterion 8: rejection-driven bound tightening reaches the recorded band") {
    double sum = 0.0;
    double lo = 1.0, hi = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto m = generate({GeneratorKind::Uniform, 10, 1, seed});
        Rng rng(seed * 7 + 1);
        const double ratio = bound_improvement_ratio(m, 1000, rng);
        sum += ratio;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    const double mean = sum / 10.0;
    const bool ok = mean >= 0.49 && mean <= 0.79;
    report(8, ok,
           "mean improvement ratio after 1000 draws on uniform 10x10 over 10 seeds = " + std::to_string(mean) +
               " (per-seed range [" + std::to_string(lo) + ", " + std::to_string(hi) + "])");
    CHECK(ok);
}

TEST_CASE("criterion 9: optimal proposal needs an order of magnitude fewer particles") {
    // One pre-registered ambiguous scenario (targets oscillating through the
    // shared center), 20 independently seeded filter runs per method.
    const int targets = 5, steps = 20, trials = 20;
    const auto model = LinearGaussianModel::spring_targets(targets);
    const auto sc = simulate(model, steps, 31003);
    double opt_ll = 0.0, seq_ll = 0.0, opt_mse = 0.0, seq_mse = 0.0;
    for (std::uint64_t trial = 0; trial < trials; ++trial) {
        Rng ro(split_seed(0, trial)), rs(split_seed(0, 1000 + trial));
        const auto opt = run_rbpf(model, sc, 10, ProposalKind::Optimal, 10, ro);
        const auto seq = run_rbpf(model, sc, 100, ProposalKind::Sequential, 10, rs);
        const auto so = evaluate(sc, opt.particles);
        const auto ss = evaluate(sc, seq.particles);
        opt_ll += so.max_log_likelihood;
        seq_ll += ss.max_log_likelihood;
        opt_mse += so.mse;
        seq_mse += ss.mse;
    }
    opt_ll /= trials;
    seq_ll /= trials;
    opt_mse /= trials;
    seq_mse /= trials;
    const bool ok = opt_ll >= seq_ll && opt_mse <= 1.1 * seq_mse;
    report(9, ok,
           "optimal N=10 vs sequential N=100 over 20 trials: mean max-log-lik " + std::to_string(opt_ll) + " vs " +
               std::to_string(seq_ll) + ", mean MSE " + std::to_string(opt_mse) + " vs " + std::to_string(seq_mse));
    CHECK(ok);
}

TEST_CASE("criterion 10: real-network matrices (conditional)") {
    const std::string dir = "data/networkrepository";
    const std::string target = dir + "/ENZYMES_g192.mtx";
    if (!std::filesystem::exists(target)) {
        std::cout << "[criterion 10] SKIPPED - conditional: place networkrepository matrices under " << dir
                  << " to enable (expects ENZYMES_g192.mtx)" << std::endl;
        return;
    }
    const auto m = read_matrix_market(target);
    TighteningEstimateOptions opts;
    opts.target_accepts = 10;
    opts.alpha = 0.05;
    opts.bootstrap_replicates = 100000;
    Rng rng(1);
    const auto rep = estimate_tightening(m, opts, rng);
    const bool lower_ok = rep.log_lower && std::abs(*rep.log_lower - 19.3) <= 1.5;
    const bool upper_ok = std::abs(rep.log_upper - 20.8) <= 1.5;
    const bool ok = lower_ok && upper_ok;
    // Out-of-band values trigger investigation (adjacency construction is an
    // open question), not rejection.
    std::cout << "[criterion 10] " << (ok ? "PASS" : "INVESTIGATE") << " - ENZYMES_g192 interval ["
              << (rep.log_lower ? *rep.log_lower : -1.0 / 0.0) << ", " << rep.log_upper
              << "] vs published [19.3, 20.8] +- 1.5" << std::endl;
    CHECK(true);
}
