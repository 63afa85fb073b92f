#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "permsamp/bounds.hpp"
#include "permsamp/exact.hpp"
#include "permsamp/sampler.hpp"
#include "support/oracles.hpp"
#include "support/stats.hpp"

using namespace permsamp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_bijection(const std::vector<int>& perm, int n) {
    if (static_cast<int>(perm.size()) != n) return false;
    std::set<int> seen(perm.begin(), perm.end());
    return static_cast<int>(seen.size()) == n && *seen.begin() == 0 && *seen.rbegin() == n - 1;
}

// Chi-square p-value of draw frequencies against w(sigma)/per(A).
template <typename DrawFn>
double exactness_pvalue(const NonNegativeMatrix& m, DrawFn&& draw, long num_draws) {
    const auto perms = test_oracles::all_permutations(m.n());
    const double per = test_oracles::permanent_by_enumeration(m);
    std::vector<double> probs(perms.size());
    for (std::size_t i = 0; i < perms.size(); ++i) {
        probs[i] = test_oracles::permutation_weight(m, perms[i]) / per;
    }
    std::vector<long> counts(perms.size(), 0);
    for (long d = 0; d < num_draws; ++d) {
        const std::vector<int> perm = draw();
        REQUIRE(is_bijection(perm, m.n()));
        ++counts[test_oracles::permutation_index(perm)];
    }
    return test_stats::chi_square_gof_pvalue(counts, probs, num_draws);
}

} // namespace

TEST_CASE("refine on the 2x2 identity: one live child per candidate") {
    const auto m = NonNegativeMatrix::identity(2);
    const auto cands = refine(m, PermutationSubset::full(2));
    REQUIRE(cands.size() == 2);
    for (const auto& cand : cands) {
        REQUIRE(cand.children.size() == 2);
        CHECK(cand.log_ub_sum == doctest::Approx(0.0).epsilon(1e-12));
        int dead = 0;
        for (const double b : cand.child_log_bounds) {
            if (b == -kInf) ++dead;
            else CHECK(b == doctest::Approx(0.0).epsilon(1e-12));
        }
        CHECK(dead == 1);
    }
}

TEST_CASE("refine on the 3x3 all-ones: every candidate sums to log 6") {
    const auto m = NonNegativeMatrix::all_ones(3);
    const auto cands = refine(m, PermutationSubset::full(3));
    REQUIRE(cands.size() == 3);
    for (const auto& cand : cands) {
        CHECK(cand.log_ub_sum == doctest::Approx(std::log(6.0)).epsilon(1e-12));
    }
}

TEST_CASE("refine child bounds agree with subset_upper_bound") {
    Rng rng(31);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const int n = 3 + static_cast<int>(seed % 4);
        const auto m = seed % 2 ? generate({GeneratorKind::Uniform, n, 1, seed})
                                : generate({GeneratorKind::BlockDiagonal, n, 2, seed});
        auto s = PermutationSubset::full(n);
        if (seed % 3 == 0 && n > 3) {
            s = s.child(m, s.free_cols[1], s.free_rows[0]);
        }
        for (const auto& cand : refine(m, s)) {
            for (std::size_t i = 0; i < cand.children.size(); ++i) {
                const double direct = subset_upper_bound(m, cand.children[i]).log_value;
                if (direct == -kInf) {
                    CHECK(cand.child_log_bounds[i] == -kInf);
                } else {
                    CHECK(cand.child_log_bounds[i] == doctest::Approx(direct).epsilon(1e-9));
                }
            }
        }
    }
    (void)rng;
}

TEST_CASE("choose_refinement picks the minimal candidate, ties to the smallest column") {
    SUBCASE("all-ones ties resolve to column 0") {
        CHECK(choose_refinement(NonNegativeMatrix::all_ones(4), PermutationSubset::full(4)).column == 0);
    }
    SUBCASE("argmin over 4x4 uniform seed 5") {
        const auto m = generate({GeneratorKind::Uniform, 4, 1, 5});
        const auto cands = refine(m, PermutationSubset::full(4));
        const auto chosen = choose_refinement(m, PermutationSubset::full(4));
        for (const auto& cand : cands) CHECK(chosen.log_ub_sum <= cand.log_ub_sum + 1e-12);
    }
    SUBCASE("a column with a single nonzero entry sums to that child's bound") {
        NonNegativeMatrix m(3, {0.7, 1, 1, //
                                0.0, 1, 1, //
                                0.0, 1, 1});
        const auto cands = refine(m, PermutationSubset::full(3));
        CHECK(cands[0].column == 0);
        CHECK(cands[0].log_ub_sum == doctest::Approx(cands[0].child_log_bounds[0]).epsilon(1e-12));
    }
}

TEST_CASE("nesting partitions are disjoint covers of the parent (exhaustive n <= 5)") {
    Rng rng(7);
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const int n = 3 + static_cast<int>(seed % 3);
        const auto m = seed % 2 ? generate({GeneratorKind::Uniform, n, 1, seed})
                                : generate({GeneratorKind::BlockDiagonal, n, 3, seed});
        auto s = PermutationSubset::full(n);
        if (seed % 4 == 0) s = s.child(m, 0, static_cast<int>(seed) % n);
        if (s.free_count() < 2) continue;

        const auto np = build_nesting_partition(m, s);
        CHECK(np.retries == 0); // expected path: the bound nests on the first refinement

        // Every permutation of the parent lands in exactly one part.
        for (const auto& perm : test_oracles::all_permutations(n)) {
            if (!test_oracles::subset_contains(s, perm)) continue;
            int hits = 0;
            for (const auto& part : np.parts) hits += test_oracles::subset_contains(part, perm);
            CHECK(hits == 1);
        }
        // And the partition nests under the subset bound.
        const double parent = subset_upper_bound(m, s).log_value;
        CHECK(np.log_total_ub <= parent + 1e-9);
    }
    (void)rng;
}

TEST_CASE("identity matrix draws the identity permutation without rejections") {
    const auto m = NonNegativeMatrix::identity(4);
    Rng rng(1);
    for (const auto method : {0, 1, 2}) {
        PermutationSampler sampler(m);
        const DrawResult d = method == 0   ? sampler.draw(rng)
                             : method == 1 ? sampler.draw_fixed(rng)
                                           : sampler.draw_guaranteed(rng);
        CHECK(d.permutation == std::vector<int>{0, 1, 2, 3});
        CHECK(d.rejections == 0);
        CHECK(d.root_log_ub_at_draw == doctest::Approx(0.0));
    }
}

TEST_CASE("1x1 matrix draws immediately") {
    Rng rng(2);
    const DrawResult d = draw_adapart(NonNegativeMatrix(1, {0.3}), rng);
    CHECK(d.permutation == std::vector<int>{0});
    CHECK(d.root_log_ub_at_draw == doctest::Approx(std::log(0.3)));
}

TEST_CASE("all three samplers draw exactly from w/per (chi-square alpha 0.001)") {
    const long draws = 100000;
    struct Case {
        const char* name;
        NonNegativeMatrix m;
    };
    const Case cases[] = {
        {"all-ones 4x4", NonNegativeMatrix::all_ones(4)},
        {"uniform 4x4 seed 11", generate({GeneratorKind::Uniform, 4, 1, 11})},
        {"block-diag 5x5 k=2 seed 4", generate({GeneratorKind::BlockDiagonal, 5, 2, 4})},
        {"uniform 3x3 seed 7", generate({GeneratorKind::Uniform, 3, 1, 7})},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        for (int method = 0; method < 3; ++method) {
            CAPTURE(method);
            PermutationSampler sampler(c.m);
            Rng rng(1000 + method);
            const double p = exactness_pvalue(
                c.m,
                [&] {
                    return method == 0   ? sampler.draw(rng).permutation
                           : method == 1 ? sampler.draw_fixed(rng).permutation
                                         : sampler.draw_guaranteed(rng).permutation;
                },
                draws);
            CHECK(p > 0.001);
        }
    }
}

TEST_CASE("adaptive draws with tightening remain exact") {
    const auto m = generate({GeneratorKind::Uniform, 4, 1, 19});
    SamplerOptions opts;
    opts.tighten = true;
    PermutationSampler sampler(m, opts);
    Rng rng(77);
    const double p = exactness_pvalue(m, [&] { return sampler.draw(rng).permutation; }, 100000);
    CHECK(p > 0.001);
}

TEST_CASE("guaranteed sampler matches adaptive draws when nesting holds first try") {
    const auto m = generate({GeneratorKind::Uniform, 5, 1, 3});
    PermutationSampler a(m), g(m);
    Rng rng_a(42), rng_g(42);
    for (int i = 0; i < 200; ++i) {
        const DrawResult da = a.draw(rng_a);
        const DrawResult dg = g.draw_guaranteed(rng_g);
        REQUIRE(dg.fallback_nodes == 0);
        CHECK(da.permutation == dg.permutation);
        CHECK(da.rejections == dg.rejections);
    }
}

TEST_CASE("forced nesting failure takes the fixed-order fallback and stays valid") {
    const auto m = generate({GeneratorKind::Uniform, 4, 1, 13});
    SamplerOptions opts;
    // Inflate every depth-1 subset bound so the root's first refinement can
    // never nest; deeper and singleton bounds stay honest.
    opts.bound_override = [&m](const PermutationSubset& s) {
        const double raw = subset_upper_bound(m, s).log_value;
        if (s.fixed.size() == 1 && !s.is_singleton() && raw != -kInf) return raw + 1.0;
        return raw;
    };
    PermutationSampler sampler(m, opts);
    Rng rng(5);
    long fallbacks = 0;
    for (int i = 0; i < 50; ++i) {
        const DrawResult d = sampler.draw_guaranteed(rng);
        CHECK(is_bijection(d.permutation, 4));
        fallbacks += d.fallback_nodes;
    }
    CHECK(fallbacks > 0);

    // The adaptive sampler instead repairs in place at the root.
    PermutationSampler repairing(m, opts);
    const DrawResult d = repairing.draw(rng);
    CHECK(is_bijection(d.permutation, 4));
    CHECK(d.nesting_retries > 0);
}

TEST_CASE("acceptance probe on tight-bound matrices accepts every trial") {
    Rng rng(6);
    const auto probe_id = acceptance_rate_probe(NonNegativeMatrix::identity(5), 200, rng);
    CHECK(probe_id.accepted == 200);
    const auto probe_ones = acceptance_rate_probe(NonNegativeMatrix::all_ones(6), 200, rng);
    CHECK(probe_ones.accepted == 200);
    CHECK(probe_ones.per_trial_root_log_ub.front() == doctest::Approx(std::log(720.0)));
}

TEST_CASE("acceptance rate matches per(A)/exp(root bound) within 3 standard errors") {
    const auto m = generate({GeneratorKind::Uniform, 6, 1, 2});
    PermutationSampler sampler(m);
    Rng rng(12);
    const long trials = 10000;
    const auto probe = sampler.acceptance_probe(trials, rng);
    const double p = permanent_ryser(m) / std::exp(sampler.raw_root_log_upper_bound());
    const double se = std::sqrt(p * (1.0 - p) / trials);
    CHECK(std::abs(static_cast<double>(probe.accepted) / trials - p) < 3.0 * se);
}

TEST_CASE("rejections+1 is geometric with mean exp(root)/per") {
    for (const std::uint64_t seed : {2ULL, 8ULL}) {
        const auto m = generate({GeneratorKind::Uniform, 6, 1, seed});
        PermutationSampler sampler(m);
        Rng rng(seed + 100);
        const long draws = 2000;
        double total_trials = 0.0;
        for (long i = 0; i < draws; ++i) total_trials += 1.0 + sampler.draw(rng).rejections;
        const double expect = std::exp(sampler.raw_root_log_upper_bound()) / permanent_ryser(m);
        CHECK(total_trials / draws == doctest::Approx(expect).epsilon(0.10));
    }
}

TEST_CASE("tightening lowers the root bound monotonically but never below log per") {
    const auto m = generate({GeneratorKind::Uniform, 7, 1, 15});
    SamplerOptions opts;
    opts.tighten = true;
    PermutationSampler sampler(m, opts);
    Rng rng(3);
    const auto probe = sampler.acceptance_probe(500, rng);
    const double log_per = std::log(permanent_ryser(m));
    double prev = kInf;
    for (const double ub : probe.per_trial_root_log_ub) {
        CHECK(ub <= prev + 1e-12);
        CHECK(ub >= log_per - 1e-9);
        prev = ub;
    }
    CHECK(probe.per_trial_root_log_ub.back() < probe.per_trial_root_log_ub.front());
}

TEST_CASE("tightened bounds stay valid for every cached subset") {
    const auto m = generate({GeneratorKind::BlockDiagonal, 5, 2, 9});
    SamplerOptions opts;
    opts.tighten = true;
    PermutationSampler sampler(m, opts);
    Rng rng(14);
    for (int i = 0; i < 400; ++i) sampler.draw(rng);

    // Every depth-1 and depth-2 subset with a cache entry must still bound
    // its enumerated weight sum.
    long checked = 0;
    for (int c0 = 0; c0 < 5; ++c0) {
        for (int r0 = 0; r0 < 5; ++r0) {
            const auto s1 = PermutationSubset::full(5).child(m, c0, r0);
            if (const auto b1 = sampler.cache().lookup(s1.fixed)) {
                CHECK(std::exp(*b1) >= test_oracles::subset_weight_sum(m, s1) * (1.0 - 1e-9));
                ++checked;
            }
            for (const int c1 : s1.free_cols) {
                for (const int r1 : s1.free_rows) {
                    const auto s2 = s1.child(m, c1, r1);
                    if (const auto b2 = sampler.cache().lookup(s2.fixed)) {
                        CHECK(std::exp(*b2) >= test_oracles::subset_weight_sum(m, s2) * (1.0 - 1e-9));
                        ++checked;
                    }
                }
            }
        }
    }
    CHECK(checked > 0); // rejections occurred, so tightenings were recorded
}

TEST_CASE("zero-permanent structures are reported") {
    SUBCASE("zero row") {
        CHECK_THROWS_AS(PermutationSampler(NonNegativeMatrix(2, {0, 0, 1, 1})), ZeroPermanent);
    }
    SUBCASE("zero column") {
        CHECK_THROWS_AS(PermutationSampler(NonNegativeMatrix(2, {0, 1, 0, 1})), ZeroPermanent);
    }
    SUBCASE("structurally zero permanent trips the rejection cap") {
        // Rows 1 and 2 compete for column 0: no positive permutation, yet no
        // zero row or column.
        NonNegativeMatrix m(3, {1, 1, 1, //
                                1, 0, 0, //
                                1, 0, 0});
        SamplerOptions opts;
        opts.max_rejections = 25;
        PermutationSampler sampler(m, opts);
        Rng rng(4);
        CHECK_THROWS_AS(sampler.draw(rng), RejectionCapExceeded);
    }
}

TEST_CASE("tightening cache keys are canonical and writes are monotone") {
    TighteningCache cache(4);
    const std::vector<std::pair<int, int>> ab{{0, 1}, {2, 3}};
    const std::vector<std::pair<int, int>> ba{{2, 3}, {0, 1}};
    CHECK(!cache.lookup(ab).has_value());
    cache.tighten(ab, -1.0);
    CHECK(cache.lookup(ba) == doctest::Approx(-1.0));
    cache.tighten(ba, -2.5);
    CHECK(cache.lookup(ab) == doctest::Approx(-2.5));
    cache.tighten(ab, -0.5); // never loosens
    CHECK(cache.lookup(ab) == doctest::Approx(-2.5));

    // Discard-on-full keeps existing entries updatable.
    cache.tighten({{1, 1}}, 0.0);
    cache.tighten({{2, 2}}, 0.0);
    cache.tighten({{3, 3}}, 0.0);
    CHECK(cache.size() == 4);
    cache.tighten({{4, 4}}, 0.0);
    CHECK(cache.size() == 4);
    CHECK(!cache.lookup({{4, 4}}).has_value());
}

TEST_CASE("draw telemetry counts node visits") {
    const auto m = generate({GeneratorKind::Uniform, 5, 1, 21});
    PermutationSampler sampler(m);
    Rng rng(9);
    const DrawResult d = sampler.draw(rng);
    // Each trial visits up to n-1 internal nodes; at least the accepting
    // trial's spine is counted.
    CHECK(d.node_visits >= 4);
    CHECK(d.node_visits <= (d.rejections + 1) * 4);
    CHECK(d.nesting_retries == 0);
}
