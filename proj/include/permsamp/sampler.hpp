#ifndef PERMSAMP_SAMPLER_HPP
#define PERMSAMP_SAMPLER_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <unordered_map>
#include <utility>
#include <vector>

#include "permsamp/bounds.hpp"
#include "permsamp/matrix.hpp"
#include "permsamp/rng.hpp"
#include "permsamp/subset.hpp"

namespace permsamp {

// One way of splitting a subset: fix the given column to each free row in
// turn. Children with a -inf bound are kept so the partition covers the
// parent; they carry zero probability mass.
struct PartitionCandidate {
    int column = -1;
    std::vector<PermutationSubset> children;
    std::vector<double> child_log_bounds;
    double log_ub_sum = 0.0; // log sum of exp(child bounds)
};

// One accepted permutation plus rejection/bound telemetry.
struct DrawResult {
    std::vector<int> permutation;        // sigma^{-1}: column -> assigned row
    long rejections = 0;                 // slack restarts before acceptance
    double root_log_ub_at_draw = 0.0;    // root bound in force when the accepting trial began
    long nesting_retries = 0;            // extra refine rounds inside repeat-until loops
    long node_visits = 0;                // partitioned nodes across all trials of this draw
    long nodes_with_retries = 0;         // node visits whose repair loop ran at least once
    long fallback_nodes = 0;             // guaranteed-mode nodes that fell back to fixed order
};

struct AcceptanceProbe {
    long accepted = 0;
    long trials = 0;
    std::vector<double> per_trial_root_log_ub; // bound in force at each trial start
};

// Map from canonical fixed-assignment set to a tightened log upper bound.
// Writes only ever lower a stored value, so concurrent use keeps every entry
// a valid bound; correctness of sampling never depends on cache contents.
class TighteningCache {
public:
    explicit TighteningCache(std::size_t max_entries = std::size_t{1} << 20);

    std::optional<double> lookup(const std::vector<std::pair<int, int>>& fixed) const;

    // Stores min(existing, log_bound); inserts only while under the entry cap.
    void tighten(const std::vector<std::pair<int, int>>& fixed, double log_bound);

    std::size_t size() const;

private:
    struct Key {
        std::vector<std::pair<int, int>> pairs; // sorted by column
        std::uint64_t hash = 0;
        bool operator==(const Key& o) const { return pairs == o.pairs; }
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const { return static_cast<std::size_t>(k.hash); }
    };
    static Key canonical(const std::vector<std::pair<int, int>>& fixed);

    std::size_t max_entries_;
    mutable std::shared_mutex mu_;
    std::unordered_map<Key, double, KeyHash> map_;
};

struct SamplerOptions {
    // On every rejection, subtract the observed slack from the bound of the
    // rejecting node and of all its ancestors, shrinking the envelope for
    // subsequent trials (adaptive rejection sampling).
    bool tighten = false;
    std::optional<long> max_rejections;       // throw RejectionCapExceeded past this many slack restarts
    std::size_t cache_max_entries = std::size_t{1} << 20;
    std::ostream* trace = nullptr;            // one line per node visit when set
    // Testing hook: replaces the raw subset bound (must stay a valid upper
    // bound that is tight on singletons). Forces the slow generic path.
    std::function<double(const PermutationSubset&)> bound_override;
};

// All K = |free columns| candidate partitions of a subset, one per column,
// each splitting into one child per free row. Requires >= 2 free columns.
std::vector<PartitionCandidate> refine(const NonNegativeMatrix& m, const PermutationSubset& subset);

// The candidate minimizing log_ub_sum; ties broken by smallest column index.
PartitionCandidate choose_refinement(const NonNegativeMatrix& m, const PermutationSubset& subset);

struct NestingPartition {
    std::vector<PermutationSubset> parts;
    std::vector<double> part_log_bounds;
    double log_total_ub = 0.0;
    int retries = 0; // in-place refinements beyond the first
};

// Starts from the chosen candidate's children and, while the summed child
// bounds exceed the subset bound (log-space tolerance 1e-12), refines the
// partition element with the largest bound in place. A cache, when given,
// provides tightened (read-only) bounds.
NestingPartition build_nesting_partition(const NonNegativeMatrix& m, const PermutationSubset& subset,
                                         const TighteningCache* cache = nullptr);

// Exact sampler over permutations weighted by w(sigma) = prod_c A(perm[c], c).
// Holds the tightening cache and per-matrix tables, so repeated draws and
// probes share work. Draw methods are safe to call from one thread at a time;
// independent samplers over the same matrix may run concurrently.
class PermutationSampler {
public:
    explicit PermutationSampler(NonNegativeMatrix m, SamplerOptions opts = {});
    ~PermutationSampler();
    PermutationSampler(PermutationSampler&&) noexcept;
    PermutationSampler& operator=(PermutationSampler&&) noexcept;

    // Adaptive partitioning: per node, partition on the column minimizing the
    // summed child bounds, repairing nesting in place when needed.
    DrawResult draw(Rng& rng);

    // Fixed column order (smallest free column), same nesting repair.
    DrawResult draw_fixed(Rng& rng);

    // Adaptive with exactly one refine attempt per node; on a failed nesting
    // check the node and its subtree switch to the fixed-order sampler.
    DrawResult draw_guaranteed(Rng& rng);

    // Runs single accept-or-reject trials, recording the root bound in force
    // at each trial start.
    AcceptanceProbe acceptance_probe(long trials, Rng& rng);

    const NonNegativeMatrix& matrix() const;
    double raw_root_log_upper_bound() const;
    double root_log_upper_bound() const; // current view: tightened when enabled
    TighteningCache& cache();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// One-shot spec operations; cfg.tighten applies within the call (across the
// restarts of a single draw / across probe trials).
DrawResult draw_adapart(const NonNegativeMatrix& m, Rng& rng, const SamplerOptions& cfg = {});
DrawResult draw_fixed_partition(const NonNegativeMatrix& m, Rng& rng, const SamplerOptions& cfg = {});
DrawResult draw_guaranteed(const NonNegativeMatrix& m, Rng& rng, const SamplerOptions& cfg = {});
AcceptanceProbe acceptance_rate_probe(const NonNegativeMatrix& m, long trials, Rng& rng,
                                      const SamplerOptions& cfg = {});

} // namespace permsamp

#endif
