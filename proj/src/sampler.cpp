#include "permsamp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>

namespace permsamp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Log-space tolerance for the nesting check of the repeat-until loop.
constexpr double kNestTol = 1e-12;

double log_sum_exp(const std::vector<double>& v) {
    double hi = kNegInf;
    for (const double x : v) hi = std::max(hi, x);
    if (hi == kNegInf) return kNegInf;
    double s = 0.0;
    for (const double x : v) s += std::exp(x - hi);
    return hi + std::log(s);
}

// Per-row view of the active submatrix: entries sorted descending with
// prefix sums against delta weights, so the row term of the bound with one
// column removed is O(1).
struct RowData {
    std::vector<double> vals; // active entries, sorted descending
    std::vector<int> cols;    // column ids parallel to vals
    std::vector<double> p1;   // p1[t] = sum_{u<=t} vals[u] * delta(u+1)
    std::vector<double> p2;   // p2[t] = sum_{u<=t} vals[u] * delta(u)
    double log_term = 0.0;    // log p1.back(); -inf when the row term is 0

    void finalize(const DeltaTable& dt) {
        const std::size_t r = vals.size();
        p1.resize(r);
        p2.resize(r);
        double a1 = 0.0, a2 = 0.0;
        for (std::size_t u = 0; u < r; ++u) {
            a1 += vals[u] * dt.delta(static_cast<int>(u) + 1);
            a2 += vals[u] * dt.delta(static_cast<int>(u));
            p1[u] = a1;
            p2[u] = a2;
        }
        log_term = (r == 0 || p1.back() <= 0.0) ? kNegInf : std::log(p1.back());
    }

    // Row term with the entry at sorted position p removed.
    double term_without(std::size_t p) const {
        const double tail = p2.back() - p2[p];
        const double head = p > 0 ? p1[p - 1] : 0.0;
        return std::max(head + tail, 0.0);
    }
};

// Sorted-row state for one subset, chained down the partition tree so the
// descent never re-sorts on the normal path.
struct NodeCtx {
    PermutationSubset subset;
    std::vector<RowData> rows; // parallel to subset.free_rows
    std::vector<int> pos;      // pos[i * n + col] = sorted index of col in rows[i]
    int n = 0;

    int pos_of(int row_index, int col) const { return pos[static_cast<std::size_t>(row_index) * n + col]; }

    void index_positions() {
        pos.assign(rows.size() * static_cast<std::size_t>(n), -1);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t t = 0; t < rows[i].cols.size(); ++t)
                pos[i * n + rows[i].cols[t]] = static_cast<int>(t);
    }

    static NodeCtx from_subset(const NonNegativeMatrix& m, PermutationSubset s, const DeltaTable& dt) {
        NodeCtx ctx;
        ctx.n = m.n();
        ctx.subset = std::move(s);
        const auto& fr = ctx.subset.free_rows;
        const auto& fc = ctx.subset.free_cols;
        ctx.rows.resize(fr.size());
        std::vector<std::pair<double, int>> buf(fc.size());
        for (std::size_t i = 0; i < fr.size(); ++i) {
            for (std::size_t j = 0; j < fc.size(); ++j) buf[j] = {m(fr[i], fc[j]), fc[j]};
            std::sort(buf.begin(), buf.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
            auto& row = ctx.rows[i];
            row.vals.resize(buf.size());
            row.cols.resize(buf.size());
            for (std::size_t j = 0; j < buf.size(); ++j) {
                row.vals[j] = buf[j].first;
                row.cols[j] = buf[j].second;
            }
            row.finalize(dt);
        }
        ctx.index_positions();
        return ctx;
    }

    // Child context for fixing (col -> row); drops that row, filters the
    // column out of every remaining sorted row. O(r^2), no sorting.
    NodeCtx child(const NonNegativeMatrix& m, const DeltaTable& dt, int col, int row) const {
        NodeCtx ctx;
        ctx.n = n;
        ctx.subset = subset.child(m, col, row);
        ctx.rows.reserve(rows.size() - 1);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (subset.free_rows[i] == row) continue;
            const RowData& src = rows[i];
            RowData dst;
            dst.vals.reserve(src.vals.size() - 1);
            dst.cols.reserve(src.cols.size() - 1);
            for (std::size_t t = 0; t < src.cols.size(); ++t) {
                if (src.cols[t] == col) continue;
                dst.vals.push_back(src.vals[t]);
                dst.cols.push_back(src.cols[t]);
            }
            dst.finalize(dt);
            ctx.rows.push_back(std::move(dst));
        }
        ctx.index_positions();
        return ctx;
    }

    // Context for a subset strictly below this one, chaining child() over the
    // extra fixed pairs in insertion order.
    NodeCtx descend(const NonNegativeMatrix& m, const DeltaTable& dt, const PermutationSubset& target) const {
        NodeCtx cur = child(m, dt, target.fixed[subset.fixed.size()].first, target.fixed[subset.fixed.size()].second);
        while (cur.subset.fixed.size() < target.fixed.size()) {
            const auto& [c, r] = target.fixed[cur.subset.fixed.size()];
            cur = cur.child(m, dt, c, r);
        }
        return cur;
    }
};

enum class ColumnPolicy { Adaptive, FixedOrder };
enum class Method { Adaptive, Fixed, Guaranteed };

struct BoundHooks {
    const std::function<double(const PermutationSubset&)>* override_fn = nullptr;
    const TighteningCache* read_cache = nullptr;
};

struct ProcessedNode {
    int chosen_column = -1;
    std::vector<PermutationSubset> parts;
    std::vector<double> bounds; // in-force bound per part
    double log_total = kNegInf;
    int retries = 0;
    bool first_try_nested = true;
};

class Engine {
public:
    Engine(const NonNegativeMatrix& m, const DeltaTable& dt, const BoundHooks& hooks, std::ostream* trace)
        : m_(m), dt_(dt), hooks_(hooks), trace_(trace) {}

    double raw_subset_bound(const PermutationSubset& s) const {
        if (hooks_.override_fn && *hooks_.override_fn) return (*hooks_.override_fn)(s);
        return subset_upper_bound(m_, s).log_value;
    }

    double bound_in_force(const std::vector<std::pair<int, int>>& fixed, double raw) const {
        if (hooks_.read_cache) {
            if (const auto c = hooks_.read_cache->lookup(fixed); c && *c < raw) return *c;
        }
        return raw;
    }

    double subset_bound_in_force(const PermutationSubset& s) const {
        return bound_in_force(s.fixed, raw_subset_bound(s));
    }

    // Raw bounds of the children obtained by fixing column c of ctx's subset
    // to each free row in turn.
    void eval_candidate(const NodeCtx& ctx, int c, std::vector<double>& out) const {
        const PermutationSubset& s = ctx.subset;
        const std::size_t r = s.free_rows.size();
        out.assign(r, kNegInf);
        if (hooks_.override_fn && *hooks_.override_fn) {
            for (std::size_t i = 0; i < r; ++i) out[i] = (*hooks_.override_fn)(s.child(m_, c, s.free_rows[i]));
            return;
        }
        if (s.log_prefix_weight == kNegInf) return;

        // Row terms with column c removed, tracking rows whose term hits 0.
        lm_.resize(r);
        double t_fin = 0.0;
        int dead = 0;
        for (std::size_t i = 0; i < r; ++i) {
            const double term = ctx.rows[i].term_without(static_cast<std::size_t>(ctx.pos_of(static_cast<int>(i), c)));
            if (term <= 0.0) {
                lm_[i] = kNegInf;
                ++dead;
            } else {
                lm_[i] = std::log(term);
                t_fin += lm_[i];
            }
        }
        if (dead >= 2) return;
        for (std::size_t i = 0; i < r; ++i) {
            const double a = m_(s.free_rows[i], c);
            if (a == 0.0) continue;
            if (dead == 0) {
                out[i] = s.log_prefix_weight + std::log(a) + (t_fin - lm_[i]);
            } else if (lm_[i] == kNegInf) { // the only dead row is the one being fixed
                out[i] = s.log_prefix_weight + std::log(a) + t_fin;
            }
        }
    }

    // Column choice: arg-min of summed child bounds over all free columns
    // (ties to the smallest column index), or simply the smallest free column.
    int choose_column(const NodeCtx& ctx, ColumnPolicy policy, std::vector<double>& chosen_bounds) const {
        const auto& fc = ctx.subset.free_cols;
        if (policy == ColumnPolicy::FixedOrder) {
            eval_candidate(ctx, fc.front(), chosen_bounds);
            return fc.front();
        }
        int best_col = -1;
        double best_sum = std::numeric_limits<double>::infinity();
        for (const int c : fc) {
            eval_candidate(ctx, c, scratch_);
            const double sum = log_sum_exp(scratch_);
            if (best_col < 0 || sum < best_sum) {
                best_col = c;
                best_sum = sum;
                chosen_bounds = scratch_;
            }
        }
        return best_col;
    }

    // Builds the partition of ctx's subset per Algorithm 2: one refinement,
    // then (when allowed) in-place refinement of the largest-bound element
    // until the summed bounds nest under parent_in_force.
    ProcessedNode process_node(const NodeCtx& ctx, double parent_in_force, ColumnPolicy policy, bool allow_repair) {
        const PermutationSubset& s = ctx.subset;
        ProcessedNode node;
        std::vector<double> raw;
        node.chosen_column = choose_column(ctx, policy, raw);

        node.parts.reserve(raw.size());
        node.bounds.reserve(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            node.parts.push_back(s.child(m_, node.chosen_column, s.free_rows[i]));
            node.bounds.push_back(bound_in_force(node.parts.back().fixed, raw[i]));
        }
        node.log_total = log_sum_exp(node.bounds);

        while (node.log_total > parent_in_force + kNestTol) {
            if (!allow_repair) {
                node.first_try_nested = false;
                return node;
            }
            int best = -1;
            for (std::size_t i = 0; i < node.parts.size(); ++i) {
                if (node.parts[i].free_count() >= 2 && (best < 0 || node.bounds[i] > node.bounds[best]))
                    best = static_cast<int>(i);
            }
            if (best < 0) break; // all singletons: sums are exact weights, nothing to refine
            refine_in_place(ctx, node, static_cast<std::size_t>(best), policy);
            ++node.retries;
            node.log_total = log_sum_exp(node.bounds);
        }
        if (node.log_total > parent_in_force + 1e-9) {
            throw std::logic_error("nesting repair failed: children bound sum " + std::to_string(node.log_total) +
                                   " exceeds parent bound " + std::to_string(parent_in_force));
        }
        if (trace_) {
            *trace_ << "node depth=" << s.fixed.size() << " free=" << s.free_count() << " col=" << node.chosen_column
                    << " parent_log_ub=" << parent_in_force << " children_log_ub=" << node.log_total
                    << " retries=" << node.retries << "\n";
        }
        return node;
    }

private:
    // Replaces partition element `at` with the children of its own chosen
    // refinement (the repeat-until body of Algorithm 2).
    void refine_in_place(const NodeCtx& ctx, ProcessedNode& node, std::size_t at, ColumnPolicy policy) {
        const PermutationSubset elem = std::move(node.parts[at]);
        const NodeCtx ectx = ctx.descend(m_, dt_, elem);
        std::vector<double> raw;
        const int col = choose_column(ectx, policy, raw);

        std::vector<PermutationSubset> kids;
        std::vector<double> kid_bounds;
        kids.reserve(raw.size());
        kid_bounds.reserve(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            kids.push_back(elem.child(m_, col, elem.free_rows[i]));
            kid_bounds.push_back(bound_in_force(kids.back().fixed, raw[i]));
        }
        node.parts[at] = std::move(kids.front());
        node.bounds[at] = kid_bounds.front();
        for (std::size_t i = 1; i < kids.size(); ++i) {
            node.parts.push_back(std::move(kids[i]));
            node.bounds.push_back(kid_bounds[i]);
        }
    }

    const NonNegativeMatrix& m_;
    const DeltaTable& dt_;
    BoundHooks hooks_;
    std::ostream* trace_;
    mutable std::vector<double> lm_;
    mutable std::vector<double> scratch_;
};

} // namespace

// ---------------------------------------------------------------------------
// TighteningCache

TighteningCache::TighteningCache(std::size_t max_entries) : max_entries_(max_entries) {}

TighteningCache::Key TighteningCache::canonical(const std::vector<std::pair<int, int>>& fixed) {
    Key k;
    k.pairs = fixed;
    std::sort(k.pairs.begin(), k.pairs.end());
    // Order-independent combine, so the hash of the set is cheap to form from
    // any assignment order.
    std::uint64_t h = 0x9ae16a3b2f90404fULL;
    for (const auto& [c, r] : k.pairs) {
        h ^= splitmix64((static_cast<std::uint64_t>(static_cast<std::uint32_t>(c)) << 32) |
                        static_cast<std::uint32_t>(r));
    }
    k.hash = h + k.pairs.size();
    return k;
}

std::optional<double> TighteningCache::lookup(const std::vector<std::pair<int, int>>& fixed) const {
    const Key k = canonical(fixed);
    std::shared_lock lock(mu_);
    const auto it = map_.find(k);
    if (it == map_.end()) return std::nullopt;
    return it->second;
}

void TighteningCache::tighten(const std::vector<std::pair<int, int>>& fixed, double log_bound) {
    Key k = canonical(fixed);
    std::unique_lock lock(mu_);
    const auto it = map_.find(k);
    if (it != map_.end()) {
        it->second = std::min(it->second, log_bound);
    } else if (map_.size() < max_entries_) {
        map_.emplace(std::move(k), log_bound);
    }
}

std::size_t TighteningCache::size() const {
    std::shared_lock lock(mu_);
    return map_.size();
}

// ---------------------------------------------------------------------------
// Public partition operations

std::vector<PartitionCandidate> refine(const NonNegativeMatrix& m, const PermutationSubset& subset) {
    if (subset.free_count() < 2) throw InvalidArgs("refine requires a subset with >= 2 free columns");
    const auto dt = DeltaTable::shared(m.n());
    const NodeCtx ctx = NodeCtx::from_subset(m, subset, *dt);
    Engine eng(m, *dt, {}, nullptr);

    std::vector<PartitionCandidate> out;
    out.reserve(subset.free_cols.size());
    std::vector<double> raw;
    for (const int c : subset.free_cols) {
        eng.eval_candidate(ctx, c, raw);
        PartitionCandidate cand;
        cand.column = c;
        cand.children.reserve(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) cand.children.push_back(subset.child(m, c, subset.free_rows[i]));
        cand.child_log_bounds = raw;
        cand.log_ub_sum = log_sum_exp(raw);
        out.push_back(std::move(cand));
    }
    return out;
}

PartitionCandidate choose_refinement(const NonNegativeMatrix& m, const PermutationSubset& subset) {
    auto cands = refine(m, subset);
    std::size_t best = 0;
    for (std::size_t i = 1; i < cands.size(); ++i) {
        if (cands[i].log_ub_sum < cands[best].log_ub_sum) best = i; // ties keep the smaller column
    }
    return std::move(cands[best]);
}

NestingPartition build_nesting_partition(const NonNegativeMatrix& m, const PermutationSubset& subset,
                                         const TighteningCache* cache) {
    if (subset.free_count() < 2) throw InvalidArgs("build_nesting_partition requires a non-singleton subset");
    const auto dt = DeltaTable::shared(m.n());
    BoundHooks hooks;
    hooks.read_cache = cache;
    Engine eng(m, *dt, hooks, nullptr);
    const NodeCtx ctx = NodeCtx::from_subset(m, subset, *dt);
    const double parent = eng.subset_bound_in_force(subset);
    ProcessedNode node = eng.process_node(ctx, parent, ColumnPolicy::Adaptive, /*allow_repair=*/true);

    NestingPartition p;
    p.parts = std::move(node.parts);
    p.part_log_bounds = std::move(node.bounds);
    p.log_total_ub = node.log_total;
    p.retries = node.retries;
    return p;
}

// ---------------------------------------------------------------------------
// PermutationSampler

struct PermutationSampler::Impl {
    NonNegativeMatrix m;
    SamplerOptions opts;
    std::shared_ptr<const DeltaTable> dt;
    TighteningCache cache;
    NodeCtx root_ctx;
    double raw_root = 0.0;

    Impl(NonNegativeMatrix mat, SamplerOptions o)
        : m(std::move(mat)), opts(std::move(o)), dt(DeltaTable::shared(m.n())), cache(opts.cache_max_entries) {
        root_ctx = NodeCtx::from_subset(m, PermutationSubset::full(m.n()), *dt);
        raw_root = make_engine().raw_subset_bound(root_ctx.subset);
        if (raw_root == kNegInf) {
            throw ZeroPermanent("a row is entirely zero; no permutation has positive weight");
        }
        for (int c = 0; c < m.n(); ++c) {
            bool any = false;
            for (int r = 0; r < m.n(); ++r) any = any || m(r, c) != 0.0;
            if (!any) throw ZeroPermanent("column " + std::to_string(c + 1) +
                                          " is entirely zero; no permutation has positive weight");
        }
    }

    Engine make_engine() {
        BoundHooks hooks;
        hooks.override_fn = &opts.bound_override;
        if (opts.tighten) hooks.read_cache = &cache;
        return Engine(m, *dt, hooks, opts.trace);
    }

    double root_in_force(Engine& eng) const { return eng.bound_in_force(root_ctx.subset.fixed, raw_root); }

    // Bound and children-sum in force at one visited node of a trial's path.
    struct PathEntry {
        std::vector<std::pair<int, int>> key;
        double bound;
        double total;
    };

    // Sampling slack rejects the trial; the observed slack is then subtracted
    // from the bound of the rejecting node and of every ancestor on the path
    // (each ancestor's children-sum contains the tightened child linearly, so
    // nesting along the path is preserved exactly). The rejecting node itself
    // drops to its children-sum; an ancestor update is skipped when the slack
    // cancels its bound to within rounding, where the subtraction loses all
    // precision.
    void tighten_path(const std::vector<PathEntry>& path) {
        const PathEntry& last = path.back();
        cache.tighten(last.key, last.total);
        if (last.total >= last.bound) return;
        const double log_slack =
            last.total == kNegInf ? last.bound : last.bound + std::log1p(-std::exp(last.total - last.bound));
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            const PathEntry& e = path[i];
            if (log_slack > e.bound - 1e-9) continue;
            cache.tighten(e.key, e.bound + std::log1p(-std::exp(log_slack - e.bound)));
        }
    }

    // One accept-or-reject descent from the root.
    bool run_trial(Engine& eng, Method method, double root_now, Rng& rng, DrawResult& telemetry,
                   std::vector<int>& perm_out) {
        const NodeCtx* cur = &root_ctx;
        NodeCtx owned;
        double cur_bound = root_now;
        bool fallen = false;
        std::vector<PathEntry> path;

        for (;;) {
            if (cur->subset.is_singleton()) {
                perm_out = cur->subset.singleton_permutation(m.n());
                return true;
            }
            ColumnPolicy policy = ColumnPolicy::Adaptive;
            bool allow_repair = true;
            if (method == Method::Fixed || (method == Method::Guaranteed && fallen)) {
                policy = ColumnPolicy::FixedOrder;
            } else if (method == Method::Guaranteed) {
                allow_repair = false;
            }

            ProcessedNode node = eng.process_node(*cur, cur_bound, policy, allow_repair);
            if (!node.first_try_nested) {
                // One refine attempt failed to nest: this subtree is handled
                // by the fixed-order sampler from here on.
                fallen = true;
                ++telemetry.fallback_nodes;
                node = eng.process_node(*cur, cur_bound, ColumnPolicy::FixedOrder, /*allow_repair=*/true);
            }
            ++telemetry.node_visits;
            if (node.retries > 0) {
                ++telemetry.nodes_with_retries;
                telemetry.nesting_retries += node.retries;
            }

            if (opts.tighten) path.push_back({cur->subset.fixed, cur_bound, node.log_total});

            // Inverse-CDF draw over exponentiated log-bound differences; the
            // leftover mass is slack and rejects the trial.
            const double u = uniform01(rng);
            double acc = 0.0;
            int selected = -1;
            for (std::size_t i = 0; i < node.parts.size(); ++i) {
                acc += std::exp(node.bounds[i] - cur_bound);
                if (u < acc) {
                    selected = static_cast<int>(i);
                    break;
                }
            }
            if (selected < 0) {
                if (opts.tighten) tighten_path(path);
                return false;
            }

            owned = cur->descend(m, *dt, node.parts[selected]);
            cur = &owned;
            cur_bound = node.bounds[selected];
        }
    }

    DrawResult draw_impl(Method method, Rng& rng) {
        Engine eng = make_engine();
        DrawResult res;
        for (;;) {
            const double root_now = root_in_force(eng);
            if (root_now == kNegInf) {
                // Tightening collapsed the root: every subset died, so the
                // permanent is exactly zero.
                throw ZeroPermanent("tightened root bound reached zero; no permutation has positive weight");
            }
            if (run_trial(eng, method, root_now, rng, res, res.permutation)) {
                res.root_log_ub_at_draw = root_now;
                return res;
            }
            ++res.rejections;
            if (opts.max_rejections && res.rejections > *opts.max_rejections) {
                throw RejectionCapExceeded("rejection cap of " + std::to_string(*opts.max_rejections) +
                                           " exceeded; acceptance probability may be vanishing");
            }
        }
    }

    AcceptanceProbe probe(long trials, Rng& rng) {
        if (trials < 1) throw InvalidArgs("acceptance probe needs trials >= 1");
        Engine eng = make_engine();
        AcceptanceProbe out;
        out.trials = trials;
        out.per_trial_root_log_ub.reserve(trials);
        DrawResult scratch;
        std::vector<int> perm;
        for (long t = 0; t < trials; ++t) {
            const double root_now = root_in_force(eng);
            if (root_now == kNegInf) {
                throw ZeroPermanent("tightened root bound reached zero; no permutation has positive weight");
            }
            out.per_trial_root_log_ub.push_back(root_now);
            if (run_trial(eng, Method::Adaptive, root_now, rng, scratch, perm)) ++out.accepted;
        }
        return out;
    }
};

PermutationSampler::PermutationSampler(NonNegativeMatrix m, SamplerOptions opts)
    : impl_(std::make_unique<Impl>(std::move(m), std::move(opts))) {}
PermutationSampler::~PermutationSampler() = default;
PermutationSampler::PermutationSampler(PermutationSampler&&) noexcept = default;
PermutationSampler& PermutationSampler::operator=(PermutationSampler&&) noexcept = default;

DrawResult PermutationSampler::draw(Rng& rng) { return impl_->draw_impl(Method::Adaptive, rng); }
DrawResult PermutationSampler::draw_fixed(Rng& rng) { return impl_->draw_impl(Method::Fixed, rng); }
DrawResult PermutationSampler::draw_guaranteed(Rng& rng) { return impl_->draw_impl(Method::Guaranteed, rng); }
AcceptanceProbe PermutationSampler::acceptance_probe(long trials, Rng& rng) { return impl_->probe(trials, rng); }

const NonNegativeMatrix& PermutationSampler::matrix() const { return impl_->m; }
double PermutationSampler::raw_root_log_upper_bound() const { return impl_->raw_root; }
double PermutationSampler::root_log_upper_bound() const {
    Engine eng = impl_->make_engine();
    return impl_->root_in_force(eng);
}
TighteningCache& PermutationSampler::cache() { return impl_->cache; }

DrawResult draw_adapart(const NonNegativeMatrix& m, Rng& rng, const SamplerOptions& cfg) {
    return PermutationSampler(m, cfg).draw(rng);
}
DrawResult draw_fixed_partition(const NonNegativeMatrix& m, Rng& rng, const SamplerOptions& cfg) {
    return PermutationSampler(m, cfg).draw_fixed(rng);
}
DrawResult draw_guaranteed(const NonNegativeMatrix& m, Rng& rng, const SamplerOptions& cfg) {
    return PermutationSampler(m, cfg).draw_guaranteed(rng);
}
AcceptanceProbe acceptance_rate_probe(const NonNegativeMatrix& m, long trials, Rng& rng, const SamplerOptions& cfg) {
    return PermutationSampler(m, cfg).acceptance_probe(trials, rng);
}

} // namespace permsamp
