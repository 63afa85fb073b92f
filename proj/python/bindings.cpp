#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "permsamp/bounds.hpp"
#include "permsamp/estimator.hpp"
#include "permsamp/exact.hpp"
#include "permsamp/matrix_market.hpp"
#include "permsamp/sampler.hpp"
#include "permsamp/tracking.hpp"

namespace py = pybind11;
using namespace permsamp;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

NonNegativeMatrix to_matrix(const DoubleArray& a) {
    if (a.ndim() != 2 || a.shape(0) != a.shape(1)) {
        throw InvalidArgs("expected a square 2-D array");
    }
    const auto n = static_cast<int>(a.shape(0));
    std::vector<double> entries(a.data(), a.data() + static_cast<std::size_t>(n) * n);
    return NonNegativeMatrix(n, std::move(entries));
}

py::array_t<double> from_matrix(const NonNegativeMatrix& m) {
    py::array_t<double> out({m.n(), m.n()});
    std::copy(m.entries().begin(), m.entries().end(), out.mutable_data());
    return out;
}

SamplerOptions make_options(bool tighten, std::optional<long> max_rejections) {
    SamplerOptions opts;
    opts.tighten = tighten;
    opts.max_rejections = max_rejections;
    return opts;
}

py::dict report_to_dict(const EstimateReport& rep) {
    py::dict d;
    d["trials"] = rep.trials;
    d["accepted"] = rep.accepted;
    d["log_point_estimate"] = rep.log_point_estimate ? py::object(py::float_(*rep.log_point_estimate)) : py::none();
    d["log_lower"] = rep.log_lower ? py::object(py::float_(*rep.log_lower)) : py::none();
    d["log_upper"] = rep.log_upper;
    d["confidence"] = rep.confidence;
    d["method"] = rep.method == EstimateReport::Method::ClopperPearson ? "clopper-pearson" : "bootstrap";
    d["per_trial_root_log_ub"] = rep.per_trial_root_log_ub;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Exact sampling of matrix-weighted permutations and permanent estimation";

    py::register_exception<DimensionTooLarge>(m, "DimensionTooLargeError", PyExc_ValueError);
    py::register_exception<RejectionCapExceeded>(m, "RejectionCapExceededError", PyExc_RuntimeError);
    py::register_exception<ZeroPermanent>(m, "ZeroPermanentError", PyExc_ValueError);
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);

    m.def(
        "generate_uniform",
        [](int n, std::uint64_t seed) { return from_matrix(generate({GeneratorKind::Uniform, n, 1, seed})); },
        py::arg("n"), py::arg("seed"), "n x n matrix with i.i.d. uniform [0,1) entries");

    m.def(
        "generate_block_diagonal",
        [](int n, int k, std::uint64_t seed) {
            return from_matrix(generate({GeneratorKind::BlockDiagonal, n, k, seed}));
        },
        py::arg("n"), py::arg("k"), py::arg("seed"),
        "n x n matrix of k x k uniform blocks along the diagonal");

    m.def(
        "read_matrix_market", [](const std::string& path) { return from_matrix(read_matrix_market(path)); },
        py::arg("path"));
    m.def(
        "write_matrix_market",
        [](const DoubleArray& a, const std::string& path) { write_matrix_market(to_matrix(a), path); },
        py::arg("matrix"), py::arg("path"));

    m.def(
        "permanent_brute_force", [](const DoubleArray& a) { return permanent_brute_force(to_matrix(a)); },
        py::arg("matrix"), "Permanent by full enumeration (n <= 9)");
    m.def(
        "permanent_ryser", [](const DoubleArray& a) { return permanent_ryser(to_matrix(a)); }, py::arg("matrix"),
        "Permanent by Ryser inclusion-exclusion (n <= 30)");
    m.def(
        "permanent_block_diagonal",
        [](const DoubleArray& a, int k) { return permanent_block_diagonal(to_matrix(a), k); }, py::arg("matrix"),
        py::arg("block_size"));

    m.def(
        "log_upper_bound",
        [](const DoubleArray& a) {
            const auto m_ = to_matrix(a);
            std::vector<int> all(m_.n());
            for (int i = 0; i < m_.n(); ++i) all[i] = i;
            return soules_upper_bound(m_, all, all).log_value;
        },
        py::arg("matrix"), "Log of the row-sorted product upper bound on the permanent");

    m.def(
        "sample_permutations",
        [](const DoubleArray& a, long count, std::uint64_t seed, const std::string& method, bool tighten,
           std::optional<long> max_rejections) {
            const auto mat = to_matrix(a);
            PermutationSampler sampler(mat, make_options(tighten, max_rejections));
            Rng rng(seed);
            py::array_t<long> perms({count, static_cast<long>(mat.n())});
            py::array_t<long> rejections(count);
            for (long i = 0; i < count; ++i) {
                const DrawResult d = method == "fixed"        ? sampler.draw_fixed(rng)
                                     : method == "guaranteed" ? sampler.draw_guaranteed(rng)
                                                              : sampler.draw(rng);
                for (int c = 0; c < mat.n(); ++c) {
                    perms.mutable_at(i, c) = d.permutation[c];
                }
                rejections.mutable_at(i) = d.rejections;
            }
            return py::make_tuple(perms, rejections);
        },
        py::arg("matrix"), py::arg("count"), py::arg("seed"), py::arg("method") = "adapart",
        py::arg("tighten") = false, py::arg("max_rejections") = py::none(),
        "Draw exact samples; returns (permutations, rejections) where row i maps column c to "
        "permutations[i, c]");

    m.def(
        "clopper_pearson", [](long a, long trials, double alpha) { return clopper_pearson(a, trials, alpha); },
        py::arg("accepted"), py::arg("trials"), py::arg("alpha"));

    m.def(
        "estimate_fixed_bound",
        [](const DoubleArray& a, long trials, double alpha, std::uint64_t seed, int threads) {
            const auto mat = to_matrix(a);
            EstimateReport rep;
            {
                py::gil_scoped_release release;
                rep = estimate_fixed_bound_parallel(mat, trials, alpha, seed, threads);
            }
            return report_to_dict(rep);
        },
        py::arg("matrix"), py::arg("trials"), py::arg("alpha") = 0.05, py::arg("seed") = 0, py::arg("threads") = 1);

    m.def(
        "estimate_tightening",
        [](const DoubleArray& a, std::optional<long> trials, std::optional<long> target_accepts, double alpha,
           std::uint64_t seed, long bootstrap_b) {
            const auto mat = to_matrix(a);
            TighteningEstimateOptions opts;
            if (trials) opts.trials = *trials;
            opts.target_accepts = target_accepts;
            opts.alpha = alpha;
            opts.bootstrap_replicates = bootstrap_b;
            Rng rng(seed);
            EstimateReport rep;
            {
                py::gil_scoped_release release;
                rep = estimate_tightening(mat, opts, rng);
            }
            return report_to_dict(rep);
        },
        py::arg("matrix"), py::arg("trials") = py::none(), py::arg("target_accepts") = py::none(),
        py::arg("alpha") = 0.05, py::arg("seed") = 0, py::arg("bootstrap_b") = 100000);

    m.def(
        "bound_improvement_ratio",
        [](const DoubleArray& a, long draws, std::uint64_t seed) {
            const auto mat = to_matrix(a);
            Rng rng(seed);
            py::gil_scoped_release release;
            return bound_improvement_ratio(mat, draws, rng);
        },
        py::arg("matrix"), py::arg("draws"), py::arg("seed"));

    m.def(
        "track_demo",
        [](int targets, int steps, int particles, const std::string& proposal, std::uint64_t seed,
           long estimate_trials) {
            py::gil_scoped_release release;
            const auto model = LinearGaussianModel::spring_targets(targets);
            const auto scenario = simulate(model, steps, seed);
            Rng rng(split_seed(seed, 1));
            const auto run =
                run_rbpf(model, scenario, particles,
                         proposal == "sequential" ? ProposalKind::Sequential : ProposalKind::Optimal,
                         estimate_trials, rng);
            const auto score = evaluate(scenario, run.particles);
            py::gil_scoped_acquire acquire;
            py::dict d;
            d["max_log_likelihood"] = score.max_log_likelihood;
            d["mse"] = score.mse;
            return d;
        },
        py::arg("targets"), py::arg("steps"), py::arg("particles"), py::arg("proposal") = "optimal",
        py::arg("seed") = 0, py::arg("estimate_trials") = 10,
        "Simulate a spring-target scenario and run the RBPF once; returns summary metrics");

#ifdef PERMSAMP_VERSION
#define PERMSAMP_STR2(x) #x
#define PERMSAMP_STR(x) PERMSAMP_STR2(x)
    m.attr("__version__") = PERMSAMP_STR(PERMSAMP_VERSION);
#else
    m.attr("__version__") = "dev";
#endif
}
