// permsamp: exact sampling of weighted permutations and high-probability
// permanent bounds, with a multi-target tracking demo.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "permsamp/estimator.hpp"
#include "permsamp/exact.hpp"
#include "permsamp/matrix_market.hpp"
#include "permsamp/sampler.hpp"
#include "permsamp/tracking.hpp"

namespace {

using namespace permsamp;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// Log-scale everywhere; the linear value is printed additionally when it is
// representable at a glance.
void print_log_quantity(const std::string& name, double log_value) {
    std::cout << "log_" << name << "= " << fmt(log_value) << "\n";
    if (std::isfinite(log_value) && std::abs(log_value) < 30.0) {
        std::cout << name << "= " << fmt(std::exp(log_value)) << "\n";
    }
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::string cur;
    for (const char c : csv + ",") {
        if (c == ',') {
            if (!cur.empty()) out.push_back(std::stoi(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (out.empty()) throw CLI::ValidationError("expected a comma-separated list of integers");
    return out;
}

std::ofstream open_csv(const std::string& path, const std::string& header) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream out(path, std::ios::app);
    if (!out) throw InputError("cannot open " + path + " for writing");
    if (fresh) out << header << "\n";
    return out;
}

void run_gen(const std::string& kind, int n, int k, std::uint64_t seed, const std::string& out_path) {
    GeneratorSpec spec;
    spec.kind = kind == "uniform" ? GeneratorKind::Uniform : GeneratorKind::BlockDiagonal;
    spec.n = n;
    spec.block_size = k;
    spec.seed = seed;
    write_matrix_market(generate(spec), out_path);
    std::cout << "wrote " << out_path << " (n=" << n << ", kind=" << kind << ", seed=" << seed << ")\n";
}

void run_exact(const std::string& path) {
    const auto m = read_matrix_market(path);
    if (m.n() > 30) {
        throw DimensionTooLarge("exact permanent limited to n <= 30 (got n = " + std::to_string(m.n()) +
                                "); use `permanent estimate` for larger matrices");
    }
    const double per = permanent_ryser(m);
    print_log_quantity("permanent", per > 0.0 ? std::log(per) : -std::numeric_limits<double>::infinity());
}

void run_bound(const std::string& path) {
    const auto m = read_matrix_market(path);
    std::vector<int> all(m.n());
    std::iota(all.begin(), all.end(), 0);
    print_log_quantity("upper_bound", soules_upper_bound(m, all, all).log_value);
}

void run_sample(const std::string& path, long count, std::uint64_t seed, const std::string& method, bool tighten,
                long max_rejections, bool verbose) {
    const auto m = read_matrix_market(path);
    SamplerOptions opts;
    opts.tighten = tighten;
    if (max_rejections >= 0) opts.max_rejections = max_rejections;
    if (verbose) opts.trace = &std::cerr;
    PermutationSampler sampler(m, opts);
    Rng rng(seed);

    long total_rejections = 0;
    long total_retries = 0;
    for (long i = 0; i < count; ++i) {
        const DrawResult d = method == "fixed"        ? sampler.draw_fixed(rng)
                             : method == "guaranteed" ? sampler.draw_guaranteed(rng)
                                                      : sampler.draw(rng);
        std::cout << "perm=";
        for (const int row : d.permutation) std::cout << " " << row + 1;
        std::cout << " rejections= " << d.rejections << "\n";
        total_rejections += d.rejections;
        total_retries += d.nesting_retries;
    }
    std::cout << "draws= " << count << "\n";
    std::cout << "mean_rejections= " << fmt(static_cast<double>(total_rejections) / count) << "\n";
    std::cout << "nesting_retries= " << total_retries << "\n";
    print_log_quantity("root_upper_bound", sampler.root_log_upper_bound());
}

void run_estimate(const std::string& path, long trials, long accepts, double confidence, std::uint64_t seed,
                  bool tighten, long bootstrap_b, int threads, const std::string& csv_path) {
    const auto m = read_matrix_market(path);
    const double alpha = 1.0 - confidence;
    EstimateReport rep;
    if (tighten) {
        TighteningEstimateOptions opts;
        if (accepts > 0) {
            opts.target_accepts = accepts;
        } else {
            opts.trials = trials;
        }
        opts.alpha = alpha;
        opts.bootstrap_replicates = bootstrap_b;
        Rng rng(seed);
        rep = estimate_tightening(m, opts, rng);
    } else {
        if (accepts > 0) throw InvalidArgs("--accepts requires --tighten");
        rep = estimate_fixed_bound_parallel(m, trials, alpha, seed, threads);
    }

    std::cout << "matrix= " << path << "\n";
    std::cout << "n= " << m.n() << "\n";
    std::cout << "trials= " << rep.trials << "\n";
    std::cout << "accepted= " << rep.accepted << "\n";
    if (rep.log_point_estimate) {
        print_log_quantity("point_estimate", *rep.log_point_estimate);
    } else {
        std::cout << "log_point_estimate= none (no accepted trials)\n";
    }
    if (rep.log_lower) std::cout << "log_lower= " << fmt(*rep.log_lower) << "\n";
    std::cout << "log_upper= " << fmt(rep.log_upper) << "\n";
    std::cout << "confidence= " << fmt(rep.confidence) << "\n";
    std::cout << "method= " << (rep.method == EstimateReport::Method::ClopperPearson ? "clopper-pearson" : "bootstrap")
              << "\n";

    if (!csv_path.empty()) {
        auto csv = open_csv(csv_path,
                            "matrix,n,method,trials,accepted,confidence,log_point_estimate,log_lower,log_upper");
        csv << path << "," << m.n() << ","
            << (rep.method == EstimateReport::Method::ClopperPearson ? "clopper-pearson" : "bootstrap") << ","
            << rep.trials << "," << rep.accepted << "," << fmt(rep.confidence) << ","
            << (rep.log_point_estimate ? fmt(*rep.log_point_estimate) : "") << ","
            << (rep.log_lower ? fmt(*rep.log_lower) : "") << "," << fmt(rep.log_upper) << "\n";
    }
}

void run_bench(const std::string& sizes_csv, const std::string& kind, int k, long samples, std::uint64_t seed,
               const std::string& method, bool tighten, const std::string& out_path) {
    auto csv = open_csv(out_path, "method,kind,n,k,samples,mean_wall_s,median_wall_s,mean_rejections");
    std::vector<std::string> methods;
    if (method == "all") {
        methods = {"adapart", "fixed"};
    } else {
        methods = {method};
    }
    for (const int n : parse_int_list(sizes_csv)) {
        GeneratorSpec spec;
        spec.kind = kind == "uniform" ? GeneratorKind::Uniform : GeneratorKind::BlockDiagonal;
        spec.n = n;
        spec.block_size = std::min(k, n);
        spec.seed = split_seed(seed, static_cast<std::uint64_t>(n));
        const auto m = generate(spec);
        for (const std::string& meth : methods) {
            SamplerOptions sopts;
            sopts.tighten = tighten;
            PermutationSampler sampler(m, sopts);
            Rng rng(seed);
            std::vector<double> times;
            double rejections = 0.0;
            for (long s = 0; s < samples; ++s) {
                const auto t0 = std::chrono::steady_clock::now();
                const DrawResult d = meth == "fixed"        ? sampler.draw_fixed(rng)
                                     : meth == "guaranteed" ? sampler.draw_guaranteed(rng)
                                                            : sampler.draw(rng);
                const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
                times.push_back(dt.count());
                rejections += d.rejections;
            }
            std::sort(times.begin(), times.end());
            const double mean = std::accumulate(times.begin(), times.end(), 0.0) / samples;
            const double median = times[times.size() / 2];
            csv << meth << "," << kind << "," << n << "," << spec.block_size << "," << samples << "," << fmt(mean)
                << "," << fmt(median) << "," << fmt(rejections / samples) << "\n";
            std::cout << meth << " n=" << n << " mean_wall_s=" << fmt(mean) << " mean_rejections="
                      << fmt(rejections / samples) << "\n";
        }
    }
}

void run_track(int targets, int steps, const std::string& particles_csv, const std::string& proposal,
               std::uint64_t seed, long estimate_trials, const std::string& out_path) {
    const auto model = LinearGaussianModel::spring_targets(targets);
    const auto scenario = simulate(model, steps, seed);
    const ProposalKind kind = proposal == "sequential" ? ProposalKind::Sequential : ProposalKind::Optimal;
    auto csv = open_csv(out_path, "method,targets,particles,step,max_log_likelihood,mse,wall_s");
    for (const int n_particles : parse_int_list(particles_csv)) {
        Rng rng(split_seed(seed, static_cast<std::uint64_t>(n_particles)));
        const RbpfRun run = run_rbpf(model, scenario, n_particles, kind, estimate_trials, rng);
        for (const auto& step : run.steps) {
            csv << proposal << "," << targets << "," << n_particles << "," << step.step << ","
                << fmt(step.max_log_likelihood) << "," << fmt(step.mse) << "," << fmt(step.wall_s) << "\n";
        }
        const auto& last = run.steps.back();
        std::cout << proposal << " N=" << n_particles << " max_log_likelihood=" << fmt(last.max_log_likelihood)
                  << " mse=" << fmt(last.mse) << "\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact permutation sampling, permanent bounds, and multi-target tracking"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a random matrix and write it as Matrix Market");
    std::string gen_kind;
    int gen_n = 0, gen_k = 1;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("kind", gen_kind, "matrix family")->required()->check(CLI::IsMember({"uniform", "block-diag"}));
    gen->add_option("--n", gen_n, "dimension")->required()->check(CLI::PositiveNumber);
    gen->add_option("--k", gen_k, "block size (block-diag only)")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "rng seed")->required();
    gen->add_option("--out", gen_out, "output path")->required();
    gen->callback([&] { run_gen(gen_kind, gen_n, gen_k, gen_seed, gen_out); });

    // permanent {exact,bound,sample,estimate}
    auto* perm = app.add_subcommand("permanent", "exact values, bounds, samples and estimates");
    perm->require_subcommand(1);

    std::string exact_path;
    auto* p_exact = perm->add_subcommand("exact", "Ryser permanent (n <= 30)");
    p_exact->add_option("path", exact_path, "Matrix Market file")->required();
    p_exact->callback([&] { run_exact(exact_path); });

    std::string bound_path;
    auto* p_bound = perm->add_subcommand("bound", "row-sorted product upper bound");
    p_bound->add_option("path", bound_path, "Matrix Market file")->required();
    p_bound->callback([&] { run_bound(bound_path); });

    std::string sample_path, sample_method = "adapart";
    long sample_count = 1, sample_cap = -1;
    std::uint64_t sample_seed = 0;
    bool sample_tighten = false, sample_verbose = false;
    auto* p_sample = perm->add_subcommand("sample", "draw exact permutation samples");
    p_sample->add_option("path", sample_path)->required();
    p_sample->add_option("--count", sample_count, "number of draws")->check(CLI::PositiveNumber);
    p_sample->add_option("--seed", sample_seed)->required();
    p_sample->add_option("--method", sample_method)->check(CLI::IsMember({"adapart", "fixed", "guaranteed"}));
    p_sample->add_flag("--tighten", sample_tighten, "tighten bounds on rejection");
    p_sample->add_option("--max-rejections", sample_cap, "abort a draw past this many rejections");
    p_sample->add_flag("--verbose", sample_verbose, "trace each node visit to stderr");
    p_sample->callback([&] {
        run_sample(sample_path, sample_count, sample_seed, sample_method, sample_tighten, sample_cap, sample_verbose);
    });

    std::string est_path, est_csv;
    long est_trials = 1000, est_accepts = 0, est_bootstrap = 100000;
    double est_conf = 0.95;
    std::uint64_t est_seed = 0;
    bool est_tighten = false;
    int est_threads = static_cast<int>(std::thread::hardware_concurrency());
    auto* p_est = perm->add_subcommand("estimate", "estimate the permanent with high-probability bounds");
    p_est->add_option("path", est_path)->required();
    p_est->add_option("--trials", est_trials)->check(CLI::PositiveNumber);
    p_est->add_option("--accepts", est_accepts, "run until this many accepted samples (tighten mode)");
    p_est->add_option("--confidence", est_conf)->check(CLI::Range(0.0, 1.0));
    p_est->add_option("--seed", est_seed)->required();
    p_est->add_flag("--tighten", est_tighten, "tighten bounds on rejection; bootstrap interval");
    p_est->add_option("--bootstrap-b", est_bootstrap, "bootstrap replicates")->check(CLI::PositiveNumber);
    p_est->add_option("--threads", est_threads, "worker threads (fixed-bound mode)")->check(CLI::PositiveNumber);
    p_est->add_option("--csv", est_csv, "append a CSV row to this file");
    p_est->callback([&] {
        run_estimate(est_path, est_trials, est_accepts, est_conf, est_seed, est_tighten, est_bootstrap, est_threads,
                     est_csv);
    });

    // bench scaling
    auto* bench = app.add_subcommand("bench", "timing benchmarks");
    bench->require_subcommand(1);
    std::string bench_sizes = "10,20,40,80", bench_kind = "uniform", bench_method = "all", bench_out;
    int bench_k = 10;
    long bench_samples = 5;
    std::uint64_t bench_seed = 0;
    bool bench_tighten = false;
    auto* b_scaling = bench->add_subcommand("scaling", "per-size mean wall time and rejections");
    b_scaling->add_option("--sizes", bench_sizes, "comma-separated matrix sizes");
    b_scaling->add_option("--kind", bench_kind)->check(CLI::IsMember({"uniform", "block-diag"}));
    b_scaling->add_option("--k", bench_k, "block size")->check(CLI::PositiveNumber);
    b_scaling->add_option("--samples", bench_samples)->check(CLI::PositiveNumber);
    b_scaling->add_option("--seed", bench_seed)->required();
    b_scaling->add_option("--method", bench_method)->check(CLI::IsMember({"adapart", "fixed", "guaranteed", "all"}));
    b_scaling->add_flag("--tighten", bench_tighten, "tighten bounds on rejection during timing");
    b_scaling->add_option("--out", bench_out, "CSV output path")->required();
    b_scaling->callback([&] {
        run_bench(bench_sizes, bench_kind, bench_k, bench_samples, bench_seed, bench_method, bench_tighten, bench_out);
    });

    // track run
    auto* track = app.add_subcommand("track", "multi-target tracking demo");
    track->require_subcommand(1);
    int track_targets = 5, track_steps = 20;
    std::string track_particles = "10", track_proposal = "optimal", track_out;
    std::uint64_t track_seed = 0;
    long track_est_trials = 10;
    auto* t_run = track->add_subcommand("run", "run the RBPF over a simulated scenario");
    t_run->add_option("--targets", track_targets)->check(CLI::PositiveNumber);
    t_run->add_option("--steps", track_steps)->check(CLI::PositiveNumber);
    t_run->add_option("--particles", track_particles, "comma-separated particle counts");
    t_run->add_option("--proposal", track_proposal)->check(CLI::IsMember({"optimal", "sequential"}));
    t_run->add_option("--seed", track_seed)->required();
    t_run->add_option("--estimate-trials", track_est_trials, "permanent-estimate trials per particle-step");
    t_run->add_option("--out", track_out, "CSV output path")->required();
    t_run->callback([&] {
        run_track(track_targets, track_steps, track_particles, track_proposal, track_seed, track_est_trials,
                  track_out);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ResourceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
