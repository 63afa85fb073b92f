#include "permsamp/tracking.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "permsamp/estimator.hpp"
#include "permsamp/exact.hpp"
#include "permsamp/sampler.hpp"

namespace permsamp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Symmetric PSD square root via eigendecomposition, tolerating zero matrices.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::VectorXd gaussian_vector(int dim, GaussianDraw& g, Rng& rng) {
    Eigen::VectorXd z(dim);
    for (int i = 0; i < dim; ++i) z(i) = g(rng);
    return z;
}

} // namespace

LinearGaussianModel LinearGaussianModel::spring_targets(int num_targets) {
    if (num_targets < 1) throw InvalidArgs("spring_targets needs at least one target");
    LinearGaussianModel m;
    m.state_dim = 4;
    m.obs_dim = 2;
    m.process_noise = 0.01 * Eigen::MatrixXd::Identity(4, 4);
    m.observation = Eigen::MatrixXd::Zero(2, 4);
    m.observation(0, 0) = 1.0;
    m.observation(1, 1) = 1.0;
    m.measurement_noise = 0.1 * Eigen::MatrixXd::Identity(2, 2);

    constexpr double damping = 0.1;
    constexpr double dt = 1.0;
    for (int k = 0; k < num_targets; ++k) {
        const double omega = 0.2 + 0.05 * (k + 1);
        // Exact matrix exponential of [[0, 1], [-w^2, -c]] per axis; the
        // oscillator is underdamped since omega > c/2 for every target.
        const double wd = std::sqrt(omega * omega - damping * damping / 4.0);
        const double e = std::exp(-damping * dt / 2.0);
        const double cwt = std::cos(wd * dt), swt = std::sin(wd * dt);
        Eigen::Matrix2d axis;
        axis << e * (cwt + (damping / 2.0) * swt / wd), e * swt / wd, //
            -e * omega * omega * swt / wd, e * (cwt - (damping / 2.0) * swt / wd);

        Eigen::MatrixXd F = Eigen::MatrixXd::Zero(4, 4);
        for (int axis_i = 0; axis_i < 2; ++axis_i) {
            F(axis_i, axis_i) = axis(0, 0);
            F(axis_i, 2 + axis_i) = axis(0, 1);
            F(2 + axis_i, axis_i) = axis(1, 0);
            F(2 + axis_i, 2 + axis_i) = axis(1, 1);
        }
        m.transition.push_back(std::move(F));

        // Anchors on a radius-2.5 circle: unit prior spread and oscillation
        // through the center keep measurement-target associations ambiguous,
        // which is the regime the association sampler is for.
        const double theta = 2.0 * std::numbers::pi * k / num_targets;
        Eigen::VectorXd anchor(4);
        anchor << 2.5 * std::cos(theta), 2.5 * std::sin(theta), 0.0, 0.0;
        m.prior_mean.push_back(std::move(anchor));
        m.prior_cov.push_back(Eigen::MatrixXd::Identity(4, 4));
    }
    return m;
}

KalmanUpdateResult kalman_update(const Eigen::VectorXd& pred_mean, const Eigen::MatrixXd& pred_cov,
                                 const Eigen::VectorXd& measurement, const LinearGaussianModel& model) {
    const Eigen::MatrixXd& H = model.observation;
    const Eigen::MatrixXd& R = model.measurement_noise;
    const Eigen::MatrixXd innovation_cov = H * pred_cov * H.transpose() + R;

    const Eigen::LLT<Eigen::MatrixXd> llt(innovation_cov);
    if (llt.info() != Eigen::Success) {
        throw SingularInnovationCovariance("innovation covariance is not positive definite");
    }
    const Eigen::VectorXd innovation = measurement - H * pred_mean;
    const Eigen::MatrixXd gain = pred_cov * H.transpose() * llt.solve(Eigen::MatrixXd::Identity(
                                                                H.rows(), H.rows()));

    KalmanUpdateResult out;
    out.mean = pred_mean + gain * innovation;
    const Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(pred_cov.rows(), pred_cov.cols()) - gain * H;
    Eigen::MatrixXd cov = ikh * pred_cov * ikh.transpose() + gain * R * gain.transpose();
    out.cov = 0.5 * (cov + cov.transpose());

    double log_det = 0.0;
    const auto& L = llt.matrixL();
    for (int i = 0; i < innovation_cov.rows(); ++i) log_det += 2.0 * std::log(L(i, i));
    const double maha = innovation.dot(llt.solve(innovation));
    out.log_likelihood =
        -0.5 * (measurement.size() * std::log(2.0 * std::numbers::pi) + log_det + maha);
    return out;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> kalman_predict(const Eigen::VectorXd& post_mean,
                                                           const Eigen::MatrixXd& post_cov,
                                                           const LinearGaussianModel& model, int target) {
    const Eigen::MatrixXd& F = model.transition.at(target);
    Eigen::MatrixXd cov = F * post_cov * F.transpose() + model.process_noise;
    return {F * post_mean, 0.5 * (cov + cov.transpose())};
}

AssociationLikelihood association_matrix(const ParticleState& particle,
                                         const std::vector<Eigen::VectorXd>& measurements,
                                         const LinearGaussianModel& model) {
    const int k_targets = model.num_targets();
    if (static_cast<int>(measurements.size()) != k_targets) {
        throw InvalidArgs("fixed cardinality: need exactly one measurement per target");
    }
    std::vector<double> loglik(static_cast<std::size_t>(k_targets) * k_targets);
    double hi = kNegInf;
    for (int k = 0; k < k_targets; ++k) {
        const Eigen::VectorXd pred_obs = model.observation * particle.pred_mean[k];
        const Eigen::MatrixXd obs_cov =
            model.observation * particle.pred_cov[k] * model.observation.transpose() + model.measurement_noise;
        const Eigen::LLT<Eigen::MatrixXd> llt(obs_cov);
        if (llt.info() != Eigen::Success) {
            throw SingularInnovationCovariance("predictive observation covariance is not positive definite");
        }
        double log_det = 0.0;
        const auto& L = llt.matrixL();
        for (int i = 0; i < obs_cov.rows(); ++i) log_det += 2.0 * std::log(L(i, i));
        for (int j = 0; j < k_targets; ++j) {
            const Eigen::VectorXd d = measurements[j] - pred_obs;
            const double ll =
                -0.5 * (d.size() * std::log(2.0 * std::numbers::pi) + log_det + d.dot(llt.solve(d)));
            loglik[static_cast<std::size_t>(j) * k_targets + k] = ll;
            hi = std::max(hi, ll);
        }
    }
    std::vector<double> entries(loglik.size());
    for (std::size_t i = 0; i < loglik.size(); ++i) entries[i] = std::exp(loglik[i] - hi);
    return {NonNegativeMatrix(k_targets, std::move(entries)), hi};
}

std::vector<ParticleState> init_particles(const LinearGaussianModel& model, int num_particles) {
    if (num_particles < 1) throw InvalidArgs("need at least one particle");
    ParticleState proto;
    proto.log_weight = -std::log(static_cast<double>(num_particles));
    proto.pred_mean = model.prior_mean;
    proto.pred_cov = model.prior_cov;
    return std::vector<ParticleState>(num_particles, proto);
}

namespace {

// Sequential proposal: assign targets in index order, each categorical over
// the still-unassigned measurements proportional to A(j,k). Returns the
// permutation and the log proposal correction sum_k log(denominator_k).
std::pair<std::vector<int>, double> sample_sequential(const NonNegativeMatrix& a, Rng& rng) {
    const int n = a.n();
    std::vector<int> pi(n, -1);
    std::vector<bool> used(n, false);
    double log_denoms = 0.0;
    for (int k = 0; k < n; ++k) {
        double denom = 0.0;
        for (int j = 0; j < n; ++j)
            if (!used[j]) denom += a(j, k);
        if (denom <= 0.0) {
            // No compatible measurement left; finish arbitrarily with zero weight.
            for (int j = 0; j < n; ++j)
                if (!used[j]) {
                    pi[k] = j;
                    used[j] = true;
                    break;
                }
            log_denoms = kNegInf;
            continue;
        }
        const double u = uniform01(rng) * denom;
        double acc = 0.0;
        int pick = -1;
        for (int j = 0; j < n; ++j) {
            if (used[j]) continue;
            acc += a(j, k);
            if (u < acc) {
                pick = j;
                break;
            }
        }
        if (pick < 0) { // numerical edge: take the last unassigned
            for (int j = n - 1; j >= 0; --j)
                if (!used[j]) {
                    pick = j;
                    break;
                }
        }
        pi[k] = pick;
        used[pick] = true;
        log_denoms += std::log(denom);
    }
    return {pi, log_denoms};
}

} // namespace

std::vector<ParticleState> rbpf_step(const std::vector<ParticleState>& particles,
                                     const std::vector<Eigen::VectorXd>& measurements,
                                     const LinearGaussianModel& model, ProposalKind proposal,
                                     long per_estimate_trials, Rng& rng) {
    if (particles.empty()) throw InvalidArgs("rbpf_step needs a nonempty particle set");
    const int k_targets = model.num_targets();
    std::vector<ParticleState> next = particles;

    for (ParticleState& p : next) {
        const AssociationLikelihood al = association_matrix(p, measurements, model);
        std::vector<int> pi;
        double log_assoc_scaled = 0.0; // sum_k log A(pi(k), k)

        if (proposal == ProposalKind::Optimal) {
            // Tightening keeps draws fast on near-degenerate association
            // matrices (each rejection shrinks the envelope); the cap guards
            // the filter's step time, demoting the particle instead.
            SamplerOptions sopts;
            sopts.tighten = true;
            sopts.max_rejections = 10000;
            PermutationSampler sampler(al.matrix, sopts); // throws ZeroPermanent on degenerate scenarios
            bool doomed = false;
            try {
                pi = sampler.draw(rng).permutation;
            } catch (const RejectionCapExceeded&) {
                pi = sample_sequential(al.matrix, rng).first;
                doomed = true;
            }
            // Importance weight: true likelihood / optimal proposal = per(A);
            // the subtracted scale re-enters here. Exact for tractable target
            // counts, the unbiased sampling estimator beyond that.
            double log_per;
            if (doomed) {
                log_per = kNegInf;
            } else if (k_targets <= 30) {
                const double per = permanent_ryser(al.matrix);
                log_per = per > 0.0 ? std::log(per) : kNegInf;
            } else {
                const EstimateReport est = estimate_fixed_bound(al.matrix, per_estimate_trials, 0.05, rng);
                log_per = est.log_point_estimate ? *est.log_point_estimate : kNegInf;
            }
            p.log_weight += k_targets * al.log_scale + log_per;
        } else {
            auto [seq_pi, log_denoms] = sample_sequential(al.matrix, rng);
            pi = std::move(seq_pi);
            p.log_weight += k_targets * al.log_scale + log_denoms;
        }

        for (int k = 0; k < k_targets; ++k) {
            const double a = al.matrix(pi[k], k);
            log_assoc_scaled += a > 0.0 ? std::log(a) : kNegInf;
        }
        p.assoc_log_likelihood += k_targets * al.log_scale + log_assoc_scaled;
        p.associations.push_back(pi);

        std::vector<Eigen::VectorXd> means(k_targets);
        for (int k = 0; k < k_targets; ++k) {
            const KalmanUpdateResult up = kalman_update(p.pred_mean[k], p.pred_cov[k], measurements[pi[k]], model);
            means[k] = up.mean;
            auto [pm, pc] = kalman_predict(up.mean, up.cov, model, k);
            p.pred_mean[k] = std::move(pm);
            p.pred_cov[k] = std::move(pc);
        }
        p.mean_history.push_back(std::move(means));
    }

    // Normalize.
    double hi = kNegInf;
    for (const auto& p : next) hi = std::max(hi, p.log_weight);
    if (hi == kNegInf) throw DeadParticleSet("all particle weights are zero");
    double z = 0.0;
    for (const auto& p : next) z += std::exp(p.log_weight - hi);
    const double log_z = hi + std::log(z);
    for (auto& p : next) p.log_weight -= log_z;

    // Resample when the effective sample size collapses below N/2. Systematic
    // resampling (one uniform, stratified picks) keeps lineage diversity far
    // better than multinomial at small particle counts.
    const std::size_t n_particles = next.size();
    double ess_denom = 0.0;
    for (const auto& p : next) ess_denom += std::exp(2.0 * p.log_weight);
    if (1.0 / ess_denom < static_cast<double>(n_particles) / 2.0) {
        std::vector<ParticleState> resampled;
        resampled.reserve(n_particles);
        const double step = 1.0 / static_cast<double>(n_particles);
        double u = uniform01(rng) * step;
        double acc = std::exp(next[0].log_weight);
        std::size_t j = 0;
        for (std::size_t i = 0; i < n_particles; ++i) {
            while (u > acc && j + 1 < n_particles) acc += std::exp(next[++j].log_weight);
            resampled.push_back(next[j]);
            u += step;
        }
        for (auto& p : resampled) p.log_weight = -std::log(static_cast<double>(n_particles));
        return resampled;
    }
    return next;
}

ScenarioData simulate(const LinearGaussianModel& model, int num_steps, std::uint64_t seed) {
    if (num_steps < 1) throw InvalidArgs("simulate needs at least one step");
    const int k_targets = model.num_targets();
    Rng rng(seed);
    GaussianDraw g;

    const Eigen::MatrixXd q_sqrt = psd_sqrt(model.process_noise);
    const Eigen::MatrixXd r_sqrt = psd_sqrt(model.measurement_noise);

    ScenarioData sc;
    sc.num_targets = k_targets;
    sc.num_steps = num_steps;
    sc.truth.resize(num_steps);
    sc.measurements.resize(num_steps);
    sc.true_assoc.resize(num_steps);

    std::vector<Eigen::VectorXd> state(k_targets);
    for (int k = 0; k < k_targets; ++k) {
        state[k] = model.prior_mean[k] + psd_sqrt(model.prior_cov[k]) * gaussian_vector(model.state_dim, g, rng);
    }
    for (int t = 0; t < num_steps; ++t) {
        sc.truth[t] = state;
        std::vector<Eigen::VectorXd> meas(k_targets);
        for (int k = 0; k < k_targets; ++k) {
            meas[k] = model.observation * state[k] + r_sqrt * gaussian_vector(model.obs_dim, g, rng);
        }
        // Uniform random placement of each target's measurement.
        std::vector<int> slot(k_targets);
        for (int k = 0; k < k_targets; ++k) slot[k] = k;
        for (int k = k_targets - 1; k > 0; --k) {
            const int j = static_cast<int>(uniform01(rng) * (k + 1));
            std::swap(slot[k], slot[std::min(j, k)]);
        }
        sc.measurements[t].resize(k_targets);
        sc.true_assoc[t].resize(k_targets);
        for (int k = 0; k < k_targets; ++k) {
            sc.measurements[t][slot[k]] = meas[k];
            sc.true_assoc[t][k] = slot[k];
        }
        for (int k = 0; k < k_targets; ++k) {
            state[k] = model.transition[k] * state[k] + q_sqrt * gaussian_vector(model.state_dim, g, rng);
        }
    }
    return sc;
}

TrackingScore evaluate(const ScenarioData& scenario, const std::vector<ParticleState>& particles) {
    if (particles.empty()) throw InvalidArgs("evaluate needs a nonempty particle set");
    std::size_t best = 0;
    for (std::size_t i = 1; i < particles.size(); ++i) {
        if (particles[i].assoc_log_likelihood > particles[best].assoc_log_likelihood) best = i;
    }
    const ParticleState& p = particles[best];
    const int steps = static_cast<int>(p.mean_history.size());
    const int k_targets = scenario.num_targets;

    double se = 0.0;
    long count = 0;
    for (int t = 0; t < steps; ++t) {
        for (int k = 0; k < k_targets; ++k) {
            const Eigen::VectorXd err = p.mean_history[t][k].head(2) - scenario.truth[t][k].head(2);
            se += err.squaredNorm();
            ++count;
        }
    }
    return {particles[best].assoc_log_likelihood, count > 0 ? se / count : 0.0};
}

RbpfRun run_rbpf(const LinearGaussianModel& model, const ScenarioData& scenario, int num_particles,
                 ProposalKind proposal, long per_estimate_trials, Rng& rng) {
    RbpfRun run;
    run.particles = init_particles(model, num_particles);
    run.steps.reserve(scenario.num_steps);
    for (int t = 0; t < scenario.num_steps; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        run.particles = rbpf_step(run.particles, scenario.measurements[t], model, proposal, per_estimate_trials, rng);
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        const TrackingScore score = evaluate(scenario, run.particles);
        run.steps.push_back({t + 1, score.max_log_likelihood, score.mse, dt.count()});
    }
    return run;
}

} // namespace permsamp
