#include "bcl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bcl/errors.hpp"
#include "bcl/rng.hpp"

namespace bcl {

namespace {

// Greedy policy + score surface for a model: Q-values for DQN checkpoints,
// logits (deterministic policy) for PPO ones.
const NamedNet& scoring_net(const Model& m) {
    if (const NamedNet* q = m.find("q")) return *q;
    if (const NamedNet* p = m.find("policy")) return *p;
    return m.net("q");  // throws with a useful message
}

EvalReport run_episodes(const Model& model, EnvKind env, const AttackSpec* attack, int episodes,
                        uint64_t seed, const std::string& model_id) {
    const NamedNet& net = scoring_net(model);
    NetScore score(net.spec, net.params);
    const bool soft = net.role == "policy";
    const int cap = std::min(10000, env_horizon(env));

    EvalReport rep;
    rep.model_id = model_id;
    rep.eps = attack ? attack->epsilon : 0.0;
    rep.attack = attack ? attack_kind_name(attack->kind) : "none";
    rep.episodes = episodes;
    rep.seed = seed;

    for (int ep = 0; ep < episodes; ++ep) {
        auto [state, obs] = env_reset(env, mix_seed(seed, 100, uint64_t(ep)));
        double total = 0.0;
        for (int step = 0; step < cap; ++step) {
            Vec seen = obs;
            if (attack && attack->epsilon > 0.0) {
                const Perturbation d = attack_observation(
                    score, obs, *attack, mix_seed(seed, uint64_t(ep) + 1, uint64_t(step)), soft);
                for (size_t i = 0; i < seen.size(); ++i) seen[i] += d.delta[i];
            }
            const int action = argmax(score.score(seen));
            StepOutcome out = env_step(state, action);
            total += out.reward;
            if (out.done) break;
            obs = std::move(out.obs);
        }
        rep.rewards.push_back(total);
    }
    double mean = 0.0;
    for (double r : rep.rewards) mean += r;
    rep.mean = mean / double(episodes);
    rep.sem = sample_sem(rep.rewards);
    return rep;
}

}  // namespace

double sample_sem(const std::vector<double>& rewards) {
    const size_t n = rewards.size();
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= double(n);
    double ss = 0.0;
    for (double r : rewards) ss += (r - mean) * (r - mean);
    const double sd = std::sqrt(ss / double(n - 1));
    return sd / std::sqrt(double(n));
}

EvalSummary evaluate(const Model& model, EnvKind env, const std::vector<AttackSpec>& suite,
                     int episodes, uint64_t seed, const std::string& model_id) {
    if (episodes < 1) throw ConfigError("evaluate: episodes must be >= 1");
    EvalSummary sum;
    sum.nominal = run_episodes(model, env, nullptr, episodes, seed, model_id);
    if (suite.empty()) {
        sum.r_adv = sum.nominal.mean;
        return sum;
    }
    sum.r_adv = std::numeric_limits<double>::infinity();
    for (const AttackSpec& a : suite) {
        sum.per_attack.push_back(run_episodes(model, env, &a, episodes, seed, model_id));
        sum.r_adv = std::min(sum.r_adv, sum.per_attack.back().mean);
    }
    return sum;
}

double model_score(double r_nominal, const std::vector<double>& adv_rewards) {
    if (adv_rewards.empty()) return r_nominal;
    double s = 0.0;
    for (double r : adv_rewards) s += r;
    return r_nominal + s / double(adv_rewards.size());
}

double phase_eval_score(double r_nominal, double r_adv_i, double r_adv_prev) {
    return r_nominal + 0.5 * (r_adv_i + r_adv_prev);
}

int median_of_runs(const std::vector<double>& scores) {
    if (scores.empty()) throw ShapeError("median_of_runs: empty score list");
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[(sorted.size() - 1) / 2];  // lower-middle for even counts
    for (size_t i = 0; i < scores.size(); ++i)
        if (scores[i] == median) return int(i);
    return 0;
}

}  // namespace bcl
