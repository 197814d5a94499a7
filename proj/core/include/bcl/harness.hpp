#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcl/attacks.hpp"
#include "bcl/env.hpp"
#include "bcl/model.hpp"

namespace bcl {

struct EvalReport {
    std::string model_id;
    double eps = 0.0;
    std::string attack = "none";
    int episodes = 0;
    double mean = 0.0;
    double sem = 0.0;  // sample stddev / sqrt(episodes)
    std::vector<double> rewards;
    uint64_t seed = 0;
};

struct EvalSummary {
    EvalReport nominal;
    std::vector<EvalReport> per_attack;
    double r_adv = 0.0;  // min over the suite; nominal when the suite is empty
};

// Evaluation protocol: undiscounted episode rewards, every observation
// perturbed before the greedy action, worst case over the attack suite
// reported. Episode length capped at min(10000, env horizon).
EvalSummary evaluate(const Model& model, EnvKind env, const std::vector<AttackSpec>& suite,
                     int episodes, uint64_t seed, const std::string& model_id = "");

// Robustness score R_nominal + (1/3) sum of the three per-budget attack
// rewards (generalized to the mean for other list sizes).
double model_score(double r_nominal, const std::vector<double>& adv_rewards);

// Phase efficacy score V_k = R_nominal + (R_adv^eps_i + R_adv^eps_{i-1}) / 2.
double phase_eval_score(double r_nominal, double r_adv_i, double r_adv_prev);

// Index of the median-score run: middle for odd counts, lower-middle for
// even, lowest index on ties.
int median_of_runs(const std::vector<double>& scores);

double sample_sem(const std::vector<double>& rewards);

}  // namespace bcl
