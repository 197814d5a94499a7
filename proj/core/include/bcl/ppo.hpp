#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "bcl/attacks.hpp"
#include "bcl/dqn.hpp"  // KappaSchedule, LossMode
#include "bcl/env.hpp"
#include "bcl/model.hpp"
#include "bcl/nn.hpp"

namespace bcl {

struct RolloutStep {
    Vec s;
    int a = 0;
    double reward = 0.0;
    Vec logits_old;  // behavior-policy logits, frozen
    double value = 0.0;
    bool done = false;
    Vec delta;  // training perturbation (empty when not adversarial)
};

struct RolloutBatch {
    std::vector<RolloutStep> steps;
    Vec advantages;  // normalized to zero mean / unit variance by the trainer
    Vec returns;
};

struct PpoConfig {
    double clip_eta = 0.2;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    int epochs = 4;
    int minibatch = 128;
    double learning_rate = 3e-4;
    KappaSchedule kappa;
    double vf_coef = 0.5;
    double entropy_coef = 0.01;
    int rollout_len = 512;
    int64_t frames_per_phase = 40000;
    LossMode loss_mode = LossMode::Standard;  // standard | at
    PpoPerturbMethod train_attack;
};

struct PpoLossResult {
    double value = 0.0;
    Parameters policy_grads;
};

// Clipped surrogate: mean of -min(ratio*A, clip(ratio, 1-eta, 1+eta)*A)
// over the given step indices (all steps when empty).
PpoLossResult ppo_standard_loss(const NetworkSpec& spec, const Parameters& policy_new,
                                const RolloutBatch& batch, double eta,
                                const std::vector<int>& idx = {});

// GAE(gamma, lambda) with done-masking; bootstrap_value is V(s_T) for a
// truncated rollout. Returns (advantages, returns), unnormalized.
std::pair<Vec, Vec> compute_advantages(const std::vector<RolloutStep>& steps, double gamma,
                                       double lambda, double bootstrap_value);

// Probabilities of action a under the two mixed-logit policies: pi~1 takes the
// a-th logit from the adversarial pass (rest clean), pi~2 the complement.
std::pair<double, double> tilde_policies(const Vec& logits_clean, const Vec& logits_adv, int a);

// Eq.-(7)-style two-policy maximum loss: per step
// -min_{i in {1,2}} min(ratio_i*A, clip(ratio_i)*A), averaged.
PpoLossResult ppo_adv_loss(const NetworkSpec& spec, const Parameters& policy_new,
                           const RolloutBatch& batch, double eta, const std::vector<int>& idx = {});

// PGD on cross-entropy against the clean action distribution.
Perturbation ppo_pgd_eval_attack(const ScoreFn& policy, const Vec& x, double epsilon, int steps,
                                 double step_size);

// Blended training loss with value and entropy terms; used by the trainer and
// by the finite-difference gradient check.
struct PpoTotalLoss {
    double value = 0.0;
    Parameters policy_grads;
    Parameters value_grads;
};
PpoTotalLoss ppo_total_loss(const NetworkSpec& pspec, const Parameters& policy,
                            const NetworkSpec& vspec, const Parameters& value,
                            const RolloutBatch& batch, const PpoConfig& cfg, double kappa,
                            bool adversarial, const std::vector<int>& idx = {});

// One curriculum phase of PPO; on-policy, perturbations recomputed per
// rollout. Deterministic given (init, config, seed).
Model train_ppo_phase(const Model& init, EnvKind env, double eps_lo, double eps_hi,
                      const PpoConfig& config, uint64_t seed);

Model make_ppo_model(EnvKind env, const std::vector<int>& hidden, uint64_t seed);

}  // namespace bcl
