#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bcl/attacks.hpp"
#include "bcl/env.hpp"
#include "bcl/model.hpp"
#include "bcl/nn.hpp"
#include "bcl/rng.hpp"

namespace bcl {

// Replay record; delta is the perturbation cached at collection time and
// delta_eps the budget in force when it was computed.
struct Transition {
    Vec s;
    int a = 0;
    double r = 0.0;
    Vec s_next;
    bool done = false;
    Vec delta;
    double delta_eps = 0.0;
};

struct ReplayBuffer {
    explicit ReplayBuffer(size_t capacity = 50000, size_t replay_initial = 256)
        : capacity_(capacity), replay_initial_(replay_initial) {}

    void push(Transition t);  // FIFO eviction; validates the delta ball constraint
    bool ready() const { return data_.size() >= replay_initial_; }
    size_t size() const { return data_.size(); }
    const Transition& at(size_t i) const { return data_[i]; }

    std::vector<const Transition*> sample(size_t batch, SplitMix64& rng) const;

private:
    size_t capacity_;
    size_t replay_initial_;
    size_t next_ = 0;  // ring cursor once full
    std::vector<Transition> data_;
};

struct KappaSchedule {
    enum Kind { Constant, Linear } kind = Linear;
    double start = 1.0;
    double end = 0.5;
    double constant = 0.8;

    double at(double progress) const {  // progress in [0,1] over phase frames
        if (kind == Constant) return constant;
        return start + (end - start) * progress;
    }
};

enum class LossMode { Standard, At, Radial };

LossMode parse_loss_mode(const std::string& name);
std::string loss_mode_name(LossMode mode);

struct DqnTrainerConfig {
    double gamma = 0.99;
    double learning_rate = 0.000125;
    int64_t frames_per_phase = 40000;
    int target_sync = 1000;  // gradient steps between hard target copies
    int batch_size = 128;
    size_t buffer_capacity = 50000;
    size_t replay_initial = 256;
    LossMode loss_mode = LossMode::Standard;
    KappaSchedule kappa;
    double explore_start = 1.0;
    double explore_end = 0.02;
    double explore_fraction = 0.3;  // of phase frames
    double train_alpha = 0.375;     // RI-FGSM step for training perturbations
    int eval_episodes = 20;
};

struct LossResult {
    double value = 0.0;
    Parameters actor_grads;
};

using Batch = std::span<const Transition* const>;

// Eq.-(1)-style Double-DQN TD loss, mean over the batch; the target network
// is not differentiated.
LossResult standard_loss(const NetworkSpec& spec, const Parameters& actor,
                         const Parameters& target, Batch batch, double gamma);

// Sum over output indices y of the RADIAL per-action terms: the TD residual
// against Q~(s,a) for y = a, and (Q(s,y) - Q~(s,y))^2 otherwise. done masks
// the bootstrap term.
double ly_terms(const Vec& actor_q_clean, const Vec& actor_q_tilde, double target_max, double r,
                double gamma, int a, bool done);

// Adversarial-example loss: Q~ = Q_actor(s + delta) with the stored delta;
// gradients flow through the clean and the perturbed pass.
LossResult adv_loss_at(const NetworkSpec& spec, const Parameters& actor, const Parameters& target,
                       Batch batch, double gamma);

// IBP loss: Q~ picks, per sample and action, the interval endpoint that
// maximizes the squared residual, giving an upper bound on the TD loss under
// any admissible perturbation.
LossResult adv_loss_radial(const NetworkSpec& spec, const Parameters& actor,
                           const Parameters& target, Batch batch, double epsilon, double gamma);

double total_loss(double standard, double adv, double kappa);

int greedy_action(const NetworkSpec& spec, const Parameters& actor, const Vec& obs);

// One curriculum phase: the budget ramps linearly from eps_lo to eps_hi over
// the frame budget, perturbations are cached into the replay buffer (AT mode),
// one gradient step per environment step once the buffer holds
// replay_initial. Deterministic given (init, config, seed). Throws
// NumericError if the loss goes non-finite (a failed run).
Model train_dqn_phase(const Model& init, EnvKind env, double eps_lo, double eps_hi,
                      const DqnTrainerConfig& config, uint64_t seed);

// Fresh dueling Q-net model for an environment.
Model make_dqn_model(EnvKind env, const std::vector<int>& hidden, bool dueling, uint64_t seed);

}  // namespace bcl
