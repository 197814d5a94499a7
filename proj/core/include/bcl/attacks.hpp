#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bcl/nn.hpp"

namespace bcl {

// l-inf attack budget, conventionally written n/255.
struct EpsilonBudget {
    double value = 0.0;

    EpsilonBudget() = default;
    explicit EpsilonBudget(double v);  // throws DomainError outside [0,1)
    static EpsilonBudget from_255(int n) { return EpsilonBudget(double(n) / 255.0); }
};

enum class AttackKind { Pgd, RiFgsm, RiFgsmMulti, RiFgsmMultiT };

AttackKind parse_attack_kind(const std::string& name);
std::string attack_kind_name(AttackKind kind);

struct AttackSpec {
    AttackKind kind = AttackKind::Pgd;
    double epsilon = 0.0;
    int steps = 30;          // PGD iterations
    double step_size = 0.1;  // PGD alpha
    double alpha = 0.375;    // RI-FGSM step
    int restarts = 1000;     // Multi variants
    uint64_t seed = 0;
};

struct Perturbation {
    Vec delta;
};

// Differentiable score of an observation: Q-values for DQN, logits for PPO.
struct ScoreFn {
    virtual ~ScoreFn() = default;
    virtual int dim() const = 0;
    virtual Vec score(const Vec& x) const = 0;
    // Gradient of <upstream, score(x)> w.r.t. x.
    virtual Vec score_input_grad(const Vec& x, const Vec& upstream) const = 0;
};

struct NetScore final : ScoreFn {
    const NetworkSpec* spec;
    const Parameters* params;

    NetScore(const NetworkSpec& s, const Parameters& p) : spec(&s), params(&p) {}
    int dim() const override { return spec->output_dim(); }
    Vec score(const Vec& x) const override { return forward(*spec, *params, x); }
    Vec score_input_grad(const Vec& x, const Vec& upstream) const override {
        return backward(*spec, *params, x, upstream).input;
    }
};

// Gradient of a scalar attack loss w.r.t. the observation.
using LossGrad = std::function<Vec(const Vec&)>;

// Gradient of cross-entropy between Softmax(score(x)) and the one-hot target.
LossGrad xent_grad(const ScoreFn& net, int target_action);

// All attacks clip the perturbed observation to [0,1]^d: first project delta
// to the epsilon ball, then clip x+delta to the box. sign(0) = 0 throughout.
Vec project_ball_box(const Vec& x, Vec delta, double epsilon);

Perturbation fgsm(const Vec& x, double epsilon, const LossGrad& loss_grad);

// FGSM from a uniform random start inside the ball, projected back.
Perturbation ri_fgsm(const Vec& x, double epsilon, double alpha, const LossGrad& loss_grad,
                     uint64_t seed);

struct PgdResult {
    Vec delta;                         // final iterate
    std::vector<double> losses;        // loss after each step
    std::vector<double> best_so_far;   // running max of losses
};

// k-step signed ascent on cross-entropy vs. the clean action, delta_0 = 0,
// per-step ball/box projection; returns the final iterate.
Perturbation pgd_untargeted(const ScoreFn& net, const Vec& x, double epsilon, int steps,
                            double step_size, int clean_action);
PgdResult pgd_untargeted_traced(const ScoreFn& net, const Vec& x, double epsilon, int steps,
                                double step_size, int clean_action);

enum class MultiMode { FirstFlip, LowestQ };

// N-restart RI-FGSM. FirstFlip returns the first restart whose induced action
// differs from the clean argmax (else zero delta). LowestQ returns the
// candidate whose induced action has the lowest clean score, earliest restart
// winning ties. Restart r uses seed seed+r, identical to a standalone
// ri_fgsm call with that seed.
Perturbation multi_restart(const ScoreFn& net, const Vec& x, double epsilon, double alpha,
                           int restarts, MultiMode mode, const Vec& clean_q, uint64_t seed);

// Training-time perturbation for DQN: one RI-FGSM descent step on
// f(delta) = Softmax(Q_actor(x+delta)) . q_target_vec.
Perturbation train_perturb_dqn(const ScoreFn& actor, const Vec& q_target_vec, const Vec& x,
                               double epsilon, double alpha, uint64_t seed);

struct PpoPerturbMethod {
    enum Kind { RiFgsm, Pgd } kind = RiFgsm;
    double alpha = 0.375;
    int steps = 10;
    double step_size = 0.1;
};

// Training-time perturbation for PPO: descent on
// g(delta) = Softmax(Logits(x+delta)) . Logits(x+delta).
Perturbation train_perturb_ppo(const ScoreFn& policy, const Vec& x, double epsilon,
                               const PpoPerturbMethod& method, uint64_t seed);

// Objective values, used by the descent-quality tests.
double dqn_perturb_objective(const ScoreFn& actor, const Vec& q_target_vec, const Vec& x,
                             const Vec& delta);
double ppo_perturb_objective(const ScoreFn& policy, const Vec& x, const Vec& delta);

// Evaluation-attack dispatcher: perturbs one observation per the spec.
// soft_labels selects the PPO flavor of the PGD loss (cross-entropy against
// the clean action distribution instead of the one-hot argmax).
Perturbation attack_observation(const ScoreFn& net, const Vec& x, const AttackSpec& spec,
                                uint64_t seed, bool soft_labels = false);

}  // namespace bcl
