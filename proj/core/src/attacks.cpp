#include "bcl/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "bcl/errors.hpp"
#include "bcl/rng.hpp"

namespace bcl {

EpsilonBudget::EpsilonBudget(double v) : value(v) {
    if (!(v >= 0.0 && v < 1.0)) throw DomainError("epsilon budget must be in [0,1)");
}

AttackKind parse_attack_kind(const std::string& name) {
    if (name == "pgd") return AttackKind::Pgd;
    if (name == "rifgsm") return AttackKind::RiFgsm;
    if (name == "rifgsm_multi") return AttackKind::RiFgsmMulti;
    if (name == "rifgsm_multi_t") return AttackKind::RiFgsmMultiT;
    throw ConfigError("unknown attack kind: " + name);
}

std::string attack_kind_name(AttackKind kind) {
    switch (kind) {
        case AttackKind::Pgd: return "pgd";
        case AttackKind::RiFgsm: return "rifgsm";
        case AttackKind::RiFgsmMulti: return "rifgsm_multi";
        case AttackKind::RiFgsmMultiT: return "rifgsm_multi_t";
    }
    return "pgd";
}

namespace {

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Cross-entropy loss -log softmax(score)[target] has input gradient
// J^T (softmax(score) - onehot(target)).
Vec xent_upstream(const Vec& q, int target) {
    Vec u = softmax(q);
    u[target] -= 1.0;
    return u;
}

double xent_loss(const Vec& q, int target) {
    const Vec p = softmax(q);
    return -std::log(std::max(p[target], 1e-300));
}

}  // namespace

LossGrad xent_grad(const ScoreFn& net, int target_action) {
    return [&net, target_action](const Vec& x) {
        return net.score_input_grad(x, xent_upstream(net.score(x), target_action));
    };
}

Vec project_ball_box(const Vec& x, Vec delta, double epsilon) {
    for (size_t i = 0; i < delta.size(); ++i) {
        double d = std::clamp(delta[i], -epsilon, epsilon);
        d = std::clamp(x[i] + d, 0.0, 1.0) - x[i];
        delta[i] = d;
    }
    return delta;
}

Perturbation fgsm(const Vec& x, double epsilon, const LossGrad& loss_grad) {
    if (epsilon < 0.0) throw DomainError("fgsm: epsilon must be >= 0");
    Perturbation p;
    p.delta.assign(x.size(), 0.0);
    if (epsilon == 0.0) return p;
    const Vec g = loss_grad(x);
    for (size_t i = 0; i < x.size(); ++i) p.delta[i] = epsilon * sign0(g[i]);
    p.delta = project_ball_box(x, std::move(p.delta), epsilon);
    return p;
}

Perturbation ri_fgsm(const Vec& x, double epsilon, double alpha, const LossGrad& loss_grad,
                     uint64_t seed) {
    if (epsilon < 0.0) throw DomainError("ri_fgsm: epsilon must be >= 0");
    Perturbation p;
    p.delta.assign(x.size(), 0.0);
    if (epsilon == 0.0) return p;
    SplitMix64 rng(seed);
    Vec delta0(x.size());
    for (size_t i = 0; i < x.size(); ++i) delta0[i] = rng.uniform(-epsilon, epsilon);
    delta0 = project_ball_box(x, std::move(delta0), epsilon);
    Vec xp(x.size());
    for (size_t i = 0; i < x.size(); ++i) xp[i] = x[i] + delta0[i];
    const Vec g = loss_grad(xp);
    for (size_t i = 0; i < x.size(); ++i) delta0[i] += alpha * sign0(g[i]);
    p.delta = project_ball_box(x, std::move(delta0), epsilon);
    return p;
}

PgdResult pgd_untargeted_traced(const ScoreFn& net, const Vec& x, double epsilon, int steps,
                                double step_size, int clean_action) {
    if (epsilon < 0.0) throw DomainError("pgd: epsilon must be >= 0");
    PgdResult r;
    r.delta.assign(x.size(), 0.0);
    if (epsilon == 0.0) return r;
    Vec xp(x.size());
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < steps; ++k) {
        for (size_t i = 0; i < x.size(); ++i) xp[i] = x[i] + r.delta[i];
        const Vec q = net.score(xp);
        const Vec g = net.score_input_grad(xp, xent_upstream(q, clean_action));
        for (size_t i = 0; i < x.size(); ++i) r.delta[i] += step_size * sign0(g[i]);
        r.delta = project_ball_box(x, std::move(r.delta), epsilon);

        for (size_t i = 0; i < x.size(); ++i) xp[i] = x[i] + r.delta[i];
        const double loss = xent_loss(net.score(xp), clean_action);
        best = std::max(best, loss);
        r.losses.push_back(loss);
        r.best_so_far.push_back(best);
    }
    return r;
}

Perturbation pgd_untargeted(const ScoreFn& net, const Vec& x, double epsilon, int steps,
                            double step_size, int clean_action) {
    return {pgd_untargeted_traced(net, x, epsilon, steps, step_size, clean_action).delta};
}

Perturbation multi_restart(const ScoreFn& net, const Vec& x, double epsilon, double alpha,
                           int restarts, MultiMode mode, const Vec& clean_q, uint64_t seed) {
    if (restarts < 1) throw ConfigError("multi_restart: restarts must be >= 1");
    const int clean_action = argmax(clean_q);
    const LossGrad grad = xent_grad(net, clean_action);

    Perturbation best;
    best.delta.assign(x.size(), 0.0);
    double best_q = std::numeric_limits<double>::infinity();
    bool have_best = false;

    Vec xp(x.size());
    for (int r = 1; r <= restarts; ++r) {
        Perturbation cand = ri_fgsm(x, epsilon, alpha, grad, seed + uint64_t(r));
        for (size_t i = 0; i < x.size(); ++i) xp[i] = x[i] + cand.delta[i];
        const int induced = argmax(net.score(xp));
        if (mode == MultiMode::FirstFlip) {
            if (induced != clean_action) return cand;
        } else {
            if (!have_best || clean_q[induced] < best_q) {
                best = std::move(cand);
                best_q = clean_q[induced];
                have_best = true;
            }
        }
    }
    if (mode == MultiMode::FirstFlip) {
        best.delta.assign(x.size(), 0.0);  // no restart flipped
    }
    return best;
}

double dqn_perturb_objective(const ScoreFn& actor, const Vec& q_target_vec, const Vec& x,
                             const Vec& delta) {
    Vec xp(x.size());
    for (size_t i = 0; i < x.size(); ++i) xp[i] = x[i] + delta[i];
    const Vec p = softmax(actor.score(xp));
    double f = 0.0;
    for (size_t a = 0; a < p.size(); ++a) f += p[a] * q_target_vec[a];
    return f;
}

Perturbation train_perturb_dqn(const ScoreFn& actor, const Vec& q_target_vec, const Vec& x,
                               double epsilon, double alpha, uint64_t seed) {
    // f = Softmax(Q(x+d)) . t  =>  df/dQ_i = p_i (t_i - f)
    const LossGrad descent = [&](const Vec& xp) {
        const Vec q = actor.score(xp);
        const Vec p = softmax(q);
        double f = 0.0;
        for (size_t a = 0; a < p.size(); ++a) f += p[a] * q_target_vec[a];
        Vec u(p.size());
        for (size_t a = 0; a < p.size(); ++a) u[a] = -p[a] * (q_target_vec[a] - f);
        return actor.score_input_grad(xp, u);
    };
    return ri_fgsm(x, epsilon, alpha, descent, seed);
}

double ppo_perturb_objective(const ScoreFn& policy, const Vec& x, const Vec& delta) {
    Vec xp(x.size());
    for (size_t i = 0; i < x.size(); ++i) xp[i] = x[i] + delta[i];
    const Vec z = policy.score(xp);
    const Vec p = softmax(z);
    double g = 0.0;
    for (size_t a = 0; a < p.size(); ++a) g += p[a] * z[a];
    return g;
}

namespace {

// g = Softmax(z) . z with z = Logits(x+d); dg/dz_i = p_i (z_i - g + 1).
Vec ppo_objective_input_grad(const ScoreFn& policy, const Vec& xp, double sgn) {
    const Vec z = policy.score(xp);
    const Vec p = softmax(z);
    double g = 0.0;
    for (size_t a = 0; a < p.size(); ++a) g += p[a] * z[a];
    Vec u(p.size());
    for (size_t a = 0; a < p.size(); ++a) u[a] = sgn * p[a] * (z[a] - g + 1.0);
    return policy.score_input_grad(xp, u);
}

}  // namespace

Perturbation train_perturb_ppo(const ScoreFn& policy, const Vec& x, double epsilon,
                               const PpoPerturbMethod& method, uint64_t seed) {
    if (epsilon < 0.0) throw DomainError("train_perturb_ppo: epsilon must be >= 0");
    if (method.kind == PpoPerturbMethod::RiFgsm) {
        const LossGrad descent = [&](const Vec& xp) {
            return ppo_objective_input_grad(policy, xp, -1.0);
        };
        return ri_fgsm(x, epsilon, method.alpha, descent, seed);
    }
    // PGD descent on the objective, delta_0 = 0.
    Perturbation p;
    p.delta.assign(x.size(), 0.0);
    if (epsilon == 0.0) return p;
    Vec xp(x.size());
    for (int k = 0; k < method.steps; ++k) {
        for (size_t i = 0; i < x.size(); ++i) xp[i] = x[i] + p.delta[i];
        const Vec g = ppo_objective_input_grad(policy, xp, -1.0);
        for (size_t i = 0; i < x.size(); ++i) p.delta[i] += method.step_size * sign0(g[i]);
        p.delta = project_ball_box(x, std::move(p.delta), epsilon);
    }
    return p;
}

Perturbation attack_observation(const ScoreFn& net, const Vec& x, const AttackSpec& spec,
                                uint64_t seed, bool soft_labels) {
    const Vec clean_q = net.score(x);
    const int clean_action = argmax(clean_q);
    switch (spec.kind) {
        case AttackKind::Pgd: {
            if (!soft_labels)
                return pgd_untargeted(net, x, spec.epsilon, spec.steps, spec.step_size,
                                      clean_action);
            // PPO flavor: cross-entropy against the clean action distribution.
            const Vec pi_clean = softmax(clean_q);
            Perturbation p;
            p.delta.assign(x.size(), 0.0);
            if (spec.epsilon == 0.0) return p;
            Vec xp(x.size());
            for (int k = 0; k < spec.steps; ++k) {
                for (size_t i = 0; i < x.size(); ++i) xp[i] = x[i] + p.delta[i];
                Vec u = softmax(net.score(xp));
                for (size_t a = 0; a < u.size(); ++a) u[a] -= pi_clean[a];
                const Vec g = net.score_input_grad(xp, u);
                for (size_t i = 0; i < x.size(); ++i) p.delta[i] += spec.step_size * sign0(g[i]);
                p.delta = project_ball_box(x, std::move(p.delta), spec.epsilon);
            }
            return p;
        }
        case AttackKind::RiFgsm:
            return ri_fgsm(x, spec.epsilon, spec.alpha, xent_grad(net, clean_action), seed);
        case AttackKind::RiFgsmMulti:
            return multi_restart(net, x, spec.epsilon, spec.alpha, spec.restarts,
                                 MultiMode::FirstFlip, clean_q, seed);
        case AttackKind::RiFgsmMultiT:
            return multi_restart(net, x, spec.epsilon, spec.alpha, spec.restarts,
                                 MultiMode::LowestQ, clean_q, seed);
    }
    throw ConfigError("attack_observation: bad attack kind");
}

}  // namespace bcl
