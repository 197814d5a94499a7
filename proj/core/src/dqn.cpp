#include "bcl/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bcl/errors.hpp"

namespace bcl {

LossMode parse_loss_mode(const std::string& name) {
    if (name == "standard") return LossMode::Standard;
    if (name == "at") return LossMode::At;
    if (name == "radial") return LossMode::Radial;
    throw ConfigError("unknown loss mode: " + name);
}

std::string loss_mode_name(LossMode mode) {
    switch (mode) {
        case LossMode::Standard: return "standard";
        case LossMode::At: return "at";
        case LossMode::Radial: return "radial";
    }
    return "standard";
}

void ReplayBuffer::push(Transition t) {
    if (!t.delta.empty()) {
        double norm = 0.0;
        for (double d : t.delta) norm = std::max(norm, std::abs(d));
        if (norm > t.delta_eps + 1e-12)
            throw ProtocolError("replay push: stored delta violates its ball constraint");
    }
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
    } else {
        data_[next_] = std::move(t);
        next_ = (next_ + 1) % capacity_;
    }
}

std::vector<const Transition*> ReplayBuffer::sample(size_t batch, SplitMix64& rng) const {
    if (!ready()) throw ProtocolError("replay sample: buffer below replay_initial");
    std::vector<const Transition*> out(batch);
    for (size_t i = 0; i < batch; ++i) out[i] = &data_[rng.next_below(data_.size())];
    return out;
}

namespace {

double target_value(const NetworkSpec& spec, const Parameters& target, const Transition& t,
                    double gamma) {
    if (t.done) return t.r;
    const Vec qn = forward(spec, target, t.s_next);
    return t.r + gamma * qn[argmax(qn)];
}

}  // namespace

LossResult standard_loss(const NetworkSpec& spec, const Parameters& actor,
                         const Parameters& target, Batch batch, double gamma) {
    if (batch.empty()) throw ShapeError("standard_loss: empty batch");
    LossResult res;
    res.actor_grads = Parameters::zeros(spec);
    const double inv = 1.0 / double(batch.size());
    Tape tape;
    Vec upstream(spec.output_dim());
    for (const Transition* t : batch) {
        const double T = target_value(spec, target, *t, gamma);
        forward_taped(spec, actor, t->s, tape);
        const double e = T - tape.out[t->a];
        res.value += e * e * inv;
        std::fill(upstream.begin(), upstream.end(), 0.0);
        upstream[t->a] = -2.0 * e * inv;
        backward_accumulate(spec, actor, tape, upstream, res.actor_grads, nullptr);
    }
    return res;
}

double ly_terms(const Vec& actor_q_clean, const Vec& actor_q_tilde, double target_max, double r,
                double gamma, int a, bool done) {
    if (actor_q_clean.size() != actor_q_tilde.size())
        throw ShapeError("ly_terms: Q vector size mismatch");
    const double T = done ? r : r + gamma * target_max;
    double sum = 0.0;
    for (int y = 0; y < int(actor_q_clean.size()); ++y) {
        if (y == a) {
            const double e = T - actor_q_tilde[y];
            sum += e * e;
        } else {
            const double e = actor_q_clean[y] - actor_q_tilde[y];
            sum += e * e;
        }
    }
    return sum;
}

LossResult adv_loss_at(const NetworkSpec& spec, const Parameters& actor, const Parameters& target,
                       Batch batch, double gamma) {
    if (batch.empty()) throw ShapeError("adv_loss_at: empty batch");
    LossResult res;
    res.actor_grads = Parameters::zeros(spec);
    const double inv = 1.0 / double(batch.size());
    Tape tape_clean, tape_pert;
    Vec xp;
    Vec up_clean(spec.output_dim()), up_pert(spec.output_dim());
    for (const Transition* t : batch) {
        if (t->delta.size() != t->s.size())
            throw ProtocolError("adv_loss_at: transition is missing its perturbation");
        const double T = target_value(spec, target, *t, gamma);
        forward_taped(spec, actor, t->s, tape_clean);
        xp.resize(t->s.size());
        for (size_t i = 0; i < xp.size(); ++i) xp[i] = t->s[i] + t->delta[i];
        forward_taped(spec, actor, xp, tape_pert);
        const Vec& q = tape_clean.out;
        const Vec& qt = tape_pert.out;

        std::fill(up_clean.begin(), up_clean.end(), 0.0);
        std::fill(up_pert.begin(), up_pert.end(), 0.0);
        for (int y = 0; y < spec.output_dim(); ++y) {
            if (y == t->a) {
                const double e = T - qt[y];
                res.value += e * e * inv;
                up_pert[y] = -2.0 * e * inv;
            } else {
                const double e = q[y] - qt[y];
                res.value += e * e * inv;
                up_clean[y] = 2.0 * e * inv;
                up_pert[y] = -2.0 * e * inv;
            }
        }
        backward_accumulate(spec, actor, tape_clean, up_clean, res.actor_grads, nullptr);
        backward_accumulate(spec, actor, tape_pert, up_pert, res.actor_grads, nullptr);
    }
    return res;
}

LossResult adv_loss_radial(const NetworkSpec& spec, const Parameters& actor,
                           const Parameters& target, Batch batch, double epsilon, double gamma) {
    if (batch.empty()) throw ShapeError("adv_loss_radial: empty batch");
    LossResult res;
    res.actor_grads = Parameters::zeros(spec);
    const double inv = 1.0 / double(batch.size());
    Tape tape_clean;
    IbpTape ibp;
    Vec up_clean(spec.output_dim());
    Vec grad_lo(spec.output_dim()), grad_hi(spec.output_dim());
    for (const Transition* t : batch) {
        const double T = target_value(spec, target, *t, gamma);
        forward_taped(spec, actor, t->s, tape_clean);
        const IntervalBounds b = ibp_forward_taped(spec, actor, t->s, epsilon, ibp);
        const Vec& q = tape_clean.out;

        std::fill(up_clean.begin(), up_clean.end(), 0.0);
        std::fill(grad_lo.begin(), grad_lo.end(), 0.0);
        std::fill(grad_hi.begin(), grad_hi.end(), 0.0);
        for (int y = 0; y < spec.output_dim(); ++y) {
            const double ref = (y == t->a) ? T : q[y];
            // worst case: the endpoint with the larger squared residual
            const double elo = ref - b.lower[y];
            const double ehi = ref - b.upper[y];
            const bool use_lower = elo * elo >= ehi * ehi;
            const double e = use_lower ? elo : ehi;
            res.value += e * e * inv;
            const double g = -2.0 * e * inv;  // d/dQ~
            if (use_lower)
                grad_lo[y] += g;
            else
                grad_hi[y] += g;
            if (y != t->a) up_clean[y] += 2.0 * e * inv;  // d/dQ(s,y)
        }
        backward_accumulate(spec, actor, tape_clean, up_clean, res.actor_grads, nullptr);
        ibp_backward_accumulate(spec, actor, ibp, grad_lo, grad_hi, res.actor_grads);
    }
    return res;
}

double total_loss(double standard, double adv, double kappa) {
    if (kappa < 0.0 || kappa > 1.0) throw DomainError("total_loss: kappa must be in [0,1]");
    if (kappa == 1.0) return standard;
    if (kappa == 0.0) return adv;
    return kappa * standard + (1.0 - kappa) * adv;
}

int greedy_action(const NetworkSpec& spec, const Parameters& actor, const Vec& obs) {
    return argmax(forward(spec, actor, obs));
}

Model make_dqn_model(EnvKind env, const std::vector<int>& hidden, bool dueling, uint64_t seed) {
    NetworkSpec spec;
    spec.layer_sizes.push_back(env_obs_dim(env));
    for (int h : hidden) spec.layer_sizes.push_back(h);
    spec.layer_sizes.push_back(env_num_actions(env));
    spec.dueling = dueling;
    spec.validate();
    Model m;
    m.nets.push_back({"q", spec, glorot_init(spec, seed)});
    return m;
}

Model train_dqn_phase(const Model& init, EnvKind env, double eps_lo, double eps_hi,
                      const DqnTrainerConfig& cfg, uint64_t seed) {
    if (eps_lo > eps_hi) throw ConfigError("train_dqn_phase: eps_lo must be <= eps_hi");
    const NamedNet& qnet = init.net("q");
    const NetworkSpec& spec = qnet.spec;
    Parameters actor = qnet.params;
    Parameters target = actor;
    AdamState adam = AdamState::init(spec, cfg.learning_rate);
    NetScore actor_score(spec, actor);

    ReplayBuffer buffer(cfg.buffer_capacity, cfg.replay_initial);
    SplitMix64 rng_explore(mix_seed(seed, 1));
    SplitMix64 rng_sample(mix_seed(seed, 2));
    uint64_t episode = 0;
    auto [state, obs] = env_reset(env, mix_seed(seed, 3, episode));

    const int64_t frames = cfg.frames_per_phase;
    const int num_actions = env_num_actions(env);
    int64_t grad_steps = 0;

    for (int64_t t = 0; t < frames; ++t) {
        const double frac = frames > 1 ? double(t) / double(frames - 1) : 1.0;
        const double eps_t = eps_lo + (eps_hi - eps_lo) * frac;
        const double kappa_t = cfg.kappa.at(frames > 0 ? double(t) / double(frames) : 0.0);

        // epsilon-greedy on the clean observation
        const double explore_frames = cfg.explore_fraction * double(frames);
        const double explore_frac =
            explore_frames > 0 ? std::min(1.0, double(t) / explore_frames) : 1.0;
        const double explore_eps =
            cfg.explore_start + (cfg.explore_end - cfg.explore_start) * explore_frac;
        int action;
        if (rng_explore.next_double() < explore_eps)
            action = int(rng_explore.next_below(uint64_t(num_actions)));
        else
            action = greedy_action(spec, actor, obs);

        Transition tr;
        tr.s = obs;
        tr.a = action;
        if (cfg.loss_mode == LossMode::At && eps_t > 0.0) {
            const Vec q_target_vec = forward(spec, target, obs);
            tr.delta = train_perturb_dqn(actor_score, q_target_vec, obs, eps_t, cfg.train_alpha,
                                         mix_seed(seed, 4, uint64_t(t)))
                           .delta;
        } else {
            tr.delta.assign(obs.size(), 0.0);
        }
        tr.delta_eps = eps_t;

        StepOutcome outcome = env_step(state, action);
        tr.r = outcome.reward;
        tr.s_next = outcome.obs;
        tr.done = outcome.done;
        buffer.push(std::move(tr));

        if (outcome.done) {
            episode += 1;
            std::tie(state, obs) = env_reset(env, mix_seed(seed, 3, episode));
        } else {
            obs = std::move(outcome.obs);
        }

        if (!buffer.ready()) continue;

        const auto batch = buffer.sample(size_t(cfg.batch_size), rng_sample);
        LossResult std_res = standard_loss(spec, actor, target, batch, cfg.gamma);
        double loss = std_res.value;
        Parameters grads = std::move(std_res.actor_grads);
        if (cfg.loss_mode != LossMode::Standard && kappa_t < 1.0) {
            LossResult adv = cfg.loss_mode == LossMode::At
                                 ? adv_loss_at(spec, actor, target, batch, cfg.gamma)
                                 : adv_loss_radial(spec, actor, target, batch, eps_t, cfg.gamma);
            loss = total_loss(loss, adv.value, kappa_t);
            if (kappa_t == 0.0) {
                grads = std::move(adv.actor_grads);
            } else {
                scale(grads, kappa_t);
                axpy(1.0 - kappa_t, adv.actor_grads, grads);
            }
        }
        if (!std::isfinite(loss))
            throw NumericError("train_dqn_phase: non-finite loss at frame " + std::to_string(t));

        std::tie(actor, adam) = adam_step(adam, actor, grads);
        grad_steps += 1;
        if (grad_steps % cfg.target_sync == 0) target = actor;
    }

    Model out = init;
    out.find("q")->params = std::move(actor);
    return out;
}

}  // namespace bcl
