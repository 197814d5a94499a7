#include "bcl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bcl/errors.hpp"
#include "bcl/rng.hpp"

namespace bcl {

namespace {

std::vector<int> all_indices(size_t n) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

double prob_old(const RolloutStep& st) { return softmax(st.logits_old)[st.a]; }

}  // namespace

PpoLossResult ppo_standard_loss(const NetworkSpec& spec, const Parameters& policy_new,
                                const RolloutBatch& batch, double eta,
                                const std::vector<int>& idx_in) {
    const std::vector<int> idx = idx_in.empty() ? all_indices(batch.steps.size()) : idx_in;
    if (idx.empty()) throw ShapeError("ppo_standard_loss: empty batch");
    PpoLossResult res;
    res.policy_grads = Parameters::zeros(spec);
    const double inv = 1.0 / double(idx.size());
    Tape tape;
    for (int i : idx) {
        const RolloutStep& st = batch.steps[i];
        const double A = batch.advantages[i];
        forward_taped(spec, policy_new, st.s, tape);
        const Vec p = softmax(tape.out);
        const double ratio = p[st.a] / prob_old(st);
        const double clipped = std::clamp(ratio, 1.0 - eta, 1.0 + eta);
        const double unc = ratio * A;
        const double cl = clipped * A;
        res.value += -std::min(unc, cl) * inv;
        if (unc <= cl) {
            // d(-ratio*A)/dz = -A * ratio * (e_a - p)
            Vec up(p.size());
            for (size_t j = 0; j < p.size(); ++j)
                up[j] = -A * ratio * ((int(j) == st.a ? 1.0 : 0.0) - p[j]) * inv;
            backward_accumulate(spec, policy_new, tape, up, res.policy_grads, nullptr);
        }
        // clipped-and-smaller branch: clamp is saturated, zero gradient
    }
    return res;
}

std::pair<Vec, Vec> compute_advantages(const std::vector<RolloutStep>& steps, double gamma,
                                       double lambda, double bootstrap_value) {
    const int n = int(steps.size());
    Vec adv(n, 0.0), ret(n, 0.0);
    double gae = 0.0;
    for (int t = n - 1; t >= 0; --t) {
        const double not_done = steps[t].done ? 0.0 : 1.0;
        const double v_next = t + 1 < n ? steps[t + 1].value : bootstrap_value;
        const double delta = steps[t].reward + gamma * not_done * v_next - steps[t].value;
        gae = delta + gamma * lambda * not_done * gae;
        adv[t] = gae;
        ret[t] = adv[t] + steps[t].value;
    }
    return {std::move(adv), std::move(ret)};
}

std::pair<double, double> tilde_policies(const Vec& logits_clean, const Vec& logits_adv, int a) {
    if (logits_clean.size() != logits_adv.size())
        throw ShapeError("tilde_policies: logit size mismatch");
    Vec mix1 = logits_clean;
    mix1[a] = logits_adv[a];
    Vec mix2 = logits_adv;
    mix2[a] = logits_clean[a];
    return {softmax(mix1)[a], softmax(mix2)[a]};
}

PpoLossResult ppo_adv_loss(const NetworkSpec& spec, const Parameters& policy_new,
                           const RolloutBatch& batch, double eta, const std::vector<int>& idx_in) {
    const std::vector<int> idx = idx_in.empty() ? all_indices(batch.steps.size()) : idx_in;
    if (idx.empty()) throw ShapeError("ppo_adv_loss: empty batch");
    PpoLossResult res;
    res.policy_grads = Parameters::zeros(spec);
    const double inv = 1.0 / double(idx.size());
    Tape tape_clean, tape_adv;
    Vec xp;
    for (int i : idx) {
        const RolloutStep& st = batch.steps[i];
        if (st.delta.size() != st.s.size())
            throw ProtocolError("ppo_adv_loss: step is missing its perturbation");
        const double A = batch.advantages[i];
        forward_taped(spec, policy_new, st.s, tape_clean);
        xp.resize(st.s.size());
        for (size_t j = 0; j < xp.size(); ++j) xp[j] = st.s[j] + st.delta[j];
        forward_taped(spec, policy_new, xp, tape_adv);

        const int a = st.a;
        const int na = spec.output_dim();
        Vec mix1 = tape_clean.out;
        mix1[a] = tape_adv.out[a];
        Vec mix2 = tape_adv.out;
        mix2[a] = tape_clean.out[a];
        const Vec sm1 = softmax(mix1);
        const Vec sm2 = softmax(mix2);
        const double po = prob_old(st);
        const double p[2] = {sm1[a], sm2[a]};

        double m[2];
        for (int k = 0; k < 2; ++k) {
            const double ratio = p[k] / po;
            m[k] = std::min(ratio * A, std::clamp(ratio, 1.0 - eta, 1.0 + eta) * A);
        }
        const int pick = m[0] <= m[1] ? 0 : 1;
        res.value += -m[pick] * inv;

        const double ratio = p[pick] / po;
        const double clipped = std::clamp(ratio, 1.0 - eta, 1.0 + eta);
        if (ratio * A <= clipped * A) {
            // d(-p/po * A)/dmix_j = -(A/po) * p * (e_a - sm_j)
            const Vec& sm = pick == 0 ? sm1 : sm2;
            Vec dmix(na);
            for (int j = 0; j < na; ++j)
                dmix[j] = -(A / po) * p[pick] * ((j == a ? 1.0 : 0.0) - sm[j]) * inv;
            // scatter mixed-logit grads back to the clean and adversarial passes
            Vec up_clean(na, 0.0), up_adv(na, 0.0);
            for (int j = 0; j < na; ++j) {
                const bool from_adv = (pick == 0) == (j == a);
                (from_adv ? up_adv : up_clean)[j] = dmix[j];
            }
            backward_accumulate(spec, policy_new, tape_clean, up_clean, res.policy_grads, nullptr);
            backward_accumulate(spec, policy_new, tape_adv, up_adv, res.policy_grads, nullptr);
        }
    }
    return res;
}

Perturbation ppo_pgd_eval_attack(const ScoreFn& policy, const Vec& x, double epsilon, int steps,
                                 double step_size) {
    AttackSpec spec;
    spec.kind = AttackKind::Pgd;
    spec.epsilon = epsilon;
    spec.steps = steps;
    spec.step_size = step_size;
    return attack_observation(policy, x, spec, 0, /*soft_labels=*/true);
}

PpoTotalLoss ppo_total_loss(const NetworkSpec& pspec, const Parameters& policy,
                            const NetworkSpec& vspec, const Parameters& value,
                            const RolloutBatch& batch, const PpoConfig& cfg, double kappa,
                            bool adversarial, const std::vector<int>& idx_in) {
    const std::vector<int> idx = idx_in.empty() ? all_indices(batch.steps.size()) : idx_in;
    PpoTotalLoss out;
    out.policy_grads = Parameters::zeros(pspec);
    out.value_grads = Parameters::zeros(vspec);

    PpoLossResult std_res = ppo_standard_loss(pspec, policy, batch, cfg.clip_eta, idx);
    double policy_loss = std_res.value;
    if (adversarial && kappa < 1.0) {
        PpoLossResult adv = ppo_adv_loss(pspec, policy, batch, cfg.clip_eta, idx);
        policy_loss = total_loss(std_res.value, adv.value, kappa);
        if (kappa == 0.0) {
            out.policy_grads = std::move(adv.policy_grads);
        } else {
            axpy(kappa, std_res.policy_grads, out.policy_grads);
            axpy(1.0 - kappa, adv.policy_grads, out.policy_grads);
        }
    } else {
        out.policy_grads = std::move(std_res.policy_grads);
    }
    out.value = policy_loss;

    const double inv = 1.0 / double(idx.size());
    Tape tape;
    // value head: vf_coef * mean((V(s) - return)^2)
    for (int i : idx) {
        forward_taped(vspec, value, batch.steps[i].s, tape);
        const double e = tape.out[0] - batch.returns[i];
        out.value += cfg.vf_coef * e * e * inv;
        Vec up{2.0 * cfg.vf_coef * e * inv};
        backward_accumulate(vspec, value, tape, up, out.value_grads, nullptr);
    }
    // entropy bonus: -entropy_coef * mean(H(pi(s)))
    if (cfg.entropy_coef != 0.0) {
        for (int i : idx) {
            forward_taped(pspec, policy, batch.steps[i].s, tape);
            const Vec p = softmax(tape.out);
            double H = 0.0;
            for (double q : p) H -= q * std::log(std::max(q, 1e-300));
            out.value += -cfg.entropy_coef * H * inv;
            // dH/dz_i = -p_i (log p_i + H)
            Vec up(p.size());
            for (size_t j = 0; j < p.size(); ++j)
                up[j] = cfg.entropy_coef * p[j] * (std::log(std::max(p[j], 1e-300)) + H) * inv;
            backward_accumulate(pspec, policy, tape, up, out.policy_grads, nullptr);
        }
    }
    return out;
}

Model make_ppo_model(EnvKind env, const std::vector<int>& hidden, uint64_t seed) {
    NetworkSpec pspec, vspec;
    pspec.layer_sizes.push_back(env_obs_dim(env));
    vspec.layer_sizes.push_back(env_obs_dim(env));
    for (int h : hidden) {
        pspec.layer_sizes.push_back(h);
        vspec.layer_sizes.push_back(h);
    }
    pspec.layer_sizes.push_back(env_num_actions(env));
    vspec.layer_sizes.push_back(1);
    pspec.validate();
    vspec.validate();
    Model m;
    m.nets.push_back({"policy", pspec, glorot_init(pspec, mix_seed(seed, 11))});
    m.nets.push_back({"value", vspec, glorot_init(vspec, mix_seed(seed, 12))});
    return m;
}

Model train_ppo_phase(const Model& init, EnvKind env, double eps_lo, double eps_hi,
                      const PpoConfig& cfg, uint64_t seed) {
    if (eps_lo > eps_hi) throw ConfigError("train_ppo_phase: eps_lo must be <= eps_hi");
    const NetworkSpec& pspec = init.net("policy").spec;
    const NetworkSpec& vspec = init.net("value").spec;
    Parameters policy = init.net("policy").params;
    Parameters value = init.net("value").params;
    AdamState adam_p = AdamState::init(pspec, cfg.learning_rate);
    AdamState adam_v = AdamState::init(vspec, cfg.learning_rate);

    SplitMix64 rng_action(mix_seed(seed, 21));
    SplitMix64 rng_shuffle(mix_seed(seed, 22));
    uint64_t episode = 0;
    auto [state, obs] = env_reset(env, mix_seed(seed, 23, episode));

    const int64_t frames = cfg.frames_per_phase;
    int64_t frame = 0;
    const bool adversarial = cfg.loss_mode != LossMode::Standard;

    while (frame < frames) {
        const int len = int(std::min<int64_t>(cfg.rollout_len, frames - frame));
        RolloutBatch batch;
        batch.steps.reserve(len);

        // snapshot of the behavior policy for this rollout
        const Parameters policy_old = policy;
        for (int t = 0; t < len; ++t) {
            RolloutStep st;
            st.s = obs;
            st.logits_old = forward(pspec, policy_old, obs);
            st.value = forward(vspec, value, obs)[0];
            // sample from the categorical policy
            const Vec p = softmax(st.logits_old);
            double u = rng_action.next_double();
            int a = 0;
            for (; a + 1 < int(p.size()); ++a) {
                u -= p[a];
                if (u < 0.0) break;
            }
            st.a = a;
            StepOutcome out = env_step(state, a);
            st.reward = out.reward;
            st.done = out.done;
            batch.steps.push_back(std::move(st));
            if (out.done) {
                episode += 1;
                std::tie(state, obs) = env_reset(env, mix_seed(seed, 23, episode));
            } else {
                obs = std::move(out.obs);
            }
        }
        const double bootstrap =
            batch.steps.back().done ? 0.0 : forward(vspec, value, obs)[0];
        auto [adv, ret] = compute_advantages(batch.steps, cfg.gamma, cfg.gae_lambda, bootstrap);
        batch.returns = std::move(ret);
        // normalize advantages per batch
        double mean = 0.0;
        for (double a : adv) mean += a;
        mean /= double(adv.size());
        double var = 0.0;
        for (double a : adv) var += (a - mean) * (a - mean);
        var /= double(adv.size());
        const double sd = std::sqrt(var) + 1e-8;
        for (double& a : adv) a = (a - mean) / sd;
        batch.advantages = std::move(adv);

        // perturbations against the behavior policy, once per rollout state
        if (adversarial) {
            NetScore behavior(pspec, policy_old);
            for (int t = 0; t < len; ++t) {
                const double frac =
                    frames > 1 ? double(frame + t) / double(frames - 1) : 1.0;
                const double eps_t = eps_lo + (eps_hi - eps_lo) * frac;
                RolloutStep& st = batch.steps[t];
                if (eps_t > 0.0)
                    st.delta = train_perturb_ppo(behavior, st.s, eps_t, cfg.train_attack,
                                                 mix_seed(seed, 24, uint64_t(frame + t)))
                                   .delta;
                else
                    st.delta.assign(st.s.size(), 0.0);
            }
        }

        const double kappa = cfg.kappa.at(frames > 0 ? double(frame) / double(frames) : 0.0);
        std::vector<int> order = std::vector<int>(batch.steps.size());
        std::iota(order.begin(), order.end(), 0);
        for (int e = 0; e < cfg.epochs; ++e) {
            // Fisher-Yates with the dedicated stream
            for (int i = int(order.size()) - 1; i > 0; --i)
                std::swap(order[i], order[size_t(rng_shuffle.next_below(uint64_t(i + 1)))]);
            for (size_t lo = 0; lo < order.size(); lo += size_t(cfg.minibatch)) {
                const size_t hi = std::min(order.size(), lo + size_t(cfg.minibatch));
                std::vector<int> idx(order.begin() + lo, order.begin() + hi);
                PpoTotalLoss L =
                    ppo_total_loss(pspec, policy, vspec, value, batch, cfg, kappa, adversarial, idx);
                if (!std::isfinite(L.value))
                    throw NumericError("train_ppo_phase: non-finite loss at frame " +
                                       std::to_string(frame));
                std::tie(policy, adam_p) = adam_step(adam_p, policy, L.policy_grads);
                std::tie(value, adam_v) = adam_step(adam_v, value, L.value_grads);
            }
        }
        frame += len;
    }

    Model out = init;
    out.find("policy")->params = std::move(policy);
    out.find("value")->params = std::move(value);
    return out;
}

}  // namespace bcl
