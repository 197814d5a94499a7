#include "bcl/curriculum.hpp"

#include <chrono>
#include <cmath>

#include "bcl/errors.hpp"
#include "bcl/harness.hpp"

namespace bcl {

namespace {

double now_ms() {
    using namespace std::chrono;
    return double(duration_cast<microseconds>(steady_clock::now().time_since_epoch()).count()) /
           1000.0;
}

constexpr double kEpsTol = 1e-12;

}  // namespace

double Curriculum::at(int i) const {
    if (i == 0) return eps0;
    if (i < 1 || i > size()) throw DomainError("curriculum index out of range");
    return budgets[size_t(i) - 1];
}

Curriculum make_curriculum(double eps0, double target, double increment) {
    if (increment <= 0.0) throw ConfigError("curriculum: increment must be > 0");
    if (!(eps0 < target)) throw ConfigError("curriculum: eps0 must be < target");
    Curriculum c;
    c.eps0 = eps0;
    c.increment = increment;
    for (int k = 1;; ++k) {
        const double b = eps0 + double(k) * increment;
        if (b >= target - increment * 1e-9) break;
        c.budgets.push_back(b);
    }
    c.budgets.push_back(target);  // terminal snap
    return c;
}

double ThresholdPolicy::vk_threshold() const {
    return std::isnan(vk) ? nominal + adv : vk;
}

int eval_robust(const Model& model, const Curriculum& cur, int first, const ThresholdPolicy& th,
                const ProbeFns& probe) {
    const int L = cur.size();
    if (first > L) return L + 1;
    if (probe.nominal(model) < th.nominal_threshold(cur.at(first))) return first;
    for (int i = first; i <= L; ++i) {
        if (probe.adv(model, cur.at(i)) < th.adv_threshold(cur.at(i))) return i;
    }
    return L + 1;
}

std::pair<int, double> choose_next(const Model& model, const Curriculum& cur, int j,
                                   const ThresholdPolicy& th, SkipPolicy policy,
                                   const ProbeFns& probe) {
    const int L = cur.size();
    int l;
    if (policy == SkipPolicy::AlwaysNext) {
        l = j + 1;  // baseline curriculum; no probing needed
    } else {
        l = eval_robust(model, cur, j + 1, th, probe);
    }
    if (l > L) return {L + 1, cur.at(L)};
    return {l, cur.at(l - 1)};
}

BclVariant parse_variant(const std::string& name) {
    if (name == "at") return BclVariant::At;
    if (name == "ncl") return BclVariant::Ncl;
    if (name == "bcl-c" || name == "bcl_c") return BclVariant::BclC;
    if (name == "bcl-mos" || name == "bcl_mos") return BclVariant::BclMos;
    if (name == "bcl-radial" || name == "bcl_radial") return BclVariant::BclRadial;
    if (name == "bcl-radial-at" || name == "bcl_radial_at") return BclVariant::BclRadialAt;
    throw ConfigError("unknown BCL variant: " + name);
}

std::string variant_name(BclVariant v) {
    switch (v) {
        case BclVariant::At: return "at";
        case BclVariant::Ncl: return "ncl";
        case BclVariant::BclC: return "bcl-c";
        case BclVariant::BclMos: return "bcl-mos";
        case BclVariant::BclRadial: return "bcl-radial";
        case BclVariant::BclRadialAt: return "bcl-radial-at";
    }
    return "bcl-c";
}

void BclConfig::validate() const {
    if (K < 1 || K_min < 1 || K_min > K) throw ConfigError("bcl: need 1 <= K_min <= K");
    if (M < 1) throw ConfigError("bcl: M must be >= 1");
}

BclResult bcl_run(const Model& f0, const BclConfig& cfg, const Curriculum& cur,
                  const TrainFn& train, const ProbeFns& probe, const PhaseLog& log) {
    cfg.validate();
    const int L = cur.size();
    const double target = cur.target();
    BclResult res;
    res.model = f0;

    // f0 is expected to clear the eps0 bar; warn, do not fail.
    if (probe.nominal(f0) < cfg.thresholds.nominal)
        std::fprintf(stderr, "bcl: warning: f0 nominal reward below the eps0 threshold\n");

    auto [l, eps_best] = choose_next(res.model, cur, 0, cfg.thresholds, cfg.skip(), probe);
    res.eps_best = eps_best;
    int phase = 0;

    while (res.eps_best < target - kEpsTol) {
        const double t0 = now_ms();
        const double eps_lo = cur.at(l - 1);
        const double eps_hi = cur.at(l);

        PhaseRecord rec;
        rec.phase = phase;
        rec.index_trained = l;
        rec.eps_trained = eps_hi;
        rec.eps_lo = eps_lo;
        rec.bootstrap_crc = model_crc(res.model);
        rec.stage = "bcl";

        std::vector<Model> candidates;
        for (int retry = 0;; ++retry) {
            candidates.clear();
            rec.runs.clear();
            for (int k = 1; k <= cfg.K; ++k) {
                RunRecord run;
                run.k = k;
                run.seed = cfg.base_seed + uint64_t(phase) * uint64_t(cfg.K) + uint64_t(k) +
                           uint64_t(retry) * 7919ULL;
                Model trained;
                try {
                    trained = train(res.model, eps_lo, eps_hi, run.seed);
                    run.nominal = probe.nominal(trained);
                    run.adv_hi = probe.adv(trained, eps_hi);
                    run.adv_lo = probe.adv(trained, eps_lo);
                    run.vk = phase_eval_score(run.nominal, run.adv_hi, run.adv_lo);
                } catch (const NumericError&) {
                    run.failed = true;
                    run.vk = -std::numeric_limits<double>::infinity();
                    trained = res.model;  // placeholder, never selected below
                }
                candidates.push_back(std::move(trained));
                rec.runs.push_back(run);
                if (!run.failed && k >= cfg.K_min && run.vk >= cfg.thresholds.vk_threshold())
                    break;
            }
            const bool any_ok = std::any_of(rec.runs.begin(), rec.runs.end(),
                                            [](const RunRecord& r) { return !r.failed; });
            if (any_ok) break;
            if (retry >= 1)
                throw NumericError("bcl: phase " + std::to_string(phase) +
                                   ": all runs failed twice, aborting");
        }

        int kstar = 0;
        for (int k = 1; k < int(rec.runs.size()); ++k)
            if (rec.runs[k].vk > rec.runs[kstar].vk) kstar = k;
        rec.chosen_k = rec.runs[kstar].k;
        res.model = std::move(candidates[kstar]);

        std::tie(l, res.eps_best) =
            choose_next(res.model, cur, rec.index_trained, cfg.thresholds, cfg.skip(), probe);
        rec.next_index = l;
        rec.eps_best_after = res.eps_best;
        rec.wall_ms = now_ms() - t0;
        res.phases.push_back(rec);
        if (log) log(rec, res.model);
        phase += 1;
        if (phase > 2 * L + 4)
            throw ProtocolError("bcl: phase budget exceeded, curriculum does not terminate");
    }
    return res;
}

RadialResult radial_curriculum_run(const Model& f0, const BclConfig& cfg, const Curriculum& cur,
                                   const TrainFn& train, const ProbeFns& probe,
                                   const std::function<double(const Model&)>& score_fn,
                                   const PhaseLog& log) {
    cfg.validate();
    const int L = cur.size();
    RadialResult res;
    res.final_model = f0;
    res.best_model = f0;
    double best_score = -std::numeric_limits<double>::infinity();
    int below_count = 0;

    for (int l = 1; l <= L; ++l) {
        const double t0 = now_ms();
        const double eps_lo = cur.at(l - 1);
        const double eps_hi = cur.at(l);

        PhaseRecord rec;
        rec.phase = l - 1;
        rec.index_trained = l;
        rec.eps_trained = eps_hi;
        rec.eps_lo = eps_lo;
        rec.bootstrap_crc = model_crc(res.final_model);
        rec.stage = "radial";

        std::vector<Model> candidates;
        bool accepted = false;
        for (int k = 1; k <= cfg.K; ++k) {
            RunRecord run;
            run.k = k;
            run.seed = cfg.base_seed + uint64_t(l - 1) * uint64_t(cfg.K) + uint64_t(k);
            Model trained;
            try {
                trained = train(res.final_model, eps_lo, eps_hi, run.seed);
                run.nominal = probe.nominal(trained);
            } catch (const NumericError&) {
                run.failed = true;
                run.nominal = -std::numeric_limits<double>::infinity();
                trained = res.final_model;
            }
            candidates.push_back(std::move(trained));
            rec.runs.push_back(run);
            if (!run.failed && run.nominal >= cfg.thresholds.nominal) {
                accepted = true;
                break;
            }
        }
        // accept the first run that clears the nominal bar, else the
        // highest-nominal run advances
        int kstar = 0;
        if (accepted) {
            kstar = int(rec.runs.size()) - 1;
        } else {
            for (int k = 1; k < int(rec.runs.size()); ++k)
                if (rec.runs[k].nominal > rec.runs[kstar].nominal) kstar = k;
            if (rec.runs[kstar].failed)
                throw NumericError("radial: phase " + std::to_string(l - 1) + ": all runs failed");
        }
        rec.chosen_k = rec.runs[kstar].k;
        res.final_model = std::move(candidates[kstar]);
        res.stop_eps = eps_hi;

        const double score = score_fn ? score_fn(res.final_model) : rec.runs[kstar].nominal;
        if (score > best_score) {
            best_score = score;
            res.best_model = res.final_model;
            res.best_phase = l - 1;
        }

        below_count = accepted ? 0 : below_count + 1;
        rec.next_index = l + 1;
        rec.eps_best_after = eps_hi;
        rec.wall_ms = now_ms() - t0;
        res.phases.push_back(rec);
        if (log) log(rec, res.final_model);

        if (below_count >= cfg.M) return res;  // nominal collapsed for M phases
    }
    res.completed = true;
    return res;
}

RadialAtResult radial_plus_at_run(const Model& f0, const BclConfig& radial_cfg,
                                  const BclConfig& at_cfg, const Curriculum& cur,
                                  const TrainFn& radial_train, const TrainFn& at_train,
                                  const ProbeFns& probe,
                                  const std::function<double(const Model&)>& score_fn,
                                  int restart_decrements, const PhaseLog& log) {
    RadialAtResult res;
    res.stage1 = radial_curriculum_run(f0, radial_cfg, cur, radial_train, probe, score_fn, log);
    if (res.stage1.phases.empty())
        throw ProtocolError("radial+at: stage 1 produced no completed phase");
    res.phases = res.stage1.phases;

    if (res.stage1.completed) {
        // the RADIAL pass already covered the whole curriculum
        res.model = res.stage1.best_model;
        return res;
    }

    const double target = cur.target();
    double restart = res.stage1.stop_eps - double(restart_decrements) * cur.increment;
    restart = std::max(restart, cur.eps0);
    if (restart >= target - kEpsTol) restart = std::max(cur.eps0, target - cur.increment);
    const Curriculum at_cur = make_curriculum(restart, target, cur.increment);

    BclResult stage2 = bcl_run(res.stage1.best_model, at_cfg, at_cur, at_train, probe,
                               [&](const PhaseRecord& r, const Model& champion) {
                                   PhaseRecord tagged = r;
                                   tagged.stage = "at";
                                   res.phases.push_back(tagged);
                                   if (log) log(tagged, champion);
                               });
    res.model = stage2.model;
    res.stage2 = std::move(stage2);
    return res;
}

}  // namespace bcl
