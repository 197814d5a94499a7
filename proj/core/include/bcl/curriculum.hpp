#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bcl/attacks.hpp"
#include "bcl/model.hpp"

namespace bcl {

// Strictly increasing budget sequence eps_1 < ... < eps_L with eps_L = target;
// 1-based indexing matches the algorithm, at(0) = eps0.
struct Curriculum {
    double eps0 = 0.0;
    double increment = 1.0 / 255.0;
    std::vector<double> budgets;

    int size() const { return int(budgets.size()); }  // L
    double target() const { return budgets.back(); }
    double at(int i) const;  // i in 0..L
};

Curriculum make_curriculum(double eps0, double target, double increment);

// Reward thresholds used by the robustness probe and the phase-acceptance
// test; vk defaults to nominal + adv (the phase score of a run exactly at
// both bars).
struct ThresholdPolicy {
    double nominal = 0.0;
    double adv = 0.0;
    double vk = std::numeric_limits<double>::quiet_NaN();
    AttackSpec probe;

    double nominal_threshold(double) const { return nominal; }
    double adv_threshold(double) const { return adv; }
    double vk_threshold() const;
};

// Robustness probe callbacks. nominal is evaluated once per probe; adv is the
// reward under the probe attack at a budget.
struct ProbeFns {
    std::function<double(const Model&)> nominal;
    std::function<double(const Model&, double eps)> adv;
};

// Smallest index i in {first..L} whose budget the model is not robust to,
// L+1 if robust to all. A failed nominal check fails the whole slice without
// any attack evaluations.
int eval_robust(const Model& model, const Curriculum& cur, int first, const ThresholdPolicy& th,
                const ProbeFns& probe);

enum class SkipPolicy { AlwaysNext, MaxSkip };

// Returns (l, eps_{l-1}): the next index to train and the best verified
// budget. AlwaysNext takes j+1 without probing; MaxSkip probes and jumps to
// the smallest non-robust budget. l = L+1 terminates the outer loop.
std::pair<int, double> choose_next(const Model& model, const Curriculum& cur, int j,
                                   const ThresholdPolicy& th, SkipPolicy policy,
                                   const ProbeFns& probe);

enum class BclVariant { At, Ncl, BclC, BclMos, BclRadial, BclRadialAt };

BclVariant parse_variant(const std::string& name);  // "at"|"ncl"|"bcl-c"|...
std::string variant_name(BclVariant v);

struct BclConfig {
    BclVariant variant = BclVariant::BclC;
    int K = 3;
    int K_min = 3;
    int M = 2;
    uint64_t base_seed = 0;
    ThresholdPolicy thresholds;

    SkipPolicy skip() const {
        return variant == BclVariant::BclMos ? SkipPolicy::MaxSkip : SkipPolicy::AlwaysNext;
    }
    void validate() const;
};

using TrainFn = std::function<Model(const Model& init, double eps_lo, double eps_hi, uint64_t seed)>;

struct RunRecord {
    int k = 0;
    uint64_t seed = 0;
    double vk = 0.0;
    double nominal = 0.0;
    double adv_hi = 0.0;  // at the trained budget
    double adv_lo = 0.0;  // at the previous budget
    bool failed = false;
};

struct PhaseRecord {
    int phase = 0;            // 0-based phase counter
    int index_trained = 0;    // curriculum index l
    double eps_trained = 0.0;
    double eps_lo = 0.0;
    std::vector<RunRecord> runs;
    int chosen_k = 0;         // k* (1-based)
    int next_index = 0;       // l from the following ChooseNext
    double eps_best_after = 0.0;
    uint32_t bootstrap_crc = 0;
    double wall_ms = 0.0;
    std::string stage;        // "bcl" | "radial" | "at"
};

struct BclResult {
    Model model;
    std::vector<PhaseRecord> phases;
    double eps_best = 0.0;
};

using PhaseLog = std::function<void(const PhaseRecord&, const Model& champion)>;

// The full bootstrapped-opportunistic loop: per phase up to K runs from the
// single best model so far, early break once k >= K_min and V_k clears the
// bar, best-of-phase becomes the next bootstrap. Failed runs score -inf; a
// phase whose runs all fail is retried once with fresh seeds, then aborts.
BclResult bcl_run(const Model& f0, const BclConfig& cfg, const Curriculum& cur,
                  const TrainFn& train, const ProbeFns& probe, const PhaseLog& log = {});

struct RadialResult {
    Model final_model;
    Model best_model;  // best along the curriculum path by score_fn
    int best_phase = -1;
    std::vector<PhaseRecord> phases;
    double stop_eps = 0.0;  // budget of the last trained phase
    bool completed = false; // reached the end of the curriculum
};

// Baseline-curriculum RADIAL training: per phase accept the first of up to K
// runs whose nominal reward clears the bar, otherwise the highest-nominal run
// advances; stop after M consecutive below-threshold phases.
RadialResult radial_curriculum_run(const Model& f0, const BclConfig& cfg, const Curriculum& cur,
                                   const TrainFn& train, const ProbeFns& probe,
                                   const std::function<double(const Model&)>& score_fn,
                                   const PhaseLog& log = {});

struct RadialAtResult {
    RadialResult stage1;
    std::optional<BclResult> stage2;
    Model model;
    std::vector<PhaseRecord> phases;  // both stages, tagged
};

// Stage 1: RADIAL along the baseline curriculum to its stop point; stage 2:
// adversarial-example BCL restarted restart_decrements increments below the
// stop budget, bootstrapped from stage 1's best-along-path model. A stage 1
// that completes the curriculum leaves stage 2 a confirmation no-op.
RadialAtResult radial_plus_at_run(const Model& f0, const BclConfig& radial_cfg,
                                  const BclConfig& at_cfg, const Curriculum& cur,
                                  const TrainFn& radial_train, const TrainFn& at_train,
                                  const ProbeFns& probe,
                                  const std::function<double(const Model&)>& score_fn,
                                  int restart_decrements = 2, const PhaseLog& log = {});

}  // namespace bcl
