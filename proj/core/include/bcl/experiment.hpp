#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bcl/curriculum.hpp"
#include "bcl/dqn.hpp"
#include "bcl/ppo.hpp"

namespace bcl {

// Budgets in configs are either decimals or "n/255" strings.
double parse_epsilon(const std::string& text);

struct MockTrainerConfig {
    // Scripted trainer for orchestrator-level experiments: a "trained" model
    // just remembers its budget and is robust to eps <= trained + margin.
    double robust_increments = 2.0;
    double initial_trained_eps = -1.0;
    double nominal_reward = 1.0;
    double adv_pass = 1.0;
    double adv_fail = 0.0;
};

struct BootstrapConfig {
    std::string checkpoint;        // load f0 from here when set
    int64_t pretrain_frames = 0;   // else standard-loss pretraining budget
};

struct ExperimentConfig {
    EnvKind env = EnvKind::RidgeWalk;
    uint64_t env_seed = 1;

    std::vector<int> hidden = {48, 48};
    bool dueling = true;
    uint64_t init_seed = 1234;

    std::string trainer_kind = "dqn";  // "dqn" | "ppo" | "mock"
    DqnTrainerConfig dqn;
    PpoConfig ppo;
    MockTrainerConfig mock;

    double cur_eps0 = 3.0 / 255.0;
    double cur_target = 25.0 / 255.0;
    double cur_increment = 1.0 / 255.0;

    BclConfig bcl;
    int at_restart_decrements = 2;
    int probe_episodes = 20;
    uint64_t probe_seed = 501;

    int eval_episodes = 20;
    uint64_t eval_seed = 99;
    std::vector<double> eval_epsilons;  // default 0.4/0.8/1.0 of the target
    std::vector<AttackSpec> eval_attacks;  // default: the four-attack suite

    BootstrapConfig bootstrap;
    std::string output_dir = "runs/exp";
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

// Append-only JSON Lines ledger; one flushed line per record.
class Ledger {
public:
    explicit Ledger(const std::string& path);
    void append(const std::string& json_line);
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

struct ExperimentResult {
    Model final_model;
    std::optional<Model> best_path_model;
    std::vector<PhaseRecord> phases;
    double final_score = 0.0;
    double best_path_score = 0.0;
    double eps_best = 0.0;
};

// Runs the configured variant end to end: ledger, per-phase checkpoints,
// final + best-along-path evaluation, report emission.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Regenerate report.md / report.csv from an existing ledger; idempotent and
// never mutates the ledger.
void write_report(const std::string& out_dir);

// Single-phase training entry used by the `train` subcommand.
Model train_single_phase(const ExperimentConfig& cfg, const Model& init, double eps_lo,
                         double eps_hi, uint64_t seed);

// Builders shared with the CLI and tests.
TrainFn make_train_fn(const ExperimentConfig& cfg);
ProbeFns make_probe_fns(const ExperimentConfig& cfg);
Model make_initial_model(const ExperimentConfig& cfg);
std::vector<AttackSpec> default_attack_suite(double epsilon);

}  // namespace bcl
