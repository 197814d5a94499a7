#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "bcl/nn.hpp"
#include "bcl/rng.hpp"

namespace bcl {

// Toy environments with observations in [0,1]^d, sized so that an l-inf
// perturbation of ~25/255 can move the apparent bump/ball by a cell.
enum class EnvKind { RidgeWalk, CatchPixels };

EnvKind parse_env_kind(const std::string& name);  // "ridgewalk" | "catchpixels"
std::string env_kind_name(EnvKind kind);

struct StepOutcome {
    Vec obs;
    double reward = 0.0;
    bool done = false;
};

// Value-like environment state; the RNG stream is part of the state so a
// (kind, seed, action sequence) triple fully determines an episode.
struct EnvState {
    EnvKind kind = EnvKind::RidgeWalk;
    SplitMix64 rng;
    int step_count = 0;
    bool done = false;

    // RidgeWalk
    int pos = 0;

    // CatchPixels
    int ball_row = -1;  // -1: no ball on the board
    int ball_col = 0;
    int paddle_left = 3;
    int balls_done = 0;
};

int env_obs_dim(EnvKind kind);
int env_num_actions(EnvKind kind);
int env_horizon(EnvKind kind);

std::pair<EnvState, Vec> env_reset(EnvKind kind, uint64_t seed);
StepOutcome env_step(EnvState& state, int action);

// RidgeWalk: chain of N=12 cells, horizon 32, actions {left, right}.
// Reward +1 on reaching cell N-1 (terminal), -0.02 per step; position clamps
// at 0. Observation is a 24-point Gaussian bump over the unit grid.
namespace ridgewalk {
constexpr int kCells = 12;
constexpr int kObsDim = 24;
constexpr int kHorizon = 32;
constexpr double kStepPenalty = 0.02;
constexpr double kSigma = 0.08;
}  // namespace ridgewalk

Vec encode_ridgewalk(int pos);

// CatchPixels: 8x8 board, ball falls one row per step, width-2 paddle on the
// bottom row, actions {left, stay, right}; catch +1, miss -1; 6 balls per
// episode with an empty spawn frame between balls. Ball columns come from the
// state's SplitMix64 stream (next() % 8).
namespace catchpixels {
constexpr int kGrid = 8;
constexpr int kObsDim = 64;
constexpr int kHorizon = 48;
constexpr int kBalls = 6;
}  // namespace catchpixels

Vec encode_catchpixels(const EnvState& state);

}  // namespace bcl
