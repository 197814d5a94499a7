#include "bcl/env.hpp"

#include <algorithm>
#include <cmath>

#include "bcl/errors.hpp"

namespace bcl {

EnvKind parse_env_kind(const std::string& name) {
    if (name == "ridgewalk") return EnvKind::RidgeWalk;
    if (name == "catchpixels") return EnvKind::CatchPixels;
    throw ConfigError("unknown environment kind: " + name);
}

std::string env_kind_name(EnvKind kind) {
    return kind == EnvKind::RidgeWalk ? "ridgewalk" : "catchpixels";
}

int env_obs_dim(EnvKind kind) {
    return kind == EnvKind::RidgeWalk ? ridgewalk::kObsDim : catchpixels::kObsDim;
}

int env_num_actions(EnvKind kind) { return kind == EnvKind::RidgeWalk ? 2 : 3; }

int env_horizon(EnvKind kind) {
    return kind == EnvKind::RidgeWalk ? ridgewalk::kHorizon : catchpixels::kHorizon;
}

Vec encode_ridgewalk(int pos) {
    using namespace ridgewalk;
    Vec obs(kObsDim);
    const double denom = 2.0 * kSigma * kSigma;
    // Offset via the integer numerator keeps the encoding exactly symmetric:
    // obs_j(p) == obs_{d-1-j}(N-1-p).
    for (int j = 0; j < kObsDim; ++j) {
        const double u = double(j * (kCells - 1) - pos * (kObsDim - 1)) /
                         double((kObsDim - 1) * (kCells - 1));
        obs[j] = std::exp(-(u * u) / denom);
    }
    return obs;
}

Vec encode_catchpixels(const EnvState& s) {
    using namespace catchpixels;
    Vec obs(kObsDim, 0.0);
    if (s.ball_row >= 0) {
        obs[size_t(s.ball_row) * kGrid + s.ball_col] = 1.0;
        if (s.ball_col > 0) obs[size_t(s.ball_row) * kGrid + s.ball_col - 1] = 0.5;
        if (s.ball_col < kGrid - 1) obs[size_t(s.ball_row) * kGrid + s.ball_col + 1] = 0.5;
    }
    obs[size_t(kGrid - 1) * kGrid + s.paddle_left] = 1.0;
    obs[size_t(kGrid - 1) * kGrid + s.paddle_left + 1] = 1.0;
    return obs;
}

namespace {

void spawn_ball(EnvState& s) {
    s.ball_row = 0;
    s.ball_col = int(s.rng.next_below(catchpixels::kGrid));
}

Vec encode(const EnvState& s) {
    return s.kind == EnvKind::RidgeWalk ? encode_ridgewalk(s.pos) : encode_catchpixels(s);
}

}  // namespace

std::pair<EnvState, Vec> env_reset(EnvKind kind, uint64_t seed) {
    EnvState s;
    s.kind = kind;
    s.rng = SplitMix64(seed);
    if (kind == EnvKind::RidgeWalk) {
        s.pos = 0;
    } else {
        s.paddle_left = 3;
        s.balls_done = 0;
        spawn_ball(s);
    }
    return {s, encode(s)};
}

StepOutcome env_step(EnvState& s, int action) {
    if (s.done) throw ProtocolError("env_step: episode is done, reset first");
    if (action < 0 || action >= env_num_actions(s.kind))
        throw ProtocolError("env_step: action out of range");

    StepOutcome out;
    s.step_count += 1;

    if (s.kind == EnvKind::RidgeWalk) {
        using namespace ridgewalk;
        s.pos += action == 1 ? 1 : -1;
        s.pos = std::clamp(s.pos, 0, kCells - 1);
        out.reward = -kStepPenalty;
        if (s.pos == kCells - 1) {
            out.reward += 1.0;
            s.done = true;
        } else if (s.step_count >= kHorizon) {
            s.done = true;
        }
    } else {
        using namespace catchpixels;
        s.paddle_left = std::clamp(s.paddle_left + (action - 1), 0, kGrid - 2);
        if (s.ball_row < 0) {
            spawn_ball(s);
        } else {
            s.ball_row += 1;
            if (s.ball_row == kGrid - 1) {
                const bool caught =
                    s.ball_col == s.paddle_left || s.ball_col == s.paddle_left + 1;
                out.reward = caught ? 1.0 : -1.0;
                s.ball_row = -1;  // empty frame between balls
                s.balls_done += 1;
                if (s.balls_done >= kBalls) s.done = true;
            }
        }
        if (s.step_count >= kHorizon) s.done = true;
    }

    out.done = s.done;
    out.obs = encode(s);
    return out;
}

}  // namespace bcl
