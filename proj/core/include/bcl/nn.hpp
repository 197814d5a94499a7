#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "bcl/errors.hpp"

namespace bcl {

using Vec = std::vector<double>;

struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(size_t(r) * size_t(c), 0.0) {}

    double& operator()(int r, int c) { return a[size_t(r) * cols + c]; }
    double operator()(int r, int c) const { return a[size_t(r) * cols + c]; }
};

// Dense feedforward net: ReLU on hidden layers, identity on the output.
// With dueling=true the last hidden layer feeds two parallel affine heads,
// a scalar state value V and an |A|-vector advantage head, combined as
// Q_a = V + A_a - mean(A).
struct NetworkSpec {
    std::vector<int> layer_sizes;  // input dim ... output dim
    bool dueling = false;

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }

    // Affine layers before the output layer / heads.
    int trunk_count() const {
        return int(layer_sizes.size()) - 2 + (dueling ? 0 : 1);
    }
    int affine_count() const { return trunk_count() + (dueling ? 2 : 0); }

    void validate() const;  // throws ConfigError on malformed specs
};

struct LayerParams {
    Mat W;
    Vec b;
};

// Per-layer weights/biases; for dueling specs the trunk layers come first,
// then the value head, then the advantage head.
struct Parameters {
    std::vector<LayerParams> layers;

    bool finite() const;
    static Parameters zeros(const NetworkSpec& spec);
};

// Glorot-style uniform init in +-sqrt(6/(fan_in+fan_out)); biases zero.
// Draw order is W row-major then b, layer by layer, from one SplitMix64 stream.
Parameters glorot_init(const NetworkSpec& spec, uint64_t seed);

Vec dueling_combine(double v, const Vec& adv);

// Reusable forward tape; callers that run many passes keep one around to
// avoid reallocation.
struct Tape {
    Vec input;
    std::vector<Vec> pre;   // per affine layer, pre-activation outputs
    std::vector<Vec> post;  // per affine layer, post-activation outputs
    Vec out;
};

Vec forward(const NetworkSpec& spec, const Parameters& params, const Vec& x);
void forward_taped(const NetworkSpec& spec, const Parameters& params, const Vec& x, Tape& tape);

struct Gradients {
    Parameters params;
    Vec input;
};

// Exact reverse-mode gradients of <upstream, forward(x)>.
// ReLU subgradient at 0 is taken as 0.
Gradients backward(const NetworkSpec& spec, const Parameters& params, const Vec& x,
                   const Vec& upstream);

// Accumulating form used by the training loops; `tape` must hold the matching
// forward pass. input_grad may be null when not needed.
void backward_accumulate(const NetworkSpec& spec, const Parameters& params, const Tape& tape,
                         const Vec& upstream, Parameters& grad, Vec* input_grad);

struct AdamState {
    Parameters m;
    Parameters v;
    int64_t step = 0;
    double learning_rate = 0.000125;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState init(const NetworkSpec& spec, double learning_rate);
};

// Bias-corrected Adam; rejects non-finite gradients with NumericError.
std::pair<Parameters, AdamState> adam_step(const AdamState& state, const Parameters& params,
                                           const Parameters& grads);

struct IntervalBounds {
    Vec lower;
    Vec upper;
};

// Interval bound propagation under an l-inf ball of radius epsilon around x,
// with the input interval clipped to the observation box first. epsilon == 0
// collapses to forward(x) exactly.
IntervalBounds ibp_forward(const NetworkSpec& spec, const Parameters& params, const Vec& x,
                           double epsilon, double box_lo = 0.0, double box_hi = 1.0);

// Tape for differentiating through the bound propagation (needed by the
// IBP-based adversarial loss).
struct IbpTape {
    bool degenerate = false;  // epsilon == 0: bounds are the plain forward pass
    Tape fwd;                 // used when degenerate
    std::vector<Vec> lo_pre, hi_pre;    // per affine layer, pre-activation bounds
    std::vector<Vec> lo_post, hi_post;  // per affine layer, post-activation bounds
    Vec lo_in, hi_in;
    IntervalBounds out;
};

IntervalBounds ibp_forward_taped(const NetworkSpec& spec, const Parameters& params, const Vec& x,
                                 double epsilon, IbpTape& tape, double box_lo = 0.0,
                                 double box_hi = 1.0);

// Accumulate d<grad_lower, lower> + d<grad_upper, upper> w.r.t. params.
void ibp_backward_accumulate(const NetworkSpec& spec, const Parameters& params,
                             const IbpTape& tape, const Vec& grad_lower, const Vec& grad_upper,
                             Parameters& grad);

// Small vector/parameter helpers shared by the trainers.
int argmax(const Vec& v);  // lowest-index tie-break
Vec softmax(const Vec& z);
bool all_finite(const Vec& v);
void axpy(double alpha, const Parameters& x, Parameters& y);  // y += alpha * x
void scale(Parameters& p, double alpha);
void fill_zero(Parameters& p);

}  // namespace bcl
