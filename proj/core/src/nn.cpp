#include "bcl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "bcl/rng.hpp"

namespace bcl {

void NetworkSpec::validate() const {
    if (layer_sizes.size() < 2) throw ConfigError("network spec needs at least 2 layers");
    for (int s : layer_sizes)
        if (s < 1) throw ConfigError("network spec: all layer sizes must be >= 1");
}

bool Parameters::finite() const {
    for (const auto& l : layers) {
        for (double w : l.W.a)
            if (!std::isfinite(w)) return false;
        for (double b : l.b)
            if (!std::isfinite(b)) return false;
    }
    return true;
}

namespace {

// (in_dim, out_dim) for each affine layer of the spec, trunk first, then
// value head and advantage head for dueling nets.
std::vector<std::pair<int, int>> affine_shapes(const NetworkSpec& spec) {
    std::vector<std::pair<int, int>> shapes;
    const auto& ls = spec.layer_sizes;
    const int n = int(ls.size());
    if (spec.dueling) {
        for (int i = 0; i + 2 < n; ++i) shapes.emplace_back(ls[i], ls[i + 1]);
        const int h = ls[n - 2];
        shapes.emplace_back(h, 1);          // value head
        shapes.emplace_back(h, ls[n - 1]);  // advantage head
    } else {
        for (int i = 0; i + 1 < n; ++i) shapes.emplace_back(ls[i], ls[i + 1]);
    }
    return shapes;
}

void affine_apply(const LayerParams& l, const Vec& x, Vec& out) {
    out.resize(l.b.size());
    const double* w = l.W.a.data();
    for (int i = 0; i < l.W.rows; ++i) {
        double s = l.b[i];
        const double* row = w + size_t(i) * l.W.cols;
        for (int j = 0; j < l.W.cols; ++j) s += row[j] * x[j];
        out[i] = s;
    }
}

void relu_inplace(Vec& v) {
    for (double& x : v) x = x > 0.0 ? x : 0.0;
}

void check_input(const NetworkSpec& spec, const Parameters& params, const Vec& x) {
    if (int(x.size()) != spec.input_dim()) throw ShapeError("forward: input dimension mismatch");
    if (int(params.layers.size()) != spec.affine_count())
        throw ShapeError("forward: parameter layer count mismatch");
}

}  // namespace

Parameters Parameters::zeros(const NetworkSpec& spec) {
    Parameters p;
    for (auto [in, out] : affine_shapes(spec)) {
        LayerParams l;
        l.W = Mat(out, in);
        l.b.assign(out, 0.0);
        p.layers.push_back(std::move(l));
    }
    return p;
}

Parameters glorot_init(const NetworkSpec& spec, uint64_t seed) {
    spec.validate();
    Parameters p = Parameters::zeros(spec);
    SplitMix64 rng(seed);
    for (auto& l : p.layers) {
        const double limit = std::sqrt(6.0 / double(l.W.rows + l.W.cols));
        for (double& w : l.W.a) w = rng.uniform(-limit, limit);
        // biases stay zero
    }
    return p;
}

Vec dueling_combine(double v, const Vec& adv) {
    if (adv.empty()) throw ShapeError("dueling_combine: empty advantage vector");
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= double(adv.size());
    Vec out(adv.size());
    for (size_t i = 0; i < adv.size(); ++i) out[i] = v + adv[i] - mean;
    return out;
}

void forward_taped(const NetworkSpec& spec, const Parameters& params, const Vec& x, Tape& tape) {
    check_input(spec, params, x);
    const int trunk = spec.trunk_count();
    const int total = spec.affine_count();
    tape.input = x;
    tape.pre.resize(total);
    tape.post.resize(total);

    const Vec* cur = &tape.input;
    for (int i = 0; i < trunk; ++i) {
        affine_apply(params.layers[i], *cur, tape.pre[i]);
        tape.post[i] = tape.pre[i];
        if (spec.dueling || i + 1 < trunk) relu_inplace(tape.post[i]);
        cur = &tape.post[i];
    }
    if (spec.dueling) {
        affine_apply(params.layers[trunk], *cur, tape.pre[trunk]);          // V
        affine_apply(params.layers[trunk + 1], *cur, tape.pre[trunk + 1]);  // A
        tape.post[trunk] = tape.pre[trunk];
        tape.post[trunk + 1] = tape.pre[trunk + 1];
        tape.out = dueling_combine(tape.pre[trunk][0], tape.pre[trunk + 1]);
    } else {
        tape.out = *cur;
    }
}

Vec forward(const NetworkSpec& spec, const Parameters& params, const Vec& x) {
    Tape t;
    forward_taped(spec, params, x, t);
    return t.out;
}

void backward_accumulate(const NetworkSpec& spec, const Parameters& params, const Tape& tape,
                         const Vec& upstream, Parameters& grad, Vec* input_grad) {
    if (int(upstream.size()) != spec.output_dim())
        throw ShapeError("backward: upstream dimension mismatch");
    const int trunk = spec.trunk_count();

    // Delta flowing back into the last trunk activation.
    Vec delta;
    if (spec.dueling) {
        const int na = spec.output_dim();
        double us = 0.0;
        for (double u : upstream) us += u;
        const double umean = us / double(na);
        // dV = sum(u); dA_j = u_j - mean(u)
        Vec dadv(na);
        for (int j = 0; j < na; ++j) dadv[j] = upstream[j] - umean;

        const Vec& h = trunk > 0 ? tape.post[trunk - 1] : tape.input;
        auto& gv = grad.layers[trunk];
        auto& ga = grad.layers[trunk + 1];
        const auto& wv = params.layers[trunk];
        const auto& wa = params.layers[trunk + 1];

        delta.assign(h.size(), 0.0);
        gv.b[0] += us;
        for (size_t j = 0; j < h.size(); ++j) {
            gv.W.a[j] += us * h[j];
            delta[j] += wv.W.a[j] * us;
        }
        for (int i = 0; i < na; ++i) {
            ga.b[i] += dadv[i];
            const double* row = wa.W.a.data() + size_t(i) * wa.W.cols;
            double* grow = ga.W.a.data() + size_t(i) * wa.W.cols;
            for (size_t j = 0; j < h.size(); ++j) {
                grow[j] += dadv[i] * h[j];
                delta[j] += row[j] * dadv[i];
            }
        }
    } else {
        delta = upstream;
    }

    for (int i = trunk - 1; i >= 0; --i) {
        const bool has_relu = spec.dueling || i + 1 < trunk;
        if (has_relu) {
            // ReLU subgradient: 0 at 0
            for (size_t k = 0; k < delta.size(); ++k)
                if (tape.pre[i][k] <= 0.0) delta[k] = 0.0;
        }
        const Vec& in = i > 0 ? tape.post[i - 1] : tape.input;
        auto& gl = grad.layers[i];
        const auto& l = params.layers[i];
        Vec next(in.size(), 0.0);
        for (int r = 0; r < l.W.rows; ++r) {
            const double d = delta[r];
            gl.b[r] += d;
            const double* row = l.W.a.data() + size_t(r) * l.W.cols;
            double* grow = gl.W.a.data() + size_t(r) * l.W.cols;
            if (d != 0.0) {
                for (int c = 0; c < l.W.cols; ++c) {
                    grow[c] += d * in[c];
                    next[c] += row[c] * d;
                }
            }
        }
        delta = std::move(next);
    }
    if (input_grad) *input_grad = std::move(delta);
}

Gradients backward(const NetworkSpec& spec, const Parameters& params, const Vec& x,
                   const Vec& upstream) {
    Tape t;
    forward_taped(spec, params, x, t);
    Gradients g;
    g.params = Parameters::zeros(spec);
    backward_accumulate(spec, params, t, upstream, g.params, &g.input);
    return g;
}

AdamState AdamState::init(const NetworkSpec& spec, double learning_rate) {
    AdamState s;
    s.m = Parameters::zeros(spec);
    s.v = Parameters::zeros(spec);
    s.learning_rate = learning_rate;
    return s;
}

std::pair<Parameters, AdamState> adam_step(const AdamState& state, const Parameters& params,
                                           const Parameters& grads) {
    if (!grads.finite()) throw NumericError("adam_step: non-finite gradient");
    AdamState s = state;
    Parameters p = params;
    s.step += 1;
    const double bc1 = 1.0 - std::pow(s.beta1, double(s.step));
    const double bc2 = 1.0 - std::pow(s.beta2, double(s.step));
    for (size_t li = 0; li < p.layers.size(); ++li) {
        auto upd = [&](Vec& pv, Vec& mv, Vec& vv, const Vec& gv) {
            for (size_t i = 0; i < pv.size(); ++i) {
                mv[i] = s.beta1 * mv[i] + (1.0 - s.beta1) * gv[i];
                vv[i] = s.beta2 * vv[i] + (1.0 - s.beta2) * gv[i] * gv[i];
                const double mhat = mv[i] / bc1;
                const double vhat = vv[i] / bc2;
                pv[i] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.eps);
            }
        };
        upd(p.layers[li].W.a, s.m.layers[li].W.a, s.v.layers[li].W.a, grads.layers[li].W.a);
        upd(p.layers[li].b, s.m.layers[li].b, s.v.layers[li].b, grads.layers[li].b);
    }
    return {std::move(p), std::move(s)};
}

namespace {

// Affine layer on an interval, min/max form: picks the endpoint per weight
// sign. For a degenerate interval this reduces to the exact forward pass.
void affine_interval(const LayerParams& l, const Vec& lo, const Vec& hi, Vec& out_lo, Vec& out_hi) {
    out_lo.resize(l.b.size());
    out_hi.resize(l.b.size());
    for (int i = 0; i < l.W.rows; ++i) {
        double slo = l.b[i];
        double shi = l.b[i];
        const double* row = l.W.a.data() + size_t(i) * l.W.cols;
        for (int j = 0; j < l.W.cols; ++j) {
            const double w = row[j];
            if (w >= 0.0) {
                slo += w * lo[j];
                shi += w * hi[j];
            } else {
                slo += w * hi[j];
                shi += w * lo[j];
            }
        }
        out_lo[i] = slo;
        out_hi[i] = shi;
    }
}

void relu_interval(Vec& lo, Vec& hi) {
    for (double& x : lo) x = x > 0.0 ? x : 0.0;
    for (double& x : hi) x = x > 0.0 ? x : 0.0;
}

// Interval form of Q_a = V + A_a - mean(A), keeping the single occurrence of
// A_a together: Q_a = V + (1-1/n) A_a - (1/n) sum_{k!=a} A_k.
void dueling_combine_interval(const Vec& lv, const Vec& hv, const Vec& la, const Vec& ha,
                              Vec& out_lo, Vec& out_hi) {
    const int n = int(la.size());
    double sum_lo = 0.0, sum_hi = 0.0;
    for (int k = 0; k < n; ++k) {
        sum_lo += la[k];
        sum_hi += ha[k];
    }
    const double c = 1.0 - 1.0 / double(n);
    out_lo.resize(n);
    out_hi.resize(n);
    for (int a = 0; a < n; ++a) {
        out_lo[a] = lv[0] + c * la[a] - (sum_hi - ha[a]) / double(n);
        out_hi[a] = hv[0] + c * ha[a] - (sum_lo - la[a]) / double(n);
    }
}

}  // namespace

IntervalBounds ibp_forward_taped(const NetworkSpec& spec, const Parameters& params, const Vec& x,
                                 double epsilon, IbpTape& tape, double box_lo, double box_hi) {
    if (epsilon < 0.0) throw DomainError("ibp_forward: epsilon must be >= 0");
    check_input(spec, params, x);

    if (epsilon == 0.0) {
        tape.degenerate = true;
        forward_taped(spec, params, x, tape.fwd);
        tape.out.lower = tape.fwd.out;
        tape.out.upper = tape.fwd.out;
        return tape.out;
    }
    tape.degenerate = false;

    const int trunk = spec.trunk_count();
    const int total = spec.affine_count();
    tape.lo_pre.resize(total);
    tape.hi_pre.resize(total);
    tape.lo_post.resize(total);
    tape.hi_post.resize(total);

    // Input interval: the perturbed observation stays inside the box.
    tape.lo_in.resize(x.size());
    tape.hi_in.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        tape.lo_in[i] = std::max(x[i] - epsilon, box_lo);
        tape.hi_in[i] = std::min(x[i] + epsilon, box_hi);
    }

    const Vec* lo = &tape.lo_in;
    const Vec* hi = &tape.hi_in;
    for (int i = 0; i < trunk; ++i) {
        affine_interval(params.layers[i], *lo, *hi, tape.lo_pre[i], tape.hi_pre[i]);
        tape.lo_post[i] = tape.lo_pre[i];
        tape.hi_post[i] = tape.hi_pre[i];
        if (spec.dueling || i + 1 < trunk) relu_interval(tape.lo_post[i], tape.hi_post[i]);
        lo = &tape.lo_post[i];
        hi = &tape.hi_post[i];
    }
    if (spec.dueling) {
        affine_interval(params.layers[trunk], *lo, *hi, tape.lo_pre[trunk], tape.hi_pre[trunk]);
        affine_interval(params.layers[trunk + 1], *lo, *hi, tape.lo_pre[trunk + 1],
                        tape.hi_pre[trunk + 1]);
        dueling_combine_interval(tape.lo_pre[trunk], tape.hi_pre[trunk], tape.lo_pre[trunk + 1],
                                 tape.hi_pre[trunk + 1], tape.out.lower, tape.out.upper);
    } else {
        tape.out.lower = *lo;
        tape.out.upper = *hi;
    }
    return tape.out;
}

IntervalBounds ibp_forward(const NetworkSpec& spec, const Parameters& params, const Vec& x,
                           double epsilon, double box_lo, double box_hi) {
    IbpTape t;
    return ibp_forward_taped(spec, params, x, epsilon, t, box_lo, box_hi);
}

void ibp_backward_accumulate(const NetworkSpec& spec, const Parameters& params,
                             const IbpTape& tape, const Vec& grad_lower, const Vec& grad_upper,
                             Parameters& grad) {
    if (tape.degenerate) {
        Vec upstream(grad_lower.size());
        for (size_t i = 0; i < upstream.size(); ++i) upstream[i] = grad_lower[i] + grad_upper[i];
        backward_accumulate(spec, params, tape.fwd, upstream, grad, nullptr);
        return;
    }

    const int trunk = spec.trunk_count();
    Vec dlo, dhi;  // deltas on the bounds flowing into the trunk output

    if (spec.dueling) {
        const int n = spec.output_dim();
        const double c = 1.0 - 1.0 / double(n);
        const double inv = 1.0 / double(n);
        double glo_sum = 0.0, ghi_sum = 0.0;
        for (int a = 0; a < n; ++a) {
            glo_sum += grad_lower[a];
            ghi_sum += grad_upper[a];
        }
        // heads: value head interval grads
        Vec d_lv(1, glo_sum), d_hv(1, ghi_sum);
        Vec d_la(n), d_ha(n);
        for (int a = 0; a < n; ++a) {
            // lower_a = lv + c*la_a - (sum_hi - ha_a)/n
            // upper_a = hv + c*ha_a - (sum_lo - la_a)/n
            d_la[a] = c * grad_lower[a] - inv * (ghi_sum - grad_upper[a]);
            d_ha[a] = c * grad_upper[a] - inv * (glo_sum - grad_lower[a]);
        }

        const Vec& in_lo = trunk > 0 ? tape.lo_post[trunk - 1] : tape.lo_in;
        const Vec& in_hi = trunk > 0 ? tape.hi_post[trunk - 1] : tape.hi_in;
        dlo.assign(in_lo.size(), 0.0);
        dhi.assign(in_hi.size(), 0.0);

        auto head_backward = [&](int li, const Vec& glo, const Vec& ghi) {
            const auto& l = params.layers[li];
            auto& gl = grad.layers[li];
            for (int i = 0; i < l.W.rows; ++i) {
                const double gL = glo[i];
                const double gH = ghi[i];
                gl.b[i] += gL + gH;
                const double* row = l.W.a.data() + size_t(i) * l.W.cols;
                double* grow = gl.W.a.data() + size_t(i) * l.W.cols;
                for (int j = 0; j < l.W.cols; ++j) {
                    const double w = row[j];
                    if (w >= 0.0) {
                        grow[j] += gL * in_lo[j] + gH * in_hi[j];
                        dlo[j] += w * gL;
                        dhi[j] += w * gH;
                    } else {
                        grow[j] += gL * in_hi[j] + gH * in_lo[j];
                        dhi[j] += w * gL;
                        dlo[j] += w * gH;
                    }
                }
            }
        };
        head_backward(trunk, d_lv, d_hv);
        head_backward(trunk + 1, d_la, d_ha);
    } else {
        dlo = grad_lower;
        dhi = grad_upper;
    }

    for (int i = trunk - 1; i >= 0; --i) {
        const bool has_relu = spec.dueling || i + 1 < trunk;
        if (has_relu) {
            for (size_t k = 0; k < dlo.size(); ++k) {
                if (tape.lo_pre[i][k] <= 0.0) dlo[k] = 0.0;
                if (tape.hi_pre[i][k] <= 0.0) dhi[k] = 0.0;
            }
        }
        const Vec& in_lo = i > 0 ? tape.lo_post[i - 1] : tape.lo_in;
        const Vec& in_hi = i > 0 ? tape.hi_post[i - 1] : tape.hi_in;
        const auto& l = params.layers[i];
        auto& gl = grad.layers[i];
        Vec nlo(in_lo.size(), 0.0), nhi(in_hi.size(), 0.0);
        for (int r = 0; r < l.W.rows; ++r) {
            const double gL = dlo[r];
            const double gH = dhi[r];
            gl.b[r] += gL + gH;
            const double* row = l.W.a.data() + size_t(r) * l.W.cols;
            double* grow = gl.W.a.data() + size_t(r) * l.W.cols;
            for (int c = 0; c < l.W.cols; ++c) {
                const double w = row[c];
                if (w >= 0.0) {
                    grow[c] += gL * in_lo[c] + gH * in_hi[c];
                    nlo[c] += w * gL;
                    nhi[c] += w * gH;
                } else {
                    grow[c] += gL * in_hi[c] + gH * in_lo[c];
                    nhi[c] += w * gL;
                    nlo[c] += w * gH;
                }
            }
        }
        dlo = std::move(nlo);
        dhi = std::move(nhi);
    }
}

int argmax(const Vec& v) {
    if (v.empty()) throw ShapeError("argmax: empty vector");
    int best = 0;
    for (int i = 1; i < int(v.size()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

Vec softmax(const Vec& z) {
    Vec p(z.size());
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    double sum = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

void axpy(double alpha, const Parameters& x, Parameters& y) {
    for (size_t li = 0; li < y.layers.size(); ++li) {
        for (size_t i = 0; i < y.layers[li].W.a.size(); ++i)
            y.layers[li].W.a[i] += alpha * x.layers[li].W.a[i];
        for (size_t i = 0; i < y.layers[li].b.size(); ++i)
            y.layers[li].b[i] += alpha * x.layers[li].b[i];
    }
}

void scale(Parameters& p, double alpha) {
    for (auto& l : p.layers) {
        for (double& w : l.W.a) w *= alpha;
        for (double& b : l.b) b *= alpha;
    }
}

void fill_zero(Parameters& p) {
    for (auto& l : p.layers) {
        std::fill(l.W.a.begin(), l.W.a.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
}

}  // namespace bcl
