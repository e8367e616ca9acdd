#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "htnn/ht_layer.hpp"
#include "htnn/ht_weight.hpp"

namespace htnn {

/// Fully decomposed LSTM: the eight gate matrices live in one HT weight whose
/// root-rank axis enumerates the gates in the order f, u, c, o. The layer
/// input is concat(x_t, h_{t-1}) zero-padded to prod(I).
struct LSTMParams {
    HTWeight ht;
    Index input_size = 0;
    Index hidden_size = 0;
    std::vector<double> b_f, b_u, b_c, b_o;

    void validate() const {
        if (ht.root_rank() != 4)
            throw std::invalid_argument("LSTMParams: HT root rank must be 4 (gates f,u,c,o)");
        if (ht.out_numel() != hidden_size)
            throw std::invalid_argument("LSTMParams: prod(O) must equal hidden size");
        if (ht.in_numel() < input_size + hidden_size)
            throw std::invalid_argument("LSTMParams: prod(I) must cover input + hidden");
        const auto n = static_cast<std::size_t>(hidden_size);
        if (b_f.size() != n || b_u.size() != n || b_c.size() != n || b_o.size() != n)
            throw std::invalid_argument("LSTMParams: bias length must equal hidden size");
    }
};

inline LSTMParams make_lstm(const HTConfig& cfg, Index input_size, std::uint64_t seed) {
    LSTMParams p;
    p.ht = random_init(cfg, seed);
    p.input_size = input_size;
    p.hidden_size = p.ht.out_numel();
    p.b_f.assign(static_cast<std::size_t>(p.hidden_size), 0.0);
    p.b_u = p.b_f;
    p.b_c = p.b_f;
    p.b_o = p.b_f;
    p.validate();
    return p;
}

struct LSTMState {
    std::vector<double> h, c;
};

inline LSTMState zero_state(Index hidden) {
    return {std::vector<double>(static_cast<std::size_t>(hidden), 0.0),
            std::vector<double>(static_cast<std::size_t>(hidden), 0.0)};
}

/// HT-layer outputs before biases and nonlinearities, in gate order.
struct GatePreacts {
    std::vector<double> f_hat, u_hat, c_hat, o_hat;
};

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct StepResult {
    LSTMState state;
    GatePreacts preacts;
};

namespace detail {

struct StepTape {
    std::vector<double> layer_in;            // concat(x, h_prev), unpadded
    std::vector<double> f, u, o, tanh_cbar;  // gate activations
    std::vector<double> c_prev, c, tanh_c;
};

inline StepResult lstm_step_impl(const LSTMParams& p, const std::vector<double>& x,
                                 const LSTMState& s, StepTape* tape) {
    if (static_cast<Index>(x.size()) != p.input_size)
        throw std::invalid_argument("lstm_step: input length " + std::to_string(x.size()) +
                                    ", expected " + std::to_string(p.input_size));
    if (static_cast<Index>(s.h.size()) != p.hidden_size ||
        static_cast<Index>(s.c.size()) != p.hidden_size)
        throw std::invalid_argument("lstm_step: state length mismatch");

    std::vector<double> layer_in(x);
    layer_in.insert(layer_in.end(), s.h.begin(), s.h.end());
    const std::vector<double> z = forward(p.ht, layer_in);

    const Index n = p.hidden_size;
    StepResult out;
    out.preacts.f_hat.assign(z.begin(), z.begin() + n);
    out.preacts.u_hat.assign(z.begin() + n, z.begin() + 2 * n);
    out.preacts.c_hat.assign(z.begin() + 2 * n, z.begin() + 3 * n);
    out.preacts.o_hat.assign(z.begin() + 3 * n, z.begin() + 4 * n);

    out.state.h.resize(static_cast<std::size_t>(n));
    out.state.c.resize(static_cast<std::size_t>(n));
    if (tape) {
        tape->layer_in = layer_in;
        tape->c_prev = s.c;
        tape->f.resize(static_cast<std::size_t>(n));
        tape->u.resize(static_cast<std::size_t>(n));
        tape->o.resize(static_cast<std::size_t>(n));
        tape->tanh_cbar.resize(static_cast<std::size_t>(n));
        tape->c.resize(static_cast<std::size_t>(n));
        tape->tanh_c.resize(static_cast<std::size_t>(n));
    }
    for (Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double f = sigmoid(out.preacts.f_hat[k] + p.b_f[k]);
        const double u = sigmoid(out.preacts.u_hat[k] + p.b_u[k]);
        const double tc = std::tanh(out.preacts.c_hat[k] + p.b_c[k]);
        const double o = sigmoid(out.preacts.o_hat[k] + p.b_o[k]);
        const double c_new = f * s.c[k] + u * tc;
        const double th = std::tanh(c_new);
        out.state.c[k] = c_new;
        out.state.h[k] = o * th;
        if (tape) {
            tape->f[k] = f;
            tape->u[k] = u;
            tape->o[k] = o;
            tape->tanh_cbar[k] = tc;
            tape->c[k] = c_new;
            tape->tanh_c[k] = th;
        }
    }
    return out;
}

}  // namespace detail

/// One recurrent step: gates from the single HT layer, then the standard cell
/// update c_t = f (.) c_{t-1} + u (.) tanh(c_hat + b_c), h_t = o (.) tanh(c_t).
inline StepResult lstm_step(const LSTMParams& p, const std::vector<double>& x,
                            const LSTMState& s) {
    return detail::lstm_step_impl(p, x, s, nullptr);
}

struct LSTMGradients {
    HTGradients ht;
    std::vector<double> b_f, b_u, b_c, b_o;
    std::vector<std::vector<double>> inputs;  // d L / d x_t per step
};

namespace detail {

inline void add_into(std::vector<double>& dst, const std::vector<double>& src) {
    if (dst.empty()) dst.assign(src.size(), 0.0);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

inline void add_gradients(HTGradients& dst, const HTGradients& src) {
    if (dst.leaf_frames.empty()) {
        dst = src;
        return;
    }
    for (std::size_t j = 0; j < src.leaf_frames.size(); ++j)
        for (std::size_t k = 0; k < src.leaf_frames[j].data.size(); ++k)
            dst.leaf_frames[j].data[k] += src.leaf_frames[j].data[k];
    for (std::size_t n = 0; n < src.transfers.size(); ++n)
        for (std::size_t k = 0; k < src.transfers[n].data.size(); ++k)
            dst.transfers[n].data[k] += src.transfers[n].data[k];
}

}  // namespace detail

/// Exact reverse-mode through time. `dh_final` is dL/dh at the last step;
/// the recurrent state starts at zero.
inline LSTMGradients bptt_gradients(const LSTMParams& p,
                                    const std::vector<std::vector<double>>& xs,
                                    const std::vector<double>& dh_final) {
    p.validate();
    if (xs.empty()) throw std::invalid_argument("bptt_gradients: empty sequence");
    if (static_cast<Index>(dh_final.size()) != p.hidden_size)
        throw std::invalid_argument("bptt_gradients: upstream length mismatch");

    const std::size_t T = xs.size();
    std::vector<detail::StepTape> tapes(T);
    LSTMState state = zero_state(p.hidden_size);
    for (std::size_t t = 0; t < T; ++t)
        state = detail::lstm_step_impl(p, xs[t], state, &tapes[t]).state;

    const Index n = p.hidden_size;
    const auto nz = static_cast<std::size_t>(n);
    LSTMGradients g;
    g.b_f.assign(nz, 0.0);
    g.b_u.assign(nz, 0.0);
    g.b_c.assign(nz, 0.0);
    g.b_o.assign(nz, 0.0);
    g.inputs.resize(T);

    std::vector<double> dh(dh_final);
    std::vector<double> dc(nz, 0.0);
    for (std::size_t t = T; t-- > 0;) {
        const detail::StepTape& tp = tapes[t];
        std::vector<double> dz(4 * nz, 0.0);
        for (std::size_t i = 0; i < nz; ++i) {
            const double do_raw = dh[i] * tp.tanh_c[i];
            dc[i] += dh[i] * tp.o[i] * (1.0 - tp.tanh_c[i] * tp.tanh_c[i]);
            const double df = dc[i] * tp.c_prev[i];
            const double du = dc[i] * tp.tanh_cbar[i];
            const double dcbar = dc[i] * tp.u[i] * (1.0 - tp.tanh_cbar[i] * tp.tanh_cbar[i]);
            const double dfhat = df * tp.f[i] * (1.0 - tp.f[i]);
            const double duhat = du * tp.u[i] * (1.0 - tp.u[i]);
            const double dohat = do_raw * tp.o[i] * (1.0 - tp.o[i]);
            dz[i] = dfhat;
            dz[nz + i] = duhat;
            dz[2 * nz + i] = dcbar;
            dz[3 * nz + i] = dohat;
            g.b_f[i] += dfhat;
            g.b_u[i] += duhat;
            g.b_c[i] += dcbar;
            g.b_o[i] += dohat;
            dc[i] *= tp.f[i];
        }
        detail::add_gradients(g.ht, backward_frames(p.ht, tp.layer_in, dz));
        const std::vector<double> din =
            backward_input(p.ht, dz, p.input_size + p.hidden_size);
        g.inputs[t].assign(din.begin(), din.begin() + p.input_size);
        for (std::size_t i = 0; i < nz; ++i)
            dh[i] = din[static_cast<std::size_t>(p.input_size) + i];
    }
    return g;
}

}  // namespace htnn
