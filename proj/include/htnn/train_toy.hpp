#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "htnn/lstm.hpp"

namespace htnn {

// ----------------------------------------------------------------------------
// Desk-scale synthetic sequence classification: each class is a waveform
// family (sinusoid vs. square wave) sampled with per-feature phase shifts and
// additive Gaussian noise. The model is the FDHT-LSTM cell plus a small dense
// classification head on the final hidden state.
// ----------------------------------------------------------------------------

struct ToyTaskConfig {
    int num_classes = 2;
    int seq_len = 8;
    Index input_size = 4;
    int sequences = 64;
    double noise = 0.1;
};

struct OptimizerConfig {
    enum class Kind { Sgd, Adam };
    Kind kind = Kind::Adam;
    double learning_rate = 0.02;
    double momentum = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct ToyTrainConfig {
    HTConfig model;
    ToyTaskConfig task;
    OptimizerConfig optimizer;
    int epochs = 200;
    int batch_size = 16;
    double dropout = 0.0;
    double stop_accuracy = 2.0;  // > 1 disables early stopping
};

/// Default toy preset: d=2 weight, hidden size 16, exact-fit input 4 + 16.
inline ToyTrainConfig default_toy_config() {
    ToyTrainConfig cfg;
    cfg.model = make_config(2, Shape{5, 4}, Shape{4, 4}, 4, 4, 4);
    return cfg;
}

struct ToySequence {
    std::vector<std::vector<double>> xs;
    int label = 0;
};

inline std::vector<ToySequence> make_toy_dataset(const ToyTaskConfig& task, std::uint64_t seed) {
    GaussianRng rng(seed);
    std::vector<ToySequence> data;
    data.reserve(static_cast<std::size_t>(task.sequences));
    for (int s = 0; s < task.sequences; ++s) {
        ToySequence seq;
        seq.label = s % task.num_classes;
        seq.xs.resize(static_cast<std::size_t>(task.seq_len));
        for (int t = 0; t < task.seq_len; ++t) {
            auto& x = seq.xs[static_cast<std::size_t>(t)];
            x.resize(static_cast<std::size_t>(task.input_size));
            for (Index f = 0; f < task.input_size; ++f) {
                const double phase = 2.0 * 3.14159265358979323846 *
                                         static_cast<double>(t) /
                                         static_cast<double>(task.seq_len) +
                                     0.7 * static_cast<double>(f);
                const double wave = std::sin(phase * static_cast<double>(1 + seq.label % 2));
                // Even classes: sinusoid. Odd classes: square wave.
                const double base = (seq.label % 2 == 0) ? wave : (wave >= 0.0 ? 0.8 : -0.8);
                x[static_cast<std::size_t>(f)] = base + task.noise * rng.next();
            }
        }
        data.push_back(std::move(seq));
    }
    return data;
}

struct EpochMetrics {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

struct ClassifierHead {
    Matrix weight;  // classes x hidden
    std::vector<double> bias;
};

struct ToyTrainReport {
    std::vector<EpochMetrics> curve;
    double final_accuracy = 0.0;
    double final_loss = 0.0;
    LSTMParams params;
    ClassifierHead head;
};

struct DivergenceError : std::runtime_error {
    explicit DivergenceError(int epoch)
        : std::runtime_error("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch)),
          epoch(epoch) {}
    int epoch;
};

namespace detail {

/// First-order update rule applied slot-by-slot; slot state is lazily sized.
class Optimizer {
public:
    explicit Optimizer(const OptimizerConfig& cfg) : cfg_(cfg) {}

    void begin_step() { ++t_; }

    void update(std::size_t slot, std::vector<double>& w, const std::vector<double>& g) {
        if (slots_.size() <= slot) slots_.resize(slot + 1);
        State& st = slots_[slot];
        if (st.m.size() != w.size()) {
            st.m.assign(w.size(), 0.0);
            st.v.assign(w.size(), 0.0);
        }
        const double lr = cfg_.learning_rate;
        for (std::size_t i = 0; i < w.size(); ++i) {
            double grad = g[i] + cfg_.weight_decay * w[i];
            if (cfg_.kind == OptimizerConfig::Kind::Sgd) {
                st.m[i] = cfg_.momentum * st.m[i] + grad;
                w[i] -= lr * st.m[i];
            } else {
                st.m[i] = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * grad;
                st.v[i] = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * grad * grad;
                const double mhat = st.m[i] / (1.0 - std::pow(cfg_.beta1, t_));
                const double vhat = st.v[i] / (1.0 - std::pow(cfg_.beta2, t_));
                w[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

private:
    struct State {
        std::vector<double> m, v;
    };
    OptimizerConfig cfg_;
    std::vector<State> slots_;
    int t_ = 0;
};

inline void softmax_inplace(std::vector<double>& v) {
    const double mx = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double& x : v) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : v) x /= sum;
}

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

inline std::vector<double> head_logits(const ClassifierHead& head, const std::vector<double>& h) {
    std::vector<double> logits(head.bias);
    for (Index c = 0; c < head.weight.rows; ++c)
        for (Index j = 0; j < head.weight.cols; ++j)
            logits[static_cast<std::size_t>(c)] +=
                head.weight.at(c, j) * h[static_cast<std::size_t>(j)];
    return logits;
}

inline EvalResult evaluate(const LSTMParams& p, const ClassifierHead& head,
                           const std::vector<ToySequence>& data) {
    EvalResult r;
    int correct = 0;
    for (const ToySequence& seq : data) {
        LSTMState st = zero_state(p.hidden_size);
        for (const auto& x : seq.xs) st = lstm_step(p, x, st).state;
        std::vector<double> logits = head_logits(head, st.h);
        const int pred = static_cast<int>(
            std::max_element(logits.begin(), logits.end()) - logits.begin());
        softmax_inplace(logits);
        r.loss += -std::log(std::max(logits[static_cast<std::size_t>(seq.label)], 1e-300));
        correct += (pred == seq.label) ? 1 : 0;
    }
    r.loss /= static_cast<double>(data.size());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return r;
}

}  // namespace detail

/// Deterministic toy training run. Throws DivergenceError if the loss leaves
/// the finite range.
inline ToyTrainReport train_toy(const ToyTrainConfig& cfg, std::uint64_t seed) {
    cfg.model.validate();
    if (cfg.epochs < 0) throw std::invalid_argument("train_toy: epochs must be >= 0");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_toy: batch size must be >= 1");

    const std::vector<ToySequence> data = make_toy_dataset(cfg.task, seed);
    LSTMParams params = make_lstm(cfg.model, cfg.task.input_size, seed + 1);
    ClassifierHead head;
    head.weight = Matrix(cfg.task.num_classes, params.hidden_size);
    head.bias.assign(static_cast<std::size_t>(cfg.task.num_classes), 0.0);
    {
        GaussianRng rng(seed + 2);
        const double scale = 1.0 / std::sqrt(static_cast<double>(params.hidden_size));
        for (double& v : head.weight.data) v = scale * rng.next();
    }
    GaussianRng dropout_rng(seed + 3);

    detail::Optimizer opt(cfg.optimizer);
    ToyTrainReport report;
    {
        detail::EvalResult ev = detail::evaluate(params, head, data);
        report.curve.push_back({0, ev.loss, ev.accuracy});
    }

    const std::size_t n_transfer_slots = params.ht.tree.internal_postorder.size();
    const std::size_t d_slots = params.ht.leaf_frames.size();
    const auto nh = static_cast<std::size_t>(params.hidden_size);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t start = 0; start < data.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(data.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const double inv_batch = 1.0 / static_cast<double>(end - start);

            LSTMGradients acc;
            std::vector<double> g_head_w(head.weight.data.size(), 0.0);
            std::vector<double> g_head_b(head.bias.size(), 0.0);
            for (std::size_t si = start; si < end; ++si) {
                const ToySequence& seq = data[si];
                // Forward with optional dropout masks on h between steps.
                LSTMState st = zero_state(params.hidden_size);
                std::vector<std::vector<double>> masked_xs = seq.xs;
                if (cfg.dropout > 0.0) {
                    for (auto& x : masked_xs) (void)x;  // masks applied to h below
                }
                std::vector<double> h_final;
                {
                    LSTMState cur = zero_state(params.hidden_size);
                    for (std::size_t t = 0; t < seq.xs.size(); ++t) {
                        cur = lstm_step(params, seq.xs[t], cur).state;
                        if (cfg.dropout > 0.0 && t + 1 < seq.xs.size()) {
                            for (double& v : cur.h) {
                                const bool keep = dropout_rng.uniform() >= cfg.dropout;
                                v = keep ? v / (1.0 - cfg.dropout) : 0.0;
                            }
                        }
                    }
                    h_final = cur.h;
                }
                std::vector<double> probs = detail::head_logits(head, h_final);
                detail::softmax_inplace(probs);

                std::vector<double> dh(nh, 0.0);
                for (int c = 0; c < cfg.task.num_classes; ++c) {
                    const double delta =
                        (probs[static_cast<std::size_t>(c)] - (c == seq.label ? 1.0 : 0.0)) *
                        inv_batch;
                    g_head_b[static_cast<std::size_t>(c)] += delta;
                    for (std::size_t j = 0; j < nh; ++j) {
                        g_head_w[static_cast<std::size_t>(c) * nh + j] += delta * h_final[j];
                        dh[j] += delta * head.weight.at(c, static_cast<Index>(j));
                    }
                }
                LSTMGradients g = bptt_gradients(params, seq.xs, dh);
                detail::add_gradients(acc.ht, g.ht);
                detail::add_into(acc.b_f, g.b_f);
                detail::add_into(acc.b_u, g.b_u);
                detail::add_into(acc.b_c, g.b_c);
                detail::add_into(acc.b_o, g.b_o);
            }

            opt.begin_step();
            std::size_t slot = 0;
            for (std::size_t j = 0; j < d_slots; ++j)
                opt.update(slot++, params.ht.leaf_frames[j].data, acc.ht.leaf_frames[j].data);
            for (std::size_t k = 0; k < n_transfer_slots; ++k) {
                const int node = params.ht.tree.internal_postorder[k];
                opt.update(slot++, params.ht.transfer(node).data,
                           acc.ht.transfers[static_cast<std::size_t>(node)].data);
            }
            opt.update(slot++, params.b_f, acc.b_f);
            opt.update(slot++, params.b_u, acc.b_u);
            opt.update(slot++, params.b_c, acc.b_c);
            opt.update(slot++, params.b_o, acc.b_o);
            opt.update(slot++, head.weight.data, g_head_w);
            opt.update(slot++, head.bias, g_head_b);
        }

        detail::EvalResult ev = detail::evaluate(params, head, data);
        if (!std::isfinite(ev.loss)) throw DivergenceError(epoch);
        report.curve.push_back({epoch, ev.loss, ev.accuracy});
        if (ev.accuracy >= cfg.stop_accuracy) break;
    }

    report.final_loss = report.curve.back().loss;
    report.final_accuracy = report.curve.back().accuracy;
    report.params = std::move(params);
    report.head = std::move(head);
    return report;
}

}  // namespace htnn
