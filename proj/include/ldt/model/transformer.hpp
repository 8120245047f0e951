#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldt/common.hpp"
#include "ldt/model/config.hpp"
#include "ldt/model/tensor.hpp"

namespace ldt {

namespace nn {

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_grad(double x) {
    const double kInvSqrt2Pi = 0.39894228040143268;
    return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

inline void softmax_rows(Eigen::MatrixXd& s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double m = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - m).exp();
        s.row(i) /= s.row(i).sum();
    }
}

}  // namespace nn

struct Linear {
    size_t w = 0, b = 0;

    Eigen::MatrixXd forward(const ParamStore& s, const Eigen::MatrixXd& x) const {
        return (x * s.value(w)).rowwise() + s.value(b).row(0);
    }

    Eigen::MatrixXd backward(ParamStore& s, const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy) const {
        s.at(w).grad.noalias() += x.transpose() * dy;
        s.at(b).grad.row(0) += dy.colwise().sum();
        return dy * s.value(w).transpose();
    }
};

struct LnCache {
    Eigen::MatrixXd xhat;
    Eigen::VectorXd rstd;
};

struct LayerNorm {
    size_t gain = 0, bias = 0;
    static constexpr double kEps = 1e-5;

    Eigen::MatrixXd forward(const ParamStore& s, const Eigen::MatrixXd& x, LnCache& cache) const {
        const Eigen::Index n = x.cols();
        cache.xhat.resize(x.rows(), n);
        cache.rstd.resize(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double mean = x.row(i).mean();
            const double var = (x.row(i).array() - mean).square().sum() / double(n);
            const double rstd = 1.0 / std::sqrt(var + kEps);
            cache.rstd(i) = rstd;
            cache.xhat.row(i) = (x.row(i).array() - mean) * rstd;
        }
        return (cache.xhat.array().rowwise() * s.value(gain).row(0).array()).rowwise() +
               s.value(bias).row(0).array();
    }

    Eigen::MatrixXd backward(ParamStore& s, const Eigen::MatrixXd& dy, const LnCache& cache) const {
        s.at(gain).grad.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
        s.at(bias).grad.row(0) += dy.colwise().sum();
        Eigen::MatrixXd dxhat = dy.array().rowwise() * s.value(gain).row(0).array();
        Eigen::MatrixXd dx(dy.rows(), dy.cols());
        for (Eigen::Index i = 0; i < dy.rows(); ++i) {
            const double m1 = dxhat.row(i).mean();
            const double m2 = (dxhat.row(i).array() * cache.xhat.row(i).array()).mean();
            dx.row(i) =
                cache.rstd(i) * (dxhat.row(i).array() - m1 - cache.xhat.row(i).array() * m2);
        }
        return dx;
    }
};

struct AttnCache {
    Eigen::MatrixXd xq, xkv;
    Eigen::MatrixXd q, k, v, z;
    std::vector<Eigen::MatrixXd> probs;
};

struct Attention {
    Linear proj_q, proj_k, proj_v, proj_o;
    int heads = 1;

    Eigen::MatrixXd forward(const ParamStore& s, const Eigen::MatrixXd& xq,
                            const Eigen::MatrixXd& xkv, bool causal, AttnCache& cache) const {
        const Eigen::Index dh = xq.cols() / heads;
        const double scale = 1.0 / std::sqrt(double(dh));
        cache.xq = xq;
        cache.xkv = xkv;
        cache.q = proj_q.forward(s, xq);
        cache.k = proj_k.forward(s, xkv);
        cache.v = proj_v.forward(s, xkv);
        cache.z.resize(xq.rows(), xq.cols());
        cache.probs.assign(size_t(heads), {});
        for (int h = 0; h < heads; ++h) {
            auto qh = cache.q.middleCols(h * dh, dh);
            auto kh = cache.k.middleCols(h * dh, dh);
            auto vh = cache.v.middleCols(h * dh, dh);
            Eigen::MatrixXd scores = qh * kh.transpose() * scale;
            if (causal)
                for (Eigen::Index i = 0; i < scores.rows(); ++i)
                    for (Eigen::Index j = i + 1; j < scores.cols(); ++j) scores(i, j) = -1e30;
            nn::softmax_rows(scores);
            cache.probs[size_t(h)] = scores;
            cache.z.middleCols(h * dh, dh).noalias() = scores * vh;
        }
        return proj_o.forward(s, cache.z);
    }

    // Returns dXq; adds the key/value path into dxkv (caller owns both when xq != xkv).
    Eigen::MatrixXd backward(ParamStore& s, const Eigen::MatrixXd& dy, const AttnCache& cache,
                             Eigen::MatrixXd& dxkv) const {
        const Eigen::Index dh = cache.q.cols() / heads;
        const double scale = 1.0 / std::sqrt(double(dh));
        Eigen::MatrixXd dz = proj_o.backward(s, cache.z, dy);
        Eigen::MatrixXd dq(cache.q.rows(), cache.q.cols());
        Eigen::MatrixXd dk(cache.k.rows(), cache.k.cols());
        Eigen::MatrixXd dv(cache.v.rows(), cache.v.cols());
        for (int h = 0; h < heads; ++h) {
            const auto& probs = cache.probs[size_t(h)];
            auto qh = cache.q.middleCols(h * dh, dh);
            auto kh = cache.k.middleCols(h * dh, dh);
            auto vh = cache.v.middleCols(h * dh, dh);
            auto dzh = dz.middleCols(h * dh, dh);
            Eigen::MatrixXd dprobs = dzh * vh.transpose();
            dv.middleCols(h * dh, dh).noalias() = probs.transpose() * dzh;
            Eigen::MatrixXd dscores =
                probs.array() *
                (dprobs.array().colwise() -
                 (dprobs.array() * probs.array()).rowwise().sum());
            dq.middleCols(h * dh, dh).noalias() = dscores * kh * scale;
            dk.middleCols(h * dh, dh).noalias() = dscores.transpose() * qh * scale;
        }
        dxkv += proj_k.backward(s, cache.xkv, dk);
        dxkv += proj_v.backward(s, cache.xkv, dv);
        return proj_q.backward(s, cache.xq, dq);
    }
};

struct FfCache {
    Eigen::MatrixXd x, h1;
};

struct FeedForward {
    Linear expand, contract;

    Eigen::MatrixXd forward(const ParamStore& s, const Eigen::MatrixXd& x, FfCache& cache) const {
        cache.x = x;
        cache.h1 = expand.forward(s, x);
        Eigen::MatrixXd g = cache.h1.unaryExpr([](double v) { return nn::gelu(v); });
        return contract.forward(s, g);
    }

    Eigen::MatrixXd backward(ParamStore& s, const Eigen::MatrixXd& dy, const FfCache& cache) const {
        Eigen::MatrixXd g = cache.h1.unaryExpr([](double v) { return nn::gelu(v); });
        Eigen::MatrixXd dg = contract.backward(s, g, dy);
        Eigen::MatrixXd dh1 =
            dg.array() * cache.h1.unaryExpr([](double v) { return nn::gelu_grad(v); }).array();
        return expand.backward(s, cache.x, dh1);
    }
};

struct EncoderLayer {
    LayerNorm ln1, ln2;
    Attention attn;
    FeedForward ff;
};

struct DecoderLayer {
    LayerNorm ln1, ln2, ln3;
    Attention self_attn, cross_attn;
    FeedForward ff;
};

struct EncLayerCache {
    LnCache ln1, ln2;
    AttnCache attn;
    FfCache ff;
};

struct DecLayerCache {
    LnCache ln1, ln2, ln3;
    AttnCache self_attn, cross_attn;
    FfCache ff;
};

struct ForwardCache {
    std::vector<int> input_ids, dec_input_ids;
    std::vector<EncLayerCache> enc;
    LnCache enc_final;
    Eigen::MatrixXd memory;
    std::vector<DecLayerCache> dec;
    LnCache dec_final;
    Eigen::MatrixXd dec_h;
};

// Joint objective: goal-action cross-entropy plus lambda-weighted next-observation
// cross-entropy, normalized by 1 + lambda. Pairs without an observation span fall
// back to the goal-action term alone.
inline double combined_pair_loss(double ga, double o, bool has_o, double lambda) {
    return has_o ? (ga + lambda * o) / (1.0 + lambda) : ga;
}

// Pre-LN encoder-decoder over a closed vocabulary. Double precision throughout;
// gradients are exact (verified against finite differences).
class Model {
  public:
    explicit Model(const ModelConfig& config) : config_(config) {
        config_.validate();
        build();
        init_parameters();
    }

    // Parameters left zero for a checkpoint loader to fill.
    struct Uninitialized {};
    Model(const ModelConfig& config, Uninitialized) : config_(config) {
        config_.validate();
        build();
    }

    const ModelConfig& config() const { return config_; }
    ParamStore& store() { return store_; }
    const ParamStore& store() const { return store_; }

    struct PairLoss {
        double loss = 0, ga = 0, o = 0;
        bool has_o = false;
    };

    // Teacher-forced loss for one serialized pair; ga_len splits the output into
    // the goal-action span and the next-observation span. grad_scale 0 skips the
    // backward pass; otherwise gradients scaled by grad_scale accumulate.
    PairLoss pair_loss_and_grad(const std::vector<int>& input_ids,
                                const std::vector<int>& output_ids, Eigen::Index ga_len,
                                double lambda, double grad_scale) {
        if (ga_len <= 0) throw std::invalid_argument("empty goal-action span");
        if (ga_len > Eigen::Index(output_ids.size()))
            throw std::invalid_argument("goal-action span exceeds output length");
        check_lengths(input_ids.size(), output_ids.size());

        std::vector<int> dec_input(output_ids.size());
        dec_input[0] = kBosId;
        std::copy(output_ids.begin(), output_ids.end() - 1, dec_input.begin() + 1);

        ForwardCache cache;
        forward_cached(input_ids, dec_input, cache);
        Eigen::MatrixXd logits = head_logits(cache.dec_h);

        const Eigen::Index to = logits.rows();
        Eigen::VectorXd ce(to);
        Eigen::MatrixXd probs(to, logits.cols());
        for (Eigen::Index i = 0; i < to; ++i) {
            const double m = logits.row(i).maxCoeff();
            Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
            const double z = e.sum();
            probs.row(i) = (e / z).matrix();
            ce(i) = std::log(z) + m - logits(i, output_ids[size_t(i)]);
        }

        PairLoss out;
        out.ga = ce.head(ga_len).mean();
        out.has_o = ga_len < to;
        out.o = out.has_o ? ce.tail(to - ga_len).mean() : 0.0;
        out.loss = combined_pair_loss(out.ga, out.o, out.has_o, lambda);

        if (grad_scale != 0.0) {
            const double w_ga =
                grad_scale * (out.has_o ? 1.0 / (1.0 + lambda) : 1.0) / double(ga_len);
            const double w_o =
                out.has_o ? grad_scale * lambda / (1.0 + lambda) / double(to - ga_len) : 0.0;
            Eigen::MatrixXd dlogits = probs;
            for (Eigen::Index i = 0; i < to; ++i) {
                dlogits(i, output_ids[size_t(i)]) -= 1.0;
                dlogits.row(i) *= (i < ga_len) ? w_ga : w_o;
            }
            backward(dlogits, cache);
        }
        return out;
    }

    // Distribution over the next output token after output_prefix, via the full
    // forward pass (reference path; DecodeSession is the incremental equivalent).
    Eigen::VectorXd next_distribution(const std::vector<int>& input_ids,
                                      const std::vector<int>& output_prefix) const {
        std::vector<Eigen::VectorXd> dists = position_distributions(input_ids, output_prefix);
        return dists.back();
    }

    // Distribution at every decoder position for decoder input [BOS] + prefix;
    // entry k is P(token at position k | prefix[0..k)).
    std::vector<Eigen::VectorXd> position_distributions(
        const std::vector<int>& input_ids, const std::vector<int>& output_prefix) const {
        check_lengths(input_ids.size(), output_prefix.size() + 1);
        std::vector<int> dec_input;
        dec_input.reserve(output_prefix.size() + 1);
        dec_input.push_back(kBosId);
        dec_input.insert(dec_input.end(), output_prefix.begin(), output_prefix.end());

        ForwardCache cache;
        forward_cached(input_ids, dec_input, cache);
        Eigen::MatrixXd logits = head_logits(cache.dec_h);
        std::vector<Eigen::VectorXd> dists;
        dists.reserve(size_t(logits.rows()));
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            Eigen::ArrayXd row = logits.row(i).array();
            row -= row.maxCoeff();
            Eigen::ArrayXd e = row.exp();
            dists.push_back((e / e.sum()).matrix());
        }
        return dists;
    }

    Eigen::MatrixXd encoder_memory(const std::vector<int>& input_ids) const {
        ForwardCache cache;
        return encoder_forward(input_ids, cache);
    }

    Eigen::MatrixXd head_logits(const Eigen::MatrixXd& h) const {
        return (h * store_.value(head_w_)).rowwise() + store_.value(head_b_).row(0);
    }

    const Eigen::MatrixXd& positional() const { return pos_; }
    Eigen::MatrixXd embed(const std::vector<int>& ids, Eigen::Index pos_offset = 0) const {
        Eigen::MatrixXd x(Eigen::Index(ids.size()), config_.model_width);
        for (size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0 || ids[i] >= config_.vocab_size)
                throw std::out_of_range("token id outside vocabulary");
            x.row(Eigen::Index(i)) = store_.value(embedding_).row(ids[i]) +
                                     pos_.row(pos_offset + Eigen::Index(i));
        }
        return x;
    }

    static constexpr int kBosId = 1;

    // Layer access for the incremental decode session.
    const std::vector<EncoderLayer>& encoder_layers() const { return enc_layers_; }
    const std::vector<DecoderLayer>& decoder_layers() const { return dec_layers_; }
    const LayerNorm& encoder_final_ln() const { return enc_final_; }
    const LayerNorm& decoder_final_ln() const { return dec_final_; }

    void check_lengths(size_t input_len, size_t dec_len) const {
        if (input_len == 0) throw std::invalid_argument("empty input sequence");
        if (Eigen::Index(input_len) > config_.max_input_tokens)
            throw std::length_error("input exceeds max_input_tokens");
        if (Eigen::Index(dec_len) > config_.max_output_tokens)
            throw std::length_error("output exceeds max_output_tokens");
    }

  private:
    void build() {
        const int d = config_.model_width;
        const int f = config_.feedforward_width;
        embedding_ = store_.add("embedding", config_.vocab_size, d);
        auto add_linear = [&](const std::string& name, int in, int out) {
            Linear l;
            l.w = store_.add(name + ".w", in, out);
            l.b = store_.add(name + ".b", 1, out);
            return l;
        };
        auto add_ln = [&](const std::string& name) {
            LayerNorm ln;
            ln.gain = store_.add(name + ".gain", 1, d);
            ln.bias = store_.add(name + ".bias", 1, d);
            return ln;
        };
        auto add_attn = [&](const std::string& name) {
            Attention a;
            a.heads = config_.attention_heads;
            a.proj_q = add_linear(name + ".q", d, d);
            a.proj_k = add_linear(name + ".k", d, d);
            a.proj_v = add_linear(name + ".v", d, d);
            a.proj_o = add_linear(name + ".o", d, d);
            return a;
        };
        auto add_ff = [&](const std::string& name) {
            FeedForward ff;
            ff.expand = add_linear(name + ".expand", d, f);
            ff.contract = add_linear(name + ".contract", f, d);
            return ff;
        };
        for (int l = 0; l < config_.encoder_layers; ++l) {
            const std::string p = "enc" + std::to_string(l);
            enc_layers_.push_back({add_ln(p + ".ln1"), add_ln(p + ".ln2"), add_attn(p + ".attn"),
                                   add_ff(p + ".ff")});
        }
        enc_final_ = add_ln("enc.final_ln");
        for (int l = 0; l < config_.decoder_layers; ++l) {
            const std::string p = "dec" + std::to_string(l);
            dec_layers_.push_back({add_ln(p + ".ln1"), add_ln(p + ".ln2"), add_ln(p + ".ln3"),
                                   add_attn(p + ".self"), add_attn(p + ".cross"),
                                   add_ff(p + ".ff")});
        }
        dec_final_ = add_ln("dec.final_ln");
        head_w_ = store_.add("head.w", d, config_.vocab_size);
        head_b_ = store_.add("head.b", 1, config_.vocab_size);

        const Eigen::Index max_pos =
            std::max(config_.max_input_tokens, config_.max_output_tokens);
        pos_.resize(max_pos, d);
        for (Eigen::Index p = 0; p < max_pos; ++p)
            for (int i = 0; i < d; i += 2) {
                const double angle = double(p) / std::pow(10000.0, double(i) / double(d));
                pos_(p, i) = std::sin(angle);
                if (i + 1 < d) pos_(p, i + 1) = std::cos(angle);
            }
    }

    void init_parameters() {
        Rng rng(derive_seed(config_.init_seed, "model-init"));
        auto fill = [&](Eigen::MatrixXd& m, double stddev) {
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = stddev * rng.next_gaussian();
        };
        for (auto& p : store_.all()) {
            if (p.name == "embedding") {
                fill(p.value, 1.0);
            } else if (p.name.ends_with(".gain")) {
                p.value.setOnes();
            } else if (p.name.ends_with(".bias") || p.name.ends_with(".b")) {
                p.value.setZero();
            } else if (p.name == "head.w") {
                // Tiny head keeps the initial output distribution near uniform.
                fill(p.value, 0.01);
            } else {
                fill(p.value, std::sqrt(2.0 / double(p.value.rows() + p.value.cols())));
            }
        }
    }

    Eigen::MatrixXd encoder_forward(const std::vector<int>& input_ids, ForwardCache& cache) const {
        cache.input_ids = input_ids;
        cache.enc.assign(enc_layers_.size(), {});
        Eigen::MatrixXd x = embed(input_ids);
        for (size_t l = 0; l < enc_layers_.size(); ++l) {
            auto& layer = enc_layers_[l];
            auto& c = cache.enc[l];
            Eigen::MatrixXd a = layer.ln1.forward(store_, x, c.ln1);
            x += layer.attn.forward(store_, a, a, false, c.attn);
            Eigen::MatrixXd f = layer.ln2.forward(store_, x, c.ln2);
            x += layer.ff.forward(store_, f, c.ff);
        }
        cache.memory = enc_final_.forward(store_, x, cache.enc_final);
        return cache.memory;
    }

    void forward_cached(const std::vector<int>& input_ids, const std::vector<int>& dec_input,
                        ForwardCache& cache) const {
        encoder_forward(input_ids, cache);
        cache.dec_input_ids = dec_input;
        cache.dec.assign(dec_layers_.size(), {});
        Eigen::MatrixXd y = embed(dec_input);
        for (size_t l = 0; l < dec_layers_.size(); ++l) {
            auto& layer = dec_layers_[l];
            auto& c = cache.dec[l];
            Eigen::MatrixXd a = layer.ln1.forward(store_, y, c.ln1);
            y += layer.self_attn.forward(store_, a, a, true, c.self_attn);
            Eigen::MatrixXd q = layer.ln2.forward(store_, y, c.ln2);
            y += layer.cross_attn.forward(store_, q, cache.memory, false, c.cross_attn);
            Eigen::MatrixXd f = layer.ln3.forward(store_, y, c.ln3);
            y += layer.ff.forward(store_, f, c.ff);
        }
        cache.dec_h = dec_final_.forward(store_, y, cache.dec_final);
    }

    void backward(const Eigen::MatrixXd& dlogits, const ForwardCache& cache) {
        // Head.
        store_.at(head_w_).grad.noalias() += cache.dec_h.transpose() * dlogits;
        store_.at(head_b_).grad.row(0) += dlogits.colwise().sum();
        Eigen::MatrixXd dy = dlogits * store_.value(head_w_).transpose();
        dy = dec_final_.backward(store_, dy, cache.dec_final);

        // Decoder stack; cross-attention key/value gradients accumulate into dmemory.
        Eigen::MatrixXd dmemory = Eigen::MatrixXd::Zero(cache.memory.rows(), cache.memory.cols());
        for (size_t l = dec_layers_.size(); l-- > 0;) {
            const auto& layer = dec_layers_[l];
            const auto& c = cache.dec[l];
            Eigen::MatrixXd df = layer.ff.backward(store_, dy, c.ff);
            dy += layer.ln3.backward(store_, df, c.ln3);
            Eigen::MatrixXd dq = layer.cross_attn.backward(store_, dy, c.cross_attn, dmemory);
            dy += layer.ln2.backward(store_, dq, c.ln2);
            Eigen::MatrixXd da_kv = Eigen::MatrixXd::Zero(dy.rows(), dy.cols());
            Eigen::MatrixXd da = layer.self_attn.backward(store_, dy, c.self_attn, da_kv);
            da += da_kv;
            dy += layer.ln1.backward(store_, da, c.ln1);
        }
        accumulate_embedding_grad(cache.dec_input_ids, dy);

        // Encoder stack.
        Eigen::MatrixXd dx = enc_final_.backward(store_, dmemory, cache.enc_final);
        for (size_t l = enc_layers_.size(); l-- > 0;) {
            const auto& layer = enc_layers_[l];
            const auto& c = cache.enc[l];
            Eigen::MatrixXd df = layer.ff.backward(store_, dx, c.ff);
            dx += layer.ln2.backward(store_, df, c.ln2);
            Eigen::MatrixXd da_kv = Eigen::MatrixXd::Zero(dx.rows(), dx.cols());
            Eigen::MatrixXd da = layer.attn.backward(store_, dx, c.attn, da_kv);
            da += da_kv;
            dx += layer.ln1.backward(store_, da, c.ln1);
        }
        accumulate_embedding_grad(cache.input_ids, dx);
    }

    void accumulate_embedding_grad(const std::vector<int>& ids, const Eigen::MatrixXd& dx) {
        auto& grad = store_.at(embedding_).grad;
        for (size_t i = 0; i < ids.size(); ++i) grad.row(ids[i]) += dx.row(Eigen::Index(i));
    }

    ModelConfig config_;
    ParamStore store_;
    size_t embedding_ = 0, head_w_ = 0, head_b_ = 0;
    std::vector<EncoderLayer> enc_layers_;
    std::vector<DecoderLayer> dec_layers_;
    LayerNorm enc_final_, dec_final_;
    Eigen::MatrixXd pos_;

    friend class DecodeSession;
};

// Incremental decoding with cached self-attention keys/values and precomputed
// cross-attention projections; produces the same distributions as the full
// forward pass up to floating point accumulation order.
class DecodeSession {
  public:
    DecodeSession(const Model& model, const std::vector<int>& input_ids) : model_(&model) {
        model.check_lengths(input_ids.size(), 1);
        memory_ = model.encoder_memory(input_ids);
        const auto& layers = model.decoder_layers();
        layer_state_.resize(layers.size());
        for (size_t l = 0; l < layers.size(); ++l) {
            layer_state_[l].cross_k = layers[l].cross_attn.proj_k.forward(model.store(), memory_);
            layer_state_[l].cross_v = layers[l].cross_attn.proj_v.forward(model.store(), memory_);
        }
        feed_token(Model::kBosId);
    }

    // Distribution over the token at the current position.
    const Eigen::VectorXd& current_distribution() const { return dist_; }

    // Appends one output token and advances to the next position.
    void feed(int token) {
        if (pos_ + 1 > model_->config().max_output_tokens)
            throw std::length_error("output exceeds max_output_tokens");
        feed_token(token);
    }

    Eigen::Index position() const { return pos_; }

  private:
    struct LayerState {
        Eigen::MatrixXd self_k, self_v;    // grows one row per fed token
        Eigen::MatrixXd cross_k, cross_v;  // fixed projections of the memory
    };

    void feed_token(int token) {
        const auto& store = model_->store();
        const int heads = model_->config().attention_heads;
        const Eigen::Index dh = model_->config().model_width / heads;
        Eigen::MatrixXd x = model_->embed({token}, pos_);
        const auto& layers = model_->decoder_layers();
        for (size_t l = 0; l < layers.size(); ++l) {
            const auto& layer = layers[l];
            auto& state = layer_state_[l];
            LnCache scratch;
            Eigen::MatrixXd a = layer.ln1.forward(store, x, scratch);
            Eigen::MatrixXd q = layer.self_attn.proj_q.forward(store, a);
            append_row(state.self_k, layer.self_attn.proj_k.forward(store, a));
            append_row(state.self_v, layer.self_attn.proj_v.forward(store, a));
            x += attend_row(layer.self_attn, q, state.self_k, state.self_v, heads, dh);
            Eigen::MatrixXd c = layer.ln2.forward(store, x, scratch);
            Eigen::MatrixXd qc = layer.cross_attn.proj_q.forward(store, c);
            x += attend_row(layer.cross_attn, qc, state.cross_k, state.cross_v, heads, dh);
            Eigen::MatrixXd f = layer.ln3.forward(store, x, scratch);
            FfCache ff_scratch;
            x += layer.ff.forward(store, f, ff_scratch);
        }
        LnCache scratch;
        Eigen::MatrixXd h = model_->decoder_final_ln().forward(store, x, scratch);
        Eigen::MatrixXd logits = model_->head_logits(h);
        Eigen::ArrayXd row = logits.row(0).array();
        row -= row.maxCoeff();
        Eigen::ArrayXd e = row.exp();
        dist_ = (e / e.sum()).matrix();
        ++pos_;
    }

    Eigen::MatrixXd attend_row(const Attention& attn, const Eigen::MatrixXd& q,
                               const Eigen::MatrixXd& k, const Eigen::MatrixXd& v, int heads,
                               Eigen::Index dh) const {
        const double scale = 1.0 / std::sqrt(double(dh));
        Eigen::MatrixXd z(1, q.cols());
        for (int h = 0; h < heads; ++h) {
            Eigen::RowVectorXd scores =
                q.row(0).segment(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * scale;
            scores.array() -= scores.maxCoeff();
            Eigen::ArrayXd p = scores.transpose().array().exp();
            p /= p.sum();
            z.row(0).segment(h * dh, dh) = p.matrix().transpose() * v.middleCols(h * dh, dh);
        }
        return attn.proj_o.forward(model_->store(), z);
    }

    static void append_row(Eigen::MatrixXd& m, const Eigen::MatrixXd& row) {
        m.conservativeResize(m.rows() + 1, row.cols());
        m.row(m.rows() - 1) = row.row(0);
    }

    const Model* model_;
    Eigen::MatrixXd memory_;
    std::vector<LayerState> layer_state_;
    Eigen::VectorXd dist_;
    Eigen::Index pos_ = 0;
};

}  // namespace ldt
