// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/nnmap/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

#include "raw2raw/nnmap/model_io.hpp"

namespace raw2raw::nn {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const
{
    arch.validate();
    auto fail = [](const std::string &m) { throw Error(ErrorCode::Config, m); };
    if (!(learning_rate > 0) || !std::isfinite(learning_rate))
        fail("learning_rate must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
        fail("beta1 and beta2 must lie in [0, 1)");
    if (!(adam_epsilon > 0))
        fail("adam_epsilon must be positive");
    if (batch_size < 1)
        fail("batch_size must be at least 1");
    if (patch_size < arch.alignment() || patch_size % arch.alignment())
        fail("patch_size must be a positive multiple of " + std::to_string(arch.alignment()));
    if (epochs < 0)
        fail("epochs must be non-negative");
    if (!(paired_fraction > 0 && paired_fraction < 1))
        fail("paired_fraction must lie in (0, 1)");
    if (batch_size < 2)
        fail("batch_size must be at least 2 to mix paired and unpaired samples");
    if (!loss_switches.any())
        fail("all loss terms are disabled");
    if (iterations_per_epoch < 0 || checkpoint_every < 0)
        fail("iterations_per_epoch and checkpoint_every must be non-negative");
    if (checkpoint_every > 0 && checkpoint_dir.empty())
        fail("checkpoint_every needs checkpoint_dir");
    const BatchComposition bc = batch_composition(*this);
    if ((loss_switches.use_a || loss_switches.use_m) && bc.anchors < 1)
        fail("the batch holds no anchor pairs; raise paired_fraction or batch_size");
    if (loss_switches.use_r && bc.unpaired_a + bc.unpaired_b < 1)
        fail("the batch holds no unpaired samples; lower paired_fraction or raise batch_size");
}

TrainConfig train_config_from_json(const std::string &text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        throw Error(ErrorCode::Config, std::string("training config is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw Error(ErrorCode::Config, "training config must be a JSON object");
    static const std::set<std::string> known{"learning_rate", "beta1",          "beta2",           "adam_epsilon",
                                             "batch_size",    "patch_size",     "epochs",          "loss_switches",
                                             "paired_fraction", "seed",         "iterations_per_epoch",
                                             "checkpoint_every", "checkpoint_dir", "arch"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw Error(ErrorCode::Config, "unknown training config key '" + it.key() + "'");
    TrainConfig c;
    try {
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.patch_size = j.value("patch_size", c.patch_size);
        c.epochs = j.value("epochs", c.epochs);
        c.paired_fraction = j.value("paired_fraction", c.paired_fraction);
        c.seed = j.value("seed", c.seed);
        c.iterations_per_epoch = j.value("iterations_per_epoch", c.iterations_per_epoch);
        c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
        if (j.contains("checkpoint_dir"))
            c.checkpoint_dir = j.at("checkpoint_dir").get<std::string>();
        if (j.contains("loss_switches")) {
            const auto &s = j.at("loss_switches");
            c.loss_switches.use_r = s.value("use_r", true);
            c.loss_switches.use_a = s.value("use_a", true);
            c.loss_switches.use_m = s.value("use_m", true);
        }
        if (j.contains("arch")) {
            const auto &a = j.at("arch");
            c.arch.in_channels = a.value("in_channels", c.arch.in_channels);
            if (a.contains("channels"))
                c.arch.channels = a.at("channels").get<std::vector<int>>();
            c.arch.skip_connections = a.value("skip_connections", c.arch.skip_connections);
        }
    } catch (const json::exception &e) {
        throw Error(ErrorCode::Config, std::string("training config field has the wrong type: ") + e.what());
    }
    return c;
}

TrainConfig load_train_config(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open training config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return train_config_from_json(ss.str());
}

std::string train_config_to_json(const TrainConfig &c)
{
    json j{{"learning_rate", c.learning_rate},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"adam_epsilon", c.adam_epsilon},
           {"batch_size", c.batch_size},
           {"patch_size", c.patch_size},
           {"epochs", c.epochs},
           {"loss_switches",
            {{"use_r", c.loss_switches.use_r}, {"use_a", c.loss_switches.use_a}, {"use_m", c.loss_switches.use_m}}},
           {"paired_fraction", c.paired_fraction},
           {"seed", c.seed},
           {"iterations_per_epoch", c.iterations_per_epoch},
           {"checkpoint_every", c.checkpoint_every},
           {"checkpoint_dir", c.checkpoint_dir.string()},
           {"arch",
            {{"in_channels", c.arch.in_channels},
             {"channels", c.arch.channels},
             {"skip_connections", c.arch.skip_connections}}}};
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Objective

namespace {

template <typename T>
LatentStack<T> slice_stack(const LatentStack<T> &s, int start, int count)
{
    LatentStack<T> out;
    for (const auto &t : s)
        out.push_back(slice_batch(t, start, count));
    return out;
}

template <typename T>
LatentStack<T> concat_stack(const LatentStack<T> &a, const LatentStack<T> &b)
{
    if (a.empty())
        return b;
    if (b.empty())
        return a;
    LatentStack<T> out;
    for (std::size_t e = 0; e < a.size(); ++e)
        out.push_back(concat_batch(a[e], b[e]));
    return out;
}

// scale * (a - b)
template <typename T>
Tensor<T> scaled_diff(const Tensor<T> &a, const Tensor<T> &b, double scale)
{
    Tensor<T> g(a.c, a.n, a.h, a.w);
    const T s = static_cast<T>(scale);
    for (std::size_t i = 0; i < a.size(); ++i)
        g.data[i] = s * (a.data[i] - b.data[i]);
    return g;
}

template <typename T>
struct Branch
{
    int n_u = 0;   // own unpaired samples at the front of the encoder batch
    int n_p = 0;   // anchor samples after them
    EncoderTape<T> enc_tape;
    LatentStack<T> latents;
    DecoderTape<T> dec_tape;
    Tensor<T> output;
    int dec_u = 0; // reconstruction rows at the front of the decoder batch
    int dec_m = 0; // mapping rows after them
};

} // namespace

template <typename T>
LossComponents forward_backward(DualNetwork<T> &net, const Batch<T> &batch, const LossSwitches &sw, bool backprop)
{
    if (!sw.any())
        throw Error(ErrorCode::Config, "all loss terms are disabled");
    const int np = batch.anchor_a.n;
    if (batch.anchor_b.n != np)
        throw Error(ErrorCode::Shape, "anchor halves differ in size");
    const bool paired = (sw.use_a || sw.use_m) && np > 0;

    Branch<T> A, B;
    A.n_u = sw.use_r ? batch.unpaired_a.n : 0;
    B.n_u = sw.use_r ? batch.unpaired_b.n : 0;
    A.n_p = B.n_p = paired ? np : 0;

    auto encode = [&](Branch<T> &br, Encoder<T> &enc, const Tensor<T> &unpaired, const Tensor<T> &anchor) {
        Tensor<T> x = concat_batch(br.n_u ? unpaired : Tensor<T>(), br.n_p ? anchor : Tensor<T>());
        if (x.n > 0)
            br.latents = enc.forward(x, backprop ? &br.enc_tape : nullptr);
    };
    encode(A, net.encoder_a, batch.unpaired_a, batch.anchor_a);
    encode(B, net.encoder_b, batch.unpaired_b, batch.anchor_b);

    const int nm = sw.use_m && paired ? np : 0;
    // Decoder A sees its own unpaired latents (reconstruction) and camera B's
    // anchor latents (mapping B to A).
    auto decode = [&](Branch<T> &self, const Branch<T> &other, Decoder<T> &dec) {
        self.dec_u = self.n_u;
        self.dec_m = nm;
        LatentStack<T> own = self.n_u ? slice_stack(self.latents, 0, self.n_u) : LatentStack<T>();
        LatentStack<T> cross = nm ? slice_stack(other.latents, other.n_u, nm) : LatentStack<T>();
        LatentStack<T> in = concat_stack(own, cross);
        if (!in.empty())
            self.output = dec.forward(in, backprop ? &self.dec_tape : nullptr);
    };
    decode(A, B, net.decoder_a);
    decode(B, A, net.decoder_b);

    LossComponents lc;
    const int nu_total = A.n_u + B.n_u;
    Tensor<T> recon_a, recon_b, mapped_a, mapped_b;
    if (A.n_u)
        recon_a = slice_batch(A.output, 0, A.n_u);
    if (B.n_u)
        recon_b = slice_batch(B.output, 0, B.n_u);
    if (sw.use_r && nu_total > 0) {
        double s = 0;
        if (A.n_u)
            s += squared_distance(recon_a, batch.unpaired_a);
        if (B.n_u)
            s += squared_distance(recon_b, batch.unpaired_b);
        lc.l_r = s / nu_total;
    }
    LatentStack<T> pa, pb;
    if (paired) {
        pa = slice_stack(A.latents, A.n_u, np);
        pb = slice_stack(B.latents, B.n_u, np);
        if (sw.use_a)
            lc.l_a = loss_a(pa, pb);
    }
    if (nm) {
        mapped_a = slice_batch(A.output, A.n_u, nm);
        mapped_b = slice_batch(B.output, B.n_u, nm);
        lc.l_m = loss_m(mapped_a, batch.anchor_a, mapped_b, batch.anchor_b);
    }
    if (!backprop)
        return lc;

    // Output gradients, then decoder backward.
    auto output_grad = [&](const Branch<T> &br, const Tensor<T> &recon, const Tensor<T> &target_u,
                           const Tensor<T> &mapped, const Tensor<T> &target_m) {
        Tensor<T> g;
        if (br.dec_u)
            g = scaled_diff(recon, target_u, 2.0 / nu_total);
        if (br.dec_m)
            g = concat_batch(g, scaled_diff(mapped, target_m, 1.0 / nm));
        return g;
    };
    const int E = net.arch.depth();
    LatentStack<T> dA(E), dB(E); // gradients w.r.t. encoder outputs, full encoder batch
    auto zero_like = [](const LatentStack<T> &s) {
        LatentStack<T> z;
        for (const auto &t : s)
            z.emplace_back(t.c, t.n, t.h, t.w);
        return z;
    };
    if (!A.latents.empty())
        dA = zero_like(A.latents);
    if (!B.latents.empty())
        dB = zero_like(B.latents);

    // Adds `g` (stack over `count` samples) into `dst` at sample offset `start`.
    auto accumulate = [](LatentStack<T> &dst, const LatentStack<T> &g, int start, int count, T sign) {
        for (std::size_t e = 0; e < dst.size(); ++e) {
            auto &d = dst[e];
            const std::size_t p = d.plane();
            for (int c = 0; c < d.c; ++c)
                for (int i = 0; i < count; ++i) {
                    T *to = &d.data[d.index(c, start + i, 0, 0)];
                    const T *from = &g[e].data[g[e].index(c, i, 0, 0)];
                    for (std::size_t k = 0; k < p; ++k)
                        to[k] += sign * from[k];
                }
        }
    };

    auto decoder_backward = [&](Branch<T> &self, Decoder<T> &dec, LatentStack<T> &d_self, LatentStack<T> &d_other,
                                int other_n_u, const Tensor<T> &recon, const Tensor<T> &target_u,
                                const Tensor<T> &mapped, const Tensor<T> &target_m) {
        if (self.output.n == 0)
            return;
        Tensor<T> g = output_grad(self, recon, target_u, mapped, target_m);
        LatentStack<T> dl = dec.backward(self.dec_tape, g);
        if (self.dec_u)
            accumulate(d_self, slice_stack(dl, 0, self.dec_u), 0, self.dec_u, T(1));
        if (self.dec_m)
            accumulate(d_other, slice_stack(dl, self.dec_u, self.dec_m), other_n_u, self.dec_m, T(1));
    };
    decoder_backward(A, net.decoder_a, dA, dB, B.n_u, recon_a, batch.unpaired_a, mapped_a, batch.anchor_a);
    decoder_backward(B, net.decoder_b, dB, dA, A.n_u, recon_b, batch.unpaired_b, mapped_b, batch.anchor_b);

    if (paired && sw.use_a) {
        LatentStack<T> g;
        for (int e = 0; e < E; ++e)
            g.push_back(scaled_diff(pa[e], pb[e], 2.0 / np));
        accumulate(dA, g, A.n_u, np, T(1));
        accumulate(dB, g, B.n_u, np, T(-1));
    }
    if (!A.latents.empty())
        net.encoder_a.backward(A.enc_tape, dA);
    if (!B.latents.empty())
        net.encoder_b.backward(B.enc_tape, dB);
    return lc;
}

template LossComponents forward_backward(DualNetwork<float> &, const Batch<float> &, const LossSwitches &, bool);
template LossComponents forward_backward(DualNetwork<double> &, const Batch<double> &, const LossSwitches &, bool);

// ---------------------------------------------------------------------------
// Optimization

void adam_step(MappingModel &model, AdamState &st, const TrainConfig &cfg)
{
    auto params = model.params();
    if (st.m.size() != params.size()) {
        st.m.clear();
        st.v.clear();
        for (auto *p : params) {
            st.m.emplace_back(p->size(), 0.0f);
            st.v.emplace_back(p->size(), 0.0f);
        }
    }
    ++st.step;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
    const double step_size = cfg.learning_rate * std::sqrt(corr2) / corr1;
    const double eps = cfg.adam_epsilon * std::sqrt(corr2);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto &p = *params[k];
        auto &m = st.m[k];
        auto &v = st.v[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = p.grad[i];
            m[i] = static_cast<float>(b1 * m[i] + (1 - b1) * g);
            v[i] = static_cast<float>(b2 * v[i] + (1 - b2) * g * g);
            p.value[i] -= static_cast<float>(step_size * m[i] / (std::sqrt(static_cast<double>(v[i])) + eps));
        }
    }
}

std::string loss_log_csv(const std::vector<EpochLoss> &log)
{
    std::ostringstream os;
    os << "epoch,L_r,L_a,L_m,L\n" << std::setprecision(9);
    for (const auto &e : log)
        os << e.epoch << ',' << e.l_r << ',' << e.l_a << ',' << e.l_m << ',' << e.total << '\n';
    return os.str();
}

int iterations_per_epoch(const TrainingData &data, const TrainConfig &cfg)
{
    if (cfg.iterations_per_epoch > 0)
        return cfg.iterations_per_epoch;
    const long long p = cfg.patch_size;
    auto patches = [&](const PackedImage &img) {
        return ((img.height + p - 1) / p) * ((img.width + p - 1) / p);
    };
    long long total = 0;
    for (const auto &img : data.unpaired_a)
        total += patches(img);
    for (const auto &img : data.unpaired_b)
        total += patches(img);
    for (const auto &pr : data.anchors)
        total += patches(pr.first);
    return static_cast<int>(std::max<long long>(1, (total + cfg.batch_size - 1) / cfg.batch_size));
}

namespace {

bool all_finite(const MappingModel &m)
{
    for (const auto *p : m.params())
        for (float v : p->value)
            if (!std::isfinite(v))
                return false;
    return true;
}

bool grads_finite(MappingModel &m)
{
    for (const auto *p : m.params())
        for (float v : p->grad)
            if (!std::isfinite(v))
                return false;
    return true;
}

void check_channels(const TrainingData &data, int channels)
{
    auto check = [&](const PackedImage &img) {
        if (img.channels != channels)
            throw Error(ErrorCode::Shape, "training image has " + std::to_string(img.channels) +
                                              " channels, the architecture expects " + std::to_string(channels));
    };
    for (const auto &i : data.unpaired_a)
        check(i);
    for (const auto &i : data.unpaired_b)
        check(i);
    for (const auto &[a, b] : data.anchors) {
        check(a);
        check(b);
    }
}

} // namespace

TrainResult train(const TrainingData &data, const TrainConfig &cfg, const Checkpoint *resume)
{
    cfg.validate();
    check_channels(data, cfg.arch.in_channels);
    TrainResult res;
    AdamState adam;
    int start_epoch = 0;
    if (resume) {
        if (!(resume->model.arch == cfg.arch))
            throw Error(ErrorCode::Arch, "checkpoint architecture differs from the training config");
        res.model = resume->model;
        adam = resume->adam;
        start_epoch = resume->epoch;
        res.log = resume->log;
    } else {
        res.model = MappingModel(cfg.arch);
        res.model.init(cfg.seed);
    }
    res.model.fingerprint = {cfg.seed, cfg.epochs, cfg.loss_switches.use_r, cfg.loss_switches.use_a,
                             cfg.loss_switches.use_m};
    res.epochs_completed = start_epoch;

    const int iters = iterations_per_epoch(data, cfg);
    MappingModel last_good = res.model;
    bool first = true;
    auto abort_run = [&](const std::string &why) {
        res.model = last_good;
        res.aborted = true;
        res.abort_reason = why;
        return res;
    };

    for (int epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(epoch)};
        std::mt19937_64 rng(seq);
        EpochLoss el;
        el.epoch = epoch;
        for (int it = 0; it < iters; ++it) {
            Batch<float> batch = sample_batch(data, cfg, rng);
            res.unpaired_samples_drawn += batch.unpaired_a.n + batch.unpaired_b.n;
            res.model.zero_grad();
            const LossComponents lc = forward_backward(res.model, batch, cfg.loss_switches, true);
            const double total = total_loss(lc, cfg.loss_switches);
            if (first) {
                res.initial_loss = total;
                first = false;
            }
            if (!std::isfinite(total) || !grads_finite(res.model))
                return abort_run("non-finite loss at epoch " + std::to_string(epoch) + ", iteration " +
                                 std::to_string(it + 1));
            adam_step(res.model, adam, cfg);
            el.l_r += lc.l_r;
            el.l_a += lc.l_a;
            el.l_m += lc.l_m;
            el.total += total;
        }
        el.l_r /= iters;
        el.l_a /= iters;
        el.l_m /= iters;
        el.total /= iters;
        if (!all_finite(res.model))
            return abort_run("non-finite parameters after epoch " + std::to_string(epoch));
        res.log.push_back(el);
        res.epochs_completed = epoch;
        last_good = res.model;
        if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
            Checkpoint ck{res.model, adam, epoch, res.log};
            save_checkpoint(ck, checkpoint_path(cfg.checkpoint_dir, epoch));
        }
    }
    return res;
}

} // namespace raw2raw::nn
