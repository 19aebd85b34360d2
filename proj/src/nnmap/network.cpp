// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/nnmap/network.hpp"

namespace raw2raw::nn {

void ArchitectureSpec::validate() const
{
    if (in_channels != 3 && in_channels != 4)
        throw Error(ErrorCode::Arch, "in_channels must be 3 or 4");
    if (channels.empty())
        throw Error(ErrorCode::Arch, "at least one encoder block is required");
    if (channels.size() > 12)
        throw Error(ErrorCode::Arch, "too many encoder blocks");
    for (int c : channels)
        if (c <= 0)
            throw Error(ErrorCode::Arch, "channel widths must be positive");
}

void check_alignment(const ArchitectureSpec &arch, int height, int width)
{
    const int a = arch.alignment();
    if (height <= 0 || width <= 0 || height % a || width % a)
        throw Error(ErrorCode::Shape, "spatial size " + std::to_string(height) + "x" + std::to_string(width) +
                                          " is not a multiple of " + std::to_string(a));
}

// ---------------------------------------------------------------------------

template <typename T>
Encoder<T>::Encoder(const ArchitectureSpec &arch, const std::string &prefix) : arch_(arch)
{
    arch.validate();
    int prev = arch.in_channels;
    for (int b = 0; b < arch.depth(); ++b) {
        const int c = arch.channels[b];
        const std::string p = prefix + ".block" + std::to_string(b);
        blocks_.push_back({Layer<T>(LayerKind::Down2x2, prev, c, p + ".down"),
                           Layer<T>(LayerKind::Conv3x3, c, c, p + ".conv1"),
                           Layer<T>(LayerKind::Conv3x3, c, c, p + ".conv2")});
        prev = c;
    }
}

template <typename T>
LatentStack<T> Encoder<T>::forward(const Tensor<T> &x, EncoderTape<T> *tape) const
{
    if (x.c != arch_.in_channels)
        throw Error(ErrorCode::Shape, "encoder expects " + std::to_string(arch_.in_channels) + " channels");
    check_alignment(arch_, x.h, x.w);
    LatentStack<T> out;
    if (tape) {
        tape->input = x;
        tape->blocks.clear();
    }
    const Tensor<T> *cur = &x;
    for (const auto &blk : blocks_) {
        Tensor<T> d = blk.down.forward(*cur);
        leaky_relu_inplace(d);
        Tensor<T> c1 = blk.conv1.forward(d);
        leaky_relu_inplace(c1);
        Tensor<T> c2 = blk.conv2.forward(c1);
        leaky_relu_inplace(c2);
        if (tape)
            tape->blocks.push_back({std::move(d), std::move(c1)});
        out.push_back(std::move(c2));
        cur = &out.back();
    }
    if (tape)
        tape->outputs = out;
    return out;
}

template <typename T>
void Encoder<T>::backward(const EncoderTape<T> &tape, const LatentStack<T> &d_outputs)
{
    const int E = static_cast<int>(blocks_.size());
    if (static_cast<int>(d_outputs.size()) != E)
        throw Error(ErrorCode::Arch, "gradient stack has the wrong number of blocks");
    Tensor<T> carry; // gradient flowing into block b's output from block b+1
    for (int b = E - 1; b >= 0; --b) {
        const auto &out = tape.outputs[b];
        Tensor<T> g = d_outputs[b].empty() ? Tensor<T>(out.c, out.n, out.h, out.w) : d_outputs[b];
        if (!carry.empty())
            add_into(g, carry);
        auto &blk = blocks_[b];
        const auto &tb = tape.blocks[b];
        leaky_relu_backward_inplace(g, out);
        Tensor<T> g1 = blk.conv2.backward(tb.conv1, g, true);
        leaky_relu_backward_inplace(g1, tb.conv1);
        Tensor<T> gd = blk.conv1.backward(tb.down, g1, true);
        leaky_relu_backward_inplace(gd, tb.down);
        const Tensor<T> &in = b == 0 ? tape.input : tape.outputs[b - 1];
        carry = blk.down.backward(in, gd, b > 0);
    }
}

template <typename T>
std::vector<Param<T> *> Encoder<T>::params()
{
    std::vector<Param<T> *> p;
    for (auto &b : blocks_)
        for (Layer<T> *l : {&b.down, &b.conv1, &b.conv2}) {
            p.push_back(&l->weight);
            p.push_back(&l->bias);
        }
    return p;
}

template <typename T>
std::vector<const Param<T> *> Encoder<T>::params() const
{
    std::vector<const Param<T> *> p;
    for (auto *q : const_cast<Encoder *>(this)->params())
        p.push_back(q);
    return p;
}

template <typename T>
void Encoder<T>::init(std::mt19937_64 &rng)
{
    for (auto &b : blocks_) {
        b.down.init(rng);
        b.conv1.init(rng);
        b.conv2.init(rng);
    }
}

// ---------------------------------------------------------------------------

template <typename T>
Decoder<T>::Decoder(const ArchitectureSpec &arch, const std::string &prefix) : arch_(arch)
{
    arch.validate();
    const int E = arch.depth();
    for (int l = E - 1; l >= 1; --l) {
        const int c_in = arch.channels[l];
        const int c_out = arch.channels[l - 1];
        const std::string p = prefix + ".stage" + std::to_string(l - 1);
        const int merged = arch.skip_connections ? 2 * c_out : c_out;
        stages_.push_back({Layer<T>(LayerKind::Up2x2, c_in, c_out, p + ".up"),
                           Layer<T>(LayerKind::Conv3x3, merged, c_out, p + ".conv1"),
                           Layer<T>(LayerKind::Conv3x3, c_out, c_out, p + ".conv2")});
    }
    final_up_ = Layer<T>(LayerKind::Up2x2, arch.channels[0], arch.channels[0], prefix + ".final.up");
    out_ = Layer<T>(LayerKind::Conv3x3, arch.channels[0], arch.in_channels, prefix + ".final.out");
}

template <typename T>
Tensor<T> Decoder<T>::forward(const LatentStack<T> &latents, DecoderTape<T> *tape) const
{
    const int E = arch_.depth();
    if (static_cast<int>(latents.size()) != E)
        throw Error(ErrorCode::Shape, "latent stack has " + std::to_string(latents.size()) + " blocks, expected " +
                                          std::to_string(E));
    for (int b = 0; b < E; ++b) {
        const auto &t = latents[b];
        if (t.c != arch_.channels[b] || t.n != latents[0].n || t.h != latents[0].h >> b ||
            t.w != latents[0].w >> b)
            throw Error(ErrorCode::Shape, "latent block " + std::to_string(b) + " does not match the architecture");
    }
    if (tape)
        tape->stages.clear();
    Tensor<T> cur = latents[E - 1];
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        const auto &st = stages_[s];
        const int level = E - 1 - static_cast<int>(s); // source level
        Tensor<T> up = st.up.forward(cur);
        leaky_relu_inplace(up);
        Tensor<T> merged = arch_.skip_connections ? concat_channels(up, latents[level - 1]) : up;
        Tensor<T> c1 = st.conv1.forward(merged);
        leaky_relu_inplace(c1);
        Tensor<T> c2 = st.conv2.forward(c1);
        leaky_relu_inplace(c2);
        if (tape) {
            typename DecoderTape<T>::Stage rec;
            rec.input = std::move(cur);
            rec.up = std::move(up);
            rec.merged = std::move(merged);
            rec.conv1 = std::move(c1);
            rec.conv2 = c2;
            tape->stages.push_back(std::move(rec));
        }
        cur = std::move(c2);
    }
    Tensor<T> fu = final_up_.forward(cur);
    leaky_relu_inplace(fu);
    Tensor<T> y = out_.forward(fu);
    if (tape) {
        tape->final_input = std::move(cur);
        tape->final_up = std::move(fu);
    }
    return y;
}

template <typename T>
LatentStack<T> Decoder<T>::backward(const DecoderTape<T> &tape, const Tensor<T> &d_output)
{
    const int E = arch_.depth();
    LatentStack<T> d_lat(E);
    Tensor<T> g = out_.backward(tape.final_up, d_output, true);
    leaky_relu_backward_inplace(g, tape.final_up);
    g = final_up_.backward(tape.final_input, g, true);
    for (int s = static_cast<int>(stages_.size()) - 1; s >= 0; --s) {
        auto &st = stages_[s];
        const auto &ts = tape.stages[s];
        const int level = E - 1 - s;
        leaky_relu_backward_inplace(g, ts.conv2);
        Tensor<T> g1 = st.conv2.backward(ts.conv1, g, true);
        leaky_relu_backward_inplace(g1, ts.conv1);
        Tensor<T> gm = st.conv1.backward(ts.merged, g1, true);
        Tensor<T> gu;
        if (arch_.skip_connections) {
            const std::size_t split = ts.up.size();
            gu = Tensor<T>(ts.up.c, ts.up.n, ts.up.h, ts.up.w);
            std::copy_n(gm.data.begin(), split, gu.data.begin());
            Tensor<T> gs(gm.c - ts.up.c, gm.n, gm.h, gm.w);
            std::copy(gm.data.begin() + static_cast<std::ptrdiff_t>(split), gm.data.end(), gs.data.begin());
            d_lat[level - 1] = std::move(gs);
        } else {
            d_lat[level - 1] = Tensor<T>(ts.up.c, ts.up.n, ts.up.h, ts.up.w);
            gu = std::move(gm);
        }
        leaky_relu_backward_inplace(gu, ts.up);
        g = st.up.backward(ts.input, gu, true);
    }
    if (d_lat[E - 1].empty())
        d_lat[E - 1] = std::move(g);
    else
        add_into(d_lat[E - 1], g);
    return d_lat;
}

template <typename T>
std::vector<Param<T> *> Decoder<T>::params()
{
    std::vector<Param<T> *> p;
    for (auto &s : stages_)
        for (Layer<T> *l : {&s.up, &s.conv1, &s.conv2}) {
            p.push_back(&l->weight);
            p.push_back(&l->bias);
        }
    for (Layer<T> *l : {&final_up_, &out_}) {
        p.push_back(&l->weight);
        p.push_back(&l->bias);
    }
    return p;
}

template <typename T>
std::vector<const Param<T> *> Decoder<T>::params() const
{
    std::vector<const Param<T> *> p;
    for (auto *q : const_cast<Decoder *>(this)->params())
        p.push_back(q);
    return p;
}

template <typename T>
void Decoder<T>::init(std::mt19937_64 &rng)
{
    for (auto &s : stages_) {
        s.up.init(rng);
        s.conv1.init(rng);
        s.conv2.init(rng);
    }
    final_up_.init(rng);
    out_.init(rng);
}

// ---------------------------------------------------------------------------

template <typename T>
DualNetwork<T>::DualNetwork(const ArchitectureSpec &a)
    : arch(a), encoder_a(a, "encoder_a"), encoder_b(a, "encoder_b"), decoder_a(a, "decoder_a"),
      decoder_b(a, "decoder_b")
{
}

template <typename T>
void DualNetwork<T>::init(std::uint64_t seed)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6e6eu};
    std::mt19937_64 rng(seq);
    encoder_a.init(rng);
    decoder_a.init(rng);
    encoder_b.init(rng);
    decoder_b.init(rng);
}

template <typename T>
std::vector<Param<T> *> DualNetwork<T>::params()
{
    std::vector<Param<T> *> p;
    for (auto *q : encoder_a.params())
        p.push_back(q);
    for (auto *q : decoder_a.params())
        p.push_back(q);
    for (auto *q : encoder_b.params())
        p.push_back(q);
    for (auto *q : decoder_b.params())
        p.push_back(q);
    return p;
}

template <typename T>
std::vector<const Param<T> *> DualNetwork<T>::params() const
{
    std::vector<const Param<T> *> p;
    for (auto *q : const_cast<DualNetwork *>(this)->params())
        p.push_back(q);
    return p;
}

template <typename T>
void DualNetwork<T>::zero_grad()
{
    for (auto *p : params())
        std::fill(p->grad.begin(), p->grad.end(), T(0));
}

template <typename Dst, typename Src>
DualNetwork<Dst> convert(const DualNetwork<Src> &net)
{
    DualNetwork<Dst> out(net.arch);
    out.fingerprint = net.fingerprint;
    auto dst = out.params();
    auto src = net.params();
    for (std::size_t i = 0; i < dst.size(); ++i)
        for (std::size_t j = 0; j < dst[i]->size(); ++j)
            dst[i]->value[j] = static_cast<Dst>(src[i]->value[j]);
    return out;
}

template class Encoder<float>;
template class Encoder<double>;
template class Decoder<float>;
template class Decoder<double>;
template struct DualNetwork<float>;
template struct DualNetwork<double>;
template DualNetwork<double> convert(const DualNetwork<float> &);
template DualNetwork<float> convert(const DualNetwork<double> &);
template DualNetwork<float> convert(const DualNetwork<float> &);
template DualNetwork<double> convert(const DualNetwork<double> &);
template class Encoder<long double>;
template class Decoder<long double>;
template struct DualNetwork<long double>;
template DualNetwork<long double> convert(const DualNetwork<double> &);

} // namespace raw2raw::nn
