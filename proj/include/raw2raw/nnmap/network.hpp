// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "raw2raw/nnmap/layers.hpp"

namespace raw2raw::nn {

struct ArchitectureSpec
{
    int in_channels = 4;
    std::vector<int> channels{24, 48, 96, 192};
    bool skip_connections = true;

    int depth() const { return static_cast<int>(channels.size()); }
    /// Spatial sizes must be multiples of this.
    int alignment() const { return 1 << depth(); }
    /// Throws Error(Arch) on an invalid descriptor.
    void validate() const;
    bool operator==(const ArchitectureSpec &) const = default;
};

/// Encoder block outputs X^1..X^E; block b is at 1/2^(b+1) of the input size.
template <typename T>
using LatentStack = std::vector<Tensor<T>>;

/// Activations kept by a forward pass for the backward pass.
template <typename T>
struct EncoderTape
{
    struct Block
    {
        Tensor<T> down, conv1;
    };
    Tensor<T> input;
    std::vector<Block> blocks;
    LatentStack<T> outputs;
};

template <typename T>
struct DecoderTape
{
    struct Stage
    {
        Tensor<T> input, up, merged, conv1, conv2;
    };
    std::vector<Stage> stages;
    Tensor<T> final_input, final_up;
};

/// Each block: 2x2 stride-2 convolution, then two 3x3 convolutions, each
/// followed by a leaky ReLU.
template <typename T>
class Encoder
{
public:
    Encoder() = default;
    Encoder(const ArchitectureSpec &arch, const std::string &prefix);

    LatentStack<T> forward(const Tensor<T> &x, EncoderTape<T> *tape = nullptr) const;
    /// Accumulates parameter gradients from per-block output gradients
    /// (empty tensors count as zero).
    void backward(const EncoderTape<T> &tape, const LatentStack<T> &d_outputs);

    std::vector<Param<T> *> params();
    std::vector<const Param<T> *> params() const;
    void init(std::mt19937_64 &rng);

private:
    struct Block
    {
        Layer<T> down, conv1, conv2;
    };
    ArchitectureSpec arch_;
    std::vector<Block> blocks_;
};

/// Mirrors the encoder: per level a 2x2 transposed convolution, optional
/// concatenation with the matching encoder output, and two 3x3
/// convolutions; a final upsample and linear 3x3 convolution restore the
/// input resolution and channel count.
template <typename T>
class Decoder
{
public:
    Decoder() = default;
    Decoder(const ArchitectureSpec &arch, const std::string &prefix);

    Tensor<T> forward(const LatentStack<T> &latents, DecoderTape<T> *tape = nullptr) const;
    /// Accumulates parameter gradients; returns dL/dX^e per block.
    LatentStack<T> backward(const DecoderTape<T> &tape, const Tensor<T> &d_output);

    std::vector<Param<T> *> params();
    std::vector<const Param<T> *> params() const;
    void init(std::mt19937_64 &rng);

private:
    struct Stage
    {
        Layer<T> up, conv1, conv2;
    };
    ArchitectureSpec arch_;
    std::vector<Stage> stages_; // deepest level first
    Layer<T> final_up_, out_;
};

struct TrainingFingerprint
{
    std::uint64_t seed = 0;
    int epochs = 0;
    bool use_r = true;
    bool use_a = true;
    bool use_m = true;
};

/// Two encoder-decoder networks, one per camera. Instantiated for float
/// (training), double and long double (gradient verification).
template <typename T>
struct DualNetwork
{
    ArchitectureSpec arch;
    TrainingFingerprint fingerprint;
    Encoder<T> encoder_a, encoder_b;
    Decoder<T> decoder_a, decoder_b;

    DualNetwork() = default;
    explicit DualNetwork(const ArchitectureSpec &a);

    /// Independent He-normal initialization of all four parts from `seed`.
    void init(std::uint64_t seed);
    std::vector<Param<T> *> params();
    std::vector<const Param<T> *> params() const;
    void zero_grad();
};

using MappingModel = DualNetwork<float>;

template <typename Dst, typename Src>
DualNetwork<Dst> convert(const DualNetwork<Src> &net);

/// Throws Error(Shape) unless both spatial sizes are multiples of 2^E.
void check_alignment(const ArchitectureSpec &arch, int height, int width);

} // namespace raw2raw::nn
