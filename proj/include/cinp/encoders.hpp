#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cinp/synthdata.hpp"
#include "cinp/tensor.hpp"

namespace cinp {

struct VisualEncoderCfg {
    Dims3 dims{};
    std::size_t patch_size = 4;
    std::size_t embed_dim = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;

    std::size_t grid_d() const { return dims.d / patch_size; }
    std::size_t grid_h() const { return dims.h / patch_size; }
    std::size_t grid_w() const { return dims.w / patch_size; }
    std::size_t n_tokens() const { return grid_d() * grid_h() * grid_w(); }
};

struct NetworkEncoderCfg {
    std::size_t n_rois = 16;
    std::size_t embed_dim = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    // Learned per-node positional embedding. Without it the encoder is
    // invariant to a joint row/column permutation of the FCN.
    bool positional = true;
};

struct ModelCfg {
    VisualEncoderCfg visual;
    NetworkEncoderCfg network;
};

// Throws BadConfig naming the violated constraint.
void validate_model_cfg(const ModelCfg& cfg);

struct AttentionBlock {
    Tensor ln1_gain, ln1_bias;
    Tensor w_qkv, b_qkv;
    Tensor w_out, b_out;
    Tensor ln2_gain, ln2_bias;
    Tensor w_mlp1, b_mlp1;
    Tensor w_mlp2, b_mlp2;
};

struct EncoderParams {
    Tensor embed_w, embed_b;
    Tensor pos;
    Tensor ln_pre_gain, ln_pre_bias;  // brings the embedded tokens to unit scale before the blocks
    std::vector<AttentionBlock> blocks;
    Tensor ln_gain, ln_bias;
    Tensor proj_w;  // no bias: a shared offset would only shrink the spread of unit vectors
};

struct DecoderLayer {
    Tensor w;  // c_in x (8 * c_out): one 2x2x2 stride-2 transposed convolution
    Tensor b;  // 1 x c_out
};

struct ModelParams {
    EncoderParams visual;
    EncoderParams network;
    std::vector<DecoderLayer> decoder;
    Tensor inm_w, inm_b;  // 2d -> 2 logits, index 1 = same subject
    Tensor log_temperature;

    // Stable, unique names in a fixed order; shared handles, not copies.
    std::vector<std::pair<std::string, Tensor>> named() const;
    std::vector<Tensor> tensors() const;

    // Deep copy with fresh leaves.
    ModelParams clone() const;

    double temperature() const;
    // Projects log_temperature so that exp(.) stays within [1/100, 100].
    void clamp_temperature();
};

inline constexpr double kMinTemperature = 0.01;
inline constexpr double kMaxTemperature = 100.0;
inline constexpr double kInitTemperature = 0.07;

// Weights ~ N(0, 0.02^2) truncated at 2 sigma, biases 0, layer-norm gains 1,
// log_temperature = ln(0.07), i.e. logits start at 14.3 x cosine similarity.
ModelParams init_params(const ModelCfg& cfg, std::uint64_t seed);

// Channel widths of the decoder stack, input token width first.
std::vector<std::size_t> decoder_channels(const VisualEncoderCfg& cfg);

// Non-overlapping p^3 patches in row-major grid order, features row-major
// within the patch: n_tokens x p^3.
Tensor patchify(const Volume3D& v, const VisualEncoderCfg& cfg);

struct VisualEncoding {
    Tensor embedding;  // 1 x d, unit norm
    Tensor tokens;     // n_tokens x d, pre-pool (after the final layer norm)
};

VisualEncoding visual_encode(const Volume3D& v, const ModelParams& params, const VisualEncoderCfg& cfg);

// Upsamples the token grid back to the volume: (D*H*W) x 1, row-major voxels.
Tensor visual_decode(const Tensor& tokens, const ModelParams& params, const VisualEncoderCfg& cfg);

Tensor network_encode(const Fcn& fcn, const ModelParams& params, const NetworkEncoderCfg& cfg);

Volume3D tensor_to_volume(const Tensor& t, const Dims3& dims, const std::string& subject_id = {});

}  // namespace cinp
