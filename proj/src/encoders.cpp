#include "cinp/encoders.hpp"

#include <cmath>

#include "cinp/error.hpp"
#include "cinp/rng.hpp"

namespace cinp {

namespace {

constexpr double kInitStd = 0.02;

bool is_power_of_two(std::size_t v) { return v >= 2 && (v & (v - 1)) == 0; }

std::size_t log2_exact(std::size_t v) {
    std::size_t n = 0;
    while (v > 1) {
        v >>= 1;
        ++n;
    }
    return n;
}

class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(derive_seed(seed, "init")) {}

    Tensor weight(std::size_t rows, std::size_t cols) {
        std::vector<double> w(rows * cols);
        for (double& x : w) {
            double z = rng_.normal();
            while (std::abs(z) > 2.0) z = rng_.normal();
            x = kInitStd * z;
        }
        return Tensor::matrix(rows, cols, std::move(w), true);
    }

    static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor::zeros({rows, cols}, true); }
    static Tensor ones(std::size_t rows, std::size_t cols) { return Tensor::full({rows, cols}, 1.0, true); }

private:
    Rng rng_;
};

EncoderParams init_encoder(Initializer& init, std::size_t in_features, std::size_t n_tokens, std::size_t d,
                           std::size_t n_layers) {
    EncoderParams e;
    e.embed_w = init.weight(in_features, d);
    e.embed_b = Initializer::zeros(1, d);
    e.pos = init.weight(n_tokens, d);
    e.ln_pre_gain = Initializer::ones(1, d);
    e.ln_pre_bias = Initializer::zeros(1, d);
    for (std::size_t l = 0; l < n_layers; ++l) {
        AttentionBlock b;
        b.ln1_gain = Initializer::ones(1, d);
        b.ln1_bias = Initializer::zeros(1, d);
        b.w_qkv = init.weight(d, 3 * d);
        b.b_qkv = Initializer::zeros(1, 3 * d);
        b.w_out = init.weight(d, d);
        b.b_out = Initializer::zeros(1, d);
        b.ln2_gain = Initializer::ones(1, d);
        b.ln2_bias = Initializer::zeros(1, d);
        b.w_mlp1 = init.weight(d, 4 * d);
        b.b_mlp1 = Initializer::zeros(1, 4 * d);
        b.w_mlp2 = init.weight(4 * d, d);
        b.b_mlp2 = Initializer::zeros(1, d);
        e.blocks.push_back(std::move(b));
    }
    e.ln_gain = Initializer::ones(1, d);
    e.ln_bias = Initializer::zeros(1, d);
    e.proj_w = init.weight(d, d);
    return e;
}

void append_encoder(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                    const EncoderParams& e) {
    out.emplace_back(prefix + ".embed_w", e.embed_w);
    out.emplace_back(prefix + ".embed_b", e.embed_b);
    out.emplace_back(prefix + ".pos", e.pos);
    out.emplace_back(prefix + ".ln_pre_gain", e.ln_pre_gain);
    out.emplace_back(prefix + ".ln_pre_bias", e.ln_pre_bias);
    for (std::size_t l = 0; l < e.blocks.size(); ++l) {
        const auto& b = e.blocks[l];
        const std::string p = prefix + ".blocks." + std::to_string(l) + ".";
        out.emplace_back(p + "ln1_gain", b.ln1_gain);
        out.emplace_back(p + "ln1_bias", b.ln1_bias);
        out.emplace_back(p + "w_qkv", b.w_qkv);
        out.emplace_back(p + "b_qkv", b.b_qkv);
        out.emplace_back(p + "w_out", b.w_out);
        out.emplace_back(p + "b_out", b.b_out);
        out.emplace_back(p + "ln2_gain", b.ln2_gain);
        out.emplace_back(p + "ln2_bias", b.ln2_bias);
        out.emplace_back(p + "w_mlp1", b.w_mlp1);
        out.emplace_back(p + "b_mlp1", b.b_mlp1);
        out.emplace_back(p + "w_mlp2", b.w_mlp2);
        out.emplace_back(p + "b_mlp2", b.b_mlp2);
    }
    out.emplace_back(prefix + ".ln_gain", e.ln_gain);
    out.emplace_back(prefix + ".ln_bias", e.ln_bias);
    out.emplace_back(prefix + ".proj_w", e.proj_w);
}

Tensor copy_leaf(const Tensor& t) {
    return Tensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), t.requires_grad());
}

EncoderParams clone_encoder(const EncoderParams& e) {
    EncoderParams c;
    c.embed_w = copy_leaf(e.embed_w);
    c.embed_b = copy_leaf(e.embed_b);
    c.pos = copy_leaf(e.pos);
    c.ln_pre_gain = copy_leaf(e.ln_pre_gain);
    c.ln_pre_bias = copy_leaf(e.ln_pre_bias);
    for (const auto& b : e.blocks) {
        c.blocks.push_back({copy_leaf(b.ln1_gain), copy_leaf(b.ln1_bias), copy_leaf(b.w_qkv), copy_leaf(b.b_qkv),
                            copy_leaf(b.w_out), copy_leaf(b.b_out), copy_leaf(b.ln2_gain), copy_leaf(b.ln2_bias),
                            copy_leaf(b.w_mlp1), copy_leaf(b.b_mlp1), copy_leaf(b.w_mlp2), copy_leaf(b.b_mlp2)});
    }
    c.ln_gain = copy_leaf(e.ln_gain);
    c.ln_bias = copy_leaf(e.ln_bias);
    c.proj_w = copy_leaf(e.proj_w);
    return c;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return add(matmul(x, w), b); }

// Pre-norm multi-head self-attention followed by a GELU MLP, both residual.
Tensor attention_block(const Tensor& x, const AttentionBlock& blk, std::size_t n_heads) {
    const std::size_t d = x.cols();
    const std::size_t hd = d / n_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

    const Tensor h = layer_norm_rows(x, blk.ln1_gain, blk.ln1_bias);
    const Tensor qkv = linear(h, blk.w_qkv, blk.b_qkv);
    std::vector<Tensor> heads;
    heads.reserve(n_heads);
    for (std::size_t i = 0; i < n_heads; ++i) {
        const Tensor q = slice_cols(qkv, i * hd, hd);
        const Tensor k = slice_cols(qkv, d + i * hd, hd);
        const Tensor v = slice_cols(qkv, 2 * d + i * hd, hd);
        const Tensor attn = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt));
        heads.push_back(matmul(attn, v));
    }
    Tensor out = add(x, linear(concat_cols(heads), blk.w_out, blk.b_out));
    const Tensor h2 = layer_norm_rows(out, blk.ln2_gain, blk.ln2_bias);
    return add(out, linear(gelu(linear(h2, blk.w_mlp1, blk.b_mlp1)), blk.w_mlp2, blk.b_mlp2));
}

Tensor encode_tokens(const Tensor& features, const EncoderParams& p, std::size_t n_heads, bool positional) {
    Tensor x = linear(features, p.embed_w, p.embed_b);
    if (positional) x = add(x, p.pos);
    x = layer_norm_rows(x, p.ln_pre_gain, p.ln_pre_bias);
    for (const auto& blk : p.blocks) x = attention_block(x, blk, n_heads);
    return layer_norm_rows(x, p.ln_gain, p.ln_bias);
}

Tensor pool_and_project(const Tensor& tokens, const EncoderParams& p) {
    return l2_normalize_rows(matmul(mean_rows(tokens), p.proj_w));
}

// Rearranges n x (8 c) per-token kernel outputs into the (2g)^3 grid, row-major.
std::vector<std::size_t> depth_to_space_index(std::size_t gz, std::size_t gy, std::size_t gx, std::size_t c) {
    const std::size_t oz = 2 * gz, oy = 2 * gy, ox = 2 * gx;
    std::vector<std::size_t> index(oz * oy * ox * c);
    for (std::size_t z = 0; z < oz; ++z) {
        for (std::size_t y = 0; y < oy; ++y) {
            for (std::size_t x = 0; x < ox; ++x) {
                const std::size_t src_token = ((z / 2) * gy + (y / 2)) * gx + (x / 2);
                const std::size_t k = ((z % 2) * 2 + (y % 2)) * 2 + (x % 2);
                const std::size_t dst_row = (z * oy + y) * ox + x;
                for (std::size_t ch = 0; ch < c; ++ch) {
                    index[dst_row * c + ch] = src_token * 8 * c + k * c + ch;
                }
            }
        }
    }
    return index;
}

}  // namespace

void validate_model_cfg(const ModelCfg& cfg) {
    const auto& v = cfg.visual;
    const auto& n = cfg.network;
    auto bad = [](const std::string& msg) { fail(ErrorCode::BadConfig, msg); };
    if (!is_power_of_two(v.patch_size)) bad("visual.patch_size must be a power of two >= 2");
    if (v.dims.d % v.patch_size || v.dims.h % v.patch_size || v.dims.w % v.patch_size || v.dims.voxels() == 0) {
        bad("visual.patch_size must divide every volume extent");
    }
    if (v.embed_dim < 2 || v.n_layers == 0 || v.n_heads == 0 || v.embed_dim % v.n_heads) {
        bad("visual.n_heads must divide visual.embed_dim and n_layers must be positive");
    }
    if (n.embed_dim != v.embed_dim) bad("network.embed_dim must equal visual.embed_dim");
    if (n.n_rois < 2 || n.n_layers == 0 || n.n_heads == 0 || n.embed_dim % n.n_heads) {
        bad("network.n_heads must divide network.embed_dim, n_layers and n_rois must be positive");
    }
}

std::vector<std::size_t> decoder_channels(const VisualEncoderCfg& cfg) {
    const std::size_t n_layers = log2_exact(cfg.patch_size);
    std::vector<std::size_t> ch{cfg.embed_dim};
    for (std::size_t l = 1; l < n_layers; ++l) ch.push_back(std::max<std::size_t>(ch.back() / 2, 4));
    ch.push_back(1);
    return ch;
}

ModelParams init_params(const ModelCfg& cfg, std::uint64_t seed) {
    validate_model_cfg(cfg);
    Initializer init(seed);
    const auto& v = cfg.visual;
    const auto& n = cfg.network;
    const std::size_t p3 = v.patch_size * v.patch_size * v.patch_size;
    ModelParams params;
    params.visual = init_encoder(init, p3, v.n_tokens(), v.embed_dim, v.n_layers);
    params.network = init_encoder(init, n.n_rois, n.n_rois, n.embed_dim, n.n_layers);
    const auto ch = decoder_channels(v);
    for (std::size_t l = 0; l + 1 < ch.size(); ++l) {
        params.decoder.push_back({init.weight(ch[l], 8 * ch[l + 1]), Initializer::zeros(1, ch[l + 1])});
    }
    params.inm_w = init.weight(2 * v.embed_dim, 2);
    params.inm_b = Initializer::zeros(1, 2);
    params.log_temperature = Tensor::scalar(std::log(kInitTemperature), true);
    return params;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    append_encoder(out, "visual", visual);
    append_encoder(out, "network", network);
    for (std::size_t l = 0; l < decoder.size(); ++l) {
        out.emplace_back("decoder." + std::to_string(l) + ".w", decoder[l].w);
        out.emplace_back("decoder." + std::to_string(l) + ".b", decoder[l].b);
    }
    out.emplace_back("inm.w", inm_w);
    out.emplace_back("inm.b", inm_b);
    out.emplace_back("log_temperature", log_temperature);
    return out;
}

std::vector<Tensor> ModelParams::tensors() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named()) out.push_back(t);
    return out;
}

ModelParams ModelParams::clone() const {
    ModelParams c;
    c.visual = clone_encoder(visual);
    c.network = clone_encoder(network);
    for (const auto& l : decoder) c.decoder.push_back({copy_leaf(l.w), copy_leaf(l.b)});
    c.inm_w = copy_leaf(inm_w);
    c.inm_b = copy_leaf(inm_b);
    c.log_temperature = copy_leaf(log_temperature);
    return c;
}

double ModelParams::temperature() const { return std::exp(log_temperature.item()); }

void ModelParams::clamp_temperature() {
    auto d = log_temperature.mutable_data();
    d[0] = std::clamp(d[0], std::log(kMinTemperature), std::log(kMaxTemperature));
}

Tensor patchify(const Volume3D& v, const VisualEncoderCfg& cfg) {
    if (!(v.dims == cfg.dims) || v.voxels.size() != v.dims.voxels()) {
        fail(ErrorCode::ShapeMismatch, "volume dims do not match the visual encoder config");
    }
    const std::size_t p = cfg.patch_size;
    const std::size_t p3 = p * p * p;
    const std::size_t gy = cfg.grid_h(), gx = cfg.grid_w();
    std::vector<double> out(cfg.n_tokens() * p3);
    for (std::size_t z = 0; z < v.dims.d; ++z) {
        for (std::size_t y = 0; y < v.dims.h; ++y) {
            for (std::size_t x = 0; x < v.dims.w; ++x) {
                const std::size_t token = ((z / p) * gy + (y / p)) * gx + (x / p);
                const std::size_t feat = ((z % p) * p + (y % p)) * p + (x % p);
                out[token * p3 + feat] = v.at(z, y, x);
            }
        }
    }
    return Tensor::matrix(cfg.n_tokens(), p3, std::move(out));
}

VisualEncoding visual_encode(const Volume3D& v, const ModelParams& params, const VisualEncoderCfg& cfg) {
    const Tensor tokens = encode_tokens(patchify(v, cfg), params.visual, cfg.n_heads, true);
    return {pool_and_project(tokens, params.visual), tokens};
}

Tensor visual_decode(const Tensor& tokens, const ModelParams& params, const VisualEncoderCfg& cfg) {
    if (tokens.rank() != 2 || tokens.rows() != cfg.n_tokens() || tokens.cols() != cfg.embed_dim) {
        fail(ErrorCode::ShapeMismatch, "decoder expects an n_tokens x embed_dim token grid, got " +
                                           shape_str(tokens.shape()));
    }
    std::size_t gz = cfg.grid_d(), gy = cfg.grid_h(), gx = cfg.grid_w();
    Tensor x = tokens;
    for (std::size_t l = 0; l < params.decoder.size(); ++l) {
        const auto& layer = params.decoder[l];
        const std::size_t c_out = layer.b.cols();
        const Tensor kernel_out = matmul(x, layer.w);
        const std::size_t rows = 8 * gz * gy * gx;
        x = add(gather(kernel_out, depth_to_space_index(gz, gy, gx, c_out), {rows, c_out}), layer.b);
        if (l + 1 < params.decoder.size()) x = gelu(x);
        gz *= 2;
        gy *= 2;
        gx *= 2;
    }
    if (x.rows() != cfg.dims.voxels() || x.cols() != 1) {
        fail(ErrorCode::ShapeMismatch, "decoder stack does not reach the input resolution");
    }
    return x;
}

Tensor network_encode(const Fcn& fcn, const ModelParams& params, const NetworkEncoderCfg& cfg) {
    if (fcn.n_rois != cfg.n_rois || fcn.matrix.size() != cfg.n_rois * cfg.n_rois) {
        fail(ErrorCode::ShapeMismatch, "FCN has " + std::to_string(fcn.n_rois) + " ROIs, encoder expects " +
                                           std::to_string(cfg.n_rois));
    }
    const Tensor features = Tensor::matrix(cfg.n_rois, cfg.n_rois, fcn_node_features(fcn));
    const Tensor tokens = encode_tokens(features, params.network, cfg.n_heads, cfg.positional);
    return pool_and_project(tokens, params.network);
}

Volume3D tensor_to_volume(const Tensor& t, const Dims3& dims, const std::string& subject_id) {
    if (t.numel() != dims.voxels()) fail(ErrorCode::ShapeMismatch, "tensor does not hold a volume of these dims");
    return Volume3D{dims, std::vector<double>(t.data().begin(), t.data().end()), subject_id};
}

}  // namespace cinp
