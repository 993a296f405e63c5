#ifndef COSEG_NETS_HPP
#define COSEG_NETS_HPP

#include <string>
#include <utility>
#include <vector>

#include "coseg/ops.hpp"

namespace coseg {

template <typename T>
using ParamList = std::vector<std::pair<std::string, NodePtr<T>>>;

constexpr double kWeightInitStd = 0.02;  // zero-mean Gaussian for all conv kernels
constexpr double kLeakySlope = 0.2;

// ---------------------------------------------------------------------------
// layers
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2dLayer {
    NodePtr<T> w;  // (kh, kw, cin, cout)
    NodePtr<T> b;  // (1, 1, 1, cout)
    int stride = 1;

    Conv2dLayer() = default;
    Conv2dLayer(int kh, int kw, int cin, int cout, int stride_, Rng& rng)
        : w(make_leaf(random_normal<T>(Shape4{kh, kw, cin, cout}, rng, T(kWeightInitStd)), true)),
          b(make_leaf(Tensor<T>::zeros(Shape4{1, 1, 1, cout}), true)),
          stride(stride_) {}

    NodePtr<T> operator()(Graph<T>& g, const NodePtr<T>& x) const { return conv2d(g, x, w, b, stride); }

    void collect(const std::string& name, ParamList<T>& out) const {
        out.emplace_back(name + ".w", w);
        out.emplace_back(name + ".b", b);
    }
};

template <typename T>
void set_trainable(const ParamList<T>& params, bool trainable) {
    for (auto& [name, p] : params) p->requires_grad = trainable;
}

template <typename T>
void clear_grads(const ParamList<T>& params) {
    for (auto& [name, p] : params) p->clear_grad();
}

template <typename T>
long param_count(const ParamList<T>& params) {
    long total = 0;
    for (auto& [name, p] : params) total += p->value.size();
    return total;
}

// ---------------------------------------------------------------------------
// translator generator (U-Net-like, exposed encoder)
// ---------------------------------------------------------------------------

struct GeneratorSpec {
    int input_size = 256;
    int base_channels = 64;
    int in_channels = 3;
    int out_channels = 3;
    int depth = 4;  // stride-2 contracting blocks; latent sits at input_size >> depth

    void validate() const {
        if (base_channels <= 0) throw ConfigError("GeneratorSpec: base_channels must be > 0");
        if (depth < 1) throw ConfigError("GeneratorSpec: depth must be >= 1");
        const int div = 1 << depth;
        if (input_size <= 0 || input_size % div != 0)
            throw ConfigError("GeneratorSpec: input_size " + std::to_string(input_size) +
                              " not divisible by " + std::to_string(div));
    }
    int latent_size() const { return input_size >> depth; }
    int latent_channels() const { return base_channels << (depth - 1); }
};

// Contracting blocks are (4x4 conv s2, LeakyReLU 0.2, instance norm) with the
// channel count doubling per block. Expanding blocks upsample 2x, concatenate
// the matching contracting feature and apply (4x4 conv s1, ReLU, instance
// norm). A final upsample + conv + tanh restores the input resolution.
template <typename T>
struct Generator {
    GeneratorSpec spec;
    std::vector<Conv2dLayer<T>> enc;  // depth blocks
    std::vector<Conv2dLayer<T>> dec;  // depth-1 blocks
    Conv2dLayer<T> out_conv;

    Generator() = default;
    Generator(const GeneratorSpec& sp, Rng& rng) : spec(sp) {
        spec.validate();
        const int b = spec.base_channels;
        int cin = spec.in_channels;
        for (int k = 0; k < spec.depth; ++k) {
            const int cout = b << k;
            enc.emplace_back(4, 4, cin, cout, 2, rng);
            cin = cout;
        }
        // decoder block feeding level k consumes (2^{k+1} + 2^k) * b channels
        for (int k = spec.depth - 2; k >= 0; --k)
            dec.emplace_back(4, 4, 3 * (b << k), b << k, 1, rng);
        out_conv = Conv2dLayer<T>(4, 4, b, spec.out_channels, 1, rng);
    }

    void check_input(const Tensor<T>& x) const {
        const Shape4 want{x.shape.n, spec.input_size, spec.input_size, spec.in_channels};
        if (x.shape.h != x.shape.w) throw ShapeError("generator: non-square input " + to_string(x.shape));
        require_shape(x, want, "generator input");
    }

    struct Forward {
        NodePtr<T> output;
        NodePtr<T> latent;  // contracting bottleneck, after the last block's norm
    };

    NodePtr<T> encode(Graph<T>& g, const NodePtr<T>& x) const {
        check_input(x->value);
        NodePtr<T> h = x;
        for (int k = 0; k < spec.depth; ++k) h = instance_norm(g, leaky_relu(g, enc[k](g, h), T(kLeakySlope)));
        return h;
    }

    Forward forward_with_latent(Graph<T>& g, const NodePtr<T>& x) const {
        check_input(x->value);
        std::vector<NodePtr<T>> skips;
        NodePtr<T> h = x;
        for (int k = 0; k < spec.depth; ++k) {
            h = instance_norm(g, leaky_relu(g, enc[k](g, h), T(kLeakySlope)));
            skips.push_back(h);
        }
        NodePtr<T> latent = h;
        for (int i = 0; i < int(dec.size()); ++i) {
            const int k = spec.depth - 2 - i;  // skip level being consumed
            h = upsample2_nearest(g, h);
            h = concat_channels(g, h, skips[k]);
            h = instance_norm(g, relu(g, dec[i](g, h)));
        }
        h = upsample2_nearest(g, h);
        return Forward{tanh_op(g, out_conv(g, h)), latent};
    }

    NodePtr<T> operator()(Graph<T>& g, const NodePtr<T>& x) const { return forward_with_latent(g, x).output; }

    ParamList<T> params(const std::string& prefix = "") const {
        ParamList<T> out;
        for (int k = 0; k < int(enc.size()); ++k) enc[k].collect(prefix + "enc" + std::to_string(k + 1), out);
        for (int k = 0; k < int(dec.size()); ++k) dec[k].collect(prefix + "dec" + std::to_string(k + 1), out);
        out_conv.collect(prefix + "out", out);
        return out;
    }
};

// ---------------------------------------------------------------------------
// patch discriminator
// ---------------------------------------------------------------------------

struct DiscriminatorSpec {
    int input_size = 256;
    int base_channels = 64;
    int n_layers = 4;  // stride-2 convs before the 1-channel score conv
    int in_channels = 3;

    void validate() const {
        if (base_channels <= 0) throw ConfigError("DiscriminatorSpec: base_channels must be > 0");
        if (n_layers < 1) throw ConfigError("DiscriminatorSpec: n_layers must be >= 1");
        const int div = 1 << n_layers;
        if (input_size % div != 0)
            throw ConfigError("DiscriminatorSpec: input_size " + std::to_string(input_size) +
                              " not divisible by " + std::to_string(div));
        if (input_size / div <= 1)
            throw ConfigError("DiscriminatorSpec: patch map would collapse to 1x1 at size " +
                              std::to_string(input_size));
    }
    int patch_size() const { return input_size >> n_layers; }
};

// 4x4 stride-2 conv stack (channels b, 2b, 4b, ... capped at 8b), instance
// norm on every layer except the first, LeakyReLU 0.2, then a stride-1 4x4
// conv to a single raw score channel. No sigmoid: the least-squares objective
// consumes raw patch scores.
template <typename T>
struct PatchDiscriminator {
    DiscriminatorSpec spec;
    std::vector<Conv2dLayer<T>> layers;
    Conv2dLayer<T> score_conv;

    PatchDiscriminator() = default;
    PatchDiscriminator(const DiscriminatorSpec& sp, Rng& rng) : spec(sp) {
        spec.validate();
        int cin = spec.in_channels;
        for (int k = 0; k < spec.n_layers; ++k) {
            const int cout = spec.base_channels * std::min(1 << k, 8);
            layers.emplace_back(4, 4, cin, cout, 2, rng);
            cin = cout;
        }
        score_conv = Conv2dLayer<T>(4, 4, cin, 1, 1, rng);
    }

    NodePtr<T> operator()(Graph<T>& g, const NodePtr<T>& x) const {
        const Shape4 want{x->value.shape.n, spec.input_size, spec.input_size, spec.in_channels};
        require_shape(x->value, want, "discriminator input");
        NodePtr<T> h = x;
        for (int k = 0; k < int(layers.size()); ++k) {
            h = layers[k](g, h);
            if (k > 0) h = instance_norm(g, h);
            h = leaky_relu(g, h, T(kLeakySlope));
        }
        return score_conv(g, h);
    }

    ParamList<T> params(const std::string& prefix = "") const {
        ParamList<T> out;
        for (int k = 0; k < int(layers.size()); ++k) layers[k].collect(prefix + "conv" + std::to_string(k + 1), out);
        score_conv.collect(prefix + "score", out);
        return out;
    }
};

// ---------------------------------------------------------------------------
// segmentation U-Net
// ---------------------------------------------------------------------------

struct SegmenterSpec {
    int input_size = 256;
    int base_filters = 16;
    int out_channels = 1;
    int in_channels = 3;
    int levels = 4;  // resolution levels (levels-1 max-pools)

    void validate() const {
        if (base_filters <= 0) throw ConfigError("SegmenterSpec: base_filters must be > 0");
        if (levels < 2) throw ConfigError("SegmenterSpec: levels must be >= 2");
        const int div = 1 << (levels - 1);
        if (input_size % div != 0)
            throw ConfigError("SegmenterSpec: input_size " + std::to_string(input_size) +
                              " not divisible by " + std::to_string(div));
    }
};

// Plain U-Net: double 3x3 conv + ReLU blocks, max-pool down, nearest
// upsample + skip concat up, no normalization, sigmoid output.
template <typename T>
struct UNetSegmenter {
    SegmenterSpec spec;
    struct Block {
        Conv2dLayer<T> c1, c2;
    };
    std::vector<Block> down;  // levels blocks (last is the bottom)
    std::vector<Block> up;    // levels-1 blocks
    Conv2dLayer<T> out_conv;  // 1x1

    UNetSegmenter() = default;
    UNetSegmenter(const SegmenterSpec& sp, Rng& rng) : spec(sp) {
        spec.validate();
        const int f = spec.base_filters;
        int cin = spec.in_channels;
        for (int k = 0; k < spec.levels; ++k) {
            const int cout = f << k;
            down.push_back(Block{Conv2dLayer<T>(3, 3, cin, cout, 1, rng), Conv2dLayer<T>(3, 3, cout, cout, 1, rng)});
            cin = cout;
        }
        for (int k = spec.levels - 2; k >= 0; --k) {
            const int cout = f << k;
            const int cat = cout + (f << (k + 1));  // skip + upsampled deeper feature
            up.push_back(Block{Conv2dLayer<T>(3, 3, cat, cout, 1, rng), Conv2dLayer<T>(3, 3, cout, cout, 1, rng)});
        }
        out_conv = Conv2dLayer<T>(1, 1, f, spec.out_channels, 1, rng);
    }

    NodePtr<T> operator()(Graph<T>& g, const NodePtr<T>& x) const {
        const Shape4 want{x->value.shape.n, spec.input_size, spec.input_size, spec.in_channels};
        require_shape(x->value, want, "segmenter input");
        std::vector<NodePtr<T>> skips;
        NodePtr<T> h = x;
        for (int k = 0; k < spec.levels; ++k) {
            if (k > 0) h = max_pool2(g, h);
            h = relu(g, down[k].c1(g, h));
            h = relu(g, down[k].c2(g, h));
            if (k + 1 < spec.levels) skips.push_back(h);
        }
        for (int i = 0; i < int(up.size()); ++i) {
            const int k = spec.levels - 2 - i;
            h = upsample2_nearest(g, h);
            h = concat_channels(g, h, skips[k]);
            h = relu(g, up[i].c1(g, h));
            h = relu(g, up[i].c2(g, h));
        }
        return sigmoid(g, out_conv(g, h));
    }

    ParamList<T> params(const std::string& prefix = "") const {
        ParamList<T> out;
        for (int k = 0; k < int(down.size()); ++k) {
            down[k].c1.collect(prefix + "down" + std::to_string(k + 1) + ".c1", out);
            down[k].c2.collect(prefix + "down" + std::to_string(k + 1) + ".c2", out);
        }
        for (int k = 0; k < int(up.size()); ++k) {
            up[k].c1.collect(prefix + "up" + std::to_string(k + 1) + ".c1", out);
            up[k].c2.collect(prefix + "up" + std::to_string(k + 1) + ".c2", out);
        }
        out_conv.collect(prefix + "out", out);
        return out;
    }
};

}  // namespace coseg

#endif
