#ifndef COSEG_LOSSES_HPP
#define COSEG_LOSSES_HPP

#include <map>
#include <string>

#include "coseg/nets.hpp"

namespace coseg {

// Weights of the composite generator objective plus the focal-loss
// hyper-parameters. lambda4 = 0 is the no-structure-loss ablation.
struct LossWeights {
    double lambda1 = 1.0;   // adversarial
    double lambda2 = 10.0;  // cycle consistency
    double lambda3 = 1.0;   // shape preservation
    double lambda4 = 5.0;   // latent structure
    double lambda5 = 1.0;   // identity mapping
    double gamma = 2.0;     // focal focusing
    double alpha = 0.25;    // focal positive-class balance

    void validate() const {
        for (double v : {lambda1, lambda2, lambda3, lambda4, lambda5})
            if (v < 0) throw ConfigError("LossWeights: lambdas must be >= 0");
        if (gamma < 0) throw ConfigError("LossWeights: gamma must be >= 0");
        if (alpha < 0 || alpha > 1) throw ConfigError("LossWeights: alpha must be in [0,1]");
    }
};

// Unweighted per-term values of one update step, for logging and tests.
struct LossBreakdown {
    std::map<std::string, double> terms;

    double get(const std::string& k) const {
        auto it = terms.find(k);
        if (it == terms.end()) throw Error("LossBreakdown: missing term " + k);
        return it->second;
    }
    void set(const std::string& k, double v) { terms[k] = v; }
    bool has(const std::string& k) const { return terms.count(k) != 0; }
};

constexpr double kProbClamp = 1e-7;  // probabilities clamped to [1e-7, 1-1e-7] before log

// alpha-balanced focal loss, mean over every pixel:
//   -alpha_t * (1 - p_t)^gamma * log(p_t)
// with p_t = pred where target==1 else 1-pred. Targets must be exactly 0/1.
template <typename T>
NodePtr<T> focal_loss(Graph<T>& g, const NodePtr<T>& pred, const Tensor<T>& target, T gamma, T alpha) {
    require_same_shape(pred->value, target, "focal_loss");
    const long n = pred->value.size();
    const T lo = T(kProbClamp), hi = T(1) - T(kProbClamp);
    const T inv_n = T(1) / T(n);

    double acc = 0.0;
    for (long i = 0; i < n; ++i) {
        const T t = target.v[i];
        if (t != T(0) && t != T(1)) throw DataError("focal_loss: target values must be binary {0,1}");
        const T p = std::min(std::max(pred->value.v[i], lo), hi);
        const T pt = (t == T(1)) ? p : T(1) - p;
        const T at = (t == T(1)) ? alpha : T(1) - alpha;
        acc += double(-at * std::pow(T(1) - pt, gamma) * std::log(pt));
    }
    Tensor<T> out(Shape4{1, 1, 1, 1});
    out.v[0] = T(acc * double(inv_n));

    auto node = g.result(std::move(out), pred->requires_grad);
    if (node->requires_grad) {
        Tensor<T> tgt = target;  // keep alive for the backward pass
        g.record([=, tgt = std::move(tgt)]() {
            if (!node->has_grad()) return;
            const T gy = node->grad.v[0] * inv_n;
            Tensor<T>& dp = pred->g();
            for (long i = 0; i < n; ++i) {
                const T praw = pred->value.v[i];
                if (praw <= lo || praw >= hi) continue;  // clamp region: zero slope
                const T t = tgt.v[i];
                const T pt = (t == T(1)) ? praw : T(1) - praw;
                const T at = (t == T(1)) ? alpha : T(1) - alpha;
                // d/d(pt) of -at*(1-pt)^gamma*log(pt), then chain through pt(p)
                const T one_m = T(1) - pt;
                const T dpt = at * (gamma * std::pow(one_m, gamma - T(1)) * std::log(pt) - std::pow(one_m, gamma) / pt);
                dp.v[i] += gy * ((t == T(1)) ? dpt : -dpt);
            }
        });
    }
    return node;
}

// Total segmentation objective: focal on the real labelled images plus focal
// on their translations, with identical labels. The translation is computed
// without gradient history, so this loss trains S only.
template <typename T, typename SegFn, typename GenFn>
NodePtr<T> segmentation_loss(Graph<T>& g, SegFn&& seg, GenFn&& gen_b, const NodePtr<T>& x_a, const Tensor<T>& y_a,
                             const LossWeights& w, LossBreakdown* bd = nullptr) {
    NodePtr<T> translated;
    {
        NoGradScope ng(g);
        translated = detach(gen_b(g, x_a));
    }
    auto foc_real = focal_loss(g, seg(g, x_a), y_a, T(w.gamma), T(w.alpha));
    auto foc_trans = focal_loss(g, seg(g, translated), y_a, T(w.gamma), T(w.alpha));
    auto total = add(g, foc_real, foc_trans);
    if (bd) {
        bd->set("foc_real", double(scalar_value(foc_real)));
        bd->set("foc_translated", double(scalar_value(foc_trans)));
        bd->set("seg_total", double(scalar_value(total)));
    }
    return total;
}

// Shape-preservation term: the same focal expression as the translated half
// of the segmentation loss, but evaluated with gradients flowing through S
// into G_B. Callers freeze S's parameters; the segmenter then acts as a fixed
// differentiable critic of instrument shape.
template <typename T, typename SegFn, typename GenFn>
NodePtr<T> shape_loss(Graph<T>& g, SegFn&& seg, GenFn&& gen_b, const NodePtr<T>& x_a, const Tensor<T>& y_a,
                      const LossWeights& w) {
    return focal_loss(g, seg(g, gen_b(g, x_a)), y_a, T(w.gamma), T(w.alpha));
}

// Latent structure term: L1 between encoder codes of an image and of its
// translation, both directions. e_A lives in G_B (it consumes domain-A
// images); e_B lives in G_A. Generators must expose encode() alongside the
// full forward.
template <typename T, typename GenA, typename GenB>
NodePtr<T> structure_loss(Graph<T>& g, GenA&& gen_a, GenB&& gen_b, const NodePtr<T>& x_a, const NodePtr<T>& x_b) {
    auto latent_a = gen_b.encode(g, x_a);                  // e_A(x_a)
    auto latent_a_trans = gen_a.encode(g, gen_b(g, x_a));  // e_B(G_B(x_a))
    auto latent_b = gen_a.encode(g, x_b);                  // e_B(x_b)
    auto latent_b_trans = gen_b.encode(g, gen_a(g, x_b));  // e_A(G_A(x_b))
    auto term_ab = mean_abs_diff(g, latent_a, latent_a_trans);
    auto term_ba = mean_abs_diff(g, latent_b, latent_b_trans);
    return add(g, term_ab, term_ba);
}

// LSGAN generator side: D should call the fake real.
template <typename T, typename DiscFn>
NodePtr<T> gan_loss_generator(Graph<T>& g, DiscFn&& disc, const NodePtr<T>& fake) {
    return mean_sq_diff(g, disc(g, fake), T(1));
}

// LSGAN discriminator side; `fake` must already be detached from the
// generators.
template <typename T, typename DiscFn>
NodePtr<T> gan_loss_discriminator(Graph<T>& g, DiscFn&& disc, const NodePtr<T>& real, const NodePtr<T>& fake) {
    auto on_real = scale(g, mean_sq_diff(g, disc(g, real), T(1)), T(0.5));
    auto on_fake = scale(g, mean_sq_diff(g, disc(g, fake), T(0)), T(0.5));
    return add(g, on_real, on_fake);
}

// mean-L1(x_a, G_A(G_B(x_a))) + mean-L1(x_b, G_B(G_A(x_b)))
template <typename T, typename GenA, typename GenB>
NodePtr<T> cycle_loss(Graph<T>& g, GenA&& gen_a, GenB&& gen_b, const NodePtr<T>& x_a, const NodePtr<T>& x_b) {
    auto rec_a = gen_a(g, gen_b(g, x_a));
    auto rec_b = gen_b(g, gen_a(g, x_b));
    return add(g, mean_abs_diff(g, rec_a, x_a), mean_abs_diff(g, rec_b, x_b));
}

// Each generator fed its own target-domain images should change nothing.
template <typename T, typename GenA, typename GenB>
NodePtr<T> identity_loss(Graph<T>& g, GenA&& gen_a, GenB&& gen_b, const NodePtr<T>& x_a, const NodePtr<T>& x_b) {
    return add(g, mean_abs_diff(g, gen_a(g, x_a), x_a), mean_abs_diff(g, gen_b(g, x_b), x_b));
}

// Composite generator objective. Evaluates every sub-expression once, shares
// the translated images and encoder codes between terms, and reports the
// unweighted term values. D_A, D_B and S must be frozen by the caller; only
// generator parameters receive gradients.
template <typename T>
struct GeneratorLossInputs {
    const Generator<T>& gen_a;  // G_A: B -> A
    const Generator<T>& gen_b;  // G_B: A -> B
    const PatchDiscriminator<T>& disc_a;
    const PatchDiscriminator<T>& disc_b;
    const UNetSegmenter<T>& seg;
};

template <typename T>
NodePtr<T> generator_total_loss(Graph<T>& g, const GeneratorLossInputs<T>& nets, const NodePtr<T>& x_a,
                                const NodePtr<T>& x_b, const Tensor<T>& y_a, const LossWeights& w,
                                LossBreakdown* bd = nullptr) {
    w.validate();

    // One shared evaluation of each translation and reconstruction; the
    // encoder codes for the structure term fall out of the same passes.
    auto fake_b = nets.gen_b.forward_with_latent(g, x_a);           // latent = e_A(x_a)
    auto fake_a = nets.gen_a.forward_with_latent(g, x_b);           // latent = e_B(x_b)
    auto rec_a = nets.gen_a.forward_with_latent(g, fake_b.output);  // latent = e_B(G_B(x_a))
    auto rec_b = nets.gen_b.forward_with_latent(g, fake_a.output);  // latent = e_A(G_A(x_b))

    auto gan = add(g, gan_loss_generator(g, nets.disc_b, fake_b.output),
                   gan_loss_generator(g, nets.disc_a, fake_a.output));
    auto cyc = add(g, mean_abs_diff(g, rec_a.output, x_a), mean_abs_diff(g, rec_b.output, x_b));
    auto shape = focal_loss(g, nets.seg(g, fake_b.output), y_a, T(w.gamma), T(w.alpha));
    auto structure = add(g, mean_abs_diff(g, fake_b.latent, rec_a.latent),
                         mean_abs_diff(g, fake_a.latent, rec_b.latent));
    auto idt = add(g, mean_abs_diff(g, nets.gen_a(g, x_a), x_a), mean_abs_diff(g, nets.gen_b(g, x_b), x_b));

    auto total = scale(g, gan, T(w.lambda1));
    total = add(g, total, scale(g, cyc, T(w.lambda2)));
    total = add(g, total, scale(g, shape, T(w.lambda3)));
    total = add(g, total, scale(g, structure, T(w.lambda4)));
    total = add(g, total, scale(g, idt, T(w.lambda5)));

    if (bd) {
        bd->set("gan_total", double(scalar_value(gan)));
        bd->set("cyc_total", double(scalar_value(cyc)));
        bd->set("shape", double(scalar_value(shape)));
        bd->set("structure", double(scalar_value(structure)));
        bd->set("identity", double(scalar_value(idt)));
        bd->set("generator_total", double(scalar_value(total)));
    }
    return total;
}

}  // namespace coseg

#endif
