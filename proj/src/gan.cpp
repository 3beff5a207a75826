#include "pek/gan.hpp"

#include <cmath>
#include <stdexcept>

#include "pek/checkpoint.hpp"

namespace pek::gan {

namespace {

constexpr double kLogEps = 1e-12;

std::unique_ptr<nn::Sequential> res_body_reflect(int c) {
    auto body = std::make_unique<nn::Sequential>();
    body->add<nn::ReflectPad>(1);
    body->add<nn::Conv2d>(c, c, 3, 1, 0);
    body->add<nn::InstanceNorm>(c);
    body->add<nn::ReLU>();
    body->add<nn::ReflectPad>(1);
    body->add<nn::Conv2d>(c, c, 3, 1, 0);
    body->add<nn::InstanceNorm>(c);
    return body;
}

std::unique_ptr<nn::Sequential> res_body_plain(int c) {
    auto body = std::make_unique<nn::Sequential>();
    body->add<nn::Conv2d>(c, c, 3, 1, 1);
    body->add<nn::InstanceNorm>(c);
    body->add<nn::ReLU>();
    body->add<nn::Conv2d>(c, c, 3, 1, 1);
    body->add<nn::InstanceNorm>(c);
    return body;
}

void build_resnet9(nn::Sequential& net, int w, int n_blocks) {
    net.add<nn::ReflectPad>(3);
    net.add<nn::Conv2d>(3, w, 7, 1, 0);
    net.add<nn::InstanceNorm>(w);
    net.add<nn::ReLU>();
    net.add<nn::Conv2d>(w, 2 * w, 3, 2, 1);
    net.add<nn::InstanceNorm>(2 * w);
    net.add<nn::ReLU>();
    net.add<nn::Conv2d>(2 * w, 4 * w, 3, 2, 1);
    net.add<nn::InstanceNorm>(4 * w);
    net.add<nn::ReLU>();
    for (int i = 0; i < n_blocks; ++i)
        net.add<nn::Residual>(res_body_reflect(4 * w));
    net.add<nn::ConvTranspose2d>(4 * w, 2 * w, 4, 2, 1);
    net.add<nn::InstanceNorm>(2 * w);
    net.add<nn::ReLU>();
    net.add<nn::ConvTranspose2d>(2 * w, w, 4, 2, 1);
    net.add<nn::InstanceNorm>(w);
    net.add<nn::ReLU>();
    net.add<nn::ReflectPad>(3);
    net.add<nn::Conv2d>(w, 3, 7, 1, 0);
    net.add<nn::Tanh01>();
}

// Deep residual encoder with staged downsampling; decoder is upsample+conv.
void build_resnet50_encoder(nn::Sequential& net, int w, int n_blocks) {
    const int stage1 = std::max(1, n_blocks / 3);
    const int stage2 = std::max(1, n_blocks - stage1);
    net.add<nn::Conv2d>(3, w, 3, 1, 1);
    net.add<nn::InstanceNorm>(w);
    net.add<nn::ReLU>();
    net.add<nn::Conv2d>(w, 2 * w, 3, 2, 1);
    net.add<nn::InstanceNorm>(2 * w);
    net.add<nn::ReLU>();
    for (int i = 0; i < stage1; ++i)
        net.add<nn::Residual>(res_body_plain(2 * w));
    net.add<nn::Conv2d>(2 * w, 4 * w, 3, 2, 1);
    net.add<nn::InstanceNorm>(4 * w);
    net.add<nn::ReLU>();
    for (int i = 0; i < stage2; ++i)
        net.add<nn::Residual>(res_body_plain(4 * w));
    net.add<nn::UpsampleNearest2x>();
    net.add<nn::Conv2d>(4 * w, 2 * w, 3, 1, 1);
    net.add<nn::InstanceNorm>(2 * w);
    net.add<nn::ReLU>();
    net.add<nn::UpsampleNearest2x>();
    net.add<nn::Conv2d>(2 * w, w, 3, 1, 1);
    net.add<nn::InstanceNorm>(w);
    net.add<nn::ReLU>();
    net.add<nn::Conv2d>(w, 3, 3, 1, 1);
    net.add<nn::Tanh01>();
}

}  // namespace

void TrainConfig::validate() const {
    if (alpha < 0 || beta < 0 || gamma < 0)
        throw std::invalid_argument("TrainConfig: negative loss coefficient");
    if (lr <= 0) throw std::invalid_argument("TrainConfig: lr must be > 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size < 1");
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs < 1");
}

Generator build_generator(const GeneratorSpec& spec, std::uint64_t seed) {
    Generator g;
    g.spec = spec;
    if (spec.variant == "resnet9")
        build_resnet9(g.net, spec.base_width, spec.n_blocks);
    else if (spec.variant == "resnet50_encoder")
        build_resnet50_encoder(g.net, spec.base_width, spec.n_blocks);
    else
        throw std::invalid_argument("build_generator: unknown variant " +
                                    spec.variant);
    g.net.init(seed);
    return g;
}

Discriminator build_discriminator(const DiscriminatorSpec& spec,
                                  std::uint64_t seed) {
    if (spec.variant != "patchgan")
        throw std::invalid_argument("build_discriminator: unknown variant " +
                                    spec.variant);
    Discriminator d;
    d.spec = spec;
    const int w = spec.base_width;
    // No normalization layers: patch scores must depend only on their
    // receptive field, and any global statistic would break that.
    d.net.add<nn::Conv2d>(spec.in_channels, w, 4, 2, 1);
    d.net.add<nn::LeakyReLU>(0.2);
    d.net.add<nn::Conv2d>(w, 2 * w, 4, 2, 1);
    d.net.add<nn::LeakyReLU>(0.2);
    d.net.add<nn::Conv2d>(2 * w, 1, 4, 1, 1);
    d.net.add<nn::Sigmoid>();
    d.net.init(seed);
    return d;
}

namespace {

double mean_log(const Tensor& p) {
    double acc = 0.0;
    for (double v : p.v) acc += std::log(std::max(v, kLogEps));
    return acc / static_cast<double>(p.size());
}

double mean_log1m(const Tensor& p) {
    double acc = 0.0;
    for (double v : p.v) acc += std::log(std::max(1.0 - v, kLogEps));
    return acc / static_cast<double>(p.size());
}

// d(mean log p)/dp, clamped region has zero slope.
Tensor grad_mean_log(const Tensor& p, double scale) {
    Tensor g = p;
    const double inv = scale / static_cast<double>(p.size());
    for (std::size_t i = 0; i < g.v.size(); ++i)
        g.v[i] = p.v[i] > kLogEps ? inv / p.v[i] : 0.0;
    return g;
}

// d(mean log(1-p))/dp.
Tensor grad_mean_log1m(const Tensor& p, double scale) {
    Tensor g = p;
    const double inv = scale / static_cast<double>(p.size());
    for (std::size_t i = 0; i < g.v.size(); ++i)
        g.v[i] = (1.0 - p.v[i]) > kLogEps ? -inv / (1.0 - p.v[i]) : 0.0;
    return g;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw std::invalid_argument("concat: shape mismatch");
    Tensor out(a.n, a.c + b.c, a.h, a.w);
    for (int n = 0; n < a.n; ++n) {
        for (int c = 0; c < a.c; ++c)
            std::copy(a.plane(n, c), a.plane(n, c) + a.h * a.w,
                      out.plane(n, c));
        for (int c = 0; c < b.c; ++c)
            std::copy(b.plane(n, c), b.plane(n, c) + b.h * b.w,
                      out.plane(n, a.c + c));
    }
    return out;
}

Tensor first_channels(const Tensor& t, int c_keep) {
    Tensor out(t.n, c_keep, t.h, t.w);
    for (int n = 0; n < t.n; ++n)
        for (int c = 0; c < c_keep; ++c)
            std::copy(t.plane(n, c), t.plane(n, c) + t.h * t.w,
                      out.plane(n, c));
    return out;
}

}  // namespace

double adv_loss(Discriminator& d, const Tensor& real, const Tensor& fake) {
    if (real.size() == 0 || fake.size() == 0)
        throw std::invalid_argument("adv_loss: empty batch");
    const Tensor pr = d.infer(real);
    const Tensor pf = d.infer(fake);
    return mean_log(pr) + mean_log1m(pf);
}

double l1_loss(const Tensor& target, const Tensor& output) {
    core::check_same_shape(target, output, "l1_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < target.v.size(); ++i)
        acc += std::abs(target.v[i] - output.v[i]);
    return acc / static_cast<double>(target.size());
}

Tensor l1_loss_grad(const Tensor& target, const Tensor& output) {
    core::check_same_shape(target, output, "l1_loss_grad");
    Tensor g = output;
    const double inv = 1.0 / static_cast<double>(target.size());
    for (std::size_t i = 0; i < g.v.size(); ++i) {
        const double d = output.v[i] - target.v[i];
        g.v[i] = d > 0 ? inv : (d < 0 ? -inv : 0.0);
    }
    return g;
}

double feature_mse(const Tensor& e1, const Tensor& e2) {
    core::check_same_shape(e1, e2, "feature_mse");
    const std::size_t per = e1.size() / e1.n;
    double acc = 0.0;
    for (std::size_t i = 0; i < e1.v.size(); ++i) {
        const double d = e1.v[i] - e2.v[i];
        acc += d * d;
    }
    return acc / static_cast<double>(per) / e1.n;
}

double feature_loss(models::FeatureExtractor& h, const Tensor& target,
                    const Tensor& output) {
    core::check_same_shape(target, output, "feature_loss");
    const Tensor et = h.embed_tensor(target);
    const Tensor eo = h.embed_tensor(output);
    return feature_mse(et, eo);
}

double total_loss(double alpha, double beta, double gamma, double l_adv,
                  double l_g, double l_h) {
    if (alpha < 0 || beta < 0 || gamma < 0)
        throw std::invalid_argument("total_loss: negative coefficient");
    return alpha * l_adv + beta * l_g + gamma * l_h;
}

LossRecord gan_train_step(Generator& g, Discriminator& d,
                          models::FeatureExtractor* h, const Tensor& target,
                          const Tensor& input, const TrainConfig& cfg,
                          TrainState& state) {
    cfg.validate();
    if (cfg.gamma > 0 && h == nullptr)
        throw std::invalid_argument("gan_train_step: gamma > 0 requires h");

    const Tensor fake = g.forward(input);

    // Loss values at the pre-update point.
    LossRecord rec;
    rec.l1 = l1_loss(target, fake);

    Tensor g_fake(fake.n, fake.c, fake.h, fake.w);
    g_fake.fill(0.0);
    if (cfg.beta > 0) {
        const Tensor gl1 = l1_loss_grad(target, fake);
        for (std::size_t i = 0; i < g_fake.v.size(); ++i)
            g_fake.v[i] += cfg.beta * gl1.v[i];
    }

    if (h != nullptr) {
        const Tensor et = h->embed_tensor(target);
        const Tensor eo = h->forward_train(fake);
        rec.feature = feature_mse(et, eo);
        if (cfg.gamma > 0) {
            Tensor ge = eo;
            const double scale =
                2.0 / (static_cast<double>(eo.size() / eo.n) * eo.n);
            for (std::size_t i = 0; i < ge.v.size(); ++i)
                ge.v[i] = cfg.gamma * scale * (eo.v[i] - et.v[i]);
            const Tensor gh = h->backward_to_input(ge);
            for (std::size_t i = 0; i < g_fake.v.size(); ++i)
                g_fake.v[i] += gh.v[i];
        }
    }

    const Tensor d_real_in =
        cfg.conditional_d ? concat_channels(target, input) : target;
    const Tensor d_fake_in =
        cfg.conditional_d ? concat_channels(fake, input) : fake;

    const Tensor pr = d.infer(d_real_in);
    const double real_term = mean_log(pr);

    // Fake term with gradient back to the generator output. D parameter
    // gradients picked up here are discarded before D's own pass.
    const Tensor pf = d.forward(d_fake_in);
    const double fake_term = mean_log1m(pf);
    rec.adv = real_term + fake_term;
    rec.total = total_loss(cfg.alpha, cfg.beta, cfg.gamma, rec.adv, rec.l1,
                           rec.feature);
    if (!std::isfinite(rec.total) || !std::isfinite(rec.adv))
        throw std::runtime_error("gan_train_step: non-finite loss (divergence)");

    if (cfg.alpha > 0) {
        Tensor gadv_in = d.net.backward(grad_mean_log1m(pf, cfg.alpha));
        const Tensor gadv = cfg.conditional_d
                                ? first_channels(gadv_in, fake.c)
                                : std::move(gadv_in);
        for (std::size_t i = 0; i < g_fake.v.size(); ++i)
            g_fake.v[i] += gadv.v[i];
    }

    g.net.zero_grad();
    g.net.backward(g_fake);

    // Discriminator ascends L_adv: descend its negation. Both terms are
    // evaluated at the same pre-update parameters as the generator pass.
    d.net.zero_grad();
    d.net.forward(d_real_in);
    d.net.backward(grad_mean_log(pr, -1.0));
    d.net.forward(d_fake_in);
    d.net.backward(grad_mean_log1m(pf, -1.0));

    state.opt_g.lr = cfg.lr;
    state.opt_d.lr = cfg.lr;
    state.opt_g.step(g.net.params());
    state.opt_d.step(d.net.params());
    return rec;
}

void save_generator(const std::string& path, const Generator& g,
                    std::uint64_t init_seed, int epoch, const TrainConfig& cfg,
                    const nlohmann::json& extra) {
    ckpt::Blob blob;
    blob.descriptor = {
        {"kind", "generator"},
        {"version", 1},
        {"variant", g.spec.variant},
        {"height", g.spec.height},
        {"width", g.spec.width},
        {"base_width", g.spec.base_width},
        {"n_blocks", g.spec.n_blocks},
        {"seed_label", g.spec.seed_label},
        {"init_seed", init_seed},
        {"epoch", epoch},
        {"coefficients",
         {{"alpha", cfg.alpha},
          {"beta", cfg.beta},
          {"gamma", cfg.gamma},
          {"lr", cfg.lr},
          {"batch_size", cfg.batch_size},
          {"epochs", cfg.epochs},
          {"seed", cfg.seed}}},
        {"checksum", g.checksum()},
    };
    if (!extra.is_null() && !extra.empty()) blob.descriptor["extra"] = extra;
    blob.arrays.push_back(g.net.snapshot_params());
    ckpt::save_blob(path, blob);
}

Generator load_generator(const std::string& path,
                         nlohmann::json* descriptor_out) {
    ckpt::Blob blob = ckpt::load_blob(path);
    const auto& desc = blob.descriptor;
    if (desc.at("kind") != "generator")
        throw std::runtime_error("not a generator checkpoint: " + path);
    GeneratorSpec spec;
    spec.variant = desc.at("variant").get<std::string>();
    spec.height = desc.at("height").get<int>();
    spec.width = desc.at("width").get<int>();
    spec.base_width = desc.at("base_width").get<int>();
    spec.n_blocks = desc.at("n_blocks").get<int>();
    spec.seed_label = desc.at("seed_label").get<std::string>();
    Generator g = build_generator(spec, desc.at("init_seed").get<std::uint64_t>());
    g.net.restore_params(blob.arrays.at(0));
    if (desc.contains("checksum") &&
        desc.at("checksum").get<std::uint64_t>() != g.checksum())
        throw std::runtime_error("generator checksum mismatch: " + path);
    if (descriptor_out) *descriptor_out = desc;
    return g;
}

}  // namespace pek::gan
