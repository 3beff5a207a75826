#include "pek/avih.hpp"

#include <cmath>
#include <stdexcept>

#include "pek/rng.hpp"

namespace pek::avih {

void AvihConfig::validate(int h, int w) const {
    if (steps < 1) throw std::invalid_argument("avih: steps < 1");
    if (step_size <= 0) throw std::invalid_argument("avih: step_size <= 0");
    if (lambda_f < 0 || lambda_g < 0 || lambda_v < 0)
        throw std::invalid_argument("avih: negative term weight");
    if (variance_grid < 2) throw std::invalid_argument("avih: k < 2");
    if (h % variance_grid != 0 || w % variance_grid != 0)
        throw std::invalid_argument("avih: k does not divide image dims");
}

void SecretGan::save(const std::string& path) const {
    gan::TrainConfig cfg;  // coefficients live in the descriptor extra
    nlohmann::json extra = {{"secret_gan",
                             {{"dataset_tag", dataset_tag},
                              {"val_l1", val_l1}}}};
    gan::save_generator(path, generator,
                        rng::seed_from_label(seed_label), 0, cfg, extra);
}

SecretGan SecretGan::load(const std::string& path) {
    nlohmann::json desc;
    SecretGan s;
    s.generator = gan::load_generator(path, &desc);
    s.seed_label = s.generator.spec.seed_label;
    if (desc.contains("extra") && desc["extra"].contains("secret_gan")) {
        const auto& e = desc["extra"]["secret_gan"];
        s.dataset_tag = e.value("dataset_tag", "");
        s.val_l1 = e.value("val_l1", 0.0);
    }
    return s;
}

SecretGan train_secret_gan(const std::vector<img::ImageTensor>& images,
                           const std::string& seed_label,
                           const gan::TrainConfig& cfg,
                           const gan::GeneratorSpec& gspec_in,
                           const std::string& dataset_tag) {
    gan::TrainConfig tc = cfg;
    tc.gamma = 0.0;  // reconstruction GAN has no feature branch
    tc.validate();

    // Seeded split, last fifth held out.
    rng::DetRng rng(tc.seed ^ rng::seed_from_label(seed_label));
    std::vector<std::size_t> order(images.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const std::size_t n_val = std::max<std::size_t>(1, images.size() / 5);
    if (images.size() < n_val + 100)
        throw std::invalid_argument(
            "train_secret_gan: needs at least 100 training images");
    const std::size_t n_train = images.size() - n_val;

    gan::GeneratorSpec gspec = gspec_in;
    gspec.seed_label = seed_label;
    gspec.height = images.front().height;
    gspec.width = images.front().width;
    const std::uint64_t init_seed = rng::seed_from_label(seed_label);
    gan::Generator g = gan::build_generator(gspec, init_seed);
    gan::DiscriminatorSpec dspec;
    dspec.base_width = std::max(8, gspec.base_width);
    dspec.in_channels = tc.conditional_d ? 6 : 3;
    gan::Discriminator d = gan::build_discriminator(dspec, init_seed ^ 0x9e3779b97f4a7c15ull);

    gan::TrainState state;
    state.opt_g.lr = tc.lr;
    state.opt_d.lr = tc.lr;

    std::vector<std::size_t> train_idx(order.begin(), order.begin() + n_train);
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        rng::DetRng erng(tc.seed + 0x51ed2701u + epoch);
        erng.shuffle(train_idx);
        for (std::size_t off = 0; off < train_idx.size();
             off += tc.batch_size) {
            const std::size_t end =
                std::min(train_idx.size(), off + tc.batch_size);
            std::vector<img::ImageTensor> batch;
            batch.reserve(end - off);
            for (std::size_t i = off; i < end; ++i)
                batch.push_back(images[train_idx[i]]);
            const core::Tensor t = img::to_tensor(batch);
            gan::gan_train_step(g, d, nullptr, t, t, tc, state);
        }
    }

    // Validation reconstruction quality.
    double val_l1 = 0.0;
    for (std::size_t i = n_train; i < order.size(); ++i) {
        const core::Tensor t = img::to_tensor(images[order[i]]);
        val_l1 += gan::l1_loss(t, g.infer(t));
    }
    val_l1 /= static_cast<double>(n_val);
    if (!std::isfinite(val_l1))
        throw std::runtime_error("train_secret_gan: diverged");

    SecretGan s;
    s.generator = std::move(g);
    s.seed_label = seed_label;
    s.dataset_tag = dataset_tag;
    s.val_l1 = val_l1;
    return s;
}

namespace {

struct VarianceBlocks {
    int k = 0, bh = 0, bw = 0;
    std::vector<double> block_var;   // per sample, k*k
    std::vector<double> block_mean;  // per sample, k*k
    std::vector<double> per_sample;  // loss per sample
};

VarianceBlocks variance_blocks(const core::Tensor& x, int k) {
    if (x.h % k != 0 || x.w % k != 0)
        throw std::invalid_argument(
            "variance_consistency: k does not divide image dims");
    VarianceBlocks vb;
    vb.k = k;
    vb.bh = x.h / k;
    vb.bw = x.w / k;
    const int kk = k * k;
    const double m = static_cast<double>(x.c) * vb.bh * vb.bw;
    vb.block_var.assign(static_cast<std::size_t>(x.n) * kk, 0.0);
    vb.block_mean.assign(vb.block_var.size(), 0.0);
    vb.per_sample.assign(x.n, 0.0);
    for (int n = 0; n < x.n; ++n) {
        for (int by = 0; by < k; ++by)
            for (int bx = 0; bx < k; ++bx) {
                double sum = 0.0, sumsq = 0.0;
                for (int c = 0; c < x.c; ++c)
                    for (int y = 0; y < vb.bh; ++y)
                        for (int xx = 0; xx < vb.bw; ++xx) {
                            const double v =
                                x.at(n, c, by * vb.bh + y, bx * vb.bw + xx);
                            sum += v;
                            sumsq += v * v;
                        }
                const double mean = sum / m;
                const double var = sumsq / m - mean * mean;
                vb.block_mean[n * kk + by * k + bx] = mean;
                vb.block_var[n * kk + by * k + bx] = var;
            }
        double vbar = 0.0;
        for (int b = 0; b < kk; ++b) vbar += vb.block_var[n * kk + b];
        vbar /= kk;
        double loss = 0.0;
        for (int b = 0; b < kk; ++b) {
            const double d = vb.block_var[n * kk + b] - vbar;
            loss += d * d;
        }
        vb.per_sample[n] = loss / kk;
    }
    return vb;
}

}  // namespace

double variance_consistency_value(const core::Tensor& x, int k,
                                  std::vector<double>* per_sample) {
    const VarianceBlocks vb = variance_blocks(x, k);
    double acc = 0.0;
    for (double v : vb.per_sample) acc += v;
    if (per_sample) *per_sample = vb.per_sample;
    return acc / x.n;
}

core::Tensor variance_consistency_grad(const core::Tensor& x, int k) {
    const VarianceBlocks vb = variance_blocks(x, k);
    const int kk = k * k;
    const double m = static_cast<double>(x.c) * vb.bh * vb.bw;
    core::Tensor g(x.n, x.c, x.h, x.w);
    for (int n = 0; n < x.n; ++n) {
        double vbar = 0.0;
        for (int b = 0; b < kk; ++b) vbar += vb.block_var[n * kk + b];
        vbar /= kk;
        for (int by = 0; by < k; ++by)
            for (int bx = 0; bx < k; ++bx) {
                const int b = by * k + bx;
                // dL/dv_b = (2/K)(v_b - vbar); dv_b/dx = 2(x - mu_b)/m.
                const double dldv =
                    2.0 / kk * (vb.block_var[n * kk + b] - vbar);
                const double mu = vb.block_mean[n * kk + b];
                const double coef = dldv * 2.0 / m;
                for (int c = 0; c < x.c; ++c)
                    for (int y = 0; y < vb.bh; ++y)
                        for (int xx = 0; xx < vb.bw; ++xx) {
                            const int iy = by * vb.bh + y;
                            const int ix = bx * vb.bw + xx;
                            g.at(n, c, iy, ix) =
                                coef * (x.at(n, c, iy, ix) - mu);
                        }
            }
    }
    return g;
}

double variance_consistency_loss(const img::ImageTensor& image, int k) {
    if (k < 2) throw std::invalid_argument("variance_consistency: k < 2");
    return variance_consistency_value(img::to_tensor(image), k);
}

std::vector<img::ImageTensor> avih_encrypt_batch(
    const std::vector<img::ImageTensor>& images,
    const models::FeatureExtractor& f, SecretGan& secret,
    const AvihConfig& cfg, std::vector<EncryptTrace>* traces) {
    if (images.empty())
        throw std::invalid_argument("avih_encrypt: empty batch");
    const int H = images.front().height, W = images.front().width;
    cfg.validate(H, W);

    const core::Tensor x = img::to_tensor(images);
    f.check_input(x);
    const core::Tensor e_target = f.embed_tensor(x);
    const int edim = e_target.c;
    const int N = x.n;
    const std::size_t per = x.size() / N;

    // f and G are used read-only: skip their parameter gradients. The
    // forward/backward caches need a mutable net, so the extractor is cloned
    // and the caller's instance stays untouched.
    nn::Sequential& gnet = secret.generator.net;
    gnet.set_frozen(true);
    models::FeatureExtractor fwork = f.clone();
    fwork.net.set_frozen(true);

    core::Tensor xp(N, x.c, H, W);
    if (cfg.init == AvihConfig::Init::copy) {
        xp = x;
    } else {
        rng::DetRng rng(cfg.rng_seed);
        for (auto& v : xp.v) v = rng.uniform();
    }

    // Adam state over the ciphertext pixels.
    std::vector<double> m(xp.size(), 0.0), v(xp.size(), 0.0);
    const double b1 = 0.9, b2 = 0.999, aeps = 1e-8;

    std::vector<double> best_obj(N, 0.0);
    core::Tensor best_x = xp;
    std::vector<EncryptTrace> local_traces(N);

    const double inv_per = 1.0 / static_cast<double>(per);

    for (int step = 0; step <= cfg.steps; ++step) {
        // Objective components at the current iterate.
        const core::Tensor gy = gnet.forward(xp);
        const core::Tensor ef = fwork.forward_train(xp);

        std::vector<double> l1_i(N, 0.0), mse_i(N, 0.0), var_i;
        for (int n = 0; n < N; ++n) {
            const double* yp = gy.v.data() + n * per;
            const double* tp = x.v.data() + n * per;
            double acc = 0.0;
            for (std::size_t i = 0; i < per; ++i)
                acc += std::abs(yp[i] - tp[i]);
            l1_i[n] = acc * inv_per;
            double facc = 0.0;
            for (int j = 0; j < edim; ++j) {
                const double d = ef.at(n, j, 0, 0) - e_target.at(n, j, 0, 0);
                facc += d * d;
            }
            mse_i[n] = facc / edim;
        }
        variance_consistency_value(xp, cfg.variance_grid, &var_i);

        for (int n = 0; n < N; ++n) {
            const double obj = cfg.lambda_f * mse_i[n] +
                               cfg.lambda_g * l1_i[n] +
                               cfg.lambda_v * var_i[n];
            if (!std::isfinite(obj))
                throw std::runtime_error("avih_encrypt: diverged");
            if (step == 0) {
                best_obj[n] = obj;  // best_x already holds the init iterate
                local_traces[n].initial_objective = obj;
            } else if (obj < best_obj[n]) {
                best_obj[n] = obj;
                std::copy(xp.v.begin() + n * per, xp.v.begin() + (n + 1) * per,
                          best_x.v.begin() + n * per);
            }
            if (step % cfg.record_every == 0 || step == cfg.steps)
                local_traces[n].objective.push_back(best_obj[n]);
        }
        if (step == cfg.steps) break;

        // Gradient assembly.
        core::Tensor grad(N, x.c, H, W);
        grad.fill(0.0);
        if (cfg.lambda_g > 0) {
            core::Tensor gl1 = gy;
            for (std::size_t i = 0; i < gl1.v.size(); ++i) {
                const double d = gy.v[i] - x.v[i];
                gl1.v[i] = cfg.lambda_g * inv_per *
                           (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
            }
            const core::Tensor gg = gnet.backward(gl1);
            for (std::size_t i = 0; i < grad.v.size(); ++i)
                grad.v[i] += gg.v[i];
        }
        if (cfg.lambda_f > 0) {
            core::Tensor ge = ef;
            const double scale = 2.0 / edim;
            for (int n = 0; n < N; ++n)
                for (int j = 0; j < edim; ++j)
                    ge.at(n, j, 0, 0) =
                        cfg.lambda_f * scale *
                        (ef.at(n, j, 0, 0) - e_target.at(n, j, 0, 0));
            const core::Tensor gf = fwork.backward_to_input(ge);
            for (std::size_t i = 0; i < grad.v.size(); ++i)
                grad.v[i] += gf.v[i];
        }
        if (cfg.lambda_v > 0) {
            const core::Tensor gv =
                variance_consistency_grad(xp, cfg.variance_grid);
            for (std::size_t i = 0; i < grad.v.size(); ++i)
                grad.v[i] += cfg.lambda_v * gv.v[i];
        }

        const double bc1 = 1.0 - std::pow(b1, step + 1);
        const double bc2 = 1.0 - std::pow(b2, step + 1);
        for (std::size_t i = 0; i < xp.v.size(); ++i) {
            const double g = grad.v[i];
            m[i] = b1 * m[i] + (1 - b1) * g;
            v[i] = b2 * v[i] + (1 - b2) * g * g;
            double nv = xp.v[i] -
                        cfg.step_size * (m[i] / bc1) /
                            (std::sqrt(v[i] / bc2) + aeps);
            if (nv < 0.0) nv = 0.0;
            if (nv > 1.0) nv = 1.0;
            xp.v[i] = nv;
        }
    }

    gnet.set_frozen(false);

    std::vector<img::ImageTensor> out;
    out.reserve(N);
    for (int n = 0; n < N; ++n) {
        local_traces[n].final_objective = best_obj[n];
        out.push_back(img::from_tensor(best_x, n));
    }
    if (traces) *traces = std::move(local_traces);
    return out;
}

img::ImageTensor avih_encrypt(const img::ImageTensor& image,
                              const models::FeatureExtractor& f,
                              SecretGan& secret, const AvihConfig& cfg,
                              EncryptTrace* trace) {
    std::vector<EncryptTrace> traces;
    auto out = avih_encrypt_batch({image}, f, secret, cfg,
                                  trace ? &traces : nullptr);
    if (trace) *trace = std::move(traces.front());
    return std::move(out.front());
}

img::ImageTensor avih_decrypt(const img::ImageTensor& encrypted,
                              const SecretGan& secret) {
    const core::Tensor y = secret.generator.infer(img::to_tensor(encrypted));
    return img::from_tensor(y);
}

}  // namespace pek::avih
