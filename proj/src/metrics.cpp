#include "pek/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pek::metrics {

double cosine_similarity(const img::ImageTensor& a, const img::ImageTensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("cosine_similarity: shape mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        dot += a.data[i] * b.data[i];
        na += a.data[i] * a.data[i];
        nb += b.data[i] * b.data[i];
    }
    if (na == 0.0 || nb == 0.0)
        throw std::invalid_argument("cosine_similarity: zero-norm input");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (0.01 * L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& gaussian_window() {
    static const std::vector<double> w = [] {
        std::vector<double> g(kSsimWindow);
        const double c = (kSsimWindow - 1) / 2.0;
        double sum = 0.0;
        for (int i = 0; i < kSsimWindow; ++i) {
            const double d = i - c;
            g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
            sum += g[i];
        }
        for (auto& v : g) v /= sum;
        return g;
    }();
    return w;
}

// Weighted local sums for one channel via the separable Gaussian; valid
// region only.
double ssim_channel(const img::ImageTensor& a, const img::ImageTensor& b,
                    int ch) {
    const auto& g = gaussian_window();
    const int H = a.height, W = a.width;
    const int oh = H - kSsimWindow + 1, ow = W - kSsimWindow + 1;

    // Row pass over the five products.
    const int rw = ow;  // horizontally filtered width
    std::vector<double> ra(static_cast<std::size_t>(H) * rw),
        rb(ra.size()), raa(ra.size()), rbb(ra.size()), rab(ra.size());
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < rw; ++x) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (int k = 0; k < kSsimWindow; ++k) {
                const double va = a.at(y, x + k, ch);
                const double vb = b.at(y, x + k, ch);
                const double wk = g[k];
                sa += wk * va;
                sb += wk * vb;
                saa += wk * va * va;
                sbb += wk * vb * vb;
                sab += wk * va * vb;
            }
            const std::size_t i = static_cast<std::size_t>(y) * rw + x;
            ra[i] = sa;
            rb[i] = sb;
            raa[i] = saa;
            rbb[i] = sbb;
            rab[i] = sab;
        }

    double total = 0.0;
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double mu1 = 0, mu2 = 0, m11 = 0, m22 = 0, m12 = 0;
            for (int k = 0; k < kSsimWindow; ++k) {
                const std::size_t i =
                    static_cast<std::size_t>(y + k) * rw + x;
                const double wk = g[k];
                mu1 += wk * ra[i];
                mu2 += wk * rb[i];
                m11 += wk * raa[i];
                m22 += wk * rbb[i];
                m12 += wk * rab[i];
            }
            const double s11 = m11 - mu1 * mu1;
            const double s22 = m22 - mu2 * mu2;
            const double s12 = m12 - mu1 * mu2;
            const double num = (2 * mu1 * mu2 + kC1) * (2 * s12 + kC2);
            const double den =
                (mu1 * mu1 + mu2 * mu2 + kC1) * (s11 + s22 + kC2);
            total += num / den;
        }
    return total / (static_cast<double>(oh) * ow);
}

}  // namespace

double ssim(const img::ImageTensor& a, const img::ImageTensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
    if (a.height < kSsimWindow || a.width < kSsimWindow)
        throw std::invalid_argument("ssim: image smaller than window");
    double acc = 0.0;
    for (int c = 0; c < a.channels; ++c) acc += ssim_channel(a, b, c);
    return acc / a.channels;
}

double lpips_distance(const img::ImageTensor& a, const img::ImageTensor& b,
                      const models::FeatureExtractor& extractor) {
    if (!a.same_shape(b)) throw std::invalid_argument("lpips: shape mismatch");
    const core::Tensor ta = img::to_tensor(a);
    const core::Tensor tb = img::to_tensor(b);
    const auto fa = extractor.features(ta);
    const auto fb = extractor.features(tb);

    double layer_sum = 0.0;
    for (std::size_t l = 0; l < fa.size(); ++l) {
        const core::Tensor& xa = fa[l];
        const core::Tensor& xb = fb[l];
        double acc = 0.0;
        for (int y = 0; y < xa.h; ++y)
            for (int x = 0; x < xa.w; ++x) {
                double na = 0.0, nb = 0.0;
                for (int c = 0; c < xa.c; ++c) {
                    na += xa.at(0, c, y, x) * xa.at(0, c, y, x);
                    nb += xb.at(0, c, y, x) * xb.at(0, c, y, x);
                }
                na = std::sqrt(na) + 1e-10;
                nb = std::sqrt(nb) + 1e-10;
                for (int c = 0; c < xa.c; ++c) {
                    const double d =
                        xa.at(0, c, y, x) / na - xb.at(0, c, y, x) / nb;
                    acc += d * d;
                }
            }
        layer_sum += acc / xa.size();
    }
    return layer_sum / static_cast<double>(fa.size());
}

void MetricReport::finalize() {
    std::sort(rows.begin(), rows.end(),
              [](const MetricRow& a, const MetricRow& b) {
                  return a.sample_id < b.sample_id;
              });
    std::map<std::string, Aggregate> agg;
    for (const auto& r : rows) {
        Aggregate& a = agg[r.key_label];
        a.cosine += r.cosine;
        a.ssim += r.ssim;
        a.lpips += r.lpips;
        a.count += 1;
    }
    for (auto& [label, a] : agg) {
        a.cosine /= a.count;
        a.ssim /= a.count;
        a.lpips /= a.count;
        auto it = aggregates.find(label);
        if (it != aggregates.end()) a.extras = it->second.extras;
    }
    aggregates = std::move(agg);
}

namespace {
std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}
}  // namespace

void MetricReport::write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_csv: cannot write " + path);
    os << "# pek-metrics v1\n";
    os << "sample_id,key_label,cosine,ssim,lpips\n";
    for (const auto& r : rows)
        os << r.sample_id << ',' << r.key_label << ',' << fmt_double(r.cosine)
           << ',' << fmt_double(r.ssim) << ',' << fmt_double(r.lpips) << '\n';
}

void MetricReport::write_aggregate_json(const std::string& path) const {
    nlohmann::json groups = nlohmann::json::object();
    for (const auto& [label, a] : aggregates) {
        nlohmann::json g = {{"cosine", a.cosine},
                            {"ssim", a.ssim},
                            {"lpips", a.lpips},
                            {"count", a.count}};
        for (const auto& [k, v] : a.extras) g[k] = v;
        groups[label] = g;
    }
    const nlohmann::json doc = {
        {"format", "pek-metrics-aggregate"},
        {"version", 1},
        {"experiment", experiment},
        {"extractor", extractor_name},
        {"samples", rows.size()},
        {"groups", groups},
    };
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_aggregate_json: cannot write " + path);
    os << doc.dump(2) << '\n';
}

MetricReport MetricReport::read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_csv: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("# pek-metrics", 0) != 0)
        throw std::runtime_error("read_csv: missing version header in " + path);
    if (!std::getline(is, line))
        throw std::runtime_error("read_csv: missing column header in " + path);
    MetricReport rep;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        MetricRow r;
        std::string f;
        std::getline(ss, r.sample_id, ',');
        std::getline(ss, r.key_label, ',');
        std::getline(ss, f, ',');
        r.cosine = std::stod(f);
        std::getline(ss, f, ',');
        r.ssim = std::stod(f);
        std::getline(ss, f, ',');
        r.lpips = std::stod(f);
        rep.rows.push_back(std::move(r));
    }
    rep.finalize();
    return rep;
}

MetricReport evaluate_pairs(const std::vector<PairSample>& pairs,
                            const models::FeatureExtractor& extractor,
                            const std::string& experiment) {
    if (pairs.empty()) throw std::invalid_argument("evaluate_pairs: empty list");
    MetricReport rep;
    rep.experiment = experiment;
    rep.extractor_name = extractor.name;
    rep.rows.reserve(pairs.size());
    for (const auto& p : pairs) {
        try {
            MetricRow r;
            r.sample_id = p.sample_id;
            r.key_label = p.key_label;
            r.cosine = cosine_similarity(p.original, p.candidate);
            r.ssim = ssim(p.original, p.candidate);
            r.lpips = lpips_distance(p.original, p.candidate, extractor);
            rep.rows.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw std::runtime_error("evaluate_pairs: sample " + p.sample_id +
                                     ": " + e.what());
        }
    }
    rep.finalize();
    return rep;
}

}  // namespace pek::metrics
