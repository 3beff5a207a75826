#include "pek/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pek/metrics.hpp"
#include "pek/pe.hpp"
#include "pek/rng.hpp"

namespace fs = std::filesystem;

namespace pek::surrogate {

std::vector<std::string> SurrogateManifest::seed_labels() const {
    std::set<std::string> s;
    for (const auto& r : records) s.insert(r.seed_label);
    return {s.begin(), s.end()};
}

std::map<std::string, int> SurrogateManifest::per_seed_counts() const {
    std::map<std::string, int> c;
    for (const auto& r : records) c[r.seed_label]++;
    return c;
}

std::vector<const PairRecord*> SurrogateManifest::split_records(
    const std::string& split) const {
    std::vector<const PairRecord*> out;
    for (const auto& r : records)
        if (r.split == split) out.push_back(&r);
    return out;
}

namespace {
constexpr char kManifestHeader[] = "pek-manifest\tv1";
}

void SurrogateManifest::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("manifest: cannot write " + path);
    os << kManifestHeader << '\n';
    for (const auto& r : records)
        os << r.pair_id << '\t' << r.orig_path << '\t' << r.enc_path << '\t'
           << r.seed_label << '\t' << r.dataset_tag << '\t' << r.split << '\n';
    os.close();

    nlohmann::json cache = {{"format", "pek-manifest-gen"},
                            {"version", 1},
                            {"shuffle_seed", shuffle_seed},
                            {"ssim", gen_ssim}};
    std::ofstream cs(path + ".gen.json");
    if (!cs) throw std::runtime_error("manifest: cannot write sidecar");
    cs << cache.dump(2) << '\n';
}

SurrogateManifest SurrogateManifest::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("manifest: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line != kManifestHeader)
        throw std::runtime_error("manifest: bad header in " + path);
    SurrogateManifest m;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        PairRecord r;
        if (!std::getline(ss, r.pair_id, '\t') ||
            !std::getline(ss, r.orig_path, '\t') ||
            !std::getline(ss, r.enc_path, '\t') ||
            !std::getline(ss, r.seed_label, '\t') ||
            !std::getline(ss, r.dataset_tag, '\t'))
            throw std::runtime_error("manifest: malformed row in " + path);
        std::getline(ss, r.split, '\t');
        m.records.push_back(std::move(r));
    }
    const std::string side = path + ".gen.json";
    if (fs::exists(side)) {
        std::ifstream cs(side);
        nlohmann::json cache = nlohmann::json::parse(cs);
        m.shuffle_seed = cache.value("shuffle_seed", 0ull);
        if (cache.contains("ssim"))
            m.gen_ssim =
                cache["ssim"].get<std::map<std::string, double>>();
    }
    return m;
}

std::uint64_t SurrogateManifest::content_hash() const {
    std::ostringstream os;
    os << kManifestHeader << '\n';
    for (const auto& r : records)
        os << r.pair_id << '\t' << r.orig_path << '\t' << r.enc_path << '\t'
           << r.seed_label << '\t' << r.dataset_tag << '\t' << r.split << '\n';
    const std::string s = os.str();
    return rng::fnv1a64(s);
}

void SurrogateManifest::verify_files(double tol) const {
    for (const auto& r : records) {
        const img::ImageTensor orig = img::load_image(r.orig_path);
        const img::ImageTensor enc = img::load_image(r.enc_path);
        const auto it = gen_ssim.find(r.pair_id);
        if (it == gen_ssim.end())
            throw std::runtime_error("manifest: no cached ssim for " +
                                     r.pair_id);
        const double now = metrics::ssim(enc, orig);
        if (std::abs(now - it->second) > tol)
            throw std::runtime_error("manifest: pair " + r.pair_id +
                                     " no longer matches its generation ssim");
    }
}

namespace {

PairRecord persist_pair(const img::ImageTensor& orig,
                        const img::ImageTensor& enc, const std::string& out_dir,
                        const std::string& pair_id,
                        const std::string& seed_label,
                        const std::string& dataset_tag) {
    fs::create_directories(out_dir);
    PairRecord r;
    r.pair_id = pair_id;
    r.orig_path = (fs::path(out_dir) / (pair_id + "_orig.png")).string();
    r.enc_path = (fs::path(out_dir) / (pair_id + "_enc.png")).string();
    r.seed_label = seed_label;
    r.dataset_tag = dataset_tag;
    img::save_image(orig, r.orig_path);
    img::save_image(enc, r.enc_path);
    return r;
}

}  // namespace

std::vector<PairRecord> generate_pairs(avih::SecretGan& gan,
                                       const models::FeatureExtractor& f,
                                       const std::vector<img::ImageTensor>& images,
                                       int n, const avih::AvihConfig& cfg,
                                       const std::string& out_dir,
                                       const std::string& dataset_tag,
                                       int max_skips, int batch_size) {
    if (static_cast<int>(images.size()) < n)
        throw std::invalid_argument("generate_pairs: source exhausted");
    std::vector<PairRecord> out;
    out.reserve(n);
    int skips = 0;
    int produced = 0, next_src = 0;
    while (produced < n) {
        const int want = std::min(batch_size, n - produced);
        if (next_src + want > static_cast<int>(images.size()))
            throw std::invalid_argument("generate_pairs: source exhausted");
        std::vector<img::ImageTensor> batch(images.begin() + next_src,
                                            images.begin() + next_src + want);
        next_src += want;
        std::vector<img::ImageTensor> enc;
        try {
            avih::AvihConfig c = cfg;
            c.rng_seed = cfg.rng_seed + produced;  // distinct init noise
            enc = avih::avih_encrypt_batch(batch, f, gan, c);
        } catch (const std::exception&) {
            skips += want;
            if (skips > max_skips)
                throw std::runtime_error(
                    "generate_pairs: too many divergent samples");
            continue;
        }
        for (int i = 0; i < want; ++i) {
            const std::string pair_id = dataset_tag + "-" + gan.seed_label +
                                        "-" + std::to_string(produced);
            out.push_back(persist_pair(batch[i], enc[i], out_dir, pair_id,
                                       gan.seed_label, dataset_tag));
            ++produced;
        }
    }
    return out;
}

SurrogateManifest assemble_dataset(
    const std::vector<std::vector<PairRecord>>& parts, double train_fraction,
    std::uint64_t shuffle_seed) {
    if (parts.empty()) throw std::invalid_argument("assemble_dataset: empty parts");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("assemble_dataset: fraction must be in (0,1)");
    SurrogateManifest m;
    m.shuffle_seed = shuffle_seed;
    std::set<std::string> seen;
    for (const auto& part : parts)
        for (const auto& r : part) {
            if (!seen.insert(r.pair_id).second)
                throw std::invalid_argument("assemble_dataset: duplicate pair id " +
                                            r.pair_id);
            m.records.push_back(r);
        }
    if (m.records.empty())
        throw std::invalid_argument("assemble_dataset: no records");

    rng::DetRng rng(shuffle_seed);
    rng.shuffle(m.records);

    // Stratified split by seed label.
    std::map<std::string, std::vector<PairRecord*>> by_label;
    for (auto& r : m.records) by_label[r.seed_label].push_back(&r);
    for (auto& [label, rs] : by_label) {
        const std::size_t n = rs.size();
        std::size_t n_train =
            static_cast<std::size_t>(std::floor(n * train_fraction));
        if (n >= 2) {
            n_train = std::max<std::size_t>(1, std::min(n_train, n - 1));
        } else {
            n_train = n;  // lone record goes to train
        }
        for (std::size_t i = 0; i < n; ++i)
            rs[i]->split = i < n_train ? "train" : "val";
    }

    // Cache generation-time ssim from the persisted files.
    for (const auto& r : m.records) {
        const img::ImageTensor o = img::load_image(r.orig_path);
        const img::ImageTensor e = img::load_image(r.enc_path);
        m.gen_ssim[r.pair_id] = metrics::ssim(e, o);
    }
    return m;
}

SurrogateManifest generate_traditional_pairs(
    Scheme scheme, const std::vector<std::string>& key_labels,
    const std::vector<img::ImageTensor>& images, int n_per_key, int block_size,
    const std::string& out_dir, const std::string& dataset_tag,
    double train_fraction, std::uint64_t shuffle_seed) {
    if (key_labels.empty())
        throw std::invalid_argument("generate_traditional_pairs: no keys");
    const std::size_t need =
        static_cast<std::size_t>(key_labels.size()) * n_per_key;
    if (images.size() < need)
        throw std::invalid_argument("generate_traditional_pairs: source exhausted");

    std::vector<std::vector<PairRecord>> parts;
    std::size_t src = 0;
    for (const auto& label : key_labels) {
        std::vector<PairRecord> part;
        part.reserve(n_per_key);
        pe::LeKey le_key;
        if (scheme == Scheme::le)
            le_key = pe::le_keygen(rng::seed_from_label(label), block_size);
        for (int i = 0; i < n_per_key; ++i, ++src) {
            const img::ImageTensor& orig = images[src];
            img::ImageTensor enc;
            if (scheme == Scheme::le) {
                enc = pe::le_encrypt(orig, le_key);
            } else {
                // Fresh key per image, derived from the label and index.
                const std::uint64_t s =
                    rng::seed_from_label(label + ":" + std::to_string(i));
                const pe::EtcKey k = pe::etc_keygen(
                    s, orig.height / block_size, orig.width / block_size,
                    block_size);
                enc = pe::etc_encrypt(orig, k);
            }
            const std::string pair_id =
                dataset_tag + "-" + label + "-" + std::to_string(i);
            part.push_back(
                persist_pair(orig, enc, out_dir, pair_id, label, dataset_tag));
        }
        parts.push_back(std::move(part));
    }
    SurrogateManifest m =
        assemble_dataset(parts, train_fraction, shuffle_seed);
    return m;
}

}  // namespace pek::surrogate
