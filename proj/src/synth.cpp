#include "otalign/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace otalign {

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw std::invalid_argument("unknown split: " + std::string(s));
}

std::vector<const DatasetItem*> Dataset::split_items(Split s) const {
  std::vector<const DatasetItem*> out;
  for (const auto& it : items)
    if (it.split == s) out.push_back(&it);
  return out;
}

std::vector<std::string> generate_vocab(int size, int len_min, int len_max,
                                        std::string_view alphabet, Rng rng) {
  if (size < 1 || len_min < 1 || len_max < len_min || alphabet.empty())
    throw std::invalid_argument("generate_vocab: bad arguments");
  std::vector<std::string> vocab;
  std::set<std::string> seen;
  while (static_cast<int>(vocab.size()) < size) {
    const int len = len_min + static_cast<int>(rng.bounded(
                        static_cast<std::uint64_t>(len_max - len_min + 1)));
    std::string w(static_cast<std::size_t>(len), ' ');
    for (char& c : w) c = alphabet[rng.bounded(alphabet.size())];
    if (seen.insert(w).second) vocab.push_back(std::move(w));
  }
  return vocab;
}

std::vector<std::string> sample_corpus(const CorpusSpec& spec) {
  if (spec.vocab.empty()) throw std::invalid_argument("sample_corpus: empty vocab");
  if (spec.n_tokens < 1) throw std::invalid_argument("sample_corpus: n_tokens < 1");
  if (spec.zipf_s < 0.0) throw std::invalid_argument("sample_corpus: zipf_s < 0");

  std::vector<double> cdf(spec.vocab.size());
  double acc = 0.0;
  for (std::size_t r = 0; r < spec.vocab.size(); ++r) {
    acc += std::pow(static_cast<double>(r + 1), -spec.zipf_s);
    cdf[r] = acc;
  }
  for (double& v : cdf) v /= acc;

  Rng rng = Rng(spec.seed).fork("corpus");
  std::vector<std::string> tokens;
  tokens.reserve(static_cast<std::size_t>(spec.n_tokens));
  for (int i = 0; i < spec.n_tokens; ++i) {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const std::size_t idx = std::min<std::size_t>(
        static_cast<std::size_t>(it - cdf.begin()), spec.vocab.size() - 1);
    tokens.push_back(spec.vocab[idx]);
  }
  return tokens;
}

std::array<std::uint8_t, 8> glyph_rows(char c) {
  if (c < 'a' || c > 'z')
    throw std::invalid_argument(std::string("no glyph for character '") + c + "'");
  // Five stroke primitives on the 8x8 grid; each letter enables the subset
  // given by the bits of (index + 1), so all 26 bitmaps are distinct.
  const int mask = (c - 'a') + 1;
  std::array<std::uint8_t, 8> rows{};
  auto set_px = [&](int r, int col) { rows[r] |= static_cast<std::uint8_t>(1u << col); };
  if (mask & 1)  // top bar
    for (int col = 1; col <= 6; ++col) set_px(0, col);
  if (mask & 2)  // bottom bar
    for (int col = 1; col <= 6; ++col) set_px(7, col);
  if (mask & 4)  // left stem
    for (int r = 1; r <= 6; ++r) set_px(r, 0);
  if (mask & 8)  // right stem
    for (int r = 1; r <= 6; ++r) set_px(r, 7);
  if (mask & 16)  // diagonal
    for (int r = 1; r <= 6; ++r) set_px(r, r);
  return rows;
}

namespace {

struct SmallBitmap {
  int h = 0, w = 0;
  std::vector<std::uint8_t> px;
  std::uint8_t at(int r, int c) const {
    if (r < 0 || r >= h || c < 0 || c >= w) return 0;
    return px[static_cast<std::size_t>(r) * w + c];
  }
  void set(int r, int c) {
    if (r >= 0 && r < h && c >= 0 && c < w)
      px[static_cast<std::size_t>(r) * w + c] = 1;
  }
};

SmallBitmap compose_word(const std::string& word) {
  const int n = static_cast<int>(word.size());
  SmallBitmap bm;
  bm.h = 8;
  bm.w = 9 * n - 1;  // 8 px per glyph, 1 px gap
  bm.px.assign(static_cast<std::size_t>(bm.h) * bm.w, 0);
  for (int i = 0; i < n; ++i) {
    const auto rows = glyph_rows(word[static_cast<std::size_t>(i)]);
    for (int r = 0; r < 8; ++r)
      for (int col = 0; col < 8; ++col)
        if (rows[r] & (1u << col)) bm.set(r, 9 * i + col);
  }
  return bm;
}

void dilate(SmallBitmap& bm) {
  SmallBitmap out = bm;
  for (int r = 0; r < bm.h; ++r)
    for (int c = 0; c < bm.w; ++c)
      if (bm.at(r, c)) {
        out.set(r, c + 1);
        out.set(r + 1, c);
      }
  bm = std::move(out);
}

double bilinear(const SmallBitmap& bm, double y, double x) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0, fx = x - x0;
  return (1 - fy) * ((1 - fx) * bm.at(y0, x0) + fx * bm.at(y0, x0 + 1)) +
         fy * ((1 - fx) * bm.at(y0 + 1, x0) + fx * bm.at(y0 + 1, x0 + 1));
}

}  // namespace

WordImage render_word(const std::string& word, const RenderSpec& spec,
                      std::uint64_t instance_seed) {
  if (word.empty()) throw std::invalid_argument("render_word: empty word");
  SmallBitmap bm = compose_word(word);

  Rng rng = Rng(spec.seed).fork("render").fork(instance_seed);
  const double shear = rng.uniform(-spec.shear_max, spec.shear_max);
  const double dy = rng.uniform(-spec.offset_max, spec.offset_max);
  if (spec.thickness_jitter && rng.uniform() < 0.5) dilate(bm);

  // Fit into the canvas with a 2 px margin so jitter never clips.
  const double scale =
      std::min((kCanonicalHeight - 4.0) / bm.h, (kCanonicalWidth - 4.0) / bm.w);
  const double r0 = (kCanonicalHeight - bm.h * scale) / 2.0 + dy;
  const double c0 = (kCanonicalWidth - bm.w * scale) / 2.0;
  const double mid = (kCanonicalHeight - 1) / 2.0;

  WordImage img;
  img.truth = word;
  img.pixels.assign(static_cast<std::size_t>(kCanonicalHeight) * kCanonicalWidth, 0.0);
  for (int r = 0; r < kCanonicalHeight; ++r) {
    const double shift = shear * (r - mid) / mid;
    const double sy = (r + 0.5 - r0) / scale - 0.5;
    for (int c = 0; c < kCanonicalWidth; ++c) {
      const double sx = (c + 0.5 - c0 - shift) / scale - 0.5;
      img.at(r, c) = bilinear(bm, sy, sx);
    }
  }

  if (spec.noise_sigma > 0.0) {
    for (double& v : img.pixels)
      v = std::clamp(v + spec.noise_sigma * rng.normal(), 0.0, 1.0);
  }
  return img;
}

namespace {

std::array<int, 3> split_sizes(int n, std::array<double, 3> fractions) {
  double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
  std::array<int, 3> sizes{};
  std::array<double, 3> frac{};
  int assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double q = fractions[k] * n;
    sizes[k] = static_cast<int>(std::floor(q));
    frac[k] = q - sizes[k];
    assigned += sizes[k];
  }
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (frac[a] != frac[b]) return frac[a] > frac[b];
    return a < b;
  });
  for (int k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

}  // namespace

Dataset gen_dataset(const CorpusSpec& corpus, const RenderSpec& render,
                    std::array<double, 3> fractions, std::uint64_t split_seed) {
  const auto tokens = sample_corpus(corpus);
  const int n = static_cast<int>(tokens.size());
  const auto sizes = split_sizes(n, fractions);

  // Hash order over ids decides who lands in which split.
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<std::uint64_t> key(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    key[static_cast<std::size_t>(i)] =
        splitmix64(split_seed ^ splitmix64(static_cast<std::uint64_t>(i) + 1));
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    if (key[a] != key[b]) return key[a] < key[b];
    return a < b;
  });
  std::vector<Split> split_of(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const Split s = k < sizes[0]                ? Split::Train
                    : k < sizes[0] + sizes[1]   ? Split::Val
                                                : Split::Test;
    split_of[static_cast<std::size_t>(ids[static_cast<std::size_t>(k)])] = s;
  }

  Dataset ds;
  ds.items.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    DatasetItem item;
    item.id = i;
    item.split = split_of[static_cast<std::size_t>(i)];
    item.image = render_word(tokens[static_cast<std::size_t>(i)], render,
                             static_cast<std::uint64_t>(i));
    quantize_u8(item.image);
    ds.items.push_back(std::move(item));
  }

  ds.manifest = {
      {"corpus",
       {{"vocab", corpus.vocab},
        {"zipf_s", corpus.zipf_s},
        {"n_tokens", corpus.n_tokens},
        {"seed", corpus.seed}}},
      {"render",
       {{"shear_max", render.shear_max},
        {"offset_max", render.offset_max},
        {"noise_sigma", render.noise_sigma},
        {"thickness_jitter", render.thickness_jitter},
        {"seed", render.seed}}},
      {"split", {{"fractions", fractions}, {"seed", split_seed}}},
      {"format",
       {{"image", "pgm-p5"},
        {"canonical", {kCanonicalHeight, kCanonicalWidth}}}}};
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir, bool force) {
  namespace fs = std::filesystem;
  if (fs::exists(dir / "manifest.json") && !force)
    throw std::runtime_error("dataset already exists at " + dir.string() +
                             " (use --force to overwrite)");
  fs::create_directories(dir / "images");

  std::ofstream mf(dir / "manifest.json");
  mf << ds.manifest.dump(2) << "\n";

  std::ofstream labels(dir / "labels.tsv");
  for (const auto& item : ds.items) {
    labels << item.id << "\t" << to_string(item.split) << "\t"
           << item.image.truth << "\n";
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.pgm", item.id);
    write_pgm(dir / "images" / name, item.image);
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw std::runtime_error("no dataset at " + dir.string());
  Dataset ds;
  mf >> ds.manifest;

  std::ifstream labels(dir / "labels.tsv");
  if (!labels) throw std::runtime_error("missing labels.tsv in " + dir.string());
  std::string line;
  while (std::getline(labels, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id_str, split_str, truth;
    std::getline(ss, id_str, '\t');
    std::getline(ss, split_str, '\t');
    std::getline(ss, truth, '\t');
    DatasetItem item;
    item.id = std::stoi(id_str);
    item.split = split_from_string(split_str);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.pgm", item.id);
    item.image = read_pgm(dir / "images" / name);
    item.image.truth = truth;
    ds.items.push_back(std::move(item));
  }
  std::sort(ds.items.begin(), ds.items.end(),
            [](const DatasetItem& a, const DatasetItem& b) { return a.id < b.id; });
  return ds;
}

}  // namespace otalign
