#include "otalign/recognizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "otalign/serialize.hpp"

namespace otalign {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logadd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

int Alphabet::class_of(char c) const {
  const auto pos = symbols.find(c);
  if (pos == std::string::npos)
    throw std::invalid_argument(std::string("character '") + c + "' outside alphabet");
  return static_cast<int>(pos) + 1;
}

char Alphabet::symbol_of(int cls) const {
  if (cls < 1 || cls > static_cast<int>(symbols.size()))
    throw std::invalid_argument("symbol_of: class out of range");
  return symbols[static_cast<std::size_t>(cls - 1)];
}

void RecognizerConfig::validate() const {
  if (hidden < 1 || descriptor_dim < 1 || window < 1 || stride < 1)
    throw std::invalid_argument("recognizer config: nonpositive dimension");
  if (band < 1 || kCanonicalHeight % band != 0)
    throw std::invalid_argument("recognizer config: band must divide image height");
  if (window > kCanonicalWidth)
    throw std::invalid_argument("recognizer config: window exceeds image width");
  if (alphabet.symbols.empty())
    throw std::invalid_argument("recognizer config: empty alphabet");
  if (std::set<char>(alphabet.symbols.begin(), alphabet.symbols.end()).size() !=
      alphabet.symbols.size())
    throw std::invalid_argument("recognizer config: duplicate alphabet symbols");
  phoc.validate();
}

RecognizerParams RecognizerParams::init(const RecognizerConfig& cfg, Rng rng) {
  cfg.validate();
  RecognizerParams p;
  p.cfg = cfg;
  const int F = cfg.feature_dim(), H = cfg.hidden, K = cfg.alphabet.num_classes();
  const int D = cfg.descriptor_dim, P = cfg.phoc.dim();
  p.w_enc = Mat(H, F);
  p.b_enc.assign(H, 0.0);
  p.w_cls = Mat(K, H);
  p.b_cls.assign(K, 0.0);
  p.w_desc = Mat(D, H);
  p.w_phoc = Mat(P, D);
  p.b_phoc.assign(P, 0.0);

  auto fill = [&](Mat& m, int fan_in) {
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : m.a) v = rng.uniform(-a, a);
  };
  fill(p.w_enc, F);
  fill(p.w_cls, H);
  fill(p.w_desc, H);
  fill(p.w_phoc, D);
  return p;
}

std::size_t RecognizerParams::param_count() const {
  return w_enc.size() + b_enc.size() + w_cls.size() + b_cls.size() +
         w_desc.size() + w_phoc.size() + b_phoc.size();
}

std::vector<double> RecognizerParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(param_count());
  for (const auto* v : {&w_enc.a, &b_enc, &w_cls.a, &b_cls, &w_desc.a, &w_phoc.a, &b_phoc})
    flat.insert(flat.end(), v->begin(), v->end());
  return flat;
}

void RecognizerParams::unflatten(std::span<const double> flat) {
  if (flat.size() != param_count())
    throw std::invalid_argument("recognizer unflatten: size mismatch");
  std::size_t off = 0;
  for (auto* v : {&w_enc.a, &b_enc, &w_cls.a, &b_cls, &w_desc.a, &w_phoc.a, &b_phoc}) {
    std::copy(flat.begin() + off, flat.begin() + off + v->size(), v->begin());
    off += v->size();
  }
}

RecognizerForward forward(const RecognizerParams& params, const WordImage& img) {
  const auto& cfg = params.cfg;
  if (img.height != kCanonicalHeight || img.width != kCanonicalWidth)
    throw std::invalid_argument("forward: image is not canonical 32x128");

  const int T = cfg.frames(), F = cfg.feature_dim(), H = cfg.hidden;
  const int nb = cfg.bands_per_column(), K = cfg.alphabet.num_classes();

  // Per-column vertical band maxima collapse most of the vertical jitter.
  Mat colfeat(kCanonicalWidth, nb);
  for (int c = 0; c < kCanonicalWidth; ++c) {
    for (int b = 0; b < nb; ++b) {
      double hi = 0.0;
      for (int r = b * cfg.band; r < (b + 1) * cfg.band; ++r)
        hi = std::max(hi, img.at(r, c));
      colfeat(c, b) = hi;
    }
  }

  RecognizerForward o;
  o.features = Mat(T, F);
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < cfg.window; ++k) {
      const int c = t * cfg.stride + k;
      for (int b = 0; b < nb; ++b) o.features(t, k * nb + b) = colfeat(c, b);
    }

  o.hidden = Mat(T, H);
  o.logits = Mat(T, K);
  o.hidden_mean.assign(H, 0.0);
  for (int t = 0; t < T; ++t) {
    matvec(params.w_enc, o.features.row(t), o.hidden.row(t));
    for (int h = 0; h < H; ++h) {
      o.hidden(t, h) = std::tanh(o.hidden(t, h) + params.b_enc[h]);
      o.hidden_mean[h] += o.hidden(t, h);
    }
    matvec(params.w_cls, o.hidden.row(t), o.logits.row(t));
    for (int k = 0; k < K; ++k) o.logits(t, k) += params.b_cls[k];
  }
  for (double& v : o.hidden_mean) v /= static_cast<double>(T);

  o.z.assign(cfg.descriptor_dim, 0.0);
  matvec(params.w_desc, o.hidden_mean, o.z);

  o.phoc_pre.assign(cfg.phoc.dim(), 0.0);
  matvec(params.w_phoc, o.z, o.phoc_pre);
  o.phoc_pred.resize(o.phoc_pre.size());
  for (std::size_t i = 0; i < o.phoc_pre.size(); ++i) {
    o.phoc_pre[i] += params.b_phoc[i];
    o.phoc_pred[i] = sigmoid(o.phoc_pre[i]);
  }
  return o;
}

CtcResult ctc_loss(const Mat& logits, const std::string& target,
                   const Alphabet& alphabet) {
  const int T = static_cast<int>(logits.rows);
  const int K = static_cast<int>(logits.cols);
  if (K != alphabet.num_classes())
    throw std::invalid_argument("ctc_loss: logit width does not match alphabet");
  if (T < 1) throw std::invalid_argument("ctc_loss: no frames");

  const int U = static_cast<int>(target.size());
  const int S = 2 * U + 1;
  std::vector<int> lab(static_cast<std::size_t>(S), Alphabet::kBlank);
  for (int u = 0; u < U; ++u)
    lab[static_cast<std::size_t>(2 * u + 1)] = alphabet.class_of(target[u]);
  int repeats = 0;
  for (int u = 1; u < U; ++u) repeats += target[u] == target[u - 1];
  if (T < U + repeats)
    throw std::invalid_argument("ctc_loss: target infeasible for frame count");

  Mat lp(T, K);
  for (int t = 0; t < T; ++t) {
    double hi = kNegInf;
    for (int k = 0; k < K; ++k) hi = std::max(hi, logits(t, k));
    double s = 0.0;
    for (int k = 0; k < K; ++k) s += std::exp(logits(t, k) - hi);
    const double lse = hi + std::log(s);
    for (int k = 0; k < K; ++k) lp(t, k) = logits(t, k) - lse;
  }

  auto allow_skip = [&](int s) {
    return s >= 2 && lab[s] != Alphabet::kBlank && lab[s] != lab[s - 2];
  };

  Mat alpha(T, S, kNegInf), beta(T, S, kNegInf);
  alpha(0, 0) = lp(0, lab[0]);
  if (S > 1) alpha(0, 1) = lp(0, lab[1]);
  for (int t = 1; t < T; ++t)
    for (int s = 0; s < S; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = logadd(acc, alpha(t - 1, s - 1));
      if (allow_skip(s)) acc = logadd(acc, alpha(t - 1, s - 2));
      alpha(t, s) = acc + lp(t, lab[s]);
    }

  double log_z = alpha(T - 1, S - 1);
  if (S > 1) log_z = logadd(log_z, alpha(T - 1, S - 2));
  if (!std::isfinite(log_z))
    throw std::runtime_error("ctc_loss: no feasible alignment path");

  beta(T - 1, S - 1) = 0.0;
  if (S > 1) beta(T - 1, S - 2) = 0.0;
  for (int t = T - 2; t >= 0; --t)
    for (int s = 0; s < S; ++s) {
      double acc = beta(t + 1, s) + lp(t + 1, lab[s]);
      if (s + 1 < S) acc = logadd(acc, beta(t + 1, s + 1) + lp(t + 1, lab[s + 1]));
      if (s + 2 < S && allow_skip(s + 2))
        acc = logadd(acc, beta(t + 1, s + 2) + lp(t + 1, lab[s + 2]));
      beta(t, s) = acc;
    }

  CtcResult res;
  res.loss = -log_z;
  res.grad_logits = Mat(T, K);
  std::vector<double> post(static_cast<std::size_t>(K));
  for (int t = 0; t < T; ++t) {
    std::fill(post.begin(), post.end(), 0.0);
    for (int s = 0; s < S; ++s) {
      const double g = alpha(t, s) + beta(t, s) - log_z;
      if (g > -700.0) post[static_cast<std::size_t>(lab[s])] += std::exp(g);
    }
    for (int k = 0; k < K; ++k)
      res.grad_logits(t, k) = std::exp(lp(t, k)) - post[static_cast<std::size_t>(k)];
  }
  return res;
}

std::string ctc_greedy_decode(const Mat& logits, const Alphabet& alphabet) {
  std::string out;
  int prev = -1;
  for (std::size_t t = 0; t < logits.rows; ++t) {
    int best = 0;
    for (std::size_t k = 1; k < logits.cols; ++k)
      if (logits(t, k) > logits(t, static_cast<std::size_t>(best)))
        best = static_cast<int>(k);
    if (best != prev && best != Alphabet::kBlank)
      out += alphabet.symbol_of(best);
    prev = best;
  }
  return out;
}

PhocLoss phoc_loss(std::span<const double> pred, const PhocVector& truth) {
  if (pred.size() != truth.bits.size())
    throw std::invalid_argument("phoc_loss: length mismatch");
  constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
  const double n = static_cast<double>(pred.size());
  PhocLoss out;
  out.grad.assign(pred.size(), 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], lo, hi);
    const double y = static_cast<double>(truth.bits[i]);
    out.loss -= y * std::log(p) + (1.0 - y) * std::log1p(-p);
    if (pred[i] > lo && pred[i] < hi)
      out.grad[i] = (p - y) / (p * (1.0 - p)) / n;
  }
  out.loss /= n;
  return out;
}

namespace {

struct FlatOffsets {
  std::size_t w_enc, b_enc, w_cls, b_cls, w_desc, w_phoc, b_phoc, total;
  explicit FlatOffsets(const RecognizerConfig& cfg) {
    const std::size_t F = static_cast<std::size_t>(cfg.feature_dim());
    const std::size_t H = static_cast<std::size_t>(cfg.hidden);
    const std::size_t K = static_cast<std::size_t>(cfg.alphabet.num_classes());
    const std::size_t D = static_cast<std::size_t>(cfg.descriptor_dim);
    const std::size_t P = static_cast<std::size_t>(cfg.phoc.dim());
    w_enc = 0;
    b_enc = w_enc + H * F;
    w_cls = b_enc + H;
    b_cls = w_cls + K * H;
    w_desc = b_cls + K;
    w_phoc = w_desc + D * H;
    b_phoc = w_phoc + P * D;
    total = b_phoc + P;
  }
};

}  // namespace

double sample_loss_grad(const RecognizerParams& params, const WordImage& img,
                        const std::string& label, double lambda_phoc,
                        std::vector<double>& grad_accum, double grad_scale) {
  const auto& cfg = params.cfg;
  const FlatOffsets off(cfg);
  if (grad_accum.size() != off.total)
    throw std::invalid_argument("sample_loss_grad: gradient buffer size mismatch");

  const RecognizerForward o = forward(params, img);
  const CtcResult ctc = ctc_loss(o.logits, label, cfg.alphabet);

  double loss = ctc.loss;
  const int T = cfg.frames(), H = cfg.hidden, K = cfg.alphabet.num_classes();
  const int F = cfg.feature_dim(), D = cfg.descriptor_dim, P = cfg.phoc.dim();

  // PHOC branch: grad w.r.t. pre-sigmoid activations.
  std::vector<double> g_phoc_pre(static_cast<std::size_t>(P), 0.0);
  if (lambda_phoc != 0.0) {
    const PhocVector target = phoc_encode(label, cfg.phoc);
    const PhocLoss pl = phoc_loss(o.phoc_pred, target);
    loss += lambda_phoc * pl.loss;
    for (int j = 0; j < P; ++j) {
      const double s = o.phoc_pred[static_cast<std::size_t>(j)];
      g_phoc_pre[static_cast<std::size_t>(j)] =
          lambda_phoc * pl.grad[static_cast<std::size_t>(j)] * s * (1.0 - s);
    }
  }

  // Descriptor path back to the mean hidden state.
  std::vector<double> g_z(static_cast<std::size_t>(D), 0.0);
  matvec_t_add(params.w_phoc, g_phoc_pre, g_z);
  std::vector<double> g_hmean(static_cast<std::size_t>(H), 0.0);
  matvec_t_add(params.w_desc, g_z, g_hmean);

  std::vector<double> g_h(static_cast<std::size_t>(H));
  for (int t = 0; t < T; ++t) {
    // classifier grads and backprop into the hidden state
    for (int h = 0; h < H; ++h)
      g_h[static_cast<std::size_t>(h)] = g_hmean[static_cast<std::size_t>(h)] / T;
    for (int k = 0; k < K; ++k) {
      const double gl = ctc.grad_logits(t, k);
      grad_accum[off.b_cls + static_cast<std::size_t>(k)] += grad_scale * gl;
      const double* hrow = o.hidden.a.data() + static_cast<std::size_t>(t) * H;
      double* wrow = grad_accum.data() + off.w_cls + static_cast<std::size_t>(k) * H;
      for (int h = 0; h < H; ++h) {
        wrow[h] += grad_scale * gl * hrow[h];
        g_h[static_cast<std::size_t>(h)] += params.w_cls(k, h) * gl;
      }
    }
    // through tanh into the encoder
    for (int h = 0; h < H; ++h) {
      const double ht = o.hidden(t, h);
      const double gp = g_h[static_cast<std::size_t>(h)] * (1.0 - ht * ht);
      grad_accum[off.b_enc + static_cast<std::size_t>(h)] += grad_scale * gp;
      const double* xrow = o.features.a.data() + static_cast<std::size_t>(t) * F;
      double* wrow = grad_accum.data() + off.w_enc + static_cast<std::size_t>(h) * F;
      const double s = grad_scale * gp;
      for (int f = 0; f < F; ++f) wrow[f] += s * xrow[f];
    }
  }

  for (int d = 0; d < D; ++d) {
    const double gz = g_z[static_cast<std::size_t>(d)];
    double* wrow = grad_accum.data() + off.w_desc + static_cast<std::size_t>(d) * H;
    for (int h = 0; h < H; ++h)
      wrow[h] += grad_scale * gz * o.hidden_mean[static_cast<std::size_t>(h)];
  }
  for (int j = 0; j < P; ++j) {
    const double gp = g_phoc_pre[static_cast<std::size_t>(j)];
    grad_accum[off.b_phoc + static_cast<std::size_t>(j)] += grad_scale * gp;
    double* wrow = grad_accum.data() + off.w_phoc + static_cast<std::size_t>(j) * D;
    for (int d = 0; d < D; ++d)
      wrow[d] += grad_scale * gp * o.z[static_cast<std::size_t>(d)];
  }
  return loss;
}

std::vector<Batch> compose_batches(const std::vector<TrainSample>& aligned,
                                   const std::vector<TrainSample>& synthetic,
                                   double rho_syn, int batch_size, Rng& rng) {
  if (batch_size < 1) throw std::invalid_argument("compose_batches: batch_size < 1");
  if (rho_syn < 0.0 || rho_syn > 1.0)
    throw std::invalid_argument("compose_batches: rho_syn outside [0,1]");

  const int n_syn_per =
      std::min(batch_size, static_cast<int>(std::ceil(batch_size * rho_syn)));
  const int n_real_per = batch_size - n_syn_per;
  const bool pure_syn =
      aligned.empty() || (n_real_per == 0 && !synthetic.empty());
  const bool pure_real = synthetic.empty() || rho_syn == 0.0;

  std::vector<Batch> out;
  auto chunked = [&](const std::vector<TrainSample>& pool) {
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    for (std::size_t start = 0; start < idx.size(); start += batch_size) {
      Batch b;
      for (std::size_t k = start; k < std::min(idx.size(), start + batch_size); ++k)
        b.push_back(pool[idx[k]]);
      out.push_back(std::move(b));
    }
  };

  if (pure_syn) {
    if (synthetic.empty()) throw std::invalid_argument("compose_batches: no samples");
    chunked(synthetic);
    return out;
  }
  if (pure_real) {
    chunked(aligned);
    return out;
  }

  std::vector<std::size_t> idx(aligned.size());
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  for (std::size_t start = 0; start < idx.size(); start += n_real_per) {
    Batch b;
    for (std::size_t k = start; k < std::min(idx.size(), start + n_real_per); ++k)
      b.push_back(aligned[idx[k]]);
    for (int k = 0; k < n_syn_per; ++k)
      b.push_back(synthetic[rng.bounded(synthetic.size())]);
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<double> train_recognizer(RecognizerParams& params,
                                     const std::vector<TrainSample>& aligned,
                                     const std::vector<TrainSample>& synthetic,
                                     const RecognizerTrainOptions& opts) {
  if (aligned.empty() && synthetic.empty())
    throw std::invalid_argument("train_recognizer: no samples");
  if (opts.epochs < 0) throw std::invalid_argument("train_recognizer: bad epochs");

  Adam adam(params.param_count(), opts.adam);
  std::vector<double> w = params.flatten();
  std::vector<double> g(w.size());
  std::vector<double> trace;
  const Rng root(opts.seed);

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    Rng erng = root.fork("epoch").fork(static_cast<std::uint64_t>(epoch));
    const auto batches =
        compose_batches(aligned, synthetic, opts.rho_syn, opts.batch_size, erng);
    double epoch_loss = 0.0;
    for (const Batch& batch : batches) {
      std::fill(g.begin(), g.end(), 0.0);
      double batch_loss = 0.0;
      const double scale = 1.0 / static_cast<double>(batch.size());
      for (const TrainSample& s : batch)
        batch_loss += sample_loss_grad(params, *s.image, s.label,
                                       opts.lambda_phoc, g, scale);
      batch_loss *= scale;
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("train_recognizer: non-finite loss, aborting");
      adam.step(w, g);
      params.unflatten(w);
      epoch_loss += batch_loss;
    }
    trace.push_back(epoch_loss / static_cast<double>(batches.size()));
  }
  return trace;
}

void save_recognizer(const std::filesystem::path& path, const RecognizerParams& p) {
  const auto& cfg = p.cfg;
  nlohmann::json meta = {{"kind", "recognizer"},
                         {"hidden", cfg.hidden},
                         {"descriptor_dim", cfg.descriptor_dim},
                         {"window", cfg.window},
                         {"stride", cfg.stride},
                         {"band", cfg.band},
                         {"alphabet", cfg.alphabet.symbols},
                         {"phoc_levels", cfg.phoc.levels}};
  const std::vector<NamedArray> arrays = {
      {"w_enc", {p.w_enc.rows, p.w_enc.cols}, p.w_enc.a},
      {"b_enc", {p.b_enc.size()}, p.b_enc},
      {"w_cls", {p.w_cls.rows, p.w_cls.cols}, p.w_cls.a},
      {"b_cls", {p.b_cls.size()}, p.b_cls},
      {"w_desc", {p.w_desc.rows, p.w_desc.cols}, p.w_desc.a},
      {"w_phoc", {p.w_phoc.rows, p.w_phoc.cols}, p.w_phoc.a},
      {"b_phoc", {p.b_phoc.size()}, p.b_phoc}};
  write_param_file(path, arrays, meta);
}

RecognizerParams load_recognizer(const std::filesystem::path& path) {
  const ParamFile pf = read_param_file(path);
  if (pf.meta.value("kind", "") != "recognizer")
    throw std::runtime_error("not a recognizer checkpoint: " + path.string());
  RecognizerConfig cfg;
  cfg.hidden = pf.meta.at("hidden").get<int>();
  cfg.descriptor_dim = pf.meta.at("descriptor_dim").get<int>();
  cfg.window = pf.meta.at("window").get<int>();
  cfg.stride = pf.meta.at("stride").get<int>();
  cfg.band = pf.meta.at("band").get<int>();
  cfg.alphabet.symbols = pf.meta.at("alphabet").get<std::string>();
  cfg.phoc.alphabet = cfg.alphabet.symbols;
  pf.meta.at("phoc_levels").get_to(cfg.phoc.levels);

  RecognizerParams p = RecognizerParams::init(cfg, Rng(0));
  auto load = [&](const char* name, std::vector<double>& dst) {
    const auto& a = pf.get(name);
    if (a.data.size() != dst.size())
      throw std::runtime_error(std::string("checkpoint shape mismatch for ") + name);
    dst = a.data;
  };
  load("w_enc", p.w_enc.a);
  load("b_enc", p.b_enc);
  load("w_cls", p.w_cls.a);
  load("b_cls", p.b_cls);
  load("w_desc", p.w_desc.a);
  load("w_phoc", p.w_phoc.a);
  load("b_phoc", p.b_phoc);
  return p;
}

}  // namespace otalign
