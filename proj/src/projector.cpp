#include "otalign/projector.hpp"

#include <cmath>
#include <stdexcept>

#include "otalign/serialize.hpp"

namespace otalign {

void ProjectorConfig::validate() const {
  if (in_dim < 1 || hidden < 1 || out_dim < 1)
    throw std::invalid_argument("projector config: nonpositive dimension");
}

ProjectorParams ProjectorParams::init(const ProjectorConfig& cfg, Rng rng) {
  cfg.validate();
  ProjectorParams p;
  p.cfg = cfg;
  p.w1 = Mat(cfg.hidden, cfg.in_dim);
  p.b1.assign(cfg.hidden, 0.0);
  p.w2 = Mat(cfg.hidden, cfg.hidden);
  p.b2.assign(cfg.hidden, 0.0);
  p.w3 = Mat(cfg.out_dim, cfg.hidden);
  p.b3.assign(cfg.out_dim, 0.0);
  auto fill = [&](Mat& m, int fan_in) {
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : m.a) v = rng.uniform(-a, a);
  };
  fill(p.w1, cfg.in_dim);
  fill(p.w2, cfg.hidden);
  fill(p.w3, cfg.hidden);
  return p;
}

std::size_t ProjectorParams::param_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size();
}

std::vector<double> ProjectorParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(param_count());
  for (const auto* v : {&w1.a, &b1, &w2.a, &b2, &w3.a, &b3})
    flat.insert(flat.end(), v->begin(), v->end());
  return flat;
}

void ProjectorParams::unflatten(std::span<const double> flat) {
  if (flat.size() != param_count())
    throw std::invalid_argument("projector unflatten: size mismatch");
  std::size_t off = 0;
  for (auto* v : {&w1.a, &b1, &w2.a, &b2, &w3.a, &b3}) {
    std::copy(flat.begin() + off, flat.begin() + off + v->size(), v->begin());
    off += v->size();
  }
}

std::vector<double> project(const ProjectorParams& params,
                            std::span<const double> z) {
  const auto& cfg = params.cfg;
  if (z.size() != static_cast<std::size_t>(cfg.in_dim))
    throw std::invalid_argument("project: input dimension mismatch");
  std::vector<double> h1(cfg.hidden), h2(cfg.hidden), out(cfg.out_dim);
  matvec(params.w1, z, h1);
  for (int i = 0; i < cfg.hidden; ++i) h1[i] = std::max(0.0, h1[i] + params.b1[i]);
  matvec(params.w2, h1, h2);
  for (int i = 0; i < cfg.hidden; ++i) h2[i] = std::max(0.0, h2[i] + params.b2[i]);
  matvec(params.w3, h2, out);
  for (int i = 0; i < cfg.out_dim; ++i) out[i] += params.b3[i];
  return out;
}

ProjectorActivations project_all(const ProjectorParams& params, const Mat& z_rows) {
  const auto& cfg = params.cfg;
  if (z_rows.cols != static_cast<std::size_t>(cfg.in_dim))
    throw std::invalid_argument("project_all: input dimension mismatch");
  ProjectorActivations acts;
  const std::size_t n = z_rows.rows;
  acts.h1 = Mat(n, cfg.hidden);
  acts.h2 = Mat(n, cfg.hidden);
  acts.out = Mat(n, cfg.out_dim);
  for (std::size_t i = 0; i < n; ++i) {
    matvec(params.w1, z_rows.row(i), acts.h1.row(i));
    for (int k = 0; k < cfg.hidden; ++k)
      acts.h1(i, k) = std::max(0.0, acts.h1(i, k) + params.b1[k]);
    matvec(params.w2, acts.h1.row(i), acts.h2.row(i));
    for (int k = 0; k < cfg.hidden; ++k)
      acts.h2(i, k) = std::max(0.0, acts.h2(i, k) + params.b2[k]);
    matvec(params.w3, acts.h2.row(i), acts.out.row(i));
    for (int k = 0; k < cfg.out_dim; ++k) acts.out(i, k) += params.b3[k];
  }
  return acts;
}

std::vector<double> projector_backprop(const ProjectorParams& params,
                                       const Mat& z_rows,
                                       const ProjectorActivations& acts,
                                       const Mat& grad_out) {
  const auto& cfg = params.cfg;
  if (grad_out.rows != z_rows.rows ||
      grad_out.cols != static_cast<std::size_t>(cfg.out_dim))
    throw std::invalid_argument("projector_backprop: gradient shape mismatch");

  Mat g_w1(cfg.hidden, cfg.in_dim), g_w2(cfg.hidden, cfg.hidden),
      g_w3(cfg.out_dim, cfg.hidden);
  std::vector<double> g_b1(cfg.hidden, 0.0), g_b2(cfg.hidden, 0.0),
      g_b3(cfg.out_dim, 0.0);
  std::vector<double> g_h2(cfg.hidden), g_h1(cfg.hidden);

  for (std::size_t i = 0; i < z_rows.rows; ++i) {
    const auto go = grad_out.row(i);
    for (int k = 0; k < cfg.out_dim; ++k) g_b3[k] += go[k];
    add_outer(g_w3, go, acts.h2.row(i));
    std::fill(g_h2.begin(), g_h2.end(), 0.0);
    matvec_t_add(params.w3, go, g_h2);
    for (int k = 0; k < cfg.hidden; ++k)
      if (acts.h2(i, k) <= 0.0) g_h2[k] = 0.0;

    for (int k = 0; k < cfg.hidden; ++k) g_b2[k] += g_h2[k];
    add_outer(g_w2, g_h2, acts.h1.row(i));
    std::fill(g_h1.begin(), g_h1.end(), 0.0);
    matvec_t_add(params.w2, g_h2, g_h1);
    for (int k = 0; k < cfg.hidden; ++k)
      if (acts.h1(i, k) <= 0.0) g_h1[k] = 0.0;

    for (int k = 0; k < cfg.hidden; ++k) g_b1[k] += g_h1[k];
    add_outer(g_w1, g_h1, z_rows.row(i));
  }

  std::vector<double> flat;
  flat.reserve(params.param_count());
  for (const auto* v : {&g_w1.a, &g_b1, &g_w2.a, &g_b2, &g_w3.a, &g_b3})
    flat.insert(flat.end(), v->begin(), v->end());
  return flat;
}

SupLossResult sup_loss(const ProjectorParams& params, const Mat& z_rows,
                       const std::vector<AlignedPair>& aligned,
                       const EmbeddingSpace& embedding) {
  if (aligned.empty()) throw std::invalid_argument("sup_loss: empty aligned set");
  if (embedding.dim != static_cast<std::size_t>(params.cfg.out_dim))
    throw std::invalid_argument("sup_loss: embedding dimension mismatch");

  const ProjectorActivations acts = project_all(params, z_rows);
  Mat grad_out(z_rows.rows, params.cfg.out_dim);
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(aligned.size());
  for (const auto& [row, word] : aligned) {
    if (word < 0 || static_cast<std::size_t>(word) >= embedding.points.rows)
      throw std::invalid_argument("sup_loss: word outside lexicon");
    const auto p = acts.out.row(row);
    const auto e = embedding.points.row(static_cast<std::size_t>(word));
    loss += sqdist(p, e) * inv;
    for (std::size_t k = 0; k < embedding.dim; ++k)
      grad_out(row, k) += 2.0 * (p[k] - e[k]) * inv;
  }
  return {loss, projector_backprop(params, z_rows, acts, grad_out)};
}

namespace {

// d<T,C>/d(projection row i) = sum_w 2 T_iw (p_i - e_w); entropic term has
// no projection dependence once the plan is fixed.
Mat fixed_plan_grad_out(const Mat& plan_t, const Mat& proj,
                        const EmbeddingSpace& embedding, double scale) {
  Mat grad(proj.rows, proj.cols);
  for (std::size_t i = 0; i < proj.rows; ++i) {
    double mass = 0.0;
    std::vector<double> te(proj.cols, 0.0);
    for (std::size_t w = 0; w < plan_t.cols; ++w) {
      const double t = plan_t(i, w);
      if (t == 0.0) continue;
      mass += t;
      const auto e = embedding.points.row(w);
      for (std::size_t k = 0; k < proj.cols; ++k) te[k] += t * e[k];
    }
    for (std::size_t k = 0; k < proj.cols; ++k)
      grad(i, k) = scale * 2.0 * (mass * proj(i, k) - te[k]);
  }
  return grad;
}

}  // namespace

OtLossResult ot_loss(const ProjectorParams& params, const Mat& z_rows,
                     const EmbeddingSpace& embedding,
                     std::span<const double> prior,
                     const SinkhornOptions& opts,
                     const std::vector<double>* warm_f,
                     const std::vector<double>* warm_g) {
  if (z_rows.rows == 0) throw std::invalid_argument("ot_loss: no descriptors");
  const ProjectorActivations acts = project_all(params, z_rows);
  const Mat cost = cost_matrix(acts.out, embedding);
  const std::vector<double> row_marginal(
      z_rows.rows, 1.0 / static_cast<double>(z_rows.rows));

  OtLossResult res;
  res.plan = sinkhorn(cost, row_marginal, prior, opts, warm_f, warm_g);
  res.converged = res.plan.converged;
  for (std::size_t k = 0; k < res.plan.t.a.size(); ++k) {
    const double t = res.plan.t.a[k];
    if (t > 0.0) {
      res.transport_term += t * cost.a[k];
      res.entropy_term += t * (std::log(t) - 1.0);
    }
  }
  res.value = res.transport_term + opts.epsilon * res.entropy_term;

  const Mat grad_out = fixed_plan_grad_out(res.plan.t, acts.out, embedding, 1.0);
  res.grad = projector_backprop(params, z_rows, acts, grad_out);
  return res;
}

ProjectorTrainResult train_projector(ProjectorParams& params, const Mat& z_rows,
                                     const std::vector<AlignedPair>& aligned,
                                     const EmbeddingSpace& embedding,
                                     std::span<const double> prior,
                                     const ProjectorTrainOptions& opts) {
  if (aligned.empty())
    throw std::invalid_argument("train_projector: empty aligned set");
  if (embedding.dim != static_cast<std::size_t>(params.cfg.out_dim))
    throw std::invalid_argument("train_projector: embedding dimension mismatch");

  Adam adam(params.param_count(), opts.adam);
  std::vector<double> w = params.flatten();
  const std::vector<double> row_marginal(
      z_rows.rows, 1.0 / static_cast<double>(z_rows.rows));
  const double inv_aligned = 1.0 / static_cast<double>(aligned.size());

  ProjectorTrainResult result;
  std::vector<double> warm_f, warm_g;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const ProjectorActivations acts = project_all(params, z_rows);

    double l_sup = 0.0, l_ot = 0.0;
    Mat grad_out(z_rows.rows, params.cfg.out_dim);
    if (opts.lambda_ot != 0.0) {
      const Mat cost = cost_matrix(acts.out, embedding);
      TransportPlan plan =
          sinkhorn(cost, row_marginal, prior, opts.sinkhorn,
                   warm_f.empty() ? nullptr : &warm_f,
                   warm_g.empty() ? nullptr : &warm_g);
      if (!plan.converged) ++result.sinkhorn_failures;
      l_ot = ot_objective(plan.t, cost, opts.sinkhorn.epsilon);
      grad_out = fixed_plan_grad_out(plan.t, acts.out, embedding, opts.lambda_ot);
      warm_f = std::move(plan.f);
      warm_g = std::move(plan.g);
    }
    for (const auto& [row, word] : aligned) {
      const auto p = acts.out.row(row);
      const auto e = embedding.points.row(static_cast<std::size_t>(word));
      l_sup += sqdist(p, e) * inv_aligned;
      for (std::size_t k = 0; k < embedding.dim; ++k)
        grad_out(row, k) += 2.0 * (p[k] - e[k]) * inv_aligned;
    }

    const double total = l_sup + opts.lambda_ot * l_ot;
    if (!std::isfinite(total))
      throw std::runtime_error("train_projector: non-finite loss, aborting");
    result.loss_trace.push_back(total);
    result.sup_trace.push_back(l_sup);
    result.ot_trace.push_back(l_ot);

    const std::vector<double> grad =
        projector_backprop(params, z_rows, acts, grad_out);
    adam.step(w, grad);
    params.unflatten(w);
  }
  result.warm_f = std::move(warm_f);
  result.warm_g = std::move(warm_g);
  return result;
}

void save_projector(const std::filesystem::path& path, const ProjectorParams& p) {
  nlohmann::json meta = {{"kind", "projector"},
                         {"in_dim", p.cfg.in_dim},
                         {"hidden", p.cfg.hidden},
                         {"out_dim", p.cfg.out_dim}};
  const std::vector<NamedArray> arrays = {
      {"w1", {p.w1.rows, p.w1.cols}, p.w1.a}, {"b1", {p.b1.size()}, p.b1},
      {"w2", {p.w2.rows, p.w2.cols}, p.w2.a}, {"b2", {p.b2.size()}, p.b2},
      {"w3", {p.w3.rows, p.w3.cols}, p.w3.a}, {"b3", {p.b3.size()}, p.b3}};
  write_param_file(path, arrays, meta);
}

ProjectorParams load_projector(const std::filesystem::path& path) {
  const ParamFile pf = read_param_file(path);
  if (pf.meta.value("kind", "") != "projector")
    throw std::runtime_error("not a projector checkpoint: " + path.string());
  ProjectorConfig cfg;
  cfg.in_dim = pf.meta.at("in_dim").get<int>();
  cfg.hidden = pf.meta.at("hidden").get<int>();
  cfg.out_dim = pf.meta.at("out_dim").get<int>();
  ProjectorParams p = ProjectorParams::init(cfg, Rng(0));
  auto load = [&](const char* name, std::vector<double>& dst) {
    const auto& a = pf.get(name);
    if (a.data.size() != dst.size())
      throw std::runtime_error(std::string("checkpoint shape mismatch for ") + name);
    dst = a.data;
  };
  load("w1", p.w1.a);
  load("b1", p.b1);
  load("w2", p.w2.a);
  load("b2", p.b2);
  load("w3", p.w3.a);
  load("b3", p.b3);
  return p;
}

}  // namespace otalign
