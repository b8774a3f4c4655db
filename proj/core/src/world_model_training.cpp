#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "memoir/world_model.hpp"

namespace memoir::world {

namespace {

/// Trajectories padded to a common length with per-step validity masks.
struct Packed {
  Eigen::Index batch = 0;
  int steps = 0;
  Matrix instr;
  std::vector<Matrix> x;
  std::vector<Matrix> gamma;
  std::vector<Matrix> mask;
  Matrix pool;
  std::vector<std::vector<int>> positive;
};

Packed pack(const WorldModelConfig& cfg, std::span<const TrajectorySample> batch) {
  if (batch.empty()) throw TrainingError("elbo: empty batch");
  Packed p;
  p.batch = static_cast<Eigen::Index>(batch.size());
  std::size_t pool_size = 0;
  for (const auto& traj : batch) {
    if (traj.observations.size() < 2) throw TrainingError("elbo: trajectory shorter than 2 steps");
    if (traj.observations.size() != traj.gammas.size()) throw TrainingError("elbo: observation/gamma length mismatch");
    if (traj.instruction.size() != cfg.instr_dim) throw TrainingError("elbo: instruction dimension mismatch");
    p.steps = std::max(p.steps, static_cast<int>(traj.observations.size()));
    pool_size += traj.observations.size();
  }
  p.instr.resize(p.batch, cfg.instr_dim);
  p.pool.resize(static_cast<Eigen::Index>(pool_size), cfg.feat_dim);
  p.x.assign(static_cast<std::size_t>(p.steps), Matrix::Zero(p.batch, cfg.feat_dim));
  p.gamma.assign(static_cast<std::size_t>(p.steps), Matrix::Zero(p.batch, 1));
  p.mask.assign(static_cast<std::size_t>(p.steps), Matrix::Zero(p.batch, 1));
  p.positive.assign(static_cast<std::size_t>(p.steps), std::vector<int>(static_cast<std::size_t>(p.batch), 0));
  int next = 0;
  for (Eigen::Index b = 0; b < p.batch; ++b) {
    const auto& traj = batch[static_cast<std::size_t>(b)];
    p.instr.row(b) = traj.instruction.transpose();
    for (std::size_t t = 0; t < traj.observations.size(); ++t) {
      const Vector& x = traj.observations[t];
      if (x.size() != cfg.feat_dim) throw TrainingError("elbo: observation dimension mismatch");
      p.x[t].row(b) = x.transpose();
      p.gamma[t](b, 0) = traj.gammas[t];
      p.mask[t](b, 0) = 1.0;
      p.pool.row(next) = x.transpose();
      p.positive[t][static_cast<std::size_t>(b)] = next++;
    }
  }
  return p;
}

Var masked_sum(Graph& g, Var column, const Matrix& mask) { return tensor::sum(tensor::mul(column, g.constant(mask))); }

Var reward_loglik(Graph& g, const WorldModel& m, Var full, const Matrix& gamma) {
  Var diff = tensor::sub(m.reward(g, full), g.constant(gamma));
  return tensor::scale(tensor::square(diff), -0.5);
}

Var nce_rows(Graph& g, const WorldModel& m, Var full, Var pool, std::span<const int> positive) {
  return tensor::pick(tensor::log_softmax_rows(m.compatibility(g, full, pool)), positive);
}

Var kl_rows(const StateVars& q, const StateVars& p) {
  return tensor::gaussian_kl_rows(q.mean, q.log_std, p.mean, p.log_std);
}

const Matrix* noise_at(const std::vector<Matrix>& v, std::size_t i) { return i < v.size() ? &v[i] : nullptr; }

std::vector<StateVars> filter(Graph& g, const WorldModel& model, const Packed& p, Var instr, const ElboNoise& noise) {
  std::vector<StateVars> posts;
  posts.push_back(model.initial(g, p.batch));
  for (int t = 1; t <= p.steps; ++t) {
    const auto i = static_cast<std::size_t>(t - 1);
    posts.push_back(model.infer(g, posts.back(), g.constant(p.x[i]), instr, noise_at(noise.posterior, i)));
  }
  return posts;
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ElboNoise ElboNoise::sample(Rng& rng, Eigen::Index batch, int steps, int overshoot, int stoch_dim) {
  auto draw = [&] {
    Matrix m(batch, stoch_dim);
    for (Eigen::Index r = 0; r < batch; ++r) {
      for (Eigen::Index c = 0; c < stoch_dim; ++c) m(r, c) = rng.normal();
    }
    return m;
  };
  ElboNoise n;
  for (int t = 0; t < steps; ++t) n.posterior.push_back(draw());
  n.transition.resize(static_cast<std::size_t>(steps));
  for (int s = 0; s < steps; ++s) {
    for (int k = 0; k < overshoot; ++k) n.transition[static_cast<std::size_t>(s)].push_back(draw());
  }
  return n;
}

ElboNoise ElboNoise::zeros(Eigen::Index batch, int steps, int overshoot, int stoch_dim) {
  ElboNoise n;
  n.posterior.assign(static_cast<std::size_t>(steps), Matrix::Zero(batch, stoch_dim));
  n.transition.assign(static_cast<std::size_t>(steps),
                      std::vector<Matrix>(static_cast<std::size_t>(overshoot), Matrix::Zero(batch, stoch_dim)));
  return n;
}

Var nce_term(Graph& g, const WorldModel& model, Var states_full, Var pool, std::span<const int> positive) {
  if (pool.rows() == 0) throw TrainingError("nce_term: empty negative set");
  return tensor::mean(nce_rows(g, model, states_full, pool, positive));
}

ElboResult elbo_overshoot_loss(Graph& g, const WorldModel& model, std::span<const TrajectorySample> batch,
                               int overshoot, const ElboNoise& noise) {
  if (overshoot < 1) throw TrainingError("elbo: overshoot distance must be at least 1");
  const Packed p = pack(model.config(), batch);
  Var instr = g.constant(p.instr);
  Var pool = g.constant(p.pool);
  const std::vector<StateVars> posts = filter(g, model, p, instr, noise);

  // chains[s][k]: k-step open-loop prior launched from the posterior at s.
  std::vector<std::vector<StateVars>> chains(static_cast<std::size_t>(p.steps) + 1);
  auto chain = [&](int s, int k) -> const StateVars& {
    auto& c = chains[static_cast<std::size_t>(s)];
    if (c.empty()) c.push_back(posts[static_cast<std::size_t>(s)]);
    while (static_cast<int>(c.size()) <= k) {
      const auto step = c.size() - 1;
      const Matrix* n = s < static_cast<int>(noise.transition.size())
                            ? noise_at(noise.transition[static_cast<std::size_t>(s)], step)
                            : nullptr;
      c.push_back(model.transition(g, c.back(), n));
    }
    return c[static_cast<std::size_t>(k)];
  };

  const double inv_batch = 1.0 / static_cast<double>(p.batch);
  std::optional<Var> loss;
  ElboTerms terms;
  auto accumulate = [&](Var term, double weight, double& slot) {
    Var scaled = tensor::scale(term, weight * inv_batch);
    slot += scaled.scalar();
    loss = loss ? tensor::add(*loss, scaled) : scaled;
  };

  for (int d = 1; d <= overshoot; ++d) {
    const double w = d == 1 ? 1.0 : 1.0 / static_cast<double>(overshoot - 1);
    for (int t = 1; t <= p.steps; ++t) {
      const auto i = static_cast<std::size_t>(t - 1);
      const int start = t - d + 1;
      if (start >= 1) {
        Var full = model.full_state(chain(start, d - 1));
        accumulate(masked_sum(g, reward_loglik(g, model, full, p.gamma[i]), p.mask[i]), -w, terms.reward);
        accumulate(masked_sum(g, nce_rows(g, model, full, pool, p.positive[i]), p.mask[i]), -w, terms.nce);
      }
      if (t - d >= 0) {
        accumulate(masked_sum(g, kl_rows(posts[static_cast<std::size_t>(t)], chain(t - d, d)), p.mask[i]), w,
                   terms.kl);
      }
    }
  }
  terms.total = loss->scalar();
  return ElboResult{*loss, terms};
}

ElboResult single_step_elbo_loss(Graph& g, const WorldModel& model, std::span<const TrajectorySample> batch,
                                 const ElboNoise& noise) {
  const Packed p = pack(model.config(), batch);
  Var instr = g.constant(p.instr);
  Var pool = g.constant(p.pool);
  const std::vector<StateVars> posts = filter(g, model, p, instr, noise);
  const double inv_batch = 1.0 / static_cast<double>(p.batch);

  Var reward = g.scalar(0.0);
  Var nce = g.scalar(0.0);
  Var kl = g.scalar(0.0);
  for (int t = 1; t <= p.steps; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const StateVars& q = posts[i];
    const StateVars prior = model.transition(g, posts[i - 1], nullptr);
    Var full = model.full_state(q);
    reward = tensor::add(reward, masked_sum(g, reward_loglik(g, model, full, p.gamma[i - 1]), p.mask[i - 1]));
    nce = tensor::add(nce, masked_sum(g, nce_rows(g, model, full, pool, p.positive[i - 1]), p.mask[i - 1]));
    kl = tensor::add(kl, masked_sum(g, kl_rows(q, prior), p.mask[i - 1]));
  }
  ElboTerms terms;
  terms.reward = -reward.scalar() * inv_batch;
  terms.nce = -nce.scalar() * inv_batch;
  terms.kl = kl.scalar() * inv_batch;
  Var elbo = tensor::sub(tensor::add(reward, nce), kl);
  Var loss = tensor::scale(elbo, -inv_batch);
  terms.total = loss.scalar();
  return ElboResult{loss, terms};
}

ElboTerms train_step(const WorldModel& model, ParamStore& params, std::span<const TrajectorySample> batch,
                     const tensor::AdamConfig& adam, Rng& noise_rng) {
  std::size_t steps = 0;
  for (const auto& t : batch) steps = std::max(steps, t.observations.size());
  const WorldModelConfig& cfg = model.config();
  const ElboNoise noise = ElboNoise::sample(noise_rng, static_cast<Eigen::Index>(batch.size()),
                                            static_cast<int>(steps), cfg.max_horizon, cfg.stoch_dim);
  Graph g(&params);
  const ElboResult r = elbo_overshoot_loss(g, model, batch, cfg.max_horizon, noise);
  const tensor::Gradients grads = g.backward(r.loss);
  params.adam_step(grads, adam, [](const std::string& name) { return WorldModel::owns(name); });
  return r.terms;
}

PretrainResult pretrain(const WorldModel& model, ParamStore params, std::span<const TrajectorySample> dataset,
                        const PretrainOptions& options) {
  if (dataset.empty()) throw TrainingError("pretrain: empty dataset");
  if (options.iterations < 0 || options.batch_size < 1) throw TrainingError("pretrain: invalid schedule");
  Rng rng(options.seed);
  Rng noise_rng = rng.fork(1);
  tensor::AdamConfig adam;
  adam.lr = options.lr;
  const std::size_t b = std::min(dataset.size(), static_cast<std::size_t>(options.batch_size));
  std::vector<std::size_t> order(dataset.size());
  std::vector<TrajectorySample> batch;
  PretrainResult out;
  for (int it = 0; it < options.iterations; ++it) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < b; ++i) std::swap(order[i], order[i + rng.index(order.size() - i)]);
    batch.clear();
    for (std::size_t i = 0; i < b; ++i) batch.push_back(dataset[order[i]]);
    ElboTerms terms;
    try {
      terms = train_step(model, params, batch, adam, noise_rng);
    } catch (const tensor::NonFiniteError& e) {
      throw DivergenceError("pretrain diverged at iteration " + std::to_string(it) + ": non-finite output of " +
                            e.op());
    }
    if (!params.all_finite()) {
      throw DivergenceError("pretrain diverged at iteration " + std::to_string(it) + ": non-finite parameters");
    }
    const bool last = it + 1 == options.iterations;
    if (options.log_every <= 1 || it % options.log_every == 0 || last) out.curve.push_back({it, terms});
  }
  out.params = std::move(params);
  return out;
}

std::vector<TrajectorySample> expert_trajectories(const Tour& tour, Rng& rng, int per_episode) {
  std::vector<TrajectorySample> out;
  const SceneGraph& scene = *tour.scene;
  for (const Episode& ep : tour.episodes) {
    for (int k = 0; k < per_episode; ++k) {
      TrajectorySample s;
      s.instruction = ep.instruction;
      for (ViewpointId v : sample_expert_path(scene, ep.start, ep.goal, rng)) {
        s.observations.push_back(scene.pooled(v));
        s.gammas.push_back(scene.distance(v, ep.goal));
      }
      if (s.observations.size() >= 2) out.push_back(std::move(s));
    }
  }
  return out;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream os;
  os << "iter,total,reward,nce,kl\n";
  for (const auto& c : curve) {
    os << c.iteration << ',' << number(c.terms.total) << ',' << number(c.terms.reward) << ','
       << number(c.terms.nce) << ',' << number(c.terms.kl) << '\n';
  }
  return os.str();
}

}  // namespace memoir::world
