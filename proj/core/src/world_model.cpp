#include "memoir/world_model.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace memoir::world {

namespace {

using tensor::FeedForward;
using tensor::GRUCell;
using tensor::Linear;

struct Modules {
  GRUCell gru;
  Linear post_in;
  FeedForward post_head;
  FeedForward prior_head;
  Linear psi_s;
  Linear psi_o;
  FeedForward reward;
};

Modules modules(const WorldModelConfig& c) {
  const int s = c.state_dim();
  return Modules{
      GRUCell{"wm.gru", c.stoch_dim, c.hidden_dim},
      Linear{"wm.post_in", c.feat_dim + c.instr_dim, 3 * c.hidden_dim, false},
      FeedForward{"wm.post_head", c.hidden_dim + c.feat_dim, c.mlp_dim, 2 * c.stoch_dim},
      FeedForward{"wm.prior_head", c.hidden_dim, c.mlp_dim, 2 * c.stoch_dim},
      Linear{"wm.psi_s", s, c.embed_dim},
      Linear{"wm.psi_o", c.feat_dim, c.embed_dim},
      FeedForward{"wm.reward", s, c.mlp_dim, 1},
  };
}

Matrix row(const Vector& v) { return v.transpose(); }

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string("world model: non-finite ") + what);
}

}  // namespace

Vector LatentState::full() const {
  Vector out(h.size() + z.size());
  out << h, z;
  return out;
}

void WorldModelConfig::validate() const {
  auto positive = [](int value, const char* field) {
    if (value <= 0) throw std::invalid_argument(std::string("world_model.") + field + " must be positive");
  };
  positive(feat_dim, "feat_dim");
  positive(instr_dim, "instr_dim");
  positive(hidden_dim, "hidden_dim");
  positive(stoch_dim, "stoch_dim");
  positive(embed_dim, "embed_dim");
  positive(mlp_dim, "mlp_dim");
  positive(max_horizon, "max_horizon");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("world_model.epsilon must be positive");
  }
  if (!(zeta > 0.0) || !std::isfinite(zeta)) throw std::invalid_argument("world_model.zeta must be positive");
}

WorldModel::WorldModel(WorldModelConfig config) : config_(config) { config_.validate(); }

void WorldModel::init(ParamStore& store, Rng& rng) const {
  const Modules m = modules(config_);
  m.gru.init(store, rng);
  m.post_in.init(store, rng);
  m.post_head.init(store, rng);
  m.prior_head.init(store, rng);
  m.psi_s.init(store, rng);
  m.psi_o.init(store, rng);
  m.reward.init(store, rng);
}

ParamStore WorldModel::init_params(std::uint64_t seed) const {
  ParamStore store;
  Rng rng(seed);
  init(store, rng);
  return store;
}

bool WorldModel::owns(const std::string& param_name) { return param_name.rfind("wm.", 0) == 0; }

StateVars WorldModel::head(Graph& g, Var h, Var stats, const Matrix* noise) const {
  const Eigen::Index z = config_.stoch_dim;
  StateVars out;
  out.h = h;
  out.mean = tensor::slice_cols(stats, 0, z);
  out.log_std = tensor::clamp(tensor::slice_cols(stats, z, z), tensor::kMinLogStd, tensor::kMaxLogStd);
  if (noise) {
    if (noise->rows() != h.rows() || noise->cols() != z) throw tensor::ShapeError("world model: noise shape");
    out.z = tensor::add(out.mean, tensor::mul(tensor::exp(out.log_std), g.constant(*noise)));
  } else {
    out.z = out.mean;
  }
  return out;
}

StateVars WorldModel::initial(Graph& g, Eigen::Index batch) const {
  StateVars s;
  s.h = g.constant(Matrix::Zero(batch, config_.hidden_dim));
  s.mean = g.constant(Matrix::Zero(batch, config_.stoch_dim));
  s.log_std = g.constant(Matrix::Zero(batch, config_.stoch_dim));
  s.z = s.mean;
  return s;
}

StateVars WorldModel::infer(Graph& g, const StateVars& prev, Var x, Var instr, const Matrix* noise) const {
  const Modules m = modules(config_);
  const std::array<Var, 2> obs_parts{x, instr};
  Var gate_in = m.post_in(g, tensor::concat_cols(obs_parts));
  Var h = m.gru(g, prev.z, prev.h, gate_in);
  const std::array<Var, 2> head_parts{h, x};
  return head(g, h, m.post_head(g, tensor::concat_cols(head_parts)), noise);
}

StateVars WorldModel::transition(Graph& g, const StateVars& prev, const Matrix* noise) const {
  const Modules m = modules(config_);
  Var h = m.gru(g, prev.z, prev.h);
  return head(g, h, m.prior_head(g, h), noise);
}

Var WorldModel::full_state(const StateVars& s) const {
  const std::array<Var, 2> parts{s.h, s.z};
  return tensor::concat_cols(parts);
}

Var WorldModel::state_embedding(Graph& g, Var full) const { return modules(config_).psi_s(g, full); }

Var WorldModel::obs_embedding(Graph& g, Var x) const { return modules(config_).psi_o(g, x); }

Var WorldModel::compatibility(Graph& g, Var full, Var x) const {
  Var es = tensor::normalize_rows(state_embedding(g, full));
  Var eo = tensor::normalize_rows(obs_embedding(g, x));
  return tensor::scale(tensor::matmul_nt(es, eo), 1.0 / config_.zeta);
}

Var WorldModel::reward(Graph& g, Var full) const { return modules(config_).reward(g, full); }

LatentState WorldModel::read(const StateVars& s) const {
  LatentState out;
  out.h = s.h.value().row(0).transpose();
  out.dist.mean = s.mean.value().row(0).transpose();
  out.dist.log_std = s.log_std.value().row(0).transpose();
  out.z = s.z.value().row(0).transpose();
  return out;
}

StateVars WorldModel::constant_state(Graph& g, const LatentState& s) const {
  if (s.h.size() != config_.hidden_dim || s.z.size() != config_.stoch_dim ||
      s.dist.mean.size() != config_.stoch_dim || s.dist.log_std.size() != config_.stoch_dim) {
    throw tensor::ShapeError("world model: latent state dimension mismatch");
  }
  require_finite(s.h, "state");
  require_finite(s.z, "state");
  StateVars out;
  out.h = g.constant(row(s.h));
  out.mean = g.constant(row(s.dist.mean));
  out.log_std = g.constant(row(s.dist.log_std));
  out.z = g.constant(row(s.z));
  return out;
}

LatentState WorldModel::initial_state() const {
  LatentState s;
  s.h = Vector::Zero(config_.hidden_dim);
  s.dist.mean = Vector::Zero(config_.stoch_dim);
  s.dist.log_std = Vector::Zero(config_.stoch_dim);
  s.z = Vector::Zero(config_.stoch_dim);
  return s;
}

LatentState WorldModel::infer(const ParamStore& p, const LatentState& prev, const Vector& x, const Vector& instr,
                              const Vector* noise) const {
  if (x.size() != config_.feat_dim) throw tensor::ShapeError("infer: observation dimension mismatch");
  if (instr.size() != config_.instr_dim) throw tensor::ShapeError("infer: instruction dimension mismatch");
  require_finite(x, "observation");
  require_finite(instr, "instruction");
  Graph g(&p);
  const Matrix n = noise ? Matrix(row(*noise)) : Matrix();
  return read(infer(g, constant_state(g, prev), g.constant(row(x)), g.constant(row(instr)), noise ? &n : nullptr));
}

LatentState WorldModel::transition(const ParamStore& p, const LatentState& prev, const Vector* noise) const {
  Graph g(&p);
  const Matrix n = noise ? Matrix(row(*noise)) : Matrix();
  return read(transition(g, constant_state(g, prev), noise ? &n : nullptr));
}

double WorldModel::compatibility(const ParamStore& p, const LatentState& state, const Vector& x) const {
  if (x.size() != config_.feat_dim) throw tensor::ShapeError("compatibility: observation dimension mismatch");
  Graph g(&p);
  return compatibility(g, g.constant(row(state.full())), g.constant(row(x))).scalar();
}

double WorldModel::predict_reward(const ParamStore& p, const LatentState& state) const {
  Graph g(&p);
  return reward(g, g.constant(row(state.full()))).scalar();
}

Vector WorldModel::state_embedding(const ParamStore& p, const LatentState& state) const {
  Graph g(&p);
  return state_embedding(g, g.constant(row(state.full()))).value().row(0).transpose();
}

Vector WorldModel::obs_embedding(const ParamStore& p, const Vector& x) const {
  Graph g(&p);
  return obs_embedding(g, g.constant(row(x))).value().row(0).transpose();
}

ImaginedTrajectory WorldModel::imagine(const ParamStore& p, const LatentState& start) const {
  return world::imagine(
      start, config_.max_horizon, config_.epsilon, [&](const LatentState& s) { return transition(p, s); },
      [&](const LatentState& s) { return predict_reward(p, s); });
}

ImaginedTrajectory imagine(const LatentState& start, int max_horizon, double epsilon,
                           const std::function<LatentState(const LatentState&)>& step,
                           const std::function<double(const LatentState&)>& reward) {
  if (max_horizon < 1) throw std::invalid_argument("imagine: max_horizon must be at least 1");
  ImaginedTrajectory out;
  LatentState current = start;
  for (int i = 0; i < max_horizon; ++i) {
    current = step(current);
    const double r = reward(current);
    out.states.push_back(current);
    out.predicted_rewards.push_back(r);
    if (r < epsilon) break;
  }
  return out;
}

}  // namespace memoir::world
