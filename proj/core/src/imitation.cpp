#include "memoir/imitation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace memoir {

namespace {

int candidate_index(const std::vector<Action>& candidates, const Action& target) {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] == target) return static_cast<int>(i);
  }
  return -1;
}

void add_into(tensor::Gradients& total, const tensor::Gradients& g) {
  for (const auto& [name, grad] : g) {
    auto it = total.find(name);
    if (it == total.end()) {
      total.emplace(name, grad);
    } else {
      it->second += grad;
    }
  }
}

}  // namespace

ImitationResult train_imitation(const std::vector<Tour>& tours, const Agent& agent, tensor::ParamStore params,
                                const ImitationOptions& options) {
  if (tours.empty()) throw world::TrainingError("train_imitation: no tours");
  Rng rng(options.seed);
  Rng order_rng = rng.fork(1);
  Rng wm_rng = rng.fork(2);
  tensor::AdamConfig adam;
  adam.lr = options.lr;
  const auto filter = [&](const std::string& name) {
    return nav::NavModel::owns(name) || (!options.freeze_world_model && world::WorldModel::owns(name));
  };

  ImitationResult out;
  std::vector<std::size_t> order(tours.size());
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.index(i)]);

    double loss_sum = 0.0;
    int decisions = 0;
    int agreed = 0;
    for (std::size_t t : order) {
      const Tour& tour = tours[t];
      Rng tour_rng = rng.fork(1000 + static_cast<std::uint64_t>(epoch) * 100003ULL + t);
      HybridMemory memory;
      for (std::size_t e = 0; e < tour.episodes.size(); ++e) {
        tensor::Gradients grads;
        int supervised = 0;
        NavigateOptions nav_options;
        nav_options.mode = options.mode;
        nav_options.compute_expert = true;
        nav_options.policy = [&](const DecisionContext& ctx) {
          tensor::Graph g(&params);
          nav::NavForward f = agent.policy().forward(g, ctx.inputs);
          Decision d;
          d.scores = f.scores;
          const Action greedy = nav::select_action(f.scores.candidates, f.scores.final);
          const int target = ctx.expert ? candidate_index(f.scores.candidates, *ctx.expert) : -1;
          if (target >= 0) {
            tensor::Var lsm = tensor::log_softmax_rows(f.logits, &f.mask);
            const std::array<int, 1> idx{target};
            tensor::Var loss = tensor::neg(tensor::pick(lsm, idx));
            try {
              add_into(grads, g.backward(loss));
            } catch (const tensor::NonFiniteError& err) {
              throw world::DivergenceError("train_imitation diverged: non-finite output of " + err.op());
            }
            loss_sum += loss.scalar();
            ++supervised;
            ++decisions;
            if (greedy == *ctx.expert) ++agreed;
          }
          d.action = options.teacher_forcing && ctx.expert ? *ctx.expert : greedy;
          return d;
        };
        navigate_episode(*tour.scene, tour.episodes[e], tour.id, static_cast<int>(e), memory, agent, params, tour_rng,
                         nav_options);
        if (supervised > 0) {
          for (auto& [name, grad] : grads) grad /= static_cast<double>(supervised);
          if (!options.freeze_world_model) {
            Rng sample_rng = wm_rng.fork(static_cast<std::uint64_t>(e));
            Tour single{tour.scene, {tour.episodes[e]}, tour.id};
            const auto batch = world::expert_trajectories(single, sample_rng, 2);
            tensor::Graph g(&params);
            const world::ElboNoise noise = world::ElboNoise::sample(
                wm_rng, static_cast<Eigen::Index>(batch.size()),
                static_cast<int>(std::max_element(batch.begin(), batch.end(),
                                                  [](const auto& a, const auto& b) {
                                                    return a.observations.size() < b.observations.size();
                                                  })
                                     ->observations.size()),
                agent.config().world.max_horizon, agent.config().world.stoch_dim);
            const world::ElboResult r =
                world::elbo_overshoot_loss(g, agent.world(), batch, agent.config().world.max_horizon, noise);
            add_into(grads, g.backward(r.loss));
          }
          params.adam_step(grads, adam, filter);
          if (!params.all_finite()) throw world::DivergenceError("train_imitation diverged: non-finite parameters");
        }
      }
    }
    ImitationCurvePoint point;
    point.epoch = epoch;
    point.decisions = decisions;
    point.loss = decisions ? loss_sum / decisions : 0.0;
    point.agreement = decisions ? static_cast<double>(agreed) / decisions : 0.0;
    out.curve.push_back(point);
  }
  out.params = std::move(params);
  return out;
}

double expert_agreement(const std::vector<Tour>& tours, const Agent& agent, const tensor::ParamStore& params,
                        MemoryMode mode, std::uint64_t seed) {
  Rng rng(seed);
  int decisions = 0;
  int agreed = 0;
  for (std::size_t t = 0; t < tours.size(); ++t) {
    Rng tour_rng = rng.fork(t);
    NavigateOptions nav_options;
    nav_options.mode = mode;
    nav_options.compute_expert = true;
    nav_options.policy = [&](const DecisionContext& ctx) {
      Decision d;
      d.scores = agent.policy().score(params, ctx.inputs);
      const Action greedy = nav::select_action(d.scores.candidates, d.scores.final);
      if (ctx.expert) {
        ++decisions;
        if (greedy == *ctx.expert) ++agreed;
      }
      d.action = ctx.expert ? *ctx.expert : greedy;
      return d;
    };
    navigate_tour(tours[t], agent, params, tour_rng, nav_options);
  }
  return decisions ? static_cast<double>(agreed) / decisions : 0.0;
}

}  // namespace memoir
