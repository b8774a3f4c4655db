#include "memoir/nav_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "memoir/layers.hpp"

namespace memoir::nav {

namespace {

using tensor::FeedForward;
using tensor::Linear;

constexpr std::array<const char*, 3> kBranches{"nav.coarse", "nav.fine", "nav.hist"};

int type_index(const EpisodicGraph::Node& n) {
  switch (n.category) {
    case NodeCategory::Current: return 0;
    case NodeCategory::Visited: return 1;
    case NodeCategory::Frontier: return 2;
    case NodeCategory::Retrieved: return 3;
  }
  return 2;
}

Var gather_rows(Var column, const std::vector<Eigen::Index>& rows) {
  std::vector<Var> parts;
  parts.reserve(rows.size());
  for (Eigen::Index r : rows) parts.push_back(tensor::slice_rows(column, r, 1));
  return tensor::concat_rows(parts);
}

std::vector<double> column_values(Var v) {
  const Matrix& m = v.value();
  return std::vector<double>(m.data(), m.data() + m.size());
}

}  // namespace

void NavModelConfig::validate() const {
  auto positive = [](int value, const char* field) {
    if (value <= 0) throw std::invalid_argument(std::string("nav.") + field + " must be positive");
  };
  positive(feat_dim, "feat_dim");
  positive(state_dim, "state_dim");
  positive(model_dim, "model_dim");
  positive(ffn_dim, "ffn_dim");
  positive(instr_tokens, "instr_tokens");
  if (state_dim != feat_dim) throw std::invalid_argument("nav.state_dim must equal nav.feat_dim");
  if (!(zeta > 0.0)) throw std::invalid_argument("nav.zeta must be positive");
}

NavModel::NavModel(NavModelConfig config) : config_(config) { config_.validate(); }

bool NavModel::owns(const std::string& param_name) { return param_name.rfind("nav.", 0) == 0; }

void NavModel::init(ParamStore& store, Rng& rng) const {
  const int m = config_.model_dim;
  const int f = config_.feat_dim;
  Linear{"nav.text", f, m}.init(store, rng);
  for (const char* b : kBranches) {
    const std::string base = b;
    Linear{base + ".in", f, m}.init(store, rng);
    store.add(base + ".stop", tensor::glorot(rng, 1, m));
    for (const char* w : {".xq", ".xk", ".xv", ".sq", ".sk", ".sv"}) Linear{base + w, m, m, false}.init(store, rng);
    Linear{base + ".film", m, m}.init(store, rng, 0.5);
    Linear{base + ".align", config_.instr_tokens, m, false}.init(store, rng);
    Linear{base + ".align_stop", config_.instr_tokens, m, false}.init(store, rng);
    FeedForward{base + ".head", m, config_.ffn_dim, 1}.init(store, rng);
  }
  store.add("nav.coarse.type", tensor::glorot(rng, 4, m));
  store.add("nav.coarse.w_e", Matrix::Zero(1, 1));
  store.add("nav.coarse.b_e", Matrix::Zero(1, 1));
  store.add("nav.hist.s0", Matrix::Zero(1, 1));
  FeedForward{"nav.fuse", 3 * m, config_.ffn_dim, 3}.init(store, rng);
}

ParamStore NavModel::init_params(std::uint64_t seed) const {
  ParamStore store;
  Rng rng(seed);
  init(store, rng);
  return store;
}

TextTokens NavModel::text(Graph& g, const Vector& instruction) const {
  if (instruction.size() != config_.instr_dim()) throw tensor::ShapeError("nav: instruction dimension mismatch");
  const int f = config_.feat_dim;
  TextTokens out;
  out.raw.resize(config_.instr_tokens, f);
  for (int l = 0; l < config_.instr_tokens; ++l) out.raw.row(l) = instruction.segment(l * f, f).transpose();
  out.projected = Linear{"nav.text", f, config_.model_dim}(g, g.constant(out.raw));
  return out;
}

Var NavModel::tokens(Graph& g, const std::string& branch, Var rows, const Matrix& features, const Vector& here,
                     const Matrix& text) const {
  const int m = config_.model_dim;
  const int l = config_.instr_tokens;
  Var stop = tensor::add(g.param(branch + ".stop"),
                         Linear{branch + ".align_stop", l, m, false}(g, g.constant(alignment(here.transpose(), text))));
  if (features.rows() == 0) return stop;
  Var body = tensor::add(rows, Linear{branch + ".align", l, m, false}(g, g.constant(alignment(features, text))));
  const std::array<Var, 2> parts{stop, body};
  return tensor::concat_rows(parts);
}

Var NavModel::encode(Graph& g, const std::string& branch, Var tokens, Var text, std::optional<Var> bias) const {
  const int m = config_.model_dim;
  auto lin = [&](const char* suffix, Var x) { return Linear{branch + suffix, m, m, false}(g, x); };
  Var x = tensor::add(tokens, tensor::attention(lin(".xq", tokens), lin(".xk", text), lin(".xv", text)));
  Var film = Linear{branch + ".film", m, m}(g, tensor::mean_rows(text));
  x = tensor::add(x, tensor::mul_row(x, film));
  return tensor::add(x, tensor::attention(lin(".sq", x), lin(".sk", x), lin(".sv", x), bias));
}

CoarseOutput NavModel::coarse(Graph& g, const EpisodicGraph& graph, const TextTokens& text,
                              std::vector<ViewpointId> order) const {
  CoarseOutput out;
  out.nodes = order.empty() ? graph.ids() : std::move(order);
  const auto n = static_cast<Eigen::Index>(out.nodes.size());
  Matrix features(n, config_.feat_dim);
  Matrix types = Matrix::Zero(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& node = graph.node(out.nodes[static_cast<std::size_t>(i)]);
    features.row(i) = node.feature.transpose();
    types(i, type_index(node)) = 1.0;
  }
  Var nodes = tensor::add(Linear{"nav.coarse.in", config_.feat_dim, config_.model_dim}(g, g.constant(features)),
                          tensor::matmul(g.constant(types), g.param("nav.coarse.type")));
  const ViewpointId here = graph.current();
  const Vector here_feature = here >= 0 ? graph.node(here).feature : Vector::Zero(config_.feat_dim);
  Var tokens = this->tokens(g, "nav.coarse", nodes, features, here_feature, text.raw);

  Matrix e = Matrix::Zero(n + 1, n + 1);
  e.bottomRightCorner(n, n) = graph.hop_matrix(out.nodes);
  Var bias = tensor::add_scalar(tensor::mul_scalar(g.constant(e), g.param("nav.coarse.w_e")),
                                g.param("nav.coarse.b_e"));
  Var h = encode(g, "nav.coarse", tokens, text.projected, bias);
  out.scores = FeedForward{"nav.coarse.head", config_.model_dim, config_.ffn_dim, 1}(g, h);
  out.stop_token = tensor::slice_rows(h, 0, 1);
  return out;
}

FineOutput NavModel::fine(Graph& g, const Matrix& views, const TextTokens& text) const {
  if (views.cols() != config_.feat_dim || views.rows() == 0) throw tensor::ShapeError("nav: view matrix shape");
  Var v = Linear{"nav.fine.in", config_.feat_dim, config_.model_dim}(g, g.constant(views));
  const Vector pooled = views.colwise().mean().transpose();
  Var h = encode(g, "nav.fine", tokens(g, "nav.fine", v, views, pooled, text.raw), text.projected, std::nullopt);
  FineOutput out;
  out.scores = FeedForward{"nav.fine.head", config_.model_dim, config_.ffn_dim, 1}(g, h);
  out.stop_token = tensor::slice_rows(h, 0, 1);
  return out;
}

HistoryOutput NavModel::history(Graph& g, const EpisodicGraph& graph, const TextTokens& text) const {
  HistoryOutput out;
  for (ViewpointId id : graph.ids()) {
    const auto& node = graph.node(id);
    const bool own = node.category == NodeCategory::Current || node.category == NodeCategory::Visited;
    if (own || !node.states.empty()) out.nodes.push_back(id);
  }
  const auto n = static_cast<Eigen::Index>(out.nodes.size());
  out.fused.resize(n, config_.feat_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& node = graph.node(out.nodes[static_cast<std::size_t>(i)]);
    out.fused.row(i) = fuse_history(node.states, node.scores, node.feature, config_.zeta).transpose();
  }
  const ViewpointId here = graph.current();
  const Vector here_feature = here >= 0 ? graph.node(here).feature : Vector::Zero(config_.feat_dim);
  Var rows = n > 0 ? Linear{"nav.hist.in", config_.feat_dim, config_.model_dim}(g, g.constant(out.fused))
                   : g.constant(Matrix::Zero(0, config_.model_dim));
  Var h = encode(g, "nav.hist", tokens(g, "nav.hist", rows, out.fused, here_feature, text.raw), text.projected,
                 std::nullopt);
  out.scores = FeedForward{"nav.hist.head", config_.model_dim, config_.ffn_dim, 1}(g, h);
  out.stop_token = tensor::slice_rows(h, 0, 1);
  return out;
}

Var NavModel::fusion(Graph& g, Var fine_stop, Var coarse_stop, Var history_stop) const {
  const std::array<Var, 3> parts{fine_stop, coarse_stop, history_stop};
  Var logits = FeedForward{"nav.fuse", 3 * config_.model_dim, config_.ffn_dim, 3}(g, tensor::concat_cols(parts));
  return tensor::softmax_rows(logits);
}

NavForward NavModel::forward(Graph& g, const NavInputs& in) const {
  if (!in.graph) throw std::invalid_argument("nav: missing episodic graph");
  const EpisodicGraph& graph = *in.graph;
  const ViewpointId here = graph.current();
  if (here < 0) throw std::invalid_argument("nav: episodic graph has no current node");

  const TextTokens text = this->text(g, in.instruction);
  const CoarseOutput c = coarse(g, graph, text);
  const FineOutput f = fine(g, in.views, text);
  const HistoryOutput h = history(g, graph, text);
  Var sigma = fusion(g, f.stop_token, c.stop_token, h.stop_token);

  std::map<ViewpointId, int> direction;
  for (const auto& [v, d] : in.directions) {
    if (d < 0 || d >= in.views.rows()) throw std::invalid_argument("nav: neighbor without direction index");
    direction[v] = d;
  }
  for (ViewpointId v : graph.neighbors(here)) {
    if (direction.count(v) == 0) throw std::invalid_argument("nav: neighbor without direction index");
  }

  NavForward out;
  BranchScores& s = out.scores;
  const std::set<ViewpointId> unreachable(in.unreachable.begin(), in.unreachable.end());
  s.candidates.push_back(kStop);
  for (ViewpointId v : graph.ids()) {
    const auto cat = graph.node(v).category;
    if (cat == NodeCategory::Current || cat == NodeCategory::Visited || unreachable.count(v)) continue;
    s.candidates.push_back(v);
  }

  std::vector<Eigen::Index> visited_rows;
  for (const auto& [v, d] : direction) {
    if (graph.contains(v) && graph.node(v).category == NodeCategory::Visited) visited_rows.push_back(1 + d);
  }
  std::optional<Var> s_back;
  if (!visited_rows.empty()) {
    s_back = tensor::logsumexp_rows(tensor::transpose(gather_rows(f.scores, visited_rows)));
    s.s_back = s_back->scalar();
  }

  std::map<ViewpointId, Eigen::Index> coarse_row;
  for (std::size_t i = 0; i < c.nodes.size(); ++i) coarse_row[c.nodes[i]] = static_cast<Eigen::Index>(i) + 1;
  std::map<ViewpointId, Eigen::Index> history_row;
  for (std::size_t i = 0; i < h.nodes.size(); ++i) history_row[h.nodes[i]] = static_cast<Eigen::Index>(i) + 1;

  const auto count = static_cast<Eigen::Index>(s.candidates.size());
  out.mask = Matrix::Zero(1, count);
  std::vector<Var> fine_parts;
  std::vector<Var> coarse_parts;
  std::vector<Var> history_parts;
  Var s0 = g.param("nav.hist.s0");
  Var zero = g.scalar(0.0);
  for (Eigen::Index k = 0; k < count; ++k) {
    const Action& a = s.candidates[static_cast<std::size_t>(k)];
    if (!a) {
      fine_parts.push_back(tensor::slice_rows(f.scores, 0, 1));
      coarse_parts.push_back(tensor::slice_rows(c.scores, 0, 1));
      history_parts.push_back(tensor::slice_rows(h.scores, 0, 1));
      continue;
    }
    coarse_parts.push_back(tensor::slice_rows(c.scores, coarse_row.at(*a), 1));
    auto hr = history_row.find(*a);
    history_parts.push_back(hr != history_row.end() ? tensor::slice_rows(h.scores, hr->second, 1) : s0);
    auto dir = direction.find(*a);
    if (dir != direction.end()) {
      fine_parts.push_back(tensor::slice_rows(f.scores, 1 + dir->second, 1));
    } else if (s_back) {
      fine_parts.push_back(*s_back);
    } else {
      fine_parts.push_back(zero);
      out.mask(0, k) = kMasked;
    }
  }
  Var fine_c = tensor::concat_rows(fine_parts);
  Var coarse_c = tensor::concat_rows(coarse_parts);
  Var history_c = tensor::concat_rows(history_parts);
  Var final_c = tensor::add(
      tensor::add(tensor::mul_scalar(fine_c, tensor::slice_cols(sigma, 0, 1)),
                  tensor::mul_scalar(coarse_c, tensor::slice_cols(sigma, 1, 1))),
      tensor::mul_scalar(history_c, tensor::slice_cols(sigma, 2, 1)));
  out.logits = tensor::transpose(final_c);

  s.sigma = FusionWeights{sigma.value()(0, 0), sigma.value()(0, 1), sigma.value()(0, 2)};
  s.coarse = column_values(coarse_c);
  s.fine = column_values(fine_c);
  s.history = column_values(history_c);
  s.final = column_values(final_c);
  for (Eigen::Index k = 0; k < count; ++k) {
    if (out.mask(0, k) == kMasked) {
      s.fine[static_cast<std::size_t>(k)] = kMasked;
      s.final[static_cast<std::size_t>(k)] = kMasked;
    }
  }
  const std::vector<double> views = column_values(f.scores);
  s.view_scores.assign(views.begin() + 1, views.end());
  s.history_raw = column_values(h.scores);
  return out;
}

BranchScores NavModel::score(const ParamStore& p, const NavInputs& in) const {
  Graph g(&p);
  return forward(g, in).scores;
}

Matrix alignment(const Matrix& features, const Matrix& tokens) {
  if (features.cols() != tokens.cols()) throw tensor::ShapeError("alignment: feature width mismatch");
  Matrix out = Matrix::Zero(features.rows(), tokens.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const double fn = features.row(i).norm();
    if (fn == 0.0) continue;
    for (Eigen::Index j = 0; j < tokens.rows(); ++j) {
      const double tn = tokens.row(j).norm();
      if (tn > 0.0) out(i, j) = features.row(i).dot(tokens.row(j)) / (fn * tn);
    }
  }
  return out;
}

Vector fuse_history(const std::vector<Vector>& states, const std::vector<double>& scores, const Vector& x,
                    double zeta) {
  if (states.size() != scores.size()) throw std::invalid_argument("fuse_history: |Z_j| != |C_j|");
  if (states.empty()) return x;
  const double top = *std::max_element(scores.begin(), scores.end());
  Eigen::ArrayXd w(static_cast<Eigen::Index>(scores.size()));
  for (std::size_t i = 0; i < scores.size(); ++i) w(static_cast<Eigen::Index>(i)) = std::exp((scores[i] - top) / zeta);
  w /= w.sum();
  Vector u = x;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].size() != x.size()) throw std::invalid_argument("fuse_history: state width mismatch");
    u += w(static_cast<Eigen::Index>(i)) * states[i];
  }
  return u;
}

double fused_score(const FusionWeights& w, double fine, double coarse, double history) {
  return w.fine * fine + w.coarse * coarse + w.history * history;
}

Action select_action(const std::vector<Action>& candidates, const std::vector<double>& final_scores) {
  if (candidates.empty() || candidates.size() != final_scores.size()) {
    throw std::invalid_argument("select_action: candidates and scores must be nonempty and aligned");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double s = final_scores[i];
    const double b = final_scores[best];
    if (s > b) {
      best = i;
    } else if (s == b) {
      // STOP outranks any viewpoint; otherwise the smaller id wins.
      const Action& cur = candidates[best];
      const Action& alt = candidates[i];
      if (cur && alt && *alt < *cur) best = i;
    }
  }
  return candidates[best];
}

}  // namespace memoir::nav
