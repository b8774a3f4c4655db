#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "memoir/autodiff.hpp"
#include "memoir/episodic_graph.hpp"
#include "memoir/params.hpp"
#include "memoir/scene.hpp"

namespace memoir::nav {

using tensor::Graph;
using tensor::ParamStore;
using tensor::Var;

inline constexpr double kMasked = -std::numeric_limits<double>::infinity();

struct NavModelConfig {
  int feat_dim = 32;
  /// Width of the attached history states; must equal feat_dim.
  int state_dim = 32;
  int model_dim = 32;
  int ffn_dim = 64;
  /// The instruction vector is read as this many tokens of feat_dim each.
  int instr_tokens = 2;
  /// Temperature of the attachment softmax in the history branch.
  double zeta = 0.1;

  int instr_dim() const { return feat_dim * instr_tokens; }
  void validate() const;
};

struct FusionWeights {
  double fine = 0.0;
  double coarse = 0.0;
  double history = 0.0;
};

/// Everything the policy sees at one decision step.
struct NavInputs {
  const EpisodicGraph* graph = nullptr;
  Vector instruction;
  /// K x F views at the current viewpoint.
  Matrix views;
  /// (neighbor, view index) pairs at the current viewpoint.
  std::vector<std::pair<ViewpointId, int>> directions;
  /// Candidates that cannot be reached through G_t.
  std::vector<ViewpointId> unreachable;
};

/// Per-candidate branch and final scores. Index 0 is STOP; masked entries
/// hold kMasked in `fine` and `final`.
struct BranchScores {
  std::vector<Action> candidates;
  std::vector<double> coarse;
  std::vector<double> fine;
  std::vector<double> history;
  std::vector<double> final;
  FusionWeights sigma;
  /// Log-sum-exp of the fine scores of visited neighbors (kMasked if none).
  double s_back = kMasked;
  /// Per-view fine scores before lifting (STOP excluded).
  std::vector<double> view_scores;
  std::vector<double> history_raw;
};

/// Outputs of a differentiable forward pass.
struct NavForward {
  BranchScores scores;
  /// 1 x C final scores with masked entries set to zero.
  Var logits;
  /// 1 x C: 0 where selectable, -inf where masked.
  Matrix mask;
};

/// Instruction tokens: raw L x F rows and their L x M projection.
struct TextTokens {
  Matrix raw;
  Var projected;
};

/// Cosine similarity of each feature row with each raw instruction token:
/// rows(features) x L, zero where either side has zero norm.
Matrix alignment(const Matrix& features, const Matrix& tokens);

/// Pieces exposed for tests of the individual branches.
struct CoarseOutput {
  std::vector<ViewpointId> nodes;
  /// (1 + nodes) x 1: STOP first, then nodes in token order.
  Var scores;
  Var stop_token;
};

struct FineOutput {
  /// (1 + K) x 1: STOP first, then one score per view.
  Var scores;
  Var stop_token;
};

struct HistoryOutput {
  /// Node ids in V_h (ascending).
  std::vector<ViewpointId> nodes;
  /// (1 + |V_h|) x 1.
  Var scores;
  Var stop_token;
  /// Fused node inputs u_j, one row per V_h node.
  Matrix fused;
};

class NavModel {
 public:
  explicit NavModel(NavModelConfig config);

  const NavModelConfig& config() const { return config_; }
  void init(ParamStore& store, Rng& rng) const;
  ParamStore init_params(std::uint64_t seed) const;
  static bool owns(const std::string& param_name);

  /// `order` lists the node ids in token order (ascending ids when empty).
  CoarseOutput coarse(Graph& g, const EpisodicGraph& graph, const TextTokens& text,
                      std::vector<ViewpointId> order = {}) const;
  FineOutput fine(Graph& g, const Matrix& views, const TextTokens& text) const;
  HistoryOutput history(Graph& g, const EpisodicGraph& graph, const TextTokens& text) const;
  /// Splits the instruction into L tokens of width F and projects them.
  TextTokens text(Graph& g, const Vector& instruction) const;
  /// Softmax over the fusion head: 1 x 3 (fine, coarse, history).
  Var fusion(Graph& g, Var fine_stop, Var coarse_stop, Var history_stop) const;

  NavForward forward(Graph& g, const NavInputs& in) const;
  BranchScores score(const ParamStore& p, const NavInputs& in) const;

 private:
  Var encode(Graph& g, const std::string& branch, Var tokens, Var text, std::optional<Var> bias) const;
  /// STOP token plus one token per feature row, each shifted by a learned
  /// projection of its alignment with the instruction.
  Var tokens(Graph& g, const std::string& branch, Var rows, const Matrix& features, const Vector& here,
             const Matrix& text) const;

  NavModelConfig config_;
};

/// u_j = softmax(C_j / zeta)^T Z_j + x_j; x_j alone without attachments.
Vector fuse_history(const std::vector<Vector>& states, const std::vector<double>& scores, const Vector& x,
                    double zeta);

/// s_j = sigma_f * fine + sigma_c * coarse + sigma_h * history.
double fused_score(const FusionWeights& w, double fine, double coarse, double history);

/// Argmax over final scores; ties go to STOP, then the smaller id.
Action select_action(const std::vector<Action>& candidates, const std::vector<double>& final_scores);

}  // namespace memoir::nav
