#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "memoir/autodiff.hpp"
#include "memoir/rng.hpp"

namespace memoir::tensor {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline constexpr int kParamSnapshotVersion = 1;

/// Named parameter matrices plus Adam moments and a global step counter.
class ParamStore {
 public:
  void add(const std::string& name, Matrix init);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Matrix& value(const std::string& name) const;
  Matrix& value(const std::string& name);
  std::vector<std::string> names() const;
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  std::int64_t step() const { return step_; }

  /// One Adam update over every parameter present in `grads` and accepted
  /// by `filter` (all when empty). Increments the step counter.
  void adam_step(const Gradients& grads, const AdamConfig& config,
                 const std::function<bool(const std::string&)>& filter = {});

  bool all_finite() const;
  /// Bitwise equality of values, moments and step.
  bool identical(const ParamStore& other) const;

  /// Snapshot container: one array per value/moment, manifest lists shapes.
  std::string to_bytes() const;
  static ParamStore from_bytes(std::string_view bytes);
  void save(const std::string& path) const;
  static ParamStore load(const std::string& path);
  /// Loads `path` and checks that its names and shapes match `expected`.
  static ParamStore load_matching(const std::string& path, const ParamStore& expected);

 private:
  struct Entry {
    Matrix value;
    Matrix m;
    Matrix v;
  };
  const Entry& entry(const std::string& name) const;

  std::map<std::string, Entry> entries_;
  std::int64_t step_ = 0;
};

/// Glorot-uniform initialised matrix.
Matrix glorot(Rng& rng, Eigen::Index rows, Eigen::Index cols, double gain = 1.0);

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-3;
  /// Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// 0 checks every entry; otherwise a seeded sample per parameter.
  std::size_t entries_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  std::size_t checked = 0;
  bool passed = true;
};

/// Compares `analytic` against central finite differences of `loss`.
GradCheckResult check_gradients(ParamStore& params, const std::function<double(const ParamStore&)>& loss,
                                const Gradients& analytic, const GradCheckOptions& options = {});

}  // namespace memoir::tensor
