#include "memoir/params.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "memoir/container.hpp"

namespace memoir::tensor {

void ParamStore::add(const std::string& name, Matrix init) {
  if (entries_.count(name) != 0) throw std::invalid_argument("duplicate parameter " + name);
  if (!init.allFinite()) throw std::invalid_argument("non-finite initial value for " + name);
  Entry e;
  e.m = Matrix::Zero(init.rows(), init.cols());
  e.v = Matrix::Zero(init.rows(), init.cols());
  e.value = std::move(init);
  entries_.emplace(name, std::move(e));
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

const Matrix& ParamStore::value(const std::string& name) const { return entry(name).value; }

Matrix& ParamStore::value(const std::string& name) { return const_cast<Entry&>(entry(name)).value; }

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t total = 0;
  for (const auto& [_, e] : entries_) total += static_cast<std::size_t>(e.value.size());
  return total;
}

void ParamStore::adam_step(const Gradients& grads, const AdamConfig& config,
                           const std::function<bool(const std::string&)>& filter) {
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (const auto& [name, g] : grads) {
    if (filter && !filter(name)) continue;
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("gradient for unknown parameter " + name);
    Entry& e = it->second;
    if (g.rows() != e.value.rows() || g.cols() != e.value.cols()) {
      throw ShapeError("gradient shape mismatch for " + name);
    }
    e.m = config.beta1 * e.m + (1.0 - config.beta1) * g;
    e.v = config.beta2 * e.v + (1.0 - config.beta2) * g.cwiseProduct(g);
    const Matrix update = (e.m / c1).array() / ((e.v / c2).array().sqrt() + config.eps);
    e.value -= config.lr * update;
  }
}

bool ParamStore::all_finite() const {
  for (const auto& [_, e] : entries_) {
    if (!e.value.allFinite()) return false;
  }
  return true;
}

bool ParamStore::identical(const ParamStore& other) const {
  if (step_ != other.step_ || entries_.size() != other.entries_.size()) return false;
  auto same = [](const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (std::bit_cast<std::uint64_t>(a(i)) != std::bit_cast<std::uint64_t>(b(i))) return false;
    }
    return true;
  };
  for (const auto& [name, e] : entries_) {
    auto it = other.entries_.find(name);
    if (it == other.entries_.end()) return false;
    if (!same(e.value, it->second.value) || !same(e.m, it->second.m) || !same(e.v, it->second.v)) return false;
  }
  return true;
}

std::string ParamStore::to_bytes() const {
  ContainerContents c;
  c.kind = "memoir-params";
  c.version = kParamSnapshotVersion;
  nlohmann::json meta;
  meta["step"] = step_;
  meta["names"] = names();
  c.meta_json = meta.dump();
  for (const auto& [name, e] : entries_) {
    c.arrays.push_back({name, e.value});
    c.arrays.push_back({name + "@m", e.m});
    c.arrays.push_back({name + "@v", e.v});
  }
  return write_container(c);
}

ParamStore ParamStore::from_bytes(std::string_view bytes) {
  const ContainerContents c = read_container(bytes, "memoir-params", kParamSnapshotVersion);
  const auto meta = nlohmann::json::parse(c.meta_json);
  std::map<std::string, const Matrix*> arrays;
  for (const auto& a : c.arrays) arrays.emplace(a.name, &a.data);
  ParamStore store;
  store.step_ = meta.at("step").get<std::int64_t>();
  for (const auto& name : meta.at("names").get<std::vector<std::string>>()) {
    auto find = [&](const std::string& key) -> const Matrix& {
      auto it = arrays.find(key);
      if (it == arrays.end()) throw ContainerError("corrupt payload: missing array " + key);
      return *it->second;
    };
    Entry e{find(name), find(name + "@m"), find(name + "@v")};
    if (e.m.rows() != e.value.rows() || e.v.cols() != e.value.cols()) {
      throw ContainerError("corrupt payload: moment shape mismatch for " + name);
    }
    store.entries_.emplace(name, std::move(e));
  }
  return store;
}

void ParamStore::save(const std::string& path) const { write_binary_file(path, to_bytes()); }

ParamStore ParamStore::load(const std::string& path) { return from_bytes(read_binary_file(path)); }

ParamStore ParamStore::load_matching(const std::string& path, const ParamStore& expected) {
  ParamStore loaded = load(path);
  if (loaded.names() != expected.names()) throw ContainerError(path + ": parameter names do not match the model");
  for (const auto& [name, e] : expected.entries_) {
    const Matrix& v = loaded.value(name);
    if (v.rows() != e.value.rows() || v.cols() != e.value.cols()) {
      throw ContainerError(path + ": shape mismatch for " + name);
    }
  }
  return loaded;
}

Matrix glorot(Rng& rng, Eigen::Index rows, Eigen::Index cols, double gain) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-limit, limit);
  }
  return m;
}

GradCheckResult check_gradients(ParamStore& params, const std::function<double(const ParamStore&)>& loss,
                                const Gradients& analytic, const GradCheckOptions& options) {
  GradCheckResult result;
  Rng rng(options.seed);
  for (const auto& name : params.names()) {
    Matrix& value = params.value(name);
    auto it = analytic.find(name);
    const Matrix zero = Matrix::Zero(value.rows(), value.cols());
    const Matrix& grad = it != analytic.end() ? it->second : zero;

    std::vector<Eigen::Index> entries;
    if (options.entries_per_param == 0 || static_cast<std::size_t>(value.size()) <= options.entries_per_param) {
      for (Eigen::Index i = 0; i < value.size(); ++i) entries.push_back(i);
    } else {
      for (std::size_t k = 0; k < options.entries_per_param; ++k) {
        entries.push_back(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(value.size()))));
      }
    }
    for (Eigen::Index i : entries) {
      const double original = value(i);
      value(i) = original + options.step;
      const double plus = loss(params);
      value(i) = original - options.step;
      const double minus = loss(params);
      value(i) = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = grad(i);
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (!(rel <= result.max_relative_error)) {
        result.max_relative_error = rel;
        result.worst_param = name;
        result.worst_index = i;
      }
    }
  }
  result.passed = result.max_relative_error < options.tolerance;
  return result;
}

}  // namespace memoir::tensor
