#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ecgfwd/autodiff.hpp"
#include "ecgfwd/errors.hpp"
#include "ecgfwd/rng.hpp"

namespace ecgfwd {

/// Stable 64-bit hash of a parameter name (FNV-1a). Seeding each group from
/// mix_seed(seed, fnv1a(name)) makes its initial values independent of
/// registration order.
inline uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Named, ordered collection of learnable matrices plus matching gradient
/// buffers. Registration order is the canonical order for checkpoints and
/// optimizer state.
template <typename S>
class ParamStore {
 public:
  struct Group {
    std::string name;
    Mat<S> value;
    Mat<S> grad;
  };

  /// Uniform init in (-1/sqrt(fan_in), 1/sqrt(fan_in)); the scheme used for
  /// all weight matrices.
  int add_uniform(const std::string& name, int rows, int cols, int fan_in, uint64_t seed) {
    if (fan_in <= 0) throw ValidationError("ParamStore: fan_in must be positive");
    Mat<S> v(rows, cols);
    Rng rng(mix_seed(seed, fnv1a(name)));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    // Row-major fill order so the stream of draws is layout-independent.
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) v(i, j) = static_cast<S>(rng.uniform(-bound, bound));
    return add(name, std::move(v));
  }

  int add_zeros(const std::string& name, int rows, int cols) {
    return add(name, Mat<S>::Zero(rows, cols));
  }

  int add_const(const std::string& name, int rows, int cols, S value) {
    return add(name, Mat<S>::Constant(rows, cols, value));
  }

  int add(const std::string& name, Mat<S> value) {
    if (index_.count(name)) throw ValidationError("ParamStore: duplicate group '" + name + "'");
    Group g;
    g.name = name;
    g.grad = Mat<S>::Zero(value.rows(), value.cols());
    g.value = std::move(value);
    index_[name] = static_cast<int>(groups_.size());
    groups_.push_back(std::move(g));
    return static_cast<int>(groups_.size()) - 1;
  }

  int find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("ParamStore: unknown group '" + name + "'");
    return it->second;
  }

  Group& group(int i) { return groups_[static_cast<size_t>(i)]; }
  const Group& group(int i) const { return groups_[static_cast<size_t>(i)]; }
  Mat<S>& value(const std::string& name) { return groups_[static_cast<size_t>(find(name))].value; }
  const Mat<S>& value(const std::string& name) const {
    return groups_[static_cast<size_t>(find(name))].value;
  }
  Mat<S>& grad(const std::string& name) { return groups_[static_cast<size_t>(find(name))].grad; }
  int count() const { return static_cast<int>(groups_.size()); }

  /// Registers the named group on a tape; its adjoint lands in the grad
  /// buffer after backward().
  Var<S> use(Tape<S>& tape, const std::string& name) {
    Group& g = groups_[static_cast<size_t>(find(name))];
    return ad::param(tape, g.value, &g.grad);
  }

  void zero_grads() {
    for (Group& g : groups_) g.grad.setZero();
  }

  /// Name of the first group with a non-finite gradient entry, or "".
  std::string first_nonfinite_grad() const {
    for (const Group& g : groups_)
      if (!g.grad.allFinite()) return g.name;
    return {};
  }

  int64_t total_scalars() const {
    int64_t n = 0;
    for (const Group& g : groups_) n += g.value.size();
    return n;
  }

 private:
  std::vector<Group> groups_;
  std::unordered_map<std::string, int> index_;
};

/// Adam optimizer state; moment buffers are kept in the store's group order.
template <typename S>
struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<Mat<S>> m, v;

  void reset(const ParamStore<S>& store) {
    m.clear();
    v.clear();
    for (int i = 0; i < store.count(); ++i) {
      const Mat<S>& val = store.group(i).value;
      m.push_back(Mat<S>::Zero(val.rows(), val.cols()));
      v.push_back(Mat<S>::Zero(val.rows(), val.cols()));
    }
    step_count = 0;
  }

  /// One update from the gradients currently held in the store.
  void step(ParamStore<S>& store, double lr) {
    if (static_cast<int>(m.size()) != store.count())
      throw ValidationError("Adam: state not initialized for this store");
    ++step_count;
    const S b1 = static_cast<S>(beta1), b2 = static_cast<S>(beta2);
    const S bc1 = S(1) - static_cast<S>(std::pow(beta1, static_cast<double>(step_count)));
    const S bc2 = S(1) - static_cast<S>(std::pow(beta2, static_cast<double>(step_count)));
    for (int i = 0; i < store.count(); ++i) {
      auto& g = store.group(i);
      Mat<S>& mi = m[static_cast<size_t>(i)];
      Mat<S>& vi = v[static_cast<size_t>(i)];
      mi = b1 * mi + (S(1) - b1) * g.grad;
      vi = (b2 * vi.array() + (S(1) - b2) * g.grad.array().square()).matrix();
      g.value.array() -= static_cast<S>(lr) * (mi.array() / bc1) /
                         ((vi.array() / bc2).sqrt() + static_cast<S>(eps));
    }
  }
};

}  // namespace ecgfwd
