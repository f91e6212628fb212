// Copyright 2026 The Hopview Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense layers for the encoder and its scalar heads, the stable BCE, Adam,
// and Xavier initialisation. Dense products go through Eigen.

#pragma once

#include "hopview/common.hpp"
#include "hopview/perturb.hpp"

#include <cmath>
#include <span>
#include <string_view>

namespace hopview {

enum class Activation { kIdentity, kRelu, kPrelu };

inline Activation parse_activation(std::string_view s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "relu") return Activation::kRelu;
  if (s == "prelu") return Activation::kPrelu;
  throw ConfigError("unknown activation: " + std::string(s));
}

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kPrelu: return "prelu";
  }
  return "?";
}

template <class T>
struct EncoderParams {
  Matrix<T> weight;  // d x d'
  Vector<T> bias;    // d'
  T slope = T(0.25);  // negative-side slope; learnable only for prelu
  Activation act = Activation::kPrelu;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.cols()); }

  T effective_slope() const {
    switch (act) {
      case Activation::kIdentity: return T(1);
      case Activation::kRelu: return T(0);
      case Activation::kPrelu: return slope;
    }
    return slope;
  }
};

/// One linear projector d' -> d' whose scalar output is the sum of the
/// projected vector.
template <class T>
struct Head {
  Matrix<T> weight;  // d' x d'
  Vector<T> bias;    // d'
};

/// How the degree and hop heads turn an embedding into a logit.
enum class AuxHeads {
  kLearned,  // own projector, then summation
  kSum,      // parameter-free summation of the embedding
};

template <class T>
struct Model {
  EncoderParams<T> encoder;
  Head<T> gd, degree, hop;
  AuxHeads aux = AuxHeads::kLearned;

  /// Visits every tensor in checkpoint order together with its peer in
  /// `other` (same shapes), e.g. a gradient or an optimizer slot.
  template <class U, class Fn>
  void zip(U& other, Fn&& fn) {
    fn(std::span<T>(encoder.weight.data(), encoder.weight.size()),
       std::span<typename U::Scalar>(other.encoder.weight.data(), other.encoder.weight.size()));
    fn(std::span<T>(encoder.bias.data(), encoder.bias.size()),
       std::span<typename U::Scalar>(other.encoder.bias.data(), other.encoder.bias.size()));
    fn(std::span<T>(&encoder.slope, 1), std::span<typename U::Scalar>(&other.encoder.slope, 1));
    for (auto [h, o] : {std::pair{&gd, &other.gd}, std::pair{&degree, &other.degree}, std::pair{&hop, &other.hop}}) {
      fn(std::span<T>(h->weight.data(), h->weight.size()),
         std::span<typename U::Scalar>(o->weight.data(), o->weight.size()));
      fn(std::span<T>(h->bias.data(), h->bias.size()), std::span<typename U::Scalar>(o->bias.data(), o->bias.size()));
    }
  }

  template <class Fn>
  void each(Fn&& fn) {
    zip(*this, [&](std::span<T> a, std::span<T>) { fn(a); });
  }

  using Scalar = T;

  /// Same shapes, all zeros.
  Model zeros_like() const {
    Model z = *this;
    z.each([](std::span<T> s) { std::fill(s.begin(), s.end(), T(0)); });
    return z;
  }

  template <class U>
  Model<U> cast() const {
    Model<U> m;
    m.encoder.weight = encoder.weight.template cast<U>();
    m.encoder.bias = encoder.bias.template cast<U>();
    m.encoder.slope = static_cast<U>(encoder.slope);
    m.encoder.act = encoder.act;
    auto head = [](const Head<T>& h) { return Head<U>{h.weight.template cast<U>(), h.bias.template cast<U>()}; };
    m.gd = head(gd);
    m.degree = head(degree);
    m.hop = head(hop);
    m.aux = aux;
    return m;
  }
};

/// Xavier/Glorot uniform on a fan_in x fan_out matrix.
template <class T>
Matrix<T> xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix<T> m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
  return m;
}

template <class T>
Model<T> init_model(std::size_t in_dim, std::size_t hidden, Activation act, AuxHeads aux, Rng& rng) {
  Model<T> m;
  m.encoder.weight = xavier_uniform<T>(in_dim, hidden, rng);
  m.encoder.bias = Vector<T>::Zero(hidden);
  m.encoder.act = act;
  m.encoder.slope = act == Activation::kPrelu ? T(0.25) : m.encoder.effective_slope();
  for (auto* h : {&m.gd, &m.degree, &m.hop}) {
    h->weight = xavier_uniform<T>(hidden, hidden, rng);
    h->bias = Vector<T>::Zero(hidden);
  }
  m.aux = aux;
  return m;
}

template <class T>
T activate(T z, T slope) {
  return z > T(0) ? z : slope * z;
}

/// h = act(rows * W + b).
template <class T>
Matrix<T> encode(const EncoderParams<T>& p, const Matrix<T>& rows) {
  if (static_cast<std::size_t>(rows.cols()) != p.in_dim())
    throw DataError("shape mismatch: rows have " + std::to_string(rows.cols()) + " columns, encoder expects " +
                    std::to_string(p.in_dim()));
  Matrix<T> h = rows * p.weight;
  h.rowwise() += p.bias.transpose();
  const T a = p.effective_slope();
  h = h.unaryExpr([a](T z) { return activate(z, a); });
  if (!h.allFinite()) throw DivergenceError("non-finite encoder output");
  return h;
}

/// Per-row scalar logit of a head: sum_j (h W + b)_j = h . rowsum(W) + sum(b).
template <class T>
Vector<T> head_logits(const Head<T>& head, const Matrix<T>& h) {
  const Vector<T> w = head.weight.rowwise().sum();
  return (h * w).array() + head.bias.sum();
}

/// Numerically stable per-element BCE with logits.
template <class T>
T bce_term(T z, T y) {
  return std::max(z, T(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
}

template <class T>
T sigmoid(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

/// Mean BCE over the batch.
template <class T>
T bce_with_logits(std::span<const T> logits, std::span<const T> targets) {
  if (logits.size() != targets.size()) throw DataError("shape mismatch: logits vs targets");
  if (logits.empty()) return T(0);
  T sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += bce_term(logits[i], targets[i]);
  return sum / static_cast<T>(logits.size());
}

enum class Direction { kDescend, kAscend };

/// Adam moments for one list of tensors. Slots are keyed by visit order.
template <class T>
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  /// Begins one optimizer step; call update() for each tensor in a fixed order.
  void begin_step() {
    ++t_;
    slot_ = 0;
  }

  void update(std::span<T> param, std::span<const T> grad, double lr, Direction dir = Direction::kDescend) {
    if (slot_ == m_.size()) {
      m_.emplace_back(param.size(), T(0));
      v_.emplace_back(param.size(), T(0));
    }
    auto& m = m_[slot_];
    auto& v = v_[slot_];
    ++slot_;
    if (m.size() != param.size() || grad.size() != param.size()) throw DataError("adam: shape mismatch");
    const T b1 = static_cast<T>(kBeta1), b2 = static_cast<T>(kBeta2);
    const T c1 = static_cast<T>(1.0 - std::pow(kBeta1, static_cast<double>(t_)));
    const T c2 = static_cast<T>(1.0 - std::pow(kBeta2, static_cast<double>(t_)));
    const T step = static_cast<T>(lr), eps = static_cast<T>(kEps);
    for (std::size_t i = 0; i < param.size(); ++i) {
      const T g = dir == Direction::kAscend ? -grad[i] : grad[i];
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      const T mhat = m[i] / c1;
      const T vhat = v[i] / c2;
      param[i] -= step * mhat / (std::sqrt(vhat) + eps);
    }
  }

  std::uint64_t steps() const { return t_; }

 private:
  std::uint64_t t_ = 0;
  std::size_t slot_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace hopview
