#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dpr/core/ndarray.hpp"

namespace dpr {

// ---------------------------------------------------------------------------
// Learning-rate schedules
// ---------------------------------------------------------------------------

struct LrSchedule {
  enum class Kind { warmup_cosine, constant };
  Kind kind = Kind::warmup_cosine;
  double peak_lr = 3e-4;
  long total_steps = 0;
  double warmup_ratio = 0.1;

  static LrSchedule warmup_cosine(double peak, long total, double ratio) {
    return {Kind::warmup_cosine, peak, total, ratio};
  }
  static LrSchedule constant(double peak) { return {Kind::constant, peak, 0, 0.0}; }
};

// Linear rise from 0 to peak over ceil(warmup_ratio * total) steps, then a
// half cosine down to 0 at total_steps. Constant schedules ignore step.
inline double lr_at_step(const LrSchedule& s, long step) {
  if (s.kind == LrSchedule::Kind::constant) return s.peak_lr;
  if (step < 0 || step > s.total_steps)
    throw ContractError("lr_at_step: step " + std::to_string(step) + " outside [0, " +
                        std::to_string(s.total_steps) + "]");
  const long warm = static_cast<long>(std::ceil(s.warmup_ratio * static_cast<double>(s.total_steps)));
  if (step < warm) return s.peak_lr * static_cast<double>(step) / static_cast<double>(warm);
  if (s.total_steps == warm) return s.peak_lr;
  const double progress =
      static_cast<double>(step - warm) / static_cast<double>(s.total_steps - warm);
  return s.peak_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

// Decoupled weight decay: the decay shrink is applied to the parameter
// before the bias-corrected adaptive update, independent of the moments.
template <typename Scalar>
struct AdamWState {
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
  Scalar weight_decay = Scalar(0);
  long step_count = 0;
  std::vector<std::vector<Scalar>> m;
  std::vector<std::vector<Scalar>> v;

  void attach(const std::vector<NdArray<Scalar>>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(static_cast<std::size_t>(p.numel()), Scalar(0));
      v.emplace_back(static_cast<std::size_t>(p.numel()), Scalar(0));
    }
    step_count = 0;
  }
};

// One optimizer step over params, reading gradients from each param's grad
// buffer. Rejects the whole step if any gradient is non-finite; no state is
// touched in that case.
template <typename Scalar>
void adamw_step(std::vector<NdArray<Scalar>>& params, AdamWState<Scalar>& st, Scalar lr) {
  if (st.m.size() != params.size())
    throw ContractError("adamw_step: state tracks " + std::to_string(st.m.size()) +
                        " tensors, got " + std::to_string(params.size()));
  if (lr < Scalar(0)) throw ContractError("adamw_step: negative learning rate");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].numel() != static_cast<Index>(st.m[i].size()))
      throw DimensionError("adamw_step: param " + std::to_string(i) + " shape " +
                           shape_str(params[i].shape()) + " does not match its moment buffers");
    auto g = params[i].grad();
    if (!g.allFinite())
      throw NumericError("adamw_step: non-finite gradient in tensor " + std::to_string(i) +
                         "; step rejected");
  }

  st.step_count += 1;
  const Scalar bc1 = Scalar(1) - std::pow(st.beta1, Scalar(st.step_count));
  const Scalar bc2 = Scalar(1) - std::pow(st.beta2, Scalar(st.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Scalar* p = params[i].data();
    const Scalar* g = params[i].node()->grad.data();
    Scalar* m = st.m[i].data();
    Scalar* v = st.v[i].data();
    const std::size_t n = st.m[i].size();
    for (std::size_t j = 0; j < n; ++j) {
      p[j] -= lr * st.weight_decay * p[j];
      m[j] = st.beta1 * m[j] + (Scalar(1) - st.beta1) * g[j];
      v[j] = st.beta2 * v[j] + (Scalar(1) - st.beta2) * g[j] * g[j];
      const Scalar mhat = m[j] / bc1;
      const Scalar vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + st.epsilon);
    }
  }
}

template <typename Scalar>
void zero_grads(std::vector<NdArray<Scalar>>& params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace dpr
