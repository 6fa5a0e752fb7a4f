// Copyright 2026 The ETND Authors
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

#include "etnd/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "etnd/errors.hpp"

namespace etnd::nn {

namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

}  // namespace

void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->grad.zero();
}

std::int64_t count_parameters(const std::vector<Parameter*>& params) {
  std::int64_t n = 0;
  for (const Parameter* p : params) n += static_cast<std::int64_t>(p->count());
  return n;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride,
               int pad, Rng& init_rng)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_(std::move(name), Tensor(out_ch, in_ch * kernel * kernel)) {
  // Kaiming-normal, fan-out mode.
  const Real std_dev = std::sqrt(2.0 / (out_ch * kernel * kernel));
  for (Real& v : weight_.value.values()) v = std_dev * init_rng.normal();
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
  if (x.c() != in_ch_) {
    throw ShapeMismatch(weight_.name + ": expected " + std::to_string(in_ch_) +
                        " input channels, got " + std::to_string(x.c()));
  }
  const int n = x.n(), h = x.h(), w = x.w();
  const int oh = (h + 2 * pad_ - kernel_) / stride_ + 1;
  const int ow = (w + 2 * pad_ - kernel_) / stride_ + 1;
  if (oh < 1 || ow < 1) throw ShapeMismatch(weight_.name + ": input too small");
  const int plane = oh * ow;
  const std::size_t cols = static_cast<std::size_t>(n) * plane;
  const int k_rows = in_ch_ * kernel_ * kernel_;

  std::vector<Real> col(static_cast<std::size_t>(k_rows) * cols);
  for (int c = 0; c < in_ch_; ++c) {
    for (int ki = 0; ki < kernel_; ++ki) {
      for (int kj = 0; kj < kernel_; ++kj) {
        Real* row = col.data() + static_cast<std::size_t>((c * kernel_ + ki) * kernel_ + kj) * cols;
        for (int b = 0; b < n; ++b) {
          const Real* src = x.data() + x.offset(b, c, 0, 0);
          Real* dst = row + static_cast<std::size_t>(b) * plane;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ - pad_ + ki;
            Real* drow = dst + oy * ow;
            if (iy < 0 || iy >= h) {
              std::fill(drow, drow + ow, 0.0);
              continue;
            }
            const Real* srow = src + static_cast<std::size_t>(iy) * w;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ - pad_ + kj;
              drow[ox] = (ix >= 0 && ix < w) ? srow[ix] : 0.0;
            }
          }
        }
      }
    }
  }

  RowMat y = ConstMapMat(weight_.value.data(), out_ch_, k_rows) *
             ConstMapMat(col.data(), k_rows, static_cast<Eigen::Index>(cols));
  Tensor out(n, out_ch_, oh, ow);
  for (int b = 0; b < n; ++b) {
    for (int o = 0; o < out_ch_; ++o) {
      const Real* src = y.data() + static_cast<std::size_t>(o) * cols +
                        static_cast<std::size_t>(b) * plane;
      std::copy(src, src + plane, out.data() + out.offset(b, o, 0, 0));
    }
  }

  macs_ = static_cast<std::int64_t>(out_ch_) * k_rows * static_cast<std::int64_t>(cols);
  in_shape_ = x.shape();
  out_h_ = oh;
  out_w_ = ow;
  if (train) {
    col_ = std::move(col);
  } else {
    col_.clear();
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  if (col_.empty()) throw Error(weight_.name + ": backward without training forward");
  const int n = in_shape_[0], h = in_shape_[2], w = in_shape_[3];
  const int plane = out_h_ * out_w_;
  const std::size_t cols = static_cast<std::size_t>(n) * plane;
  const int k_rows = in_ch_ * kernel_ * kernel_;

  RowMat dy(out_ch_, static_cast<Eigen::Index>(cols));
  for (int b = 0; b < n; ++b) {
    for (int o = 0; o < out_ch_; ++o) {
      const Real* src = grad_out.data() + grad_out.offset(b, o, 0, 0);
      std::copy(src, src + plane,
                dy.data() + static_cast<std::size_t>(o) * cols +
                    static_cast<std::size_t>(b) * plane);
    }
  }
  ConstMapMat colm(col_.data(), k_rows, static_cast<Eigen::Index>(cols));
  MapMat(weight_.grad.data(), out_ch_, k_rows).noalias() += dy * colm.transpose();

  Tensor dx(in_shape_);
  if (!needs_input_grad_) {
    col_.clear();
    return dx;
  }
  RowMat dcol = ConstMapMat(weight_.value.data(), out_ch_, k_rows).transpose() * dy;
  for (int c = 0; c < in_ch_; ++c) {
    for (int ki = 0; ki < kernel_; ++ki) {
      for (int kj = 0; kj < kernel_; ++kj) {
        const Real* row = dcol.data() +
                          static_cast<std::size_t>((c * kernel_ + ki) * kernel_ + kj) * cols;
        for (int b = 0; b < n; ++b) {
          Real* dst = dx.data() + dx.offset(b, c, 0, 0);
          const Real* src = row + static_cast<std::size_t>(b) * plane;
          for (int oy = 0; oy < out_h_; ++oy) {
            const int iy = oy * stride_ - pad_ + ki;
            if (iy < 0 || iy >= h) continue;
            Real* drow = dst + static_cast<std::size_t>(iy) * w;
            const Real* srow = src + oy * out_w_;
            for (int ox = 0; ox < out_w_; ++ox) {
              const int ix = ox * stride_ - pad_ + kj;
              if (ix >= 0 && ix < w) drow[ix] += srow[ox];
            }
          }
        }
      }
    }
  }
  col_.clear();
  return dx;
}

// ---------------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, int channels, Real momentum, Real eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(name + ".weight", Tensor(channels, 1, 1, 1, 1.0)),
      beta_(name + ".bias", Tensor(channels, 1)),
      running_mean_(channels, 1),
      running_var_(channels, 1, 1, 1, 1.0),
      name_(std::move(name)) {}

void BatchNorm2d::collect(ParamRefs& refs) {
  refs.params.push_back(&gamma_);
  refs.params.push_back(&beta_);
  refs.buffers.push_back({name_ + ".running_mean", &running_mean_});
  refs.buffers.push_back({name_ + ".running_var", &running_var_});
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  if (x.c() != channels_) throw ShapeMismatch(name_ + ": channel mismatch");
  const int n = x.n(), plane = x.h() * x.w();
  const Real m = static_cast<Real>(n) * plane;
  Tensor out(x.shape());
  cached_train_ = train;
  if (train) {
    xhat_ = Tensor(x.shape());
    inv_std_.assign(static_cast<std::size_t>(channels_), 0.0);
  }
  for (int c = 0; c < channels_; ++c) {
    Real mean, var;
    if (train) {
      Real s = 0.0;
      for (int b = 0; b < n; ++b) {
        const Real* p = x.data() + x.offset(b, c, 0, 0);
        for (int i = 0; i < plane; ++i) s += p[i];
      }
      mean = s / m;
      Real sq = 0.0;
      for (int b = 0; b < n; ++b) {
        const Real* p = x.data() + x.offset(b, c, 0, 0);
        for (int i = 0; i < plane; ++i) sq += (p[i] - mean) * (p[i] - mean);
      }
      var = sq / m;
      const Real unbiased = m > 1 ? sq / (m - 1) : var;
      running_mean_(c, 0) = (1 - momentum_) * running_mean_(c, 0) + momentum_ * mean;
      running_var_(c, 0) = (1 - momentum_) * running_var_(c, 0) + momentum_ * unbiased;
    } else {
      mean = running_mean_(c, 0);
      var = running_var_(c, 0);
    }
    const Real inv = 1.0 / std::sqrt(var + eps_);
    const Real g = gamma_.value(c, 0), bta = beta_.value(c, 0);
    if (train) inv_std_[static_cast<std::size_t>(c)] = inv;
    for (int b = 0; b < n; ++b) {
      const Real* p = x.data() + x.offset(b, c, 0, 0);
      Real* o = out.data() + out.offset(b, c, 0, 0);
      Real* xh = train ? xhat_.data() + xhat_.offset(b, c, 0, 0) : nullptr;
      for (int i = 0; i < plane; ++i) {
        const Real v = (p[i] - mean) * inv;
        if (xh) xh[i] = v;
        o[i] = g * v + bta;
      }
    }
  }
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  if (!cached_train_) throw Error(name_ + ": backward without training forward");
  const int n = grad_out.n(), plane = grad_out.h() * grad_out.w();
  const Real m = static_cast<Real>(n) * plane;
  Tensor dx(grad_out.shape());
  for (int c = 0; c < channels_; ++c) {
    Real sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int b = 0; b < n; ++b) {
      const Real* dy = grad_out.data() + grad_out.offset(b, c, 0, 0);
      const Real* xh = xhat_.data() + xhat_.offset(b, c, 0, 0);
      for (int i = 0; i < plane; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += dy[i] * xh[i];
      }
    }
    gamma_.grad(c, 0) += sum_dy_xhat;
    beta_.grad(c, 0) += sum_dy;
    const Real g = gamma_.value(c, 0);
    const Real k = g * inv_std_[static_cast<std::size_t>(c)] / m;
    for (int b = 0; b < n; ++b) {
      const Real* dy = grad_out.data() + grad_out.offset(b, c, 0, 0);
      const Real* xh = xhat_.data() + xhat_.offset(b, c, 0, 0);
      Real* d = dx.data() + dx.offset(b, c, 0, 0);
      for (int i = 0; i < plane; ++i) {
        d[i] = k * (m * dy[i] - sum_dy - xh[i] * sum_dy_xhat);
      }
    }
  }
  cached_train_ = false;
  xhat_ = Tensor();
  return dx;
}

// ---------------------------------------------------------------- ReLU

Tensor ReLU::forward(const Tensor& x, bool train) {
  Tensor out(x.shape());
  const Real* in = x.data();
  Real* o = out.data();
  if (train) mask_.assign(x.size(), false);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool pos = in[i] > 0.0;
    o[i] = pos ? in[i] : 0.0;
    if (train) mask_[i] = pos;
  }
  return out;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  if (mask_.size() != grad_out.size()) throw Error("ReLU: backward without training forward");
  Tensor dx(grad_out.shape());
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    dx.data()[i] = mask_[i] ? grad_out.data()[i] : 0.0;
  }
  mask_.clear();
  return dx;
}

// ---------------------------------------------------------------- MaxPool2d

Tensor MaxPool2d::forward(const Tensor& x, bool train) {
  const int n = x.n(), c = x.c(), h = x.h(), w = x.w();
  const int oh = (h + 2 * pad_ - kernel_) / stride_ + 1;
  const int ow = (w + 2 * pad_ - kernel_) / stride_ + 1;
  Tensor out(n, c, oh, ow);
  in_shape_ = x.shape();
  if (train) argmax_.assign(out.size(), 0);
  std::size_t k = 0;
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++k) {
          Real best = -std::numeric_limits<Real>::infinity();
          std::size_t best_i = x.offset(b, ch, std::clamp(oy * stride_ - pad_, 0, h - 1),
                                        std::clamp(ox * stride_ - pad_, 0, w - 1));
          for (int ki = 0; ki < kernel_; ++ki) {
            const int iy = oy * stride_ - pad_ + ki;
            if (iy < 0 || iy >= h) continue;
            for (int kj = 0; kj < kernel_; ++kj) {
              const int ix = ox * stride_ - pad_ + kj;
              if (ix < 0 || ix >= w) continue;
              const std::size_t idx = x.offset(b, ch, iy, ix);
              if (x.data()[idx] > best) {
                best = x.data()[idx];
                best_i = idx;
              }
            }
          }
          out.data()[k] = best;
          if (train) argmax_[k] = best_i;
        }
      }
    }
  }
  return out;
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
  if (argmax_.size() != grad_out.size()) throw Error("MaxPool2d: backward without training forward");
  Tensor dx(in_shape_);
  for (std::size_t k = 0; k < grad_out.size(); ++k) dx.data()[argmax_[k]] += grad_out.data()[k];
  argmax_.clear();
  return dx;
}

// ---------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& x, bool train) {
  Tensor cur = x;
  for (auto& l : layers_) cur = l->forward(cur, train);
  return cur;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Sequential::collect(ParamRefs& refs) {
  for (auto& l : layers_) l->collect(refs);
}

std::int64_t Sequential::last_macs() const {
  std::int64_t m = 0;
  for (const auto& l : layers_) m += l->last_macs();
  return m;
}

// ---------------------------------------------------------------- Bottleneck

Bottleneck::Bottleneck(const std::string& name, int in_ch, int mid_ch,
                       int stride, Rng& init_rng) {
  const int out_ch = mid_ch * kExpansion;
  main_.emplace<Conv2d>(name + ".conv1.weight", in_ch, mid_ch, 1, 1, 0, init_rng);
  main_.emplace<BatchNorm2d>(name + ".bn1", mid_ch);
  main_.emplace<ReLU>();
  main_.emplace<Conv2d>(name + ".conv2.weight", mid_ch, mid_ch, 3, stride, 1, init_rng);
  main_.emplace<BatchNorm2d>(name + ".bn2", mid_ch);
  main_.emplace<ReLU>();
  main_.emplace<Conv2d>(name + ".conv3.weight", mid_ch, out_ch, 1, 1, 0, init_rng);
  main_.emplace<BatchNorm2d>(name + ".bn3", out_ch);
  if (stride != 1 || in_ch != out_ch) {
    shortcut_.emplace<Conv2d>(name + ".downsample.0.weight", in_ch, out_ch, 1, stride, 0,
                              init_rng);
    shortcut_.emplace<BatchNorm2d>(name + ".downsample.1", out_ch);
  }
}

Tensor Bottleneck::forward(const Tensor& x, bool train) {
  Tensor y = main_.forward(x, train);
  if (shortcut_.empty()) {
    y += x;
  } else {
    y += shortcut_.forward(x, train);
  }
  return out_relu_.forward(y, train);
}

Tensor Bottleneck::backward(const Tensor& grad_out) {
  const Tensor g = out_relu_.backward(grad_out);
  Tensor dx = main_.backward(g);
  if (shortcut_.empty()) {
    dx += g;
  } else {
    dx += shortcut_.backward(g);
  }
  return dx;
}

void Bottleneck::collect(ParamRefs& refs) {
  main_.collect(refs);
  shortcut_.collect(refs);
}

std::int64_t Bottleneck::last_macs() const {
  return main_.last_macs() + shortcut_.last_macs();
}

}  // namespace etnd::nn
