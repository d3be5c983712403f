#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "egoact/rng.hpp"
#include "egoact/tensor.hpp"

// Forward/backward primitives for the fixed model topology. Convention:
// input gradients are assigned, parameter gradients are accumulated (+=),
// so tied weights and batches sum naturally. Callers zero parameter grads
// at step boundaries.

namespace egoact {

// ---------------------------------------------------------------- conv2d

/// x: (Cin,H,W), w: (Cout,Cin,kh,kw), b: (Cout). Zero padding `pad`,
/// stride >= 1. Output (Cout,Ho,Wo) with Ho = (H + 2 pad - kh)/stride + 1.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                         int pad) {
  if (x.shape.size() != 3 || w.shape.size() != 4) {
    throw std::invalid_argument("conv2d: x must be rank 3 and w rank 4, got " +
                                shape_to_string(x.shape) + " and " + shape_to_string(w.shape));
  }
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  const int cin = x.shape[0], h = x.shape[1], wd = x.shape[2];
  const int cout = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  if (w.shape[1] != cin) {
    throw std::invalid_argument("conv2d: weight expects " + std::to_string(w.shape[1]) +
                                " input channels, input has " + std::to_string(cin));
  }
  check_shape(b, {cout}, "conv2d bias");
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (wd + 2 * pad - kw) / stride + 1;
  if (ho < 1 || wo < 1) {
    throw std::invalid_argument("conv2d: kernel " + shape_to_string(w.shape) +
                                " does not fit input " + shape_to_string(x.shape));
  }

  Tensor<T> y({cout, ho, wo});
  for (int oc = 0; oc < cout; ++oc) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        T acc = b[oc];
        const int y0 = oy * stride - pad;
        const int x0 = ox * stride - pad;
        for (int ic = 0; ic < cin; ++ic) {
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = y0 + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = x0 + kx;
              if (ix < 0 || ix >= wd) continue;
              acc += x.at3(ic, iy, ix) * w.at4(oc, ic, ky, kx);
            }
          }
        }
        y.at3(oc, oy, ox) = acc;
      }
    }
  }
  return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad,
                     const Tensor<T>& dy, Tensor<T>& dx, Tensor<T>& dw, Tensor<T>& db) {
  const int cin = x.shape[0], h = x.shape[1], wd = x.shape[2];
  const int cout = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  const int ho = dy.shape[1], wo = dy.shape[2];

  dx.shape = x.shape;
  dx.data.assign(x.numel(), T(0));
  for (int oc = 0; oc < cout; ++oc) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        const T g = dy.at3(oc, oy, ox);
        db[oc] += g;
        const int y0 = oy * stride - pad;
        const int x0 = ox * stride - pad;
        for (int ic = 0; ic < cin; ++ic) {
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = y0 + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = x0 + kx;
              if (ix < 0 || ix >= wd) continue;
              dw.at4(oc, ic, ky, kx) += g * x.at3(ic, iy, ix);
              dx.at3(ic, iy, ix) += g * w.at4(oc, ic, ky, kx);
            }
          }
        }
      }
    }
  }
}

// -------------------------------------------------------------- maxpool2d

template <typename T>
struct MaxPoolResult {
  Tensor<T> y;
  std::vector<std::int32_t> argmax;  // flat input index per output element
};

/// Non-overlapping when stride == kernel (the only mode the model uses, but
/// any stride >= 1 works). Window cells beyond the border are ignored.
template <typename T>
MaxPoolResult<T> maxpool2d_forward(const Tensor<T>& x, int kernel, int stride) {
  if (x.shape.size() != 3) throw std::invalid_argument("maxpool2d: rank-3 input required");
  if (kernel < 1 || stride < 1) throw std::invalid_argument("maxpool2d: bad kernel/stride");
  const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
  const int ho = (h - 1) / stride + 1 - (kernel - 1) / stride;
  const int wo = (w - 1) / stride + 1 - (kernel - 1) / stride;
  if (ho < 1 || wo < 1) {
    throw std::invalid_argument("maxpool2d: kernel does not fit input " +
                                shape_to_string(x.shape));
  }

  MaxPoolResult<T> out;
  out.y = Tensor<T>({c, ho, wo});
  out.argmax.assign(out.y.numel(), 0);
  std::size_t oi = 0;
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox, ++oi) {
        T best{};
        std::int32_t best_idx = -1;
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = oy * stride + ky;
          if (iy >= h) break;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = ox * stride + kx;
            if (ix >= w) break;
            const T v = x.at3(ch, iy, ix);
            if (best_idx < 0 || v > best) {
              best = v;
              best_idx =
                  static_cast<std::int32_t>((static_cast<std::size_t>(ch) * h + iy) * w + ix);
            }
          }
        }
        out.y.data[oi] = best;
        out.argmax[oi] = best_idx;
      }
    }
  }
  return out;
}

template <typename T>
void maxpool2d_backward(const std::vector<int>& x_shape, const std::vector<std::int32_t>& argmax,
                        const Tensor<T>& dy, Tensor<T>& dx) {
  dx.shape = x_shape;
  dx.data.assign(Tensor<T>::numel_of(x_shape), T(0));
  for (std::size_t i = 0; i < dy.numel(); ++i) dx.data[argmax[i]] += dy.data[i];
}

// --------------------------------------------------------- fully connected

/// x: (In), w: (Out,In), b: (Out) -> (Out).
template <typename T>
Tensor<T> fc_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (w.shape.size() != 2 || x.numel() != static_cast<std::size_t>(w.shape[1])) {
    throw std::invalid_argument("fc: weight " + shape_to_string(w.shape) +
                                " incompatible with input " + shape_to_string(x.shape));
  }
  const int out = w.shape[0], in = w.shape[1];
  check_shape(b, {out}, "fc bias");
  Tensor<T> y({out});
  for (int o = 0; o < out; ++o) {
    T acc = b[o];
    const T* row = &w.data[static_cast<std::size_t>(o) * in];
    for (int i = 0; i < in; ++i) acc += row[i] * x.data[i];
    y[o] = acc;
  }
  return y;
}

template <typename T>
void fc_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>& dx,
                 Tensor<T>& dw, Tensor<T>& db) {
  const int out = w.shape[0], in = w.shape[1];
  dx.shape = x.shape;
  dx.data.assign(x.numel(), T(0));
  for (int o = 0; o < out; ++o) {
    const T g = dy[o];
    db[o] += g;
    const T* row = &w.data[static_cast<std::size_t>(o) * in];
    T* drow = &dw.data[static_cast<std::size_t>(o) * in];
    for (int i = 0; i < in; ++i) {
      drow[i] += g * x.data[i];
      dx.data[i] += g * row[i];
    }
  }
}

// ------------------------------------------------------------------- relu

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (T& v : y.data) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
void relu_backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx) {
  dx.shape = x.shape;
  dx.data.assign(x.numel(), T(0));
  for (std::size_t i = 0; i < x.numel(); ++i) dx.data[i] = x.data[i] > T(0) ? dy.data[i] : T(0);
}

// ---------------------------------------------------------------- softmax

/// Log-sum-exp stabilized; output strictly positive, sums to 1.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  Tensor<T> p = logits;
  T mx = p.data[0];
  for (const T& v : p.data) mx = std::max(mx, v);
  T sum = T(0);
  for (T& v : p.data) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (T& v : p.data) v /= sum;
  return p;
}

template <typename T>
struct CrossEntropyResult {
  T loss{};
  Tensor<T> probs;
  Tensor<T> dlogits;  // softmax - one_hot(label)
};

template <typename T>
CrossEntropyResult<T> softmax_cross_entropy(const Tensor<T>& logits, int label) {
  const int l = static_cast<int>(logits.numel());
  if (l < 2) throw std::invalid_argument("softmax_cross_entropy: need at least 2 classes");
  if (label < 0 || label >= l) {
    throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) +
                                " out of range for " + std::to_string(l) + " classes");
  }
  CrossEntropyResult<T> out;
  out.probs = softmax(logits);
  out.loss = -std::log(std::max(out.probs[label], std::numeric_limits<T>::min()));
  out.dlogits = out.probs;
  out.dlogits[label] -= T(1);
  return out;
}

// -------------------------------------------------------------- LSTM cell

/// Standard (no peephole) gates, one parameter tensor per gate as listed.
template <typename T>
struct LstmParams {
  int input_dim = 0;
  int hidden_dim = 0;
  Tensor<T> w_i, w_f, w_o, w_g;  // (Hc, D)
  Tensor<T> u_i, u_f, u_o, u_g;  // (Hc, Hc)
  Tensor<T> b_i, b_f, b_o, b_g;  // (Hc)

  LstmParams() = default;
  LstmParams(int d, int hc) : input_dim(d), hidden_dim(hc) {
    for (Tensor<T>* t : {&w_i, &w_f, &w_o, &w_g}) *t = Tensor<T>({hc, d});
    for (Tensor<T>* t : {&u_i, &u_f, &u_o, &u_g}) *t = Tensor<T>({hc, hc});
    for (Tensor<T>* t : {&b_i, &b_f, &b_o, &b_g}) *t = Tensor<T>({hc});
  }
};

template <typename T>
struct LstmCache {
  Tensor<T> x, h_prev, c_prev;
  Tensor<T> i, f, o, g;  // post-activation gates
  Tensor<T> c, tanh_c;
};

template <typename T>
T sigmoid(T v) {
  return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> lstm_cell_forward(const Tensor<T>& x, const Tensor<T>& h,
                                                  const Tensor<T>& c, const LstmParams<T>& p,
                                                  LstmCache<T>* cache = nullptr) {
  const int d = p.input_dim, hc = p.hidden_dim;
  check_shape(x, {d}, "lstm x");
  check_shape(h, {hc}, "lstm h");
  check_shape(c, {hc}, "lstm c");

  auto gate = [&](const Tensor<T>& w, const Tensor<T>& u, const Tensor<T>& b) {
    Tensor<T> a({hc});
    for (int r = 0; r < hc; ++r) {
      T acc = b[r];
      const T* wr = &w.data[static_cast<std::size_t>(r) * d];
      for (int k = 0; k < d; ++k) acc += wr[k] * x.data[k];
      const T* ur = &u.data[static_cast<std::size_t>(r) * hc];
      for (int k = 0; k < hc; ++k) acc += ur[k] * h.data[k];
      a[r] = acc;
    }
    return a;
  };

  Tensor<T> i = gate(p.w_i, p.u_i, p.b_i);
  Tensor<T> f = gate(p.w_f, p.u_f, p.b_f);
  Tensor<T> o = gate(p.w_o, p.u_o, p.b_o);
  Tensor<T> g = gate(p.w_g, p.u_g, p.b_g);
  for (int r = 0; r < hc; ++r) {
    i[r] = sigmoid(i[r]);
    f[r] = sigmoid(f[r]);
    o[r] = sigmoid(o[r]);
    g[r] = std::tanh(g[r]);
  }

  Tensor<T> c_new({hc}), h_new({hc}), tanh_c({hc});
  for (int r = 0; r < hc; ++r) {
    c_new[r] = f[r] * c[r] + i[r] * g[r];
    tanh_c[r] = std::tanh(c_new[r]);
    h_new[r] = o[r] * tanh_c[r];
  }

  if (cache) {
    cache->x = x;
    cache->h_prev = h;
    cache->c_prev = c;
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->o = std::move(o);
    cache->g = std::move(g);
    cache->c = c_new;
    cache->tanh_c = std::move(tanh_c);
  }
  return {std::move(h_new), std::move(c_new)};
}

/// dh/dc are gradients flowing into h', c'. Outputs assign dx/dh_prev/
/// dc_prev and accumulate into the gradient parameter block `gp`.
template <typename T>
void lstm_cell_backward(const LstmParams<T>& p, const LstmCache<T>& cache, const Tensor<T>& dh,
                        const Tensor<T>& dc_in, Tensor<T>& dx, Tensor<T>& dh_prev,
                        Tensor<T>& dc_prev, LstmParams<T>& gp) {
  const int d = p.input_dim, hc = p.hidden_dim;

  Tensor<T> da_i({hc}), da_f({hc}), da_o({hc}), da_g({hc});
  dc_prev = Tensor<T>({hc});
  for (int r = 0; r < hc; ++r) {
    const T tc = cache.tanh_c[r];
    const T dc = dc_in[r] + dh[r] * cache.o[r] * (T(1) - tc * tc);
    const T di = dc * cache.g[r];
    const T df = dc * cache.c_prev[r];
    const T dg = dc * cache.i[r];
    const T do_ = dh[r] * tc;
    da_i[r] = di * cache.i[r] * (T(1) - cache.i[r]);
    da_f[r] = df * cache.f[r] * (T(1) - cache.f[r]);
    da_o[r] = do_ * cache.o[r] * (T(1) - cache.o[r]);
    da_g[r] = dg * (T(1) - cache.g[r] * cache.g[r]);
    dc_prev[r] = dc * cache.f[r];
  }

  dx = Tensor<T>({d});
  dh_prev = Tensor<T>({hc});
  auto accumulate = [&](const Tensor<T>& da, const Tensor<T>& w, const Tensor<T>& u,
                        Tensor<T>& dw, Tensor<T>& du, Tensor<T>& db) {
    for (int r = 0; r < hc; ++r) {
      const T g = da[r];
      db[r] += g;
      const T* wr = &w.data[static_cast<std::size_t>(r) * d];
      T* dwr = &dw.data[static_cast<std::size_t>(r) * d];
      for (int k = 0; k < d; ++k) {
        dwr[k] += g * cache.x.data[k];
        dx.data[k] += g * wr[k];
      }
      const T* ur = &u.data[static_cast<std::size_t>(r) * hc];
      T* dur = &du.data[static_cast<std::size_t>(r) * hc];
      for (int k = 0; k < hc; ++k) {
        dur[k] += g * cache.h_prev.data[k];
        dh_prev.data[k] += g * ur[k];
      }
    }
  };
  accumulate(da_i, p.w_i, p.u_i, gp.w_i, gp.u_i, gp.b_i);
  accumulate(da_f, p.w_f, p.u_f, gp.w_f, gp.u_f, gp.b_f);
  accumulate(da_o, p.w_o, p.u_o, gp.w_o, gp.u_o, gp.b_o);
  accumulate(da_g, p.w_g, p.u_g, gp.w_g, gp.u_g, gp.b_g);
}

// ----------------------------------------------------------- initializers

/// Kaiming-uniform: +-sqrt(6 / fan_in), the ReLU-gain variant.
template <typename T>
void kaiming_uniform(Tensor<T>& t, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / std::max(1, fan_in));
  for (T& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

/// Orthogonal rows (or columns when rows > cols), for recurrent matrices.
/// Defined in nn.cpp (uses a QR decomposition).
template <typename T>
void orthogonal_init(Tensor<T>& t, Rng& rng);

// ------------------------------------------------------------- grad check

struct GradCheckSpec {
  /// Forward pass only, returns the scalar loss.
  std::function<double()> loss;
  /// Forward + backward, leaving analytic gradients readable via coords.
  std::function<void()> compute_grads;
  /// (value pointer, gradient pointer) per checked coordinate.
  std::vector<std::pair<double*, double*>> coords;
  double eps = 1e-5;
  std::size_t max_coords = 400;  // random subset when coords is larger
  std::uint64_t seed = 1;
};

/// Central finite differences against the analytic gradient; returns the
/// worst relative error over the sampled coordinates.
double grad_check(const GradCheckSpec& spec);

}  // namespace egoact
