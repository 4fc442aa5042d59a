#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

// Plain dimension-parameterised layer kernels shared by the sequence
// recognizer and the auxiliary digit classifier. Channel planes are
// row-major [c][y][x]; conv weights are [oc][ic][ky][kx] with 3x3 kernels
// and zero padding of one pixel (same-size output).
//
// Reductions use 32-byte vectors (8 floats / 4 doubles) with lane-striped
// accumulators and a fixed fold order, so results are bit-identical from
// call to call without asking the compiler to reassociate float sums. Every
// consumer of a dot product uses the one kernel here, which keeps batched
// and single-example passes exactly equal.

namespace ruleocr::nn {

#if defined(__GNUC__) || defined(__clang__)
#define RULEOCR_VEC_KERNELS 1
namespace detail {
template <typename T>
struct Vec;
template <>
struct Vec<float> {
  using type = float __attribute__((vector_size(32)));
  using unaligned = float __attribute__((vector_size(32), aligned(4)));
  static constexpr std::size_t lanes = 8;
};
template <>
struct Vec<double> {
  using type = double __attribute__((vector_size(32)));
  using unaligned = double __attribute__((vector_size(32), aligned(8)));
  static constexpr std::size_t lanes = 4;
};
template <typename T>
typename Vec<T>::type vload(const T* p) {
  return *reinterpret_cast<const typename Vec<T>::unaligned*>(p);
}
template <typename T>
void vstore(T* p, typename Vec<T>::type v) {
  *reinterpret_cast<typename Vec<T>::unaligned*>(p) = v;
}
}  // namespace detail

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  using V = typename detail::Vec<T>::type;
  constexpr std::size_t L = detail::Vec<T>::lanes;
  const std::size_t n4 = n / (4 * L) * (4 * L);
  const std::size_t nv = n / L * L;
  V acc0{}, acc1{}, acc2{}, acc3{};
  std::size_t i = 0;
  for (; i < n4; i += 4 * L) {
    acc0 += detail::vload(a + i) * detail::vload(b + i);
    acc1 += detail::vload(a + i + L) * detail::vload(b + i + L);
    acc2 += detail::vload(a + i + 2 * L) * detail::vload(b + i + 2 * L);
    acc3 += detail::vload(a + i + 3 * L) * detail::vload(b + i + 3 * L);
  }
  for (; i < nv; i += L) acc0 += detail::vload(a + i) * detail::vload(b + i);
  acc0 = (acc0 + acc2) + (acc1 + acc3);
  T sum = acc0[0];
  for (std::size_t k = 1; k < L; ++k) sum += acc0[k];
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

template <typename T>
T reduce_add(const T* p, std::size_t n) {
  using V = typename detail::Vec<T>::type;
  constexpr std::size_t L = detail::Vec<T>::lanes;
  const std::size_t nv = n / L * L;
  V acc{};
  std::size_t i = 0;
  for (; i < nv; i += L) acc += detail::vload(p + i);
  T sum = acc[0];
  for (std::size_t k = 1; k < L; ++k) sum += acc[k];
  for (; i < n; ++i) sum += p[i];
  return sum;
}
#else
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  const std::size_t n8 = n - n % 8;
  for (std::size_t i = 0; i < n8; i += 8)
    for (int k = 0; k < 8; ++k) acc[k] += a[i + k] * b[i + k];
  for (std::size_t i = n8; i < n; ++i) acc[0] += a[i] * b[i];
  acc[0] += acc[4]; acc[1] += acc[5]; acc[2] += acc[6]; acc[3] += acc[7];
  acc[0] += acc[2]; acc[1] += acc[3];
  return acc[0] + acc[1];
}

template <typename T>
T reduce_add(const T* p, std::size_t n) {
  T acc[8] = {};
  const std::size_t n8 = n - n % 8;
  for (std::size_t i = 0; i < n8; i += 8)
    for (int k = 0; k < 8; ++k) acc[k] += p[i + k];
  for (std::size_t i = n8; i < n; ++i) acc[0] += p[i];
  acc[0] += acc[4]; acc[1] += acc[5]; acc[2] += acc[6]; acc[3] += acc[7];
  acc[0] += acc[2]; acc[1] += acc[3];
  return acc[0] + acc[1];
}
#endif

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void pad_planes(const T* in, int c, int h, int w, std::vector<T>& padded) {
  const int hp = h + 2, wp = w + 2;
  padded.assign(static_cast<std::size_t>(c) * hp * wp, T(0));
  for (int ic = 0; ic < c; ++ic) {
    const T* src = in + static_cast<std::size_t>(ic) * h * w;
    T* dst = padded.data() + static_cast<std::size_t>(ic) * hp * wp;
    for (int y = 0; y < h; ++y)
      std::copy(src + y * w, src + (y + 1) * w, dst + (y + 1) * wp + 1);
  }
}

namespace detail {
// dst[y][x] += sum_t wk[t] * src[(y + t/3)*wp + t%3 + x]: one pass over the
// plane applying all nine taps, so dst is read and written once per channel
// pair instead of once per tap.
template <typename T>
void tap_pass(T* dst, const T* src, const T* wk, int h, int w, int wp) {
#ifdef RULEOCR_VEC_KERNELS
  using V = typename Vec<T>::type;
  constexpr int L = static_cast<int>(Vec<T>::lanes);
  const int wv = w / L * L;
  for (int y = 0; y < h; ++y) {
    const T* r0 = src + y * wp;
    const T* r1 = src + (y + 1) * wp;
    const T* r2 = src + (y + 2) * wp;
    T* drow = dst + y * w;
    int x = 0;
    for (; x < wv; x += L) {
      V d = vload(drow + x);
      d += wk[0] * vload(r0 + x);
      d += wk[1] * vload(r0 + x + 1);
      d += wk[2] * vload(r0 + x + 2);
      d += wk[3] * vload(r1 + x);
      d += wk[4] * vload(r1 + x + 1);
      d += wk[5] * vload(r1 + x + 2);
      d += wk[6] * vload(r2 + x);
      d += wk[7] * vload(r2 + x + 1);
      d += wk[8] * vload(r2 + x + 2);
      vstore(drow + x, d);
    }
    for (; x < w; ++x)
      drow[x] += wk[0] * r0[x] + wk[1] * r0[x + 1] + wk[2] * r0[x + 2] +
                 wk[3] * r1[x] + wk[4] * r1[x + 1] + wk[5] * r1[x + 2] +
                 wk[6] * r2[x] + wk[7] * r2[x + 1] + wk[8] * r2[x + 2];
  }
#else
  for (int ky = 0; ky < 3; ++ky) {
    for (int kx = 0; kx < 3; ++kx) {
      const T wv = wk[ky * 3 + kx];
      for (int y = 0; y < h; ++y) {
        const T* src_row = src + (y + ky) * wp + kx;
        T* drow = dst + y * w;
        for (int x = 0; x < w; ++x) drow[x] += wv * src_row[x];
      }
    }
  }
#endif
}
}  // namespace detail

// out[oc][y][x] = b[oc] + sum_{ic,ky,kx} w[oc][ic][ky][kx] * in[ic][y+ky-1][x+kx-1]
template <typename T>
void conv3x3_forward(const T* padded, int c_in, int h, int w, const T* weights,
                     const T* bias, int c_out, T* out) {
  const int wp = w + 2;
  for (int oc = 0; oc < c_out; ++oc) {
    T* plane = out + static_cast<std::size_t>(oc) * h * w;
    std::fill(plane, plane + static_cast<std::size_t>(h) * w, bias[oc]);
    for (int ic = 0; ic < c_in; ++ic) {
      const T* pin = padded + static_cast<std::size_t>(ic) * (h + 2) * wp;
      const T* wk = weights + (static_cast<std::size_t>(oc) * c_in + ic) * 9;
      detail::tap_pass(plane, pin, wk, h, w, wp);
    }
  }
}

// Accumulates dw/db; din (unpadded, pre-zeroed by caller) may be null.
// The dw pass walks each output plane once, keeping all nine tap sums in
// lane-striped accumulators, which is what makes the backward pass roughly
// as cheap as the forward one.
template <typename T>
void conv3x3_backward(const T* padded_in, int c_in, int h, int w, const T* weights,
                      int c_out, const T* dout, T* dw, T* db, T* din) {
  const int wp = w + 2;
  for (int oc = 0; oc < c_out; ++oc) {
    const T* dplane = dout + static_cast<std::size_t>(oc) * h * w;
    db[oc] += reduce_add(dplane, static_cast<std::size_t>(h) * w);
    for (int ic = 0; ic < c_in; ++ic) {
      const T* pin = padded_in + static_cast<std::size_t>(ic) * (h + 2) * wp;
      T* dwk = dw + (static_cast<std::size_t>(oc) * c_in + ic) * 9;
#ifdef RULEOCR_VEC_KERNELS
      using V = typename detail::Vec<T>::type;
      constexpr int L = static_cast<int>(detail::Vec<T>::lanes);
      V acc[9] = {};
      T tail[9] = {};
      for (int y = 0; y < h; ++y) {
        const T* drow = dplane + y * w;
        const T* r0 = pin + y * wp;
        const T* r1 = pin + (y + 1) * wp;
        const T* r2 = pin + (y + 2) * wp;
        int x = 0;
        for (; x + L <= w; x += L) {
          const V d = detail::vload(drow + x);
          acc[0] += d * detail::vload(r0 + x);
          acc[1] += d * detail::vload(r0 + x + 1);
          acc[2] += d * detail::vload(r0 + x + 2);
          acc[3] += d * detail::vload(r1 + x);
          acc[4] += d * detail::vload(r1 + x + 1);
          acc[5] += d * detail::vload(r1 + x + 2);
          acc[6] += d * detail::vload(r2 + x);
          acc[7] += d * detail::vload(r2 + x + 1);
          acc[8] += d * detail::vload(r2 + x + 2);
        }
        for (; x < w; ++x) {
          const T d = drow[x];
          tail[0] += d * r0[x];
          tail[1] += d * r0[x + 1];
          tail[2] += d * r0[x + 2];
          tail[3] += d * r1[x];
          tail[4] += d * r1[x + 1];
          tail[5] += d * r1[x + 2];
          tail[6] += d * r2[x];
          tail[7] += d * r2[x + 1];
          tail[8] += d * r2[x + 2];
        }
      }
      for (int t = 0; t < 9; ++t) {
        T s = acc[t][0];
        for (int k = 1; k < L; ++k) s += acc[t][k];
        dwk[t] += s + tail[t];
      }
#else
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          T sum = 0;
          for (int y = 0; y < h; ++y)
            sum += dot(dplane + y * w, pin + (y + ky) * wp + kx,
                       static_cast<std::size_t>(w));
          dwk[ky * 3 + kx] += sum;
        }
      }
#endif
    }
  }
  if (!din) return;
  // din[ic][y][x] += sum_{oc,ky,kx} w[oc][ic][ky][kx] * dout[oc][y+1-ky][x+1-kx],
  // which is the forward tap pass over padded dout with the kernel flipped.
  std::vector<T> dpad;
  pad_planes(dout, c_out, h, w, dpad);
  for (int ic = 0; ic < c_in; ++ic) {
    T* dplane = din + static_cast<std::size_t>(ic) * h * w;
    for (int oc = 0; oc < c_out; ++oc) {
      const T* dp = dpad.data() + static_cast<std::size_t>(oc) * (h + 2) * wp;
      const T* wk = weights + (static_cast<std::size_t>(oc) * c_in + ic) * 9;
      T wflip[9];
      for (int t = 0; t < 9; ++t) wflip[t] = wk[8 - t];
      detail::tap_pass(dplane, dp, wflip, h, w, wp);
    }
  }
}

template <typename T>
void relu_inplace(T* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > T(0) ? x[i] : T(0);
}

// grad *= (activation > 0); valid because relu output is positive exactly
// where its input was.
template <typename T>
void relu_backward(const T* act, T* grad, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!(act[i] > T(0))) grad[i] = T(0);
}

// 2x2 max pooling, stride 2. idx records the winning corner (2*dy + dx),
// first in scan order wins ties.
template <typename T>
void maxpool2x2_forward(const T* in, int c, int h, int w, T* out, std::uint8_t* idx) {
  const int ho = h / 2, wo = w / 2;
  for (int ic = 0; ic < c; ++ic) {
    const T* plane = in + static_cast<std::size_t>(ic) * h * w;
    T* oplane = out + static_cast<std::size_t>(ic) * ho * wo;
    std::uint8_t* iplane = idx + static_cast<std::size_t>(ic) * ho * wo;
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) {
        const T* cell = plane + (2 * y) * w + 2 * x;
        T best = cell[0];
        std::uint8_t bi = 0;
        if (cell[1] > best) { best = cell[1]; bi = 1; }
        if (cell[w] > best) { best = cell[w]; bi = 2; }
        if (cell[w + 1] > best) { best = cell[w + 1]; bi = 3; }
        oplane[y * wo + x] = best;
        iplane[y * wo + x] = bi;
      }
    }
  }
}

// din must be pre-zeroed.
template <typename T>
void maxpool2x2_backward(const T* dout, const std::uint8_t* idx, int c, int h, int w,
                         T* din) {
  const int ho = h / 2, wo = w / 2;
  for (int ic = 0; ic < c; ++ic) {
    const T* dplane = dout + static_cast<std::size_t>(ic) * ho * wo;
    const std::uint8_t* iplane = idx + static_cast<std::size_t>(ic) * ho * wo;
    T* plane = din + static_cast<std::size_t>(ic) * h * w;
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) {
        const std::uint8_t bi = iplane[y * wo + x];
        plane[(2 * y + bi / 2) * w + 2 * x + bi % 2] += dplane[y * wo + x];
      }
    }
  }
}

}  // namespace ruleocr::nn
