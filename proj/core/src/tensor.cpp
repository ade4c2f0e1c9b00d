/* Copyright 2026 The cprank Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "cprank/tensor.hpp"

#include <cmath>
#include <cstddef>

namespace cprank {

namespace {

void check_finite(const std::vector<double>& data, const char* what) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw numeric_error(std::string(what) + ": non-finite entry");
    }
  }
}

}  // namespace

void Tensor3::validate() const {
  if (spatial <= 0 || inputs <= 0 || outputs <= 0) {
    throw validation_error("Tensor3: dims must be positive");
  }
  if (data.size() != static_cast<std::size_t>(spatial) * inputs * outputs) {
    throw validation_error("Tensor3: data length does not match dims");
  }
  check_finite(data, "Tensor3");
}

double Tensor3::frobenius_norm() const {
  double acc = 0.0;
  for (double v : data) acc += v * v;
  return std::sqrt(acc);
}

void Kernel4::validate() const {
  if (kh <= 0 || kw <= 0 || in_c <= 0 || out_c <= 0) {
    throw validation_error("Kernel4: dims must be positive");
  }
  if (data.size() != static_cast<std::size_t>(kh) * kw * in_c * out_c) {
    throw validation_error("Kernel4: data length does not match dims");
  }
  check_finite(data, "Kernel4");
}

int conv_out_size(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

void ConvLayerSpec::validate() const {
  if (kernel < 1 || in_channels < 1 || out_channels < 1 || groups < 1 ||
      stride < 1 || pad < 0 || in_h < 1 || in_w < 1) {
    throw validation_error("ConvLayerSpec '" + id + "': invalid geometry field");
  }
  if (in_channels % groups != 0 || out_channels % groups != 0) {
    throw validation_error("ConvLayerSpec '" + id +
                           "': groups must divide in_channels and out_channels");
  }
  if (in_h + 2 * pad < kernel || in_w + 2 * pad < kernel) {
    throw validation_error("ConvLayerSpec '" + id + "': kernel larger than padded input");
  }
  if (out_h != conv_out_size(in_h, kernel, stride, pad) ||
      out_w != conv_out_size(in_w, kernel, stride, pad)) {
    throw validation_error("ConvLayerSpec '" + id + "': output size inconsistent");
  }
}

Tensor3 reshape_kernel_to_3way(const Kernel4& k) {
  k.validate();
  Tensor3 out(k.kh * k.kw, k.in_c, k.out_c);
  for (int r = 0; r < k.kh; ++r)
    for (int c = 0; c < k.kw; ++c)
      for (int s = 0; s < k.in_c; ++s)
        for (int t = 0; t < k.out_c; ++t)
          out.at(r * k.kw + c, s, t) = k.at(r, c, s, t);
  return out;
}

Kernel4 reshape_3way_to_kernel(const Tensor3& x, int kh, int kw) {
  x.validate();
  if (kh < 1 || kw < 1 || kh * kw != x.spatial) {
    throw validation_error("reshape_3way_to_kernel: kh*kw must equal spatial dim");
  }
  Kernel4 out(kh, kw, x.inputs, x.outputs);
  for (int r = 0; r < kh; ++r)
    for (int c = 0; c < kw; ++c)
      for (int s = 0; s < x.inputs; ++s)
        for (int t = 0; t < x.outputs; ++t)
          out.at(r, c, s, t) = x.at(r * kw + c, s, t);
  return out;
}

Matricization matricize(const Tensor3& x, int mode) {
  x.validate();
  if (mode < 1 || mode > 3) {
    throw validation_error("matricize: mode must be 1, 2, or 3");
  }
  Matricization out;
  out.mode = mode;
  out.src_spatial = x.spatial;
  out.src_inputs = x.inputs;
  out.src_outputs = x.outputs;
  const int dd = x.spatial, s_n = x.inputs, t_n = x.outputs;
  switch (mode) {
    case 1:
      out.m.resize(t_n, static_cast<Eigen::Index>(s_n) * dd);
      for (int p = 0; p < dd; ++p)
        for (int s = 0; s < s_n; ++s)
          for (int t = 0; t < t_n; ++t)
            out.m(t, static_cast<Eigen::Index>(s) * dd + p) = x.at(p, s, t);
      break;
    case 2:
      out.m.resize(s_n, static_cast<Eigen::Index>(t_n) * dd);
      for (int p = 0; p < dd; ++p)
        for (int s = 0; s < s_n; ++s)
          for (int t = 0; t < t_n; ++t)
            out.m(s, static_cast<Eigen::Index>(t) * dd + p) = x.at(p, s, t);
      break;
    case 3:
      out.m.resize(dd, static_cast<Eigen::Index>(t_n) * s_n);
      for (int p = 0; p < dd; ++p)
        for (int s = 0; s < s_n; ++s)
          for (int t = 0; t < t_n; ++t)
            out.m(p, static_cast<Eigen::Index>(t) * s_n + s) = x.at(p, s, t);
      break;
  }
  return out;
}

Tensor3 fold(const Matricization& m) {
  const int dd = m.src_spatial, s_n = m.src_inputs, t_n = m.src_outputs;
  if (dd <= 0 || s_n <= 0 || t_n <= 0) {
    throw validation_error("fold: missing origin dims");
  }
  const auto total = static_cast<std::size_t>(dd) * s_n * t_n;
  if (static_cast<std::size_t>(m.m.rows()) * m.m.cols() != total) {
    throw validation_error("fold: rows*cols inconsistent with origin dims");
  }
  Tensor3 out(dd, s_n, t_n);
  switch (m.mode) {
    case 1:
      if (m.m.rows() != t_n) throw validation_error("fold: mode-1 row count mismatch");
      for (int p = 0; p < dd; ++p)
        for (int s = 0; s < s_n; ++s)
          for (int t = 0; t < t_n; ++t)
            out.at(p, s, t) = m.m(t, static_cast<Eigen::Index>(s) * dd + p);
      break;
    case 2:
      if (m.m.rows() != s_n) throw validation_error("fold: mode-2 row count mismatch");
      for (int p = 0; p < dd; ++p)
        for (int s = 0; s < s_n; ++s)
          for (int t = 0; t < t_n; ++t)
            out.at(p, s, t) = m.m(s, static_cast<Eigen::Index>(t) * dd + p);
      break;
    case 3:
      if (m.m.rows() != dd) throw validation_error("fold: mode-3 row count mismatch");
      for (int p = 0; p < dd; ++p)
        for (int s = 0; s < s_n; ++s)
          for (int t = 0; t < t_n; ++t)
            out.at(p, s, t) = m.m(p, static_cast<Eigen::Index>(t) * s_n + s);
      break;
    default:
      throw validation_error("fold: invalid mode");
  }
  return out;
}

std::vector<Kernel4> split_groups(const Kernel4& k, const ConvLayerSpec& spec) {
  spec.validate();
  k.validate();
  if (k.in_c != spec.in_per_group() || k.out_c != spec.out_channels) {
    throw validation_error("split_groups: kernel dims do not match spec");
  }
  const int g = spec.groups;
  const int tpg = spec.out_per_group();
  std::vector<Kernel4> parts;
  parts.reserve(g);
  for (int i = 0; i < g; ++i) {
    Kernel4 part(k.kh, k.kw, k.in_c, tpg);
    for (int r = 0; r < k.kh; ++r)
      for (int c = 0; c < k.kw; ++c)
        for (int s = 0; s < k.in_c; ++s)
          for (int t = 0; t < tpg; ++t)
            part.at(r, c, s, t) = k.at(r, c, s, i * tpg + t);
    parts.push_back(std::move(part));
  }
  return parts;
}

Kernel4 concat_groups(const std::vector<Kernel4>& parts) {
  if (parts.empty()) throw validation_error("concat_groups: empty input");
  const Kernel4& first = parts.front();
  int total_out = 0;
  for (const Kernel4& p : parts) {
    if (p.kh != first.kh || p.kw != first.kw || p.in_c != first.in_c) {
      throw validation_error("concat_groups: mismatched group dims");
    }
    total_out += p.out_c;
  }
  Kernel4 out(first.kh, first.kw, first.in_c, total_out);
  int t_base = 0;
  for (const Kernel4& p : parts) {
    for (int r = 0; r < p.kh; ++r)
      for (int c = 0; c < p.kw; ++c)
        for (int s = 0; s < p.in_c; ++s)
          for (int t = 0; t < p.out_c; ++t)
            out.at(r, c, s, t_base + t) = p.at(r, c, s, t);
    t_base += p.out_c;
  }
  return out;
}

Tensor3 tensor_from_cp(const CPFactors& f) {
  if (f.rank < 0 || f.spatial.cols() != f.rank || f.input.cols() != f.rank ||
      f.output.cols() != f.rank || f.weights.size() != f.rank) {
    throw validation_error("tensor_from_cp: factor dims do not match rank");
  }
  const int dd = static_cast<int>(f.spatial.rows());
  const int s_n = static_cast<int>(f.input.rows());
  const int t_n = static_cast<int>(f.output.rows());
  if (dd <= 0 || s_n <= 0 || t_n <= 0) {
    throw validation_error("tensor_from_cp: empty factor");
  }
  Tensor3 out(dd, s_n, t_n);
  for (int r = 0; r < f.rank; ++r) {
    const double w = f.weights(r);
    for (int p = 0; p < dd; ++p) {
      const double ap = w * f.spatial(p, r);
      for (int s = 0; s < s_n; ++s) {
        const double abs_ = ap * f.input(s, r);
        for (int t = 0; t < t_n; ++t) {
          out.at(p, s, t) += abs_ * f.output(t, r);
        }
      }
    }
  }
  return out;
}

Activation conv_forward(const Activation& input, const ConvLayerSpec& spec,
                        const Kernel4& k) {
  spec.validate();
  k.validate();
  if (input.channels != spec.in_channels || input.h != spec.in_h ||
      input.w != spec.in_w) {
    throw validation_error("conv_forward: input shape does not match spec");
  }
  if (k.kh != spec.kernel || k.kw != spec.kernel ||
      k.in_c != spec.in_per_group() || k.out_c != spec.out_channels) {
    throw validation_error("conv_forward: kernel dims do not match spec");
  }
  const int g = spec.groups;
  const int spg = spec.in_per_group();
  const int tpg = spec.out_per_group();
  Activation out(spec.out_channels, spec.out_h, spec.out_w);
  for (int gi = 0; gi < g; ++gi) {
    for (int tg = 0; tg < tpg; ++tg) {
      const int t = gi * tpg + tg;
      for (int oy = 0; oy < spec.out_h; ++oy) {
        for (int ox = 0; ox < spec.out_w; ++ox) {
          double acc = 0.0;
          for (int sg = 0; sg < spg; ++sg) {
            const int s = gi * spg + sg;
            for (int r = 0; r < spec.kernel; ++r) {
              const int iy = oy * spec.stride + r - spec.pad;
              if (iy < 0 || iy >= spec.in_h) continue;
              for (int c = 0; c < spec.kernel; ++c) {
                const int ix = ox * spec.stride + c - spec.pad;
                if (ix < 0 || ix >= spec.in_w) continue;
                acc += input.at(s, iy, ix) * k.at(r, c, sg, t);
              }
            }
          }
          out.at(t, oy, ox) = acc;
        }
      }
    }
  }
  return out;
}

}  // namespace cprank
