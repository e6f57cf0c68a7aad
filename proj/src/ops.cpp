// SPDX-License-Identifier: Apache-2.0
#include "pointcell/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

#include "pointcell/errors.hpp"

namespace pointcell::ops {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using MatMap = Eigen::Map<RowMatrix>;

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

void require_rank(const char* op, Var v, std::size_t rank) {
  if (v.value().rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_str(v.shape()));
}

void accumulate(Tape& t, Var v, const std::vector<double>& g) {
  if (!v.requires_grad()) return;
  auto& dst = t.grad(v.id());
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

// Unfolds one image (C x H x W) into a (C*K*K) x (OH*OW) column matrix.
void im2col(const double* img, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
            int stride, int pad, std::size_t oh, std::size_t ow, double* cols) {
  const std::size_t plane = oh * ow;
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = cols + ((ci * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy) * stride - pad + static_cast<long>(ky);
          double* dst = row + oy * ow;
          if (iy < 0 || iy >= static_cast<long>(h)) {
            std::fill(dst, dst + ow, 0.0);
            continue;
          }
          const double* src = img + (ci * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long ix = static_cast<long>(ox) * stride - pad + static_cast<long>(kx);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(w)) ? 0.0 : src[ix];
          }
        }
      }
}

void col2im(const double* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
            int stride, int pad, std::size_t oh, std::size_t ow, double* img) {
  const std::size_t plane = oh * ow;
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = cols + ((ci * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy) * stride - pad + static_cast<long>(ky);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          double* dst = img + (ci * h + static_cast<std::size_t>(iy)) * w;
          const double* src = row + oy * ow;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long ix = static_cast<long>(ox) * stride - pad + static_cast<long>(kx);
            if (ix >= 0 && ix < static_cast<long>(w)) dst[ix] += src[ox];
          }
        }
      }
}

struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// Sampling taps for one axis under the align-corners=false convention.
struct Taps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

Taps bilinear_taps(std::size_t in, std::size_t out) {
  Taps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    auto i0 = static_cast<std::size_t>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    t.lo[o] = i0;
    t.hi[o] = std::min(i0 + 1, in - 1);
    t.frac[o] = src - static_cast<double>(i0);
  }
  return t;
}

template <typename Fwd, typename Deriv>
Var unary(const char* name, Var x, Fwd fwd, Deriv deriv) {
  const Tensor& xv = x.value();
  Tensor out = Tensor::zeros(xv.shape);
  for (std::size_t i = 0; i < xv.numel(); ++i) out.data[i] = fwd(xv.data[i]);
  return x.tape().record(name, std::move(out), {x},
                         [x, deriv](Tape& t, const std::vector<double>& g) {
                           if (!x.requires_grad()) return;
                           const auto& xd = x.value().data;
                           auto& gx = t.grad(x.id());
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xd[i]);
                         });
}

}  // namespace

Var conv2d(Var input, Var weight, Var bias, int stride, int padding) {
  require_rank("conv2d", input, 4);
  require_rank("conv2d", weight, 4);
  require_rank("conv2d", bias, 1);
  if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
  if (padding < 0) throw DimensionError("conv2d: padding must be >= 0");
  const auto& xs = input.shape();
  const auto& ws = weight.shape();
  const std::size_t n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  const std::size_t o = ws[0], k = ws[2];
  if (ws[1] != c)
    throw DimensionError("conv2d: input has " + std::to_string(c) + " channels but weight " +
                         shape_str(ws) + " expects " + std::to_string(ws[1]));
  if (ws[3] != k) throw DimensionError("conv2d: kernel must be square, got " + shape_str(ws));
  if (bias.shape()[0] != o)
    throw DimensionError("conv2d: bias length " + std::to_string(bias.shape()[0]) +
                         " does not match " + std::to_string(o) + " output channels");
  const long padded_h = static_cast<long>(h) + 2L * padding;
  const long padded_w = static_cast<long>(w) + 2L * padding;
  if (padded_h < static_cast<long>(k) || padded_w < static_cast<long>(k))
    throw DimensionError("conv2d: kernel " + std::to_string(k) + " larger than padded input " +
                         shape_str(xs));
  const std::size_t oh = static_cast<std::size_t>((padded_h - static_cast<long>(k)) / stride + 1);
  const std::size_t ow = static_cast<std::size_t>((padded_w - static_cast<long>(k)) / stride + 1);
  const std::size_t ckk = c * k * k, plane = oh * ow;
  const bool pointwise = (k == 1 && stride == 1 && padding == 0);

  const auto& xd = input.value().data;
  ConstMatMap wm(weight.value().data.data(), static_cast<Eigen::Index>(o),
                 static_cast<Eigen::Index>(ckk));
  Eigen::Map<const Eigen::VectorXd> bv(bias.value().data.data(), static_cast<Eigen::Index>(o));

  Tensor out = Tensor::zeros({n, o, oh, ow});
  auto cols = std::make_shared<std::vector<double>>();
  if (!pointwise) cols->resize(n * ckk * plane);
  for (std::size_t b = 0; b < n; ++b) {
    const double* colp = xd.data() + b * c * h * w;
    if (!pointwise) {
      double* dst = cols->data() + b * ckk * plane;
      im2col(colp, c, h, w, k, stride, padding, oh, ow, dst);
      colp = dst;
    }
    ConstMatMap cm(colp, static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(plane));
    MatMap om(out.data.data() + b * o * plane, static_cast<Eigen::Index>(o),
              static_cast<Eigen::Index>(plane));
    om.noalias() = wm * cm;
    om.colwise() += bv;
  }

  return input.tape().record(
      "conv2d", std::move(out), {input, weight, bias},
      [=](Tape& t, const std::vector<double>& g) {
        const auto& wdat = weight.value().data;
        ConstMatMap wmat(wdat.data(), static_cast<Eigen::Index>(o),
                         static_cast<Eigen::Index>(ckk));
        std::vector<double> dcols(pointwise ? 0 : ckk * plane);
        for (std::size_t b = 0; b < n; ++b) {
          ConstMatMap gm(g.data() + b * o * plane, static_cast<Eigen::Index>(o),
                         static_cast<Eigen::Index>(plane));
          const double* colp = pointwise ? input.value().data.data() + b * c * h * w
                                         : cols->data() + b * ckk * plane;
          ConstMatMap cm(colp, static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(plane));
          if (weight.requires_grad()) {
            MatMap gw(t.grad(weight.id()).data(), static_cast<Eigen::Index>(o),
                      static_cast<Eigen::Index>(ckk));
            gw.noalias() += gm * cm.transpose();
          }
          if (bias.requires_grad()) {
            Eigen::Map<Eigen::VectorXd> gb(t.grad(bias.id()).data(), static_cast<Eigen::Index>(o));
            gb += gm.rowwise().sum();
          }
          if (input.requires_grad()) {
            double* gx = t.grad(input.id()).data() + b * c * h * w;
            if (pointwise) {
              MatMap gxm(gx, static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(plane));
              gxm.noalias() += wmat.transpose() * gm;
            } else {
              MatMap dc(dcols.data(), static_cast<Eigen::Index>(ckk),
                        static_cast<Eigen::Index>(plane));
              dc.noalias() = wmat.transpose() * gm;
              col2im(dcols.data(), c, h, w, k, stride, padding, oh, ow, gx);
            }
          }
        }
      });
}

Var bilinear_resize(Var input, std::size_t out_h, std::size_t out_w) {
  require_rank("bilinear_resize", input, 4);
  if (out_h == 0 || out_w == 0)
    throw DimensionError("bilinear_resize: target size must be at least 1x1");
  const auto& s = input.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  auto ty = std::make_shared<Taps>(bilinear_taps(h, out_h));
  auto tx = std::make_shared<Taps>(bilinear_taps(w, out_w));
  const auto& xd = input.value().data;
  Tensor out = Tensor::zeros({s[0], s[1], out_h, out_w});
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = xd.data() + p * h * w;
    double* dst = out.data.data() + p * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const double fy = ty->frac[oy];
      const double* r0 = src + ty->lo[oy] * w;
      const double* r1 = src + ty->hi[oy] * w;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const double fx = tx->frac[ox];
        const std::size_t x0 = tx->lo[ox], x1 = tx->hi[ox];
        const double top = r0[x0] + fx * (r0[x1] - r0[x0]);
        const double bot = r1[x0] + fx * (r1[x1] - r1[x0]);
        dst[oy * out_w + ox] = top + fy * (bot - top);
      }
    }
  }
  return input.tape().record(
      "bilinear_resize", std::move(out), {input},
      [=](Tape& t, const std::vector<double>& g) {
        auto& gx = t.grad(input.id());
        for (std::size_t p = 0; p < planes; ++p) {
          double* dst = gx.data() + p * h * w;
          const double* src = g.data() + p * out_h * out_w;
          for (std::size_t oy = 0; oy < out_h; ++oy) {
            const double fy = ty->frac[oy];
            double* r0 = dst + ty->lo[oy] * w;
            double* r1 = dst + ty->hi[oy] * w;
            for (std::size_t ox = 0; ox < out_w; ++ox) {
              const double fx = tx->frac[ox];
              const std::size_t x0 = tx->lo[ox], x1 = tx->hi[ox];
              const double gv = src[oy * out_w + ox];
              r0[x0] += gv * (1 - fy) * (1 - fx);
              r0[x1] += gv * (1 - fy) * fx;
              r1[x0] += gv * fy * (1 - fx);
              r1[x1] += gv * fy * fx;
            }
          }
        }
      });
}

Var softmax(Var input, std::size_t axis) {
  if (axis >= input.value().rank())
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                         shape_str(input.shape()));
  const auto sp = split_axis(input.shape(), axis);
  const auto& xd = input.value().data;
  Tensor out = Tensor::zeros(input.shape());
  for (std::size_t a = 0; a < sp.outer; ++a)
    for (std::size_t b = 0; b < sp.inner; ++b) {
      const std::size_t base = a * sp.extent * sp.inner + b;
      double mx = xd[base];
      for (std::size_t k = 1; k < sp.extent; ++k) mx = std::max(mx, xd[base + k * sp.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < sp.extent; ++k) {
        const double e = std::exp(xd[base + k * sp.inner] - mx);
        out.data[base + k * sp.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < sp.extent; ++k) out.data[base + k * sp.inner] /= z;
    }
  auto saved = std::make_shared<std::vector<double>>(out.data);
  return input.tape().record(
      "softmax", std::move(out), {input}, [=](Tape& t, const std::vector<double>& g) {
        auto& gx = t.grad(input.id());
        const auto& y = *saved;
        for (std::size_t a = 0; a < sp.outer; ++a)
          for (std::size_t b = 0; b < sp.inner; ++b) {
            const std::size_t base = a * sp.extent * sp.inner + b;
            double dot = 0.0;
            for (std::size_t k = 0; k < sp.extent; ++k) {
              const std::size_t i = base + k * sp.inner;
              dot += g[i] * y[i];
            }
            for (std::size_t k = 0; k < sp.extent; ++k) {
              const std::size_t i = base + k * sp.inner;
              gx[i] += y[i] * (g[i] - dot);
            }
          }
      });
}

Var relu(Var input) {
  return unary(
      "relu", input, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var input) {
  auto fwd = [](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  };
  return unary("sigmoid", input, fwd, [fwd](double v) {
    const double s = fwd(v);
    return s * (1.0 - s);
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  out.requires_grad = false;
  out.grad.reset();
  const auto& bd = b.value().data;
  for (std::size_t i = 0; i < bd.size(); ++i) out.data[i] += bd[i];
  return a.tape().record("add", std::move(out), {a, b},
                         [a, b](Tape& t, const std::vector<double>& g) {
                           accumulate(t, a, g);
                           accumulate(t, b, g);
                         });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  out.requires_grad = false;
  out.grad.reset();
  const auto& bd = b.value().data;
  for (std::size_t i = 0; i < bd.size(); ++i) out.data[i] -= bd[i];
  return a.tape().record("sub", std::move(out), {a, b},
                         [a, b](Tape& t, const std::vector<double>& g) {
                           accumulate(t, a, g);
                           if (b.requires_grad()) {
                             auto& gb = t.grad(b.id());
                             for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                           }
                         });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  const auto& ad = a.value().data;
  const auto& bd = b.value().data;
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < ad.size(); ++i) out.data[i] = ad[i] * bd[i];
  return a.tape().record("mul", std::move(out), {a, b},
                         [a, b](Tape& t, const std::vector<double>& g) {
                           const auto& av = a.value().data;
                           const auto& bv = b.value().data;
                           if (a.requires_grad()) {
                             auto& ga = t.grad(a.id());
                             for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                           }
                           if (b.requires_grad()) {
                             auto& gb = t.grad(b.id());
                             for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                           }
                         });
}

Var scale(Var input, double factor) {
  return unary(
      "scale", input, [factor](double v) { return v * factor; },
      [factor](double) { return factor; });
}

Var add_scalar(Var input, double offset) {
  return unary(
      "add_scalar", input, [offset](double v) { return v + offset; }, [](double) { return 1.0; });
}

Var concat_channels(const std::vector<Var>& inputs) {
  if (inputs.empty()) throw DimensionError("concat_channels: no inputs");
  for (const auto& v : inputs) require_rank("concat_channels", v, 4);
  const auto& s0 = inputs[0].shape();
  std::size_t total_c = 0;
  for (const auto& v : inputs) {
    const auto& s = v.shape();
    if (s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3])
      throw DimensionError("concat_channels: incompatible shapes " + shape_str(s0) + " and " +
                           shape_str(s));
    total_c += s[1];
  }
  const std::size_t n = s0[0], plane = s0[2] * s0[3];
  Tensor out = Tensor::zeros({n, total_c, s0[2], s0[3]});
  for (std::size_t b = 0; b < n; ++b) {
    std::size_t offset = 0;
    for (const auto& v : inputs) {
      const std::size_t c = v.shape()[1];
      const double* src = v.value().data.data() + b * c * plane;
      std::copy(src, src + c * plane, out.data.data() + (b * total_c + offset) * plane);
      offset += c;
    }
  }
  return inputs[0].tape().record(
      "concat_channels", std::move(out), inputs, [=](Tape& t, const std::vector<double>& g) {
        for (std::size_t b = 0; b < n; ++b) {
          std::size_t offset = 0;
          for (const auto& v : inputs) {
            const std::size_t c = v.shape()[1];
            if (v.requires_grad()) {
              auto& gv = t.grad(v.id());
              const double* src = g.data() + (b * total_c + offset) * plane;
              for (std::size_t i = 0; i < c * plane; ++i) gv[b * c * plane + i] += src[i];
            }
            offset += c;
          }
        }
      });
}

Var log(Var input, double floor) {
  return unary(
      "log", input, [floor](double v) { return std::log(std::max(v, floor)); },
      [floor](double v) { return v > floor ? 1.0 / v : 0.0; });
}

Var pow(Var input, double exponent, double floor) {
  return unary(
      "pow", input, [=](double v) { return std::pow(std::max(v, floor), exponent); },
      [=](double v) { return v > floor ? exponent * std::pow(v, exponent - 1.0) : 0.0; });
}

Var sum(Var input) {
  double acc = 0.0;
  for (double v : input.value().data) acc += v;
  return input.tape().record("sum", Tensor::scalar(acc), {input},
                             [input](Tape& t, const std::vector<double>& g) {
                               auto& gx = t.grad(input.id());
                               for (auto& v : gx) v += g[0];
                             });
}

Var mean(Var input) {
  const double n = static_cast<double>(input.numel());
  double acc = 0.0;
  for (double v : input.value().data) acc += v;
  return input.tape().record("mean", Tensor::scalar(acc / n), {input},
                             [input, n](Tape& t, const std::vector<double>& g) {
                               auto& gx = t.grad(input.id());
                               for (auto& v : gx) v += g[0] / n;
                             });
}

Var row_l2_norm(Var input) {
  require_rank("row_l2_norm", input, 2);
  const std::size_t rows = input.shape()[0], cols = input.shape()[1];
  const auto& xd = input.value().data;
  Tensor out = Tensor::zeros({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += xd[r * cols + c] * xd[r * cols + c];
    out.data[r] = std::sqrt(acc);
  }
  auto norms = std::make_shared<std::vector<double>>(out.data);
  return input.tape().record(
      "row_l2_norm", std::move(out), {input}, [=](Tape& t, const std::vector<double>& g) {
        auto& gx = t.grad(input.id());
        const auto& x = input.value().data;
        for (std::size_t r = 0; r < rows; ++r) {
          const double nr = (*norms)[r];
          if (nr == 0.0) continue;
          for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r] * x[r * cols + c] / nr;
        }
      });
}

Var l2_norm(Var input) { return row_l2_norm(reshape(input, {1, input.numel()})); }

Var reshape(Var input, Shape shape) {
  if (shape_numel(shape) != input.numel())
    throw DimensionError("reshape: cannot view " + shape_str(input.shape()) + " as " +
                         shape_str(shape));
  Tensor out(std::move(shape), input.value().data);
  return input.tape().record("reshape", std::move(out), {input},
                             [input](Tape& t, const std::vector<double>& g) {
                               accumulate(t, input, g);
                             });
}

Var gather_rows(Var input, const std::vector<std::size_t>& rows) {
  require_rank("gather_rows", input, 2);
  if (rows.empty()) throw DimensionError("gather_rows: empty row list");
  const std::size_t nrows = input.shape()[0], cols = input.shape()[1];
  const auto& xd = input.value().data;
  Tensor out = Tensor::zeros({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= nrows)
      throw DimensionError("gather_rows: row " + std::to_string(rows[i]) + " out of range " +
                           std::to_string(nrows));
    std::copy_n(xd.data() + rows[i] * cols, cols, out.data.data() + i * cols);
  }
  return input.tape().record("gather_rows", std::move(out), {input},
                             [=](Tape& t, const std::vector<double>& g) {
                               auto& gx = t.grad(input.id());
                               for (std::size_t i = 0; i < rows.size(); ++i)
                                 for (std::size_t c = 0; c < cols; ++c)
                                   gx[rows[i] * cols + c] += g[i * cols + c];
                             });
}

Var pick(Var input, const std::vector<std::pair<std::size_t, std::size_t>>& entries) {
  require_rank("pick", input, 2);
  if (entries.empty()) throw DimensionError("pick: empty entry list");
  const std::size_t nrows = input.shape()[0], cols = input.shape()[1];
  const auto& xd = input.value().data;
  Tensor out = Tensor::zeros({entries.size()});
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto [r, c] = entries[i];
    if (r >= nrows || c >= cols)
      throw DimensionError("pick: entry (" + std::to_string(r) + ", " + std::to_string(c) +
                           ") out of range for " + shape_str(input.shape()));
    out.data[i] = xd[r * cols + c];
  }
  return input.tape().record("pick", std::move(out), {input},
                             [=](Tape& t, const std::vector<double>& g) {
                               auto& gx = t.grad(input.id());
                               for (std::size_t i = 0; i < entries.size(); ++i)
                                 gx[entries[i].first * cols + entries[i].second] += g[i];
                             });
}

Var anchor_rows(Var input, std::size_t anchors_per_cell) {
  require_rank("anchor_rows", input, 4);
  const auto& s = input.shape();
  const std::size_t k = anchors_per_cell;
  if (k == 0 || s[1] % k != 0)
    throw DimensionError("anchor_rows: " + std::to_string(s[1]) +
                         " channels not divisible by anchors_per_cell " + std::to_string(k));
  const std::size_t n = s[0], d = s[1] / k, gh = s[2], gw = s[3], cells = gh * gw;
  const auto& xd = input.value().data;
  Tensor out = Tensor::zeros({n * cells * k, d});
  auto src_index = [=](std::size_t b, std::size_t cell, std::size_t a, std::size_t col) {
    return ((b * s[1]) + a * d + col) * cells + cell;
  };
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t cell = 0; cell < cells; ++cell)
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t col = 0; col < d; ++col)
          out.data[((b * cells + cell) * k + a) * d + col] = xd[src_index(b, cell, a, col)];
  return input.tape().record(
      "anchor_rows", std::move(out), {input}, [=](Tape& t, const std::vector<double>& g) {
        auto& gx = t.grad(input.id());
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t cell = 0; cell < cells; ++cell)
            for (std::size_t a = 0; a < k; ++a)
              for (std::size_t col = 0; col < d; ++col)
                gx[src_index(b, cell, a, col)] += g[((b * cells + cell) * k + a) * d + col];
      });
}

}  // namespace pointcell::ops
