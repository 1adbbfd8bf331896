#include "pstx/ops.hpp"

#include <cmath>
#include <numbers>

namespace pstx {

using Eigen::Index;
using Eigen::VectorXd;
using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
}

void require_rank(const Tensor& t, int rank, const char* op, const char* what) {
  require(t.rank() == rank, std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                                ", got " + shape_string(t.shape()));
}

detail::Node& parent(detail::Node& n, size_t i) { return *n.parents[i]; }

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd f, Deriv df) {
  VectorXd y = x.value().unaryExpr(f);
  return Tensor::make(x.shape(), y, {x}, [df](detail::Node& n) {
    auto& px = parent(n, 0);
    VectorXd g(n.grad.size());
    for (Index i = 0; i < g.size(); ++i) g[i] = n.grad[i] * df(px.value[i], n.value[i]);
    detail::accumulate(px, g);
  });
}

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double normal_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); }

// Columns of the unfolded input: row (c*k+ki)*k+kj, column oh*Wo+ow.
void im2col(const double* in, int channels, int h, int w, int k, int stride, int pad, int ho, int wo,
            MatRM& cols) {
  cols.setZero(static_cast<Index>(channels) * k * k, static_cast<Index>(ho) * wo);
  for (int c = 0; c < channels; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const Index row = (static_cast<Index>(c) * k + ki) * k + kj;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= h) continue;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * stride - pad + kj;
            if (iw < 0 || iw >= w) continue;
            cols(row, static_cast<Index>(oh) * wo + ow) = in[(static_cast<Index>(c) * h + ih) * w + iw];
          }
        }
      }
    }
  }
}

void col2im(const MatRM& cols, int channels, int h, int w, int k, int stride, int pad, int ho, int wo,
            double* out) {
  for (int c = 0; c < channels; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const Index row = (static_cast<Index>(c) * k + ki) * k + kj;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= h) continue;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * stride - pad + kj;
            if (iw < 0 || iw >= w) continue;
            out[(static_cast<Index>(c) * h + ih) * w + iw] += cols(row, static_cast<Index>(oh) * wo + ow);
          }
        }
      }
    }
  }
}

struct ConvGeometry {
  int batch, c_in, h, w, c_out, k, ho, wo;
};

}  // namespace

double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return Tensor::make(a.shape(), a.value() + b.value(), {a, b}, [](detail::Node& n) {
    detail::accumulate(parent(n, 0), n.grad);
    detail::accumulate(parent(n, 1), n.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return Tensor::make(a.shape(), a.value() - b.value(), {a, b}, [](detail::Node& n) {
    detail::accumulate(parent(n, 0), n.grad);
    detail::accumulate(parent(n, 1), -n.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return Tensor::make(a.shape(), a.value().cwiseProduct(b.value()), {a, b}, [](detail::Node& n) {
    auto& pa = parent(n, 0);
    auto& pb = parent(n, 1);
    if (pa.requires_grad) detail::accumulate(pa, n.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) detail::accumulate(pb, n.grad.cwiseProduct(pa.value));
  });
}

Tensor scale(const Tensor& a, double factor) {
  return Tensor::make(a.shape(), a.value() * factor, {a},
                      [factor](detail::Node& n) { detail::accumulate(parent(n, 0), n.grad * factor); });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return Tensor::make(a.shape(), a.value().array() + offset, {a},
                      [](detail::Node& n) { detail::accumulate(parent(n, 0), n.grad); });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double v) { return v * v; }, [](double x, double) { return 2.0 * x; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor softplus(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](double v, double) { return stable_sigmoid(v); });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      x, [slope](double v) { return v >= 0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0 ? 1.0 : slope; });
}

Tensor log2(const Tensor& x) {
  return unary(
      x, [](double v) { return std::log2(v); }, [](double v, double) { return 1.0 / (v * std::numbers::ln2); });
}

Tensor clamp_min(const Tensor& x, double floor) {
  return unary(
      x, [floor](double v) { return v < floor ? floor : v; },
      [floor](double v, double) { return v < floor ? 0.0 : 1.0; });
}

Tensor prelu(const Tensor& x, const Tensor& slope) {
  require_rank(x, 4, "prelu", "input");
  require(slope.numel() == x.dim(1), "prelu: slope length must equal channel count (axis 1)");
  const int b = x.dim(0), c = x.dim(1);
  const Index plane = static_cast<Index>(x.dim(2)) * x.dim(3);
  VectorXd y = x.value();
  for (int bi = 0; bi < b; ++bi)
    for (int ci = 0; ci < c; ++ci) {
      auto seg = y.segment((static_cast<Index>(bi) * c + ci) * plane, plane);
      const double a = slope.value()[ci];
      for (Index i = 0; i < plane; ++i)
        if (seg[i] < 0) seg[i] *= a;
    }
  return Tensor::make(x.shape(), std::move(y), {x, slope}, [b, c, plane](detail::Node& n) {
    auto& px = parent(n, 0);
    auto& ps = parent(n, 1);
    VectorXd gx(px.value.size());
    VectorXd gs = VectorXd::Zero(c);
    for (int bi = 0; bi < b; ++bi)
      for (int ci = 0; ci < c; ++ci) {
        const Index off = (static_cast<Index>(bi) * c + ci) * plane;
        const double a = ps.value[ci];
        for (Index i = 0; i < plane; ++i) {
          const double v = px.value[off + i];
          const double g = n.grad[off + i];
          if (v >= 0) {
            gx[off + i] = g;
          } else {
            gx[off + i] = g * a;
            gs[ci] += g * v;
          }
        }
      }
    detail::accumulate(px, gx);
    detail::accumulate(ps, gs);
  });
}

Tensor sum(const Tensor& x) {
  return Tensor::make({1}, VectorXd::Constant(1, x.value().sum()), {x}, [](detail::Node& n) {
    auto& px = parent(n, 0);
    detail::accumulate(px, VectorXd::Constant(px.value.size(), n.grad[0]));
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor mse(const Tensor& a, const Tensor& b) { return mean(square(sub(a, b))); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul", "lhs");
  require_rank(b, 2, "matmul", "rhs");
  require(a.dim(1) == b.dim(0), "matmul: inner dimension mismatch " + shape_string(a.shape()) + " x " +
                                    shape_string(b.shape()));
  const int m = a.dim(0), k = a.dim(1), nn = b.dim(1);
  MatRM out = CMapRM(a.value().data(), m, k) * CMapRM(b.value().data(), k, nn);
  return Tensor::make({m, nn}, Eigen::Map<VectorXd>(out.data(), out.size()), {a, b}, [m, k, nn](detail::Node& n) {
    auto& pa = parent(n, 0);
    auto& pb = parent(n, 1);
    CMapRM g(n.grad.data(), m, nn);
    if (pa.requires_grad) {
      MatRM ga = g * CMapRM(pb.value.data(), k, nn).transpose();
      detail::accumulate(pa, Eigen::Map<VectorXd>(ga.data(), ga.size()));
    }
    if (pb.requires_grad) {
      MatRM gb = CMapRM(pa.value.data(), m, k).transpose() * g;
      detail::accumulate(pb, Eigen::Map<VectorXd>(gb.data(), gb.size()));
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  require_rank(a, 3, "bmm", "lhs");
  require_rank(b, 3, "bmm", "rhs");
  require(a.dim(0) == b.dim(0), "bmm: group count mismatch on axis 0");
  require(a.dim(2) == b.dim(1), "bmm: inner dimension mismatch (lhs axis 2 vs rhs axis 1)");
  const int groups = a.dim(0), p = a.dim(1), q = a.dim(2), m = b.dim(2);
  VectorXd out(static_cast<Index>(groups) * p * m);
  for (int gi = 0; gi < groups; ++gi) {
    MapRM(out.data() + static_cast<Index>(gi) * p * m, p, m) =
        CMapRM(a.value().data() + static_cast<Index>(gi) * p * q, p, q) *
        CMapRM(b.value().data() + static_cast<Index>(gi) * q * m, q, m);
  }
  return Tensor::make({groups, p, m}, std::move(out), {a, b}, [groups, p, q, m](detail::Node& n) {
    auto& pa = parent(n, 0);
    auto& pb = parent(n, 1);
    VectorXd ga = VectorXd::Zero(pa.value.size());
    VectorXd gb = VectorXd::Zero(pb.value.size());
    for (int gi = 0; gi < groups; ++gi) {
      CMapRM g(n.grad.data() + static_cast<Index>(gi) * p * m, p, m);
      CMapRM av(pa.value.data() + static_cast<Index>(gi) * p * q, p, q);
      CMapRM bv(pb.value.data() + static_cast<Index>(gi) * q * m, q, m);
      MapRM(ga.data() + static_cast<Index>(gi) * p * q, p, q) = g * bv.transpose();
      MapRM(gb.data() + static_cast<Index>(gi) * q * m, q, m) = av.transpose() * g;
    }
    detail::accumulate(pa, ga);
    detail::accumulate(pb, gb);
  });
}

Tensor add_bcast(const Tensor& x, const Tensor& b) {
  require_rank(x, 3, "add_bcast", "input");
  require(b.numel() == static_cast<Index>(x.dim(0)) * x.dim(1), "add_bcast: bias must be [G,p]");
  const Index rows = static_cast<Index>(x.dim(0)) * x.dim(1);
  const int cols = x.dim(2);
  MatRM y = CMapRM(x.value().data(), rows, cols);
  y.colwise() += b.value();
  return Tensor::make(x.shape(), Eigen::Map<VectorXd>(y.data(), y.size()), {x, b}, [rows, cols](detail::Node& n) {
    detail::accumulate(parent(n, 0), n.grad);
    VectorXd gb = CMapRM(n.grad.data(), rows, cols).rowwise().sum();
    detail::accumulate(parent(n, 1), gb);
  });
}

Tensor mul_bcast(const Tensor& x, const Tensor& a) {
  require_rank(x, 3, "mul_bcast", "input");
  require(a.numel() == static_cast<Index>(x.dim(0)) * x.dim(1), "mul_bcast: factor must be [G,p]");
  const Index rows = static_cast<Index>(x.dim(0)) * x.dim(1);
  const int cols = x.dim(2);
  MatRM y = a.value().asDiagonal() * CMapRM(x.value().data(), rows, cols);
  return Tensor::make(x.shape(), Eigen::Map<VectorXd>(y.data(), y.size()), {x, a}, [rows, cols](detail::Node& n) {
    auto& px = parent(n, 0);
    auto& pa = parent(n, 1);
    CMapRM g(n.grad.data(), rows, cols);
    if (px.requires_grad) {
      MatRM gx = pa.value.asDiagonal() * g;
      detail::accumulate(px, Eigen::Map<VectorXd>(gx.data(), gx.size()));
    }
    if (pa.requires_grad) {
      VectorXd ga = g.cwiseProduct(CMapRM(px.value.data(), rows, cols)).rowwise().sum();
      detail::accumulate(pa, ga);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear", "input");
  require_rank(weight, 2, "linear", "weight");
  require(weight.dim(1) == x.dim(1), "linear: input features (axis 1) " + std::to_string(x.dim(1)) +
                                         " do not match weight axis 1 " + std::to_string(weight.dim(1)));
  require(bias.numel() == weight.dim(0), "linear: bias length must equal output features");
  const int rows = x.dim(0), in = x.dim(1), out = weight.dim(0);
  MatRM y = CMapRM(x.value().data(), rows, in) * CMapRM(weight.value().data(), out, in).transpose();
  y.rowwise() += bias.value().transpose();
  return Tensor::make({rows, out}, Eigen::Map<VectorXd>(y.data(), y.size()), {x, weight, bias},
                      [rows, in, out](detail::Node& n) {
                        auto& px = parent(n, 0);
                        auto& pw = parent(n, 1);
                        CMapRM g(n.grad.data(), rows, out);
                        if (px.requires_grad) {
                          MatRM gx = g * CMapRM(pw.value.data(), out, in);
                          detail::accumulate(px, Eigen::Map<VectorXd>(gx.data(), gx.size()));
                        }
                        if (pw.requires_grad) {
                          MatRM gw = g.transpose() * CMapRM(px.value.data(), rows, in);
                          detail::accumulate(pw, Eigen::Map<VectorXd>(gw.data(), gw.size()));
                        }
                        detail::accumulate(parent(n, 2), g.colwise().sum().transpose());
                      });
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding) {
  require_rank(input, 4, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  const int k = weight.dim(2);
  require(weight.dim(3) == k, "conv2d: kernel must be square (weight axes 2 and 3)");
  require(k % 2 == 1, "conv2d: kernel size must be odd (weight axis 2)");
  require(stride >= 1 && padding >= 0, "conv2d: stride must be >= 1 and padding >= 0");
  require(weight.dim(1) == input.dim(1), "conv2d: input channels (axis 1) " + std::to_string(input.dim(1)) +
                                             " do not match weight axis 1 " + std::to_string(weight.dim(1)));
  require(bias.numel() == weight.dim(0), "conv2d: bias length must equal output channels (weight axis 0)");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(0), k, 0, 0};
  const int hnum = g.h + 2 * padding - k;
  const int wnum = g.w + 2 * padding - k;
  require(hnum >= 0, "conv2d: output height < 1 (axis 2)");
  require(wnum >= 0, "conv2d: output width < 1 (axis 3)");
  g.ho = hnum / stride + 1;
  g.wo = wnum / stride + 1;

  const Index in_sz = static_cast<Index>(g.c_in) * g.h * g.w;
  const Index out_plane = static_cast<Index>(g.ho) * g.wo;
  const Index out_sz = g.c_out * out_plane;
  CMapRM wm(weight.value().data(), g.c_out, static_cast<Index>(g.c_in) * k * k);
  VectorXd out(g.batch * out_sz);
  MatRM cols;
  for (int b = 0; b < g.batch; ++b) {
    im2col(input.value().data() + b * in_sz, g.c_in, g.h, g.w, k, stride, padding, g.ho, g.wo, cols);
    MapRM ob(out.data() + b * out_sz, g.c_out, out_plane);
    ob.noalias() = wm * cols;
    ob.colwise() += bias.value();
  }
  return Tensor::make({g.batch, g.c_out, g.ho, g.wo}, std::move(out), {input, weight, bias},
                      [g, stride, padding, in_sz, out_sz, out_plane](detail::Node& n) {
                        auto& px = parent(n, 0);
                        auto& pw = parent(n, 1);
                        auto& pb = parent(n, 2);
                        const Index kk = static_cast<Index>(g.c_in) * g.k * g.k;
                        CMapRM wm(pw.value.data(), g.c_out, kk);
                        VectorXd gx = VectorXd::Zero(px.requires_grad ? px.value.size() : 0);
                        MatRM gw = MatRM::Zero(g.c_out, kk);
                        VectorXd gb = VectorXd::Zero(g.c_out);
                        MatRM cols;
                        for (int b = 0; b < g.batch; ++b) {
                          CMapRM go(n.grad.data() + b * out_sz, g.c_out, out_plane);
                          gb += go.rowwise().sum();
                          if (pw.requires_grad) {
                            im2col(px.value.data() + b * in_sz, g.c_in, g.h, g.w, g.k, stride, padding, g.ho,
                                   g.wo, cols);
                            gw.noalias() += go * cols.transpose();
                          }
                          if (px.requires_grad) {
                            MatRM gcols = wm.transpose() * go;
                            col2im(gcols, g.c_in, g.h, g.w, g.k, stride, padding, g.ho, g.wo,
                                   gx.data() + b * in_sz);
                          }
                        }
                        if (px.requires_grad) detail::accumulate(px, gx);
                        if (pw.requires_grad) detail::accumulate(pw, Eigen::Map<VectorXd>(gw.data(), gw.size()));
                        detail::accumulate(pb, gb);
                      });
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding) {
  require_rank(input, 4, "conv_transpose2d", "input");
  require_rank(weight, 4, "conv_transpose2d", "weight");
  const int k = weight.dim(2);
  require(weight.dim(3) == k, "conv_transpose2d: kernel must be square (weight axes 2 and 3)");
  require(stride >= 1 && padding >= 0, "conv_transpose2d: stride must be >= 1 and padding >= 0");
  require(weight.dim(0) == input.dim(1), "conv_transpose2d: input channels (axis 1) " +
                                             std::to_string(input.dim(1)) + " do not match weight axis 0 " +
                                             std::to_string(weight.dim(0)));
  require(bias.numel() == weight.dim(1), "conv_transpose2d: bias length must equal weight axis 1");
  // Here (h, w) is the small input grid and (ho, wo) the produced grid.
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(1), k, 0, 0};
  g.ho = (g.h - 1) * stride - 2 * padding + k;
  g.wo = (g.w - 1) * stride - 2 * padding + k;
  require(g.ho >= 1, "conv_transpose2d: output height < 1 (axis 2)");
  require(g.wo >= 1, "conv_transpose2d: output width < 1 (axis 3)");

  const Index in_plane = static_cast<Index>(g.h) * g.w;
  const Index in_sz = g.c_in * in_plane;
  const Index out_sz = static_cast<Index>(g.c_out) * g.ho * g.wo;
  const Index kk = static_cast<Index>(g.c_out) * k * k;
  CMapRM wm(weight.value().data(), g.c_in, kk);
  VectorXd out = VectorXd::Zero(g.batch * out_sz);
  for (int b = 0; b < g.batch; ++b) {
    MatRM cols = wm.transpose() * CMapRM(input.value().data() + b * in_sz, g.c_in, in_plane);
    col2im(cols, g.c_out, g.ho, g.wo, k, stride, padding, g.h, g.w, out.data() + b * out_sz);
    MapRM(out.data() + b * out_sz, g.c_out, static_cast<Index>(g.ho) * g.wo).colwise() += bias.value();
  }
  return Tensor::make({g.batch, g.c_out, g.ho, g.wo}, std::move(out), {input, weight, bias},
                      [g, stride, padding, in_plane, in_sz, out_sz, kk](detail::Node& n) {
                        auto& px = parent(n, 0);
                        auto& pw = parent(n, 1);
                        auto& pb = parent(n, 2);
                        CMapRM wm(pw.value.data(), g.c_in, kk);
                        VectorXd gx = VectorXd::Zero(px.value.size());
                        MatRM gw = MatRM::Zero(g.c_in, kk);
                        VectorXd gb = VectorXd::Zero(g.c_out);
                        MatRM gcols;
                        for (int b = 0; b < g.batch; ++b) {
                          im2col(n.grad.data() + b * out_sz, g.c_out, g.ho, g.wo, g.k, stride, padding, g.h, g.w,
                                 gcols);
                          gb += CMapRM(n.grad.data() + b * out_sz, g.c_out, static_cast<Index>(g.ho) * g.wo)
                                    .rowwise()
                                    .sum();
                          if (px.requires_grad) MapRM(gx.data() + b * in_sz, g.c_in, in_plane) = wm * gcols;
                          if (pw.requires_grad)
                            gw.noalias() += CMapRM(px.value.data() + b * in_sz, g.c_in, in_plane) * gcols.transpose();
                        }
                        detail::accumulate(px, gx);
                        if (pw.requires_grad) detail::accumulate(pw, Eigen::Map<VectorXd>(gw.data(), gw.size()));
                        detail::accumulate(pb, gb);
                      });
}

Tensor gdn(const Tensor& input, const Tensor& beta, const Tensor& gamma, bool inverse) {
  require_rank(input, 4, "gdn", "input");
  const int c = input.dim(1);
  require(beta.numel() == c, "gdn: beta length must equal channel count (axis 1)");
  require(gamma.numel() == static_cast<Index>(c) * c, "gdn: gamma must be [C,C] for C = input axis 1");
  for (Index i = 0; i < c; ++i) {
    if (!(beta.value()[i] > 0)) throw ParameterError("gdn: beta must be strictly positive");
  }
  const int batch = input.dim(0);
  const Index plane = static_cast<Index>(input.dim(2)) * input.dim(3);
  const Index sz = c * plane;
  CMapRM gm(gamma.value().data(), c, c);
  VectorXd out(input.numel());
  for (int b = 0; b < batch; ++b) {
    CMapRM x(input.value().data() + b * sz, c, plane);
    MatRM norm = (gm * x.cwiseAbs2()).colwise() + beta.value();
    norm = norm.cwiseSqrt();
    MapRM y(out.data() + b * sz, c, plane);
    if (inverse) {
      y = x.cwiseProduct(norm);
    } else {
      y = x.cwiseQuotient(norm);
    }
  }
  return Tensor::make(input.shape(), std::move(out), {input, beta, gamma}, [=](detail::Node& n) {
    auto& px = parent(n, 0);
    auto& pbeta = parent(n, 1);
    auto& pgamma = parent(n, 2);
    CMapRM gmat(pgamma.value.data(), c, c);
    VectorXd gx(px.value.size());
    VectorXd gbeta = VectorXd::Zero(c);
    MatRM ggamma = MatRM::Zero(c, c);
    for (int b = 0; b < batch; ++b) {
      CMapRM x(px.value.data() + b * sz, c, plane);
      CMapRM go(n.grad.data() + b * sz, c, plane);
      MatRM x2 = x.cwiseAbs2();
      MatRM nrm = (gmat * x2).colwise() + pbeta.value;
      MatRM root = nrm.cwiseSqrt();
      // a = dL/dn for each normalizer entry.
      MatRM a;
      MatRM direct;
      if (inverse) {
        a = 0.5 * go.cwiseProduct(x).cwiseQuotient(root);
        direct = go.cwiseProduct(root);
      } else {
        a = -0.5 * go.cwiseProduct(x).cwiseQuotient(nrm.cwiseProduct(root));
        direct = go.cwiseQuotient(root);
      }
      MapRM(gx.data() + b * sz, c, plane) = direct + 2.0 * x.cwiseProduct(gmat.transpose() * a);
      gbeta += a.rowwise().sum();
      ggamma.noalias() += a * x2.transpose();
    }
    detail::accumulate(px, gx);
    detail::accumulate(pbeta, gbeta);
    detail::accumulate(pgamma, Eigen::Map<VectorXd>(ggamma.data(), ggamma.size()));
  });
}

Tensor softmax_per_pixel(const Tensor& stack_in) {
  require(stack_in.rank() >= 2, "softmax_per_pixel: input must be [B,S,...]");
  const int batch = stack_in.dim(0), streams = stack_in.dim(1);
  require(streams >= 2, "softmax_per_pixel: need at least two streams on axis 1");
  const Index inner = stack_in.numel() / (static_cast<Index>(batch) * streams);
  VectorXd y(stack_in.numel());
  const auto& x = stack_in.value();
  for (int b = 0; b < batch; ++b) {
    const Index base = static_cast<Index>(b) * streams * inner;
    for (Index i = 0; i < inner; ++i) {
      double mx = x[base + i];
      for (int s = 1; s < streams; ++s) mx = std::max(mx, x[base + s * inner + i]);
      double z = 0;
      for (int s = 0; s < streams; ++s) {
        const double e = std::exp(x[base + s * inner + i] - mx);
        y[base + s * inner + i] = e;
        z += e;
      }
      for (int s = 0; s < streams; ++s) y[base + s * inner + i] /= z;
    }
  }
  return Tensor::make(stack_in.shape(), std::move(y), {stack_in}, [batch, streams, inner](detail::Node& n) {
    VectorXd gx(n.value.size());
    for (int b = 0; b < batch; ++b) {
      const Index base = static_cast<Index>(b) * streams * inner;
      for (Index i = 0; i < inner; ++i) {
        double dot = 0;
        for (int s = 0; s < streams; ++s) dot += n.value[base + s * inner + i] * n.grad[base + s * inner + i];
        for (int s = 0; s < streams; ++s) {
          const Index j = base + s * inner + i;
          gx[j] = n.value[j] * (n.grad[j] - dot);
        }
      }
    }
    detail::accumulate(parent(n, 0), gx);
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(shape_numel(shape) == x.numel(),
          "reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  return Tensor::make(std::move(shape), x.value(), {x},
                      [](detail::Node& n) { detail::accumulate(parent(n, 0), n.grad); });
}

Tensor stack(const std::vector<Tensor>& inputs) {
  require(!inputs.empty(), "stack: no inputs");
  const Shape& s0 = inputs.front().shape();
  require(!s0.empty(), "stack: inputs must have a batch axis");
  for (const auto& t : inputs) require(t.shape() == s0, "stack: all inputs must share shape " + shape_string(s0));
  const int batch = s0[0];
  const int streams = static_cast<int>(inputs.size());
  const Index inner = inputs.front().numel() / batch;
  VectorXd y(inner * batch * streams);
  for (int b = 0; b < batch; ++b)
    for (int s = 0; s < streams; ++s)
      y.segment((static_cast<Index>(b) * streams + s) * inner, inner) = inputs[s].value().segment(b * inner, inner);
  Shape out = s0;
  out.insert(out.begin() + 1, streams);
  return Tensor::make(std::move(out), std::move(y), inputs, [batch, streams, inner](detail::Node& n) {
    for (int s = 0; s < streams; ++s) {
      auto& p = parent(n, s);
      if (!p.requires_grad) continue;
      VectorXd g(p.value.size());
      for (int b = 0; b < batch; ++b)
        g.segment(b * inner, inner) = n.grad.segment((static_cast<Index>(b) * streams + s) * inner, inner);
      detail::accumulate(p, g);
    }
  });
}

Tensor select(const Tensor& stacked, int slot) {
  require(stacked.rank() >= 2, "select: input must be [B,S,...]");
  const int batch = stacked.dim(0), streams = stacked.dim(1);
  require(slot >= 0 && slot < streams, "select: slot out of range on axis 1");
  const Index inner = stacked.numel() / (static_cast<Index>(batch) * streams);
  VectorXd y(inner * batch);
  for (int b = 0; b < batch; ++b)
    y.segment(b * inner, inner) = stacked.value().segment((static_cast<Index>(b) * streams + slot) * inner, inner);
  Shape out = stacked.shape();
  out.erase(out.begin() + 1);
  return Tensor::make(std::move(out), std::move(y), {stacked}, [=](detail::Node& n) {
    auto& p = parent(n, 0);
    VectorXd g = VectorXd::Zero(p.value.size());
    for (int b = 0; b < batch; ++b)
      g.segment((static_cast<Index>(b) * streams + slot) * inner, inner) = n.grad.segment(b * inner, inner);
    detail::accumulate(p, g);
  });
}

Tensor concat0(const std::vector<Tensor>& inputs) {
  require(!inputs.empty(), "concat0: no inputs");
  Shape tail(inputs.front().shape().begin() + 1, inputs.front().shape().end());
  int rows = 0;
  Index total = 0;
  for (const auto& t : inputs) {
    require(Shape(t.shape().begin() + 1, t.shape().end()) == tail,
            "concat0: trailing shape mismatch " + shape_string(t.shape()));
    rows += t.dim(0);
    total += t.numel();
  }
  VectorXd y(total);
  std::vector<Index> offsets;
  Index off = 0;
  for (const auto& t : inputs) {
    offsets.push_back(off);
    y.segment(off, t.numel()) = t.value();
    off += t.numel();
  }
  Shape out = tail;
  out.insert(out.begin(), rows);
  return Tensor::make(std::move(out), std::move(y), inputs, [offsets](detail::Node& n) {
    for (size_t i = 0; i < offsets.size(); ++i) {
      auto& p = parent(n, i);
      if (p.requires_grad) detail::accumulate(p, n.grad.segment(offsets[i], p.value.size()));
    }
  });
}

Tensor transpose(const Tensor& x) {
  require_rank(x, 2, "transpose", "input");
  const int m = x.dim(0), k = x.dim(1);
  VectorXd y(x.numel());
  MapRM(y.data(), k, m) = CMapRM(x.value().data(), m, k).transpose();
  return Tensor::make({k, m}, std::move(y), {x}, [m, k](detail::Node& n) {
    VectorXd g(n.grad.size());
    MapRM(g.data(), m, k) = CMapRM(n.grad.data(), k, m).transpose();
    detail::accumulate(parent(n, 0), g);
  });
}

Tensor slice0(const Tensor& x, int start, int count) {
  require(x.rank() >= 1, "slice0: scalar input");
  require(start >= 0 && count >= 0 && start + count <= x.dim(0), "slice0: range out of bounds on axis 0");
  const Index row = x.numel() / std::max(1, x.dim(0));
  Shape out = x.shape();
  out[0] = count;
  return Tensor::make(std::move(out), x.value().segment(start * row, count * row), {x}, [=](detail::Node& n) {
    auto& p = parent(n, 0);
    VectorXd g = VectorXd::Zero(p.value.size());
    g.segment(start * row, count * row) = n.grad;
    detail::accumulate(p, g);
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank(a, 4, "concat_channels", "lhs");
  require_rank(b, 4, "concat_channels", "rhs");
  require(a.dim(0) == b.dim(0), "concat_channels: batch mismatch (axis 0)");
  require(a.dim(2) == b.dim(2), "concat_channels: height mismatch (axis 2)");
  require(a.dim(3) == b.dim(3), "concat_channels: width mismatch (axis 3)");
  const int batch = a.dim(0);
  const Index sa = a.numel() / batch, sb = b.numel() / batch;
  VectorXd y(a.numel() + b.numel());
  for (int i = 0; i < batch; ++i) {
    y.segment(i * (sa + sb), sa) = a.value().segment(i * sa, sa);
    y.segment(i * (sa + sb) + sa, sb) = b.value().segment(i * sb, sb);
  }
  return Tensor::make({batch, a.dim(1) + b.dim(1), a.dim(2), a.dim(3)}, std::move(y), {a, b},
                      [batch, sa, sb](detail::Node& n) {
                        auto& pa = parent(n, 0);
                        auto& pb = parent(n, 1);
                        VectorXd ga(batch * sa), gb(batch * sb);
                        for (int i = 0; i < batch; ++i) {
                          ga.segment(i * sa, sa) = n.grad.segment(i * (sa + sb), sa);
                          gb.segment(i * sb, sb) = n.grad.segment(i * (sa + sb) + sa, sb);
                        }
                        detail::accumulate(pa, ga);
                        detail::accumulate(pb, gb);
                      });
}

Tensor slice_channels(const Tensor& x, int start, int count) {
  require_rank(x, 4, "slice_channels", "input");
  const int batch = x.dim(0), c = x.dim(1);
  require(start >= 0 && count >= 1 && start + count <= c, "slice_channels: range out of bounds on axis 1");
  const Index plane = static_cast<Index>(x.dim(2)) * x.dim(3);
  VectorXd y(static_cast<Index>(batch) * count * plane);
  for (int b = 0; b < batch; ++b)
    y.segment(b * count * plane, count * plane) = x.value().segment((static_cast<Index>(b) * c + start) * plane, count * plane);
  return Tensor::make({batch, count, x.dim(2), x.dim(3)}, std::move(y), {x}, [=](detail::Node& n) {
    auto& p = parent(n, 0);
    VectorXd g = VectorXd::Zero(p.value.size());
    for (int b = 0; b < batch; ++b)
      g.segment((static_cast<Index>(b) * c + start) * plane, count * plane) =
          n.grad.segment(b * count * plane, count * plane);
    detail::accumulate(p, g);
  });
}

Tensor to_patches(const Tensor& x) {
  require_rank(x, 4, "to_patches", "input");
  const int batch = x.dim(0), c = x.dim(1);
  const Index plane = static_cast<Index>(x.dim(2)) * x.dim(3);
  VectorXd y(x.numel());
  for (int b = 0; b < batch; ++b)
    MapRM(y.data() + b * plane * c, plane, c) = CMapRM(x.value().data() + b * plane * c, c, plane).transpose();
  return Tensor::make({static_cast<int>(batch * plane), c}, std::move(y), {x}, [=](detail::Node& n) {
    VectorXd g(n.grad.size());
    for (int b = 0; b < batch; ++b)
      MapRM(g.data() + b * plane * c, c, plane) = CMapRM(n.grad.data() + b * plane * c, plane, c).transpose();
    detail::accumulate(parent(n, 0), g);
  });
}

Tensor from_patches(const Tensor& patches, int batch, int height, int width) {
  require_rank(patches, 2, "from_patches", "input");
  const Index plane = static_cast<Index>(height) * width;
  require(patches.dim(0) == batch * plane, "from_patches: row count (axis 0) must equal batch*height*width");
  const int c = patches.dim(1);
  VectorXd y(patches.numel());
  for (int b = 0; b < batch; ++b)
    MapRM(y.data() + b * plane * c, c, plane) = CMapRM(patches.value().data() + b * plane * c, plane, c).transpose();
  return Tensor::make({batch, c, height, width}, std::move(y), {patches}, [=](detail::Node& n) {
    VectorXd g(n.grad.size());
    for (int b = 0; b < batch; ++b)
      MapRM(g.data() + b * plane * c, plane, c) = CMapRM(n.grad.data() + b * plane * c, c, plane).transpose();
    detail::accumulate(parent(n, 0), g);
  });
}

Tensor mul_channel(const Tensor& x, const Tensor& v) {
  require_rank(x, 4, "mul_channel", "input");
  const int batch = x.dim(0), c = x.dim(1);
  require(v.numel() == c, "mul_channel: vector length must equal channel count (axis 1)");
  const Index plane = static_cast<Index>(x.dim(2)) * x.dim(3);
  VectorXd y = x.value();
  for (int b = 0; b < batch; ++b)
    for (int ci = 0; ci < c; ++ci) y.segment((static_cast<Index>(b) * c + ci) * plane, plane) *= v.value()[ci];
  return Tensor::make(x.shape(), std::move(y), {x, v}, [=](detail::Node& n) {
    auto& px = parent(n, 0);
    auto& pv = parent(n, 1);
    VectorXd gx(px.value.size());
    VectorXd gv = VectorXd::Zero(c);
    for (int b = 0; b < batch; ++b)
      for (int ci = 0; ci < c; ++ci) {
        const Index off = (static_cast<Index>(b) * c + ci) * plane;
        gx.segment(off, plane) = n.grad.segment(off, plane) * pv.value[ci];
        gv[ci] += n.grad.segment(off, plane).dot(px.value.segment(off, plane));
      }
    detail::accumulate(px, gx);
    detail::accumulate(pv, gv);
  });
}

Tensor mul_pixel(const Tensor& x, const Tensor& w) {
  require_rank(x, 4, "mul_pixel", "input");
  require_rank(w, 4, "mul_pixel", "weight map");
  require(w.dim(0) == x.dim(0) && w.dim(1) == 1 && w.dim(2) == x.dim(2) && w.dim(3) == x.dim(3),
          "mul_pixel: weight map must be [B,1,H,W] matching input " + shape_string(x.shape()));
  const int batch = x.dim(0), c = x.dim(1);
  const Index plane = static_cast<Index>(x.dim(2)) * x.dim(3);
  VectorXd y = x.value();
  for (int b = 0; b < batch; ++b)
    for (int ci = 0; ci < c; ++ci)
      y.segment((static_cast<Index>(b) * c + ci) * plane, plane).array() *= w.value().segment(b * plane, plane).array();
  return Tensor::make(x.shape(), std::move(y), {x, w}, [=](detail::Node& n) {
    auto& px = parent(n, 0);
    auto& pw = parent(n, 1);
    VectorXd gx(px.value.size());
    VectorXd gw = VectorXd::Zero(pw.value.size());
    for (int b = 0; b < batch; ++b)
      for (int ci = 0; ci < c; ++ci) {
        const Index off = (static_cast<Index>(b) * c + ci) * plane;
        gx.segment(off, plane) = n.grad.segment(off, plane).cwiseProduct(pw.value.segment(b * plane, plane));
        gw.segment(b * plane, plane) += n.grad.segment(off, plane).cwiseProduct(px.value.segment(off, plane));
      }
    detail::accumulate(px, gx);
    detail::accumulate(pw, gw);
  });
}

Tensor gaussian_likelihood(const Tensor& x, const Tensor& mu, const Tensor& sigma) {
  require_same_shape(x, mu, "gaussian_likelihood");
  require_same_shape(x, sigma, "gaussian_likelihood");
  constexpr double kFloor = 1e-12;
  const Index n = x.numel();
  VectorXd p(n);
  for (Index i = 0; i < n; ++i) {
    // Symmetric form keeps both tails in erfc's accurate range.
    const double d = std::abs(x.value()[i] - mu.value()[i]);
    const double s = sigma.value()[i];
    const double v = normal_cdf((0.5 - d) / s) - normal_cdf((-0.5 - d) / s);
    p[i] = v < kFloor ? kFloor : v;
  }
  return Tensor::make(x.shape(), std::move(p), {x, mu, sigma}, [](detail::Node& n) {
    auto& px = parent(n, 0);
    auto& pm = parent(n, 1);
    auto& ps = parent(n, 2);
    const Index len = n.value.size();
    VectorXd gx = VectorXd::Zero(len), gm = VectorXd::Zero(len), gs = VectorXd::Zero(len);
    for (Index i = 0; i < len; ++i) {
      const double s = ps.value[i];
      const double u = (px.value[i] + 0.5 - pm.value[i]) / s;
      const double l = (px.value[i] - 0.5 - pm.value[i]) / s;
      const double d = std::abs(px.value[i] - pm.value[i]);
      const double raw_p = normal_cdf((0.5 - d) / s) - normal_cdf((-0.5 - d) / s);
      if (raw_p < kFloor) continue;
      const double dpdx = (normal_pdf(u) - normal_pdf(l)) / s;
      gx[i] = n.grad[i] * dpdx;
      gm[i] = -n.grad[i] * dpdx;
      gs[i] = -n.grad[i] * (normal_pdf(u) * u - normal_pdf(l) * l) / s;
    }
    detail::accumulate(px, gx);
    detail::accumulate(pm, gm);
    detail::accumulate(ps, gs);
  });
}

Tensor logistic_interval(const Tensor& lo, const Tensor& hi) {
  require_same_shape(lo, hi, "logistic_interval");
  const Index n = lo.numel();
  VectorXd p(n);
  for (Index i = 0; i < n; ++i) {
    const double l = lo.value()[i], h = hi.value()[i];
    p[i] = (l + h > 0) ? stable_sigmoid(-l) - stable_sigmoid(-h) : stable_sigmoid(h) - stable_sigmoid(l);
  }
  return Tensor::make(lo.shape(), std::move(p), {lo, hi}, [](detail::Node& n) {
    auto& pl = parent(n, 0);
    auto& ph = parent(n, 1);
    const Index len = n.value.size();
    VectorXd gl(len), gh(len);
    for (Index i = 0; i < len; ++i) {
      const double sl = stable_sigmoid(pl.value[i]);
      const double sh = stable_sigmoid(ph.value[i]);
      gl[i] = -n.grad[i] * sl * (1.0 - sl);
      gh[i] = n.grad[i] * sh * (1.0 - sh);
    }
    detail::accumulate(pl, gl);
    detail::accumulate(ph, gh);
  });
}

Tensor normalize_power_rows(const Tensor& x, double power) {
  require_rank(x, 2, "normalize_power_rows", "input");
  if (!(power > 0)) throw ParameterError("normalize_power_rows: power must be positive");
  const int rows = x.dim(0), d = x.dim(1);
  const double symbols = static_cast<double>((d + 1) / 2);
  VectorXd factors(rows);
  VectorXd energies(rows);
  VectorXd y = x.value();
  for (int r = 0; r < rows; ++r) {
    const double e = x.value().segment(static_cast<Index>(r) * d, d).squaredNorm();
    energies[r] = e;
    factors[r] = e > 0 ? std::sqrt(power * symbols / e) : 1.0;
    y.segment(static_cast<Index>(r) * d, d) *= factors[r];
  }
  return Tensor::make(x.shape(), std::move(y), {x}, [rows, d, factors, energies](detail::Node& n) {
    auto& px = parent(n, 0);
    VectorXd g(px.value.size());
    for (int r = 0; r < rows; ++r) {
      const Index off = static_cast<Index>(r) * d;
      Eigen::Ref<const VectorXd> xv = px.value.segment(off, d);
      Eigen::Ref<const VectorXd> go = n.grad.segment(off, d);
      if (energies[r] > 0) {
        g.segment(off, d) = factors[r] * (go - (xv.dot(go) / energies[r]) * xv);
      } else {
        g.segment(off, d) = go;
      }
    }
    detail::accumulate(px, g);
  });
}

}  // namespace pstx
