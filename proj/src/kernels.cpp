#include "poisonforge/kernels.hpp"

#include <cmath>
#include <cstring>

#include "poisonforge/parallel.hpp"

namespace poisonforge::kernels {

namespace {
inline std::size_t idx4(int n, int c, int h, int w, int C, int H, int W) {
    return ((static_cast<std::size_t>(n) * C + c) * H + h) * W + w;
}
} // namespace

// ---------------------------------------------------------------------------
// convolution
// ---------------------------------------------------------------------------

void conv2d_fwd(const float* in, const float* w, const float* b, float* out,
                int n, int ci, int h, int wid, int co, int k, int pad) {
    const int nt = num_threads();
#pragma omp parallel for collapse(2) num_threads(nt) if (nt > 1)
    for (int in_ = 0; in_ < n; ++in_) {
        for (int oc = 0; oc < co; ++oc) {
            for (int oy = 0; oy < h; ++oy) {
                for (int ox = 0; ox < wid; ++ox) {
                    float acc = b ? b[oc] : 0.0f;
                    for (int ic = 0; ic < ci; ++ic) {
                        for (int ky = 0; ky < k; ++ky) {
                            const int iy = oy + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int ix = ox + kx - pad;
                                if (ix < 0 || ix >= wid) continue;
                                acc += w[((static_cast<std::size_t>(oc) * ci + ic) * k + ky) * k + kx] *
                                       in[idx4(in_, ic, iy, ix, ci, h, wid)];
                            }
                        }
                    }
                    out[idx4(in_, oc, oy, ox, co, h, wid)] = acc;
                }
            }
        }
    }
}

void conv2d_bwd_input(const float* gout, const float* w, float* gin,
                      int n, int ci, int h, int wid, int co, int k, int pad) {
    const int nt = num_threads();
#pragma omp parallel for collapse(2) num_threads(nt) if (nt > 1)
    for (int in_ = 0; in_ < n; ++in_) {
        for (int ic = 0; ic < ci; ++ic) {
            for (int iy = 0; iy < h; ++iy) {
                for (int ix = 0; ix < wid; ++ix) {
                    float acc = 0.0f;
                    for (int oc = 0; oc < co; ++oc) {
                        for (int ky = 0; ky < k; ++ky) {
                            const int oy = iy - ky + pad;
                            if (oy < 0 || oy >= h) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int ox = ix - kx + pad;
                                if (ox < 0 || ox >= wid) continue;
                                acc += w[((static_cast<std::size_t>(oc) * ci + ic) * k + ky) * k + kx] *
                                       gout[idx4(in_, oc, oy, ox, co, h, wid)];
                            }
                        }
                    }
                    gin[idx4(in_, ic, iy, ix, ci, h, wid)] = acc;
                }
            }
        }
    }
}

void conv2d_bwd_params(const float* gout, const float* in, float* gw, float* gb,
                       int n, int ci, int h, int wid, int co, int k, int pad) {
    const int nt = num_threads();
#pragma omp parallel for collapse(2) num_threads(nt) if (nt > 1)
    for (int oc = 0; oc < co; ++oc) {
        for (int ic = 0; ic < ci; ++ic) {
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    float acc = 0.0f;
                    for (int in_ = 0; in_ < n; ++in_) {
                        for (int oy = 0; oy < h; ++oy) {
                            const int iy = oy + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            for (int ox = 0; ox < wid; ++ox) {
                                const int ix = ox + kx - pad;
                                if (ix < 0 || ix >= wid) continue;
                                acc += gout[idx4(in_, oc, oy, ox, co, h, wid)] *
                                       in[idx4(in_, ic, iy, ix, ci, h, wid)];
                            }
                        }
                    }
                    gw[((static_cast<std::size_t>(oc) * ci + ic) * k + ky) * k + kx] = acc;
                }
            }
        }
    }
    if (gb) {
#pragma omp parallel for num_threads(nt) if (nt > 1)
        for (int oc = 0; oc < co; ++oc) {
            float acc = 0.0f;
            for (int in_ = 0; in_ < n; ++in_)
                for (int oy = 0; oy < h; ++oy)
                    for (int ox = 0; ox < wid; ++ox)
                        acc += gout[idx4(in_, oc, oy, ox, co, h, wid)];
            gb[oc] = acc;
        }
    }
}

// ---------------------------------------------------------------------------
// linear
// ---------------------------------------------------------------------------

void linear_fwd(const float* x, const float* w, const float* b, float* out,
                int n, int in_dim, int out_dim) {
    const int nt = num_threads();
#pragma omp parallel for num_threads(nt) if (nt > 1)
    for (int i = 0; i < n; ++i) {
        const float* xi = x + static_cast<std::size_t>(i) * in_dim;
        float* oi = out + static_cast<std::size_t>(i) * out_dim;
        for (int o = 0; o < out_dim; ++o) {
            float acc = b ? b[o] : 0.0f;
            const float* wo = w + static_cast<std::size_t>(o) * in_dim;
            for (int j = 0; j < in_dim; ++j) acc += wo[j] * xi[j];
            oi[o] = acc;
        }
    }
}

void linear_bwd_input(const float* gout, const float* w, float* gin,
                      int n, int in_dim, int out_dim) {
    const int nt = num_threads();
#pragma omp parallel for num_threads(nt) if (nt > 1)
    for (int i = 0; i < n; ++i) {
        const float* gi = gout + static_cast<std::size_t>(i) * out_dim;
        float* dst = gin + static_cast<std::size_t>(i) * in_dim;
        for (int j = 0; j < in_dim; ++j) {
            float acc = 0.0f;
            for (int o = 0; o < out_dim; ++o)
                acc += gi[o] * w[static_cast<std::size_t>(o) * in_dim + j];
            dst[j] = acc;
        }
    }
}

void linear_bwd_params(const float* gout, const float* x, float* gw, float* gb,
                       int n, int in_dim, int out_dim) {
    const int nt = num_threads();
#pragma omp parallel for num_threads(nt) if (nt > 1)
    for (int o = 0; o < out_dim; ++o) {
        float* gwo = gw + static_cast<std::size_t>(o) * in_dim;
        for (int j = 0; j < in_dim; ++j) gwo[j] = 0.0f;
        float gbo = 0.0f;
        for (int i = 0; i < n; ++i) {
            const float g = gout[static_cast<std::size_t>(i) * out_dim + o];
            const float* xi = x + static_cast<std::size_t>(i) * in_dim;
            for (int j = 0; j < in_dim; ++j) gwo[j] += g * xi[j];
            gbo += g;
        }
        if (gb) gb[o] = gbo;
    }
}

// ---------------------------------------------------------------------------
// batch normalization
// ---------------------------------------------------------------------------

void bn2d_stats(const float* in, int n, int c, int h, int w,
                float* mean, float* var) {
    const int nt = num_threads();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const double count = static_cast<double>(n) * plane;
#pragma omp parallel for num_threads(nt) if (nt > 1)
    for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const float* p = in + (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                const double v = p[j];
                sum += v;
                sq += v * v;
            }
        }
        const double m = sum / count;
        mean[ch] = static_cast<float>(m);
        var[ch] = static_cast<float>(sq / count - m * m);
    }
}

void bn2d_fwd_train(const float* in, const float* mean, const float* var,
                    const float* gamma, const float* beta, float eps,
                    float* out, float* xhat, int n, int c, int h, int w) {
    const int nt = num_threads();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
#pragma omp parallel for collapse(2) num_threads(nt) if (nt > 1)
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const float inv = 1.0f / std::sqrt(var[ch] + eps);
            const float m = mean[ch], g = gamma[ch], b = beta[ch];
            const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                const float xh = (in[base + j] - m) * inv;
                xhat[base + j] = xh;
                out[base + j] = g * xh + b;
            }
        }
    }
}

void bn2d_fwd_eval(const float* in, const float* rmean, const float* rvar,
                   const float* gamma, const float* beta, float eps,
                   float* out, int n, int c, int h, int w) {
    const int nt = num_threads();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
#pragma omp parallel for collapse(2) num_threads(nt) if (nt > 1)
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const float inv = 1.0f / std::sqrt(rvar[ch] + eps);
            const float m = rmean[ch], g = gamma[ch], b = beta[ch];
            const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j)
                out[base + j] = g * (in[base + j] - m) * inv + b;
        }
    }
}

void bn2d_bwd(const float* gout, const float* xhat, const float* gamma,
              const float* var, float eps, float* gin, float* ggamma,
              float* gbeta, int n, int c, int h, int w) {
    const int nt = num_threads();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const double count = static_cast<double>(n) * plane;
#pragma omp parallel for num_threads(nt) if (nt > 1)
    for (int ch = 0; ch < c; ++ch) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (int i = 0; i < n; ++i) {
            const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                sum_g += gout[base + j];
                sum_gx += gout[base + j] * xhat[base + j];
            }
        }
        ggamma[ch] = static_cast<float>(sum_gx);
        gbeta[ch] = static_cast<float>(sum_g);
        const float inv = 1.0f / std::sqrt(var[ch] + eps);
        const float scale = gamma[ch] * inv;
        const float mg = static_cast<float>(sum_g / count);
        const float mgx = static_cast<float>(sum_gx / count);
        for (int i = 0; i < n; ++i) {
            const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j)
                gin[base + j] = scale * (gout[base + j] - mg - xhat[base + j] * mgx);
        }
    }
}

void bn2d_bwd_input_eval(const float* gout, const float* gamma, const float* rvar,
                         float eps, float* gin, int n, int c, int h, int w) {
    const int nt = num_threads();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
#pragma omp parallel for collapse(2) num_threads(nt) if (nt > 1)
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const float scale = gamma[ch] / std::sqrt(rvar[ch] + eps);
            const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) gin[base + j] = scale * gout[base + j];
        }
    }
}

// ---------------------------------------------------------------------------
// elementwise / pooling / normalization
// ---------------------------------------------------------------------------

void relu_fwd(const float* in, float* out, std::size_t count) {
    const int nt = num_threads();
    const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for num_threads(nt) if (nt > 1)
    for (std::ptrdiff_t i = 0; i < c; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
}

void relu_bwd(const float* gout, const float* in, float* gin, std::size_t count) {
    const int nt = num_threads();
    const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for num_threads(nt) if (nt > 1)
    for (std::ptrdiff_t i = 0; i < c; ++i) gin[i] = in[i] > 0.0f ? gout[i] : 0.0f;
}

void avgpool2_fwd(const float* in, float* out, int n, int c, int h, int w) {
    const int nt = num_threads();
    const int oh = h / 2, ow = w / 2;
#pragma omp parallel for collapse(2) num_threads(nt) if (nt > 1)
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const float s = in[idx4(i, ch, 2 * oy, 2 * ox, c, h, w)] +
                                    in[idx4(i, ch, 2 * oy, 2 * ox + 1, c, h, w)] +
                                    in[idx4(i, ch, 2 * oy + 1, 2 * ox, c, h, w)] +
                                    in[idx4(i, ch, 2 * oy + 1, 2 * ox + 1, c, h, w)];
                    out[idx4(i, ch, oy, ox, c, oh, ow)] = 0.25f * s;
                }
            }
        }
    }
}

void avgpool2_bwd(const float* gout, float* gin, int n, int c, int h, int w) {
    const int nt = num_threads();
    const int oh = h / 2, ow = w / 2;
#pragma omp parallel for collapse(2) num_threads(nt) if (nt > 1)
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const float g = 0.25f * gout[idx4(i, ch, oy, ox, c, oh, ow)];
                    gin[idx4(i, ch, 2 * oy, 2 * ox, c, h, w)] = g;
                    gin[idx4(i, ch, 2 * oy, 2 * ox + 1, c, h, w)] = g;
                    gin[idx4(i, ch, 2 * oy + 1, 2 * ox, c, h, w)] = g;
                    gin[idx4(i, ch, 2 * oy + 1, 2 * ox + 1, c, h, w)] = g;
                }
            }
        }
    }
}

void l2norm_fwd(const float* in, float* out, float* inv_norm, int n, int d) {
    const int nt = num_threads();
#pragma omp parallel for num_threads(nt) if (nt > 1)
    for (int i = 0; i < n; ++i) {
        const float* x = in + static_cast<std::size_t>(i) * d;
        float* o = out + static_cast<std::size_t>(i) * d;
        double sq = 0.0;
        for (int j = 0; j < d; ++j) sq += static_cast<double>(x[j]) * x[j];
        const float inv = 1.0f / static_cast<float>(std::sqrt(sq) + 1e-12);
        inv_norm[i] = inv;
        for (int j = 0; j < d; ++j) o[j] = x[j] * inv;
    }
}

void l2norm_bwd(const float* gout, const float* out, const float* inv_norm,
                float* gin, int n, int d) {
    const int nt = num_threads();
#pragma omp parallel for num_threads(nt) if (nt > 1)
    for (int i = 0; i < n; ++i) {
        const float* g = gout + static_cast<std::size_t>(i) * d;
        const float* z = out + static_cast<std::size_t>(i) * d;
        float* dst = gin + static_cast<std::size_t>(i) * d;
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += static_cast<double>(g[j]) * z[j];
        for (int j = 0; j < d; ++j)
            dst[j] = inv_norm[i] * (g[j] - static_cast<float>(dot) * z[j]);
    }
}

// ---------------------------------------------------------------------------
// serial references
// ---------------------------------------------------------------------------

namespace serial {

void conv2d_fwd(const float* in, const float* w, const float* b, float* out,
                int n, int ci, int h, int wid, int co, int k, int pad) {
    for (int in_ = 0; in_ < n; ++in_)
        for (int oc = 0; oc < co; ++oc)
            for (int oy = 0; oy < h; ++oy)
                for (int ox = 0; ox < wid; ++ox) {
                    float acc = b ? b[oc] : 0.0f;
                    for (int ic = 0; ic < ci; ++ic)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy + ky - pad;
                                const int ix = ox + kx - pad;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= wid) continue;
                                acc += w[((static_cast<std::size_t>(oc) * ci + ic) * k + ky) * k + kx] *
                                       in[idx4(in_, ic, iy, ix, ci, h, wid)];
                            }
                    out[idx4(in_, oc, oy, ox, co, h, wid)] = acc;
                }
}

void conv2d_bwd_input(const float* gout, const float* w, float* gin,
                      int n, int ci, int h, int wid, int co, int k, int pad) {
    for (int in_ = 0; in_ < n; ++in_)
        for (int ic = 0; ic < ci; ++ic)
            for (int iy = 0; iy < h; ++iy)
                for (int ix = 0; ix < wid; ++ix) {
                    float acc = 0.0f;
                    for (int oc = 0; oc < co; ++oc)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int oy = iy - ky + pad;
                                const int ox = ix - kx + pad;
                                if (oy < 0 || oy >= h || ox < 0 || ox >= wid) continue;
                                acc += w[((static_cast<std::size_t>(oc) * ci + ic) * k + ky) * k + kx] *
                                       gout[idx4(in_, oc, oy, ox, co, h, wid)];
                            }
                    gin[idx4(in_, ic, iy, ix, ci, h, wid)] = acc;
                }
}

void conv2d_bwd_params(const float* gout, const float* in, float* gw, float* gb,
                       int n, int ci, int h, int wid, int co, int k, int pad) {
    for (int oc = 0; oc < co; ++oc)
        for (int ic = 0; ic < ci; ++ic)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    float acc = 0.0f;
                    for (int in_ = 0; in_ < n; ++in_)
                        for (int oy = 0; oy < h; ++oy)
                            for (int ox = 0; ox < wid; ++ox) {
                                const int iy = oy + ky - pad;
                                const int ix = ox + kx - pad;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= wid) continue;
                                acc += gout[idx4(in_, oc, oy, ox, co, h, wid)] *
                                       in[idx4(in_, ic, iy, ix, ci, h, wid)];
                            }
                    gw[((static_cast<std::size_t>(oc) * ci + ic) * k + ky) * k + kx] = acc;
                }
    if (gb)
        for (int oc = 0; oc < co; ++oc) {
            float acc = 0.0f;
            for (int in_ = 0; in_ < n; ++in_)
                for (int oy = 0; oy < h; ++oy)
                    for (int ox = 0; ox < wid; ++ox)
                        acc += gout[idx4(in_, oc, oy, ox, co, h, wid)];
            gb[oc] = acc;
        }
}

void linear_fwd(const float* x, const float* w, const float* b, float* out,
                int n, int in_dim, int out_dim) {
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < out_dim; ++o) {
            float acc = b ? b[o] : 0.0f;
            for (int j = 0; j < in_dim; ++j)
                acc += w[static_cast<std::size_t>(o) * in_dim + j] *
                       x[static_cast<std::size_t>(i) * in_dim + j];
            out[static_cast<std::size_t>(i) * out_dim + o] = acc;
        }
}

void bn2d_stats(const float* in, int n, int c, int h, int w,
                float* mean, float* var) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const double count = static_cast<double>(n) * plane;
    for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const float* p = in + (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                sum += p[j];
                sq += static_cast<double>(p[j]) * p[j];
            }
        }
        const double m = sum / count;
        mean[ch] = static_cast<float>(m);
        var[ch] = static_cast<float>(sq / count - m * m);
    }
}

void avgpool2_fwd(const float* in, float* out, int n, int c, int h, int w) {
    const int oh = h / 2, ow = w / 2;
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const float s = in[idx4(i, ch, 2 * oy, 2 * ox, c, h, w)] +
                                    in[idx4(i, ch, 2 * oy, 2 * ox + 1, c, h, w)] +
                                    in[idx4(i, ch, 2 * oy + 1, 2 * ox, c, h, w)] +
                                    in[idx4(i, ch, 2 * oy + 1, 2 * ox + 1, c, h, w)];
                    out[idx4(i, ch, oy, ox, c, oh, ow)] = 0.25f * s;
                }
}

void relu_fwd(const float* in, float* out, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
}

} // namespace serial

} // namespace poisonforge::kernels
