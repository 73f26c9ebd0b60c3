#pragma once

#include <cstddef>

// Dense NCHW kernels backing the model layers. Every kernel comes in two
// flavours: the OpenMP version used in production and a plain-loop serial
// reference under kernels::serial used by the tests and the benchmark.
// Parallel loops range over independent output elements with a fixed inner
// reduction order, so both flavours produce bit-identical results.

namespace poisonforge::kernels {

// convolution, stride 1, square kernel k, symmetric zero padding
void conv2d_fwd(const float* in, const float* w, const float* b, float* out,
                int n, int ci, int h, int wid, int co, int k, int pad);
void conv2d_bwd_input(const float* gout, const float* w, float* gin,
                      int n, int ci, int h, int wid, int co, int k, int pad);
void conv2d_bwd_params(const float* gout, const float* in, float* gw, float* gb,
                       int n, int ci, int h, int wid, int co, int k, int pad);

void linear_fwd(const float* x, const float* w, const float* b, float* out,
                int n, int in_dim, int out_dim);
void linear_bwd_input(const float* gout, const float* w, float* gin,
                      int n, int in_dim, int out_dim);
void linear_bwd_params(const float* gout, const float* x, float* gw, float* gb,
                       int n, int in_dim, int out_dim);

// batch normalization over (n, h, w) per channel; biased variance
void bn2d_stats(const float* in, int n, int c, int h, int w,
                float* mean, float* var);
void bn2d_fwd_train(const float* in, const float* mean, const float* var,
                    const float* gamma, const float* beta, float eps,
                    float* out, float* xhat, int n, int c, int h, int w);
void bn2d_fwd_eval(const float* in, const float* rmean, const float* rvar,
                   const float* gamma, const float* beta, float eps,
                   float* out, int n, int c, int h, int w);
void bn2d_bwd(const float* gout, const float* xhat, const float* gamma,
              const float* var, float eps, float* gin, float* ggamma,
              float* gbeta, int n, int c, int h, int w);
void bn2d_bwd_input_eval(const float* gout, const float* gamma, const float* rvar,
                         float eps, float* gin, int n, int c, int h, int w);

void relu_fwd(const float* in, float* out, std::size_t count);
void relu_bwd(const float* gout, const float* in, float* gin, std::size_t count);

// 2x2 average pooling, stride 2; h and w must be even
void avgpool2_fwd(const float* in, float* out, int n, int c, int h, int w);
void avgpool2_bwd(const float* gout, float* gin, int n, int c, int h, int w);

// row-wise L2 normalization of an (n, d) matrix
void l2norm_fwd(const float* in, float* out, float* inv_norm, int n, int d);
void l2norm_bwd(const float* gout, const float* out, const float* inv_norm,
                float* gin, int n, int d);

namespace serial {

void conv2d_fwd(const float* in, const float* w, const float* b, float* out,
                int n, int ci, int h, int wid, int co, int k, int pad);
void conv2d_bwd_input(const float* gout, const float* w, float* gin,
                      int n, int ci, int h, int wid, int co, int k, int pad);
void conv2d_bwd_params(const float* gout, const float* in, float* gw, float* gb,
                       int n, int ci, int h, int wid, int co, int k, int pad);
void linear_fwd(const float* x, const float* w, const float* b, float* out,
                int n, int in_dim, int out_dim);
void bn2d_stats(const float* in, int n, int c, int h, int w,
                float* mean, float* var);
void avgpool2_fwd(const float* in, float* out, int n, int c, int h, int w);
void relu_fwd(const float* in, float* out, std::size_t count);

} // namespace serial

} // namespace poisonforge::kernels
