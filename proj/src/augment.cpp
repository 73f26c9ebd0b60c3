#include "poisonforge/augment.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "poisonforge/parallel.hpp"

namespace poisonforge::augment {

// ---------------------------------------------------------------------------
// spec & sampling
// ---------------------------------------------------------------------------

AugmentationSpec AugmentationSpec::contrastive(double s, int image_size) {
    AugmentationSpec spec;
    spec.mode = Mode::contrastive;
    spec.s_crop = spec.s_jitter = spec.s_gray = s;
    spec.image_size = image_size;
    spec.validate();
    return spec;
}

AugmentationSpec AugmentationSpec::contrastive_decoupled(double s_crop, double s_jitter,
                                                         double s_gray, int image_size) {
    AugmentationSpec spec;
    spec.mode = Mode::contrastive;
    spec.s_crop = s_crop;
    spec.s_jitter = s_jitter;
    spec.s_gray = s_gray;
    spec.image_size = image_size;
    spec.validate();
    return spec;
}

AugmentationSpec AugmentationSpec::supervised(int image_size) {
    AugmentationSpec spec;
    spec.mode = Mode::supervised;
    spec.s_crop = spec.s_jitter = spec.s_gray = 0.0;
    spec.image_size = image_size;
    spec.validate();
    return spec;
}

void AugmentationSpec::validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(s_crop) || !in01(s_jitter) || !in01(s_gray))
        throw std::invalid_argument("augmentation strengths must lie in [0, 1]");
    if (image_size <= 0) throw std::invalid_argument("image_size must be positive");
    if (mode == Mode::supervised && image_size % 8 != 0)
        throw std::invalid_argument("supervised pipeline requires image side divisible by 8");
    if (flip_prob < 0.0 || flip_prob > 1.0)
        throw std::invalid_argument("flip_prob must lie in [0, 1]");
}

TransformSample sample_transform(const AugmentationSpec& spec, RngStream& rng) {
    spec.validate();
    TransformSample t;
    t.mode = spec.mode;
    const int l = spec.image_size;

    if (spec.mode == Mode::supervised) {
        t.pad = l / 8;
        t.crop_top = rng.uniform_int(2 * t.pad + 1);
        t.crop_left = rng.uniform_int(2 * t.pad + 1);
        t.crop_h = t.crop_w = l;
        t.flip = rng.bernoulli(spec.flip_prob);
        return t;
    }

    // area fraction in [1 - 0.9 s, 1]; ceil keeps the realized fraction inside
    const double lo = 1.0 - 0.9 * spec.s_crop;
    const double frac = rng.uniform(lo, 1.0);
    const double side = std::sqrt(frac);
    t.crop_h = std::min(l, static_cast<int>(std::ceil(side * l)));
    t.crop_w = std::min(l, static_cast<int>(std::ceil(side * l)));
    t.crop_top = rng.uniform_int(l - t.crop_h + 1);
    t.crop_left = rng.uniform_int(l - t.crop_w + 1);

    t.flip = rng.bernoulli(spec.flip_prob);

    t.jitter_active = rng.bernoulli(0.8 * spec.s_jitter);
    t.brightness = rng.uniform(1.0 - 0.4 * spec.s_jitter, 1.0 + 0.4 * spec.s_jitter);
    t.contrast = rng.uniform(1.0 - 0.4 * spec.s_jitter, 1.0 + 0.4 * spec.s_jitter);
    t.saturation = rng.uniform(1.0 - 0.4 * spec.s_jitter, 1.0 + 0.4 * spec.s_jitter);
    t.hue_turns = rng.uniform(-0.1 * spec.s_jitter, 0.1 * spec.s_jitter);

    t.gray_active = rng.bernoulli(0.2 * spec.s_gray);
    return t;
}

TransformSample identity_transform(const AugmentationSpec& spec) {
    TransformSample t;
    t.mode = spec.mode;
    const int l = spec.image_size;
    if (spec.mode == Mode::supervised) {
        t.pad = l / 8;
        t.crop_top = t.crop_left = t.pad;
        t.crop_h = t.crop_w = l;
    } else {
        t.crop_top = t.crop_left = 0;
        t.crop_h = t.crop_w = l;
    }
    return t;
}

// ---------------------------------------------------------------------------
// stage helpers (templated on scalar type)
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void check_image(const Tensor<T>& img) {
    if (img.rank() != 3) throw std::invalid_argument("image must have shape (C, H, W)");
    const int c = img.dim(0);
    if (c != 1 && c != 3) throw std::invalid_argument("image must have 1 or 3 channels");
}

// bilinear resize of the crop box to (size, size); pixel-center mapping
template <typename T>
Tensor<T> crop_resize(const TransformSample& t, const Tensor<T>& in, int size) {
    const int c = in.dim(0), h = in.dim(1), w = in.dim(2);
    if (t.crop_top < 0 || t.crop_left < 0 || t.crop_top + t.crop_h > h ||
        t.crop_left + t.crop_w > w)
        throw std::invalid_argument("crop box outside the source image");
    Tensor<T> out({c, size, size});
    const double sy = static_cast<double>(t.crop_h) / size;
    const double sx = static_cast<double>(t.crop_w) / size;
    for (int oy = 0; oy < size; ++oy) {
        double fy = t.crop_top + (oy + 0.5) * sy - 0.5;
        fy = std::min(std::max(fy, 0.0), static_cast<double>(h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, h - 1);
        const T wy = static_cast<T>(fy - y0);
        for (int ox = 0; ox < size; ++ox) {
            double fx = t.crop_left + (ox + 0.5) * sx - 0.5;
            fx = std::min(std::max(fx, 0.0), static_cast<double>(w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, w - 1);
            const T wx = static_cast<T>(fx - x0);
            for (int ch = 0; ch < c; ++ch) {
                const T* p = in.data() + (static_cast<std::size_t>(ch) * h) * w;
                const T a = p[static_cast<std::size_t>(y0) * w + x0];
                const T b = p[static_cast<std::size_t>(y0) * w + x1];
                const T d = p[static_cast<std::size_t>(y1) * w + x0];
                const T e = p[static_cast<std::size_t>(y1) * w + x1];
                const T top = a + wx * (b - a);
                const T bot = d + wx * (e - d);
                out.data()[(static_cast<std::size_t>(ch) * size + oy) * size + ox] =
                    top + wy * (bot - top);
            }
        }
    }
    return out;
}

template <typename T>
void crop_resize_vjp(const TransformSample& t, int src_h, int src_w, int size,
                     const Tensor<T>& gout, Tensor<T>& gin) {
    const int c = gin.dim(0);
    const double sy = static_cast<double>(t.crop_h) / size;
    const double sx = static_cast<double>(t.crop_w) / size;
    for (int oy = 0; oy < size; ++oy) {
        double fy = t.crop_top + (oy + 0.5) * sy - 0.5;
        fy = std::min(std::max(fy, 0.0), static_cast<double>(src_h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src_h - 1);
        const T wy = static_cast<T>(fy - y0);
        for (int ox = 0; ox < size; ++ox) {
            double fx = t.crop_left + (ox + 0.5) * sx - 0.5;
            fx = std::min(std::max(fx, 0.0), static_cast<double>(src_w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src_w - 1);
            const T wx = static_cast<T>(fx - x0);
            for (int ch = 0; ch < c; ++ch) {
                const T g = gout.data()[(static_cast<std::size_t>(ch) * size + oy) * size + ox];
                T* p = gin.data() + (static_cast<std::size_t>(ch) * src_h) * src_w;
                p[static_cast<std::size_t>(y0) * src_w + x0] += (1 - wx) * (1 - wy) * g;
                p[static_cast<std::size_t>(y0) * src_w + x1] += wx * (1 - wy) * g;
                p[static_cast<std::size_t>(y1) * src_w + x0] += (1 - wx) * wy * g;
                p[static_cast<std::size_t>(y1) * src_w + x1] += wx * wy * g;
            }
        }
    }
}

inline int reflect_index(int i, int l) {
    if (i < 0) return -i;
    if (i >= l) return 2 * l - 2 - i;
    return i;
}

// reflect-pad by t.pad then crop at offsets (crop_top, crop_left)
template <typename T>
Tensor<T> pad_crop(const TransformSample& t, const Tensor<T>& in) {
    const int c = in.dim(0), l = in.dim(1);
    if (in.dim(2) != l) throw std::invalid_argument("supervised transform requires square images");
    Tensor<T> out({c, l, l});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < l; ++y) {
            const int sy = reflect_index(t.crop_top + y - t.pad, l);
            for (int x = 0; x < l; ++x) {
                const int sx = reflect_index(t.crop_left + x - t.pad, l);
                out.data()[(static_cast<std::size_t>(ch) * l + y) * l + x] =
                    in.data()[(static_cast<std::size_t>(ch) * l + sy) * l + sx];
            }
        }
    return out;
}

template <typename T>
void pad_crop_vjp(const TransformSample& t, int l, const Tensor<T>& gout, Tensor<T>& gin) {
    const int c = gin.dim(0);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < l; ++y) {
            const int sy = reflect_index(t.crop_top + y - t.pad, l);
            for (int x = 0; x < l; ++x) {
                const int sx = reflect_index(t.crop_left + x - t.pad, l);
                gin.data()[(static_cast<std::size_t>(ch) * l + sy) * l + sx] +=
                    gout.data()[(static_cast<std::size_t>(ch) * l + y) * l + x];
            }
        }
}

template <typename T>
void flip_horizontal(Tensor<T>& img) {
    const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y) {
            T* row = img.data() + (static_cast<std::size_t>(ch) * h + y) * w;
            for (int x = 0; x < w / 2; ++x) std::swap(row[x], row[w - 1 - x]);
        }
}

template <typename T>
T pixel_luminance(const T* px, std::size_t plane, int c) {
    if (c == 1) return px[0];
    return static_cast<T>(kLumR) * px[0] + static_cast<T>(kLumG) * px[plane] +
           static_cast<T>(kLumB) * px[2 * plane];
}

template <typename T>
void apply_brightness(Tensor<T>& img, T f) {
    for (std::size_t i = 0; i < img.size(); ++i) img[i] *= f;
}

template <typename T>
void apply_contrast(Tensor<T>& img, T f) {
    const int c = img.dim(0);
    const std::size_t plane = img.size() / c;
    double sum = 0.0;
    for (std::size_t p = 0; p < plane; ++p)
        sum += static_cast<double>(pixel_luminance(img.data() + p, plane, c));
    const T m = static_cast<T>(sum / static_cast<double>(plane));
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = f * img[i] + (1 - f) * m;
}

template <typename T>
void contrast_vjp(Tensor<T>& g, T f) {
    const int c = g.dim(0);
    const std::size_t plane = g.size() / c;
    double total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) total += static_cast<double>(g[i]);
    const T lw[3] = {static_cast<T>(kLumR), static_cast<T>(kLumG), static_cast<T>(kLumB)};
    const T s = static_cast<T>(total / static_cast<double>(plane));
    for (int ch = 0; ch < c; ++ch) {
        const T add = (1 - f) * (c == 1 ? s : lw[ch] * s);
        T* p = g.data() + static_cast<std::size_t>(ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] = f * p[i] + add;
    }
}

template <typename T>
void apply_saturation(Tensor<T>& img, T f) {
    const int c = img.dim(0);
    if (c == 1) return;
    const std::size_t plane = img.size() / c;
    for (std::size_t p = 0; p < plane; ++p) {
        const T lum = pixel_luminance(img.data() + p, plane, c);
        for (int ch = 0; ch < 3; ++ch) {
            T& v = img.data()[static_cast<std::size_t>(ch) * plane + p];
            v = f * v + (1 - f) * lum;
        }
    }
}

template <typename T>
void saturation_vjp(Tensor<T>& g, T f) {
    const int c = g.dim(0);
    if (c == 1) return;
    const std::size_t plane = g.size() / c;
    const T lw[3] = {static_cast<T>(kLumR), static_cast<T>(kLumG), static_cast<T>(kLumB)};
    for (std::size_t p = 0; p < plane; ++p) {
        T s = 0;
        for (int ch = 0; ch < 3; ++ch) s += g.data()[static_cast<std::size_t>(ch) * plane + p];
        for (int ch = 0; ch < 3; ++ch) {
            T& v = g.data()[static_cast<std::size_t>(ch) * plane + p];
            v = f * v + (1 - f) * lw[ch] * s;
        }
    }
}

// RGB -> YIQ; hue rotation is a rotation of the (I, Q) chroma plane
constexpr double kYiq[3][3] = {{0.299, 0.587, 0.114},
                               {0.595716, -0.274453, -0.321263},
                               {0.211456, -0.522591, 0.311135}};

std::array<std::array<double, 3>, 3> yiq_inverse() {
    const auto& m = kYiq;
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    std::array<std::array<double, 3>, 3> inv{};
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return inv;
}

std::array<std::array<double, 3>, 3> hue_matrix(double hue_turns) {
    const double theta = 2.0 * std::numbers::pi * hue_turns;
    const double co = std::cos(theta), si = std::sin(theta);
    const double rot[3][3] = {{1, 0, 0}, {0, co, -si}, {0, si, co}};
    static const auto inv = yiq_inverse();
    std::array<std::array<double, 3>, 3> m{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) acc += inv[i][a] * rot[a][b] * kYiq[b][j];
            m[i][j] = acc;
        }
    return m;
}

template <typename T>
void apply_matrix3(Tensor<T>& img, const std::array<std::array<double, 3>, 3>& m,
                   bool transpose) {
    const int c = img.dim(0);
    if (c == 1) return;
    const std::size_t plane = img.size() / c;
    for (std::size_t p = 0; p < plane; ++p) {
        T v[3];
        for (int ch = 0; ch < 3; ++ch) v[ch] = img.data()[static_cast<std::size_t>(ch) * plane + p];
        for (int i = 0; i < 3; ++i) {
            double acc = 0.0;
            for (int j = 0; j < 3; ++j)
                acc += (transpose ? m[j][i] : m[i][j]) * static_cast<double>(v[j]);
            img.data()[static_cast<std::size_t>(i) * plane + p] = static_cast<T>(acc);
        }
    }
}

template <typename T>
void apply_grayscale(Tensor<T>& img) {
    const int c = img.dim(0);
    if (c == 1) return;
    const std::size_t plane = img.size() / c;
    for (std::size_t p = 0; p < plane; ++p) {
        const T lum = pixel_luminance(img.data() + p, plane, c);
        for (int ch = 0; ch < 3; ++ch) img.data()[static_cast<std::size_t>(ch) * plane + p] = lum;
    }
}

template <typename T>
void grayscale_vjp(Tensor<T>& g) {
    const int c = g.dim(0);
    if (c == 1) return;
    const std::size_t plane = g.size() / c;
    const T lw[3] = {static_cast<T>(kLumR), static_cast<T>(kLumG), static_cast<T>(kLumB)};
    for (std::size_t p = 0; p < plane; ++p) {
        T s = 0;
        for (int ch = 0; ch < 3; ++ch) s += g.data()[static_cast<std::size_t>(ch) * plane + p];
        for (int ch = 0; ch < 3; ++ch) g.data()[static_cast<std::size_t>(ch) * plane + p] = lw[ch] * s;
    }
}

} // namespace

// ---------------------------------------------------------------------------
// forward / backward
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> apply_transform_fwd(const TransformSample& t, const Tensor<T>& image,
                              TransformTape<T>& tape) {
    check_image(image);
    tape.src_h = image.dim(1);
    tape.src_w = image.dim(2);

    Tensor<T> out;
    if (t.mode == Mode::supervised)
        out = pad_crop(t, image);
    else
        out = crop_resize(t, image, image.dim(1)); // crops resize back to the source side

    if (t.flip) flip_horizontal(out);
    if (t.mode == Mode::contrastive) {
        if (t.jitter_active) {
            apply_brightness(out, static_cast<T>(t.brightness));
            apply_contrast(out, static_cast<T>(t.contrast));
            apply_saturation(out, static_cast<T>(t.saturation));
            apply_matrix3(out, hue_matrix(t.hue_turns), false);
        }
        if (t.gray_active) apply_grayscale(out);
    }
    tape.pre_clamp = out;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::min(std::max(out[i], T(0)), T(1));
    return out;
}

template <typename T>
Tensor<T> apply_transform(const TransformSample& t, const Tensor<T>& image) {
    TransformTape<T> tape;
    return apply_transform_fwd(t, image, tape);
}

template <typename T>
Tensor<T> apply_transform_vjp(const TransformSample& t, const TransformTape<T>& tape,
                              const Tensor<T>& gout) {
    Tensor<T> g = gout;
    // clamp subgradient: pass only where the pre-clamp value lies inside (0,1)
    for (std::size_t i = 0; i < g.size(); ++i) {
        const T v = tape.pre_clamp[i];
        if (!(v > T(0) && v < T(1))) g[i] = 0;
    }
    if (t.mode == Mode::contrastive) {
        if (t.gray_active) grayscale_vjp(g);
        if (t.jitter_active) {
            apply_matrix3(g, hue_matrix(t.hue_turns), true);
            saturation_vjp(g, static_cast<T>(t.saturation));
            contrast_vjp(g, static_cast<T>(t.contrast));
            apply_brightness(g, static_cast<T>(t.brightness));
        }
    }
    if (t.flip) flip_horizontal(g);

    Tensor<T> gin({g.dim(0), tape.src_h, tape.src_w});
    if (t.mode == Mode::supervised)
        pad_crop_vjp(t, tape.src_h, g, gin);
    else
        crop_resize_vjp(t, tape.src_h, tape.src_w, g.dim(1), g, gin);
    return gin;
}

template <typename T>
Tensor<T> supervised_transform(RngStream& rng, const Tensor<T>& image) {
    check_image(image);
    if (image.dim(1) != image.dim(2))
        throw std::invalid_argument("supervised transform requires square images");
    AugmentationSpec spec = AugmentationSpec::supervised(image.dim(1));
    return apply_transform(sample_transform(spec, rng), image);
}

// ---------------------------------------------------------------------------
// batched application
// ---------------------------------------------------------------------------

TensorF apply_batch_fwd(const std::vector<TransformSample>& ts, const TensorF& batch,
                        std::vector<TransformTape<float>>& tapes) {
    const int n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
    if (static_cast<int>(ts.size()) != n)
        throw std::invalid_argument("one TransformSample per batch sample required");
    tapes.assign(n, {});
    TensorF out({n, c, h, w});
    const int nt = num_threads();
#pragma omp parallel for num_threads(nt) if (nt > 1)
    for (int i = 0; i < n; ++i) {
        TensorF img({c, h, w});
        std::copy(batch.data() + static_cast<std::size_t>(i) * c * h * w,
                  batch.data() + static_cast<std::size_t>(i + 1) * c * h * w, img.data());
        TensorF o = apply_transform_fwd(ts[i], img, tapes[i]);
        std::copy(o.data(), o.data() + o.size(),
                  out.data() + static_cast<std::size_t>(i) * c * h * w);
    }
    return out;
}

TensorF apply_batch(const std::vector<TransformSample>& ts, const TensorF& batch) {
    std::vector<TransformTape<float>> tapes;
    return apply_batch_fwd(ts, batch, tapes);
}

TensorF apply_batch_vjp(const std::vector<TransformSample>& ts,
                        const std::vector<TransformTape<float>>& tapes,
                        const TensorF& gout) {
    const int n = gout.dim(0), c = gout.dim(1), h = gout.dim(2), w = gout.dim(3);
    TensorF gin({n, c, tapes.empty() ? h : tapes[0].src_h, tapes.empty() ? w : tapes[0].src_w});
    const int nt = num_threads();
#pragma omp parallel for num_threads(nt) if (nt > 1)
    for (int i = 0; i < n; ++i) {
        TensorF g({c, h, w});
        std::copy(gout.data() + static_cast<std::size_t>(i) * c * h * w,
                  gout.data() + static_cast<std::size_t>(i + 1) * c * h * w, g.data());
        TensorF gi = apply_transform_vjp(ts[i], tapes[i], g);
        std::copy(gi.data(), gi.data() + gi.size(),
                  gin.data() + static_cast<std::size_t>(i) * gi.size());
    }
    return gin;
}

// ---------------------------------------------------------------------------
// finite-difference check
// ---------------------------------------------------------------------------

JacobianReport jacobian_check(const TransformSample& t, const TensorD& image,
                              double tolerance, double fd_step,
                              std::uint64_t functional_seed) {
    RngStream rng(functional_seed);
    TransformTape<double> tape;
    const TensorD out0 = apply_transform_fwd(t, image, tape);

    TensorD weights(out0.shape());
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = rng.uniform(-1.0, 1.0);

    const TensorD analytic = apply_transform_vjp(t, tape, weights);

    auto functional = [&](const TensorD& x) {
        const TensorD y = apply_transform(t, x);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += weights[i] * y[i];
        return acc;
    };

    TensorD fd(image.shape());
    TensorD probe = image;
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + fd_step;
        const double fp = functional(probe);
        probe[i] = orig - fd_step;
        const double fm = functional(probe);
        probe[i] = orig;
        fd[i] = (fp - fm) / (2.0 * fd_step);
    }

    double scale = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) scale = std::max(scale, std::abs(fd[i]));
    scale = std::max(scale, 1e-6);

    JacobianReport report;
    for (std::size_t i = 0; i < fd.size(); ++i)
        report.max_rel_err = std::max(report.max_rel_err, std::abs(analytic[i] - fd[i]) / scale);
    report.passed = report.max_rel_err < tolerance;
    return report;
}

// explicit instantiations
template Tensor<float> apply_transform<float>(const TransformSample&, const Tensor<float>&);
template Tensor<double> apply_transform<double>(const TransformSample&, const Tensor<double>&);
template Tensor<float> apply_transform_fwd<float>(const TransformSample&, const Tensor<float>&,
                                                  TransformTape<float>&);
template Tensor<double> apply_transform_fwd<double>(const TransformSample&, const Tensor<double>&,
                                                    TransformTape<double>&);
template Tensor<float> apply_transform_vjp<float>(const TransformSample&,
                                                  const TransformTape<float>&,
                                                  const Tensor<float>&);
template Tensor<double> apply_transform_vjp<double>(const TransformSample&,
                                                    const TransformTape<double>&,
                                                    const Tensor<double>&);
template Tensor<float> supervised_transform<float>(RngStream&, const Tensor<float>&);
template Tensor<double> supervised_transform<double>(RngStream&, const Tensor<double>&);

} // namespace poisonforge::augment
