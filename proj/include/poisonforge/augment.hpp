#pragma once

#include <stdexcept>
#include <vector>

#include "poisonforge/rng.hpp"
#include "poisonforge/tensor.hpp"

namespace poisonforge::augment {

enum class Mode { supervised, contrastive };

// Strength-parameterized augmentation distribution. The contrastive pipeline
// is crop -> flip -> color jitter -> grayscale with per-transform strengths
// (coupled mode sets all three to the same s); the supervised pipeline is
// reflect-pad + crop -> flip.
struct AugmentationSpec {
    Mode mode = Mode::contrastive;
    double s_crop = 1.0;
    double s_jitter = 1.0;
    double s_gray = 1.0;
    int image_size = 32;
    double flip_prob = 0.5;

    static AugmentationSpec contrastive(double s, int image_size);
    static AugmentationSpec contrastive_decoupled(double s_crop, double s_jitter,
                                                  double s_gray, int image_size);
    static AugmentationSpec supervised(int image_size);

    bool coupled() const { return s_crop == s_jitter && s_jitter == s_gray; }
    void validate() const;
};

// One concrete draw from the augmentation distribution.
struct TransformSample {
    Mode mode = Mode::contrastive;
    // contrastive: crop box inside the source image.
    // supervised: crop offset into the reflect-padded image, crop_h = crop_w = l.
    int crop_top = 0, crop_left = 0, crop_h = 0, crop_w = 0;
    bool flip = false;
    bool jitter_active = false;
    double brightness = 1.0, contrast = 1.0, saturation = 1.0, hue_turns = 0.0;
    bool gray_active = false;
    int pad = 0; // supervised only

    bool operator==(const TransformSample&) const = default;
};

TransformSample sample_transform(const AugmentationSpec& spec, RngStream& rng);

// The draw every pipeline maps to the identity (modulo the final clamp).
TransformSample identity_transform(const AugmentationSpec& spec);

// Intermediates needed by the backward pass.
template <typename T>
struct TransformTape {
    int src_h = 0, src_w = 0;
    Tensor<T> pre_clamp;
};

// Forward application to a (C, H, W) image; output is clamped to [0, 1].
template <typename T>
Tensor<T> apply_transform(const TransformSample& t, const Tensor<T>& image);

template <typename T>
Tensor<T> apply_transform_fwd(const TransformSample& t, const Tensor<T>& image,
                              TransformTape<T>& tape);

// Vector-Jacobian product: gradient of a scalar w.r.t. the input pixels given
// the gradient w.r.t. the output. The clamp uses the straight-through
// subgradient (1 strictly inside (0,1), 0 outside).
template <typename T>
Tensor<T> apply_transform_vjp(const TransformSample& t, const TransformTape<T>& tape,
                              const Tensor<T>& gout);

// Supervised pipeline convenience: draw + apply in one call.
template <typename T>
Tensor<T> supervised_transform(RngStream& rng, const Tensor<T>& image);

// Batched application with one TransformSample per sample; parallel over the
// batch (samples are independent).
TensorF apply_batch(const std::vector<TransformSample>& ts, const TensorF& batch);
TensorF apply_batch_fwd(const std::vector<TransformSample>& ts, const TensorF& batch,
                        std::vector<TransformTape<float>>& tapes);
TensorF apply_batch_vjp(const std::vector<TransformSample>& ts,
                        const std::vector<TransformTape<float>>& tapes,
                        const TensorF& gout);

struct JacobianReport {
    double max_rel_err = 0.0;
    bool passed = false;
};

// Central finite-difference check (float64) of the analytic input gradient of
// a random linear functional of apply_transform. Relative error is measured
// against the max-norm of the finite-difference gradient.
JacobianReport jacobian_check(const TransformSample& t, const TensorD& image,
                              double tolerance, double fd_step = 1e-5,
                              std::uint64_t functional_seed = 0x5eedf00dULL);

inline constexpr double kLumR = 0.299;
inline constexpr double kLumG = 0.587;
inline constexpr double kLumB = 0.114;

} // namespace poisonforge::augment
