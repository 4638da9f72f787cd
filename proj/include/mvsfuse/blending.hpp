#pragma once

#include <cstddef>
#include <vector>

namespace mvsfuse {

/// Row-major interleaved samples in [0,1], 1 or 3 channels.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    static Image create(int width, int height, int channels, double fill = 0.0);

    double& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    void validate() const;
};

/// Region to replace from the source. Border pixels must stay false so the
/// Dirichlet boundary is always defined.
struct BlendMask {
    BlendMask(int width, int height, std::vector<char> inside);

    bool at(int x, int y) const {
        return inside[static_cast<std::size_t>(y) * width + x] != 0;
    }

    int width = 0;
    int height = 0;
    std::vector<char> inside;
};

enum class BlendMode {
    kNormalClone,         // guidance = source gradients
    kMonochromeTransfer,  // guidance = grayscale source gradients, per channel
};

/// Gradient-domain compositing: outside the mask the target is copied
/// untouched; inside, the discrete Poisson equation with the source's guidance
/// field and target boundary values is solved per channel (matrix-free
/// conjugate gradient on the 4-neighbor Laplacian). The returned image is
/// clamped to [0,1]; pass `unclamped` to also receive the raw solution, whose
/// masked pixels satisfy the stencil equation to < 1e-6.
Image poisson_blend(const Image& target, const Image& source, const BlendMask& mask,
                    BlendMode mode, Image* unclamped = nullptr);

/// Spectral swap: per channel, keeps the rendered image's frequencies with
/// normalized radius <= cutoff and the original's above it. cutoff lies in
/// (0,1], where 1 covers the whole spectrum (output = rendered).
Image frequency_fuse(const Image& original, const Image& rendered, double cutoff);

/// Luminance 0.299 R + 0.587 G + 0.114 B.
Image to_grayscale(const Image& img);

}  // namespace mvsfuse
