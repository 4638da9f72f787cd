#include "mvsfuse/blending.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>

#include "mvsfuse/error.hpp"

namespace mvsfuse {
namespace {

void require_same_shape(const Image& a, const Image& b, const char* op) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
        throw DimensionMismatch(std::string(op) + ": image shapes differ");
    }
}

// Channel extracted as a plane, or the luminance plane for monochrome guidance.
std::vector<double> guidance_plane(const Image& source, BlendMode mode, int channel) {
    const std::size_t n = static_cast<std::size_t>(source.width) * source.height;
    std::vector<double> plane(n);
    if (mode == BlendMode::kMonochromeTransfer && source.channels == 3) {
        for (std::size_t i = 0; i < n; ++i) {
            plane[i] = 0.299 * source.data[i * 3] + 0.587 * source.data[i * 3 + 1] +
                       0.114 * source.data[i * 3 + 2];
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            plane[i] = source.data[i * source.channels + channel];
        }
    }
    return plane;
}

}  // namespace

Image Image::create(int width, int height, int channels, double fill) {
    if (width < 1 || height < 1 || (channels != 1 && channels != 3)) {
        throw InvalidArgument("Image::create: bad shape " + std::to_string(width) + "x" +
                              std::to_string(height) + "x" + std::to_string(channels));
    }
    Image img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.data.assign(static_cast<std::size_t>(width) * height * channels, fill);
    return img;
}

void Image::validate() const {
    if (width < 1 || height < 1 || (channels != 1 && channels != 3)) {
        throw InvalidArgument("Image: bad shape");
    }
    if (data.size() != static_cast<std::size_t>(width) * height * channels) {
        throw InvalidArgument("Image: data length does not match shape");
    }
}

BlendMask::BlendMask(int width_, int height_, std::vector<char> inside_)
    : width(width_), height(height_), inside(std::move(inside_)) {
    if (width < 1 || height < 1 ||
        inside.size() != static_cast<std::size_t>(width) * height) {
        throw InvalidArgument("BlendMask: size does not match dimensions");
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const bool border = x == 0 || y == 0 || x == width - 1 || y == height - 1;
            if (border && at(x, y)) {
                throw InvalidArgument("BlendMask: masked pixel on the image border at (" +
                                      std::to_string(x) + "," + std::to_string(y) + ")");
            }
        }
    }
}

Image poisson_blend(const Image& target, const Image& source, const BlendMask& mask,
                    BlendMode mode, Image* unclamped) {
    target.validate();
    source.validate();
    require_same_shape(target, source, "poisson_blend");
    if (mask.width != target.width || mask.height != target.height) {
        throw DimensionMismatch("poisson_blend: mask shape differs from images");
    }

    const int w = target.width;
    const int h = target.height;

    std::vector<int> unknown(static_cast<std::size_t>(w) * h, -1);
    std::vector<int> px, py;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y)) continue;
            unknown[static_cast<std::size_t>(y) * w + x] = static_cast<int>(px.size());
            px.push_back(x);
            py.push_back(y);
        }
    }
    const std::size_t n = px.size();

    Image raw = target;
    if (n > 0) {
        const int dx[4] = {1, -1, 0, 0};
        const int dy[4] = {0, 0, 1, -1};
        // 4x(p) - sum of masked neighbors; boundary terms live in b.
        auto apply = [&](const std::vector<double>& x, std::vector<double>& out) {
            for (std::size_t i = 0; i < n; ++i) {
                double v = 4.0 * x[i];
                for (int d = 0; d < 4; ++d) {
                    const int qx = px[i] + dx[d];
                    const int qy = py[i] + dy[d];
                    const int j = unknown[static_cast<std::size_t>(qy) * w + qx];
                    if (j >= 0) v -= x[j];
                }
                out[i] = v;
            }
        };

        const std::size_t cap = 10 * static_cast<std::size_t>(std::sqrt(static_cast<double>(n))) + 1000;

        for (int c = 0; c < target.channels; ++c) {
            const std::vector<double> g = guidance_plane(source, mode, c);
            auto g_at = [&](int x, int y) { return g[static_cast<std::size_t>(y) * w + x]; };

            std::vector<double> b(n), x(n);
            for (std::size_t i = 0; i < n; ++i) {
                double v = 4.0 * g_at(px[i], py[i]);
                for (int d = 0; d < 4; ++d) {
                    const int qx = px[i] + dx[d];
                    const int qy = py[i] + dy[d];
                    v -= g_at(qx, qy);
                    if (unknown[static_cast<std::size_t>(qy) * w + qx] < 0) {
                        v += target.at(qx, qy, c);
                    }
                }
                b[i] = v;
                x[i] = g_at(px[i], py[i]);  // warm start: residual concentrates at the seam
            }

            std::vector<double> r(n), p(n), ap(n);
            apply(x, ap);
            double rr = 0.0, rinf = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                r[i] = b[i] - ap[i];
                rr += r[i] * r[i];
                rinf = std::max(rinf, std::abs(r[i]));
            }
            p = r;
            for (std::size_t iter = 0; iter < cap && rinf >= 1e-8; ++iter) {
                apply(p, ap);
                double pap = 0.0;
                for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
                if (pap <= 0.0) break;  // numerically exhausted
                const double alpha = rr / pap;
                double rr_next = 0.0;
                rinf = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    x[i] += alpha * p[i];
                    r[i] -= alpha * ap[i];
                    rr_next += r[i] * r[i];
                    rinf = std::max(rinf, std::abs(r[i]));
                }
                const double beta = rr_next / rr;
                rr = rr_next;
                for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
            }

            // Recurrence residuals drift; certify against the true one.
            apply(x, ap);
            double true_rinf = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                true_rinf = std::max(true_rinf, std::abs(b[i] - ap[i]));
            }
            if (true_rinf >= 1e-6) {
                throw SolverDivergence("poisson_blend: residual " + std::to_string(true_rinf) +
                                       " after " + std::to_string(cap) + " iterations");
            }

            for (std::size_t i = 0; i < n; ++i) raw.at(px[i], py[i], c) = x[i];
        }
    }

    if (unclamped) *unclamped = raw;
    Image out = raw;
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

Image frequency_fuse(const Image& original, const Image& rendered, double cutoff) {
    original.validate();
    rendered.validate();
    require_same_shape(original, rendered, "frequency_fuse");
    if (!(cutoff > 0.0 && cutoff <= 1.0)) {
        throw InvalidArgument("frequency_fuse: cutoff must lie in (0, 1]");
    }

    const int w = original.width;
    const int h = original.height;
    const int wc = w / 2 + 1;  // r2c half-spectrum width
    const std::size_t plane_n = static_cast<std::size_t>(w) * h;

    std::vector<double> plane(plane_n);
    std::vector<std::complex<double>> spec_orig(static_cast<std::size_t>(h) * wc);
    std::vector<std::complex<double>> spec_rend(static_cast<std::size_t>(h) * wc);

    // FFTW_UNALIGNED lets the plans run on each channel's buffers.
    fftw_plan fwd = fftw_plan_dft_r2c_2d(h, w, plane.data(),
                                         reinterpret_cast<fftw_complex*>(spec_orig.data()),
                                         FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_plan inv = fftw_plan_dft_c2r_2d(h, w,
                                         reinterpret_cast<fftw_complex*>(spec_orig.data()),
                                         plane.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);

    // Radius normalized so the spectrum corner sits at exactly 1.
    const double ny = h / 2.0;
    const double nx = w / 2.0;
    auto radius = [&](int iy, int ix) {
        const double fy = iy <= h / 2 ? iy : iy - h;
        const double fx = ix;  // half-spectrum: ix in [0, w/2]
        const double ty = fy / ny;
        const double tx = fx / nx;
        return std::sqrt((ty * ty + tx * tx) / 2.0);
    };

    Image out = Image::create(w, h, original.channels);
    for (int c = 0; c < original.channels; ++c) {
        for (std::size_t i = 0; i < plane_n; ++i) {
            plane[i] = original.data[i * original.channels + c];
        }
        fftw_execute_dft_r2c(fwd, plane.data(),
                             reinterpret_cast<fftw_complex*>(spec_orig.data()));
        for (std::size_t i = 0; i < plane_n; ++i) {
            plane[i] = rendered.data[i * rendered.channels + c];
        }
        fftw_execute_dft_r2c(fwd, plane.data(),
                             reinterpret_cast<fftw_complex*>(spec_rend.data()));

        for (int iy = 0; iy < h; ++iy) {
            for (int ix = 0; ix < wc; ++ix) {
                const std::size_t i = static_cast<std::size_t>(iy) * wc + ix;
                if (radius(iy, ix) > cutoff) spec_rend[i] = spec_orig[i];
            }
        }

        fftw_execute_dft_c2r(inv, reinterpret_cast<fftw_complex*>(spec_rend.data()),
                             plane.data());
        const double scale = 1.0 / static_cast<double>(plane_n);
        for (std::size_t i = 0; i < plane_n; ++i) {
            out.data[i * out.channels + c] = std::clamp(plane[i] * scale, 0.0, 1.0);
        }
    }

    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    return out;
}

Image to_grayscale(const Image& img) {
    img.validate();
    if (img.channels != 3) {
        throw ChannelMismatch("to_grayscale: expected a 3-channel image");
    }
    Image out = Image::create(img.width, img.height, 1);
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t i = 0; i < n; ++i) {
        out.data[i] = 0.299 * img.data[i * 3] + 0.587 * img.data[i * 3 + 1] +
                      0.114 * img.data[i * 3 + 2];
    }
    return out;
}

}  // namespace mvsfuse
